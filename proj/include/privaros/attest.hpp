#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/crypto.hpp"
#include "privaros/refmon.hpp"
#include "privaros/wire.hpp"

namespace privaros {

struct MeasuredComponent {
    std::string name;
    Digest digest{};
};

// Hash chain over the boot sequence: chain_0 = H(IV), chain_i = H(chain_{i-1} || d_i).
class MeasurementChain {
public:
    static Digest initial_value() { return sha256(std::string("privaros.chain.iv")); }

    MeasurementChain() : value_(sha256(digest_view(initial_value()))) {}

    void append(std::string name, const Digest& component_digest) {
        components_.push_back({std::move(name), component_digest});
        value_ = sha256(digest_view(value_) + digest_view(component_digest));
    }

    static Digest compute(const std::vector<MeasuredComponent>& components) {
        MeasurementChain c;
        for (const auto& m : components) c.append(m.name, m.digest);
        return c.value();
    }

    const Digest& value() const { return value_; }
    const std::vector<MeasuredComponent>& components() const { return components_; }

private:
    std::vector<MeasuredComponent> components_;
    Digest value_{};
};

struct LaunchLogEntry {
    std::string app_name;
    Digest image_digest{};  // digest of the image actually executed
    Time at = 0;

    bool operator==(const LaunchLogEntry&) const = default;
};

// Canonical binary layout (all integers little-endian):
//   magic "PVRA", u8 version(1),
//   boot chain (32 bytes),
//   u32 entry count, entries as { u32 name_len, name, digest(32), u64 time },
//   u32 nonce_len, nonce,
//   signature (32 bytes).
// The signature covers (chain || launch-log digest || nonce).
struct AttestationReport {
    Digest boot_chain{};
    std::vector<LaunchLogEntry> launch_log;
    std::string nonce;
    Signature signature{};

    static constexpr std::string_view magic = "PVRA";

    std::string launch_log_encoding() const {
        WireWriter w;
        w.u32(static_cast<std::uint32_t>(launch_log.size()));
        for (const auto& e : launch_log) {
            w.bytes(e.app_name);
            w.digest(e.image_digest);
            w.u64(e.at);
        }
        return w.take();
    }

    std::string signed_payload() const {
        return digest_view(boot_chain) + digest_view(sha256(launch_log_encoding())) + nonce;
    }

    std::string encode() const {
        WireWriter out;
        for (char c : magic) out.u8(static_cast<std::uint8_t>(c));
        out.u8(1);
        out.digest(boot_chain);
        out.u32(static_cast<std::uint32_t>(launch_log.size()));
        for (const auto& e : launch_log) {
            out.bytes(e.app_name);
            out.digest(e.image_digest);
            out.u64(e.at);
        }
        out.bytes(nonce);
        out.digest(signature);
        return out.take();
    }

    static AttestationReport decode(std::string_view data) {
        WireReader r(data);
        for (char c : magic)
            if (r.u8() != static_cast<std::uint8_t>(c)) throw WireError("bad report magic");
        if (r.u8() != 1) throw WireError("unsupported report version");
        AttestationReport rep;
        rep.boot_chain = r.digest();
        std::uint32_t n = r.u32();
        rep.launch_log.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            LaunchLogEntry e;
            e.app_name = r.bytes();
            e.image_digest = r.digest();
            e.at = r.u64();
            rep.launch_log.push_back(std::move(e));
        }
        rep.nonce = r.bytes();
        rep.signature = r.digest();
        r.expect_done();
        return rep;
    }

    bool operator==(const AttestationReport&) const = default;
};

struct AlreadyMeasuredError : std::logic_error {
    AlreadyMeasuredError() : std::logic_error("boot already measured") {}
};

struct NotBootedError : std::logic_error {
    NotBootedError() : std::logic_error("boot not measured yet") {}
};

// Simulated trusted-execution environment: key custody, measured boot,
// application launch log and challenge-response attestation.
class Tee {
public:
    Tee(LogicalClock& clock, std::string_view key_seed) : clock_(clock), key_(make_keypair(key_seed)) {}

    const PublicKey& public_key() const { return key_.pub; }

    const MeasurementChain& measure_boot(const std::vector<MeasuredComponent>& components) {
        if (chain_) throw AlreadyMeasuredError();
        chain_.emplace();
        for (const auto& c : components) chain_->append(c.name, c.digest);
        return *chain_;
    }

    // Overload measuring raw component images.
    const MeasurementChain& measure_boot_images(
        const std::vector<std::pair<std::string, std::string>>& components) {
        std::vector<MeasuredComponent> ms;
        ms.reserve(components.size());
        for (const auto& [name, image] : components) ms.push_back({name, sha256(image)});
        return measure_boot(ms);
    }

    bool booted() const { return chain_.has_value(); }

    const Digest& boot_chain() const {
        if (!chain_) throw NotBootedError();
        return chain_->value();
    }

    const LaunchLogEntry& record_launch(std::string app_name, const Digest& image_digest) {
        if (!chain_) throw NotBootedError();
        launch_log_.push_back({std::move(app_name), image_digest, clock_.now});
        return launch_log_.back();
    }

    const std::vector<LaunchLogEntry>& launch_log() const { return launch_log_; }

    AttestationReport attest(std::string nonce) const {
        if (!chain_) throw NotBootedError();
        AttestationReport rep;
        rep.boot_chain = chain_->value();
        rep.launch_log = launch_log_;
        rep.nonce = std::move(nonce);
        rep.signature = sign(key_, rep.signed_payload());
        return rep;
    }

private:
    LogicalClock& clock_;
    KeyPair key_;
    std::optional<MeasurementChain> chain_;
    std::vector<LaunchLogEntry> launch_log_;
};

struct VerifyResult {
    bool trusted = false;
    std::string reason;  // first failed check when untrusted

    static VerifyResult ok() { return {true, ""}; }
    static VerifyResult fail(std::string r) { return {false, std::move(r)}; }
};

// Host-side report check: signature, nonce match, chain equality, and every
// expected trusted app present in the launch log, with no entry under that
// name carrying an unexpected digest (a swapped instance is a tampered stack).
inline VerifyResult verify_report(const AttestationReport& report, const Digest& expected_chain,
                                  const std::map<std::string, Digest>& expected_trusted_apps,
                                  const PublicKey& drone_public_key, std::string_view nonce) {
    if (!verify(drone_public_key, report.signed_payload(), report.signature))
        return VerifyResult::fail("signature");
    if (report.nonce != nonce) return VerifyResult::fail("nonce");
    if (report.boot_chain != expected_chain) return VerifyResult::fail("chain-mismatch");
    for (const auto& [name, digest] : expected_trusted_apps) {
        bool seen = false;
        for (const auto& e : report.launch_log) {
            if (e.app_name != name) continue;
            if (e.image_digest != digest)
                return VerifyResult::fail("launch-digest-mismatch:" + name);
            seen = true;
        }
        if (!seen) return VerifyResult::fail("launch-missing:" + name);
    }
    return VerifyResult::ok();
}

// Challenger with single-use nonces: a report presented twice, or under a
// nonce the verifier never issued, is rejected.
class Verifier {
public:
    Verifier(PublicKey drone_public_key, Digest expected_chain,
             std::map<std::string, Digest> expected_trusted_apps, std::string_view nonce_seed = "verifier")
        : drone_pub_(drone_public_key),
          expected_chain_(expected_chain),
          expected_apps_(std::move(expected_trusted_apps)),
          nonce_seed_(nonce_seed) {}

    std::string issue_nonce() {
        std::string n = digest_view(sha256(nonce_seed_ + "." + std::to_string(counter_++)));
        outstanding_.insert(n);
        return n;
    }

    VerifyResult verify(const AttestationReport& report) {
        auto it = outstanding_.find(report.nonce);
        if (it == outstanding_.end()) return VerifyResult::fail("nonce");
        outstanding_.erase(it);  // single use
        return verify_report(report, expected_chain_, expected_apps_, drone_pub_, report.nonce);
    }

private:
    PublicKey drone_pub_{};
    Digest expected_chain_{};
    std::map<std::string, Digest> expected_apps_;
    std::string nonce_seed_;
    std::uint64_t counter_ = 0;
    std::set<std::string> outstanding_;
};

}  // namespace privaros
