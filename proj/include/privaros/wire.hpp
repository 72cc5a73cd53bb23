#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "privaros/digest.hpp"

namespace privaros {

struct WireError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Canonical length-prefixed binary encoding shared by attestation reports and
// permission artifacts. All integers are little-endian fixed width; variable
// fields carry a u32 byte-length prefix. Layout per record type is documented
// where the record is defined.
class WireWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>(v >> (8 * i)));
    }

    void bytes(std::string_view b) {
        if (b.size() > 0xffffffffull) throw WireError("field too large");
        u32(static_cast<std::uint32_t>(b.size()));
        out_.append(b);
    }

    void digest(const Digest& d) { out_.append(digest_view(d)); }

    const std::string& str() const { return out_; }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class WireReader {
public:
    explicit WireReader(std::string_view data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(raw(1)[0]); }

    std::uint32_t u32() {
        auto b = raw(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        auto b = raw(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }

    std::string bytes() {
        std::uint32_t n = u32();
        return std::string(raw(n));
    }

    Digest digest() {
        auto b = raw(32);
        Digest d{};
        std::memcpy(d.data(), b.data(), 32);
        return d;
    }

    bool done() const { return pos_ == data_.size(); }

    void expect_done() const {
        if (!done()) throw WireError("trailing bytes after record");
    }

private:
    std::string_view raw(std::size_t n) {
        if (data_.size() - pos_ < n) throw WireError("truncated record");
        std::string_view v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace privaros
