#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ctxseg/errors.hpp"

namespace ctxseg {

// Versioned binary model format. Layout:
//   bytes 0..3   magic "CSEG"
//   bytes 4..5   format version (u16 LE)
//   bytes 6..7   payload kind   (u16 LE)
//   payload      kind-specific, all scalars little-endian, f64 = IEEE-754
// Writers emit into a std::string buffer first, so a failed save never leaves
// a half-written file behind.

constexpr std::uint16_t kFormatVersion = 1;

enum class PayloadKind : std::uint16_t {
    texton_forest = 1,
    linear_model = 2,
    presence_forest = 3,
    location_model = 4,
};

static_assert(std::endian::native == std::endian::little,
              "big-endian hosts would need byte swapping in serialize.hpp");

class BinaryWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }

    void f64_vec(const std::vector<double>& v) {
        u32(static_cast<std::uint32_t>(v.size()));
        for (double x : v) f64(x);
    }

    const std::string& buffer() const { return buf_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        require(out.is_open(), "cannot write model file: " + path);
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        require(out.good(), "write failed: " + path);
    }

private:
    void raw(const void* p, std::size_t n) {
        buf_.append(reinterpret_cast<const char*>(p), n);
    }
    std::string buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}

    static BinaryReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        require(in.is_open(), "cannot open model file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return BinaryReader(ss.str());
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return scalar<std::uint16_t>(); }
    std::uint32_t u32() { return scalar<std::uint32_t>(); }
    std::uint64_t u64() { return scalar<std::uint64_t>(); }
    std::int32_t i32() { return scalar<std::int32_t>(); }
    double f64() { return scalar<double>(); }

    std::string str() {
        const std::uint32_t n = u32();
        const char* p = take(n);
        return std::string(p, n);
    }

    std::vector<double> f64_vec() {
        const std::uint32_t n = u32();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }

    bool at_end() const { return pos_ == buf_.size(); }

private:
    template <typename T>
    T scalar() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    const char* take(std::size_t n) {
        require(pos_ + n <= buf_.size(), "truncated model file");
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::string buf_;
    std::size_t pos_ = 0;
};

inline void write_envelope(BinaryWriter& w, PayloadKind kind) {
    w.u8('C'); w.u8('S'); w.u8('E'); w.u8('G');
    w.u16(kFormatVersion);
    w.u16(static_cast<std::uint16_t>(kind));
}

inline void read_envelope(BinaryReader& r, PayloadKind expected) {
    require(r.u8() == 'C' && r.u8() == 'S' && r.u8() == 'E' && r.u8() == 'G',
            "bad magic in model file");
    const std::uint16_t version = r.u16();
    require(version == kFormatVersion,
            "unsupported model format version " + std::to_string(version));
    const std::uint16_t kind = r.u16();
    require(kind == static_cast<std::uint16_t>(expected), "model file has the wrong payload kind");
}

}  // namespace ctxseg
