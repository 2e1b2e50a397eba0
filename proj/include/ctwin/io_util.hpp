#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ctwin/common.hpp"

namespace ctwin::io {

// Explicit little-endian scalar IO so files are byte-identical across hosts.

inline void write_u8(std::ostream &os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void write_u32(std::ostream &os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline void write_u64(std::ostream &os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void write_f64(std::ostream &os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint8_t read_u8(std::istream &is) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof())
        throw numeric_error("binary read: unexpected end of file");
    return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream &is) {
    char b[4];
    if (!is.read(b, 4))
        throw numeric_error("binary read: unexpected end of file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream &is) {
    char b[8];
    if (!is.read(b, 8))
        throw numeric_error("binary read: unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline double read_f64(std::istream &is) { return std::bit_cast<double>(read_u64(is)); }

inline void write_magic(std::ostream &os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream &is, const char (&magic)[5], const std::string &what) {
    char b[4];
    if (!is.read(b, 4) || b[0] != magic[0] || b[1] != magic[1] || b[2] != magic[2] || b[3] != magic[3])
        throw numeric_error(what + ": bad magic bytes (expected \"" + std::string(magic, 4) + "\")");
}

// Write to <path>.tmp then rename, so readers never observe a partial file.
class AtomicFileWriter {
  public:
    explicit AtomicFileWriter(const std::string &path) : path_(path), tmp_(path + ".tmp") {
        stream_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!stream_)
            throw numeric_error("cannot open file for writing: " + tmp_);
    }

    std::ofstream &stream() { return stream_; }

    void commit();

    ~AtomicFileWriter();

  private:
    std::string path_;
    std::string tmp_;
    std::ofstream stream_;
    bool committed_ = false;
};

} // namespace ctwin::io
