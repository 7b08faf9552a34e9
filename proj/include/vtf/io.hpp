#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "vtf/tensor.hpp"

namespace vtf {

// VTF1 layout: "VTF1", u32 rank, u32 extents..., f64 values (row-major), all little-endian.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b.data(), 4);
}

inline void put_f64(std::ostream& os, double x) {
    std::uint64_t v = std::bit_cast<std::uint64_t>(x);
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b.data(), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b;
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("VTF1: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) {
    std::array<unsigned char, 8> b;
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw FormatError("VTF1: truncated data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace detail

inline void write_vtf(std::ostream& os, const Tensor& f) {
    os.write("VTF1", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(f.rank()));
    for (auto e : f.shape()) detail::put_u32(os, static_cast<std::uint32_t>(e));
    for (double v : f.data()) detail::put_f64(os, v);
    if (!os) throw FormatError("VTF1: write failed");
}

inline Tensor read_vtf(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "VTF1", 4) != 0) throw FormatError("VTF1: bad magic");
    std::uint32_t d = detail::get_u32(is);
    if (d == 0 || d > 32) throw FormatError("VTF1: implausible rank " + std::to_string(d));
    Shape s(d);
    std::size_t n = 1;
    for (auto& e : s) {
        e = detail::get_u32(is);
        if (e == 0) throw FormatError("VTF1: zero extent");
        n *= e;
        if (n > (std::size_t{1} << 32)) throw FormatError("VTF1: tensor too large");
    }
    std::vector<double> data(n);
    for (auto& v : data) v = detail::get_f64(is);
    try {
        return Tensor(s, std::move(data));
    } catch (const DomainError&) {
        throw FormatError("VTF1: non-finite values");
    }
}

inline void write_vtf_file(const std::string& path, const Tensor& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write_vtf(os, f);
}

inline Tensor read_vtf_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return read_vtf(is);
}

}  // namespace vtf
