#include "hazardops/blob.hpp"

#include "hazardops/errors.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hazardops::blob {

namespace {

constexpr char kMagic[8] = {'H', 'Z', 'O', 'B', 'L', 'K', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(out, bits);
}

double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

bool host_is_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

} // namespace

void write(std::ostream& out, const Array& array) {
    std::size_t n = 1;
    for (std::size_t d : array.shape) n *= d;
    if (n != array.values.size()) {
        throw DimensionError("blob::write: shape does not match value count");
    }
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(array.shape.size()));
    for (std::size_t d : array.shape) put_u64(out, d);
    if (host_is_little_endian()) {
        out.write(reinterpret_cast<const char*>(array.values.data()),
                  static_cast<std::streamsize>(array.values.size() * sizeof(double)));
    } else {
        for (double x : array.values) put_f64(out, x);
    }
    if (!out) throw IoError("blob::write: stream failure");
}

Array read(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw IoError("blob::read: bad magic");
    }
    const std::uint32_t version = get_u32(in);
    if (version != kVersion) {
        throw IoError("blob::read: unsupported version " + std::to_string(version));
    }
    const std::uint32_t rank = get_u32(in);
    if (rank > 8) throw IoError("blob::read: implausible rank");
    Array array;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint64_t d = get_u64(in);
        array.shape.push_back(static_cast<std::size_t>(d));
        n *= static_cast<std::size_t>(d);
    }
    array.values.resize(n);
    if (host_is_little_endian()) {
        in.read(reinterpret_cast<char*>(array.values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < n; ++i) array.values[i] = get_f64(in);
    }
    if (!in) throw IoError("blob::read: truncated data");
    return array;
}

void write_file(const std::string& path, const Array& array) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("blob::write_file: cannot open " + path);
    write(out, array);
}

Array read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("blob::read_file: cannot open " + path);
    return read(in);
}

} // namespace hazardops::blob
