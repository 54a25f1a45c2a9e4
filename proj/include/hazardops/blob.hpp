#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hazardops::blob {

// On-disk layout of one real array, all integers and floats little-endian:
//   bytes 0..7   magic "HZOBLK01"
//   bytes 8..11  format version (u32, currently 1)
//   bytes 12..15 rank (u32)
//   rank x u64   dimensions
//   data         row-major IEEE-754 binary64
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

void write(std::ostream& out, const Array& array);
Array read(std::istream& in);

void write_file(const std::string& path, const Array& array);
Array read_file(const std::string& path);

} // namespace hazardops::blob
