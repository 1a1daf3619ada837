#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmsum/nn/tensor.hpp"

namespace mmsum::nn {

// Flat named-array container used for checkpoints, embedding tables and
// feature side-files. On disk (all integers little-endian):
//
//   magic "MMCK" | u32 version (=1) | u64 entry count | entries...
//   entry: u32 name length | name bytes | u8 dtype | u8 rank
//          rank x u64 extents | payload
//   dtype 0: float64 payload, raw IEEE-754 bits, row-major
//   dtype 1: byte blob (rank is 1, extent is the byte count)
//
// Round-trips are bit-exact. Readers reject bad magic, unknown versions,
// duplicate names and truncated files.
struct NamedArrays {
  struct Array {
    Shape shape;
    std::vector<double> data;
  };

  std::vector<std::pair<std::string, Array>> arrays;
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> blobs;

  void put(const std::string& name, Shape shape, std::vector<double> data);
  void put_string(const std::string& name, const std::string& value);
  void put_u64(const std::string& name, std::uint64_t value);

  const Array* find(const std::string& name) const;
  // Checked lookups: missing entry raises an Error naming it.
  const Array& get(const std::string& name) const;
  std::string get_string(const std::string& name) const;
  std::uint64_t get_u64(const std::string& name) const;

  bool has(const std::string& name) const;
};

void save_named_arrays(const NamedArrays& na, const std::string& path);
NamedArrays load_named_arrays(const std::string& path);

}  // namespace mmsum::nn
