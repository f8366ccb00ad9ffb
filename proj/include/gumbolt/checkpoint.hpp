#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gumbolt/tensor.hpp"

namespace gumbolt {

/// Little-endian binary container: "GBLT", u32 version, u32 entry count, then
/// per entry u32 name length, name bytes, u8 kind (0 = f64 tensor, 1 = bytes),
/// and for tensors u32 rank, u64 dims, f64 values; for bytes u64 length, data.
struct CheckpointFile {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> blobs;

  const Tensor& tensor(const std::string& name) const;
  const std::string& blob(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static CheckpointFile load(const std::filesystem::path& path);

  std::vector<std::uint8_t> encode() const;
  static CheckpointFile decode(const std::vector<std::uint8_t>& bytes);
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gumbolt
