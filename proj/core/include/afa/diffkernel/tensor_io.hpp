#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "afa/diffkernel/params.hpp"

namespace afa {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Named-tensor container:
//   magic "AFATNSR\0" | u32 version | u64 entry count
//   per entry: u32 name length | name bytes | u8 dtype (1 = f64) | u32 rank
//              | u64 dims[rank] | little-endian values
//   u64 FNV-1a digest of everything before it
inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<char> encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(const std::vector<char>& bytes);

// Writes via a temporary file and rename.
void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

NamedTensors to_named(const ParamStore& params);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace afa
