#include "afa/diffkernel/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace afa {
namespace {

constexpr char kMagic[8] = {'A', 'F', 'A', 'T', 'N', 'S', 'R', '\0'};
constexpr std::uint8_t kDtypeF64 = 1;

template <class T>
void put(std::vector<char>& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& b, std::size_t limit) : bytes_(b), limit_(limit) {}

  template <class T>
  T get() {
    need(sizeof(T));
    char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw FormatError("tensor container truncated or corrupt");
  }
  const std::vector<char>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<char> encode_tensors(const NamedTensors& tensors) {
  std::vector<char> out(kMagic, kMagic + sizeof(kMagic));
  put<std::uint32_t>(out, kTensorFormatVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.values()) put<double>(out, v);
  }
  put<std::uint64_t>(out, fnv1a64(out.data(), out.size()));
  return out;
}

NamedTensors decode_tensors(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a tensor container (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  char digest[8];
  std::memcpy(digest, bytes.data() + body, 8);
  if constexpr (std::endian::native == std::endian::big) std::reverse(digest, digest + 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, digest, 8);
  if (stored != fnv1a64(bytes.data(), body)) throw FormatError("tensor container checksum mismatch (corrupt file)");

  Reader r(bytes, body);
  r.get_string(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kTensorFormatVersion) {
    throw FormatError("tensor container version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kTensorFormatVersion) + ")");
  }
  const auto count = r.get<std::uint64_t>();
  NamedTensors out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto nlen = r.get<std::uint32_t>();
    std::string name = r.get_string(nlen);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kDtypeF64) throw FormatError("unsupported dtype tag " + std::to_string(dtype) + " for '" + name + "'");
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = r.get<double>();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.pos() != body) throw FormatError("trailing bytes in tensor container");
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  const auto bytes = encode_tensors(tensors);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  return decode_tensors(std::vector<char>(s.begin(), s.end()));
}

NamedTensors to_named(const ParamStore& params) {
  NamedTensors out;
  for (const auto& e : params.entries()) out.emplace_back(e.name, e.value);
  return out;
}

}  // namespace afa
