#include "gumbolt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gumbolt {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little endian");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) {
    if (n > b_.size() - pos_)
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& CheckpointFile::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw CheckpointError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

const std::string& CheckpointFile::blob(const std::string& name) const {
  auto it = blobs.find(name);
  if (it == blobs.end()) throw CheckpointError("checkpoint has no entry '" + name + "'");
  return it->second;
}

std::vector<std::uint8_t> CheckpointFile::encode() const {
  std::vector<std::uint8_t> out{'G', 'B', 'L', 'T'};
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size() + blobs.size()));
  auto name = [&](const std::string& n) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(n.size()));
    out.insert(out.end(), n.begin(), n.end());
  };
  for (const auto& [n, t] : tensors) {
    name(n);
    put<std::uint8_t>(out, 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (std::size_t i = 0; i < t.size(); ++i) put<double>(out, t[i]);
  }
  for (const auto& [n, s] : blobs) {
    name(n);
    put<std::uint8_t>(out, 1);
    put<std::uint64_t>(out, s.size());
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

CheckpointFile CheckpointFile::decode(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "GBLT") throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  CheckpointFile f;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string n = r.bytes(r.get<std::uint32_t>());
    const auto kind = r.get<std::uint8_t>();
    if (kind == 0) {
      std::vector<std::size_t> shape(r.get<std::uint32_t>());
      for (auto& d : shape) d = r.get<std::uint64_t>();
      std::vector<double> values(shape_product(shape));
      for (auto& v : values) v = r.get<double>();
      f.tensors.emplace(n, Tensor(shape, std::move(values)));
    } else if (kind == 1) {
      f.blobs.emplace(n, r.bytes(r.get<std::uint64_t>()));
    } else {
      throw CheckpointError("entry '" + n + "' has unknown kind " + std::to_string(kind));
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint entries");
  return f;
}

void CheckpointFile::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile CheckpointFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  return decode(bytes);
}

}  // namespace gumbolt
