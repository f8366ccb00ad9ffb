#include "gumbolt/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kernel_impl.hpp"

namespace gumbolt {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("truncated header", b.size());
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::uint32_t read_le32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("truncated header", b.size());
  return std::uint32_t{b[off]} | (std::uint32_t{b[off + 1]} << 8) |
         (std::uint32_t{b[off + 2]} << 16) | (std::uint32_t{b[off + 3]} << 24);
}

void put_le32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void require_binary(const Tensor& t, const std::string& what) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] != 0.0 && t[i] != 1.0)
      throw std::invalid_argument(what + ": non-binary value " + std::to_string(t[i]) +
                                  " at entry " + std::to_string(i));
}

Tensor stack_rows(const Tensor& a, std::size_t lo, std::size_t hi) {
  Tensor out({hi - lo, a.cols()});
  std::copy(a.data() + lo * a.cols(), a.data() + hi * a.cols(), out.data());
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

RawImages parse_idx(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != 0x00000803u) throw FormatError("bad IDX magic number for images", 0);
  RawImages raw;
  raw.count = read_be32(bytes, 4);
  raw.rows = read_be32(bytes, 8);
  raw.cols = read_be32(bytes, 12);
  const std::uint64_t need = 16 + std::uint64_t{raw.count} * raw.rows * raw.cols;
  if (bytes.size() < need)
    throw FormatError("IDX file truncated: declares " + std::to_string(need) + " bytes, has " +
                          std::to_string(bytes.size()),
                      bytes.size());
  raw.pixels.assign(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(need));
  return raw;
}

RawImages load_idx(const fs::path& path) { return parse_idx(read_bytes(path)); }

Tensor parse_amat(const std::string& text, std::size_t width) {
  std::vector<double> values;
  std::istringstream lines(text);
  std::string line;
  std::size_t count = 0;
  std::size_t offset = 0;
  while (std::getline(lines, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string tok;
    std::size_t cols = 0;
    while (row >> tok) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError("amat: cannot parse '" + tok + "' on line " + std::to_string(count + 1),
                          line_start);
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != width)
      throw FormatError("amat: line " + std::to_string(count + 1) + " has " +
                            std::to_string(cols) + " values, expected " + std::to_string(width),
                        line_start);
    ++count;
  }
  Tensor t({count, width}, std::move(values));
  require_binary(t, "amat");
  return t;
}

Tensor load_amat(const fs::path& path, std::size_t width) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_amat(ss.str(), width);
}

Tensor threshold_images(const RawImages& raw) {
  Tensor t({raw.count, raw.rows * raw.cols});
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) t[i] = raw.pixels[i] / 255.0 > 0.5 ? 1.0 : 0.0;
  return t;
}

std::vector<std::uint8_t> pack_images(const Tensor& images, std::size_t rows, std::size_t cols) {
  if (images.cols() != rows * cols) throw std::invalid_argument("pack: image size mismatch");
  require_binary(images, "pack");
  std::vector<std::uint8_t> out{'G', 'B', 'D', 'S'};
  put_le32(out, static_cast<std::uint32_t>(images.rows()));
  put_le32(out, static_cast<std::uint32_t>(rows));
  put_le32(out, static_cast<std::uint32_t>(cols));
  const std::size_t bits = images.size();
  const std::size_t start = out.size();
  out.resize(start + (bits + 7) / 8, 0);
  for (std::size_t i = 0; i < bits; ++i)
    if (images[i] != 0.0) out[start + i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return out;
}

Tensor unpack_images(const std::vector<std::uint8_t>& bytes, std::size_t* rows,
                     std::size_t* cols) {
  if (bytes.size() < 4 || bytes[0] != 'G' || bytes[1] != 'B' || bytes[2] != 'D' || bytes[3] != 'S')
    throw FormatError("bad packed-image magic", 0);
  const std::size_t n = read_le32(bytes, 4), r = read_le32(bytes, 8), c = read_le32(bytes, 12);
  const std::size_t bits = n * r * c;
  if (bytes.size() < 16 + (bits + 7) / 8)
    throw FormatError("packed-image file truncated", bytes.size());
  Tensor t({n, r * c});
  for (std::size_t i = 0; i < bits; ++i) t[i] = (bytes[16 + i / 8] >> (7 - i % 8)) & 1u;
  if (rows) *rows = r;
  if (cols) *cols = c;
  return t;
}

void save_packed(const fs::path& path, const Tensor& images, std::size_t rows, std::size_t cols) {
  const auto bytes = pack_images(images, rows, cols);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor load_packed(const fs::path& path, std::size_t* rows, std::size_t* cols) {
  return unpack_images(read_bytes(path), rows, cols);
}

Dataset load_binarized_mnist(const fs::path& dir) {
  Dataset ds;
  ds.name = "mnist";
  ds.image_rows = ds.image_cols = 28;
  const char* splits[] = {"train", "valid", "test"};
  Tensor* dest[] = {&ds.train, &ds.valid, &ds.test};
  std::vector<std::uint8_t> all;

  bool have_amat = true, have_packed = true;
  for (const char* s : splits) {
    have_amat = have_amat && fs::exists(dir / ("binarized_mnist_" + std::string(s) + ".amat"));
    have_packed = have_packed && fs::exists(dir / ("binarized_mnist_" + std::string(s) + ".gbb"));
  }
  if (have_amat || have_packed) {
    for (int i = 0; i < 3; ++i) {
      const std::string base = "binarized_mnist_" + std::string(splits[i]);
      const fs::path p = dir / (base + (have_amat ? ".amat" : ".gbb"));
      auto bytes = read_bytes(p);
      all.insert(all.end(), bytes.begin(), bytes.end());
      *dest[i] = have_amat ? load_amat(p, 784) : unpack_images(bytes);
    }
    ds.checksum = fnv1a_hex(all);
    return ds;
  }

  const fs::path train_idx = dir / "train-images-idx3-ubyte";
  const fs::path test_idx = dir / "t10k-images-idx3-ubyte";
  if (fs::exists(train_idx) && fs::exists(test_idx)) {
    auto tb = read_bytes(train_idx), sb = read_bytes(test_idx);
    all = tb;
    all.insert(all.end(), sb.begin(), sb.end());
    Tensor train = threshold_images(parse_idx(tb));
    if (train.rows() < 60000) throw std::runtime_error("mnist: expected 60000 training images");
    ds.train = stack_rows(train, 0, 50000);
    ds.valid = stack_rows(train, 50000, 60000);
    ds.test = threshold_images(parse_idx(sb));
    ds.name = "mnist-thresholded";
    ds.canonical = false;
    ds.checksum = fnv1a_hex(all);
    return ds;
  }
  throw std::runtime_error("mnist: no binarized_mnist_*.amat, *.gbb or IDX files in " +
                           dir.string());
}

Dataset load_omniglot(const fs::path& dir) {
  Dataset ds;
  ds.name = "omniglot";
  const char* splits[] = {"train", "valid", "test"};
  Tensor* dest[] = {&ds.train, &ds.valid, &ds.test};
  std::vector<std::uint8_t> all;
  for (int i = 0; i < 3; ++i) {
    const fs::path p = dir / ("omniglot_" + std::string(splits[i]) + ".gbb");
    if (!fs::exists(p)) throw std::runtime_error("omniglot: missing " + p.string());
    auto bytes = read_bytes(p);
    all.insert(all.end(), bytes.begin(), bytes.end());
    *dest[i] = unpack_images(bytes, &ds.image_rows, &ds.image_cols);
  }
  ds.checksum = fnv1a_hex(all);
  return ds;
}

std::vector<std::vector<double>> toy_patterns() {
  // Quadrants of a 4x4 image. Top-left is lit in modes {0,1}, top-right in
  // {0,2}, bottom-left in {1,2}, bottom-right in {3}.
  auto quadrant = [](int q) {
    std::vector<std::size_t> px;
    const std::size_t r0 = q < 2 ? 0 : 2, c0 = q % 2 == 0 ? 0 : 2;
    for (std::size_t r = r0; r < r0 + 2; ++r)
      for (std::size_t c = c0; c < c0 + 2; ++c) px.push_back(r * 4 + c);
    return px;
  };
  const std::vector<std::vector<int>> lit = {{0, 1}, {0, 2}, {1, 2}, {3}};
  std::vector<std::vector<double>> patterns(4, std::vector<double>(16, 0.0));
  for (int m = 0; m < 4; ++m)
    for (int q : lit[m])
      for (std::size_t p : quadrant(q)) patterns[m][p] = 1.0;
  return patterns;
}

Dataset toy_dataset(std::uint64_t seed, std::size_t n) {
  if (n < 100) throw std::invalid_argument("toy_dataset: need at least 100 images");
  const auto patterns = toy_patterns();
  Rng rng = kernels::detail::block_rng(seed, 0x70790);
  std::uniform_int_distribution<int> mode(0, 3);
  Tensor all({n, 16});
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = mode(rng);
    for (std::size_t p = 0; p < 16; ++p) {
      const bool flip = kernels::detail::uniform01(rng) < kToyFlipRate;
      const double v = patterns[labels[i]][p];
      all.at(i, p) = flip ? 1.0 - v : v;
    }
  }
  Dataset ds;
  ds.name = "toy";
  ds.image_rows = ds.image_cols = 4;
  const std::size_t n_valid = n / 10, n_test = n / 10, n_train = n - n_valid - n_test;
  ds.train = stack_rows(all, 0, n_train);
  ds.valid = stack_rows(all, n_train, n_train + n_valid);
  ds.test = stack_rows(all, n_train + n_valid, n);
  ds.labels = std::move(labels);
  ds.checksum = fnv1a_hex(pack_images(all, 4, 4));
  return ds;
}

Dataset load_dataset(const std::string& name, const fs::path& data_dir, std::uint64_t toy_seed,
                     std::size_t toy_size) {
  if (name == "mnist") return load_binarized_mnist(data_dir);
  if (name == "omniglot") return load_omniglot(data_dir);
  if (name == "toy") return toy_dataset(toy_seed, toy_size);
  throw std::invalid_argument("unknown dataset '" + name + "' (expected mnist, omniglot or toy)");
}

fs::path resolve_data_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("GUMBOLT_DATA_DIR"); env && *env) return env;
  return fs::current_path();
}

// ---------------------------------------------------------------------------

BatchIterator::BatchIterator(std::size_t examples, std::size_t batch_size, std::uint64_t seed)
    : examples_(examples), batch_(batch_size), seed_(seed) {
  if (examples == 0 || batch_size == 0)
    throw std::invalid_argument("batch iterator: empty dataset or batch");
  shuffle_epoch();
}

void BatchIterator::shuffle_epoch() {
  order_.resize(examples_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng = kernels::detail::block_rng(seed_, epoch_);
  std::shuffle(order_.begin(), order_.end(), rng);
}

std::vector<std::size_t> BatchIterator::next() {
  if (position_ >= examples_) {
    ++epoch_;
    position_ = 0;
    shuffle_epoch();
  }
  const std::size_t end = std::min(examples_, position_ + batch_);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(position_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  position_ = end;
  return out;
}

void BatchIterator::restore(std::size_t epoch, std::size_t position) {
  if (position > examples_) throw std::invalid_argument("batch iterator: position out of range");
  epoch_ = epoch;
  position_ = position;
  shuffle_epoch();
}

Tensor gather_rows(const Tensor& images, const std::vector<std::size_t>& indices) {
  Tensor out({indices.size(), images.cols()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= images.rows()) throw std::out_of_range("gather_rows: index out of range");
    std::copy(images.row(indices[i]).begin(), images.row(indices[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace gumbolt
