#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gumbolt/rbm.hpp"
#include "gumbolt/tensor.hpp"

namespace gumbolt {

/// Parse failure with the byte offset at which the input stopped making sense.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

struct RawImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

/// Binary image splits with entries in {0,1}.
struct Dataset {
  std::string name;
  Tensor train;
  Tensor valid;
  Tensor test;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  std::string checksum;  // FNV-1a of the source bytes, hex
  bool canonical = true;
  // Mixture component of each image (train, valid, test order); toy data only.
  std::vector<int> labels;

  std::size_t dim() const noexcept { return image_rows * image_cols; }
  std::size_t size() const noexcept { return train.rows() + valid.rows() + test.rows(); }
};

std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes);

/// IDX image file (magic 0x00000803, big-endian dimensions).
RawImages load_idx(const std::filesystem::path& path);
RawImages parse_idx(const std::vector<std::uint8_t>& bytes);

/// One image per line, `width` whitespace-separated 0/1 values.
Tensor load_amat(const std::filesystem::path& path, std::size_t width);
Tensor parse_amat(const std::string& text, std::size_t width);

/// Thresholds raw intensities at half scale. Non-canonical binarisation.
Tensor threshold_images(const RawImages& raw);

/// Packed-bit image file: "GBDS", u32 count, u32 rows, u32 cols (little endian),
/// then count*rows*cols bits, MSB first, zero-padded to a whole byte.
void save_packed(const std::filesystem::path& path, const Tensor& images, std::size_t rows,
                 std::size_t cols);
Tensor load_packed(const std::filesystem::path& path, std::size_t* rows = nullptr,
                   std::size_t* cols = nullptr);
std::vector<std::uint8_t> pack_images(const Tensor& images, std::size_t rows, std::size_t cols);
Tensor unpack_images(const std::vector<std::uint8_t>& bytes, std::size_t* rows = nullptr,
                     std::size_t* cols = nullptr);

/// Statically binarised MNIST from binarized_mnist_{train,valid,test}.amat
/// (50000/10000/10000), falling back to packed .gbb copies of the same files,
/// then to thresholded IDX files (flagged non-canonical).
Dataset load_binarized_mnist(const std::filesystem::path& dir);

/// OMNIGLOT (28x28 binarised, Burda et al. splits) from
/// omniglot_{train,valid,test}.gbb.
Dataset load_omniglot(const std::filesystem::path& dir);

/// 4x4 images from four corner patterns, each pixel flipped with probability 0.05.
/// Split 80/10/10.
Dataset toy_dataset(std::uint64_t seed, std::size_t n);
inline constexpr double kToyFlipRate = 0.05;
/// The four noiseless 16-pixel patterns.
std::vector<std::vector<double>> toy_patterns();

/// "mnist", "omniglot" or "toy" (toy_size images drawn from toy_seed).
Dataset load_dataset(const std::string& name, const std::filesystem::path& data_dir,
                     std::uint64_t toy_seed = 7, std::size_t toy_size = 10000);

/// --data-dir if given, else $GUMBOLT_DATA_DIR, else the current directory.
std::filesystem::path resolve_data_dir(const std::optional<std::string>& flag);

/// Reshuffles the training indices every epoch; the final batch of an epoch
/// may be short so every example is seen exactly once per epoch.
class BatchIterator {
 public:
  BatchIterator(std::size_t examples, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t position() const noexcept { return position_; }
  std::size_t batch_size() const noexcept { return batch_; }
  void restore(std::size_t epoch, std::size_t position);

 private:
  void shuffle_epoch();

  std::size_t examples_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t position_ = 0;
  std::vector<std::size_t> order_;
};

Tensor gather_rows(const Tensor& images, const std::vector<std::size_t>& indices);

}  // namespace gumbolt
