#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nctj/common.hpp"
#include "nctj/rng.hpp"

namespace nctj::data {

struct LabeledImage {
  std::vector<float> pixels;  // C*H*W row-major, every value in [0,1]
  int label = 0;
  int64_t origin_id = -1;     // stable per-sample identity, survives poisoning
};

struct Dataset {
  std::vector<LabeledImage> images;
  int num_classes = 0;
  int channels = 0, height = 0, width = 0;
  std::string split_tag;  // "train" | "test" | "finetune"

  size_t size() const { return images.size(); }
  size_t pixels_per_image() const {
    return static_cast<size_t>(channels) * height * width;
  }
  std::vector<int> class_histogram() const;
};

// Deterministic per-class grating pattern (orientation x frequency, up to 64
// classes) plus iid Gaussian pixel noise, clipped to [0,1].
Dataset generate_synthetic(int num_classes, int n_per_class, std::array<int, 3> shape,
                           float noise_sigma, RngStream& rng,
                           const std::string& split_tag = "train");

// Big-endian IDX pair (magic 0x00000803 images / 0x00000801 labels),
// pixels scaled to [0,1]. Headers and file sizes are validated before any
// payload is read.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split_tag = "train");

// CIFAR-10 binary batches: 3073-byte records (1 label byte + 3x32x32 pixels).
Dataset load_cifar_binary(const std::vector<std::string>& paths,
                          const std::string& split_tag = "train");

// Per-class stratified sample of round(fraction * |X_k|); deterministic
// under the stream. Errors if any class would get zero samples.
Dataset sample_clean_subset(const Dataset& train, double fraction, RngStream& rng);

// Exponential long-tail profile: class k keeps round(n_k * ratio^(-k/(K-1))).
Dataset apply_imbalance(const Dataset& subset, double ratio, RngStream& rng);

// With probability `prob` per image, overwrite one axis-aligned rectangle
// (sides uniform in [min_side,max_side]) with uniform [0,1] noise.
Dataset apply_random_erasure(const Dataset& subset, double prob, int min_side,
                             int max_side, RngStream& rng);

}  // namespace nctj::data
