#include "nctj/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace nctj::data {

namespace {

constexpr int kMaxSyntheticClasses = 64;
constexpr double kTwoPi = 6.283185307179586476925286766559;

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

// Class patterns are exact discrete plane waves cos(2*pi*(a*x/W + b*y/H) + phi).
// On grids whose sides exceed twice the largest harmonic index the patterns
// have identical mean and contrast and are pairwise decorrelated, so no class
// is intrinsically easier than another. 24 (a,b) pairs x 3 phases = 64+
// distinct patterns.
struct Harmonic {
  int a, b;
};

const Harmonic* pattern_table() {
  static const Harmonic table[24] = {
      {0, 1}, {1, -1}, {1, 0}, {1, 1},
      {0, 2}, {1, -2}, {1, 2}, {2, -2}, {2, -1}, {2, 0}, {2, 1}, {2, 2},
      {0, 3}, {1, -3}, {1, 3}, {2, -3}, {2, 3}, {3, -3}, {3, -2}, {3, -1},
      {3, 0}, {3, 1}, {3, 2}, {3, 3},
  };
  return table;
}

void fill_class_pattern(int k, int h, int w, std::vector<float>& plane) {
  const Harmonic hm = pattern_table()[k % 24];
  static const double phases[3] = {0.0, kTwoPi / 4.0, kTwoPi / 8.0};
  const double phase = phases[(k / 24) % 3];
  plane.resize(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double theta = kTwoPi * (hm.a * static_cast<double>(x) / w +
                               hm.b * static_cast<double>(y) / h) + phase;
      plane[static_cast<size_t>(y) * w + x] = static_cast<float>(0.5 + 0.35 * std::cos(theta));
    }
  }
}

uint32_t read_be_u32(const unsigned char* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

std::vector<unsigned char> read_exact(std::ifstream& f, size_t n, const std::string& path,
                                      size_t offset) {
  std::vector<unsigned char> buf(n);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(f.gcount()) != n) {
    throw FormatError(path + ": truncated read of " + std::to_string(n) +
                      " bytes at byte offset " + std::to_string(offset));
  }
  return buf;
}

size_t file_size_or_throw(const std::string& path) {
  std::error_code ec;
  auto sz = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path + "': " + ec.message());
  return static_cast<size_t>(sz);
}

}  // namespace

std::vector<int> Dataset::class_histogram() const {
  std::vector<int> hist(static_cast<size_t>(num_classes), 0);
  for (const auto& img : images) {
    if (img.label < 0 || img.label >= num_classes) {
      throw StateError("Dataset: label " + std::to_string(img.label) + " outside [0," +
                       std::to_string(num_classes) + ")");
    }
    ++hist[static_cast<size_t>(img.label)];
  }
  return hist;
}

Dataset generate_synthetic(int num_classes, int n_per_class, std::array<int, 3> shape,
                           float noise_sigma, RngStream& rng, const std::string& split_tag) {
  if (num_classes < 2) throw ArgumentError("generate_synthetic: need at least 2 classes");
  if (num_classes > kMaxSyntheticClasses) {
    throw ArgumentError("generate_synthetic: only " + std::to_string(kMaxSyntheticClasses) +
                        " distinct patterns available, requested " + std::to_string(num_classes));
  }
  if (n_per_class < 1) throw ArgumentError("generate_synthetic: n_per_class must be >= 1");
  const int c = shape[0], h = shape[1], w = shape[2];
  if (c < 1 || h < 1 || w < 1) throw ArgumentError("generate_synthetic: bad shape");

  Dataset ds;
  ds.num_classes = num_classes;
  ds.channels = c;
  ds.height = h;
  ds.width = w;
  ds.split_tag = split_tag;
  ds.images.reserve(static_cast<size_t>(num_classes) * n_per_class);

  std::vector<float> pattern;
  int64_t next_id = 0;
  for (int k = 0; k < num_classes; ++k) {
    fill_class_pattern(k, h, w, pattern);
    for (int i = 0; i < n_per_class; ++i) {
      LabeledImage img;
      img.label = k;
      img.origin_id = next_id++;
      img.pixels.resize(static_cast<size_t>(c) * h * w);
      for (int ch = 0; ch < c; ++ch) {
        float* plane = img.pixels.data() + static_cast<size_t>(ch) * h * w;
        for (size_t p = 0; p < pattern.size(); ++p) {
          float noise = noise_sigma > 0.0f
                            ? static_cast<float>(rng.next_gaussian()) * noise_sigma
                            : 0.0f;
          plane[p] = clamp01(pattern[p] + noise);
        }
      }
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split_tag) {
  const size_t img_file_size = file_size_or_throw(images_path);
  if (img_file_size < 16) {
    throw FormatError(images_path + ": IDX image header needs 16 bytes, file has " +
                      std::to_string(img_file_size) + " (error at byte offset 0)");
  }
  std::ifstream imf(images_path, std::ios::binary);
  if (!imf) throw IoError("cannot open '" + images_path + "'");
  auto hdr = read_exact(imf, 16, images_path, 0);
  uint32_t magic = read_be_u32(hdr.data());
  if (magic != 0x00000803u) {
    throw FormatError(images_path + ": bad IDX image magic 0x" + std::to_string(magic) +
                      " at byte offset 0 (expected 0x00000803)");
  }
  uint32_t n = read_be_u32(hdr.data() + 4);
  uint32_t rows = read_be_u32(hdr.data() + 8);
  uint32_t cols = read_be_u32(hdr.data() + 12);
  size_t expected = 16 + static_cast<size_t>(n) * rows * cols;
  if (img_file_size != expected) {
    throw FormatError(images_path + ": expected " + std::to_string(expected) +
                      " bytes for " + std::to_string(n) + " images, file has " +
                      std::to_string(img_file_size) + " (error at byte offset " +
                      std::to_string(std::min(img_file_size, expected)) + ")");
  }

  const size_t lab_file_size = file_size_or_throw(labels_path);
  if (lab_file_size < 8) {
    throw FormatError(labels_path + ": IDX label header needs 8 bytes (error at byte offset 0)");
  }
  std::ifstream lbf(labels_path, std::ios::binary);
  if (!lbf) throw IoError("cannot open '" + labels_path + "'");
  auto lhdr = read_exact(lbf, 8, labels_path, 0);
  uint32_t lmagic = read_be_u32(lhdr.data());
  if (lmagic != 0x00000801u) {
    throw FormatError(labels_path + ": bad IDX label magic at byte offset 0 (expected 0x00000801)");
  }
  uint32_t ln = read_be_u32(lhdr.data() + 4);
  if (ln != n) {
    throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                      " != image count " + std::to_string(n) + " (error at byte offset 4)");
  }
  if (lab_file_size != 8 + static_cast<size_t>(ln)) {
    throw FormatError(labels_path + ": expected " + std::to_string(8 + ln) +
                      " bytes, file has " + std::to_string(lab_file_size) +
                      " (error at byte offset " + std::to_string(std::min(lab_file_size, size_t{8} + ln)) + ")");
  }

  auto pixels = read_exact(imf, static_cast<size_t>(n) * rows * cols, images_path, 16);
  auto labels = read_exact(lbf, ln, labels_path, 8);

  Dataset ds;
  ds.channels = 1;
  ds.height = static_cast<int>(rows);
  ds.width = static_cast<int>(cols);
  ds.split_tag = split_tag;
  int max_label = 0;
  ds.images.resize(n);
  const size_t px = static_cast<size_t>(rows) * cols;
  for (uint32_t i = 0; i < n; ++i) {
    LabeledImage& img = ds.images[i];
    img.origin_id = static_cast<int64_t>(i);
    img.label = labels[i];
    max_label = std::max(max_label, img.label);
    img.pixels.resize(px);
    const unsigned char* src = pixels.data() + static_cast<size_t>(i) * px;
    for (size_t p = 0; p < px; ++p) img.pixels[p] = static_cast<float>(src[p]) / 255.0f;
  }
  ds.num_classes = max_label + 1;
  return ds;
}

Dataset load_cifar_binary(const std::vector<std::string>& paths, const std::string& split_tag) {
  constexpr size_t kRecord = 3073;
  constexpr int kClasses = 10;
  if (paths.empty()) throw ArgumentError("load_cifar_binary: no paths given");

  Dataset ds;
  ds.num_classes = kClasses;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.split_tag = split_tag;

  int64_t next_id = 0;
  for (const auto& path : paths) {
    const size_t fsize = file_size_or_throw(path);
    if (fsize == 0 || fsize % kRecord != 0) {
      throw FormatError(path + ": size " + std::to_string(fsize) +
                        " is not a multiple of 3073-byte records (error at byte offset " +
                        std::to_string(fsize - (fsize % kRecord)) + ")");
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    const size_t n = fsize / kRecord;
    for (size_t i = 0; i < n; ++i) {
      auto rec = read_exact(f, kRecord, path, i * kRecord);
      if (rec[0] >= kClasses) {
        throw FormatError(path + ": label byte " + std::to_string(int(rec[0])) +
                          " out of range at byte offset " + std::to_string(i * kRecord));
      }
      LabeledImage img;
      img.origin_id = next_id++;
      img.label = rec[0];
      img.pixels.resize(3072);
      for (size_t p = 0; p < 3072; ++p) {
        img.pixels[p] = static_cast<float>(rec[1 + p]) / 255.0f;
      }
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

Dataset sample_clean_subset(const Dataset& train, double fraction, RngStream& rng) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ArgumentError("sample_clean_subset: fraction must be in (0,1]");
  }
  auto hist = train.class_histogram();
  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(train.num_classes));
  for (size_t i = 0; i < train.images.size(); ++i) {
    by_class[static_cast<size_t>(train.images[i].label)].push_back(i);
  }
  Dataset out;
  out.num_classes = train.num_classes;
  out.channels = train.channels;
  out.height = train.height;
  out.width = train.width;
  out.split_tag = "finetune";
  for (int k = 0; k < train.num_classes; ++k) {
    auto& idx = by_class[static_cast<size_t>(k)];
    long want = std::lround(fraction * static_cast<double>(hist[static_cast<size_t>(k)]));
    if (want <= 0) {
      throw ArgumentError("sample_clean_subset: fraction " + std::to_string(fraction) +
                          " yields zero samples for class " + std::to_string(k));
    }
    rng.shuffle(idx);
    for (long i = 0; i < want; ++i) {
      out.images.push_back(train.images[idx[static_cast<size_t>(i)]]);
    }
  }
  return out;
}

Dataset apply_imbalance(const Dataset& subset, double ratio, RngStream& rng) {
  if (ratio < 1.0) throw ArgumentError("apply_imbalance: ratio must be >= 1");
  if (subset.num_classes < 2) throw ArgumentError("apply_imbalance: need at least 2 classes");
  auto hist = subset.class_histogram();
  const int k_count = subset.num_classes;

  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(k_count));
  for (size_t i = 0; i < subset.images.size(); ++i) {
    by_class[static_cast<size_t>(subset.images[i].label)].push_back(i);
  }
  std::vector<bool> keep(subset.images.size(), false);
  for (int k = 0; k < k_count; ++k) {
    double factor = std::pow(ratio, -static_cast<double>(k) / (k_count - 1));
    long want = std::lround(hist[static_cast<size_t>(k)] * factor);
    if (want <= 0) {
      throw ArgumentError("apply_imbalance: ratio " + std::to_string(ratio) +
                          " reduces class " + std::to_string(k) + " to zero samples");
    }
    auto& idx = by_class[static_cast<size_t>(k)];
    rng.shuffle(idx);
    for (long i = 0; i < want && i < static_cast<long>(idx.size()); ++i) {
      keep[idx[static_cast<size_t>(i)]] = true;
    }
  }
  Dataset out;
  out.num_classes = subset.num_classes;
  out.channels = subset.channels;
  out.height = subset.height;
  out.width = subset.width;
  out.split_tag = subset.split_tag;
  for (size_t i = 0; i < subset.images.size(); ++i) {
    if (keep[i]) out.images.push_back(subset.images[i]);
  }
  return out;
}

Dataset apply_random_erasure(const Dataset& subset, double prob, int min_side, int max_side,
                             RngStream& rng) {
  if (prob < 0.0 || prob > 1.0) throw ArgumentError("apply_random_erasure: prob must be in [0,1]");
  if (min_side < 1 || min_side > max_side) {
    throw ArgumentError("apply_random_erasure: need 1 <= min_side <= max_side");
  }
  if (max_side > std::min(subset.height, subset.width)) {
    throw ArgumentError("apply_random_erasure: max_side exceeds image bounds");
  }
  Dataset out = subset;
  for (auto& img : out.images) {
    if (rng.next_double() >= prob) continue;
    int eh = rng.next_int(min_side, max_side);
    int ew = rng.next_int(min_side, max_side);
    int top = rng.next_int(0, subset.height - eh);
    int left = rng.next_int(0, subset.width - ew);
    for (int c = 0; c < subset.channels; ++c) {
      float* plane = img.pixels.data() + static_cast<size_t>(c) * subset.height * subset.width;
      for (int y = top; y < top + eh; ++y) {
        for (int x = left; x < left + ew; ++x) {
          plane[static_cast<size_t>(y) * subset.width + x] = rng.next_float();
        }
      }
    }
  }
  return out;
}

}  // namespace nctj::data
