#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nctj/common.hpp"

namespace nctj::num {

// Dense row-major f32 tensor with an optional same-shape gradient buffer.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> values;
  std::vector<float> grad;  // empty = no gradient attached

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.0f);
  static Tensor from(std::vector<int> s, std::vector<float> vals);

  size_t numel() const { return values.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad();  // allocate zeros if absent
  void zero_grad();    // allocate if needed, then zero

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

size_t checked_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Throws NonFiniteError naming `op` if any value is NaN/Inf.
void check_finite(const float* data, size_t n, const char* op);
void check_finite(const Tensor& t, const char* op);

// ---- raw forward ops (no gradient recording) -------------------------------

// [p x q] . [q x r]
Tensor matmul(const Tensor& a, const Tensor& b);
// x [N x in] . wT + broadcast bias; w is [out x in], b is [out] (may be empty)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose2d(const Tensor& a);
Tensor relu(const Tensor& x);
// input [N x C x H x W], kernel [F x C x 3 x 3], stride 1, pad 1; optional
// per-filter bias [F]. Cross-correlation, no kernel flip.
Tensor conv2d_3x3(const Tensor& x, const Tensor& k, const Tensor& bias);
// 2x2 average pooling, stride 2; H and W must be even.
Tensor avgpool2(const Tensor& x);
// [N x C x H x W] -> [N x C*H*W]; 2-D input passes through.
Tensor flatten2d(const Tensor& x);

struct SoftmaxXent {
  float loss = 0.0f;   // mean over the batch of -log softmax(logits)[label]
  Tensor probs;        // [N x K] softmax rows, cached for backward
};
SoftmaxXent softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// im2col for the 3x3/pad-1 case: output [H*W x C*9] for one sample.
void im2col_3x3(const float* x, int c, int h, int w, float* col);
// scatter-add the column gradient back to the input gradient
void col2im_3x3_acc(const float* dcol, int c, int h, int w, float* dx);

}  // namespace nctj::num
