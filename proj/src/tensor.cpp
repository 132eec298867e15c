#include "nctj/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nctj/kernels.hpp"

namespace nctj::num {

size_t checked_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> s, float fill)
    : shape(std::move(s)), values(checked_numel(shape), fill) {}

Tensor Tensor::from(std::vector<int> s, std::vector<float> vals) {
  if (checked_numel(s) != vals.size()) {
    throw DimensionError("Tensor::from: " + shape_str(s) + " does not hold " +
                         std::to_string(vals.size()) + " values");
  }
  Tensor t;
  t.shape = std::move(s);
  t.values = std::move(vals);
  return t;
}

void Tensor::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0f);
}

void Tensor::zero_grad() {
  grad.assign(values.size(), 0.0f);
}

void check_finite(const float* data, size_t n, const char* op) {
  if (!kern::active_kernels().all_finite(data, n)) {
    throw NonFiniteError(std::string("non-finite value produced by ") + op);
  }
}

void check_finite(const Tensor& t, const char* op) {
  check_finite(t.values.data(), t.values.size(), op);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw DimensionError("matmul: expected 2-D operands, got " + shape_str(a.shape) + " and " +
                         shape_str(b.shape));
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
  }
  const int p = a.dim(0), q = a.dim(1), r = b.dim(1);
  Tensor bt = transpose2d(b);
  Tensor out({p, r});
  kern::active_kernels().matmul_packed(a.values.data(), bt.values.data(), out.values.data(), p, q, r);
  check_finite(out, "matmul");
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2) {
    throw DimensionError("linear: expected 2-D input/weight");
  }
  if (x.dim(1) != w.dim(1)) {
    throw DimensionError("linear: input width " + std::to_string(x.dim(1)) +
                         " != weight fan-in " + std::to_string(w.dim(1)));
  }
  const int n = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  if (!b.values.empty() && static_cast<int>(b.numel()) != out_dim) {
    throw DimensionError("linear: bias length mismatch");
  }
  Tensor out({n, out_dim});
  kern::active_kernels().matmul_packed(x.values.data(), w.values.data(), out.values.data(), n, in, out_dim);
  if (!b.values.empty()) {
    for (int i = 0; i < n; ++i) {
      float* row = out.values.data() + static_cast<size_t>(i) * out_dim;
      for (int o = 0; o < out_dim; ++o) row[o] += b.values[static_cast<size_t>(o)];
    }
  }
  check_finite(out, "linear");
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.ndim() != 2) throw DimensionError("transpose2d: expected 2-D tensor");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out({cols, rows});
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      out.values[static_cast<size_t>(j) * rows + i] = a.values[static_cast<size_t>(i) * cols + j];
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out;
  out.shape = x.shape;
  out.values.resize(x.values.size());
  kern::active_kernels().relu_fwd(x.values.data(), out.values.data(), x.values.size());
  check_finite(out, "relu");
  return out;
}

void im2col_3x3(const float* x, int c, int h, int w, float* col) {
  // col row layout per output pixel (y,x): [ch0 k00..k22, ch1 k00..k22, ...]
  const int k = 3, pad = 1;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      float* row = col + (static_cast<size_t>(y) * w + xx) * (static_cast<size_t>(c) * 9);
      for (int ch = 0; ch < c; ++ch) {
        const float* plane = x + static_cast<size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
          int sy = y + ky - pad;
          for (int kx = 0; kx < k; ++kx) {
            int sx = xx + kx - pad;
            float v = 0.0f;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
              v = plane[static_cast<size_t>(sy) * w + sx];
            }
            row[static_cast<size_t>(ch) * 9 + ky * 3 + kx] = v;
          }
        }
      }
    }
  }
}

void col2im_3x3_acc(const float* dcol, int c, int h, int w, float* dx) {
  const int k = 3, pad = 1;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const float* row = dcol + (static_cast<size_t>(y) * w + xx) * (static_cast<size_t>(c) * 9);
      for (int ch = 0; ch < c; ++ch) {
        float* plane = dx + static_cast<size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
          int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            int sx = xx + kx - pad;
            if (sx < 0 || sx >= w) continue;
            plane[static_cast<size_t>(sy) * w + sx] += row[static_cast<size_t>(ch) * 9 + ky * 3 + kx];
          }
        }
      }
    }
  }
}

Tensor conv2d_3x3(const Tensor& x, const Tensor& k, const Tensor& bias) {
  if (x.ndim() != 4) throw DimensionError("conv2d: input must be N x C x H x W");
  if (k.ndim() != 4 || k.dim(2) != 3 || k.dim(3) != 3) {
    throw DimensionError("conv2d: kernel must be F x C x 3 x 3, got " + shape_str(k.shape));
  }
  if (x.dim(1) != k.dim(1)) {
    throw DimensionError("conv2d: channel mismatch: input C=" + std::to_string(x.dim(1)) +
                         ", kernel C=" + std::to_string(k.dim(1)));
  }
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), f = k.dim(0);
  if (!bias.values.empty() && static_cast<int>(bias.numel()) != f) {
    throw DimensionError("conv2d: bias length mismatch");
  }
  const int hw = h * w, c9 = c * 9;
  Tensor out({n, f, h, w});
  std::vector<float> col(static_cast<size_t>(hw) * c9);
  std::vector<float> sample_out(static_cast<size_t>(f) * hw);
  for (int s = 0; s < n; ++s) {
    const float* xs = x.values.data() + static_cast<size_t>(s) * c * hw;
    im2col_3x3(xs, c, h, w, col.data());
    // out[f][pix] = sum_t k[f][t] * col[pix][t]
    kern::active_kernels().matmul_packed(k.values.data(), col.data(), sample_out.data(), f, c9, hw);
    float* os = out.values.data() + static_cast<size_t>(s) * f * hw;
    std::copy(sample_out.begin(), sample_out.end(), os);
    if (!bias.values.empty()) {
      for (int ff = 0; ff < f; ++ff) {
        float b = bias.values[static_cast<size_t>(ff)];
        float* plane = os + static_cast<size_t>(ff) * hw;
        for (int p = 0; p < hw; ++p) plane[p] += b;
      }
    }
  }
  check_finite(out, "conv2d");
  return out;
}

Tensor avgpool2(const Tensor& x) {
  if (x.ndim() != 4) throw DimensionError("avgpool2: input must be N x C x H x W");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("avgpool2: H and W must be even, got " + shape_str(x.shape));
  }
  const int oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const float* plane = x.values.data() + (static_cast<size_t>(s) * c + ch) * h * w;
      float* oplane = out.values.data() + (static_cast<size_t>(s) * c + ch) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          const float* p = plane + static_cast<size_t>(2 * y) * w + 2 * xx;
          oplane[static_cast<size_t>(y) * ow + xx] =
              0.25f * (p[0] + p[1] + p[w] + p[w + 1]);
        }
      }
    }
  }
  return out;
}

Tensor flatten2d(const Tensor& x) {
  if (x.ndim() == 2) return x;
  if (x.ndim() != 4) throw DimensionError("flatten2d: expected 2-D or 4-D input");
  Tensor out;
  out.shape = {x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)};
  out.values = x.values;
  return out;
}

SoftmaxXent softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw DimensionError("softmax_cross_entropy: logits must be N x K");
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw DimensionError("softmax_cross_entropy: batch size " + std::to_string(n) + " but " +
                         std::to_string(labels.size()) + " labels");
  }
  SoftmaxXent res;
  res.probs = Tensor({n, k});
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) {
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(y) +
                          " out of range [0," + std::to_string(k) + ") at row " + std::to_string(i));
    }
    const float* row = logits.values.data() + static_cast<size_t>(i) * k;
    float m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - m);
    double logsum = std::log(sum);
    total += -(static_cast<double>(row[y]) - m - logsum);
    float* prow = res.probs.values.data() + static_cast<size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      prow[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - m - logsum));
    }
  }
  res.loss = static_cast<float>(total / n);
  if (!std::isfinite(res.loss)) throw NonFiniteError("non-finite value produced by softmax_cross_entropy");
  return res;
}

}  // namespace nctj::num
