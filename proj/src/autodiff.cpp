#include "nctj/autodiff.hpp"

#include <cmath>

#include "nctj/kernels.hpp"

namespace nctj::num {

namespace {

void transpose_raw(const float* src, int rows, int cols, float* dst) {
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      dst[static_cast<size_t>(j) * rows + i] = src[static_cast<size_t>(i) * cols + j];
    }
  }
}

}  // namespace

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw StateError("Tape: invalid Var");
  }
  return *nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw StateError("Tape: invalid Var");
  }
  return *nodes_[static_cast<size_t>(v.id)];
}

Tape::Var Tape::push(Node n) {
  if (n.needs_grad) n.grad.assign(n.value.numel(), 0.0f);
  nodes_.push_back(std::make_unique<Node>(std::move(n)));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::param(Tensor& t, bool needs_grad) {
  Node n;
  n.value.shape = t.shape;
  n.value.values = t.values;
  n.bound = &t;
  n.needs_grad = needs_grad;
  n.op = "param";
  return push(std::move(n));
}

Tape::Var Tape::input(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.needs_grad = false;
  n.op = "input";
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

float Tape::scalar(Var v) const {
  const Tensor& t = node(v).value;
  if (t.numel() != 1) throw StateError("Tape::scalar: value is not a scalar");
  return t.values[0];
}

Tape::Var Tape::matmul(Var a, Var b) {
  Node& na = node(a);
  Node& nb = node(b);
  Node n;
  n.value = num::matmul(na.value, nb.value);
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.op = "matmul";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ia = a.id, ib = b.id;
    node(out).backprop = [this, id, ia, ib] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& na2 = *nodes_[static_cast<size_t>(ia)];
      auto& nb2 = *nodes_[static_cast<size_t>(ib)];
      const int p = na2.value.dim(0), q = na2.value.dim(1), r = nb2.value.dim(1);
      const auto& k = kern::active_kernels();
      if (na2.needs_grad) {
        // dA += dOut . B^T: rows of B are already the packed layout
        k.matmul_packed_acc(no.grad.data(), nb2.value.values.data(), na2.grad.data(), p, r, q);
        check_finite(na2.grad.data(), na2.grad.size(), "matmul.backward");
      }
      if (nb2.needs_grad) {
        // dB += A^T . dOut
        std::vector<float> at(static_cast<size_t>(p) * q);
        std::vector<float> dot(static_cast<size_t>(p) * r);
        transpose_raw(na2.value.values.data(), p, q, at.data());
        transpose_raw(no.grad.data(), p, r, dot.data());
        k.matmul_packed_acc(at.data(), dot.data(), nb2.grad.data(), q, p, r);
        check_finite(nb2.grad.data(), nb2.grad.size(), "matmul.backward");
      }
    };
  }
  return out;
}

Tape::Var Tape::linear(Var x, Var w, Var b) {
  Node& nx = node(x);
  Node& nw = node(w);
  Tensor empty_bias;
  const Tensor& bias = b.valid() ? node(b).value : empty_bias;
  Node n;
  n.value = num::linear(nx.value, nw.value, bias);
  n.needs_grad = nx.needs_grad || nw.needs_grad || (b.valid() && node(b).needs_grad);
  n.op = "linear";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
    node(out).backprop = [this, id, ix, iw, ib] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      auto& nw2 = *nodes_[static_cast<size_t>(iw)];
      const int nrows = nx2.value.dim(0), in = nx2.value.dim(1), od = nw2.value.dim(0);
      const auto& k = kern::active_kernels();
      if (nx2.needs_grad) {
        // dX += dOut . W
        std::vector<float> wt(static_cast<size_t>(in) * od);
        transpose_raw(nw2.value.values.data(), od, in, wt.data());
        k.matmul_packed_acc(no.grad.data(), wt.data(), nx2.grad.data(), nrows, od, in);
        check_finite(nx2.grad.data(), nx2.grad.size(), "linear.backward");
      }
      if (nw2.needs_grad) {
        // dW += dOut^T . X
        std::vector<float> dot(static_cast<size_t>(nrows) * od);
        std::vector<float> xt(static_cast<size_t>(nrows) * in);
        transpose_raw(no.grad.data(), nrows, od, dot.data());
        transpose_raw(nx2.value.values.data(), nrows, in, xt.data());
        k.matmul_packed_acc(dot.data(), xt.data(), nw2.grad.data(), od, nrows, in);
        check_finite(nw2.grad.data(), nw2.grad.size(), "linear.backward");
      }
      if (ib >= 0) {
        auto& nb2 = *nodes_[static_cast<size_t>(ib)];
        if (nb2.needs_grad) {
          for (int o = 0; o < od; ++o) {
            double acc = 0.0;
            for (int i = 0; i < nrows; ++i) {
              acc += static_cast<double>(no.grad[static_cast<size_t>(i) * od + o]);
            }
            nb2.grad[static_cast<size_t>(o)] += static_cast<float>(acc);
          }
          check_finite(nb2.grad.data(), nb2.grad.size(), "linear.backward");
        }
      }
    };
  }
  return out;
}

Tape::Var Tape::relu(Var x) {
  Node& nx = node(x);
  Node n;
  n.value = num::relu(nx.value);
  n.needs_grad = nx.needs_grad;
  n.op = "relu";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id;
    node(out).backprop = [this, id, ix] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      kern::active_kernels().relu_bwd_acc(nx2.value.values.data(), no.grad.data(),
                                          nx2.grad.data(), nx2.grad.size());
      check_finite(nx2.grad.data(), nx2.grad.size(), "relu.backward");
    };
  }
  return out;
}

Tape::Var Tape::conv2d(Var x, Var k, Var b) {
  Node& nx = node(x);
  Node& nk = node(k);
  Tensor empty_bias;
  const Tensor& bias = b.valid() ? node(b).value : empty_bias;
  Node n;
  n.value = num::conv2d_3x3(nx.value, nk.value, bias);
  n.needs_grad = nx.needs_grad || nk.needs_grad || (b.valid() && node(b).needs_grad);
  n.op = "conv2d";
  const int nn = nx.value.dim(0), c = nx.value.dim(1), h = nx.value.dim(2), w = nx.value.dim(3);
  const int hw = h * w, c9 = c * 9;
  if (n.needs_grad) {
    // cache im2col per sample for the backward GEMMs
    n.aux.resize(static_cast<size_t>(nn) * hw * c9);
    for (int s = 0; s < nn; ++s) {
      im2col_3x3(nx.value.values.data() + static_cast<size_t>(s) * c * hw, c, h, w,
                 n.aux.data() + static_cast<size_t>(s) * hw * c9);
    }
  }
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id, ik = k.id, ib = b.valid() ? b.id : -1;
    node(out).backprop = [this, id, ix, ik, ib] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      auto& nk2 = *nodes_[static_cast<size_t>(ik)];
      const int nn2 = nx2.value.dim(0), c = nx2.value.dim(1), h = nx2.value.dim(2),
                w = nx2.value.dim(3);
      const int f = nk2.value.dim(0), hw = h * w, c9 = c * 9;
      const auto& kk = kern::active_kernels();
      std::vector<float> colt(static_cast<size_t>(c9) * hw);
      std::vector<float> dott(static_cast<size_t>(hw) * f);
      std::vector<float> kt(static_cast<size_t>(c9) * f);
      std::vector<float> dcol(static_cast<size_t>(hw) * c9);
      if (nx2.needs_grad) transpose_raw(nk2.value.values.data(), f, c9, kt.data());
      for (int s = 0; s < nn2; ++s) {
        const float* dout_s = no.grad.data() + static_cast<size_t>(s) * f * hw;
        const float* col_s = no.aux.data() + static_cast<size_t>(s) * hw * c9;
        if (nk2.needs_grad) {
          // dK += dOut_s . col_s  (contract over pixels)
          transpose_raw(col_s, hw, c9, colt.data());
          kk.matmul_packed_acc(dout_s, colt.data(), nk2.grad.data(), f, hw, c9);
        }
        if (nx2.needs_grad) {
          // dcol[pix][t] = sum_f dOut[f][pix] K[f][t], then scatter-add
          transpose_raw(dout_s, f, hw, dott.data());
          kk.matmul_packed(dott.data(), kt.data(), dcol.data(), hw, f, c9);
          col2im_3x3_acc(dcol.data(), c, h, w,
                         nx2.grad.data() + static_cast<size_t>(s) * c * hw);
        }
        if (ib >= 0) {
          auto& nb2 = *nodes_[static_cast<size_t>(ib)];
          if (nb2.needs_grad) {
            for (int ff = 0; ff < f; ++ff) {
              double acc = 0.0;
              const float* plane = dout_s + static_cast<size_t>(ff) * hw;
              for (int p = 0; p < hw; ++p) acc += static_cast<double>(plane[p]);
              nb2.grad[static_cast<size_t>(ff)] += static_cast<float>(acc);
            }
          }
        }
      }
      if (nk2.needs_grad) check_finite(nk2.grad.data(), nk2.grad.size(), "conv2d.backward");
      if (nx2.needs_grad) check_finite(nx2.grad.data(), nx2.grad.size(), "conv2d.backward");
    };
  }
  return out;
}

Tape::Var Tape::avgpool2(Var x) {
  Node& nx = node(x);
  Node n;
  n.value = num::avgpool2(nx.value);
  n.needs_grad = nx.needs_grad;
  n.op = "avgpool2";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id;
    node(out).backprop = [this, id, ix] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      const int nn = nx2.value.dim(0), c = nx2.value.dim(1), h = nx2.value.dim(2),
                w = nx2.value.dim(3);
      const int oh = h / 2, ow = w / 2;
      for (int s = 0; s < nn; ++s) {
        for (int ch = 0; ch < c; ++ch) {
          const float* gplane = no.grad.data() + (static_cast<size_t>(s) * c + ch) * oh * ow;
          float* dplane = nx2.grad.data() + (static_cast<size_t>(s) * c + ch) * h * w;
          for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
              float g = 0.25f * gplane[static_cast<size_t>(y) * ow + xx];
              float* p = dplane + static_cast<size_t>(2 * y) * w + 2 * xx;
              p[0] += g;
              p[1] += g;
              p[w] += g;
              p[w + 1] += g;
            }
          }
        }
      }
      check_finite(nx2.grad.data(), nx2.grad.size(), "avgpool2.backward");
    };
  }
  return out;
}

Tape::Var Tape::flatten(Var x) {
  Node& nx = node(x);
  Node n;
  n.value = num::flatten2d(nx.value);
  n.needs_grad = nx.needs_grad;
  n.op = "flatten";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id;
    node(out).backprop = [this, id, ix] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      kern::active_kernels().add_acc(nx2.grad.data(), no.grad.data(), no.grad.size());
    };
  }
  return out;
}

Tape::Var Tape::softmax_cross_entropy(Var logits, std::vector<int> labels) {
  Node& nl = node(logits);
  SoftmaxXent sx = num::softmax_cross_entropy(nl.value, labels);
  Node n;
  n.value = Tensor::from({1}, {sx.loss});
  n.needs_grad = nl.needs_grad;
  n.op = "softmax_cross_entropy";
  n.aux = std::move(sx.probs.values);
  n.labels = std::move(labels);
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, il = logits.id;
    node(out).backprop = [this, id, il] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nl2 = *nodes_[static_cast<size_t>(il)];
      const int nrows = nl2.value.dim(0), k = nl2.value.dim(1);
      const float g = no.grad[0] / static_cast<float>(nrows);
      for (int i = 0; i < nrows; ++i) {
        const float* prow = no.aux.data() + static_cast<size_t>(i) * k;
        float* drow = nl2.grad.data() + static_cast<size_t>(i) * k;
        const int y = no.labels[static_cast<size_t>(i)];
        for (int j = 0; j < k; ++j) {
          drow[j] += g * (prow[j] - (j == y ? 1.0f : 0.0f));
        }
      }
      check_finite(nl2.grad.data(), nl2.grad.size(), "softmax_cross_entropy.backward");
    };
  }
  return out;
}

Tape::Var Tape::sum(Var x) {
  Node& nx = node(x);
  double acc = 0.0;
  for (float v : nx.value.values) acc += static_cast<double>(v);
  Node n;
  n.value = Tensor::from({1}, {static_cast<float>(acc)});
  n.needs_grad = nx.needs_grad;
  n.op = "sum";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id;
    node(out).backprop = [this, id, ix] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      const float g = no.grad[0];
      for (auto& d : nx2.grad) d += g;
    };
  }
  return out;
}

Tape::Var Tape::sum_squares(Var x) {
  Node& nx = node(x);
  double acc = 0.0;
  for (float v : nx.value.values) acc += static_cast<double>(v) * static_cast<double>(v);
  Node n;
  n.value = Tensor::from({1}, {static_cast<float>(acc)});
  n.needs_grad = nx.needs_grad;
  n.op = "sum_squares";
  Var out = push(std::move(n));
  if (node(out).needs_grad) {
    int id = out.id, ix = x.id;
    node(out).backprop = [this, id, ix] {
      auto& no = *nodes_[static_cast<size_t>(id)];
      auto& nx2 = *nodes_[static_cast<size_t>(ix)];
      const float g = no.grad[0];
      for (size_t i = 0; i < nx2.grad.size(); ++i) {
        nx2.grad[i] += 2.0f * g * nx2.value.values[i];
      }
    };
  }
  return out;
}

void Tape::backward(Var loss) {
  if (backward_done_) {
    throw StateError("Tape::backward called twice on the same recording");
  }
  Node& nl = node(loss);
  if (nl.value.numel() != 1) throw StateError("Tape::backward: loss must be a scalar");
  if (!nl.needs_grad) throw StateError("Tape::backward: loss does not depend on any parameter");
  backward_done_ = true;
  nl.grad.assign(1, 1.0f);
  for (size_t i = nodes_.size(); i-- > 0;) {
    Node& n = *nodes_[i];
    if (n.backprop && n.needs_grad) n.backprop();
  }
  for (auto& np : nodes_) {
    if (np->bound && np->needs_grad) {
      np->bound->ensure_grad();
      kern::active_kernels().add_acc(np->bound->grad.data(), np->grad.data(), np->grad.size());
    }
  }
}

}  // namespace nctj::num
