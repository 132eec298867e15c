#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nctj/tensor.hpp"

namespace nctj::num {

// Reverse-mode tape. One tape records one forward pass; backward() may run
// once per recording. Parameters are bound by reference and receive their
// gradients (accumulated into Tensor::grad) when backward() finishes.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to an external tensor; set needs_grad=false for frozen params.
  Var param(Tensor& t, bool needs_grad = true);
  // Leaf input (batch data); never receives a gradient.
  Var input(Tensor t);

  Var matmul(Var a, Var b);
  Var linear(Var x, Var w, Var b);          // x.wT + bias; b may be invalid for no bias
  Var relu(Var x);
  Var conv2d(Var x, Var k, Var b);          // 3x3, stride 1, pad 1; b may be invalid
  Var avgpool2(Var x);
  Var flatten(Var x);
  Var softmax_cross_entropy(Var logits, std::vector<int> labels);  // scalar
  Var sum(Var x);         // scalar, f64 accumulation
  Var sum_squares(Var x); // scalar, f64 accumulation

  const Tensor& value(Var v) const;
  float scalar(Var v) const;

  // Seeds d(loss)=1, runs all recorded ops in reverse, then adds leaf grads
  // into their bound tensors. Throws StateError if called twice.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<float> grad;       // allocated iff needs_grad
    std::function<void()> backprop;
    Tensor* bound = nullptr;
    bool needs_grad = false;
    const char* op = "";
    std::vector<float> aux;        // op scratch cached for backward (im2col, probs)
    std::vector<int> labels;       // softmax targets
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);

  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

}  // namespace nctj::num
