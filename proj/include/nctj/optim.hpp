#pragma once

#include <map>
#include <string>

#include "nctj/tensor.hpp"

namespace nctj::num {

struct Param {
  Tensor tensor;
  bool frozen = false;
};

// Named parameters with freeze flags. std::map keeps iteration order stable
// (by name) and node addresses stable across inserts, so bound tape leaves
// stay valid.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t, bool frozen = false);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return map_.count(name) > 0; }
  void set_frozen(const std::string& name, bool frozen);
  void zero_grad();

  size_t size() const { return map_.size(); }
  auto begin() { return map_.begin(); }
  auto end() { return map_.end(); }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

 private:
  std::map<std::string, Param> map_;
};

// SGD with momentum and decoupled-from-nothing weight decay (classic L2 fold):
//   v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v
// Frozen parameters are skipped entirely; their velocity stays zero.
class SgdOptimizer {
 public:
  SgdOptimizer(float lr, float momentum, float weight_decay);

  void step(ParamSet& params);
  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

 private:
  float lr_, momentum_, weight_decay_;
  std::map<std::string, std::vector<float>> velocity_;
};

}  // namespace nctj::num
