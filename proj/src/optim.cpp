#include "nctj/optim.hpp"

#include "nctj/kernels.hpp"

namespace nctj::num {

Tensor& ParamSet::add(const std::string& name, Tensor t, bool frozen) {
  auto [it, inserted] = map_.emplace(name, Param{std::move(t), frozen});
  if (!inserted) throw ArgumentError("ParamSet: duplicate parameter name '" + name + "'");
  return it->second.tensor;
}

Param& ParamSet::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw ArgumentError("ParamSet: no parameter named '" + name + "'");
  return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw ArgumentError("ParamSet: no parameter named '" + name + "'");
  return it->second;
}

void ParamSet::set_frozen(const std::string& name, bool frozen) { at(name).frozen = frozen; }

void ParamSet::zero_grad() {
  for (auto& [name, p] : map_) p.tensor.zero_grad();
}

SgdOptimizer::SgdOptimizer(float lr, float momentum, float weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  if (lr <= 0.0f) throw ArgumentError("SgdOptimizer: lr must be positive");
}

void SgdOptimizer::step(ParamSet& params) {
  for (auto& [name, p] : params) {
    if (p.frozen) continue;
    if (!p.tensor.has_grad()) {
      throw StateError("SgdOptimizer::step: parameter '" + name + "' has no gradient");
    }
    auto& vel = velocity_[name];
    if (vel.size() != p.tensor.numel()) vel.assign(p.tensor.numel(), 0.0f);
    kern::active_kernels().sgd_update(p.tensor.values.data(), vel.data(),
                                      p.tensor.grad.data(), p.tensor.numel(), lr_,
                                      momentum_, weight_decay_);
    check_finite(p.tensor, "sgd_step");
  }
}

}  // namespace nctj::num
