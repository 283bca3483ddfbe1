#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "ntssl/autodiff.hpp"

namespace ntssl {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// Adam with decoupled weight decay, applied to every parameter in the store.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  /// Consumes the gradients accumulated in `params`; does not zero them.
  void step(ad::ParamStore& params);
  std::size_t steps() const noexcept { return t_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamWConfig cfg_;
  std::map<std::string, Moments> state_;
  std::size_t t_ = 0;
};

}  // namespace ntssl
