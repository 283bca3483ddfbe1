#include "ntssl/optim.hpp"

#include <cmath>

namespace ntssl {

void AdamW::step(ad::ParamStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, entry] : params.entries()) {
    auto [it, fresh] = state_.try_emplace(name);
    if (fresh) it->second = {Tensor(entry.value.shape(), 0.0), Tensor(entry.value.shape(), 0.0)};
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    Tensor& p = entry.value;
    const Tensor& g = entry.grad;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * cfg_.weight_decay * p[i];
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace ntssl
