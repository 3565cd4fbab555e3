#include "sasv/optim.hpp"

#include "sasv/core.hpp"

#include <cmath>

namespace sasv {

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw Error("optimizer: lr must be finite and >= 0");
  if (kind == OptimizerKind::Sgd && !(momentum >= 0.0 && momentum < 1.0))
    throw Error("optimizer: momentum must lie in [0,1)");
  if (kind == OptimizerKind::Adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw Error("optimizer: Adam betas must lie in [0,1)");
    if (!(eps > 0.0))
      throw Error("optimizer: Adam eps must be positive");
  }
}

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<std::size_t> block_sizes) : cfg_(cfg) {
  cfg_.validate();
  m_.reserve(block_sizes.size());
  for (std::size_t n : block_sizes)
    m_.emplace_back(n, 0.0);
  if (cfg_.kind == OptimizerKind::Adam)
    v_ = m_;
}

void Optimizer::step(std::span<const std::span<double>> params,
                     std::span<const std::span<const double>> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw Error("optimizer: parameter block count changed");
  ++t_;
  if (cfg_.kind == OptimizerKind::Sgd) {
    for (std::size_t b = 0; b < m_.size(); ++b) {
      auto p = params[b];
      auto g = grads[b];
      auto &vel = m_[b];
      for (std::size_t i = 0; i < p.size(); ++i) {
        vel[i] = cfg_.momentum * vel[i] + g[i];
        p[i] -= cfg_.lr * vel[i];
      }
    }
    return;
  }
  const double t = static_cast<double>(t_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t b = 0; b < m_.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto &m = m_[b];
    auto &v = v_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

} // namespace sasv
