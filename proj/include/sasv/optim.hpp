#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sasv {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double momentum = 0.0; // Sgd
  double beta1 = 0.9;    // Adam
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// First-order optimizer over a fixed list of parameter blocks. State (SGD
/// velocity, Adam moments) is kept per block, in registration order.
class Optimizer {
public:
  Optimizer(OptimizerConfig cfg, std::vector<std::size_t> block_sizes);

  /// params[i] and grads[i] must match block_sizes[i].
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

  std::size_t steps() const noexcept { return t_; }
  const OptimizerConfig &config() const noexcept { return cfg_; }

private:
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

} // namespace sasv
