#pragma once

#include <cmath>

#include "fgslam/param_block.hpp"

namespace fgslam {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed set of parameter blocks, one learning
/// rate per block. Frozen blocks are left untouched; gradients of every
/// block are cleared after a step.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(std::vector<ParamBlock*> blocks, std::vector<double> learning_rates,
                AdamConfig cfg = {})
      : blocks_(std::move(blocks)), lrs_(std::move(learning_rates)), cfg_(cfg) {
    if (blocks_.size() != lrs_.size())
      throw std::invalid_argument("adam: one learning rate per block required");
    m_.resize(blocks_.size());
    v_.resize(blocks_.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      m_[k].assign(blocks_[k]->size(), 0.0);
      v_[k].assign(blocks_[k]->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      ParamBlock& b = *blocks_[k];
      if (!b.frozen) {
        const double lr = lrs_[k];
        for (std::size_t i = 0; i < b.size(); ++i) {
          const double g = b.grad[i];
          m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g;
          v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g * g;
          const double mhat = m_[k][i] / bc1;
          const double vhat = v_[k][i] / bc2;
          b.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
      }
      b.zero_grad();
    }
  }

  int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<ParamBlock*> blocks_;
  std::vector<double> lrs_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

/// Default learning rates for the three parameter families.
struct OptimConfig {
  double lr_grids = 0.01;
  double lr_decoders = 0.001;
  double lr_pose = 0.001;
  AdamConfig adam;
};

}  // namespace fgslam
