#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fgslam/param_block.hpp"

namespace fgslam {

/// Small dense MLP with ReLU hidden units. Weights are row-major [out x in]
/// flats inside ParamBlocks so the optimizer and checkpointing see plain
/// scalar arrays.
class Mlp {
 public:
  enum class Output { Linear, Sigmoid };

  Mlp() = default;
  Mlp(std::string name, std::vector<int> layer_sizes, Output output, uint64_t seed);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return int(sizes_.size()) - 1; }
  Output output_activation() const { return output_; }

  std::vector<ParamBlock*> blocks();
  std::vector<const ParamBlock*> blocks() const;
  std::size_t parameter_count() const;

  /// Per-call intermediates kept for the backward pass.
  struct Trace {
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[k+1] = layer k output
  };

  /// x: input_size x N columns. Returns output_size x N.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Trace* trace = nullptr) const;

  /// Accumulates parameter gradients (skipping frozen blocks) and returns
  /// dL/dx for the forward call recorded in `trace`.
  Eigen::MatrixXd backward(const Trace& trace, const Eigen::MatrixXd& upstream);

 private:
  std::vector<int> sizes_;
  Output output_ = Output::Linear;
  std::vector<ParamBlock> weights_;  // one per layer
  std::vector<ParamBlock> biases_;
};

}  // namespace fgslam
