#include "fgslam/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace fgslam {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Mlp::Mlp(std::string name, std::vector<int> layer_sizes, Output output, uint64_t seed)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
  std::mt19937_64 rng(seed);
  for (int k = 0; k + 1 < int(sizes_.size()); ++k) {
    const int fan_in = sizes_[k];
    const int fan_out = sizes_[k + 1];
    weights_.emplace_back(name + ".w" + std::to_string(k), std::size_t(fan_in) * fan_out);
    biases_.emplace_back(name + ".b" + std::to_string(k), fan_out);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : weights_.back().value) w = dist(rng);
  }
}

std::vector<ParamBlock*> Mlp::blocks() {
  std::vector<ParamBlock*> out;
  for (int k = 0; k < num_layers(); ++k) {
    out.push_back(&weights_[k]);
    out.push_back(&biases_[k]);
  }
  return out;
}

std::vector<const ParamBlock*> Mlp::blocks() const {
  std::vector<const ParamBlock*> out;
  for (int k = 0; k < num_layers(); ++k) {
    out.push_back(&weights_[k]);
    out.push_back(&biases_[k]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights_) n += w.size();
  for (const auto& b : biases_) n += b.size();
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Trace* trace) const {
  if (x.rows() != input_size()) throw std::invalid_argument("mlp: input width mismatch");
  if (trace) {
    trace->act.resize(num_layers() + 1);
    trace->act[0] = x;
  }
  Eigen::MatrixXd a = x;
  for (int k = 0; k < num_layers(); ++k) {
    RowMajorMap w(weights_[k].value.data(), sizes_[k + 1], sizes_[k]);
    Eigen::Map<const Eigen::VectorXd> b(biases_[k].value.data(), sizes_[k + 1]);
    Eigen::MatrixXd z = (w * a).colwise() + b;
    if (k + 1 < num_layers()) {
      a = z.cwiseMax(0.0);
    } else if (output_ == Output::Sigmoid) {
      a = z.unaryExpr([](double v) { return stable_sigmoid(v); });
    } else {
      a = std::move(z);
    }
    if (trace) trace->act[k + 1] = a;
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Trace& trace, const Eigen::MatrixXd& upstream) {
  if (int(trace.act.size()) != num_layers() + 1)
    throw std::invalid_argument("mlp: backward without a recorded forward trace");
  Eigen::MatrixXd dz;
  if (output_ == Output::Sigmoid) {
    const Eigen::MatrixXd& y = trace.act.back();
    dz = upstream.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  } else {
    dz = upstream;
  }
  for (int k = num_layers() - 1; k >= 0; --k) {
    const Eigen::MatrixXd& a_in = trace.act[k];
    if (!weights_[k].frozen) {
      RowMajorMutMap dw(weights_[k].grad.data(), sizes_[k + 1], sizes_[k]);
      dw.noalias() += dz * a_in.transpose();
    }
    if (!biases_[k].frozen) {
      Eigen::Map<Eigen::VectorXd> db(biases_[k].grad.data(), sizes_[k + 1]);
      db.noalias() += dz.rowwise().sum();
    }
    RowMajorMap w(weights_[k].value.data(), sizes_[k + 1], sizes_[k]);
    Eigen::MatrixXd dx = w.transpose() * dz;
    if (k > 0) {
      // ReLU mask from the stored post-activation of the previous layer.
      dz = dx.cwiseProduct((trace.act[k].array() > 0.0).cast<double>().matrix());
    } else {
      return dx;
    }
  }
  return {};
}

}  // namespace fgslam
