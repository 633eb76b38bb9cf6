#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgslam {

/// A flat learnable scalar array with a matching gradient buffer.
/// Frozen blocks are skipped by gradient accumulation and optimizer updates.
struct ParamBlock {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
  bool frozen = false;

  ParamBlock() = default;
  ParamBlock(std::string name_, std::size_t size, double fill = 0.0)
      : name(std::move(name_)), value(size, fill), grad(size, 0.0) {}

  std::size_t size() const { return value.size(); }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  void check_consistent() const {
    if (grad.size() != value.size())
      throw std::runtime_error("ParamBlock '" + name + "': gradient/value length mismatch");
  }
};

/// Freeze (or unfreeze) blocks whose name starts with `selector`.
/// "all" matches every block. Throws if the selector matches nothing.
inline void set_frozen(std::span<ParamBlock* const> blocks, const std::string& selector,
                       bool frozen) {
  bool matched = false;
  for (ParamBlock* b : blocks) {
    if (selector == "all" || b->name.rfind(selector, 0) == 0) {
      b->frozen = frozen;
      matched = true;
    }
  }
  if (!matched) throw std::invalid_argument("unknown parameter selector: " + selector);
}

inline void freeze(std::span<ParamBlock* const> blocks, const std::string& selector) {
  set_frozen(blocks, selector, true);
}

inline void unfreeze(std::span<ParamBlock* const> blocks, const std::string& selector) {
  set_frozen(blocks, selector, false);
}

}  // namespace fgslam
