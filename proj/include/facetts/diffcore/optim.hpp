#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "facetts/diffcore/container.hpp"
#include "facetts/diffcore/layers.hpp"

namespace facetts::dc {

struct ParamGroup {
  std::string name;
  double lr = 1e-4;
  ParamList params;
};

/// Adam with independent learning rates per parameter group.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(std::vector<ParamGroup> groups);
  Adam(std::vector<ParamGroup> groups, Options options);

  /// Applies one update. Every parameter must carry a grad.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  double group_lr(std::string_view group) const;
  void set_group_lr(std::string_view group, double lr);

  /// Moment buffers as "adam.m/<param>" and "adam.v/<param>" entries plus the step counter.
  void save_state(Container& out) const;
  void load_state(const Container& in);

 private:
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
  };

  std::vector<ParamGroup> groups_;
  Options options_;
  std::vector<std::vector<Slot>> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace facetts::dc
