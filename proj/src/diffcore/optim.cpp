#include "facetts/diffcore/optim.hpp"

#include <cmath>
#include <unordered_set>

#include "facetts/common/errors.hpp"

namespace facetts::dc {

Adam::Adam(std::vector<ParamGroup> groups) : Adam(std::move(groups), Options{}) {}

Adam::Adam(std::vector<ParamGroup> groups, Options options) : groups_(std::move(groups)), options_(options) {
  std::unordered_set<const Node*> seen;
  std::unordered_set<std::string> group_names;
  for (const auto& g : groups_) {
    if (!group_names.insert(g.name).second) throw ContractViolation("Adam: duplicate group " + g.name);
    if (!(g.lr > 0.0)) throw ContractViolation("Adam: group " + g.name + " needs a positive learning rate");
    std::vector<Slot> slots;
    for (const auto& p : g.params) {
      if (!p.tensor.is_leaf() || !p.tensor.requires_grad()) {
        throw ContractViolation("Adam: parameter " + p.name + " is not a trainable leaf");
      }
      if (!seen.insert(p.tensor.node().get()).second) {
        throw ContractViolation("Adam: parameter " + p.name + " appears in more than one group");
      }
      slots.push_back({std::vector<double>(p.tensor.size(), 0.0), std::vector<double>(p.tensor.size(), 0.0)});
    }
    slots_.push_back(std::move(slots));
  }
}

void Adam::step() {
  for (const auto& g : groups_) {
    for (const auto& p : g.params) {
      if (!p.tensor.has_grad()) throw ContractViolation("Adam::step: parameter " + p.name + " has no grad");
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const double lr = groups_[gi].lr;
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      Tensor t = groups_[gi].params[pi].tensor;
      auto& slot = slots_[gi][pi];
      const auto grad = t.grad();
      auto value = t.mutable_data();
      for (std::size_t i = 0; i < value.size(); ++i) {
        slot.m[i] = options_.beta1 * slot.m[i] + (1.0 - options_.beta1) * grad[i];
        slot.v[i] = options_.beta2 * slot.v[i] + (1.0 - options_.beta2) * grad[i] * grad[i];
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        value[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
      }
    }
  }
}

void Adam::zero_grad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) {
      Tensor t = p.tensor;
      t.zero_grad();
    }
  }
}

double Adam::group_lr(std::string_view group) const {
  for (const auto& g : groups_) {
    if (g.name == group) return g.lr;
  }
  throw ContractViolation("Adam: unknown group " + std::string(group));
}

void Adam::set_group_lr(std::string_view group, double lr) {
  for (auto& g : groups_) {
    if (g.name == group) {
      g.lr = lr;
      return;
    }
  }
  throw ContractViolation("Adam: unknown group " + std::string(group));
}

void Adam::save_state(Container& out) const {
  out.meta["adam"] = {{"step", step_}};
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      const auto& p = groups_[gi].params[pi];
      out.add("adam.m/" + p.name, p.tensor.shape(), slots_[gi][pi].m);
      out.add("adam.v/" + p.name, p.tensor.shape(), slots_[gi][pi].v);
    }
  }
}

void Adam::load_state(const Container& in) {
  if (!in.meta.contains("adam")) throw ContractViolation("Adam::load_state: container has no optimizer state");
  step_ = in.meta["adam"]["step"].get<std::uint64_t>();
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      const auto& p = groups_[gi].params[pi];
      const auto& m = in.at("adam.m/" + p.name);
      const auto& v = in.at("adam.v/" + p.name);
      if (m.shape != p.tensor.shape() || v.shape != p.tensor.shape()) {
        throw ContractViolation("Adam::load_state: moment shape mismatch for " + p.name);
      }
      slots_[gi][pi].m = m.data;
      slots_[gi][pi].v = v.data;
    }
  }
}

}  // namespace facetts::dc
