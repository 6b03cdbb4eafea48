#include "avp/optim.hpp"

#include <cmath>
#include <numbers>

#include "avp/errors.hpp"

namespace avp {

SgdState::SgdState(std::vector<ParamGroup> groups, std::size_t total_epochs)
    : groups_(std::move(groups)), total_epochs_(total_epochs) {
    for (const auto& g : groups_) {
        if (!(g.base_lr > 0.0)) throw ContractError("learning rate of group '" + g.name + "' must be > 0");
        for (const auto& p : g.params) {
            if (!p.requires_grad()) throw ContractError("group '" + g.name + "' holds a non-trainable tensor");
        }
    }
}

double SgdState::cosine_rate(double base, std::size_t epoch, std::size_t total_epochs) {
    if (total_epochs == 0) return base;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return std::max(0.0, base * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

double SgdState::effective_lr(std::size_t group) const {
    return cosine_rate(groups_.at(group).base_lr, epoch_, total_epochs_);
}

void sgd_step(SgdState& state) {
    const auto& groups = state.groups();
    for (const auto& g : groups) {
        for (const auto& p : g.params) {
            if (!p.has_grad()) throw ContractError("parameter in group '" + g.name + "' has no gradient");
        }
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double lr = state.effective_lr(gi);
        for (Var p : groups[gi].params) {
            auto v = p.mutable_value().data();
            auto grad = p.grad().data();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * grad[i];
            p.clear_grad();
        }
    }
    for (const auto& g : groups) {
        for (const auto& p : g.params) {
            if (!p.value().all_finite()) {
                throw NumericError("non-finite parameter value in group '" + g.name + "' after update");
            }
        }
    }
}

}  // namespace avp
