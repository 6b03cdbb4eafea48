#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "avp/autograd.hpp"

namespace avp {

struct ParamGroup {
    std::string name;
    std::vector<Var> params;
    double base_lr = 0.0;
};

// Plain gradient descent with a per-epoch cosine decay of every group's rate.
class SgdState {
public:
    SgdState(std::vector<ParamGroup> groups, std::size_t total_epochs);

    // base · 0.5 · (1 + cos(π·epoch / total_epochs))
    static double cosine_rate(double base, std::size_t epoch, std::size_t total_epochs);

    double effective_lr(std::size_t group) const;
    std::size_t epoch() const { return epoch_; }
    void set_epoch(std::size_t epoch) { epoch_ = epoch; }
    const std::vector<ParamGroup>& groups() const { return groups_; }

private:
    std::vector<ParamGroup> groups_;
    std::size_t total_epochs_;
    std::size_t epoch_ = 0;
};

// p ← p − lr·grad(p), then clears every grad. Throws ContractError when a
// parameter has no grad and NumericError when an update leaves non-finite values.
void sgd_step(SgdState& state);

}  // namespace avp
