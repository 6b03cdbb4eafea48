#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "avp/autograd.hpp"

namespace avp {

// Builds a scalar output from leaf variables. Called once with trainable
// leaves for the analytic pass and repeatedly with constants for the numeric pass.
using GraphBuilder = std::function<Var(std::span<const Var>)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_leaf = 0;
    std::size_t worst_index = 0;
    bool passes(double tolerance) const { return max_rel_error < tolerance; }
};

// Max over leaves and coordinates of |analytic − numeric| / max(1e-8, |analytic| + |numeric|)
// with central differences of the given step.
GradCheckResult grad_check(const GraphBuilder& build, std::span<const Tensor> inputs, double step = 1e-5);

// Same, with inputs drawn i.i.d. uniform(-1, 1) for the given shapes.
GradCheckResult grad_check(const GraphBuilder& build, std::span<const Shape> shapes, std::uint64_t seed,
                           double step = 1e-5);

}  // namespace avp
