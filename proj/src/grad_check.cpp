#include "avp/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "avp/errors.hpp"
#include "avp/random.hpp"

namespace avp {

namespace {

double evaluate(const GraphBuilder& build, const std::vector<Tensor>& values) {
    std::vector<Var> leaves;
    leaves.reserve(values.size());
    for (const auto& v : values) leaves.push_back(constant(v));
    const Var out = build(leaves);
    if (out.value().numel() != 1) throw ContractError("grad_check builder must return a scalar");
    return out.value()[0];
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& build, std::span<const Tensor> inputs, double step) {
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(parameter(t));
    const Var out = build(leaves);
    backward(out);

    GradCheckResult result;
    std::vector<Tensor> values(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < values.size(); ++l) {
        const bool reached = leaves[l].has_grad();
        for (std::size_t i = 0; i < values[l].numel(); ++i) {
            const double analytic = reached ? leaves[l].grad()[i] : 0.0;
            const double saved = values[l][i];
            const double up = saved + step, down = saved - step;
            values[l][i] = up;
            const double fp = evaluate(build, values);
            values[l][i] = down;
            const double fm = evaluate(build, values);
            values[l][i] = saved;
            // Divide by the step actually realized in floating point.
            const double numeric = (fp - fm) / (up - down);
            const double err =
                std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_leaf = l;
                result.worst_index = i;
            }
        }
    }
    return result;
}

GradCheckResult grad_check(const GraphBuilder& build, std::span<const Shape> shapes, std::uint64_t seed,
                           double step) {
    CounterRng rng({seed, 0x6772616463686bULL});
    std::vector<Tensor> inputs;
    for (const auto& s : shapes) {
        Tensor t(s);
        for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
        inputs.push_back(std::move(t));
    }
    return grad_check(build, inputs, step);
}

}  // namespace avp
