#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "avp/autograd.hpp"
#include "avp/edge.hpp"

namespace avp {

// Temperature of the Gumbel-Softmax relaxation, decayed once per epoch.
struct GumbelSchedule {
    double tau = 5.0;
    double tau0 = 5.0;
    double gamma = 0.98;

    static GumbelSchedule start(double tau0, double gamma);
};

// τ' = γ·τ
GumbelSchedule anneal(const GumbelSchedule& schedule);

// Convergence module: 3×3 conv (1 -> D, padding 1) + relu.
// Policy module: 1×1 conv (D -> 2) followed by a per-region mean.
struct MaskGeneratorParams {
    Var fc_weight;  // D×1×3×3
    Var fc_bias;    // D
    Var fp_weight;  // 2×D×1×1
    Var fp_bias;    // 2
    std::size_t embed_dim = 64;
    std::size_t region_size = 16;

    std::vector<Var> trainable() const { return {fc_weight, fc_bias, fp_weight, fp_bias}; }
};

MaskGeneratorParams make_mask_generator(std::size_t embed_dim, std::size_t region_size, std::uint64_t seed);

// 9·D + D + 2·D + 2
std::size_t count_generator_params(std::size_t embed_dim);

// Keep/discard decisions of one image on its G_h×G_w region grid.
struct RegionDecisionMap {
    Tensor soft;  // G_h×G_w, keep probability in (0, 1)
    Tensor hard;  // G_h×G_w, exactly 0 or 1
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
};

// Mean of N×C×H×W over r×r blocks, laid out N×G_h×G_w×C.
Var region_mean(const Var& pixels, std::size_t region_size);

// edges N×1×H×W -> logits N×G_h×G_w×2 (index 1 = keep).
Var region_logits(const Var& edges, const MaskGeneratorParams& params);
Tensor region_logits(const EdgeMap& edge, const MaskGeneratorParams& params);

// Softmax((ℓ + G)/τ) over the two decisions.
std::array<double, 2> gumbel_softmax_sample(std::array<double, 2> logits, const GumbelSchedule& schedule,
                                            std::array<double, 2> noise);

// 1 iff ℓ₁ > ℓ₀; ties discard. Throws NumericError on non-finite logits.
int inference_decision(std::array<double, 2> logits);

// Standard Gumbel noise for a batch of region logits. Each region's pair is
// drawn from a stream keyed by (seed, epoch, step, global region index), where
// the global index counts regions from the start of the batch; `first_sample`
// positions a micro-batch inside its batch.
Tensor gumbel_noise(std::uint64_t seed, std::uint64_t epoch, std::uint64_t step, std::size_t first_sample,
                    const Shape& logits_shape);

// Relaxed keep values N×G_h×G_w from logits N×G_h×G_w×2 and matching noise.
// With straight_through the forward value is the hard argmax of ℓ+G while
// gradients follow the soft sample.
Var gumbel_keep(const Var& logits, const Tensor& noise, double tau, bool straight_through = false);

// argmax decisions N×G_h×G_w (or G_h×G_w) from logits with a trailing axis of 2.
Tensor hard_decisions(const Tensor& logits);

// Builds the decision map of one image from its G_h×G_w×2 logits; the soft
// component uses zero noise at temperature τ.
RegionDecisionMap decide_regions(const Tensor& logits, const GumbelSchedule& schedule);

// Nearest-neighbour upsampling N×G_h×G_w -> N×1×(G_h·r)×(G_w·r).
Var dilate(const Var& regions, std::size_t region_size);
// G_h×G_w -> 1×H×W
Tensor dilate(const Tensor& regions, std::size_t region_size);

}  // namespace avp
