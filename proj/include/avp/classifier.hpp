#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "avp/autograd.hpp"
#include "avp/checkpoint.hpp"

namespace avp {

inline constexpr std::size_t kEmbeddingDim = 64;
inline constexpr double kLogitScale = 100.0;
// Pixels are standardized as (x - mean) / std before the first conv stage.
inline constexpr double kInputMean = 0.5;
inline constexpr double kInputStd = 0.25;

// Fixed random-weight vision encoder: three stride-2 3×3 conv + relu stages
// (3 -> 16 -> 32 -> 64), global average pooling, then a linear map to 64 dims.
// Weights are plain tensors, so no optimizer can ever reach them.
struct FrozenEncoder {
    std::uint64_t seed = 0;
    std::vector<Tensor> conv_weights;
    std::vector<Tensor> conv_biases;
    Tensor proj_weight;  // 64×64
    Tensor proj_bias;    // 64
};

FrozenEncoder make_frozen_encoder(std::uint64_t seed);
std::uint64_t encoder_hash(const FrozenEncoder& encoder);

void store_encoder(Checkpoint& ck, const FrozenEncoder& encoder);
FrozenEncoder load_encoder(const Checkpoint& ck);

// N×3×H×W -> N×64. Gradients pass through to the input.
Var encode(const Var& images, const FrozenEncoder& encoder);
// 3×H×W -> 64
Tensor encode(const Tensor& image, const FrozenEncoder& encoder);

// K unit-norm class directions built from clean images.
struct ClassPrototypes {
    Tensor vectors;  // K×64
    std::size_t per_class_n = 0;
    std::uint64_t encoder_seed = 0;

    std::size_t num_classes() const { return vectors.dim(0); }
};

// prototype_c = normalize(mean embedding of the first per_class_n samples of
// class c in dataset order). images N×3×H×W. Throws DataError naming any class
// with fewer samples.
ClassPrototypes build_prototypes(const Tensor& images, std::span<const std::size_t> labels,
                                 std::size_t num_classes, const FrozenEncoder& encoder, std::size_t per_class_n);

// scale · cos(e_v, p_c). embeddings N×64 -> N×K. Throws NumericError on a
// zero-norm embedding.
Var similarity_logits(const Var& embeddings, const ClassPrototypes& prototypes, double scale = kLogitScale);
std::vector<double> similarity_logits(std::span<const double> embedding, const ClassPrototypes& prototypes,
                                      double scale = kLogitScale);

// Cross-entropy of softmax(scores) against one label.
double loss(std::span<const double> scores, std::size_t label);

}  // namespace avp
