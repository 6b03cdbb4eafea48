#include "avp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "avp/errors.hpp"
#include "avp/ops.hpp"
#include "avp/random.hpp"

namespace avp {

namespace {

constexpr std::size_t kStageChannels[4] = {3, 16, 32, 64};

}  // namespace

FrozenEncoder make_frozen_encoder(std::uint64_t seed) {
    FrozenEncoder enc;
    enc.seed = seed;
    CounterRng rng({seed, 0x656e636f646572ULL});
    for (std::size_t s = 0; s < 3; ++s) {
        const std::size_t cin = kStageChannels[s], cout = kStageChannels[s + 1];
        Tensor w({cout, cin, 3, 3});
        const double std = std::sqrt(2.0 / static_cast<double>(cin * 9));
        for (double& v : w.data()) v = rng.normal(0.0, std);
        Tensor b({cout});
        for (double& v : b.data()) v = rng.normal(0.0, 0.1);
        enc.conv_weights.push_back(std::move(w));
        enc.conv_biases.push_back(std::move(b));
    }
    enc.proj_weight = Tensor({kEmbeddingDim, kStageChannels[3]});
    const double std = 1.0 / std::sqrt(static_cast<double>(kStageChannels[3]));
    for (double& v : enc.proj_weight.data()) v = rng.normal(0.0, std);
    enc.proj_bias = Tensor({kEmbeddingDim}, 0.0);
    return enc;
}

std::uint64_t encoder_hash(const FrozenEncoder& enc) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t s = 0; s < enc.conv_weights.size(); ++s) {
        h = tensor_hash(enc.conv_weights[s], h);
        h = tensor_hash(enc.conv_biases[s], h);
    }
    h = tensor_hash(enc.proj_weight, h);
    return tensor_hash(enc.proj_bias, h);
}

void store_encoder(Checkpoint& ck, const FrozenEncoder& enc) {
    ck.put_scalar("encoder.seed", static_cast<double>(enc.seed));
    for (std::size_t s = 0; s < enc.conv_weights.size(); ++s) {
        ck.put("encoder.conv" + std::to_string(s + 1) + ".weight", enc.conv_weights[s]);
        ck.put("encoder.conv" + std::to_string(s + 1) + ".bias", enc.conv_biases[s]);
    }
    ck.put("encoder.proj.weight", enc.proj_weight);
    ck.put("encoder.proj.bias", enc.proj_bias);
}

FrozenEncoder load_encoder(const Checkpoint& ck) {
    FrozenEncoder enc;
    enc.seed = static_cast<std::uint64_t>(ck.get_scalar("encoder.seed"));
    for (std::size_t s = 0; s < 3; ++s) {
        enc.conv_weights.push_back(ck.get("encoder.conv" + std::to_string(s + 1) + ".weight"));
        enc.conv_biases.push_back(ck.get("encoder.conv" + std::to_string(s + 1) + ".bias"));
        const Shape expected{kStageChannels[s + 1], kStageChannels[s], 3, 3};
        if (enc.conv_weights.back().shape() != expected || enc.conv_biases.back().shape() != Shape{expected[0]}) {
            throw ContractError("checkpoint encoder stage " + std::to_string(s + 1) + " has shape " +
                                shape_str(enc.conv_weights.back().shape()));
        }
    }
    enc.proj_weight = ck.get("encoder.proj.weight");
    enc.proj_bias = ck.get("encoder.proj.bias");
    if (enc.proj_weight.shape() != Shape{kEmbeddingDim, kStageChannels[3]} ||
        enc.proj_bias.shape() != Shape{kEmbeddingDim}) {
        throw ContractError("checkpoint encoder projection has shape " + shape_str(enc.proj_weight.shape()));
    }
    return enc;
}

Var encode(const Var& images, const FrozenEncoder& enc) {
    const Shape& s = images.shape();
    if (s.size() != 4 || s[1] != 3) throw ContractError("encode expects N×3×H×W, got " + shape_str(s));
    if (s[2] < 8 || s[3] < 8) {
        throw ContractError("encode needs spatial dims >= 8 for three stride-2 stages, got " + shape_str(s));
    }
    Var h = scale(add(images, constant(Tensor(s, -kInputMean))), 1.0 / kInputStd);
    for (std::size_t stage = 0; stage < 3; ++stage) {
        h = relu(conv2d(h, constant(enc.conv_weights[stage]), constant(enc.conv_biases[stage]), {2, 1}));
    }
    return linear(global_avg_pool(h), constant(enc.proj_weight), constant(enc.proj_bias));
}

Tensor encode(const Tensor& image, const FrozenEncoder& enc) {
    if (image.rank() != 3) throw ContractError("encode expects 3×H×W, got " + shape_str(image.shape()));
    const Tensor e = encode(constant(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)})), enc).value();
    return e.reshaped({kEmbeddingDim});
}

ClassPrototypes build_prototypes(const Tensor& images, std::span<const std::size_t> labels, std::size_t num_classes,
                                 const FrozenEncoder& enc, std::size_t per_class_n) {
    if (images.rank() != 4 || images.dim(0) != labels.size()) {
        throw ContractError("build_prototypes: images " + shape_str(images.shape()) + " vs " +
                            std::to_string(labels.size()) + " labels");
    }
    if (per_class_n == 0) throw ContractError("build_prototypes needs per_class_n >= 1");
    const std::size_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
    const std::size_t sample = c * h * w;
    std::vector<std::vector<std::size_t>> picks(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) throw DataError("label " + std::to_string(labels[i]) + " out of range");
        if (picks[labels[i]].size() < per_class_n) picks[labels[i]].push_back(i);
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (picks[k].size() < per_class_n) {
            throw DataError("class " + std::to_string(k) + " has " + std::to_string(picks[k].size()) +
                            " samples, needs " + std::to_string(per_class_n));
        }
    }
    ClassPrototypes protos{Tensor({num_classes, kEmbeddingDim}, 0.0), per_class_n, enc.seed};
    for (std::size_t k = 0; k < num_classes; ++k) {
        Tensor batch({per_class_n, c, h, w});
        for (std::size_t j = 0; j < per_class_n; ++j) {
            std::copy_n(images.data().begin() + picks[k][j] * sample, sample, batch.data().begin() + j * sample);
        }
        const Tensor emb = encode(constant(std::move(batch)), enc).value();
        double* row = protos.vectors.data().data() + k * kEmbeddingDim;
        for (std::size_t j = 0; j < per_class_n; ++j)
            for (std::size_t d = 0; d < kEmbeddingDim; ++d) row[d] += emb[j * kEmbeddingDim + d];
        double norm = 0.0;
        for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
            row[d] /= static_cast<double>(per_class_n);
            norm += row[d] * row[d];
        }
        norm = std::sqrt(norm);
        if (!(norm > 0.0)) throw NumericError("class " + std::to_string(k) + " has a zero mean embedding");
        for (std::size_t d = 0; d < kEmbeddingDim; ++d) row[d] /= norm;
    }
    return protos;
}

Var similarity_logits(const Var& embeddings, const ClassPrototypes& protos, double scale) {
    if (!(scale > 0.0)) throw ContractError("similarity scale must be > 0");
    const Shape& s = embeddings.shape();
    const std::size_t d = protos.vectors.dim(1);
    if (s.size() != 2 || s[1] != d) {
        throw ContractError("similarity_logits: embeddings " + shape_str(s) + " vs prototypes " +
                            shape_str(protos.vectors.shape()));
    }
    const std::size_t n = s[0], k = protos.vectors.dim(0);
    auto e = embeddings.value().data();
    auto p = protos.vectors.data();
    std::vector<double> e_norm(n), p_norm(k);
    for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += p[c * d + j] * p[c * d + j];
        p_norm[c] = std::sqrt(acc);
        if (!(p_norm[c] > 0.0)) throw NumericError("zero-norm prototype " + std::to_string(c));
    }
    // Unscaled cosines are kept for the backward pass.
    Tensor cosines({n, k});
    Tensor out({n, k});
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += e[r * d + j] * e[r * d + j];
        e_norm[r] = std::sqrt(acc);
        if (!(e_norm[r] > 0.0) || !std::isfinite(e_norm[r])) {
            throw NumericError("embedding " + std::to_string(r) + " has zero or non-finite norm");
        }
        for (std::size_t c = 0; c < k; ++c) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += e[r * d + j] * p[c * d + j];
            cosines[r * k + c] = dot / (e_norm[r] * p_norm[c]);
            out[r * k + c] = scale * cosines[r * k + c];
        }
    }
    Tensor protos_copy = protos.vectors;
    return make_result(std::move(out), {embeddings}, "similarity_logits",
                       [n, k, d, scale, e_norm = std::move(e_norm), p_norm = std::move(p_norm),
                        cosines = std::move(cosines), protos_copy = std::move(protos_copy)](Node& self) {
                           auto g = self.inputs[0]->grad_buffer().data();
                           auto e = self.inputs[0]->value.data();
                           auto p = protos_copy.data();
                           // ∂cos/∂e = p/(|e||p|) − cos·e/|e|²
                           for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t c = 0; c < k; ++c) {
                                   const double s = self.grad[r * k + c] * scale;
                                   const double a = s / (e_norm[r] * p_norm[c]);
                                   const double b = s * cosines[r * k + c] / (e_norm[r] * e_norm[r]);
                                   for (std::size_t j = 0; j < d; ++j) g[r * d + j] += a * p[c * d + j] - b * e[r * d + j];
                               }
                           }
                       });
}

std::vector<double> similarity_logits(std::span<const double> embedding, const ClassPrototypes& protos, double scale) {
    const Var e = constant(Tensor({1, embedding.size()}, std::vector<double>(embedding.begin(), embedding.end())));
    const Tensor out = similarity_logits(e, protos, scale).value();
    return {out.data().begin(), out.data().end()};
}

double loss(std::span<const double> scores, std::size_t label) {
    const std::size_t labels[1] = {label};
    const Var s = constant(Tensor({1, scores.size()}, std::vector<double>(scores.begin(), scores.end())));
    return cross_entropy(s, labels).value()[0];
}

}  // namespace avp
