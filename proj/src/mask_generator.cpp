#include "avp/mask_generator.hpp"

#include <cmath>
#include <string>

#include "avp/errors.hpp"
#include "avp/ops.hpp"
#include "avp/random.hpp"
#include "im2col.hpp"

namespace avp {

GumbelSchedule GumbelSchedule::start(double tau0, double gamma) {
    if (!(tau0 > 0.0)) throw ContractError("initial temperature must be > 0");
    if (!(gamma > 0.0)) throw ContractError("temperature decay must be > 0");
    return {tau0, tau0, gamma};
}

GumbelSchedule anneal(const GumbelSchedule& schedule) {
    GumbelSchedule next = schedule;
    next.tau = schedule.tau * schedule.gamma;
    return next;
}

MaskGeneratorParams make_mask_generator(std::size_t embed_dim, std::size_t region_size, std::uint64_t seed) {
    if (embed_dim == 0) throw ContractError("mask generator embedding dim must be >= 1");
    if (region_size == 0) throw ContractError("region size must be >= 1");
    CounterRng rng({seed, 0x6d61736bULL});
    const std::size_t d = embed_dim;
    Tensor fc({d, 1, 3, 3});
    for (double& v : fc.data()) v = rng.normal(0.0, std::sqrt(2.0 / 9.0));
    Tensor fp({2, d, 1, 1});
    for (double& v : fp.data()) v = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    return {parameter(std::move(fc)), parameter(Tensor({d}, 0.0)), parameter(std::move(fp)),
            parameter(Tensor({2}, 0.0)), embed_dim, region_size};
}

std::size_t count_generator_params(std::size_t embed_dim) { return 9 * embed_dim + embed_dim + 2 * embed_dim + 2; }

Var region_mean(const Var& pixels, std::size_t r) {
    const Shape& s = pixels.shape();
    if (s.size() != 4) throw ContractError("region_mean expects N×C×H×W, got " + shape_str(s));
    if (r == 0 || s[2] % r != 0 || s[3] % r != 0) {
        throw ContractError("image size H=" + std::to_string(s[2]) + ", W=" + std::to_string(s[3]) +
                            " is not divisible by region size r=" + std::to_string(r));
    }
    const std::size_t n = s[0], c = s[1], h = s[2], w = s[3], gh = h / r, gw = w / r;
    const double inv = 1.0 / static_cast<double>(r * r);
    Tensor out({n, gh, gw, c});
    auto x = pixels.value().data();
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t k = 0; k < c; ++k) {
            const double* plane = x.data() + (b * c + k) * h * w;
            for (std::size_t gy = 0; gy < gh; ++gy) {
                for (std::size_t gx = 0; gx < gw; ++gx) {
                    double acc = 0.0;
                    for (std::size_t y = gy * r; y < (gy + 1) * r; ++y)
                        for (std::size_t xx = gx * r; xx < (gx + 1) * r; ++xx) acc += plane[y * w + xx];
                    out[((b * gh + gy) * gw + gx) * c + k] = acc * inv;
                }
            }
        }
    }
    return make_result(std::move(out), {pixels}, "region_mean", [n, c, h, w, gh, gw, r, inv](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t k = 0; k < c; ++k) {
                double* plane = g.data() + (b * c + k) * h * w;
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        plane[y * w + xx] += self.grad[((b * gh + y / r) * gw + xx / r) * c + k] * inv;
            }
    });
}

namespace {

// region_mean(relu(conv3x3(edges))) for constant edges. The hidden activations
// are recomputed per sample in the backward pass instead of being stored.
Var pooled_features(const Tensor& edges, const Var& weight, const Var& bias, std::size_t r) {
    using namespace detail;
    check_conv2d_shapes(edges.shape(), weight.shape(), bias.shape(), {1, 1});
    const ConvGeometry geom(edges.shape(), weight.shape(), {1, 1});
    const std::size_t n = geom.n, d = geom.cout, h = geom.ho, w = geom.wo, gh = h / r, gw = w / r;
    const double inv = 1.0 / static_cast<double>(r * r);

    const auto hidden = [geom, edges, weight, bias](std::size_t b, std::vector<double>& cols, RowMatrix& act) {
        cols.resize(geom.taps() * geom.out_pixels());
        im2col(geom, edges.data().data() + b * geom.cin * geom.h * geom.w, cols.data());
        act.noalias() = ConstMatrixMap(weight.value().data().data(), geom.cout, geom.taps()) *
                        ConstMatrixMap(cols.data(), geom.taps(), geom.out_pixels());
        for (std::size_t o = 0; o < geom.cout; ++o) act.row(o).array() += bias.value()[o];
        act = act.cwiseMax(0.0);
    };

    Tensor out({n, gh, gw, d});
    std::vector<double> cols;
    RowMatrix act(d, h * w);
    for (std::size_t b = 0; b < n; ++b) {
        hidden(b, cols, act);
        double* dst = out.data().data() + b * gh * gw * d;
        for (std::size_t k = 0; k < d; ++k) {
            const double* row = act.data() + k * h * w;
            for (std::size_t y = 0; y < h; ++y, row += w)
                for (std::size_t gx = 0; gx < gw; ++gx) {
                    double acc = 0.0;
                    for (std::size_t x = gx * r; x < (gx + 1) * r; ++x) acc += row[x];
                    dst[((y / r) * gw + gx) * d + k] += acc * inv;
                }
        }
    }

    return make_result(std::move(out), {weight, bias}, "pooled_features", [=](Node& self) {
        Node& wn = *self.inputs[0];
        Node& bn = *self.inputs[1];
        std::vector<double> cols;
        RowMatrix act(d, h * w);
        for (std::size_t b = 0; b < n; ++b) {
            hidden(b, cols, act);
            const double* up = self.grad.data().data() + b * gh * gw * d;
            for (std::size_t k = 0; k < d; ++k) {
                double* row = act.data() + k * h * w;
                for (std::size_t y = 0; y < h; ++y, row += w)
                    for (std::size_t gx = 0; gx < gw; ++gx) {
                        const double g = up[((y / r) * gw + gx) * d + k] * inv;
                        for (std::size_t x = gx * r; x < (gx + 1) * r; ++x) row[x] = row[x] > 0.0 ? g : 0.0;
                    }
            }
            if (wn.requires_grad) {
                MatrixMap(wn.grad_buffer().data().data(), d, geom.taps()).noalias() +=
                    act * ConstMatrixMap(cols.data(), geom.taps(), h * w).transpose();
            }
            if (bn.requires_grad) {
                auto gb = bn.grad_buffer().data();
                for (std::size_t k = 0; k < d; ++k) gb[k] += act.row(k).sum();
            }
        }
    });
}

}  // namespace

Var region_logits(const Var& edges, const MaskGeneratorParams& p) {
    const Shape& s = edges.shape();
    if (s.size() != 4 || s[1] != 1) throw ContractError("region_logits expects N×1×H×W edges, got " + shape_str(s));
    const std::size_t r = p.region_size;
    if (r == 0 || s[2] % r != 0 || s[3] % r != 0) {
        throw ContractError("edge map H=" + std::to_string(s[2]) + ", W=" + std::to_string(s[3]) +
                            " is not divisible by region size r=" + std::to_string(r));
    }
    // The 1×1 policy conv commutes with the region mean, so it runs on pooled features.
    const Var pooled = edges.requires_grad() ? region_mean(relu(conv2d(edges, p.fc_weight, p.fc_bias, {1, 1})), r)
                                             : pooled_features(edges.value(), p.fc_weight, p.fc_bias, r);
    const std::size_t gh = s[2] / r, gw = s[3] / r, d = p.embed_dim;
    const Var flat = reshape(pooled, {s[0] * gh * gw, d});
    const Var logits = linear(flat, reshape(p.fp_weight, {2, d}), p.fp_bias);
    return reshape(logits, {s[0], gh, gw, 2});
}

Tensor region_logits(const EdgeMap& edge, const MaskGeneratorParams& p) {
    const Var e = constant(edge.values.reshaped({1, 1, edge.height, edge.width}));
    const Tensor out = region_logits(e, p).value();
    return out.reshaped({out.dim(1), out.dim(2), 2});
}

std::array<double, 2> gumbel_softmax_sample(std::array<double, 2> logits, const GumbelSchedule& schedule,
                                            std::array<double, 2> noise) {
    const double tau = schedule.tau;
    if (!(tau > 0.0)) throw ContractError("Gumbel-Softmax temperature must be > 0");
    const double a = (logits[0] + noise[0]) / tau;
    const double b = (logits[1] + noise[1]) / tau;
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    return {ea / (ea + eb), eb / (ea + eb)};
}

int inference_decision(std::array<double, 2> logits) {
    if (!std::isfinite(logits[0]) || !std::isfinite(logits[1])) {
        throw NumericError("non-finite region logits");
    }
    return logits[1] > logits[0] ? 1 : 0;
}

Tensor gumbel_noise(std::uint64_t seed, std::uint64_t epoch, std::uint64_t step, std::size_t first_sample,
                    const Shape& logits_shape) {
    if (logits_shape.size() != 4 || logits_shape[3] != 2) {
        throw ContractError("gumbel_noise expects N×G_h×G_w×2, got " + shape_str(logits_shape));
    }
    Tensor noise(logits_shape);
    const std::size_t per_sample = logits_shape[1] * logits_shape[2];
    const std::size_t regions = logits_shape[0] * per_sample;
    for (std::size_t i = 0; i < regions; ++i) {
        CounterRng rng({seed, 0x67756d62656cULL, epoch, step, first_sample * per_sample + i});
        noise[2 * i] = gumbel_from_uniform(rng.uniform());
        noise[2 * i + 1] = gumbel_from_uniform(rng.uniform());
    }
    return noise;
}

Var gumbel_keep(const Var& logits, const Tensor& noise, double tau, bool straight_through) {
    if (!(tau > 0.0)) throw ContractError("Gumbel-Softmax temperature must be > 0");
    require_same_shape(logits.value(), noise, "gumbel_keep");
    const Shape& s = logits.shape();
    if (s.back() != 2) throw ContractError("gumbel_keep expects a trailing decision axis of 2");
    Shape out_shape(s.begin(), s.end() - 1);
    Tensor soft(out_shape);
    Tensor out(out_shape);
    auto l = logits.value().data();
    for (std::size_t i = 0; i < soft.numel(); ++i) {
        const auto p = gumbel_softmax_sample({l[2 * i], l[2 * i + 1]}, {tau, tau, 1.0}, {noise[2 * i], noise[2 * i + 1]});
        soft[i] = p[1];
        out[i] = straight_through ? (l[2 * i + 1] + noise[2 * i + 1] > l[2 * i] + noise[2 * i] ? 1.0 : 0.0) : p[1];
    }
    return make_result(std::move(out), {logits}, "gumbel_keep", [soft = std::move(soft), tau](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        for (std::size_t i = 0; i < soft.numel(); ++i) {
            // d keep / d ℓ₁ = keep·(1 − keep)/τ = −d keep / d ℓ₀
            const double d = self.grad[i] * soft[i] * (1.0 - soft[i]) / tau;
            g[2 * i] -= d;
            g[2 * i + 1] += d;
        }
    });
}

Tensor hard_decisions(const Tensor& logits) {
    const Shape& s = logits.shape();
    if (s.empty() || s.back() != 2) throw ContractError("hard_decisions expects a trailing axis of 2, got " + shape_str(s));
    Shape out_shape(s.begin(), s.end() - 1);
    Tensor out(out_shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = inference_decision({logits[2 * i], logits[2 * i + 1]});
    return out;
}

RegionDecisionMap decide_regions(const Tensor& logits, const GumbelSchedule& schedule) {
    if (logits.rank() != 3 || logits.dim(2) != 2) {
        throw ContractError("decide_regions expects G_h×G_w×2 logits, got " + shape_str(logits.shape()));
    }
    RegionDecisionMap map{Tensor({logits.dim(0), logits.dim(1)}), hard_decisions(logits), logits.dim(0),
                          logits.dim(1)};
    for (std::size_t i = 0; i < map.soft.numel(); ++i) {
        map.soft[i] = gumbel_softmax_sample({logits[2 * i], logits[2 * i + 1]}, schedule, {0.0, 0.0})[1];
    }
    return map;
}

Var dilate(const Var& regions, std::size_t r) {
    const Shape& s = regions.shape();
    if (s.size() != 3) throw ContractError("dilate expects N×G_h×G_w, got " + shape_str(s));
    if (r == 0) throw ContractError("region size must be >= 1");
    const std::size_t n = s[0], gh = s[1], gw = s[2], h = gh * r, w = gw * r;
    Tensor out({n, 1, h, w});
    auto src = regions.value().data();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out[(b * h + y) * w + x] = src[(b * gh + y / r) * gw + x / r];
    return make_result(std::move(out), {regions}, "dilate", [n, gh, gw, h, w, r](Node& self) {
        auto g = self.inputs[0]->grad_buffer().data();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) g[(b * gh + y / r) * gw + x / r] += self.grad[(b * h + y) * w + x];
    });
}

Tensor dilate(const Tensor& regions, std::size_t r) {
    if (regions.rank() != 2) throw ContractError("dilate expects G_h×G_w, got " + shape_str(regions.shape()));
    const Tensor out = dilate(constant(regions.reshaped({1, regions.dim(0), regions.dim(1)})), r).value();
    return out.reshaped({1, out.dim(2), out.dim(3)});
}

}  // namespace avp
