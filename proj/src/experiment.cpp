#include "avp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "avp/edge.hpp"
#include "avp/errors.hpp"
#include "avp/ops.hpp"
#include "avp/optim.hpp"
#include "avp/pgm.hpp"
#include "avp/random.hpp"

namespace avp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// First samples of each class averaged into its prototype.
constexpr std::size_t kPrototypeSamples = 100;
// Rows per forward/backward pass; a batch's gradient is accumulated over
// micro-batches before its single update.
constexpr std::size_t kMicroBatch = 8;

}  // namespace

const char* mode_name(Mode mode) { return mode == Mode::adavipro ? "adavipro" : "vp-baseline"; }

Mode parse_mode(const std::string& name) {
    if (name == "adavipro") return Mode::adavipro;
    if (name == "vp-baseline") return Mode::vp_baseline;
    throw ConfigError("unknown mode '" + name + "' (expected adavipro or vp-baseline)");
}

void ExperimentConfig::validate() const {
    if (region_size == 0) throw ConfigError("region_size must be >= 1");
    if (embed_dim == 0) throw ConfigError("embed_dim must be >= 1");
    if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw ConfigError("tau0 must be a positive number");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be a positive number");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(lr_prompt > 0.0) || !(lr_generator > 0.0)) throw ConfigError("learning rates must be > 0");
    if (seed >= (std::uint64_t{1} << 53)) throw ConfigError("seed must be below 2^53");
}

std::string config_json(const ExperimentConfig& c) {
    json j = {{"mode", mode_name(c.mode)},
              {"prompt_width", c.prompt_width},
              {"region_size", c.region_size},
              {"embed_dim", c.embed_dim},
              {"tau0", c.tau0},
              {"gamma", c.gamma},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr_prompt", c.lr_prompt},
              {"lr_generator", c.lr_generator},
              {"seed", c.seed},
              {"dataset_path", c.dataset_path},
              {"output_dir", c.output_dir},
              {"straight_through", c.straight_through},
              {"edge_detection", c.edge_detection}};
    return j.dump(2) + "\n";
}

namespace {

template <typename T>
T field(const json& j, const std::string& key) {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!j.at(key).is_number_unsigned()) throw ConfigError("config field '" + key + "' must be a non-negative integer");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config field '" + key + "': " + e.what());
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "mode") c.mode = parse_mode(field<std::string>(j, key));
        else if (key == "prompt_width") c.prompt_width = field<std::size_t>(j, key);
        else if (key == "region_size") c.region_size = field<std::size_t>(j, key);
        else if (key == "embed_dim") c.embed_dim = field<std::size_t>(j, key);
        else if (key == "tau0") c.tau0 = field<double>(j, key);
        else if (key == "gamma") c.gamma = field<double>(j, key);
        else if (key == "epochs") c.epochs = field<std::size_t>(j, key);
        else if (key == "batch_size") c.batch_size = field<std::size_t>(j, key);
        else if (key == "lr_prompt") c.lr_prompt = field<double>(j, key);
        else if (key == "lr_generator") c.lr_generator = field<double>(j, key);
        else if (key == "seed") c.seed = field<std::uint64_t>(j, key);
        else if (key == "dataset_path") c.dataset_path = field<std::string>(j, key);
        else if (key == "output_dir") c.output_dir = field<std::string>(j, key);
        else if (key == "straight_through") c.straight_through = field<bool>(j, key);
        else if (key == "edge_detection") c.edge_detection = field<bool>(j, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) { return parse_experiment_config(slurp(path)); }

std::string format_metrics_row(const MetricsRow& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.epoch, r.split.c_str(), r.loss,
                  r.accuracy, r.mask_on_rate, r.object_on_rate, r.background_on_rate, r.tau);
    return buf;
}

MetricsRow parse_metrics_row(const std::string& line) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw FormatError("metrics row needs 8 columns: '" + line + "'", 0);
    MetricsRow r;
    r.epoch = std::stoull(cells[0]);
    r.split = cells[1];
    r.loss = std::stod(cells[2]);
    r.accuracy = std::stod(cells[3]);
    r.mask_on_rate = std::stod(cells[4]);
    r.object_on_rate = std::stod(cells[5]);
    r.background_on_rate = std::stod(cells[6]);
    r.tau = std::stod(cells[7]);
    return r;
}

Checkpoint to_checkpoint(const Model& m) {
    Checkpoint ck;
    const ExperimentConfig& c = m.config;
    ck.put_scalar("meta.mode", c.mode == Mode::adavipro ? 0.0 : 1.0);
    ck.put_scalar("meta.prompt_width", static_cast<double>(c.prompt_width));
    ck.put_scalar("meta.region_size", static_cast<double>(c.region_size));
    ck.put_scalar("meta.embed_dim", static_cast<double>(c.embed_dim));
    ck.put_scalar("meta.edge_detection", c.edge_detection ? 1.0 : 0.0);
    ck.put_scalar("meta.straight_through", c.straight_through ? 1.0 : 0.0);
    ck.put_scalar("meta.seed", static_cast<double>(c.seed));
    ck.put_scalar("meta.image_size", static_cast<double>(m.image_size));
    ck.put_scalar("meta.epochs", static_cast<double>(m.epochs_trained));
    ck.put_scalar("meta.tau0", m.schedule.tau0);
    ck.put_scalar("meta.gamma", m.schedule.gamma);
    ck.put_scalar("meta.tau", m.schedule.tau);
    ck.put_scalar("meta.logit_scale", kLogitScale);
    store_encoder(ck, m.encoder);
    ck.put("prototypes", m.prototypes.vectors);
    ck.put_scalar("prototypes.per_class_n", static_cast<double>(m.prototypes.per_class_n));
    ck.put("prompt.template", m.prompt.values.value());
    if (m.generator) {
        ck.put("generator.fc.weight", m.generator->fc_weight.value());
        ck.put("generator.fc.bias", m.generator->fc_bias.value());
        ck.put("generator.fp.weight", m.generator->fp_weight.value());
        ck.put("generator.fp.bias", m.generator->fp_bias.value());
    }
    return ck;
}

namespace {

std::size_t count_field(const Checkpoint& ck, const std::string& name) {
    const double v = ck.get_scalar(name);
    if (!(v >= 0.0) || v != std::floor(v)) throw ContractError("checkpoint entry '" + name + "' is not a count");
    return static_cast<std::size_t>(v);
}

}  // namespace

Model from_checkpoint(const Checkpoint& ck) {
    Model m;
    ExperimentConfig& c = m.config;
    c.mode = ck.get_scalar("meta.mode") == 0.0 ? Mode::adavipro : Mode::vp_baseline;
    c.prompt_width = count_field(ck, "meta.prompt_width");
    c.region_size = count_field(ck, "meta.region_size");
    c.embed_dim = count_field(ck, "meta.embed_dim");
    c.edge_detection = ck.get_scalar("meta.edge_detection") != 0.0;
    c.straight_through = ck.get_scalar("meta.straight_through") != 0.0;
    c.seed = count_field(ck, "meta.seed");
    m.image_size = count_field(ck, "meta.image_size");
    m.epochs_trained = count_field(ck, "meta.epochs");
    c.epochs = m.epochs_trained;
    m.schedule = {ck.get_scalar("meta.tau"), ck.get_scalar("meta.tau0"), ck.get_scalar("meta.gamma")};
    c.tau0 = m.schedule.tau0;
    c.gamma = m.schedule.gamma;
    if (ck.get_scalar("meta.logit_scale") != kLogitScale) throw ContractError("checkpoint uses a different logit scale");

    m.encoder = load_encoder(ck);
    m.prototypes = {ck.get("prototypes"), count_field(ck, "prototypes.per_class_n"), m.encoder.seed};
    if (m.prototypes.vectors.rank() != 2 || m.prototypes.vectors.dim(1) != kEmbeddingDim) {
        throw ContractError("checkpoint prototypes have shape " + shape_str(m.prototypes.vectors.shape()));
    }
    const std::size_t h = m.image_size;
    const Tensor& tmpl = ck.get("prompt.template");
    if (tmpl.shape() != Shape{3, h, h}) {
        throw ContractError("prompt template " + shape_str(tmpl.shape()) + " does not match image size " +
                            std::to_string(h));
    }
    m.prompt = {parameter(tmpl), frame_support(h, h, c.prompt_width), c.prompt_width};

    const bool has_gen = ck.contains("generator.fc.weight");
    if (c.mode == Mode::vp_baseline && has_gen) throw ContractError("vp-baseline checkpoint carries generator weights");
    if (c.mode == Mode::adavipro) {
        if (!has_gen) throw ContractError("adavipro checkpoint lacks generator weights");
        if (h % c.region_size != 0) {
            throw ContractError("checkpoint image size " + std::to_string(h) + " not divisible by region size " +
                                std::to_string(c.region_size));
        }
        const std::size_t d = c.embed_dim;
        MaskGeneratorParams g{parameter(ck.get("generator.fc.weight")), parameter(ck.get("generator.fc.bias")),
                              parameter(ck.get("generator.fp.weight")), parameter(ck.get("generator.fp.bias")), d,
                              c.region_size};
        if (g.fc_weight.shape() != Shape{d, 1, 3, 3} || g.fc_bias.shape() != Shape{d} ||
            g.fp_weight.shape() != Shape{2, d, 1, 1} || g.fp_bias.shape() != Shape{2}) {
            throw ContractError("generator weights do not match embed_dim " + std::to_string(d));
        }
        m.generator = std::move(g);
    }
    return m;
}

namespace {

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> idx) {
    const std::size_t per = t.numel() / t.dim(0);
    Shape s = t.shape();
    s[0] = idx.size();
    Tensor out(s);
    for (std::size_t j = 0; j < idx.size(); ++j)
        std::copy_n(t.data().begin() + idx[j] * per, per, out.data().begin() + j * per);
    return out;
}

// Input of the mask generator for every image of a split.
Tensor generator_input(const Tensor& images, bool edge_detection) {
    Tensor gray = to_grayscale(images);
    return edge_detection ? laplacian_edge_maps(gray) : gray;
}

struct NoiseSpec {
    std::uint64_t seed, epoch, step;
    std::size_t first_sample;
    double tau;
    bool straight_through;
};

struct ChunkOutput {
    Var loss;       // mean cross-entropy over the chunk
    Tensor scores;  // m×K
    Tensor regions;  // m×G_h×G_w hard decisions
};

// With `noise` the mask is the relaxed Gumbel-Softmax sample; without, the
// hard argmax decision.
ChunkOutput forward_chunk(const PromptTemplate& prompt, const MaskGeneratorParams* gen, const FrozenEncoder& encoder,
                          const ClassPrototypes& prototypes, const Tensor& images, const Tensor& edges,
                          std::span<const std::size_t> labels, std::size_t region_size,
                          const std::optional<NoiseSpec>& noise) {
    const std::size_t m = images.dim(0), h = images.dim(2), w = images.dim(3);
    const std::size_t gh = h / region_size, gw = w / region_size;
    ChunkOutput out;
    Var mask;
    if (gen) {
        const Var logits = region_logits(constant(edges), *gen);
        out.regions = hard_decisions(logits.value());
        Var keep;
        if (noise) {
            const Tensor g = gumbel_noise(noise->seed, noise->epoch, noise->step, noise->first_sample, logits.shape());
            keep = gumbel_keep(logits, g, noise->tau, noise->straight_through);
        } else {
            keep = constant(out.regions);
        }
        mask = dilate(keep, region_size);
    } else {
        out.regions = Tensor({m, gh, gw}, 1.0);
        mask = constant(Tensor({m, 1, h, w}, 1.0));
    }
    const Var prompted = apply_prompt(constant(images), prompt, mask);
    const Var scores = similarity_logits(encode(prompted, encoder), prototypes);
    out.scores = scores.value();
    out.loss = cross_entropy(scores, labels);
    return out;
}

MaskGeneratorParams frozen_copy(const MaskGeneratorParams& g) {
    return {constant(g.fc_weight.value()), constant(g.fc_bias.value()), constant(g.fp_weight.value()),
            constant(g.fp_bias.value()), g.embed_dim, g.region_size};
}

PromptTemplate frozen_copy(const PromptTemplate& p) { return {constant(p.values.value()), p.support, p.width}; }

class MetricsAccumulator {
public:
    MetricsAccumulator(std::size_t region_size) : region_size_(region_size) {}

    void add(const ChunkOutput& out, std::span<const std::size_t> rows, const Dataset& data) {
        const std::size_t m = rows.size(), k = out.scores.dim(1);
        const std::size_t gh = out.regions.dim(1), gw = out.regions.dim(2);
        const double* s = out.scores.data().data();
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t pred = static_cast<std::size_t>(std::max_element(s + j * k, s + (j + 1) * k) - (s + j * k));
            correct_ += pred == data.labels[rows[j]] ? 1 : 0;
            Tensor reg({gh, gw});
            std::copy_n(out.regions.data().begin() + j * gh * gw, gh * gw, reg.data().begin());
            for (double v : reg.data()) kept_ += v;
            regions_ += gh * gw;
            masks_.push_back(std::move(reg));
            boxes_.push_back(data.boxes[rows[j]]);
        }
        loss_sum_ += out.loss.value()[0] * static_cast<double>(m);
        n_ += m;
    }

    MetricsRow row(std::size_t epoch, const std::string& split, double tau) const {
        const OverlapStats st = region_overlap_stats(masks_, boxes_, region_size_);
        return {epoch,
                split,
                loss_sum_ / static_cast<double>(n_),
                static_cast<double>(correct_) / static_cast<double>(n_),
                kept_ / static_cast<double>(regions_),
                st.object_on_rate,
                st.background_on_rate,
                tau};
    }

private:
    std::size_t region_size_;
    double loss_sum_ = 0.0;
    std::size_t correct_ = 0;
    std::size_t n_ = 0;
    double kept_ = 0.0;
    std::size_t regions_ = 0;
    std::vector<Tensor> masks_;
    std::vector<Box> boxes_;
};

MetricsRow evaluate_with_edges(const Model& model, const Dataset& data, const Tensor& edges) {
    const PromptTemplate prompt = frozen_copy(model.prompt);
    std::optional<MaskGeneratorParams> gen;
    if (model.generator) gen = frozen_copy(*model.generator);
    MetricsAccumulator acc(model.config.region_size);
    std::vector<std::size_t> rows;
    for (std::size_t first = 0; first < data.size(); first += kMicroBatch) {
        const std::size_t m = std::min(kMicroBatch, data.size() - first);
        rows.resize(m);
        for (std::size_t j = 0; j < m; ++j) rows[j] = first + j;
        std::vector<std::size_t> labels(m);
        for (std::size_t j = 0; j < m; ++j) labels[j] = data.labels[rows[j]];
        const ChunkOutput out = forward_chunk(prompt, gen ? &*gen : nullptr, model.encoder, model.prototypes,
                                              data.gather(rows), gather_rows(edges, rows), labels,
                                              model.config.region_size, std::nullopt);
        acc.add(out, rows, data);
    }
    return acc.row(model.epochs_trained, "test", model.schedule.tau);
}

void check_dataset_fits(const Model& model, const Dataset& data) {
    if (data.image_size() != model.image_size || data.images.dim(3) != model.image_size) {
        throw ContractError("dataset images are " + std::to_string(data.image_size()) + " pixels, model expects " +
                            std::to_string(model.image_size));
    }
    if (data.config.num_classes != model.prototypes.num_classes()) {
        throw ContractError("dataset has " + std::to_string(data.config.num_classes) + " classes, model has " +
                            std::to_string(model.prototypes.num_classes()));
    }
    if (model.generator && data.image_size() % model.config.region_size != 0) {
        throw ContractError("image size " + std::to_string(data.image_size()) + " not divisible by region size " +
                            std::to_string(model.config.region_size));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    CounterRng rng({seed, 0x73687566666c65ULL, epoch});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

}  // namespace

std::vector<Prediction> predict(const Model& model, const Dataset& data, std::size_t first, std::size_t count) {
    check_dataset_fits(model, data);
    if (first + count > data.size()) throw ContractError("predict range exceeds dataset size");
    const PromptTemplate prompt = frozen_copy(model.prompt);
    std::optional<MaskGeneratorParams> gen;
    if (model.generator) gen = frozen_copy(*model.generator);
    std::vector<Prediction> out;
    for (std::size_t start = first; start < first + count; start += kMicroBatch) {
        const std::size_t m = std::min(kMicroBatch, first + count - start);
        std::vector<std::size_t> rows(m), labels(m);
        for (std::size_t j = 0; j < m; ++j) {
            rows[j] = start + j;
            labels[j] = data.labels[rows[j]];
        }
        const Tensor images = data.gather(rows);
        const ChunkOutput c = forward_chunk(prompt, gen ? &*gen : nullptr, model.encoder, model.prototypes, images,
                                            generator_input(images, model.config.edge_detection), labels,
                                            model.config.region_size, std::nullopt);
        const std::size_t k = c.scores.dim(1), gh = c.regions.dim(1), gw = c.regions.dim(2);
        for (std::size_t j = 0; j < m; ++j) {
            Prediction p;
            p.scores.assign(c.scores.data().begin() + j * k, c.scores.data().begin() + (j + 1) * k);
            p.predicted = static_cast<std::size_t>(std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin());
            p.regions = Tensor({gh, gw});
            std::copy_n(c.regions.data().begin() + j * gh * gw, gh * gw, p.regions.data().begin());
            out.push_back(std::move(p));
        }
    }
    return out;
}

MetricsRow evaluate(const Model& model, const Dataset& data) {
    check_dataset_fits(model, data);
    return evaluate_with_edges(model, data, generator_input(data.images, model.config.edge_detection));
}

MetricsRow evaluate(const std::string& checkpoint_path, const std::string& dataset_root, Split split,
                    const std::string& scores_path) {
    const Model model = from_checkpoint(Checkpoint::load(checkpoint_path));
    const Dataset data = load_split(split_dir(dataset_root, split));
    MetricsRow row = evaluate(model, data);
    row.split = split_name(split);
    if (!scores_path.empty()) {
        std::ostringstream ss;
        const auto preds = predict(model, data, 0, data.size());
        for (std::size_t i = 0; i < preds.size(); ++i) {
            ss << i << "," << data.labels[i] << "," << preds[i].predicted;
            char buf[32];
            for (double s : preds[i].scores) {
                std::snprintf(buf, sizeof buf, ",%.17g", s);
                ss << buf;
            }
            ss << "\n";
        }
        write_text(scores_path, ss.str());
    }
    return row;
}

TrainResult train(const ExperimentConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (cfg.output_dir.empty()) throw ConfigError("output_dir is required");
    const Dataset train_set = load_split(split_dir(cfg.dataset_path, Split::train));
    const Dataset test_set = load_split(split_dir(cfg.dataset_path, Split::test));
    const std::size_t h = train_set.image_size();
    if (train_set.images.dim(3) != h || test_set.image_size() != h || test_set.images.dim(3) != h) {
        throw ContractError("train and test images must share one square size");
    }
    if (cfg.mode == Mode::adavipro && h % cfg.region_size != 0) {
        throw ContractError("image size H=" + std::to_string(h) + ", W=" + std::to_string(h) +
                            " is not divisible by region size r=" + std::to_string(cfg.region_size));
    }
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());

    Model model;
    model.config = cfg;
    // Without a generator the region grid only feeds the mask-rate metrics.
    if (cfg.mode == Mode::vp_baseline && h % cfg.region_size != 0) model.config.region_size = h;
    model.image_size = h;
    model.encoder = make_frozen_encoder(cfg.seed);
    {
        const std::size_t k = train_set.config.num_classes;
        std::vector<std::size_t> per_class(k, 0);
        for (std::size_t l : train_set.labels) ++per_class[l];
        const std::size_t n = std::min(kPrototypeSamples, *std::min_element(per_class.begin(), per_class.end()));
        model.prototypes = build_prototypes(train_set.images, train_set.labels, k, model.encoder, std::max<std::size_t>(n, 1));
    }
    model.prompt = make_prompt_template(h, h, cfg.prompt_width, cfg.seed);
    if (cfg.mode == Mode::adavipro) model.generator = make_mask_generator(cfg.embed_dim, cfg.region_size, cfg.seed);
    model.schedule = GumbelSchedule::start(cfg.tau0, cfg.gamma);

    const bool use_generator = model.generator && !hooks.force_keep_all;
    std::vector<ParamGroup> groups{{"prompt", {model.prompt.values}, cfg.lr_prompt}};
    if (use_generator) groups.push_back({"generator", model.generator->trainable(), cfg.lr_generator});
    SgdState sgd(std::move(groups), cfg.epochs);

    const Tensor train_edges = generator_input(train_set.images, cfg.edge_detection);
    const Tensor test_edges = generator_input(test_set.images, cfg.edge_detection);
    const std::size_t n = train_set.size();
    const std::size_t r = model.config.region_size;

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        sgd.set_epoch(epoch);
        const auto order = epoch_order(n, cfg.seed, epoch);
        MetricsAccumulator acc(r);
        std::size_t step = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            for (std::size_t off = 0; off < b; off += kMicroBatch) {
                const std::size_t m = std::min(kMicroBatch, b - off);
                const std::span<const std::size_t> rows(order.data() + start + off, m);
                std::vector<std::size_t> labels(m);
                for (std::size_t j = 0; j < m; ++j) labels[j] = train_set.labels[rows[j]];
                const NoiseSpec noise{cfg.seed, epoch, step, off, model.schedule.tau, cfg.straight_through};
                ChunkOutput out = forward_chunk(model.prompt, use_generator ? &*model.generator : nullptr,
                                                model.encoder, model.prototypes, train_set.gather(rows),
                                                gather_rows(train_edges, rows), labels, r, noise);
                backward(scale(out.loss, static_cast<double>(m) / static_cast<double>(b)));
                acc.add(out, rows, train_set);
            }
            sgd_step(sgd);
        }
        result.rows.push_back(acc.row(epoch, "train", model.schedule.tau));
        model.epochs_trained = epoch;
        Model view = model;
        if (!use_generator) view.generator.reset();
        MetricsRow test_row = evaluate_with_edges(view, test_set, test_edges);
        test_row.epoch = epoch;
        result.rows.push_back(test_row);
        model.schedule = anneal(model.schedule);
        model.epochs_trained = epoch + 1;
    }

    const fs::path out(cfg.output_dir);
    write_text(out / "config.json", config_json(cfg));
    std::string csv = std::string(kMetricsHeader) + "\n";
    for (const auto& row : result.rows) csv += format_metrics_row(row) + "\n";
    result.metrics_path = (out / "metrics.csv").string();
    write_text(result.metrics_path, csv);
    result.checkpoint_path = (out / "checkpoint.avpc").string();
    to_checkpoint(model).save(result.checkpoint_path);

    {
        Model view = model;
        if (!use_generator) view.generator.reset();
        result.final_test = evaluate_with_edges(view, test_set, test_edges);
    }
    write_text(out / "final.csv", std::string(kMetricsHeader) + "\n" + format_metrics_row(result.final_test) + "\n");
    return result;
}

AblationAxis parse_axis(const std::string& name) {
    if (name == "edge_detection") return AblationAxis::edge_detection;
    if (name == "gamma") return AblationAxis::gamma;
    if (name == "region_size") return AblationAxis::region_size;
    if (name == "embed_dim") return AblationAxis::embed_dim;
    if (name == "prompt_width") return AblationAxis::prompt_width;
    throw ConfigError("unknown ablation axis '" + name + "'");
}

const char* axis_name(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::edge_detection: return "edge_detection";
        case AblationAxis::gamma: return "gamma";
        case AblationAxis::region_size: return "region_size";
        case AblationAxis::embed_dim: return "embed_dim";
        case AblationAxis::prompt_width: return "prompt_width";
    }
    return "";
}

namespace {

std::size_t parse_count(const std::string& v) {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw ConfigError("'" + v + "' is not an integer");
    return static_cast<std::size_t>(x);
}

ExperimentConfig with_axis_value(ExperimentConfig c, AblationAxis axis, const std::string& v) {
    try {
        switch (axis) {
            case AblationAxis::edge_detection:
                if (v == "on" || v == "true" || v == "1") c.edge_detection = true;
                else if (v == "off" || v == "false" || v == "0") c.edge_detection = false;
                else throw ConfigError("edge_detection value must be on/off, got '" + v + "'");
                break;
            case AblationAxis::gamma: {
                std::size_t pos = 0;
                c.gamma = std::stod(v, &pos);
                if (pos != v.size()) throw ConfigError("'" + v + "' is not a number");
                break;
            }
            case AblationAxis::region_size: c.region_size = parse_count(v); break;
            case AblationAxis::embed_dim: c.embed_dim = parse_count(v); break;
            case AblationAxis::prompt_width: c.prompt_width = parse_count(v); break;
        }
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ContractError*>(&e)) throw;
        throw ConfigError("invalid value '" + v + "' for axis " + axis_name(axis));
    }
    c.validate();
    return c;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<AblationRow> ablate(const ExperimentConfig& base, AblationAxis axis, const std::vector<std::string>& values,
                                const std::string& out_dir) {
    if (values.empty()) throw ConfigError("ablation needs at least one value");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

    std::vector<AblationRow> rows;
    std::string csv = std::string(kAblationHeader) + "\n";
    for (const std::string& v : values) {
        AblationRow row;
        row.value = v;
        try {
            ExperimentConfig c = with_axis_value(base, axis, v);
            c.output_dir = (fs::path(out_dir) / (std::string(axis_name(axis)) + "_" + v)).string();
            const std::size_t h = load_split(split_dir(c.dataset_path, Split::test)).image_size();
            row.prompt_params = count_prompt_params(h, h, c.prompt_width);
            row.generator_params = c.mode == Mode::adavipro ? count_generator_params(c.embed_dim) : 0;
            row.result = train(c).final_test;
        } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            row.status = "error: " + msg;
            row.result.reset();
        }
        csv += std::string(axis_name(axis)) + "," + v + ",";
        if (row.result) {
            csv += fmt(row.result->accuracy) + "," + fmt(row.result->mask_on_rate) + "," +
                   fmt(row.result->object_on_rate) + "," + fmt(row.result->background_on_rate) + ",";
        } else {
            csv += ",,,,";
        }
        csv += std::to_string(row.prompt_params) + "," + std::to_string(row.generator_params) + "," + row.status + "\n";
        rows.push_back(std::move(row));
    }
    write_text(fs::path(out_dir) / "ablation.csv", csv);
    return rows;
}

std::vector<std::string> export_masks(const std::string& checkpoint_path, const std::string& dataset_root,
                                      std::size_t count, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory '" + out_dir + "'");
    {
        const fs::path probe = fs::path(out_dir) / ".write_probe";
        std::ofstream p(probe);
        if (!p) throw IoError("output directory '" + out_dir + "' is not writable");
        p.close();
        fs::remove(probe, ec);
    }
    const Model model = from_checkpoint(Checkpoint::load(checkpoint_path));
    const Dataset data = load_split(split_dir(dataset_root, Split::test));
    if (count > data.size()) {
        throw ContractError("requested " + std::to_string(count) + " exports from a split of " +
                            std::to_string(data.size()));
    }
    std::vector<std::string> written;
    if (count == 0) return written;
    const auto preds = predict(model, data, 0, count);
    const std::size_t h = model.image_size;
    const std::size_t r = model.generator ? model.config.region_size : h;
    const PromptTemplate prompt = frozen_copy(model.prompt);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string stem = "sample" + std::to_string(i) + "_label" + std::to_string(data.labels[i]);
        const fs::path base(out_dir);
        const Tensor image = data.image(i);
        const Tensor pixel_mask = dilate(preds[i].regions, r);
        const Tensor prompted = apply_prompt(image, prompt, pixel_mask);
        const Tensor edge = generator_input(image.reshaped({1, 3, h, h}), true).reshaped({1, h, h});

        auto emit = [&](const std::string& name, const GrayImage& img) {
            const std::string path = (base / (stem + "_" + name + ".pgm")).string();
            write_pgm(path, img);
            written.push_back(path);
        };
        emit("mask", to_gray_image(pixel_mask, 0.0, 1.0));
        emit("edge", to_gray_image(edge, -1.0, 1.0));
        for (std::size_t c = 0; c < 3; ++c) {
            Tensor raw_plane({h, h}), prompted_plane({h, h});
            std::copy_n(image.data().begin() + c * h * h, h * h, raw_plane.data().begin());
            std::copy_n(prompted.data().begin() + c * h * h, h * h, prompted_plane.data().begin());
            emit("raw_c" + std::to_string(c), to_gray_image(raw_plane, 0.0, 1.0));
            emit("prompted_c" + std::to_string(c), to_gray_image(prompted_plane, 0.0, 1.0));
        }
    }
    return written;
}

}  // namespace avp
