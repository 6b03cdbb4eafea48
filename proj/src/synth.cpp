#include "avp/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "avp/errors.hpp"
#include "avp/random.hpp"
#include "avp/tensor_io.hpp"

namespace avp {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
    if (image_size < 8) throw ConfigError("image_size must be >= 8");
    if (num_classes < 1 || num_classes > 64) throw ConfigError("num_classes must be in [1, 64]");
    if (glyph_min < 4 || glyph_min > glyph_max) throw ConfigError("glyph size range must satisfy 4 <= min <= max");
    if (glyph_max > image_size) {
        throw ConfigError("glyph_max " + std::to_string(glyph_max) + " exceeds image_size " +
                          std::to_string(image_size));
    }
    if (train_samples == 0 || test_samples == 0) throw ConfigError("splits must be non-empty");
    if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.5)) {
        throw ConfigError("noise_amplitude must lie in [0, 0.5]");
    }
    if (seed >= (std::uint64_t{1} << 53)) throw ConfigError("seed must be below 2^53");
}

const char* split_name(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

namespace {

constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}, {0, 0, 0},
}};

}  // namespace

std::size_t glyph_shape(std::size_t label) { return label % kGlyphShapes; }

std::array<double, 3> glyph_color(std::size_t label) { return kPalette[(label + label / kGlyphShapes) % kPalette.size()]; }

std::vector<std::uint8_t> glyph_support(std::size_t label, std::size_t size) {
    const double s = static_cast<double>(size);
    const double c = (s - 1.0) / 2.0;
    std::vector<std::uint8_t> m(size * size, 0);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y) - c;
            const double dx = static_cast<double>(x) - c;
            const double r2 = dx * dx + dy * dy;
            const double edge = static_cast<double>(std::min({x, y, size - 1 - x, size - 1 - y}));
            bool on = false;
            switch (glyph_shape(label)) {
                case 0:  // filled square
                    on = true;
                    break;
                case 1:  // disc
                    on = r2 <= (s / 2.0) * (s / 2.0);
                    break;
                case 2:  // upward triangle
                    on = std::abs(dx) <= (static_cast<double>(y) + 1.0) / 2.0;
                    break;
                case 3:  // plus
                    on = std::abs(dx) <= s / 6.0 || std::abs(dy) <= s / 6.0;
                    break;
                case 4: {  // ring
                    const double outer = s / 2.0, inner = s / 2.0 - s / 5.0;
                    on = r2 <= outer * outer && r2 >= inner * inner;
                    break;
                }
                case 5:  // diamond
                    on = std::abs(dx) + std::abs(dy) <= s / 2.0;
                    break;
                case 6:  // diagonal cross
                    on = std::abs(dx - dy) <= s / 8.0 || std::abs(dx + dy) <= s / 8.0;
                    break;
                default:  // hollow square
                    on = edge < s / 5.0;
                    break;
            }
            m[y * size + x] = on ? 1 : 0;
        }
    }
    return m;
}

SynthSample gen_sample(const SynthConfig& cfg, Split split, std::size_t index) {
    const std::size_t h = cfg.image_size;
    // Both splits draw from one stream; test samples sit after the training range.
    const std::size_t stream_index = split == Split::train ? index : cfg.train_samples + index;
    CounterRng rng({cfg.seed, 0x73796e7468ULL, stream_index});
    SynthSample out;
    out.label = index % cfg.num_classes;
    const std::size_t size = cfg.glyph_min + rng.below(cfg.glyph_max - cfg.glyph_min + 1);
    out.box = {rng.below(h - size + 1), rng.below(h - size + 1), size, size};

    // Background: two random plane waves per channel plus pixel noise, in
    // 0.5 ± noise_amplitude.
    out.image = Tensor({3, h, h});
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double fy[2], fx[2], phase[2];
        for (int k = 0; k < 2; ++k) {
            const double freq = rng.uniform(0.5, 3.0) * two_pi / static_cast<double>(h);
            const double angle = rng.uniform(0.0, two_pi);
            fy[k] = freq * std::sin(angle);
            fx[k] = freq * std::cos(angle);
            phase[k] = rng.uniform(0.0, two_pi);
        }
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < h; ++x) {
                const double yy = static_cast<double>(y), xx = static_cast<double>(x);
                const double field = 0.5 * std::sin(fy[0] * yy + fx[0] * xx + phase[0]) +
                                     0.25 * std::sin(fy[1] * yy + fx[1] * xx + phase[1]) +
                                     0.25 * rng.uniform(-1.0, 1.0);
                out.image[(ch * h + y) * h + x] = kBackgroundLevel + cfg.noise_amplitude * field;
            }
        }
    }

    const auto support = glyph_support(out.label, size);
    const auto color = glyph_color(out.label);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            if (support[y * size + x])
                for (std::size_t ch = 0; ch < 3; ++ch)
                    out.image[(ch * h + out.box.top + y) * h + out.box.left + x] = color[ch];
    return out;
}

std::vector<SynthSample> gen_dataset(const SynthConfig& cfg, Split split) {
    cfg.validate();
    const std::size_t n = split == Split::train ? cfg.train_samples : cfg.test_samples;
    std::vector<SynthSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(gen_sample(cfg, split, i));
    return out;
}

Tensor Dataset::image(std::size_t i) const {
    const std::size_t per = images.numel() / size();
    std::vector<double> data(images.data().begin() + i * per, images.data().begin() + (i + 1) * per);
    return Tensor({images.dim(1), images.dim(2), images.dim(3)}, std::move(data));
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
    const std::size_t per = images.numel() / size();
    Tensor out({indices.size(), images.dim(1), images.dim(2), images.dim(3)});
    for (std::size_t j = 0; j < indices.size(); ++j)
        std::copy_n(images.data().begin() + indices[j] * per, per, out.data().begin() + j * per);
    return out;
}

Dataset pack(std::span<const SynthSample> samples, const SynthConfig& config) {
    if (samples.empty()) throw DataError("cannot pack an empty sample list");
    const Shape& s = samples[0].image.shape();
    const std::size_t per = samples[0].image.numel();
    Dataset d{Tensor({samples.size(), s[0], s[1], s[2]}), {}, {}, config};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require_same_shape(samples[i].image, samples[0].image, "pack");
        std::copy_n(samples[i].image.data().begin(), per, d.images.data().begin() + i * per);
        d.labels.push_back(samples[i].label);
        d.boxes.push_back(samples[i].box);
    }
    return d;
}

std::string synth_config_json(const SynthConfig& c) {
    json j = {{"image_size", c.image_size},       {"num_classes", c.num_classes},
              {"glyph_min", c.glyph_min},         {"glyph_max", c.glyph_max},
              {"train_samples", c.train_samples}, {"test_samples", c.test_samples},
              {"noise_amplitude", c.noise_amplitude}, {"seed", c.seed}};
    return j.dump(2) + "\n";
}

namespace {

template <typename T>
T read_field(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config field '" + key + "': " + e.what());
    }
}

json parse_object(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
}

}  // namespace

SynthConfig parse_synth_config(const std::string& text) {
    const json j = parse_object(text);
    SynthConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "image_size") c.image_size = read_field<std::size_t>(j, key);
        else if (key == "num_classes") c.num_classes = read_field<std::size_t>(j, key);
        else if (key == "glyph_min") c.glyph_min = read_field<std::size_t>(j, key);
        else if (key == "glyph_max") c.glyph_max = read_field<std::size_t>(j, key);
        else if (key == "train_samples") c.train_samples = read_field<std::size_t>(j, key);
        else if (key == "test_samples") c.test_samples = read_field<std::size_t>(j, key);
        else if (key == "noise_amplitude") c.noise_amplitude = read_field<double>(j, key);
        else if (key == "seed") c.seed = read_field<std::uint64_t>(j, key);
        else throw ConfigError("unknown dataset config key '" + key + "'");
    }
    c.validate();
    return c;
}

std::string split_dir(const std::string& root, Split split) { return (fs::path(root) / split_name(split)).string(); }

void save_split(const Dataset& d, Split split, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    const fs::path p(dir);
    write_tensor(d.images, (p / "images.atsr").string());
    Tensor labels({d.size()});
    Tensor boxes({d.size(), 4});
    for (std::size_t i = 0; i < d.size(); ++i) {
        labels[i] = static_cast<double>(d.labels[i]);
        const Box& b = d.boxes[i];
        boxes[4 * i] = static_cast<double>(b.top);
        boxes[4 * i + 1] = static_cast<double>(b.left);
        boxes[4 * i + 2] = static_cast<double>(b.height);
        boxes[4 * i + 3] = static_cast<double>(b.width);
    }
    write_tensor(labels, (p / "labels.atsr").string());
    write_tensor(boxes, (p / "boxes.atsr").string());
    json meta = json::parse(synth_config_json(d.config));
    meta["split"] = split_name(split);
    std::ofstream out(p / "meta.json");
    if (!out) throw IoError("cannot write '" + (p / "meta.json").string() + "'");
    out << meta.dump(2) << "\n";
}

Dataset load_split(const std::string& dir) {
    const fs::path p(dir);
    if (!fs::is_directory(p)) throw IoError("dataset directory '" + dir + "' does not exist");
    std::ifstream meta_in(p / "meta.json");
    if (!meta_in) throw IoError("cannot read '" + (p / "meta.json").string() + "'");
    std::stringstream ss;
    ss << meta_in.rdbuf();
    json meta = parse_object(ss.str());
    meta.erase("split");

    Dataset d;
    d.config = parse_synth_config(meta.dump());
    d.images = read_tensor((p / "images.atsr").string());
    const Tensor labels = read_tensor((p / "labels.atsr").string());
    const Tensor boxes = read_tensor((p / "boxes.atsr").string());
    if (d.images.rank() != 4 || d.images.dim(1) != 3) {
        throw DataError("images tensor must be N×3×H×W, got " + shape_str(d.images.shape()));
    }
    const std::size_t n = d.images.dim(0);
    if (labels.shape() != Shape{n} || boxes.shape() != Shape{n, 4}) {
        throw DataError("labels " + shape_str(labels.shape()) + " / boxes " + shape_str(boxes.shape()) +
                        " do not match " + std::to_string(n) + " images");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double l = labels[i];
        if (l < 0 || l != std::floor(l) || l >= static_cast<double>(d.config.num_classes)) {
            throw DataError("invalid label " + std::to_string(l) + " at sample " + std::to_string(i));
        }
        d.labels.push_back(static_cast<std::size_t>(l));
        d.boxes.push_back({static_cast<std::size_t>(boxes[4 * i]), static_cast<std::size_t>(boxes[4 * i + 1]),
                           static_cast<std::size_t>(boxes[4 * i + 2]), static_cast<std::size_t>(boxes[4 * i + 3])});
    }
    return d;
}

void write_dataset(const SynthConfig& config, const std::string& root) {
    config.validate();
    for (Split split : {Split::train, Split::test}) {
        const auto samples = gen_dataset(config, split);
        save_split(pack(samples, config), split, split_dir(root, split));
    }
}

OverlapStats region_overlap_stats(std::span<const Tensor> masks, std::span<const Box> boxes, std::size_t r) {
    if (masks.size() != boxes.size()) {
        throw ContractError("region_overlap_stats: " + std::to_string(masks.size()) + " masks vs " +
                            std::to_string(boxes.size()) + " boxes");
    }
    double obj_sum = 0.0, bg_sum = 0.0;
    std::size_t obj_n = 0, bg_n = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const Tensor& m = masks[i];
        if (m.rank() != 2) throw ContractError("region mask must be G_h×G_w, got " + shape_str(m.shape()));
        const Box& b = boxes[i];
        for (std::size_t gy = 0; gy < m.dim(0); ++gy) {
            for (std::size_t gx = 0; gx < m.dim(1); ++gx) {
                const bool hits_rows = gy * r < b.top + b.height && b.top < (gy + 1) * r;
                const bool hits_cols = gx * r < b.left + b.width && b.left < (gx + 1) * r;
                const double v = m[gy * m.dim(1) + gx];
                if (hits_rows && hits_cols) {
                    obj_sum += v;
                    ++obj_n;
                } else {
                    bg_sum += v;
                    ++bg_n;
                }
            }
        }
    }
    return {obj_n ? obj_sum / static_cast<double>(obj_n) : 0.0, bg_n ? bg_sum / static_cast<double>(bg_n) : 0.0};
}

}  // namespace avp
