#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

struct SynthConfig {
    std::size_t image_size = 64;
    std::size_t num_classes = 8;
    std::size_t glyph_min = 12;
    std::size_t glyph_max = 28;
    std::size_t train_samples = 2000;
    std::size_t test_samples = 500;
    double noise_amplitude = 0.2;
    std::uint64_t seed = 0;

    // Throws ConfigError on impossible geometry or empty splits.
    void validate() const;
};

enum class Split { train, test };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct Box {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    friend bool operator==(const Box&, const Box&) = default;
};

struct SynthSample {
    Tensor image;  // 3×H×W in [0, 1]
    std::size_t label = 0;
    Box box;
};

// Value every background pixel fluctuates around.
inline constexpr double kBackgroundLevel = 0.5;
inline constexpr std::size_t kGlyphShapes = 8;

// Class signature: shape index and RGB colour.
std::size_t glyph_shape(std::size_t label);
std::array<double, 3> glyph_color(std::size_t label);

// size×size occupancy of a class glyph; every shape touches all four sides.
std::vector<std::uint8_t> glyph_support(std::size_t label, std::size_t size);

// Deterministic for (config, split). Both splits index one stream keyed by
// seed: train uses [0, N_train), test [N_train, N_train + N_test). Labels
// cycle through the classes.
std::vector<SynthSample> gen_dataset(const SynthConfig& config, Split split);
SynthSample gen_sample(const SynthConfig& config, Split split, std::size_t index);

// Packed split as stored on disk.
struct Dataset {
    Tensor images;  // N×3×H×W
    std::vector<std::size_t> labels;
    std::vector<Box> boxes;
    SynthConfig config;

    std::size_t size() const { return labels.size(); }
    std::size_t image_size() const { return images.dim(2); }
    Tensor image(std::size_t i) const;
    // Images at the given indices, stacked in that order.
    Tensor gather(std::span<const std::size_t> indices) const;
};

Dataset pack(std::span<const SynthSample> samples, const SynthConfig& config);

// DIR/{images,labels,boxes}.atsr + DIR/meta.json
void save_split(const Dataset& data, Split split, const std::string& dir);
Dataset load_split(const std::string& dir);

// Writes ROOT/train and ROOT/test.
void write_dataset(const SynthConfig& config, const std::string& root);
std::string split_dir(const std::string& root, Split split);

std::string synth_config_json(const SynthConfig& config);
// Strict: unknown keys and wrong types are ConfigErrors.
SynthConfig parse_synth_config(const std::string& json_text);

struct OverlapStats {
    double object_on_rate = 0.0;
    double background_on_rate = 0.0;
};

// A region counts as object iff its r×r block intersects the glyph box. Rates
// are mean mask values over object and background regions of the whole set.
// masks: G_h×G_w hard maps aligned 1:1 with boxes.
OverlapStats region_overlap_stats(std::span<const Tensor> masks, std::span<const Box> boxes, std::size_t region_size);

}  // namespace avp
