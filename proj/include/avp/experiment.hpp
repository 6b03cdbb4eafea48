#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avp/checkpoint.hpp"
#include "avp/classifier.hpp"
#include "avp/mask_generator.hpp"
#include "avp/prompt.hpp"
#include "avp/synth.hpp"

namespace avp {

enum class Mode { adavipro, vp_baseline };
const char* mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct ExperimentConfig {
    Mode mode = Mode::adavipro;
    std::size_t prompt_width = 32;
    std::size_t region_size = 16;
    std::size_t embed_dim = 64;
    double tau0 = 5.0;
    double gamma = 0.98;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double lr_prompt = 40.0;
    double lr_generator = 1.0;
    std::uint64_t seed = 0;
    std::string dataset_path;
    std::string output_dir;
    bool straight_through = false;
    bool edge_detection = true;

    // Range checks that need no dataset; throws ConfigError.
    void validate() const;
};

std::string config_json(const ExperimentConfig& config);
// Strict: every key must be an ExperimentConfig field name.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct MetricsRow {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    double mask_on_rate = 0.0;
    double object_on_rate = 0.0;
    double background_on_rate = 0.0;
    double tau = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,split,loss,accuracy,mask_on_rate,object_on_rate,background_on_rate,tau";
std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);

// Everything needed to run inference, as stored in a checkpoint.
struct Model {
    ExperimentConfig config;
    std::size_t image_size = 0;
    std::size_t epochs_trained = 0;
    FrozenEncoder encoder;
    ClassPrototypes prototypes;
    PromptTemplate prompt;
    std::optional<MaskGeneratorParams> generator;
    GumbelSchedule schedule;
};

Checkpoint to_checkpoint(const Model& model);
// Throws ContractError on missing or mutually inconsistent entries.
Model from_checkpoint(const Checkpoint& ck);

// Per-sample inference output.
struct Prediction {
    std::vector<double> scores;
    std::size_t predicted = 0;
    Tensor regions;  // G_h×G_w hard decisions (all ones without a generator)
};

// Hard-mask inference on dataset rows [first, first+count).
std::vector<Prediction> predict(const Model& model, const Dataset& data, std::size_t first, std::size_t count);

// Test-only knobs that no config file can reach.
struct TrainHooks {
    // Replaces the generated mask with all ones in adavipro mode.
    bool force_keep_all = false;
};

struct TrainResult {
    std::vector<MetricsRow> rows;
    MetricsRow final_test;
    std::string checkpoint_path;
    std::string metrics_path;
};

// Writes OUT/config.json, OUT/metrics.csv, OUT/final.csv and OUT/checkpoint.avpc.
TrainResult train(const ExperimentConfig& config, const TrainHooks& hooks = {});

MetricsRow evaluate(const Model& model, const Dataset& data);
// When scores_path is non-empty, writes one CSV line per sample:
// index,label,predicted,score_0..score_{K-1}.
MetricsRow evaluate(const std::string& checkpoint_path, const std::string& dataset_root, Split split,
                    const std::string& scores_path = "");

enum class AblationAxis { edge_detection, gamma, region_size, embed_dim, prompt_width };
AblationAxis parse_axis(const std::string& name);
const char* axis_name(AblationAxis axis);

struct AblationRow {
    std::string value;
    std::optional<MetricsRow> result;
    std::size_t prompt_params = 0;
    std::size_t generator_params = 0;
    std::string status = "ok";
};

inline constexpr const char* kAblationHeader =
    "axis,value,test_accuracy,mask_on_rate,object_on_rate,background_on_rate,prompt_params,generator_params,status";

// One train+evaluate per value with the base seed; each run writes to
// OUT/<axis>_<value>/ and failures are recorded in their row. Writes OUT/ablation.csv.
std::vector<AblationRow> ablate(const ExperimentConfig& base, AblationAxis axis,
                                const std::vector<std::string>& values, const std::string& out_dir);

// For the first `count` test images writes <stem>_mask.pgm, <stem>_edge.pgm,
// <stem>_raw_c{0,1,2}.pgm and <stem>_prompted_c{0,1,2}.pgm where
// stem = sample<index>_label<label>. Returns the written paths.
std::vector<std::string> export_masks(const std::string& checkpoint_path, const std::string& dataset_root,
                                      std::size_t count, const std::string& out_dir);

}  // namespace avp
