// Command-line harness: dataset generation, training, evaluation, ablation
// grids and mask export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "avp/errors.hpp"
#include "avp/experiment.hpp"
#include "avp/synth.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw avp::IoError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Region-based adaptive visual prompting"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, data_dir, split = "test", axis, values, scores;
    std::size_t count = 0;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic glyph benchmark");
    gen->add_option("--config", config_path, "Dataset config JSON")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a prompt (and mask generator)");
    train->add_option("--config", config_path, "Experiment config JSON")->required();
    train->add_option("--out", out_dir, "Output directory (overrides output_dir)")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--data", data_dir)->required();
    eval->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));
    eval->add_option("--scores", scores, "Write per-sample scores CSV");

    auto* abl = app.add_subcommand("ablate", "Train and evaluate over one axis of values");
    abl->add_option("--config", config_path)->required();
    abl->add_option("--axis", axis)->required();
    abl->add_option("--values", values, "Comma-separated values")->required();
    abl->add_option("--out", out_dir)->required();

    auto* exp = app.add_subcommand("export-masks", "Write hard masks and prompt renders as PGM");
    exp->add_option("--checkpoint", checkpoint)->required();
    exp->add_option("--data", data_dir)->required();
    exp->add_option("--count", count)->required();
    exp->add_option("--out", out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            const avp::SynthConfig cfg = avp::parse_synth_config(slurp(config_path));
            avp::write_dataset(cfg, out_dir);
            std::cout << "wrote " << cfg.train_samples << " train / " << cfg.test_samples << " test samples to "
                      << out_dir << "\n";
        } else if (*train) {
            avp::ExperimentConfig cfg = avp::load_experiment_config(config_path);
            cfg.output_dir = out_dir;
            const auto result = avp::train(cfg);
            std::cout << avp::kMetricsHeader << "\n" << avp::format_metrics_row(result.final_test) << "\n";
        } else if (*eval) {
            const auto row = avp::evaluate(checkpoint, data_dir, avp::parse_split(split), scores);
            std::cout << avp::kMetricsHeader << "\n" << avp::format_metrics_row(row) << "\n";
        } else if (*abl) {
            const avp::ExperimentConfig cfg = avp::load_experiment_config(config_path);
            const auto rows = avp::ablate(cfg, avp::parse_axis(axis), split_csv(values), out_dir);
            std::cout << slurp((std::filesystem::path(out_dir) / "ablation.csv").string());
        } else if (*exp) {
            const auto files = avp::export_masks(checkpoint, data_dir, count, out_dir);
            std::cout << "wrote " << files.size() << " files to " << out_dir << "\n";
        }
    } catch (const avp::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const avp::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const avp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
