#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "splloc/eval.hpp"
#include "splloc/infer.hpp"
#include "splloc/io.hpp"
#include "splloc/model.hpp"
#include "splloc/parallel.hpp"
#include "splloc/synth.hpp"
#include "splloc/train.hpp"

namespace fs = std::filesystem;
using namespace splloc;

namespace {

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

std::vector<uint64_t> parse_seeds(const std::string& csv) {
    std::vector<uint64_t> seeds;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        seeds.push_back(std::stoull(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (seeds.empty()) throw ValidationError("no seeds given");
    return seeds;
}

std::vector<std::string> parse_names(const std::string& csv) {
    std::vector<std::string> names;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        names.push_back(csv.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return names;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point-supervised temporal action localization with sub-action prototypes"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (0 = all cores)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    std::string synth_spec, synth_out, synth_preset;
    int synth_videos = 50, synth_instances = 2, synth_first = 0;
    uint64_t synth_seed = 0;
    bool synth_has_seed = false;
    synth_cmd->add_option("--spec", synth_spec, "Corpus spec JSON");
    synth_cmd->add_option("--preset", synth_preset, "Built-in spec: reference or reference-clean");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--videos", synth_videos, "Number of videos");
    synth_cmd->add_option("--instances", synth_instances, "Instances per video");
    synth_cmd->add_option("--first-index", synth_first, "First video index (seed stream offset)");
    synth_cmd->add_option("--seed", synth_seed, "Override the spec seed")->each([&](const std::string&) {
        synth_has_seed = true;
    });

    // train
    auto* train_cmd = app.add_subcommand("train", "Train on a corpus");
    std::string train_corpus, train_config, train_out = "out", train_variant;
    uint64_t train_seed = 0;
    bool train_has_seed = false;
    train_cmd->add_option("--corpus", train_corpus, "Corpus directory")->required();
    train_cmd->add_option("--config", train_config, "Config JSON (missing keys use defaults)");
    train_cmd->add_option("--out", train_out, "Output directory");
    train_cmd->add_option("--variant", train_variant, "Ablation variant to apply");
    train_cmd->add_option("--seed", train_seed, "Training seed")->each([&](const std::string&) {
        train_has_seed = true;
    });

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Run inference with a checkpoint");
    std::string infer_ckpt, infer_corpus, infer_out = "results.json", infer_config;
    infer_cmd->add_option("--checkpoint", infer_ckpt, "Checkpoint JSON")->required();
    infer_cmd->add_option("--corpus", infer_corpus, "Corpus directory")->required();
    infer_cmd->add_option("--out", infer_out, "Results file");
    infer_cmd->add_option("--config", infer_config, "Config JSON for inference settings");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score results against ground truth");
    std::string eval_results, eval_corpus, eval_preset = "thumos", eval_out;
    eval_cmd->add_option("--results", eval_results, "results.json")->required();
    eval_cmd->add_option("--corpus", eval_corpus, "Corpus directory with gt.json files")->required();
    eval_cmd->add_option("--preset", eval_preset, "Threshold preset: thumos or gtea");
    eval_cmd->add_option("--out", eval_out, "Also write the table as CSV");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Run ablation variants");
    std::string ab_train, ab_test, ab_config, ab_variants = "base,pl,full", ab_seeds = "1", ab_out,
                ab_preset = "thumos";
    ablate_cmd->add_option("--corpus", ab_train, "Training corpus directory")->required();
    ablate_cmd->add_option("--test", ab_test, "Held-out corpus for evaluation")->required();
    ablate_cmd->add_option("--config", ab_config, "Config JSON");
    ablate_cmd->add_option("--variants", ab_variants, "Comma-separated variant names");
    ablate_cmd->add_option("--seeds", ab_seeds, "Comma-separated seeds");
    ablate_cmd->add_option("--preset", ab_preset, "Threshold preset");
    ablate_cmd->add_option("--out", ab_out, "Write the table as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) par::set_max_threads(threads);

        if (*synth_cmd) {
            synth::SynthSpec spec;
            if (!synth_preset.empty()) {
                if (synth_preset == "reference") spec = synth::reference_spec();
                else if (synth_preset == "reference-clean") spec = synth::reference_spec_clean();
                else throw ValidationError("unknown preset '" + synth_preset + "'");
            } else if (!synth_spec.empty()) {
                spec = synth::spec_from_json_file(synth_spec);
            } else {
                throw ValidationError("synth needs --spec or --preset");
            }
            if (synth_has_seed) spec.seed = synth_seed;
            const Corpus corpus = synth::generate(spec, synth_videos, synth_instances, synth_first);
            io::write_corpus(corpus, synth_out);
            std::printf("wrote %zu videos to %s\n", corpus.videos.size(), synth_out.c_str());
        } else if (*train_cmd) {
            train::TrainConfig cfg;
            if (!train_config.empty()) cfg = train::config_from_json_file(train_config);
            if (train_has_seed) cfg.seed = train_seed;
            if (!train_variant.empty()) train::apply_variant(cfg, train_variant);
            const Corpus corpus = io::load_corpus(train_corpus);
            const train::TrainResult result = train::train(corpus, cfg);
            fs::create_directories(train_out);
            model::save_checkpoint(result.params, fs::path(train_out) / "checkpoint.json");
            write_text(fs::path(train_out) / "train_log.csv", train::log_csv(result.log));
            io::dump_bank(result.bank, fs::path(train_out) / "bank.json");
            io::dump_pseudo_labels(result.pseudo_labels, fs::path(train_out) / "pseudo_labels.json");
            if (!result.log.empty()) {
                std::printf("final: total=%.4f train mAP(avg)=%.2f%%\n", result.log.back().total,
                            100.0 * result.log.back().train_avg_map);
            }
        } else if (*infer_cmd) {
            train::TrainConfig cfg;
            if (!infer_config.empty()) cfg = train::config_from_json_file(infer_config);
            const Corpus corpus = io::load_corpus(infer_corpus);
            const model::HeadParams params = model::load_checkpoint(infer_ckpt);
            const io::ResultsMap results = train::inference_results(corpus, params, cfg.infer);
            io::dump_results(results, infer_out);
            size_t n = 0;
            for (const auto& [vid, segs] : results) n += segs.size();
            std::printf("wrote %zu proposals for %zu videos to %s\n", n, results.size(), infer_out.c_str());
        } else if (*eval_cmd) {
            const Corpus corpus = io::load_corpus(eval_corpus);
            const io::ResultsMap results = io::load_results(eval_results);
            const io::ResultsMap gt = io::ground_truth_map(corpus);
            const auto thresholds = eval::preset_thresholds(eval_preset);
            const eval::MapTable table = eval::map_table(results, gt, thresholds);
            std::printf("%s", eval::format_map_table(table).c_str());
            if (!eval_out.empty()) write_text(eval_out, eval::map_table_csv(table));
        } else if (*ablate_cmd) {
            train::TrainConfig cfg;
            if (!ab_config.empty()) cfg = train::config_from_json_file(ab_config);
            const Corpus train_corpus = io::load_corpus(ab_train);
            const Corpus test_corpus = io::load_corpus(ab_test);
            const auto thresholds = eval::preset_thresholds(ab_preset);
            const auto rows = train::ablate(train_corpus, test_corpus, cfg, parse_names(ab_variants),
                                            parse_seeds(ab_seeds), thresholds);
            std::printf("%s", train::format_ablation(rows).c_str());
            if (!ab_out.empty()) write_text(ab_out, train::ablation_csv(rows));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
