#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "splloc/eval.hpp"
#include "splloc/infer.hpp"
#include "splloc/io.hpp"
#include "splloc/losses.hpp"
#include "splloc/model.hpp"
#include "splloc/spc.hpp"
#include "splloc/types.hpp"

namespace splloc::train {

// How per-snippet pseudo labels are produced after warm-up: from the
// alignment paths, or directly from the selected proposal spans.
enum class PseudoMode { alignment, proposal_only };

struct TrainConfig {
    int hidden_dim = 64;
    int embed_dim = 0;  // 0 -> corpus feature dim
    int kernel = 3;
    double lr = 0.4;
    int epochs = 100;
    int warmup_epochs = 20;
    int batch_size = 16;
    uint64_t seed = 1;

    spc::SpcConfig spc;
    int k_sub = 10;
    losses::LossConfig loss;
    infer::InferConfig infer;
    PseudoMode pseudo_mode = PseudoMode::alignment;
    bool eval_each_epoch = true;
};

struct EpochLog {
    int epoch = 0;
    double video_loss = 0.0;
    double point_loss = 0.0;
    double opa_loss = 0.0;
    double pl_loss = 0.0;
    double total = 0.0;
    double train_avg_map = -1.0;  // -1 when not evaluated
};

struct TrainResult {
    model::HeadParams params;
    std::vector<EpochLog> log;
    std::map<std::string, PseudoLabelSeq> pseudo_labels;  // from the final structure pass
    MemoryBank bank;                                      // final epoch's bank
};

// Full training loop: warm-up epochs use the video and point losses only;
// afterwards every epoch runs inference on the training videos, rebuilds the
// memory bank from the top-confidence proposals, partitions each video,
// aligns every region and regenerates pseudo labels, then optimizes the
// combined objective by minibatch SGD. Deterministic under a fixed seed.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg);

io::ResultsMap inference_results(const Corpus& corpus, const model::HeadParams& params, const infer::InferConfig& cfg);

std::string log_csv(const std::vector<EpochLog>& log);

TrainConfig config_from_json_file(const std::filesystem::path& file);
void config_to_json_file(const TrainConfig& cfg, const std::filesystem::path& file);

// Named ablation variants:
//   base      video + point losses only
//   opa       + alignment loss with snippet-level (unclustered) prototypes
//   spc_opa   + alignment loss with clustered prototypes
//   pl        + pseudo-label loss from proposal spans only
//   opa_pl    + alignment and pseudo-label losses, snippet-level prototypes
//   full      everything
//   fixed     full with the fixed prototype-count criterion
//   nmax_<k>  full with max_prototypes = k
void apply_variant(TrainConfig& cfg, const std::string& variant);

struct AblationRow {
    std::string variant;
    eval::MapTable table;  // averaged over seeds
};

// Trains every (variant, seed) pair on train_corpus and evaluates on
// test_corpus; per-variant tables are seed means.
std::vector<AblationRow> ablate(const Corpus& train_corpus, const Corpus& test_corpus, const TrainConfig& base_cfg,
                                const std::vector<std::string>& variants, const std::vector<uint64_t>& seeds,
                                std::span<const double> eval_thresholds);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace splloc::train
