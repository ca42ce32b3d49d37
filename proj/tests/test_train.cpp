#include "doctest.h"
#include "splloc/model.hpp"
#include "splloc/parallel.hpp"
#include "splloc/synth.hpp"
#include "splloc/train.hpp"

using namespace splloc;

namespace {

Corpus small_corpus() { return synth::generate(synth::reference_spec(77), 10, 2); }

train::TrainConfig small_config() {
    train::TrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.epochs = 6;
    cfg.warmup_epochs = 2;
    cfg.batch_size = 4;
    cfg.k_sub = 3;
    cfg.eval_each_epoch = false;
    cfg.seed = 5;
    return cfg;
}

bool same_params(model::HeadParams a, model::HeadParams b) {
    const auto pa = model::param_pointers(a);
    const auto pb = model::param_pointers(b);
    if (pa.size() != pb.size()) return false;
    for (size_t i = 0; i < pa.size(); ++i) {
        if (*pa[i] != *pb[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("all-warm-up training equals the baseline variant") {
    const Corpus corpus = small_corpus();

    train::TrainConfig base = small_config();
    train::apply_variant(base, "base");

    train::TrainConfig warm = small_config();
    warm.warmup_epochs = warm.epochs;

    const train::TrainResult a = train::train(corpus, base);
    const train::TrainResult b = train::train(corpus, warm);
    CHECK(same_params(a.params, b.params));
    CHECK(train::log_csv(a.log) == train::log_csv(b.log));
}

TEST_CASE("training is bit-identical under a fixed seed") {
    const Corpus corpus = small_corpus();
    const train::TrainConfig cfg = small_config();
    const train::TrainResult a = train::train(corpus, cfg);
    const train::TrainResult b = train::train(corpus, cfg);
    CHECK(same_params(a.params, b.params));
    CHECK(train::log_csv(a.log) == train::log_csv(b.log));
    CHECK(a.pseudo_labels == b.pseudo_labels);
}

TEST_CASE("serial and parallel training produce identical results") {
    const Corpus corpus = small_corpus();
    const train::TrainConfig cfg = small_config();
    par::set_max_threads(1);
    const train::TrainResult serial = train::train(corpus, cfg);
    par::set_max_threads(0);
    const train::TrainResult parallel = train::train(corpus, cfg);
    CHECK(same_params(serial.params, parallel.params));
    CHECK(train::log_csv(serial.log) == train::log_csv(parallel.log));
}

TEST_CASE("full training produces a bank and pseudo labels") {
    const Corpus corpus = small_corpus();
    const train::TrainConfig cfg = small_config();
    const train::TrainResult result = train::train(corpus, cfg);
    REQUIRE(result.log.size() == 6);
    CHECK(result.pseudo_labels.size() == corpus.videos.size());
    int with_prototypes = 0;
    for (int c = 0; c < result.bank.num_categories(); ++c) {
        with_prototypes += result.bank.category_empty(c) ? 0 : 1;
    }
    CHECK(with_prototypes > 0);
    // post-warm-up epochs engage the alignment and pseudo-label losses
    CHECK(result.log.back().pl_loss > 0.0);
    // every annotated point is labeled positive
    for (const Video& v : corpus.videos) {
        const auto& labels = result.pseudo_labels.at(v.video_id);
        for (const PointAnnotation& p : v.points) {
            CHECK(labels[p.t].kind == LabelKind::positive);
            CHECK(labels[p.t].category == p.category);
        }
    }
}

TEST_CASE("variants adjust the config") {
    train::TrainConfig cfg = small_config();
    train::apply_variant(cfg, "base");
    CHECK(cfg.loss.lambda3 == 0.0);
    CHECK(cfg.loss.lambda4 == 0.0);

    cfg = small_config();
    train::apply_variant(cfg, "pl");
    CHECK(cfg.loss.lambda3 == 0.0);
    CHECK(cfg.pseudo_mode == train::PseudoMode::proposal_only);

    cfg = small_config();
    train::apply_variant(cfg, "opa");
    CHECK(cfg.loss.lambda4 == 0.0);
    CHECK_FALSE(cfg.spc.use_clustering);

    cfg = small_config();
    train::apply_variant(cfg, "fixed");
    CHECK_FALSE(cfg.spc.adaptive);

    cfg = small_config();
    train::apply_variant(cfg, "nmax_3");
    CHECK(cfg.spc.max_prototypes == 3);

    CHECK_THROWS_AS(train::apply_variant(cfg, "bogus"), ValidationError);
}

TEST_CASE("config files round-trip") {
    const auto file = std::filesystem::temp_directory_path() / "splloc_test_cfg.json";
    train::TrainConfig cfg = small_config();
    cfg.loss.lambda3 = 2.25;
    cfg.spc.max_prototypes = 4;
    cfg.pseudo_mode = train::PseudoMode::proposal_only;
    train::config_to_json_file(cfg, file);
    const train::TrainConfig loaded = train::config_from_json_file(file);
    CHECK(loaded.loss.lambda3 == 2.25);
    CHECK(loaded.spc.max_prototypes == 4);
    CHECK(loaded.pseudo_mode == train::PseudoMode::proposal_only);
    CHECK(loaded.epochs == cfg.epochs);
    CHECK(loaded.hidden_dim == cfg.hidden_dim);
}
