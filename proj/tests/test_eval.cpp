#include "doctest.h"
#include "oracles.hpp"
#include "splloc/eval.hpp"
#include "splloc/rng.hpp"
#include "splloc/synth.hpp"

using namespace splloc;

TEST_CASE("a single exact detection scores full AP") {
    io::ResultsMap gt{{"v", {{10, 20, 0, 1.0}}}};
    io::ResultsMap pred{{"v", {{10, 20, 0, 0.9}}}};
    const auto ap = eval::match_and_ap(pred, gt, 0.5);
    CHECK(ap.at(0) == doctest::Approx(1.0));
}

TEST_CASE("no proposals score zero AP") {
    io::ResultsMap gt{{"v", {{10, 20, 0, 1.0}}}};
    io::ResultsMap pred{{"v", {}}};
    CHECK(eval::match_and_ap(pred, gt, 0.5).at(0) == doctest::Approx(0.0));
}

TEST_CASE("interpolated AP on the tp-fp-tp ranking is five sixths") {
    io::ResultsMap gt{{"v", {{0, 10, 0, 1.0}, {20, 30, 0, 1.0}}}};
    io::ResultsMap pred{{"v",
                         {
                             {0, 10, 0, 0.9},    // TP
                             {40, 50, 0, 0.8},   // FP
                             {20, 30, 0, 0.7},   // TP
                         }}};
    const auto ap = eval::match_and_ap(pred, gt, 0.5);
    CHECK(ap.at(0) == doctest::Approx(5.0 / 6.0));
    CHECK(ap.at(0) == 5.0 / 6.0);
}

TEST_CASE("categories without ground truth are excluded from the mean") {
    io::ResultsMap gt{{"v", {{0, 10, 0, 1.0}}}};
    io::ResultsMap pred{{"v", {{0, 10, 0, 0.9}, {3, 9, 5, 0.9}}}};
    const auto ap = eval::match_and_ap(pred, gt, 0.5);
    CHECK(ap.size() == 1);
    CHECK(eval::mean_ap(pred, gt, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("perfect detections hold full mAP at every threshold") {
    io::ResultsMap gt{{"v", {{0, 10, 0, 1.0}, {15, 30, 1, 1.0}}}};
    io::ResultsMap pred{{"v", {{0, 10, 0, 0.9}, {15, 30, 1, 0.8}}}};
    const eval::MapTable table = eval::map_table(pred, gt, eval::preset_thresholds("thumos"));
    for (double v : table.map_at) CHECK(v == doctest::Approx(1.0));
    CHECK(table.avg == doctest::Approx(1.0));
}

TEST_CASE("half-shifted detections die above one third tiou") {
    io::ResultsMap gt{{"v", {{0, 10, 0, 1.0}}}};
    io::ResultsMap pred{{"v", {{5, 15, 0, 0.9}}}};
    CHECK(eval::mean_ap(pred, gt, 1.0 / 3.0) == doctest::Approx(1.0));
    CHECK(eval::mean_ap(pred, gt, 0.34) == doctest::Approx(0.0));
    CHECK(eval::mean_ap(pred, gt, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("mAP is non-increasing in the tiou threshold") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        io::ResultsMap gt, pred;
        for (int v = 0; v < 3; ++v) {
            const std::string vid = "v" + std::to_string(v);
            int cursor = 0;
            for (int i = 0; i < 3; ++i) {
                const int start = cursor + rng.uniform_int(0, 5);
                const int len = rng.uniform_int(2, 10);
                gt[vid].push_back({start, start + len, rng.uniform_int(0, 1), 1.0});
                cursor = start + len + 1;
            }
            for (int i = 0; i < 6; ++i) {
                const int start = rng.uniform_int(0, 40);
                Segment s{start, start + rng.uniform_int(1, 12), rng.uniform_int(0, 1), rng.uniform()};
                pred[vid].push_back(s);
            }
        }
        double prev = 1e9;
        for (double theta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double m = eval::mean_ap(pred, gt, theta);
            CHECK(m <= prev + 1e-12);
            prev = m;
        }
    }
}

TEST_CASE("evaluator agrees with the quadratic reference on mixed corpora") {
    Rng rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        io::ResultsMap gt, pred;
        for (int v = 0; v < 4; ++v) {
            const std::string vid = "v" + std::to_string(v);
            gt[vid] = {};
            int cursor = 0;
            const int n_gt = rng.uniform_int(0, 4);
            for (int i = 0; i < n_gt; ++i) {
                const int start = cursor + rng.uniform_int(0, 4);
                const int len = rng.uniform_int(2, 8);
                gt[vid].push_back({start, start + len, rng.uniform_int(0, 2), 1.0});
                cursor = start + len + 1;
            }
            const int n_pred = rng.uniform_int(0, 8);
            for (int i = 0; i < n_pred; ++i) {
                const int start = rng.uniform_int(0, 30);
                pred[vid].push_back({start, start + rng.uniform_int(1, 10), rng.uniform_int(0, 2), rng.uniform()});
            }
        }
        for (double theta : {0.3, 0.5}) {
            const auto ap = eval::match_and_ap(pred, gt, theta);
            for (const auto& [category, value] : ap) {
                CHECK(value == doctest::Approx(oracle::reference_ap(pred, gt, category, theta)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("AP ignores the order of equal-confidence proposals under the tie rule") {
    io::ResultsMap gt{{"a", {{0, 10, 0, 1.0}}}, {"b", {{0, 10, 0, 1.0}}}};
    io::ResultsMap pred1{{"a", {{0, 10, 0, 0.5}}}, {"b", {{0, 10, 0, 0.5}}}};
    io::ResultsMap pred2{{"b", {{0, 10, 0, 0.5}}}, {"a", {{0, 10, 0, 0.5}}}};
    CHECK(eval::mean_ap(pred1, gt, 0.5) == eval::mean_ap(pred2, gt, 0.5));
}

TEST_CASE("boundary f1 scores exact pseudo labels perfectly") {
    const Corpus corpus = synth::generate(synth::reference_spec_clean(5), 10, 2);
    std::map<std::string, PseudoLabelSeq> labels;
    for (const Video& v : corpus.videos) {
        PseudoLabelSeq seq(v.length(), {LabelKind::negative, -1});
        for (const Segment& s : *v.ground_truth) {
            for (int t = s.start; t < s.end; ++t) seq[t] = {LabelKind::positive, s.category};
        }
        labels[v.video_id] = seq;
    }
    CHECK(eval::boundary_f1(labels, corpus, 1) == doctest::Approx(1.0));

    SUBCASE("unlabeled videos lose recall") {
        labels.erase(corpus.videos[0].video_id);
        CHECK(eval::boundary_f1(labels, corpus, 1) < 1.0);
    }
}
