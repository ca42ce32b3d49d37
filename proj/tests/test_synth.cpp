#include "doctest.h"
#include "splloc/synth.hpp"

using namespace splloc;

namespace {

synth::SynthSpec tiny_spec() {
    synth::SynthSpec spec;
    spec.num_categories = 1;
    spec.feature_dim = 3;
    spec.video_len = 20;
    spec.noise_sigma = 0.0;
    spec.p_view = 0.0;
    spec.seed = 5;
    spec.background_mean = {0.0, 0.0, 0.0};
    spec.view_shift = {1.0, 1.0, 1.0};
    synth::CategoryMotifs cm;
    cm.sub_actions.push_back({{1.0, 0.0, 0.0}, 4, 4});
    cm.sub_actions.push_back({{0.0, 1.0, 0.0}, 2, 2});
    cm.sub_actions.push_back({{0.0, 0.0, 1.0}, 3, 3});
    spec.motifs.push_back(cm);
    return spec;
}

}  // namespace

TEST_CASE("zero-noise instances equal their motif means blockwise") {
    const Corpus corpus = synth::generate(tiny_spec(), 1, 1);
    REQUIRE(corpus.videos.size() == 1);
    const Video& v = corpus.videos[0];
    REQUIRE(v.ground_truth.has_value());
    REQUIRE(v.ground_truth->size() == 1);
    const Segment gt = v.ground_truth->front();
    CHECK(gt.length() == 9);

    const std::vector<std::vector<double>> motifs = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const std::vector<int> durations = {4, 2, 3};
    int t = gt.start;
    for (size_t s = 0; s < motifs.size(); ++s) {
        for (int d = 0; d < durations[s]; ++d, ++t) {
            for (int c = 0; c < 3; ++c) {
                CHECK(v.appearance.at(t, c) == motifs[s][c]);
                CHECK(v.motion.at(t, c) == motifs[s][c]);
            }
        }
    }
    // outside the instance everything is background
    for (int u = 0; u < v.length(); ++u) {
        if (u >= gt.start && u < gt.end) continue;
        for (int c = 0; c < 3; ++c) CHECK(v.appearance.at(u, c) == 0.0);
    }
}

TEST_CASE("generation is bit-identical under a fixed seed") {
    const synth::SynthSpec spec = synth::reference_spec(11);
    const Corpus a = synth::generate(spec, 5, 2);
    const Corpus b = synth::generate(spec, 5, 2);
    REQUIRE(a.videos.size() == b.videos.size());
    for (size_t v = 0; v < a.videos.size(); ++v) {
        CHECK(a.videos[v].appearance == b.videos[v].appearance);
        CHECK(a.videos[v].motion == b.videos[v].motion);
        REQUIRE(a.videos[v].points.size() == b.videos[v].points.size());
        for (size_t i = 0; i < a.videos[v].points.size(); ++i) {
            CHECK(a.videos[v].points[i].t == b.videos[v].points[i].t);
        }
    }
}

TEST_CASE("every instance holds exactly one point, segments disjoint and sorted") {
    const Corpus corpus = synth::generate(synth::reference_spec(23), 500, 2);
    int instances = 0;
    for (const Video& v : corpus.videos) {
        REQUIRE(v.ground_truth.has_value());
        const auto& gt = *v.ground_truth;
        instances += static_cast<int>(gt.size());
        for (size_t i = 1; i < gt.size(); ++i) {
            CHECK(gt[i - 1].end <= gt[i].start);  // disjoint and sorted
        }
        REQUIRE(v.points.size() == gt.size());
        for (size_t i = 0; i < gt.size(); ++i) {
            CHECK(v.points[i].t >= gt[i].start);
            CHECK(v.points[i].t < gt[i].end);
            CHECK(v.points[i].category == gt[i].category);
        }
    }
    CHECK(instances == 1000);
}

TEST_CASE("videos too short to hold their instances are rejected") {
    synth::SynthSpec spec = tiny_spec();
    spec.video_len = 9;  // 9 instance snippets + 2 gap snippets do not fit
    CHECK_THROWS_AS(synth::generate(spec, 1, 1), synth::GenerationError);
}

TEST_CASE("view shift applies to a contiguous suffix of both streams") {
    synth::SynthSpec spec = tiny_spec();
    spec.p_view = 1.0;
    const Corpus corpus = synth::generate(spec, 20, 1);
    int shifted_instances = 0;
    for (const Video& v : corpus.videos) {
        const Segment gt = v.ground_truth->front();
        // find snippets whose appearance deviates from every motif mean
        std::vector<bool> shifted;
        for (int t = gt.start; t < gt.end; ++t) {
            double min_dev = 1e9;
            for (const auto& motif : {std::vector<double>{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}) {
                double dev = 0;
                for (int c = 0; c < 3; ++c) dev += std::abs(v.appearance.at(t, c) - motif[c]);
                min_dev = std::min(min_dev, dev);
            }
            shifted.push_back(min_dev > 1e-9);
        }
        // must be a suffix: once shifted, stays shifted
        bool seen = false;
        for (bool s : shifted) {
            if (s) seen = true;
            if (seen) CHECK(s);
        }
        if (seen) {
            ++shifted_instances;
            // both streams shifted identically at the suffix
            for (int t = gt.start; t < gt.end; ++t) {
                for (int c = 0; c < 3; ++c) CHECK(v.appearance.at(t, c) == v.motion.at(t, c));
            }
        }
    }
    CHECK(shifted_instances == 20);  // p_view = 1 and every instance has length >= 2
}
