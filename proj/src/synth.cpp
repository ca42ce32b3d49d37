#include "splloc/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "splloc/parallel.hpp"
#include "splloc/rng.hpp"

namespace splloc::synth {

namespace {

struct Instance {
    int start = 0;
    int category = 0;
    std::vector<int> durations;  // one per sub-action
    int shift_offset = -1;       // offset within the instance where the view shift starts, -1 = none

    int length() const {
        int n = 0;
        for (int d : durations) n += d;
        return n;
    }
};

std::vector<double> scaled_unit_vector(Rng& rng, int dim, double scale) {
    std::vector<double> v(dim);
    double n = 0.0;
    do {
        for (double& x : v) x = rng.normal();
        n = norm(v);
    } while (n < 1e-9);
    for (double& x : v) x *= scale / n;
    return v;
}

Video generate_video(const SynthSpec& spec, int index, int instances_per_video) {
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(index)));
    const int T = spec.video_len;
    const int D = spec.feature_dim;

    // Layout: categories, durations, then gaps (>= 1 snippet between and
    // around instances).
    std::vector<Instance> instances(instances_per_video);
    int total_len = 0;
    for (Instance& inst : instances) {
        inst.category = rng.uniform_int(0, spec.num_categories - 1);
        for (const Motif& m : spec.motifs[inst.category].sub_actions) {
            inst.durations.push_back(rng.uniform_int(m.min_len, m.max_len));
        }
        total_len += inst.length();
    }
    const int n_gaps = instances_per_video + 1;
    int slack = T - total_len - n_gaps;
    if (slack < 0) {
        throw GenerationError("video " + std::to_string(index) + " too short: " + std::to_string(T) +
                              " snippets cannot hold " + std::to_string(total_len) + " instance snippets plus gaps");
    }
    std::vector<int> gaps(n_gaps, 1);
    while (slack > 0) {
        gaps[rng.uniform_int(0, n_gaps - 1)] += 1;
        --slack;
    }
    int cursor = 0;
    for (int i = 0; i < instances_per_video; ++i) {
        cursor += gaps[i];
        instances[i].start = cursor;
        cursor += instances[i].length();
    }

    // View-shift decisions.
    for (Instance& inst : instances) {
        const int len = inst.length();
        if (spec.p_view > 0.0 && len >= 2 && rng.uniform() < spec.p_view) {
            inst.shift_offset = rng.uniform_int(1, len - 1);
        }
    }

    // Point annotations.
    std::vector<PointAnnotation> points;
    for (const Instance& inst : instances) {
        const int len = inst.length();
        int t = 0;
        if (spec.point_mode == PointMode::uniform) {
            t = inst.start + rng.uniform_int(0, len - 1);
        } else {
            t = inst.start + (len - 1) / 2;
        }
        points.push_back({t, inst.category});
    }

    // Noise-free structure shared by both streams.
    Matrix base(T, D);
    for (int t = 0; t < T; ++t) {
        auto row = base.row(t);
        for (int c = 0; c < D; ++c) row[c] = spec.background_mean[c];
    }
    for (const Instance& inst : instances) {
        int t = inst.start;
        const auto& subs = spec.motifs[inst.category].sub_actions;
        for (size_t s = 0; s < subs.size(); ++s) {
            for (int d = 0; d < inst.durations[s]; ++d, ++t) {
                auto row = base.row(t);
                for (int c = 0; c < D; ++c) row[c] = subs[s].mean[c];
            }
        }
        if (inst.shift_offset >= 0) {
            for (int u = inst.start + inst.shift_offset; u < inst.start + inst.length(); ++u) {
                auto row = base.row(u);
                for (int c = 0; c < D; ++c) row[c] += spec.view_shift[c];
            }
        }
    }

    Video video;
    char name[32];
    std::snprintf(name, sizeof(name), "video_%06d", index);
    video.video_id = name;
    video.appearance = base;
    video.motion = base;
    if (spec.noise_sigma > 0.0) {
        for (double& v : video.appearance.values()) v += rng.normal(0.0, spec.noise_sigma);
        for (double& v : video.motion.values()) v += rng.normal(0.0, spec.noise_sigma);
    }
    video.points = std::move(points);

    std::vector<Segment> gt;
    for (const Instance& inst : instances) {
        gt.push_back({inst.start, inst.start + inst.length(), inst.category, 1.0});
    }
    video.ground_truth = std::move(gt);
    return video;
}

}  // namespace

Corpus generate(const SynthSpec& spec, int n_videos, int instances_per_video, int first_index) {
    if (spec.num_categories < 1 || spec.feature_dim < 1 || spec.video_len < 1) {
        throw GenerationError("invalid spec: categories, feature_dim and video_len must be positive");
    }
    if (static_cast<int>(spec.motifs.size()) != spec.num_categories) {
        throw GenerationError("invalid spec: one motif list per category required");
    }
    for (const CategoryMotifs& cm : spec.motifs) {
        if (cm.sub_actions.empty()) throw GenerationError("invalid spec: category with no sub-actions");
        for (const Motif& m : cm.sub_actions) {
            if (m.min_len < 1 || m.max_len < m.min_len) throw GenerationError("invalid spec: bad duration range");
            if (static_cast<int>(m.mean.size()) != spec.feature_dim) {
                throw GenerationError("invalid spec: motif mean dimension mismatch");
            }
        }
    }

    Corpus corpus;
    corpus.num_categories = spec.num_categories;
    corpus.feature_dim = spec.feature_dim;
    corpus.videos.resize(n_videos);

    std::vector<std::string> errors(n_videos);
    par::parallel_for(n_videos, [&](std::ptrdiff_t i) {
        try {
            corpus.videos[i] = generate_video(spec, first_index + static_cast<int>(i), instances_per_video);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const std::string& e : errors) {
        if (!e.empty()) throw GenerationError(e);
    }
    return corpus;
}

SynthSpec reference_spec(uint64_t seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.num_categories = 4;
    spec.feature_dim = 16;
    spec.video_len = 96;
    spec.noise_sigma = 0.35;
    spec.p_view = 0.45;
    spec.point_mode = PointMode::uniform;

    Rng rng(derive_seed(seed, 0xC0FFEEULL));
    spec.background_mean = scaled_unit_vector(rng, spec.feature_dim, 1.0);
    spec.view_shift = scaled_unit_vector(rng, spec.feature_dim, 2.5);

    // Every category opens with a near-identical "approach" phase (distinct
    // but confusable), so instance starts cannot be attributed per snippet;
    // the later sub-actions are category-specific.
    const std::vector<double> approach = scaled_unit_vector(rng, spec.feature_dim, 2.0);
    for (int c = 0; c < spec.num_categories; ++c) {
        CategoryMotifs cm;
        const int n_subs = 3 + (c % 2);
        for (int s = 0; s < n_subs; ++s) {
            Motif m;
            if (s == 0) {
                const std::vector<double> tweak = scaled_unit_vector(rng, spec.feature_dim, 0.15);
                m.mean = approach;
                for (int i = 0; i < spec.feature_dim; ++i) m.mean[i] += tweak[i];
                m.min_len = 12;
                m.max_len = 18;
            } else {
                m.mean = scaled_unit_vector(rng, spec.feature_dim, 2.0);
                m.min_len = 3;
                m.max_len = 5;
            }
            cm.sub_actions.push_back(std::move(m));
        }
        spec.motifs.push_back(std::move(cm));
    }
    return spec;
}

SynthSpec reference_spec_clean(uint64_t seed) {
    SynthSpec spec = reference_spec(seed);
    spec.noise_sigma = 0.0;
    spec.p_view = 0.0;
    return spec;
}

SynthSpec spec_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open spec file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    SynthSpec spec;
    try {
        spec.num_categories = j.at("num_categories").get<int>();
        spec.feature_dim = j.at("feature_dim").get<int>();
        spec.video_len = j.at("video_len").get<int>();
        spec.noise_sigma = j.at("noise_sigma").get<double>();
        spec.p_view = j.value("p_view", 0.0);
        spec.seed = j.value("seed", 0ULL);
        spec.point_mode = j.value("point_mode", std::string("uniform")) == "center" ? PointMode::center
                                                                                    : PointMode::uniform;
        spec.background_mean = j.at("background_mean").get<std::vector<double>>();
        if (j.contains("view_shift")) spec.view_shift = j.at("view_shift").get<std::vector<double>>();
        else spec.view_shift.assign(spec.feature_dim, 0.0);
        for (const auto& cat : j.at("motifs")) {
            CategoryMotifs cm;
            for (const auto& sub : cat) {
                Motif m;
                m.mean = sub.at("mean").get<std::vector<double>>();
                m.min_len = sub.at("min_len").get<int>();
                m.max_len = sub.at("max_len").get<int>();
                cm.sub_actions.push_back(std::move(m));
            }
            spec.motifs.push_back(std::move(cm));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return spec;
}

void spec_to_json_file(const SynthSpec& spec, const std::string& path) {
    nlohmann::json j;
    j["num_categories"] = spec.num_categories;
    j["feature_dim"] = spec.feature_dim;
    j["video_len"] = spec.video_len;
    j["noise_sigma"] = spec.noise_sigma;
    j["p_view"] = spec.p_view;
    j["seed"] = spec.seed;
    j["point_mode"] = spec.point_mode == PointMode::center ? "center" : "uniform";
    j["background_mean"] = spec.background_mean;
    j["view_shift"] = spec.view_shift;
    nlohmann::json motifs = nlohmann::json::array();
    for (const CategoryMotifs& cm : spec.motifs) {
        nlohmann::json cat = nlohmann::json::array();
        for (const Motif& m : cm.sub_actions) {
            cat.push_back({{"mean", m.mean}, {"min_len", m.min_len}, {"max_len", m.max_len}});
        }
        motifs.push_back(cat);
    }
    j["motifs"] = motifs;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write spec file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace splloc::synth
