#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splloc/types.hpp"

namespace splloc::synth {

// One sub-action phase: its mean feature vector and duration range (snippets).
struct Motif {
    std::vector<double> mean;
    int min_len = 1;
    int max_len = 1;
};

// Ordered sub-action motifs of one category.
struct CategoryMotifs {
    std::vector<Motif> sub_actions;
};

enum class PointMode { uniform, center };

struct SynthSpec {
    int num_categories = 0;
    int feature_dim = 0;
    int video_len = 0;
    std::vector<CategoryMotifs> motifs;   // size num_categories
    std::vector<double> background_mean;  // size feature_dim
    std::vector<double> view_shift;       // additive suffix perturbation
    double noise_sigma = 0.0;
    double p_view = 0.0;
    PointMode point_mode = PointMode::uniform;
    uint64_t seed = 0;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Generates n_videos videos with instances_per_video planted instances each.
// Every instance is its category's motifs concatenated in order with drawn
// durations, Gaussian noise added per stream, and (with probability p_view) a
// fixed additive shift applied to a contiguous suffix. Exactly one point
// annotation per instance. Deterministic under a fixed spec; videos use seeds
// derived from (spec.seed, first_index + i) so generation parallelizes.
Corpus generate(const SynthSpec& spec, int n_videos, int instances_per_video, int first_index = 0);

// The pinned corpus spec used by the ablation study and the acceptance suite:
// C=4, D=16, 3-4 sub-actions per category, noisy two-stream features with
// camera-view suffix shifts.
SynthSpec reference_spec(uint64_t seed = 42);

// Same structure with noise and view shifts removed.
SynthSpec reference_spec_clean(uint64_t seed = 42);

SynthSpec spec_from_json_file(const std::string& path);
void spec_to_json_file(const SynthSpec& spec, const std::string& path);

}  // namespace splloc::synth
