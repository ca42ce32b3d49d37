#pragma once

#include <span>
#include <string>
#include <vector>

#include "splloc/types.hpp"

namespace splloc::spc {

struct SpcConfig {
    int avg_snippets_per_prototype = 5;  // r_p
    int max_prototypes = 5;              // N_max
    double temporal_weight = 3.0;        // gamma
    int iterations = 6;                  // L
    bool adaptive = true;                // false: fixed criterion N_s = min(N_max, N_p)
    bool use_clustering = true;          // false: keep raw segment-center snippets (snippet-level ablation)
};

// Adaptive prototype count: min(max(floor(N_p / r_p), 1), N_max).
int adaptive_count(int proposal_len, const SpcConfig& cfg);

// Count actually used for a proposal, honoring the adaptive/fixed switch.
int prototype_count(int proposal_len, const SpcConfig& cfg);

// Normalized temporal position of snippet i within a proposal of length n.
inline double snippet_position(int i, int n) { return (static_cast<double>(i) + 0.5) / static_cast<double>(n); }

// Splits the proposal into n_prototypes contiguous segments as equal as
// possible (remainder spread from the front). Prototype vector = segment
// mean, position = segment center normalized to [0,1].
std::vector<SubActionPrototype> init_prototypes(const Matrix& proposal, int n_prototypes);

// Distance of Eq. 2: sqrt(d_f^2 + gamma * d_t^2) over feature vectors and
// normalized temporal positions.
double prototype_distance(std::span<const double> feature, double t, std::span<const double> proto_vec, double u,
                          double gamma);

// Iterative soft assignment and weighted update. Each iteration computes
// A_ij = exp(-Dis(x_i, s_j)) against the previous prototypes and replaces
// every prototype vector and position by the A-weighted snippet mean. A
// prototype whose weight mass underflows to zero collapses to its nearest
// snippet.
std::vector<SubActionPrototype> spc_cluster(const Matrix& proposal, std::vector<SubActionPrototype> init,
                                            const SpcConfig& cfg);

// Proposal whose snippets feed prototype extraction; features index into the
// per-video embedding list handed to harvest.
struct HarvestProposal {
    int video_index = 0;
    Segment segment;
};

// Per category, clusters the k_sub highest-confidence proposals (ties broken
// by ascending (video_id, start)) and stores their prototype sets; each
// prototype inherits the proposal confidence. Categories without proposals
// get an empty bank entry.
MemoryBank harvest(std::span<const Matrix> embeddings, std::span<const std::string> video_ids,
                   std::span<const HarvestProposal> proposals, const SpcConfig& cfg, int k_sub, int num_categories);

}  // namespace splloc::spc
