#pragma once

#include <span>
#include <vector>

#include "splloc/opa.hpp"
#include "splloc/types.hpp"

namespace splloc::losses {

struct LossConfig {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.5;
    double lambda4 = 1.0;
    double k_ratio = 0.125;    // top-k pooling ratio
    double theta_b = 0.5;      // pseudo background point threshold
    double focal_gamma = 2.0;
    double tau = 0.1;          // alignment contrast temperature
};

// Probabilities are clamped to [eps, 1-eps] before any log.
inline constexpr double kProbEps = 1e-7;

// Gradient outputs accumulate scale * dLoss/d(input) so callers can apply the
// loss weights while summing into one gradient buffer.

// Video-level loss: per channel, mean of the top-k snippet scores
// (k = max(1, floor(k_ratio * T))) against target 1 for present categories
// and the background channel, 0 otherwise; mean binary cross-entropy over the
// C+1 channels.
double video_loss(const Tcas& tcas, std::span<const int> present_categories, double k_ratio,
                  double grad_scale = 0.0, Matrix* d_scores = nullptr);

// Pseudo background points: per gap between adjacent action points (and the
// outer gaps to the video ends), the argmax background-score snippet when it
// exceeds theta_b; ties leftmost.
std::vector<int> mine_bkg_points(const Tcas& tcas, const std::vector<PointAnnotation>& points, double theta_b);

// Focal loss over action points and pseudo background points.
double point_loss(const Tcas& tcas, const std::vector<PointAnnotation>& points, std::span<const int> bkg_points,
                  double focal_gamma, double grad_scale = 0.0, Matrix* d_scores = nullptr);

// Alignment contrast (softmax over -phi/tau across candidate categories,
// cross-entropy at the true one), mean over aligned regions. phi is
// recomputed against the current embedding (per-video centered, the same
// space the frozen sequences were built in); the gradient flows into the
// region snippets along the optimal paths and through the centering.
double opa_loss(const Matrix& embedding, std::span<const opa::FrozenRegion> regions, double tau,
                double grad_scale = 0.0, Matrix* d_embedding = nullptr);

// Focal supervision on pseudo labels: positive snippets push their category
// score to 1 and the background score to 0; negative snippets push the
// background score to 1; unlabeled snippets are excluded.
double pl_loss(const Tcas& tcas, const PseudoLabelSeq& labels, double focal_gamma, double grad_scale = 0.0,
               Matrix* d_scores = nullptr);

struct LossComponents {
    double video = 0.0;
    double point = 0.0;
    double opa = 0.0;
    double pl = 0.0;
};

double total_loss(const LossComponents& c, const LossConfig& cfg);

}  // namespace splloc::losses
