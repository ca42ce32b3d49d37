#include "splloc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splloc/opa.hpp"

namespace splloc::losses {

namespace {

double clamp_prob(double p) { return std::min(std::max(p, kProbEps), 1.0 - kProbEps); }

bool clamped(double p) { return p <= kProbEps || p >= 1.0 - kProbEps; }

// -(1-p)^g log p and its derivative in p.
double focal_term(double p, double g) {
    const double q = clamp_prob(p);
    return -std::pow(1.0 - q, g) * std::log(q);
}

double focal_term_grad(double p, double g) {
    if (clamped(p)) return 0.0;
    const double one_minus = 1.0 - p;
    double d = -std::pow(one_minus, g) / p;
    if (g != 0.0) d += g * std::pow(one_minus, g - 1.0) * std::log(p);
    return d;
}

}  // namespace

double video_loss(const Tcas& tcas, std::span<const int> present_categories, double k_ratio, double grad_scale,
                  Matrix* d_scores) {
    const int T = tcas.length();
    const int channels = tcas.scores.cols();
    const int k = std::max(1, static_cast<int>(k_ratio * T));

    std::vector<char> present(channels, 0);
    for (int c : present_categories) present[c] = 1;
    present[channels - 1] = 1;  // background channel is always present

    std::vector<int> order(T);
    double loss = 0.0;
    for (int c = 0; c < channels; ++c) {
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
            if (tcas.scores.at(a, c) != tcas.scores.at(b, c)) return tcas.scores.at(a, c) > tcas.scores.at(b, c);
            return a < b;
        });
        double v = 0.0;
        for (int i = 0; i < k; ++i) v += tcas.scores.at(order[i], c);
        v /= k;
        const double target = present[c] ? 1.0 : 0.0;
        const double q = clamp_prob(v);
        loss += -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
        if (d_scores && !clamped(v)) {
            const double dv = (-target / v + (1.0 - target) / (1.0 - v)) / channels;
            const double per_snippet = grad_scale * dv / k;
            for (int i = 0; i < k; ++i) d_scores->at(order[i], c) += per_snippet;
        }
    }
    return loss / channels;
}

std::vector<int> mine_bkg_points(const Tcas& tcas, const std::vector<PointAnnotation>& points, double theta_b) {
    const int T = tcas.length();
    std::vector<std::pair<int, int>> gaps;
    if (points.empty()) {
        gaps.emplace_back(0, T);
    } else {
        gaps.emplace_back(0, points.front().t);
        for (size_t i = 0; i + 1 < points.size(); ++i) gaps.emplace_back(points[i].t + 1, points[i + 1].t);
        gaps.emplace_back(points.back().t + 1, T);
    }
    std::vector<int> out;
    for (const auto& [lo, hi] : gaps) {
        int best = -1;
        double best_score = theta_b;
        for (int t = lo; t < hi; ++t) {
            const double s = tcas.background(t);
            if (s > best_score) {
                best_score = s;
                best = t;
            }
        }
        if (best >= 0) out.push_back(best);
    }
    return out;
}

double point_loss(const Tcas& tcas, const std::vector<PointAnnotation>& points, std::span<const int> bkg_points,
                  double focal_gamma, double grad_scale, Matrix* d_scores) {
    const int bkg_channel = tcas.scores.cols() - 1;
    const size_t n = points.size() + bkg_points.size();
    if (n == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    const auto add = [&](int t, int c) {
        const double p = tcas.scores.at(t, c);
        loss += focal_term(p, focal_gamma);
        if (d_scores) d_scores->at(t, c) += grad_scale * inv * focal_term_grad(p, focal_gamma);
    };
    for (const PointAnnotation& p : points) {
        add(p.t, p.category);
        // Action points also suppress the background channel; without this
        // the background score has no downward supervision anywhere and
        // saturates, which breaks region partition and background mining.
        const double pb = tcas.scores.at(p.t, bkg_channel);
        loss += focal_term(1.0 - pb, focal_gamma);
        if (d_scores) {
            d_scores->at(p.t, bkg_channel) -= grad_scale * inv * focal_term_grad(1.0 - pb, focal_gamma);
        }
    }
    for (int t : bkg_points) add(t, bkg_channel);
    return loss * inv;
}

double opa_loss(const Matrix& embedding, std::span<const opa::FrozenRegion> regions, double tau, double grad_scale,
                Matrix* d_embedding) {
    int counted = 0;
    for (const opa::FrozenRegion& region : regions) {
        for (const auto& seq : region.seqs) {
            if (seq.category == region.true_category) {
                ++counted;
                break;
            }
        }
    }
    if (counted == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(counted);

    // Cosine geometry lives in the video-centered embedding space; gradients
    // go through the centering at the end.
    const Matrix centered = center_rows(embedding);
    Matrix d_centered;
    if (d_embedding) d_centered = Matrix(embedding.rows(), embedding.cols());

    double loss = 0.0;
    for (const opa::FrozenRegion& region : regions) {
        const Matrix snippets = slice_rows(centered, region.start, region.end);
        const int n_cats = static_cast<int>(region.seqs.size());
        std::vector<opa::AlignmentResult> aligns(n_cats);
        int true_idx = -1;
        for (int c = 0; c < n_cats; ++c) {
            aligns[c] = opa::constrained_dtw(region.seqs[c].items, snippets);
            if (region.seqs[c].category == region.true_category) true_idx = c;
        }
        if (true_idx < 0) continue;  // no bank for the true category

        // softmax over -phi/tau; loss_n = -log p_true
        double max_logit = -std::numeric_limits<double>::infinity();
        for (const auto& a : aligns) max_logit = std::max(max_logit, -a.phi / tau);
        double denom = 0.0;
        std::vector<double> probs(n_cats);
        for (int c = 0; c < n_cats; ++c) {
            probs[c] = std::exp(-aligns[c].phi / tau - max_logit);
            denom += probs[c];
        }
        for (double& p : probs) p /= denom;
        loss += -std::log(std::max(probs[true_idx], 1e-300)) * inv;

        if (d_embedding) {
            for (int c = 0; c < n_cats; ++c) {
                const double dphi = inv * ((c == true_idx ? 1.0 : 0.0) - probs[c]) / tau;
                if (dphi == 0.0) continue;
                const Matrix& protos = region.seqs[c].items;
                for (int j = 0; j < snippets.rows(); ++j) {
                    const auto x = snippets.row(j);
                    const auto p = protos.row(aligns[c].path[j]);
                    const double nx = norm(x);
                    const double np = norm(p);
                    if (nx == 0.0 || np == 0.0) continue;  // constant cost, no gradient
                    const double cos = dot(p, x) / (np * nx);
                    // d(1 - cos)/dx = -p/(|p||x|) + cos * x/|x|^2
                    auto dst = d_centered.row(region.start + j);
                    for (int d = 0; d < protos.cols(); ++d) {
                        dst[d] += dphi * (-p[d] / (np * nx) + cos * x[d] / (nx * nx));
                    }
                }
            }
        }
    }
    if (d_embedding) {
        // x_centered = x - mean, so d/dx = g - colmean(g) over all rows.
        std::vector<double> mean(embedding.cols(), 0.0);
        for (int t = 0; t < d_centered.rows(); ++t) {
            const auto g = d_centered.row(t);
            for (int c = 0; c < d_centered.cols(); ++c) mean[c] += g[c];
        }
        for (double& v : mean) v /= d_centered.rows();
        for (int t = 0; t < d_centered.rows(); ++t) {
            const auto g = d_centered.row(t);
            auto dst = d_embedding->row(t);
            for (int c = 0; c < d_centered.cols(); ++c) dst[c] += grad_scale * (g[c] - mean[c]);
        }
    }
    return loss;
}

double pl_loss(const Tcas& tcas, const PseudoLabelSeq& labels, double focal_gamma, double grad_scale,
               Matrix* d_scores) {
    const int bkg_channel = tcas.scores.cols() - 1;
    int n_labeled = 0;
    for (const PseudoLabel& l : labels) {
        if (l.kind != LabelKind::unlabeled) ++n_labeled;
    }
    if (n_labeled == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(n_labeled);
    double loss = 0.0;
    for (size_t t = 0; t < labels.size(); ++t) {
        const PseudoLabel& l = labels[t];
        if (l.kind == LabelKind::unlabeled) continue;
        if (l.kind == LabelKind::positive) {
            const double pc = tcas.scores.at(static_cast<int>(t), l.category);
            const double pb = tcas.scores.at(static_cast<int>(t), bkg_channel);
            loss += focal_term(pc, focal_gamma) + focal_term(1.0 - pb, focal_gamma);
            if (d_scores) {
                d_scores->at(static_cast<int>(t), l.category) +=
                    grad_scale * inv * focal_term_grad(pc, focal_gamma);
                d_scores->at(static_cast<int>(t), bkg_channel) -=
                    grad_scale * inv * focal_term_grad(1.0 - pb, focal_gamma);
            }
        } else {
            const double pb = tcas.scores.at(static_cast<int>(t), bkg_channel);
            loss += focal_term(pb, focal_gamma);
            if (d_scores) {
                d_scores->at(static_cast<int>(t), bkg_channel) += grad_scale * inv * focal_term_grad(pb, focal_gamma);
            }
            // Background snippets also suppress every action channel; this is
            // the score-contrast half of the supervision, without which
            // category scores on background never sink and full-video spans
            // keep competitive confidences.
            for (int c = 0; c < bkg_channel; ++c) {
                const double pc = tcas.scores.at(static_cast<int>(t), c);
                loss += focal_term(1.0 - pc, focal_gamma);
                if (d_scores) {
                    d_scores->at(static_cast<int>(t), c) -= grad_scale * inv * focal_term_grad(1.0 - pc, focal_gamma);
                }
            }
        }
    }
    return loss * inv;
}

double total_loss(const LossComponents& c, const LossConfig& cfg) {
    return cfg.lambda1 * c.video + cfg.lambda2 * c.point + cfg.lambda3 * c.opa + cfg.lambda4 * c.pl;
}

}  // namespace splloc::losses
