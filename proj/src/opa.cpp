#include "splloc/opa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace splloc::opa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Pseudo background point inside the open snippet range [lo, hi): argmax of
// the background score when it exceeds theta_b (ties leftmost), otherwise
// fallback_mid. Returns -1 for an empty range.
int boundary_snippet(const Tcas& tcas, int lo, int hi, double theta_b, int fallback_mid) {
    if (lo >= hi) return -1;
    int best = lo;
    double best_score = tcas.background(lo);
    for (int t = lo + 1; t < hi; ++t) {
        const double s = tcas.background(t);
        if (s > best_score) {
            best_score = s;
            best = t;
        }
    }
    return best_score > theta_b ? best : fallback_mid;
}

}  // namespace

RegionPartition partition(int T, const std::vector<PointAnnotation>& points, const Tcas& tcas, double theta_b) {
    if (points.empty()) throw ValidationError("partition: no point annotations");
    for (size_t i = 1; i < points.size(); ++i) {
        if (points[i].t == points[i - 1].t) {
            throw ValidationError("partition: two points in snippet " + std::to_string(points[i].t));
        }
        if (points[i].t < points[i - 1].t) throw ValidationError("partition: points not sorted");
    }
    const int n = static_cast<int>(points.size());

    RegionPartition part;
    part.background.reserve(n + 1);

    // Left outer span: boundary searched in [0, t_1).
    {
        const int t1 = points.front().t;
        const int b = boundary_snippet(tcas, 0, t1, theta_b, t1 / 2);
        part.background.emplace_back(0, b < 0 ? 0 : b + 1);
    }
    // Interior spans: boundary strictly between adjacent points.
    for (int i = 0; i + 1 < n; ++i) {
        const int a = points[i].t;
        const int b = points[i + 1].t;
        const int bound = boundary_snippet(tcas, a + 1, b, theta_b, (a + b) / 2);
        if (bound < 0) {
            part.background.emplace_back(b, b);  // adjacent points, empty span
        } else {
            part.background.emplace_back(bound, bound + 1);
        }
    }
    // Right outer span: boundary searched in (t_N, T).
    {
        const int tn = points.back().t;
        const int b = boundary_snippet(tcas, tn + 1, T, theta_b, (tn + T) / 2);
        part.background.emplace_back(b < 0 ? T : b, T);
    }

    for (int i = 0; i < n; ++i) {
        RegionPartition::Region region;
        region.start = part.background[i].second;
        region.end = part.background[i + 1].first;
        region.point = points[i];
        part.undetermined.push_back(region);
    }
    return part;
}

Matrix select_prototype_sequence(const Matrix& proposal_features, const MemoryBank& bank, int category) {
    const auto protos = bank.flattened(category);
    if (protos.empty()) {
        throw BankEmpty("memory bank has no prototypes for category " + std::to_string(category));
    }
    std::vector<int> picks;
    for (int i = 0; i < proposal_features.rows(); ++i) {
        int best = 0;
        double best_sim = -kInf;
        for (size_t j = 0; j < protos.size(); ++j) {
            const double sim = cosine_similarity(proposal_features.row(i), protos[j]->vector);
            if (sim > best_sim) {
                best_sim = sim;
                best = static_cast<int>(j);
            }
        }
        if (picks.empty() || picks.back() != best) picks.push_back(best);
    }
    Matrix out(static_cast<int>(picks.size()), proposal_features.cols());
    for (size_t r = 0; r < picks.size(); ++r) {
        const auto& vec = protos[picks[r]]->vector;
        auto row = out.row(static_cast<int>(r));
        for (int c = 0; c < out.cols(); ++c) row[c] = vec[c];
    }
    return out;
}

BackgroundMeans background_means(const Matrix& features, const RegionPartition& part) {
    BackgroundMeans out;
    out.per_span.reserve(part.background.size());
    std::vector<double> global(features.cols(), 0.0);
    int count = 0;
    for (const auto& [start, end] : part.background) {
        if (start >= end) {
            out.per_span.emplace_back();
            continue;
        }
        out.per_span.push_back(mean_rows(features, start, end));
        for (int t = start; t < end; ++t) {
            const auto row = features.row(t);
            for (int c = 0; c < features.cols(); ++c) global[c] += row[c];
        }
        count += end - start;
    }
    if (count > 0) {
        for (double& v : global) v /= static_cast<double>(count);
    }
    out.global_mean = std::move(global);
    return out;
}

OrderedPrototypeSeq build_ordered(const Matrix& selected, const Matrix& left_region, const Matrix& right_region,
                                  std::span<const double> global_bkg, int category) {
    const int d = static_cast<int>(global_bkg.size());
    const auto bkg_of = [&](const Matrix& region) -> std::vector<double> {
        if (region.rows() == 0) return {global_bkg.begin(), global_bkg.end()};
        return mean_rows(region, 0, region.rows());
    };
    const std::vector<double> left = bkg_of(left_region);
    const std::vector<double> right = bkg_of(right_region);

    OrderedPrototypeSeq seq;
    seq.category = category;
    seq.items = Matrix(selected.rows() + 2, d);
    seq.kinds.assign(selected.rows() + 2, ProtoKind::subaction);
    seq.kinds.front() = ProtoKind::background;
    seq.kinds.back() = ProtoKind::background;
    for (int c = 0; c < d; ++c) seq.items.at(0, c) = left[c];
    for (int r = 0; r < selected.rows(); ++r) {
        for (int c = 0; c < d; ++c) seq.items.at(r + 1, c) = selected.at(r, c);
    }
    for (int c = 0; c < d; ++c) seq.items.at(seq.items.rows() - 1, c) = right[c];
    return seq;
}

AlignmentResult constrained_dtw(const Matrix& prototypes, const Matrix& snippets) {
    const int k = prototypes.rows();
    const int m = snippets.rows();
    if (k < 1 || m < k) {
        throw ValidationError("constrained_dtw: need 1 <= K <= M, got K=" + std::to_string(k) +
                              " M=" + std::to_string(m));
    }

    Matrix cost(k, m);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < m; ++j) {
            cost.at(i, j) = 1.0 - cosine_similarity(prototypes.row(i), snippets.row(j));
        }
    }

    Matrix s(k, m, kInf);
    s.at(0, 0) = cost.at(0, 0);
    for (int j = 1; j < m; ++j) s.at(0, j) = cost.at(0, j) + s.at(0, j - 1);
    for (int i = 1; i < k; ++i) {
        for (int j = i; j < m; ++j) {
            const double stay = s.at(i, j - 1);
            const double step = s.at(i - 1, j - 1);
            s.at(i, j) = cost.at(i, j) + std::min(stay, step);
        }
    }

    AlignmentResult out;
    out.phi = s.at(k - 1, m - 1);
    out.path.assign(m, 0);
    int i = k - 1;
    for (int j = m - 1; j >= 0; --j) {
        out.path[j] = i;
        if (j == 0) break;
        if (i > 0 && s.at(i - 1, j - 1) <= s.at(i, j - 1)) --i;  // tie moves diagonally
    }
    return out;
}

OrderedPrototypeSeq shrink_to_fit(const OrderedPrototypeSeq& seq, int region_len) {
    const int k = seq.size();
    if (k <= region_len) return seq;
    const int keep = std::max(region_len, 3);
    OrderedPrototypeSeq out;
    out.category = seq.category;
    out.items = Matrix(keep, seq.items.cols());
    out.kinds.assign(keep, ProtoKind::subaction);
    out.kinds.front() = ProtoKind::background;
    out.kinds.back() = ProtoKind::background;
    // Keep the leading interior prototypes, dropping from the rear.
    for (int r = 0; r < keep - 1; ++r) {
        for (int c = 0; c < seq.items.cols(); ++c) out.items.at(r, c) = seq.items.at(r, c);
    }
    for (int c = 0; c < seq.items.cols(); ++c) {
        out.items.at(keep - 1, c) = seq.items.at(seq.items.rows() - 1, c);
    }
    return out;
}

RegionAlignment align_region(const OrderedPrototypeSeq& seq, const Matrix& region_features) {
    RegionAlignment out;
    const int m = region_features.rows();
    if (m < 3) {
        out.status = RegionAlignment::Status::whole_positive;
        return out;
    }
    const OrderedPrototypeSeq fitted = shrink_to_fit(seq, m);
    out.status = RegionAlignment::Status::aligned;
    out.num_prototypes = fitted.size();
    out.result = constrained_dtw(fitted.items, region_features);
    return out;
}

PseudoLabelSeq emit_pseudo_labels(const RegionPartition& part, std::span<const RegionAlignment> alignments, int T) {
    PseudoLabelSeq labels(T, PseudoLabel{LabelKind::unlabeled, -1});
    for (const auto& [start, end] : part.background) {
        for (int t = start; t < end; ++t) labels[t] = {LabelKind::negative, -1};
    }
    for (size_t n = 0; n < part.undetermined.size(); ++n) {
        const auto& region = part.undetermined[n];
        const RegionAlignment& a = alignments[n];
        switch (a.status) {
            case RegionAlignment::Status::aligned: {
                const int k = a.num_prototypes;
                for (int t = region.start; t < region.end; ++t) {
                    const int proto = a.result.path[t - region.start];
                    if (proto == 0 || proto == k - 1) {
                        labels[t] = {LabelKind::negative, -1};
                    } else {
                        labels[t] = {LabelKind::positive, region.point.category};
                    }
                }
                break;
            }
            case RegionAlignment::Status::whole_positive:
                for (int t = region.start; t < region.end; ++t) {
                    labels[t] = {LabelKind::positive, region.point.category};
                }
                break;
            case RegionAlignment::Status::skipped:
                break;
        }
        // The annotated point is ground truth and stays positive regardless
        // of where the path put it.
        labels[region.point.t] = {LabelKind::positive, region.point.category};
    }
    return labels;
}

}  // namespace splloc::opa
