#include "splloc/infer.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace splloc::infer {

std::vector<Segment> threshold_proposals(const Tcas& tcas, std::span<const double> thresholds) {
    const int T = tcas.length();
    const int C = tcas.num_categories();
    std::set<std::tuple<int, int, int>> seen;  // (category, start, end)
    std::vector<Segment> out;
    for (int c = 0; c < C; ++c) {
        for (double theta : thresholds) {
            int run_start = -1;
            for (int t = 0; t <= T; ++t) {
                const bool on = t < T && tcas.scores.at(t, c) >= theta;
                if (on && run_start < 0) run_start = t;
                if (!on && run_start >= 0) {
                    if (seen.emplace(c, run_start, t).second) {
                        out.push_back({run_start, t, c, 0.0});
                    }
                    run_start = -1;
                }
            }
        }
    }
    return out;
}

double oic_score(const Segment& proposal, const Tcas& tcas, double margin_ratio) {
    const int T = tcas.length();
    const int c = proposal.category;
    double inner = 0.0;
    for (int t = proposal.start; t < proposal.end; ++t) inner += tcas.scores.at(t, c);
    inner /= proposal.length();

    const int margin = std::max(1, static_cast<int>(proposal.length() * margin_ratio));
    double outer = 0.0;
    int outer_count = 0;
    for (int t = std::max(0, proposal.start - margin); t < proposal.start; ++t) {
        outer += tcas.scores.at(t, c);
        ++outer_count;
    }
    for (int t = proposal.end; t < std::min(T, proposal.end + margin); ++t) {
        outer += tcas.scores.at(t, c);
        ++outer_count;
    }
    const double outer_mean = outer_count > 0 ? outer / outer_count : 0.0;
    return inner - outer_mean;
}

std::vector<Segment> nms(std::vector<Segment> proposals, double iou_thresh) {
    std::sort(proposals.begin(), proposals.end(), [](const Segment& a, const Segment& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return std::tie(a.start, a.end) < std::tie(b.start, b.end);
    });
    std::vector<Segment> kept;
    std::vector<char> dead(proposals.size(), 0);
    for (size_t i = 0; i < proposals.size(); ++i) {
        if (dead[i]) continue;
        kept.push_back(proposals[i]);
        for (size_t j = i + 1; j < proposals.size(); ++j) {
            if (dead[j] || proposals[j].category != proposals[i].category) continue;
            if (tiou(proposals[i], proposals[j]) > iou_thresh) dead[j] = 1;
        }
    }
    return kept;
}

std::vector<Segment> run_inference(const Tcas& tcas, const InferConfig& cfg) {
    std::vector<Segment> proposals = threshold_proposals(tcas, cfg.thresholds);
    for (Segment& p : proposals) p.confidence = oic_score(p, tcas, cfg.margin_ratio);
    return nms(std::move(proposals), cfg.nms_tiou);
}

}  // namespace splloc::infer
