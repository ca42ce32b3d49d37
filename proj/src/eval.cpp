#include "splloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace splloc::eval {

namespace {

struct RankedProposal {
    const std::string* video_id;
    const Segment* segment;
};

using uint128 = unsigned __int128;

uint128 gcd128(uint128 a, uint128 b) {
    while (b != 0) {
        const uint128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

// All-point interpolated AP. The sum is kept as an exact reduced fraction for
// as long as it fits, so small hand cases come out correctly rounded; large
// inputs fall back to double accumulation.
double ap_from_flags(const std::vector<char>& is_tp, int n_positive) {
    if (n_positive == 0) return 0.0;
    const int n = static_cast<int>(is_tp.size());

    // precision envelope from the right, as exact fractions cum_tp / rank
    std::vector<std::pair<long long, long long>> env(n);
    {
        std::vector<long long> cum(n);
        long long tp = 0;
        for (int i = 0; i < n; ++i) {
            if (is_tp[i]) ++tp;
            cum[i] = tp;
        }
        long long best_num = 0, best_den = 1;
        for (int i = n - 1; i >= 0; --i) {
            const long long rank = i + 1;
            if (static_cast<uint128>(cum[i]) * best_den > static_cast<uint128>(best_num) * rank) {
                best_num = cum[i];
                best_den = rank;
            }
            env[i] = {best_num, best_den};
        }
    }

    uint128 num = 0, den = 1;
    bool exact = true;
    double approx = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!is_tp[i]) continue;
        approx += static_cast<double>(env[i].first) / static_cast<double>(env[i].second);
        if (!exact) continue;
        const uint128 a = env[i].first;
        const uint128 b = env[i].second;
        uint128 t1, t2, nden;
        if (__builtin_mul_overflow(num, b, &t1) || __builtin_mul_overflow(a, den, &t2) ||
            __builtin_add_overflow(t1, t2, &t1) || __builtin_mul_overflow(den, b, &nden)) {
            exact = false;
            continue;
        }
        num = t1;
        den = nden;
        const uint128 g = gcd128(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    if (exact) {
        uint128 total_den;
        const uint128 limit = static_cast<uint128>(1) << 53;
        if (!__builtin_mul_overflow(den, static_cast<uint128>(n_positive), &total_den) && num <= limit &&
            total_den <= limit) {
            return static_cast<double>(static_cast<unsigned long long>(num)) /
                   static_cast<double>(static_cast<unsigned long long>(total_den));
        }
    }
    return approx / n_positive;
}

}  // namespace

std::map<int, double> match_and_ap(const io::ResultsMap& proposals, const io::ResultsMap& ground_truth,
                                   double iou_thresh) {
    std::set<int> categories;
    for (const auto& [vid, segs] : ground_truth) {
        for (const Segment& s : segs) categories.insert(s.category);
    }

    std::map<int, double> ap;
    for (int c : categories) {
        int n_positive = 0;
        std::map<std::string, std::vector<const Segment*>> gt_by_video;
        for (const auto& [vid, segs] : ground_truth) {
            for (const Segment& s : segs) {
                if (s.category == c) {
                    gt_by_video[vid].push_back(&s);
                    ++n_positive;
                }
            }
        }

        std::vector<RankedProposal> ranked;
        for (const auto& [vid, segs] : proposals) {
            for (const Segment& s : segs) {
                if (s.category == c) ranked.push_back({&vid, &s});
            }
        }
        std::sort(ranked.begin(), ranked.end(), [](const RankedProposal& a, const RankedProposal& b) {
            if (a.segment->confidence != b.segment->confidence) {
                return a.segment->confidence > b.segment->confidence;
            }
            return std::tie(*a.video_id, a.segment->start) < std::tie(*b.video_id, b.segment->start);
        });

        std::map<std::string, std::vector<char>> matched;
        for (const auto& [vid, segs] : gt_by_video) matched[vid].assign(segs.size(), 0);

        std::vector<char> is_tp;
        is_tp.reserve(ranked.size());
        for (const RankedProposal& rp : ranked) {
            const auto it = gt_by_video.find(*rp.video_id);
            int best = -1;
            double best_iou = 0.0;
            if (it != gt_by_video.end()) {
                for (size_t g = 0; g < it->second.size(); ++g) {
                    if (matched[*rp.video_id][g]) continue;
                    const double iou = tiou(*rp.segment, *it->second[g]);
                    if (iou >= iou_thresh && iou > best_iou) {
                        best_iou = iou;
                        best = static_cast<int>(g);
                    }
                }
            }
            if (best >= 0) {
                matched[*rp.video_id][best] = 1;
                is_tp.push_back(1);
            } else {
                is_tp.push_back(0);
            }
        }
        ap[c] = ap_from_flags(is_tp, n_positive);
    }
    return ap;
}

double mean_ap(const io::ResultsMap& proposals, const io::ResultsMap& ground_truth, double iou_thresh) {
    const auto ap = match_and_ap(proposals, ground_truth, iou_thresh);
    if (ap.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [c, v] : ap) sum += v;
    return sum / ap.size();
}

MapTable map_table(const io::ResultsMap& proposals, const io::ResultsMap& ground_truth,
                   std::span<const double> thresholds) {
    MapTable table;
    table.thresholds.assign(thresholds.begin(), thresholds.end());
    for (double t : thresholds) table.map_at.push_back(mean_ap(proposals, ground_truth, t));
    if (!table.map_at.empty()) {
        double sum = 0.0;
        for (double v : table.map_at) sum += v;
        table.avg = sum / table.map_at.size();
    }
    return table;
}

std::vector<double> preset_thresholds(const std::string& preset) {
    if (preset == "thumos") return {0.3, 0.4, 0.5, 0.6, 0.7};
    if (preset == "gtea") return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    throw ValidationError("unknown preset '" + preset + "' (expected thumos or gtea)");
}

std::string format_map_table(const MapTable& table) {
    std::string out;
    char buf[64];
    for (double t : table.thresholds) {
        std::snprintf(buf, sizeof(buf), "mAP@%.1f  ", t);
        out += buf;
    }
    out += "AVG\n";
    for (double v : table.map_at) {
        std::snprintf(buf, sizeof(buf), "%7.2f  ", 100.0 * v);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%6.2f\n", 100.0 * table.avg);
    out += buf;
    return out;
}

std::string map_table_csv(const MapTable& table) {
    std::string header, row;
    char buf[64];
    for (size_t i = 0; i < table.thresholds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "map_%.1f,", table.thresholds[i]);
        header += buf;
        std::snprintf(buf, sizeof(buf), "%.6f,", 100.0 * table.map_at[i]);
        row += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.6f\n", 100.0 * table.avg);
    return header + "avg\n" + row + buf;
}

namespace {

struct BoundaryEvent {
    int t = 0;
    int category = 0;
    bool is_start = false;
};

std::vector<BoundaryEvent> label_boundaries(const PseudoLabelSeq& labels) {
    std::vector<BoundaryEvent> events;
    const int T = static_cast<int>(labels.size());
    for (int t = 0; t < T; ++t) {
        const bool pos = labels[t].kind == LabelKind::positive;
        const bool prev_same = t > 0 && labels[t - 1].kind == LabelKind::positive &&
                               labels[t - 1].category == labels[t].category;
        if (pos && !prev_same) events.push_back({t, labels[t].category, true});
        if (pos) {
            const bool next_same = t + 1 < T && labels[t + 1].kind == LabelKind::positive &&
                                   labels[t + 1].category == labels[t].category;
            if (!next_same) events.push_back({t + 1, labels[t].category, false});
        }
    }
    return events;
}

}  // namespace

double boundary_f1(const std::map<std::string, PseudoLabelSeq>& labels, const Corpus& corpus, int tolerance) {
    int n_pred = 0, n_gt = 0, n_matched = 0;
    for (const Video& video : corpus.videos) {
        if (!video.ground_truth) continue;
        std::vector<BoundaryEvent> gt_events;
        for (const Segment& s : *video.ground_truth) {
            gt_events.push_back({s.start, s.category, true});
            gt_events.push_back({s.end, s.category, false});
        }
        n_gt += static_cast<int>(gt_events.size());

        const auto it = labels.find(video.video_id);
        if (it == labels.end()) continue;
        std::vector<BoundaryEvent> pred_events = label_boundaries(it->second);
        n_pred += static_cast<int>(pred_events.size());

        std::vector<char> used(gt_events.size(), 0);
        for (const BoundaryEvent& p : pred_events) {
            int best = -1;
            int best_dist = tolerance + 1;
            for (size_t g = 0; g < gt_events.size(); ++g) {
                if (used[g] || gt_events[g].category != p.category || gt_events[g].is_start != p.is_start) continue;
                const int dist = std::abs(gt_events[g].t - p.t);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = static_cast<int>(g);
                }
            }
            if (best >= 0) {
                used[best] = 1;
                ++n_matched;
            }
        }
    }
    if (n_pred + n_gt == 0) return 1.0;
    return 2.0 * n_matched / static_cast<double>(n_pred + n_gt);
}

}  // namespace splloc::eval
