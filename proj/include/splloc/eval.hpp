#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "splloc/io.hpp"
#include "splloc/types.hpp"

namespace splloc::eval {

// Average precision per category at one tIoU threshold. Categories without
// ground truth are omitted.
std::map<int, double> match_and_ap(const io::ResultsMap& proposals, const io::ResultsMap& ground_truth,
                                   double iou_thresh);

// Mean AP over categories with ground truth.
double mean_ap(const io::ResultsMap& proposals, const io::ResultsMap& ground_truth, double iou_thresh);

struct MapTable {
    std::vector<double> thresholds;
    std::vector<double> map_at;  // one per threshold
    double avg = 0.0;
};

MapTable map_table(const io::ResultsMap& proposals, const io::ResultsMap& ground_truth,
                   std::span<const double> thresholds);

// thumos: 0.3:0.1:0.7; gtea: 0.1:0.1:0.7.
std::vector<double> preset_thresholds(const std::string& preset);

std::string format_map_table(const MapTable& table);
std::string map_table_csv(const MapTable& table);

// Boundary F1 of pseudo labels against planted ground truth: positive-run
// starts/ends matched one-to-one to instance starts/ends of the same category
// within `tolerance` snippets.
double boundary_f1(const std::map<std::string, PseudoLabelSeq>& labels, const Corpus& corpus, int tolerance);

}  // namespace splloc::eval
