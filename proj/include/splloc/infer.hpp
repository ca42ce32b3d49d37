#pragma once

#include <span>
#include <vector>

#include "splloc/types.hpp"

namespace splloc::infer {

struct InferConfig {
    std::vector<double> thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double nms_tiou = 0.5;
    double margin_ratio = 0.25;  // OIC outer margin as a fraction of proposal length
};

// Maximal runs of A[t][c] >= theta per category and threshold; duplicate
// (span, category) pairs merged.
std::vector<Segment> threshold_proposals(const Tcas& tcas, std::span<const double> thresholds);

// Outer-inner contrast: mean inner score minus mean score over the flanking
// margins of length max(1, floor(len * margin_ratio)), clipped to the video;
// an empty margin set contributes 0.
double oic_score(const Segment& proposal, const Tcas& tcas, double margin_ratio);

// Greedy per-category NMS by descending confidence (ties by (start, end)).
std::vector<Segment> nms(std::vector<Segment> proposals, double iou_thresh);

// threshold -> OIC -> NMS.
std::vector<Segment> run_inference(const Tcas& tcas, const InferConfig& cfg);

}  // namespace splloc::infer
