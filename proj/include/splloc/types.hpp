#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splloc/matrix.hpp"

namespace splloc {

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Stream { appearance, motion };

// Per-video T x D snippet embedding for one stream.
struct FeatureSequence {
    Matrix data;
    Stream stream = Stream::appearance;
    std::string video_id;
};

// Single labeled timestamp: one per action instance.
struct PointAnnotation {
    int t = 0;
    int category = 0;

    bool operator==(const PointAnnotation&) const = default;
};

// Half-open snippet interval [start, end). Used for ground truth (confidence
// ignored) and for scored proposals.
struct Segment {
    int start = 0;
    int end = 0;
    int category = 0;
    double confidence = 0.0;

    int length() const { return end - start; }
    bool operator==(const Segment&) const = default;
};

// Temporal intersection-over-union of two snippet intervals; 0 when disjoint.
double tiou(const Segment& a, const Segment& b);

// Temporal class activation sequence: T x (C+1) scores in [0,1], last column
// is the background channel.
struct Tcas {
    Matrix scores;

    int length() const { return scores.rows(); }
    int num_categories() const { return scores.cols() - 1; }
    double background(int t) const { return scores.at(t, scores.cols() - 1); }
};

enum class LabelKind { positive, negative, unlabeled };

struct PseudoLabel {
    LabelKind kind = LabelKind::unlabeled;
    int category = -1;  // valid when kind == positive

    bool operator==(const PseudoLabel&) const = default;
};

using PseudoLabelSeq = std::vector<PseudoLabel>;

// One sub-action phase of an action: feature vector plus its temporal center
// normalized to [0,1] within the source proposal.
struct SubActionPrototype {
    std::vector<double> vector;
    double position = 0.0;
    int category = 0;
    double confidence = 0.0;
};

// Prototypes extracted from one source proposal.
struct PrototypeSet {
    std::string video_id;
    int start = 0;
    int end = 0;
    double confidence = 0.0;
    std::vector<SubActionPrototype> prototypes;
};

// Per-category store of prototype sets from the k_sub highest-confidence
// proposals. Rebuilt once per epoch and shared read-only afterwards.
struct MemoryBank {
    std::vector<std::vector<PrototypeSet>> categories;

    MemoryBank() = default;
    explicit MemoryBank(int num_categories) : categories(num_categories) {}

    int num_categories() const { return static_cast<int>(categories.size()); }
    bool category_empty(int c) const { return categories[c].empty(); }

    // Category prototypes flattened in bank order (sets ordered by descending
    // confidence, prototypes in temporal order). Pointers stay valid while the
    // bank is alive.
    std::vector<const SubActionPrototype*> flattened(int c) const;
};

struct Video {
    std::string video_id;
    Matrix appearance;  // T x D_in
    Matrix motion;      // T x D_in
    std::vector<PointAnnotation> points;
    std::optional<std::vector<Segment>> ground_truth;

    int length() const { return appearance.rows(); }
};

struct Corpus {
    std::vector<Video> videos;
    int num_categories = 0;
    int feature_dim = 0;
};

// Categories present in a video according to its point annotations (sorted,
// unique).
std::vector<int> video_categories(const Video& video);

}  // namespace splloc
