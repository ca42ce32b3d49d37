#pragma once

#include <span>
#include <vector>

#include "splloc/types.hpp"

namespace splloc::opa {

class BankEmpty : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Split of a video into N undetermined regions (one annotated point each) and
// N+1 background spans that jointly cover [0, T). Background spans may be
// empty when a point sits at a video edge.
struct RegionPartition {
    struct Region {
        int start = 0;
        int end = 0;
        PointAnnotation point;
    };
    std::vector<Region> undetermined;
    std::vector<std::pair<int, int>> background;  // size undetermined.size() + 1
};

// Boundaries between adjacent points are pseudo background points: the
// highest background score above theta_b, falling back to the midpoint.
// Video ends bound the outer background regions.
RegionPartition partition(int T, const std::vector<PointAnnotation>& points, const Tcas& tcas, double theta_b);

enum class ProtoKind { background, subaction };

// [background, sub-action..., background] prototype list encoding the
// expected temporal structure of one region for one category.
struct OrderedPrototypeSeq {
    Matrix items;                  // K x D
    std::vector<ProtoKind> kinds;  // size K; first and last are background
    int category = -1;

    int size() const { return items.rows(); }
};

// Per proposal snippet, the bank prototype of the category with maximum
// cosine similarity (ties to the lower bank index); consecutive duplicates
// collapsed. Throws BankEmpty when the category has no prototypes.
Matrix select_prototype_sequence(const Matrix& proposal_features, const MemoryBank& bank, int category);

// Concatenates [left background mean, selected prototypes, right background
// mean]. An empty adjacent background region is replaced by global_bkg (the
// mean over all background snippets of the video).
OrderedPrototypeSeq build_ordered(const Matrix& selected, const Matrix& left_region, const Matrix& right_region,
                                  std::span<const double> global_bkg, int category);

// Mean feature of every background span plus the global background mean
// (zero vector when the video has no background snippets at all).
struct BackgroundMeans {
    std::vector<std::vector<double>> per_span;  // empty vector for empty spans
    std::vector<double> global_mean;
};
BackgroundMeans background_means(const Matrix& features, const RegionPartition& part);

// Monotone surjective assignment of region snippets to prototypes.
struct AlignmentResult {
    std::vector<int> path;  // size M; prototype index per snippet, non-decreasing, hits 0 and K-1
    double phi = 0.0;       // cumulative cosine distance along the path
};

// Rigidly constrained DTW: cost Cos(i,j) = 1 - cosine(P_i, X_j); each snippet
// aligns to exactly one prototype, prototypes consume contiguous non-empty
// runs in order. Requires M >= K. Backtrace ties resolve toward the diagonal.
AlignmentResult constrained_dtw(const Matrix& prototypes, const Matrix& snippets);

// Alignment of one region, handling the short-region fallbacks.
struct RegionAlignment {
    enum class Status { aligned, whole_positive, skipped };
    Status status = Status::skipped;
    AlignmentResult result;   // valid when aligned
    int num_prototypes = 0;   // K after any shrinking
};

// Runs constrained_dtw after shrinking the sequence to fit: when M < K,
// interior prototypes are dropped from the rear (K never below 3); when
// M < 3 the whole region is labeled positive and alignment is skipped.
RegionAlignment align_region(const OrderedPrototypeSeq& seq, const Matrix& region_features);

// Shrunk copy of seq fitting a region of length region_len (identity when it
// already fits).
OrderedPrototypeSeq shrink_to_fit(const OrderedPrototypeSeq& seq, int region_len);

// Pseudo labels for a whole video: background spans are negative; region
// snippets aligned to interior prototypes are positive for the region's
// category, boundary-aligned snippets negative; skipped regions stay
// unlabeled except the annotated point.
PseudoLabelSeq emit_pseudo_labels(const RegionPartition& part, std::span<const RegionAlignment> alignments, int T);

// Frozen per-region alignment problem used by the contrastive loss: the
// region span, its true category, and one ordered sequence per candidate
// category (banks snapshotted, background means snapshotted, shrunk to fit).
struct FrozenRegion {
    int start = 0;
    int end = 0;
    int true_category = -1;
    std::vector<OrderedPrototypeSeq> seqs;
};

}  // namespace splloc::opa
