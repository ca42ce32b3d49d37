#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "splloc/opa.hpp"
#include "splloc/rng.hpp"

using namespace splloc;

namespace {

Tcas flat_tcas(int T, int C, double action, double background) {
    Tcas tcas;
    tcas.scores = Matrix(T, C + 1, action);
    for (int t = 0; t < T; ++t) tcas.scores.at(t, C) = background;
    return tcas;
}

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) m.at(r, c) = rows[r][c];
    }
    return m;
}

MemoryBank bank_with_prototypes(int num_categories, int category,
                                const std::vector<std::vector<double>>& vectors) {
    MemoryBank bank(num_categories);
    PrototypeSet set;
    set.video_id = "vid";
    set.confidence = 1.0;
    for (const auto& v : vectors) {
        SubActionPrototype p;
        p.vector = v;
        p.category = category;
        set.prototypes.push_back(p);
    }
    bank.categories[category].push_back(set);
    return bank;
}

void check_partition_invariants(const opa::RegionPartition& part, int T,
                                const std::vector<PointAnnotation>& points) {
    REQUIRE(part.background.size() == part.undetermined.size() + 1);
    // interleaved spans jointly cover [0, T) without overlap
    int cursor = 0;
    for (size_t n = 0; n < part.undetermined.size(); ++n) {
        CHECK(part.background[n].first == cursor);
        CHECK(part.background[n].second >= part.background[n].first);
        CHECK(part.undetermined[n].start == part.background[n].second);
        CHECK(part.undetermined[n].end >= part.undetermined[n].start);
        cursor = part.undetermined[n].end;
    }
    CHECK(part.background.back().first == cursor);
    CHECK(part.background.back().second == T);
    // each region holds its own point and no other
    for (size_t n = 0; n < part.undetermined.size(); ++n) {
        CHECK(part.undetermined[n].start <= points[n].t);
        CHECK(points[n].t < part.undetermined[n].end);
    }
}

}  // namespace

TEST_CASE("partition with one point and low background scores uses midpoints") {
    const Tcas tcas = flat_tcas(10, 2, 0.2, 0.1);
    const std::vector<PointAnnotation> points = {{5, 0}};
    const opa::RegionPartition part = opa::partition(10, points, tcas, 0.5);
    REQUIRE(part.undetermined.size() == 1);
    CHECK(part.background[0] == std::pair<int, int>{0, 3});
    CHECK(part.undetermined[0].start == 3);
    CHECK(part.undetermined[0].end == 7);
    CHECK(part.background[1] == std::pair<int, int>{7, 10});
    check_partition_invariants(part, 10, points);
}

TEST_CASE("partition places the boundary at a confident background peak") {
    Tcas tcas = flat_tcas(12, 2, 0.2, 0.1);
    tcas.scores.at(7, 2) = 0.9;
    const std::vector<PointAnnotation> points = {{4, 0}, {10, 1}};
    const opa::RegionPartition part = opa::partition(12, points, tcas, 0.5);
    REQUIRE(part.undetermined.size() == 2);
    CHECK(part.background[1] == std::pair<int, int>{7, 8});
    CHECK(part.undetermined[0].end == 7);
    CHECK(part.undetermined[1].start == 8);
    check_partition_invariants(part, 12, points);
}

TEST_CASE("partition rejects duplicate points") {
    const Tcas tcas = flat_tcas(10, 1, 0.2, 0.1);
    CHECK_THROWS_AS(opa::partition(10, {{4, 0}, {4, 0}}, tcas, 0.5), ValidationError);
}

TEST_CASE("partition covers every video disjointly") {
    Rng rng(101);
    for (int trial = 0; trial < 500; ++trial) {
        const int T = rng.uniform_int(3, 60);
        Tcas tcas;
        tcas.scores = Matrix(T, 3);
        for (double& v : tcas.scores.values()) v = rng.uniform();
        // random strictly increasing points
        const int n_points = rng.uniform_int(1, std::min(4, T));
        std::vector<int> ts;
        while (static_cast<int>(ts.size()) < n_points) {
            const int t = rng.uniform_int(0, T - 1);
            bool dup = false;
            for (int u : ts) dup |= u == t;
            if (!dup) ts.push_back(t);
        }
        std::sort(ts.begin(), ts.end());
        std::vector<PointAnnotation> points;
        for (int t : ts) points.push_back({t, rng.uniform_int(0, 1)});
        const opa::RegionPartition part = opa::partition(T, points, tcas, 0.5);
        check_partition_invariants(part, T, points);
    }
}

TEST_CASE("prototype selection collapses consecutive duplicates only") {
    const std::vector<double> p1{1.0, 0.0};
    const std::vector<double> p2{0.0, 1.0};
    const MemoryBank bank = bank_with_prototypes(1, 0, {p1, p2});

    SUBCASE("uniform pick collapses to one") {
        const Matrix prop = from_rows({{2.0, 0.1}, {3.0, 0.2}, {1.0, 0.0}});
        const Matrix sel = opa::select_prototype_sequence(prop, bank, 0);
        REQUIRE(sel.rows() == 1);
        CHECK(sel.at(0, 0) == 1.0);
    }
    SUBCASE("non-consecutive repeats survive") {
        const Matrix prop = from_rows({{1.0, 0.0}, {1.0, 0.1}, {0.0, 1.0}, {1.0, 0.0}});
        const Matrix sel = opa::select_prototype_sequence(prop, bank, 0);
        REQUIRE(sel.rows() == 3);
        CHECK(sel.at(0, 0) == 1.0);
        CHECK(sel.at(1, 1) == 1.0);
        CHECK(sel.at(2, 0) == 1.0);
    }
    SUBCASE("similarity ties pick the lower bank index") {
        const MemoryBank tied = bank_with_prototypes(1, 0, {{1.0, 0.0}, {2.0, 0.0}});
        const Matrix prop = from_rows({{3.0, 0.0}});
        const Matrix sel = opa::select_prototype_sequence(prop, tied, 0);
        REQUIRE(sel.rows() == 1);
        CHECK(sel.at(0, 0) == 1.0);  // first prototype wins the tie
    }
    SUBCASE("empty bank raises") {
        const MemoryBank empty(2);
        const Matrix prop = from_rows({{1.0, 0.0}});
        CHECK_THROWS_AS(opa::select_prototype_sequence(prop, empty, 1), opa::BankEmpty);
    }
}

TEST_CASE("ordered sequences are background-action-background") {
    const Matrix selected = from_rows({{5.0, 5.0}});
    const Matrix left = from_rows({{1.0, 0.0}, {1.0, 0.0}});
    const Matrix right = from_rows({{0.0, 2.0}});
    const std::vector<double> global_bkg{9.0, 9.0};
    const opa::OrderedPrototypeSeq seq = opa::build_ordered(selected, left, right, global_bkg, 0);
    REQUIRE(seq.size() == 3);
    CHECK(seq.kinds.front() == opa::ProtoKind::background);
    CHECK(seq.kinds[1] == opa::ProtoKind::subaction);
    CHECK(seq.kinds.back() == opa::ProtoKind::background);
    CHECK(seq.items.at(0, 0) == 1.0);  // mean of two identical rows
    CHECK(seq.items.at(1, 0) == 5.0);
    CHECK(seq.items.at(2, 1) == 2.0);

    SUBCASE("empty adjacent region falls back to the global background") {
        const Matrix empty(0, 2);
        const opa::OrderedPrototypeSeq fallback = opa::build_ordered(selected, empty, right, global_bkg, 0);
        CHECK(fallback.items.at(0, 0) == 9.0);
    }
    SUBCASE("K is always the selection length plus two") {
        for (int n = 1; n <= 4; ++n) {
            Matrix sel(n, 2, 1.0);
            CHECK(opa::build_ordered(sel, left, right, global_bkg, 0).size() == n + 2);
        }
    }
}

TEST_CASE("degenerate single-prototype recursion sums the costs") {
    const Matrix proto = from_rows({{1.0, 0.0}});
    const Matrix snippets = from_rows({{2.0, 0.0}, {1.0, 0.0}, {0.5, 0.0}});
    const opa::AlignmentResult r = opa::constrained_dtw(proto, snippets);
    CHECK(r.phi == doctest::Approx(0.0));  // all colinear
    CHECK(r.path == std::vector<int>{0, 0, 0});

    const Matrix mixed = from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const opa::AlignmentResult r2 = opa::constrained_dtw(proto, mixed);
    CHECK(r2.phi == doctest::Approx(1.0));  // 0 + (1 - 0)
}

TEST_CASE("alignment picks the best contiguous split") {
    const Matrix protos = from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const Matrix snippets = from_rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    const opa::AlignmentResult r = opa::constrained_dtw(protos, snippets);
    CHECK(r.phi == doctest::Approx(0.0));
    CHECK(r.path == std::vector<int>{0, 0, 1});
}

TEST_CASE("alignment equals the brute-force contiguous-partition minimum") {
    Rng rng(271);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = rng.uniform_int(1, 5);
        const int m = rng.uniform_int(k, 10);
        const int d = rng.uniform_int(1, 4);
        Matrix protos(k, d), snippets(m, d);
        for (double& v : protos.values()) v = rng.normal();
        for (double& v : snippets.values()) v = rng.normal();

        const opa::AlignmentResult got = opa::constrained_dtw(protos, snippets);
        const oracle::BruteForceAlignment want = oracle::brute_force_alignment(protos, snippets);
        CHECK(got.phi == want.phi);  // exactly: same additions, same order

        // path invariants and cost
        CHECK(got.path.front() == 0);
        CHECK(got.path.back() == k - 1);
        double path_cost = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j > 0) {
                CHECK(got.path[j] >= got.path[j - 1]);
                CHECK(got.path[j] - got.path[j - 1] <= 1);
            }
            path_cost += 1.0 - cosine_similarity(protos.row(got.path[j]), snippets.row(j));
        }
        CHECK(path_cost == want.phi);
    }
}

TEST_CASE("zero-norm snippets cost a full cosine unit") {
    const Matrix protos = from_rows({{0.0, 0.0}});
    const Matrix snippets = from_rows({{1.0, 1.0}, {0.0, 0.0}});
    const opa::AlignmentResult r = opa::constrained_dtw(protos, snippets);
    CHECK(r.phi == doctest::Approx(2.0));
}

TEST_CASE("sequences shrink from the rear interior to fit short regions") {
    opa::OrderedPrototypeSeq seq;
    seq.items = from_rows({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {9.0, 9.0}});
    seq.kinds = {opa::ProtoKind::background, opa::ProtoKind::subaction, opa::ProtoKind::subaction,
                 opa::ProtoKind::subaction, opa::ProtoKind::background};
    seq.category = 0;
    const opa::OrderedPrototypeSeq fit = opa::shrink_to_fit(seq, 4);
    REQUIRE(fit.size() == 4);
    CHECK(fit.items.at(0, 0) == 0.0);
    CHECK(fit.items.at(1, 0) == 1.0);
    CHECK(fit.items.at(2, 0) == 2.0);  // rear interior prototype dropped
    CHECK(fit.items.at(3, 0) == 9.0);
    CHECK(fit.kinds.back() == opa::ProtoKind::background);

    const opa::OrderedPrototypeSeq min_fit = opa::shrink_to_fit(seq, 2);
    CHECK(min_fit.size() == 3);  // never below background-action-background
}

TEST_CASE("regions shorter than three snippets are labeled whole-positive") {
    opa::OrderedPrototypeSeq seq;
    seq.items = from_rows({{0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}});
    seq.kinds = {opa::ProtoKind::background, opa::ProtoKind::subaction, opa::ProtoKind::background};
    const Matrix region = from_rows({{1.0, 0.0}, {1.0, 0.0}});
    const opa::RegionAlignment r = opa::align_region(seq, region);
    CHECK(r.status == opa::RegionAlignment::Status::whole_positive);
}

TEST_CASE("pseudo labels follow the alignment path") {
    opa::RegionPartition part;
    part.background = {{0, 2}, {6, 8}};
    part.undetermined = {{2, 6, {3, 1}}};

    std::vector<opa::RegionAlignment> alignments(1);
    alignments[0].status = opa::RegionAlignment::Status::aligned;
    alignments[0].num_prototypes = 3;
    alignments[0].result.path = {0, 1, 1, 2};

    const PseudoLabelSeq labels = opa::emit_pseudo_labels(part, alignments, 8);
    REQUIRE(labels.size() == 8);
    CHECK(labels[0].kind == LabelKind::negative);
    CHECK(labels[1].kind == LabelKind::negative);
    CHECK(labels[2].kind == LabelKind::negative);  // aligned to the left background prototype
    CHECK(labels[3].kind == LabelKind::positive);
    CHECK(labels[3].category == 1);
    CHECK(labels[4].kind == LabelKind::positive);
    CHECK(labels[5].kind == LabelKind::negative);  // aligned to the right background prototype
    CHECK(labels[6].kind == LabelKind::negative);
    CHECK(labels[7].kind == LabelKind::negative);
}

TEST_CASE("skipped regions stay unlabeled except the annotated point") {
    opa::RegionPartition part;
    part.background = {{0, 1}, {5, 6}};
    part.undetermined = {{1, 5, {2, 0}}};
    std::vector<opa::RegionAlignment> alignments(1);  // skipped by default
    const PseudoLabelSeq labels = opa::emit_pseudo_labels(part, alignments, 6);
    CHECK(labels[1].kind == LabelKind::unlabeled);
    CHECK(labels[2].kind == LabelKind::positive);
    CHECK(labels[2].category == 0);
    CHECK(labels[3].kind == LabelKind::unlabeled);
    CHECK(labels[0].kind == LabelKind::negative);
    CHECK(labels[5].kind == LabelKind::negative);
}

TEST_CASE("positives never leak outside undetermined regions") {
    Rng rng(331);
    for (int trial = 0; trial < 500; ++trial) {
        const int T = rng.uniform_int(6, 40);
        Tcas tcas;
        tcas.scores = Matrix(T, 2);
        for (double& v : tcas.scores.values()) v = rng.uniform();
        std::vector<int> ts;
        const int n_points = rng.uniform_int(1, 3);
        while (static_cast<int>(ts.size()) < n_points) {
            const int t = rng.uniform_int(0, T - 1);
            bool dup = false;
            for (int u : ts) dup |= u == t;
            if (!dup) ts.push_back(t);
        }
        std::sort(ts.begin(), ts.end());
        std::vector<PointAnnotation> points;
        for (int t : ts) points.push_back({t, 0});
        const opa::RegionPartition part = opa::partition(T, points, tcas, 0.5);

        // random alignment outcomes
        std::vector<opa::RegionAlignment> alignments(part.undetermined.size());
        for (size_t n = 0; n < alignments.size(); ++n) {
            const int m = part.undetermined[n].end - part.undetermined[n].start;
            const int pick = rng.uniform_int(0, 2);
            if (pick == 0 || m < 3) {
                alignments[n].status = m >= 1 && pick == 1 ? opa::RegionAlignment::Status::whole_positive
                                                           : opa::RegionAlignment::Status::skipped;
                continue;
            }
            alignments[n].status = opa::RegionAlignment::Status::aligned;
            const int k = 3;
            alignments[n].num_prototypes = k;
            // random monotone surjective path
            std::vector<int> path(m, 0);
            int b1 = rng.uniform_int(1, m - 2);
            int b2 = rng.uniform_int(b1 + 1, m - 1);
            for (int j = 0; j < m; ++j) path[j] = j < b1 ? 0 : (j < b2 ? 1 : 2);
            alignments[n].result.path = path;
        }
        const PseudoLabelSeq labels = opa::emit_pseudo_labels(part, alignments, T);
        for (int t = 0; t < T; ++t) {
            if (labels[t].kind != LabelKind::positive) continue;
            bool inside = false;
            for (const auto& region : part.undetermined) {
                inside |= t >= region.start && t < region.end;
            }
            CHECK(inside);
        }
        // the annotated point is always positive
        for (size_t n = 0; n < part.undetermined.size(); ++n) {
            const int t = part.undetermined[n].point.t;
            CHECK(labels[t].kind == LabelKind::positive);
            CHECK(labels[t].category == part.undetermined[n].point.category);
        }
    }
}
