#include "splloc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "splloc/opa.hpp"
#include "splloc/parallel.hpp"
#include "splloc/rng.hpp"

namespace splloc::train {

namespace {

// Frozen per-video structures rebuilt once per post-warm-up epoch.
struct VideoStructures {
    std::vector<opa::FrozenRegion> regions;  // alignment problems for the contrast loss
    PseudoLabelSeq labels;
    bool has_labels = false;
};

// Best proposal of the point's category containing the point. Candidates are
// clipped to the region and re-scored on the clipped span, so an over-long
// span cannot outrank a tight one on confidence earned elsewhere. Falls back
// to a +-r_p window around the point.
Segment choose_region_proposal(const std::vector<Segment>& proposals, const opa::RegionPartition::Region& region,
                               int r_p, const Tcas& tcas, double margin_ratio) {
    Segment best;
    bool found = false;
    for (const Segment& p : proposals) {
        if (p.category != region.point.category) continue;
        if (p.start > region.point.t || p.end <= region.point.t) continue;
        Segment clipped = p;
        clipped.start = std::max(p.start, region.start);
        clipped.end = std::min(p.end, region.end);
        clipped.confidence = infer::oic_score(clipped, tcas, margin_ratio);
        if (!found || clipped.confidence > best.confidence ||
            (clipped.confidence == best.confidence &&
             std::tie(clipped.start, clipped.end) < std::tie(best.start, best.end))) {
            best = clipped;
            found = true;
        }
    }
    if (found) return best;
    Segment out;
    out.category = region.point.category;
    out.start = std::max(region.point.t - r_p, region.start);
    out.end = std::min(region.point.t + r_p + 1, region.end);
    return out;
}

PseudoLabelSeq proposal_span_labels(const opa::RegionPartition& part, const std::vector<Segment>& region_proposals,
                                    int T) {
    PseudoLabelSeq labels(T, PseudoLabel{LabelKind::unlabeled, -1});
    for (const auto& [start, end] : part.background) {
        for (int t = start; t < end; ++t) labels[t] = {LabelKind::negative, -1};
    }
    for (size_t n = 0; n < part.undetermined.size(); ++n) {
        const auto& region = part.undetermined[n];
        const Segment& pro = region_proposals[n];
        for (int t = pro.start; t < pro.end; ++t) labels[t] = {LabelKind::positive, pro.category};
        labels[region.point.t] = {LabelKind::positive, region.point.category};
    }
    return labels;
}

struct StructurePass {
    MemoryBank bank;
    std::vector<VideoStructures> per_video;
};

// embeddings must already be per-video centered; prototypes, background
// means and alignments all live in that space, matching the loss.
StructurePass build_structures(const Corpus& corpus, const TrainConfig& cfg, const std::vector<Matrix>& embeddings,
                               const std::vector<Tcas>& tcas, const std::vector<std::vector<Segment>>& proposals,
                               bool need_regions, bool need_labels) {
    const int n_videos = static_cast<int>(corpus.videos.size());
    StructurePass pass;

    const bool need_bank = need_regions || (need_labels && cfg.pseudo_mode == PseudoMode::alignment);
    if (need_bank) {
        std::vector<std::string> ids(n_videos);
        for (int v = 0; v < n_videos; ++v) ids[v] = corpus.videos[v].video_id;
        std::vector<spc::HarvestProposal> harvest_input;
        for (int v = 0; v < n_videos; ++v) {
            for (const Segment& p : proposals[v]) {
                if (p.length() >= 1) harvest_input.push_back({v, p});
            }
        }
        pass.bank = spc::harvest(embeddings, ids, harvest_input, cfg.spc, cfg.k_sub, corpus.num_categories);
    } else {
        pass.bank = MemoryBank(corpus.num_categories);
    }

    pass.per_video.resize(n_videos);
    par::parallel_for(n_videos, [&](std::ptrdiff_t v) {
        const Video& video = corpus.videos[v];
        VideoStructures& s = pass.per_video[v];
        if (video.points.empty()) return;
        const int T = video.length();
        const opa::RegionPartition part = opa::partition(T, video.points, tcas[v], cfg.loss.theta_b);
        const Matrix& X = embeddings[v];

        std::vector<Segment> region_proposals;
        region_proposals.reserve(part.undetermined.size());
        for (const auto& region : part.undetermined) {
            region_proposals.push_back(choose_region_proposal(proposals[v], region, cfg.spc.avg_snippets_per_prototype,
                                                              tcas[v], cfg.infer.margin_ratio));
        }

        if (cfg.pseudo_mode == PseudoMode::proposal_only) {
            if (need_labels) {
                s.labels = proposal_span_labels(part, region_proposals, T);
                s.has_labels = true;
            }
            if (!need_regions) return;
        }

        const opa::BackgroundMeans bkg = opa::background_means(X, part);
        std::vector<opa::RegionAlignment> alignments(part.undetermined.size());
        for (size_t n = 0; n < part.undetermined.size(); ++n) {
            const auto& region = part.undetermined[n];
            const int true_cat = region.point.category;
            const int M = region.end - region.start;
            if (pass.bank.category_empty(true_cat)) {
                alignments[n].status = opa::RegionAlignment::Status::skipped;
                continue;
            }
            const Segment& pro = region_proposals[n];
            const Matrix proposal_features = slice_rows(X, pro.start, pro.end);
            const Matrix left = slice_rows(X, part.background[n].first, part.background[n].second);
            const Matrix right = slice_rows(X, part.background[n + 1].first, part.background[n + 1].second);

            opa::FrozenRegion frozen;
            frozen.start = region.start;
            frozen.end = region.end;
            frozen.true_category = true_cat;
            int true_seq = -1;
            for (int c = 0; c < corpus.num_categories; ++c) {
                if (pass.bank.category_empty(c)) continue;
                const Matrix selected = opa::select_prototype_sequence(proposal_features, pass.bank, c);
                opa::OrderedPrototypeSeq seq = opa::build_ordered(selected, left, right, bkg.global_mean, c);
                seq = opa::shrink_to_fit(seq, M);
                if (c == true_cat) true_seq = static_cast<int>(frozen.seqs.size());
                frozen.seqs.push_back(std::move(seq));
            }

            alignments[n] = opa::align_region(frozen.seqs[true_seq], slice_rows(X, region.start, region.end));
            if (alignments[n].status == opa::RegionAlignment::Status::aligned && need_regions && M >= 3) {
                s.regions.push_back(std::move(frozen));
            }
        }
        if (need_labels && cfg.pseudo_mode == PseudoMode::alignment) {
            s.labels = opa::emit_pseudo_labels(part, alignments, T);
            s.has_labels = true;
        }
    });
    return pass;
}

struct BatchSlot {
    model::HeadParams grads;
    losses::LossComponents comps;
};

}  // namespace

io::ResultsMap inference_results(const Corpus& corpus, const model::HeadParams& params,
                                 const infer::InferConfig& cfg) {
    const int n = static_cast<int>(corpus.videos.size());
    std::vector<std::vector<Segment>> results(n);
    par::parallel_for(n, [&](std::ptrdiff_t v) {
        const model::ForwardResult fwd = model::forward(corpus.videos[v], params);
        results[v] = infer::run_inference(fwd.tcas, cfg);
    });
    io::ResultsMap out;
    for (int v = 0; v < n; ++v) out[corpus.videos[v].video_id] = std::move(results[v]);
    return out;
}

TrainResult train(const Corpus& corpus, const TrainConfig& cfg) {
    if (corpus.videos.empty()) throw ValidationError("train: empty corpus");
    const int n_videos = static_cast<int>(corpus.videos.size());
    const int embed_dim = cfg.embed_dim > 0 ? cfg.embed_dim : corpus.feature_dim;

    TrainResult result;
    result.params = model::init_params(corpus.feature_dim, cfg.hidden_dim, embed_dim, corpus.num_categories,
                                       cfg.kernel, cfg.seed);
    result.bank = MemoryBank(corpus.num_categories);

    const bool use_opa = cfg.loss.lambda3 > 0.0;
    const bool use_pl = cfg.loss.lambda4 > 0.0;

    std::vector<std::vector<int>> cats(n_videos);
    for (int v = 0; v < n_videos; ++v) cats[v] = video_categories(corpus.videos[v]);

    const io::ResultsMap gt = io::ground_truth_map(corpus);
    bool has_gt = false;
    for (const auto& [vid, segs] : gt) has_gt |= !segs.empty();
    const std::vector<double> eval_thresholds = eval::preset_thresholds("thumos");

    std::vector<VideoStructures> structures(n_videos);
    bool structures_ready = false;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const bool post_warm = epoch > cfg.warmup_epochs && (use_opa || use_pl);

        if (post_warm) {
            // Frozen-structure pass: snapshot embeddings and scores, rebuild
            // the bank, partition and align every region.
            std::vector<Matrix> embeddings(n_videos);
            std::vector<Tcas> tcas(n_videos);
            std::vector<std::vector<Segment>> proposals(n_videos);
            par::parallel_for(n_videos, [&](std::ptrdiff_t v) {
                model::ForwardResult fwd = model::forward(corpus.videos[v], result.params);
                proposals[v] = infer::run_inference(fwd.tcas, cfg.infer);
                embeddings[v] = center_rows(fwd.embedding);
                tcas[v] = std::move(fwd.tcas);
            });
            StructurePass pass = build_structures(corpus, cfg, embeddings, tcas, proposals, use_opa, use_pl);
            structures = std::move(pass.per_video);
            result.bank = std::move(pass.bank);
            structures_ready = true;
        }

        // Minibatch SGD over a seeded shuffle.
        std::vector<int> order(n_videos);
        for (int v = 0; v < n_videos; ++v) order[v] = v;
        Rng shuffle_rng(derive_seed(cfg.seed, 0x5AFF1EULL + static_cast<uint64_t>(epoch)));
        for (int v = n_videos - 1; v > 0; --v) {
            std::swap(order[v], order[shuffle_rng.uniform_int(0, v)]);
        }

        losses::LossComponents epoch_sums;
        for (int begin = 0; begin < n_videos; begin += cfg.batch_size) {
            const int end = std::min(begin + cfg.batch_size, n_videos);
            const int batch = end - begin;
            std::vector<BatchSlot> slots(batch);
            par::parallel_for(batch, [&](std::ptrdiff_t b) {
                const int v = order[begin + b];
                const Video& video = corpus.videos[v];
                model::ForwardCache cache;
                const model::ForwardResult fwd = model::forward(video, result.params, &cache);
                Matrix d_tcas(fwd.tcas.scores.rows(), fwd.tcas.scores.cols());
                Matrix d_embed(fwd.embedding.rows(), fwd.embedding.cols());

                BatchSlot& slot = slots[b];
                slot.comps.video =
                    losses::video_loss(fwd.tcas, cats[v], cfg.loss.k_ratio, cfg.loss.lambda1, &d_tcas);
                const std::vector<int> bkg_points =
                    losses::mine_bkg_points(fwd.tcas, video.points, cfg.loss.theta_b);
                slot.comps.point = losses::point_loss(fwd.tcas, video.points, bkg_points, cfg.loss.focal_gamma,
                                                      cfg.loss.lambda2, &d_tcas);
                if (post_warm && structures_ready) {
                    if (use_opa && !structures[v].regions.empty()) {
                        slot.comps.opa = losses::opa_loss(fwd.embedding, structures[v].regions, cfg.loss.tau,
                                                          cfg.loss.lambda3, &d_embed);
                    }
                    if (use_pl && structures[v].has_labels) {
                        slot.comps.pl = losses::pl_loss(fwd.tcas, structures[v].labels, cfg.loss.focal_gamma,
                                                        cfg.loss.lambda4, &d_tcas);
                    }
                }
                slot.grads = model::backward(result.params, cache, d_tcas, d_embed);
            });

            model::HeadParams batch_grads = model::zeros_like(result.params);
            for (const BatchSlot& slot : slots) {
                model::accumulate(batch_grads, slot.grads);
                epoch_sums.video += slot.comps.video;
                epoch_sums.point += slot.comps.point;
                epoch_sums.opa += slot.comps.opa;
                epoch_sums.pl += slot.comps.pl;
            }
            model::scale(batch_grads, 1.0 / batch);
            model::sgd_step(result.params, batch_grads, cfg.lr);
        }

        EpochLog log;
        log.epoch = epoch;
        log.video_loss = epoch_sums.video / n_videos;
        log.point_loss = epoch_sums.point / n_videos;
        log.opa_loss = epoch_sums.opa / n_videos;
        log.pl_loss = epoch_sums.pl / n_videos;
        log.total = losses::total_loss({log.video_loss, log.point_loss, log.opa_loss, log.pl_loss}, cfg.loss);
        if (cfg.eval_each_epoch && has_gt) {
            const io::ResultsMap results = inference_results(corpus, result.params, cfg.infer);
            log.train_avg_map = eval::map_table(results, gt, eval_thresholds).avg;
        }
        result.log.push_back(log);
    }

    for (int v = 0; v < n_videos; ++v) {
        if (structures[v].has_labels) {
            result.pseudo_labels[corpus.videos[v].video_id] = structures[v].labels;
        }
    }
    return result;
}

std::string log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,video_loss,point_loss,opa_loss,pl_loss,total,train_avg_map\n";
    char buf[256];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.video_loss,
                      e.point_loss, e.opa_loss, e.pl_loss, e.total, e.train_avg_map);
        out += buf;
    }
    return out;
}

namespace {

using nlohmann::json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig config_from_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open config: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    TrainConfig cfg;
    maybe(j, "hidden_dim", cfg.hidden_dim);
    maybe(j, "embed_dim", cfg.embed_dim);
    maybe(j, "kernel", cfg.kernel);
    maybe(j, "lr", cfg.lr);
    maybe(j, "epochs", cfg.epochs);
    maybe(j, "warmup_epochs", cfg.warmup_epochs);
    maybe(j, "batch_size", cfg.batch_size);
    maybe(j, "seed", cfg.seed);
    maybe(j, "k_sub", cfg.k_sub);
    maybe(j, "r_p", cfg.spc.avg_snippets_per_prototype);
    maybe(j, "n_max", cfg.spc.max_prototypes);
    maybe(j, "gamma", cfg.spc.temporal_weight);
    maybe(j, "iterations", cfg.spc.iterations);
    maybe(j, "adaptive", cfg.spc.adaptive);
    maybe(j, "use_clustering", cfg.spc.use_clustering);
    maybe(j, "lambda1", cfg.loss.lambda1);
    maybe(j, "lambda2", cfg.loss.lambda2);
    maybe(j, "lambda3", cfg.loss.lambda3);
    maybe(j, "lambda4", cfg.loss.lambda4);
    maybe(j, "k_ratio", cfg.loss.k_ratio);
    maybe(j, "theta_b", cfg.loss.theta_b);
    maybe(j, "focal_gamma", cfg.loss.focal_gamma);
    maybe(j, "tau", cfg.loss.tau);
    maybe(j, "nms_tiou", cfg.infer.nms_tiou);
    maybe(j, "margin_ratio", cfg.infer.margin_ratio);
    maybe(j, "thresholds", cfg.infer.thresholds);
    maybe(j, "eval_each_epoch", cfg.eval_each_epoch);
    if (j.contains("pseudo_mode")) {
        const std::string mode = j.at("pseudo_mode").get<std::string>();
        if (mode == "alignment") cfg.pseudo_mode = PseudoMode::alignment;
        else if (mode == "proposal_only") cfg.pseudo_mode = PseudoMode::proposal_only;
        else throw ValidationError("config: unknown pseudo_mode '" + mode + "'");
    }
    return cfg;
}

void config_to_json_file(const TrainConfig& cfg, const std::filesystem::path& file) {
    json j{{"hidden_dim", cfg.hidden_dim},
           {"embed_dim", cfg.embed_dim},
           {"kernel", cfg.kernel},
           {"lr", cfg.lr},
           {"epochs", cfg.epochs},
           {"warmup_epochs", cfg.warmup_epochs},
           {"batch_size", cfg.batch_size},
           {"seed", cfg.seed},
           {"k_sub", cfg.k_sub},
           {"r_p", cfg.spc.avg_snippets_per_prototype},
           {"n_max", cfg.spc.max_prototypes},
           {"gamma", cfg.spc.temporal_weight},
           {"iterations", cfg.spc.iterations},
           {"adaptive", cfg.spc.adaptive},
           {"use_clustering", cfg.spc.use_clustering},
           {"lambda1", cfg.loss.lambda1},
           {"lambda2", cfg.loss.lambda2},
           {"lambda3", cfg.loss.lambda3},
           {"lambda4", cfg.loss.lambda4},
           {"k_ratio", cfg.loss.k_ratio},
           {"theta_b", cfg.loss.theta_b},
           {"focal_gamma", cfg.loss.focal_gamma},
           {"tau", cfg.loss.tau},
           {"nms_tiou", cfg.infer.nms_tiou},
           {"margin_ratio", cfg.infer.margin_ratio},
           {"thresholds", cfg.infer.thresholds},
           {"eval_each_epoch", cfg.eval_each_epoch},
           {"pseudo_mode", cfg.pseudo_mode == PseudoMode::alignment ? "alignment" : "proposal_only"}};
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write config: " + file.string());
    out << j.dump(2) << "\n";
}

void apply_variant(TrainConfig& cfg, const std::string& variant) {
    if (variant == "base") {
        cfg.loss.lambda3 = 0.0;
        cfg.loss.lambda4 = 0.0;
    } else if (variant == "opa") {
        cfg.loss.lambda4 = 0.0;
        cfg.spc.use_clustering = false;
    } else if (variant == "spc_opa") {
        cfg.loss.lambda4 = 0.0;
    } else if (variant == "pl" || variant == "proposal_only") {
        cfg.loss.lambda3 = 0.0;
        cfg.pseudo_mode = PseudoMode::proposal_only;
    } else if (variant == "opa_pl") {
        cfg.spc.use_clustering = false;
    } else if (variant == "full") {
        // defaults
    } else if (variant == "fixed") {
        cfg.spc.adaptive = false;
    } else if (variant.rfind("nmax_", 0) == 0) {
        cfg.spc.max_prototypes = std::stoi(variant.substr(5));
    } else {
        throw ValidationError("unknown variant '" + variant + "'");
    }
}

std::vector<AblationRow> ablate(const Corpus& train_corpus, const Corpus& test_corpus, const TrainConfig& base_cfg,
                                const std::vector<std::string>& variants, const std::vector<uint64_t>& seeds,
                                std::span<const double> eval_thresholds) {
    const io::ResultsMap test_gt = io::ground_truth_map(test_corpus);
    std::vector<AblationRow> rows;
    for (const std::string& variant : variants) {
        AblationRow row;
        row.variant = variant;
        row.table.thresholds.assign(eval_thresholds.begin(), eval_thresholds.end());
        row.table.map_at.assign(eval_thresholds.size(), 0.0);
        for (uint64_t seed : seeds) {
            TrainConfig cfg = base_cfg;
            cfg.seed = seed;
            cfg.eval_each_epoch = false;
            apply_variant(cfg, variant);
            const TrainResult trained = train(train_corpus, cfg);
            const io::ResultsMap results = inference_results(test_corpus, trained.params, cfg.infer);
            const eval::MapTable table = eval::map_table(results, test_gt, eval_thresholds);
            for (size_t i = 0; i < table.map_at.size(); ++i) row.table.map_at[i] += table.map_at[i];
        }
        for (double& v : row.table.map_at) v /= seeds.size();
        double sum = 0.0;
        for (double v : row.table.map_at) sum += v;
        row.table.avg = row.table.map_at.empty() ? 0.0 : sum / row.table.map_at.size();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    if (rows.empty()) return "";
    std::string out = "variant,";
    char buf[64];
    for (double t : rows.front().table.thresholds) {
        std::snprintf(buf, sizeof(buf), "map_%.1f,", t);
        out += buf;
    }
    out += "avg\n";
    for (const AblationRow& row : rows) {
        out += row.variant + ",";
        for (double v : row.table.map_at) {
            std::snprintf(buf, sizeof(buf), "%.6f,", 100.0 * v);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "%.6f\n", 100.0 * row.table.avg);
        out += buf;
    }
    return out;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    if (rows.empty()) return "";
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-16s", "variant");
    out += buf;
    for (double t : rows.front().table.thresholds) {
        std::snprintf(buf, sizeof(buf), "  mAP@%.1f", t);
        out += buf;
    }
    out += "      AVG\n";
    for (const AblationRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%-16s", row.variant.c_str());
        out += buf;
        for (double v : row.table.map_at) {
            std::snprintf(buf, sizeof(buf), "  %7.2f", 100.0 * v);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "  %7.2f\n", 100.0 * row.table.avg);
        out += buf;
    }
    return out;
}

}  // namespace splloc::train
