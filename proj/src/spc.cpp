#include "splloc/spc.hpp"

#include <algorithm>
#include <cmath>

#include "splloc/parallel.hpp"

namespace splloc::spc {

int adaptive_count(int proposal_len, const SpcConfig& cfg) {
    const int by_rate = proposal_len / cfg.avg_snippets_per_prototype;
    return std::min(std::max(by_rate, 1), cfg.max_prototypes);
}

int prototype_count(int proposal_len, const SpcConfig& cfg) {
    if (cfg.adaptive) return adaptive_count(proposal_len, cfg);
    return std::min(cfg.max_prototypes, proposal_len);
}

std::vector<SubActionPrototype> init_prototypes(const Matrix& proposal, int n_prototypes) {
    const int n = proposal.rows();
    if (n_prototypes < 1 || n_prototypes > n) {
        throw ValidationError("init_prototypes: need 1 <= N_s <= N_p, got N_s=" + std::to_string(n_prototypes) +
                              " N_p=" + std::to_string(n));
    }
    const int base = n / n_prototypes;
    const int remainder = n % n_prototypes;
    std::vector<SubActionPrototype> protos;
    protos.reserve(n_prototypes);
    int begin = 0;
    for (int j = 0; j < n_prototypes; ++j) {
        const int len = base + (j < remainder ? 1 : 0);
        const int end = begin + len;
        SubActionPrototype p;
        p.vector = mean_rows(proposal, begin, end);
        p.position = static_cast<double>(begin + end) / (2.0 * static_cast<double>(n));
        protos.push_back(std::move(p));
        begin = end;
    }
    return protos;
}

double prototype_distance(std::span<const double> feature, double t, std::span<const double> proto_vec, double u,
                          double gamma) {
    const double df = euclidean_distance(feature, proto_vec);
    const double dt = t - u;
    return std::sqrt(df * df + gamma * dt * dt);
}

std::vector<SubActionPrototype> spc_cluster(const Matrix& proposal, std::vector<SubActionPrototype> init,
                                            const SpcConfig& cfg) {
    const int n = proposal.rows();
    const int d = proposal.cols();
    const int k = static_cast<int>(init.size());
    std::vector<double> positions(n);
    for (int i = 0; i < n; ++i) positions[i] = snippet_position(i, n);

    std::vector<SubActionPrototype> protos = std::move(init);
    std::vector<double> weights(n);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<SubActionPrototype> next = protos;
        for (int j = 0; j < k; ++j) {
            double mass = 0.0;
            int nearest = 0;
            double nearest_dis = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                const double dis =
                    prototype_distance(proposal.row(i), positions[i], protos[j].vector, protos[j].position,
                                       cfg.temporal_weight);
                weights[i] = std::exp(-dis);
                mass += weights[i];
                if (dis < nearest_dis) {
                    nearest_dis = dis;
                    nearest = i;
                }
            }
            if (mass == 0.0) {
                // Numerically degenerate separation; collapse to the nearest snippet.
                next[j].vector.assign(proposal.row(nearest).begin(), proposal.row(nearest).end());
                next[j].position = positions[nearest];
                continue;
            }
            std::vector<double> acc(d, 0.0);
            double pos_acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const auto row = proposal.row(i);
                for (int c = 0; c < d; ++c) acc[c] += weights[i] * row[c];
                pos_acc += weights[i] * positions[i];
            }
            for (int c = 0; c < d; ++c) acc[c] /= mass;
            next[j].vector = std::move(acc);
            next[j].position = pos_acc / mass;
        }
        protos = std::move(next);
    }
    return protos;
}

namespace {

// Segment-center snippets instead of clustered prototypes: the snippet-level
// ablation that swaps SPC out while keeping the prototype count.
std::vector<SubActionPrototype> center_snippets(const Matrix& proposal, int n_prototypes) {
    const int n = proposal.rows();
    const int base = n / n_prototypes;
    const int remainder = n % n_prototypes;
    std::vector<SubActionPrototype> protos;
    int begin = 0;
    for (int j = 0; j < n_prototypes; ++j) {
        const int len = base + (j < remainder ? 1 : 0);
        const int center = begin + (len - 1) / 2;
        SubActionPrototype p;
        p.vector.assign(proposal.row(center).begin(), proposal.row(center).end());
        p.position = snippet_position(center, n);
        protos.push_back(std::move(p));
        begin += len;
    }
    return protos;
}

}  // namespace

MemoryBank harvest(std::span<const Matrix> embeddings, std::span<const std::string> video_ids,
                   std::span<const HarvestProposal> proposals, const SpcConfig& cfg, int k_sub, int num_categories) {
    MemoryBank bank(num_categories);

    // Top-k_sub selection per category, then cluster only the retained sets.
    std::vector<std::vector<const HarvestProposal*>> selected(num_categories);
    for (int c = 0; c < num_categories; ++c) {
        std::vector<const HarvestProposal*> cand;
        for (const HarvestProposal& p : proposals) {
            if (p.segment.category == c) cand.push_back(&p);
        }
        std::sort(cand.begin(), cand.end(), [&](const HarvestProposal* a, const HarvestProposal* b) {
            if (a->segment.confidence != b->segment.confidence) {
                return a->segment.confidence > b->segment.confidence;
            }
            return std::tie(video_ids[a->video_index], a->segment.start) <
                   std::tie(video_ids[b->video_index], b->segment.start);
        });
        if (static_cast<int>(cand.size()) > k_sub) cand.resize(k_sub);
        selected[c] = std::move(cand);
    }

    std::vector<std::pair<int, const HarvestProposal*>> jobs;
    for (int c = 0; c < num_categories; ++c) {
        for (const HarvestProposal* p : selected[c]) jobs.emplace_back(c, p);
    }
    std::vector<PrototypeSet> results(jobs.size());
    par::parallel_for(static_cast<std::ptrdiff_t>(jobs.size()), [&](std::ptrdiff_t i) {
        const auto& [category, p] = jobs[i];
        const Segment& seg = p->segment;
        const Matrix features = slice_rows(embeddings[p->video_index], seg.start, seg.end);
        const int n_protos = prototype_count(features.rows(), cfg);
        std::vector<SubActionPrototype> protos;
        if (cfg.use_clustering) {
            protos = spc_cluster(features, init_prototypes(features, n_protos), cfg);
        } else {
            protos = center_snippets(features, n_protos);
        }
        for (SubActionPrototype& proto : protos) {
            proto.category = category;
            proto.confidence = seg.confidence;
        }
        PrototypeSet set;
        set.video_id = video_ids[p->video_index];
        set.start = seg.start;
        set.end = seg.end;
        set.confidence = seg.confidence;
        set.prototypes = std::move(protos);
        results[i] = std::move(set);
    });

    for (size_t i = 0; i < jobs.size(); ++i) {
        bank.categories[jobs[i].first].push_back(std::move(results[i]));
    }
    return bank;
}

}  // namespace splloc::spc
