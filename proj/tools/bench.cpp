// Times the OpenMP-parallel pipeline stages against single-threaded runs on a
// generated corpus and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "splloc/eval.hpp"
#include "splloc/infer.hpp"
#include "splloc/io.hpp"
#include "splloc/model.hpp"
#include "splloc/parallel.hpp"
#include "splloc/synth.hpp"
#include "splloc/train.hpp"

using namespace splloc;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto start = Clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s serial %9.1f ms   parallel %9.1f ms   speedup %4.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int videos = 120;
    if (argc > 1) videos = std::stoi(argv[1]);
    std::printf("corpus: %d videos, %d threads available\n\n", videos, par::max_threads());

    const synth::SynthSpec spec = synth::reference_spec();
    const Corpus corpus = synth::generate(spec, videos, 2);

    train::TrainConfig cfg;
    cfg.hidden_dim = 32;
    cfg.epochs = 3;
    cfg.warmup_epochs = 1;
    cfg.eval_each_epoch = false;

    const model::HeadParams params =
        model::init_params(corpus.feature_dim, cfg.hidden_dim, corpus.feature_dim, corpus.num_categories, 3, 1);

    // Per-video inference (forward + proposals + NMS).
    {
        io::ResultsMap serial_out, parallel_out;
        par::set_max_threads(1);
        const double s = time_ms([&] { serial_out = train::inference_results(corpus, params, cfg.infer); });
        par::set_max_threads(0);
        const double p = time_ms([&] { parallel_out = train::inference_results(corpus, params, cfg.infer); });
        bool same = serial_out.size() == parallel_out.size();
        if (same) {
            for (const auto& [vid, segs] : serial_out) {
                const auto& other = parallel_out.at(vid);
                same = same && segs.size() == other.size();
                for (size_t i = 0; same && i < segs.size(); ++i) {
                    same = segs[i].start == other[i].start && segs[i].end == other[i].end &&
                           segs[i].confidence == other[i].confidence;
                }
            }
        }
        report("inference", s, p, same);
    }

    // Corpus generation.
    {
        Corpus serial_corpus, parallel_corpus;
        par::set_max_threads(1);
        const double s = time_ms([&] { serial_corpus = synth::generate(spec, videos, 2); });
        par::set_max_threads(0);
        const double p = time_ms([&] { parallel_corpus = synth::generate(spec, videos, 2); });
        bool same = serial_corpus.videos.size() == parallel_corpus.videos.size();
        for (size_t v = 0; same && v < serial_corpus.videos.size(); ++v) {
            same = serial_corpus.videos[v].appearance == parallel_corpus.videos[v].appearance &&
                   serial_corpus.videos[v].motion == parallel_corpus.videos[v].motion;
        }
        report("synth", s, p, same);
    }

    // Short end-to-end training (structure pass + SGD).
    {
        train::TrainResult serial_result, parallel_result;
        par::set_max_threads(1);
        const double s = time_ms([&] { serial_result = train::train(corpus, cfg); });
        par::set_max_threads(0);
        const double p = time_ms([&] { parallel_result = train::train(corpus, cfg); });
        bool same = true;
        auto a = model::param_pointers(serial_result.params);
        auto b = model::param_pointers(parallel_result.params);
        for (size_t i = 0; same && i < a.size(); ++i) same = *a[i] == *b[i];
        report("train (3 epochs)", s, p, same);
    }

    return 0;
}
