#include "splloc/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "splloc/rng.hpp"

namespace splloc::model {

using nlohmann::json;

Matrix conv_forward(const Conv1d& layer, const Matrix& input) {
    const int T = input.rows();
    const int pad = layer.kernel / 2;
    Matrix out(T, layer.out_channels);
    for (int t = 0; t < T; ++t) {
        auto dst = out.row(t);
        for (int o = 0; o < layer.out_channels; ++o) dst[o] = layer.bias[o];
        for (int k = 0; k < layer.kernel; ++k) {
            const int src_t = t + k - pad;
            if (src_t < 0 || src_t >= T) continue;
            const auto src = input.row(src_t);
            for (int i = 0; i < layer.in_channels; ++i) {
                const double v = src[i];
                if (v == 0.0) continue;
                for (int o = 0; o < layer.out_channels; ++o) dst[o] += v * layer.w(k, i, o);
            }
        }
    }
    return out;
}

void conv_backward(const Conv1d& layer, const Matrix& input, const Matrix& d_output, Conv1d& grad, Matrix* d_input) {
    const int T = input.rows();
    const int pad = layer.kernel / 2;
    for (int t = 0; t < T; ++t) {
        const auto dout = d_output.row(t);
        for (int o = 0; o < layer.out_channels; ++o) grad.bias[o] += dout[o];
        for (int k = 0; k < layer.kernel; ++k) {
            const int src_t = t + k - pad;
            if (src_t < 0 || src_t >= T) continue;
            const auto src = input.row(src_t);
            for (int i = 0; i < layer.in_channels; ++i) {
                const double v = src[i];
                double din = 0.0;
                for (int o = 0; o < layer.out_channels; ++o) {
                    grad.w(k, i, o) += v * dout[o];
                    din += layer.w(k, i, o) * dout[o];
                }
                if (d_input) d_input->at(src_t, i) += din;
            }
        }
    }
}

namespace {

Conv1d make_conv(int in, int out, int kernel) {
    Conv1d c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel = kernel;
    c.weight.assign(static_cast<size_t>(kernel) * in * out, 0.0);
    c.bias.assign(out, 0.0);
    return c;
}

void init_conv(Conv1d& c, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.kernel * c.in_channels));
    for (double& w : c.weight) w = rng.uniform(-bound, bound);
    for (double& b : c.bias) b = rng.uniform(-bound, bound);
}

void visit_conv(Conv1d& c, const std::function<void(double&)>& fn) {
    for (double& w : c.weight) fn(w);
    for (double& b : c.bias) fn(b);
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix relu_backward(const Matrix& pre_activation, const Matrix& d_out) {
    Matrix d = d_out;
    for (size_t i = 0; i < d.values().size(); ++i) {
        if (pre_activation.values()[i] <= 0.0) d.values()[i] = 0.0;
    }
    return d;
}

void stream_forward(const Conv1d& e1, const Conv1d& e2, const Conv1d& s1, const Conv1d& s2, const Matrix& input,
                    StreamCache& cache) {
    cache.input = input;
    cache.z1 = conv_forward(e1, input);
    cache.e1 = relu(cache.z1);
    cache.x = conv_forward(e2, cache.e1);
    cache.z3 = conv_forward(s1, cache.x);
    cache.g = relu(cache.z3);
    cache.logits = conv_forward(s2, cache.g);
    cache.a = cache.logits;
    for (double& v : cache.a.values()) v = 1.0 / (1.0 + std::exp(-v));
}

}  // namespace

HeadParams init_params(int input_dim, int hidden_dim, int embed_dim, int num_categories, int kernel, uint64_t seed) {
    HeadParams p;
    Rng rng(derive_seed(seed, 0x8EADULL));
    for (StreamParams& s : p.streams) {
        s.embed1 = make_conv(input_dim, hidden_dim, kernel);
        s.embed2 = make_conv(hidden_dim, embed_dim, kernel);
        s.score1 = make_conv(embed_dim, hidden_dim, kernel);
        s.score2 = make_conv(hidden_dim, num_categories + 1, kernel);
        init_conv(s.embed1, rng);
        init_conv(s.embed2, rng);
        init_conv(s.score1, rng);
        init_conv(s.score2, rng);
    }
    return p;
}

HeadParams zeros_like(const HeadParams& params) {
    HeadParams z = params;
    visit_params(z, [](double& v) { v = 0.0; });
    return z;
}

void visit_params(HeadParams& params, const std::function<void(double&)>& fn) {
    for (StreamParams& s : params.streams) {
        visit_conv(s.embed1, fn);
        visit_conv(s.embed2, fn);
        visit_conv(s.score1, fn);
        visit_conv(s.score2, fn);
    }
}

std::vector<double*> param_pointers(HeadParams& params) {
    std::vector<double*> out;
    visit_params(params, [&](double& v) { out.push_back(&v); });
    return out;
}

ForwardResult forward(const Video& video, const HeadParams& params, ForwardCache* cache) {
    if (video.appearance.rows() != video.motion.rows()) {
        throw ValidationError(video.video_id + ": stream lengths differ");
    }
    if (video.appearance.cols() != params.streams[0].embed1.in_channels) {
        throw ValidationError(video.video_id + ": feature dimension does not match the model input");
    }
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    stream_forward(params.streams[0].embed1, params.streams[0].embed2, params.streams[0].score1,
                   params.streams[0].score2, video.appearance, c.streams[0]);
    stream_forward(params.streams[1].embed1, params.streams[1].embed2, params.streams[1].score1,
                   params.streams[1].score2, video.motion, c.streams[1]);

    ForwardResult out;
    out.embedding = c.streams[0].x;
    for (size_t i = 0; i < out.embedding.values().size(); ++i) {
        out.embedding.values()[i] = 0.5 * (out.embedding.values()[i] + c.streams[1].x.values()[i]);
    }
    out.tcas.scores = c.streams[0].a;
    for (size_t i = 0; i < out.tcas.scores.values().size(); ++i) {
        out.tcas.scores.values()[i] = 0.5 * (out.tcas.scores.values()[i] + c.streams[1].a.values()[i]);
    }
    return out;
}

HeadParams backward(const HeadParams& params, const ForwardCache& cache, const Matrix& d_tcas,
                    const Matrix& d_embedding) {
    HeadParams grads = zeros_like(params);
    for (int si = 0; si < 2; ++si) {
        const StreamParams& p = params.streams[si];
        StreamParams& g = grads.streams[si];
        const StreamCache& c = cache.streams[si];
        const int T = c.input.rows();

        Matrix d_x(T, p.embed2.out_channels);
        if (!d_embedding.empty()) {
            for (size_t i = 0; i < d_x.values().size(); ++i) d_x.values()[i] = 0.5 * d_embedding.values()[i];
        }
        if (!d_tcas.empty()) {
            // dA_s = dA/2 through the stream average, then sigmoid'.
            Matrix d_logits = d_tcas;
            for (size_t i = 0; i < d_logits.values().size(); ++i) {
                const double a = c.a.values()[i];
                d_logits.values()[i] *= 0.5 * a * (1.0 - a);
            }
            Matrix d_g(T, p.score1.out_channels);
            conv_backward(p.score2, c.g, d_logits, g.score2, &d_g);
            const Matrix d_z3 = relu_backward(c.z3, d_g);
            conv_backward(p.score1, c.x, d_z3, g.score1, &d_x);
        }
        Matrix d_e1(T, p.embed1.out_channels);
        conv_backward(p.embed2, c.e1, d_x, g.embed2, &d_e1);
        const Matrix d_z1 = relu_backward(c.z1, d_e1);
        conv_backward(p.embed1, c.input, d_z1, g.embed1, nullptr);
    }
    return grads;
}

void accumulate(HeadParams& into, const HeadParams& grads) {
    auto dst = param_pointers(into);
    HeadParams& g = const_cast<HeadParams&>(grads);
    auto src = param_pointers(g);
    for (size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
}

void scale(HeadParams& params, double factor) {
    visit_params(params, [factor](double& v) { v *= factor; });
}

void sgd_step(HeadParams& params, const HeadParams& grads, double lr) {
    auto dst = param_pointers(params);
    HeadParams& g = const_cast<HeadParams&>(grads);
    auto src = param_pointers(g);
    for (size_t i = 0; i < dst.size(); ++i) *dst[i] -= lr * *src[i];
}

namespace {

json conv_to_json(const Conv1d& c) {
    return {{"in", c.in_channels},
            {"out", c.out_channels},
            {"kernel", c.kernel},
            {"weight", c.weight},
            {"bias", c.bias}};
}

Conv1d conv_from_json(const json& j) {
    Conv1d c;
    c.in_channels = j.at("in").get<int>();
    c.out_channels = j.at("out").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.weight = j.at("weight").get<std::vector<double>>();
    c.bias = j.at("bias").get<std::vector<double>>();
    if (c.weight.size() != static_cast<size_t>(c.kernel) * c.in_channels * c.out_channels ||
        c.bias.size() != static_cast<size_t>(c.out_channels)) {
        throw ValidationError("checkpoint: conv shape mismatch");
    }
    return c;
}

}  // namespace

void save_checkpoint(const HeadParams& params, const std::filesystem::path& file) {
    json streams = json::array();
    for (const StreamParams& s : params.streams) {
        streams.push_back({{"embed1", conv_to_json(s.embed1)},
                           {"embed2", conv_to_json(s.embed2)},
                           {"score1", conv_to_json(s.score1)},
                           {"score2", conv_to_json(s.score2)}});
    }
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + file.string());
    out << json{{"streams", streams}}.dump(2) << "\n";
}

HeadParams load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open checkpoint: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    HeadParams p;
    try {
        const auto& streams = j.at("streams");
        for (int i = 0; i < 2; ++i) {
            p.streams[i].embed1 = conv_from_json(streams.at(i).at("embed1"));
            p.streams[i].embed2 = conv_from_json(streams.at(i).at("embed2"));
            p.streams[i].score1 = conv_from_json(streams.at(i).at("score1"));
            p.streams[i].score2 = conv_from_json(streams.at(i).at("score2"));
        }
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    return p;
}

}  // namespace splloc::model
