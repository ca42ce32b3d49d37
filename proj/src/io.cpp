#include "splloc/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace splloc::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Matrix read_csv_matrix(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string field = line.substr(pos, comma - pos);
            try {
                size_t used = 0;
                const double v = std::stod(field, &used);
                if (used != field.size() && field.find_first_not_of(" \t", used) != std::string::npos) {
                    throw std::invalid_argument(field);
                }
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(file.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
            }
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(file.string() + ":" + std::to_string(line_no) + ": ragged row width");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(file.string() + ": empty feature matrix");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            const double v = rows[r][c];
            if (!std::isfinite(v)) {
                throw ValidationError(file.string() + ":" + std::to_string(r + 1) + ": non-finite entry");
            }
            m.at(r, c) = v;
        }
    }
    return m;
}

json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

Video load_video(const fs::path& dir) {
    Video v;
    v.video_id = dir.filename().string();
    v.appearance = read_csv_matrix(dir / "appearance.csv");
    v.motion = read_csv_matrix(dir / "motion.csv");
    if (v.appearance.rows() != v.motion.rows() || v.appearance.cols() != v.motion.cols()) {
        throw ValidationError(v.video_id + ": appearance and motion shapes differ");
    }
    const int T = v.appearance.rows();

    const json points = read_json_file(dir / "points.json");
    if (!points.is_array()) throw ParseError((dir / "points.json").string() + ": expected an array");
    for (const auto& p : points) {
        PointAnnotation a;
        try {
            a.t = p.at("t").get<int>();
            a.category = p.at("category").get<int>();
        } catch (const json::exception& e) {
            throw ParseError((dir / "points.json").string() + ": " + e.what());
        }
        if (a.t < 0 || a.t >= T) {
            throw ValidationError(v.video_id + ": point t=" + std::to_string(a.t) + " outside [0," +
                                  std::to_string(T) + ")");
        }
        if (a.category < 0) throw ValidationError(v.video_id + ": negative category");
        v.points.push_back(a);
    }
    std::sort(v.points.begin(), v.points.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    for (size_t i = 1; i < v.points.size(); ++i) {
        if (v.points[i].t == v.points[i - 1].t) {
            throw ValidationError(v.video_id + ": two point annotations in snippet " + std::to_string(v.points[i].t));
        }
    }

    if (fs::exists(dir / "gt.json")) {
        const json gt = read_json_file(dir / "gt.json");
        if (!gt.is_array()) throw ParseError((dir / "gt.json").string() + ": expected an array");
        std::vector<Segment> segments;
        for (const auto& s : gt) {
            Segment seg;
            try {
                seg.start = s.at("start").get<int>();
                seg.end = s.at("end").get<int>();
                seg.category = s.at("category").get<int>();
                seg.confidence = s.value("confidence", 1.0);
            } catch (const json::exception& e) {
                throw ParseError((dir / "gt.json").string() + ": " + e.what());
            }
            if (seg.start < 0 || seg.start >= seg.end || seg.end > T) {
                throw ValidationError(v.video_id + ": ground-truth segment outside [0," + std::to_string(T) + ")");
            }
            segments.push_back(seg);
        }
        std::sort(segments.begin(), segments.end(),
                  [](const Segment& a, const Segment& b) { return a.start < b.start; });
        v.ground_truth = std::move(segments);
    }
    return v;
}

json segment_to_json(const Segment& s) {
    return {{"start", s.start}, {"end", s.end}, {"category", s.category}, {"confidence", s.confidence}};
}

Segment segment_from_json(const json& j) {
    Segment s;
    s.start = j.at("start").get<int>();
    s.end = j.at("end").get<int>();
    s.category = j.at("category").get<int>();
    s.confidence = j.value("confidence", 0.0);
    return s;
}

}  // namespace

Corpus load_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError("corpus path is not a directory: " + dir.string());
    std::vector<fs::path> video_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) video_dirs.push_back(entry.path());
    }
    std::sort(video_dirs.begin(), video_dirs.end());
    if (video_dirs.empty()) throw ValidationError("no videos found in " + dir.string());

    Corpus corpus;
    int max_category = -1;
    for (const fs::path& vd : video_dirs) {
        Video v = load_video(vd);
        if (corpus.videos.empty()) {
            corpus.feature_dim = v.appearance.cols();
        } else if (v.appearance.cols() != corpus.feature_dim) {
            throw ValidationError(v.video_id + ": feature dimension " + std::to_string(v.appearance.cols()) +
                                  " differs from corpus dimension " + std::to_string(corpus.feature_dim));
        }
        for (const PointAnnotation& p : v.points) max_category = std::max(max_category, p.category);
        if (v.ground_truth) {
            for (const Segment& s : *v.ground_truth) max_category = std::max(max_category, s.category);
        }
        corpus.videos.push_back(std::move(v));
    }
    corpus.num_categories = max_category + 1;
    return corpus;
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
    fs::create_directories(dir);
    for (const Video& v : corpus.videos) {
        const fs::path vd = dir / v.video_id;
        fs::create_directories(vd);
        for (const auto& [name, m] : {std::pair<const char*, const Matrix*>{"appearance.csv", &v.appearance},
                                      {"motion.csv", &v.motion}}) {
            std::ofstream out(vd / name);
            if (!out) throw std::runtime_error("cannot write " + (vd / name).string());
            char buf[32];
            for (int r = 0; r < m->rows(); ++r) {
                for (int c = 0; c < m->cols(); ++c) {
                    std::snprintf(buf, sizeof(buf), "%.17g", m->at(r, c));
                    out << (c ? "," : "") << buf;
                }
                out << "\n";
            }
        }
        json points = json::array();
        for (const PointAnnotation& p : v.points) points.push_back({{"t", p.t}, {"category", p.category}});
        write_json_file(points, vd / "points.json");
        if (v.ground_truth) {
            json gt = json::array();
            for (const Segment& s : *v.ground_truth) gt.push_back(segment_to_json(s));
            write_json_file(gt, vd / "gt.json");
        }
    }
}

void dump_results(const ResultsMap& proposals, const fs::path& file) {
    json videos = json::array();
    for (const auto& [video_id, segs] : proposals) {
        std::vector<Segment> sorted = segs;
        std::sort(sorted.begin(), sorted.end(), [](const Segment& a, const Segment& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            return std::tie(a.start, a.end, a.category) < std::tie(b.start, b.end, b.category);
        });
        json list = json::array();
        for (const Segment& s : sorted) list.push_back(segment_to_json(s));
        videos.push_back({{"video_id", video_id}, {"proposals", list}});
    }
    write_json_file(json{{"videos", videos}}, file);
}

ResultsMap load_results(const fs::path& file) {
    const json j = read_json_file(file);
    ResultsMap out;
    try {
        for (const auto& v : j.at("videos")) {
            std::vector<Segment>& list = out[v.at("video_id").get<std::string>()];
            for (const auto& p : v.at("proposals")) list.push_back(segment_from_json(p));
        }
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    return out;
}

ResultsMap ground_truth_map(const Corpus& corpus) {
    ResultsMap out;
    for (const Video& v : corpus.videos) {
        out[v.video_id] = v.ground_truth ? *v.ground_truth : std::vector<Segment>{};
    }
    return out;
}

void dump_bank(const MemoryBank& bank, const fs::path& file) {
    json cats = json::array();
    for (const auto& sets : bank.categories) {
        json cat = json::array();
        for (const PrototypeSet& set : sets) {
            json protos = json::array();
            for (const SubActionPrototype& p : set.prototypes) {
                protos.push_back({{"vector", p.vector}, {"position", p.position}, {"confidence", p.confidence}});
            }
            cat.push_back({{"video_id", set.video_id},
                           {"start", set.start},
                           {"end", set.end},
                           {"confidence", set.confidence},
                           {"prototypes", protos}});
        }
        cats.push_back(cat);
    }
    write_json_file(json{{"categories", cats}}, file);
}

MemoryBank load_bank(const fs::path& file) {
    const json j = read_json_file(file);
    MemoryBank bank;
    try {
        for (const auto& cat : j.at("categories")) {
            std::vector<PrototypeSet> sets;
            for (const auto& s : cat) {
                PrototypeSet set;
                set.video_id = s.at("video_id").get<std::string>();
                set.start = s.at("start").get<int>();
                set.end = s.at("end").get<int>();
                set.confidence = s.at("confidence").get<double>();
                for (const auto& p : s.at("prototypes")) {
                    SubActionPrototype proto;
                    proto.vector = p.at("vector").get<std::vector<double>>();
                    proto.position = p.at("position").get<double>();
                    proto.confidence = p.at("confidence").get<double>();
                    proto.category = static_cast<int>(bank.categories.size());
                    set.prototypes.push_back(std::move(proto));
                }
                sets.push_back(std::move(set));
            }
            bank.categories.push_back(std::move(sets));
        }
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    return bank;
}

void dump_pseudo_labels(const std::map<std::string, PseudoLabelSeq>& labels, const fs::path& file) {
    json videos = json::object();
    for (const auto& [video_id, seq] : labels) {
        json arr = json::array();
        for (const PseudoLabel& l : seq) {
            switch (l.kind) {
                case LabelKind::positive: arr.push_back("P:" + std::to_string(l.category)); break;
                case LabelKind::negative: arr.push_back("N"); break;
                case LabelKind::unlabeled: arr.push_back("U"); break;
            }
        }
        videos[video_id] = arr;
    }
    write_json_file(videos, file);
}

std::map<std::string, PseudoLabelSeq> load_pseudo_labels(const fs::path& file) {
    const json j = read_json_file(file);
    std::map<std::string, PseudoLabelSeq> out;
    for (const auto& [video_id, arr] : j.items()) {
        PseudoLabelSeq seq;
        for (const auto& item : arr) {
            const std::string s = item.get<std::string>();
            if (s == "N") seq.push_back({LabelKind::negative, -1});
            else if (s == "U") seq.push_back({LabelKind::unlabeled, -1});
            else if (s.rfind("P:", 0) == 0) seq.push_back({LabelKind::positive, std::stoi(s.substr(2))});
            else throw ParseError(file.string() + ": bad label '" + s + "'");
        }
        out[video_id] = std::move(seq);
    }
    return out;
}

}  // namespace splloc::io
