#include "vmr/dataset.hpp"

#include "vmr/rand.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace vmr {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split Corpus::split_of(const std::string& class_label) const {
    for (const auto& [cls, split] : class_splits)
        if (cls == class_label) return split;
    throw std::invalid_argument("corpus: class '" + class_label + "' has no split assignment");
}

std::vector<const VideoFeatures*> Corpus::videos_in(Split split) const {
    std::vector<const VideoFeatures*> out;
    for (const auto& v : videos)
        if (split_of(v.class_label) == split) out.push_back(&v);
    return out;
}

std::vector<std::string> Corpus::classes_in(Split split) const {
    std::vector<std::string> out;
    for (const auto& [cls, s] : class_splits)
        if (s == split) out.push_back(cls);
    return out;
}

// --------------------------------------------------------------------------
// Synthetic generation

static void validate_spec(const SyntheticSpec& s) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("synthetic spec: field '" + field + "' " + why);
    };
    if (s.num_classes < 1) fail("num_classes", "must be >= 1");
    if (s.subactions_per_class < 1) fail("subactions_per_class", "must be >= 1");
    if (s.feature_dim < 1) fail("feature_dim", "must be >= 1");
    if (s.video_length_min < 1 || s.video_length_min > s.video_length_max)
        fail("video_length_range", "must satisfy 1 <= min <= max");
    if (s.action_length_min < 1 || s.action_length_min > s.action_length_max)
        fail("action_length_range", "must satisfy 1 <= min <= max");
    if (s.noise_sigma < 0.0) fail("noise_sigma", "must be >= 0");
    if (s.permutation_probability < 0.0 || s.permutation_probability > 1.0)
        fail("permutation_probability", "must be in [0,1]");
    if (s.speed_jitter_min <= 0.0 || s.speed_jitter_min > s.speed_jitter_max)
        fail("speed_jitter_range", "must satisfy 0 < min <= max");
    if (s.videos_per_class < 1) fail("videos_per_class", "must be >= 1");
    if (s.train_classes < 0 || s.val_classes < 0 || s.test_classes < 0)
        fail("class split counts", "must be >= 0");
    if (s.train_classes + s.val_classes + s.test_classes != s.num_classes)
        fail("class split counts", "must sum to num_classes");
}

Corpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    validate_spec(spec);
    std::mt19937_64 rng(spec.seed);
    const int S = spec.subactions_per_class;
    const int d = spec.feature_dim;

    // Classes draw their fixed sub-action prototypes from a small shared
    // vocabulary: each class owns a distinct S-subset of global unit-norm
    // prototype vectors. Sub-actions recur across classes the way they do
    // in real video features, so similarity learned on the training
    // classes transfers to the held-out ones; distinct subsets keep
    // classes separable even when sub-action order is permuted.
    int pool_size = std::max(S + 1, 2);
    auto choose = [](int n, int k) {
        double c = 1.0;
        for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
        return c;
    };
    while (choose(pool_size, S) < 2.0 * spec.num_classes) ++pool_size;

    std::vector<Matrix> pool;
    pool.reserve(pool_size);
    for (int m = 0; m < pool_size; ++m) {
        Matrix v(1, d);
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
            v(0, j) = normal(rng);
            norm2 += v(0, j) * v(0, j);
        }
        const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
        for (int j = 0; j < d; ++j) v(0, j) *= inv;
        pool.push_back(std::move(v));
    }

    std::vector<std::vector<int>> class_subsets;
    std::vector<std::vector<Matrix>> prototypes(spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) {
        std::vector<int> subset;
        for (int attempt = 0;; ++attempt) {
            std::vector<int> indices(pool_size);
            std::iota(indices.begin(), indices.end(), 0);
            for (int i = 0; i < S; ++i)
                std::swap(indices[i], indices[uniform_int(rng, i, pool_size - 1)]);
            subset.assign(indices.begin(), indices.begin() + S);
            std::sort(subset.begin(), subset.end());
            if (std::find(class_subsets.begin(), class_subsets.end(), subset) ==
                class_subsets.end())
                break;
            if (attempt > 1000)
                throw std::logic_error("synthetic corpus: could not draw distinct class subsets");
        }
        class_subsets.push_back(subset);
        prototypes[c].reserve(S);
        for (int idx : subset) prototypes[c].push_back(pool[idx]);
    }

    Corpus corpus;
    for (int c = 0; c < spec.num_classes; ++c) {
        Split split = c < spec.train_classes                      ? Split::Train
                      : c < spec.train_classes + spec.val_classes ? Split::Val
                                                                  : Split::Test;
        corpus.class_splits.emplace_back("c" + std::to_string(c), split);
    }

    for (int c = 0; c < spec.num_classes; ++c) {
        const std::string cls = "c" + std::to_string(c);
        for (int v = 0; v < spec.videos_per_class; ++v) {
            const long action_len = uniform_int(rng, spec.action_length_min, spec.action_length_max);
            std::vector<int> durations(S);
            int span = 0;
            for (int s = 0; s < S; ++s) {
                const double jitter = uniform_real(rng, spec.speed_jitter_min, spec.speed_jitter_max);
                durations[s] = std::max(1, (int)std::lround((double)action_len / S * jitter));
                span += durations[s];
            }
            std::vector<int> order(S);
            std::iota(order.begin(), order.end(), 0);
            if (uniform01(rng) < spec.permutation_probability) {
                for (int i = S - 1; i > 0; --i)
                    std::swap(order[i], order[uniform_int(rng, 0, i)]);
            }
            int L = (int)uniform_int(rng, spec.video_length_min, spec.video_length_max);
            L = std::max(L, span);
            const int start = (int)uniform_int(rng, 0, L - span);

            VideoFeatures video;
            video.id = cls + "_v" + std::to_string(v);
            video.class_label = cls;
            video.frames = Matrix(L, d);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < d; ++j) video.frames(i, j) = spec.noise_sigma * normal(rng);
            int t = start;
            for (int s = 0; s < S; ++s) {
                const Matrix& proto = prototypes[c][order[s]];
                for (int u = 0; u < durations[s]; ++u, ++t)
                    for (int j = 0; j < d; ++j) video.frames(t, j) += proto(0, j);
            }
            video.annotations.push_back({(double)start, (double)(start + span)});
            corpus.videos.push_back(std::move(video));
        }
    }
    return corpus;
}

// --------------------------------------------------------------------------
// Resampling

std::pair<Matrix, int> resample_or_pad(const Matrix& frames, int T) {
    const int L = frames.rows();
    if (L < 1) throw std::invalid_argument("resample_or_pad: empty input");
    if (T < 1) throw std::invalid_argument("resample_or_pad: T must be >= 1");
    Matrix out(T, frames.cols());
    if (L > T) {
        for (int i = 0; i < T; ++i) {
            const int src = T == 1 ? 0 : (int)std::lround((double)i * (L - 1) / (T - 1));
            std::copy(frames.row(src), frames.row(src) + frames.cols(), out.row(i));
        }
        return {std::move(out), T};
    }
    std::copy(frames.data(), frames.data() + frames.size(), out.data());
    return {std::move(out), L};
}

// --------------------------------------------------------------------------
// Triplet sampling

Triplet sample_triplet(const Corpus& corpus, int T, std::mt19937_64& rng) {
    const auto train = corpus.videos_in(Split::Train);
    std::vector<std::string> train_classes = corpus.classes_in(Split::Train);
    if (train_classes.size() < 2)
        throw std::runtime_error("sample_triplet: need >= 2 train classes, have " +
                                 std::to_string(train_classes.size()));

    auto annotated_same_class = [&](const VideoFeatures* v) {
        int n = 0;
        for (const auto* o : train)
            if (o->class_label == v->class_label && !o->annotations.empty()) ++n;
        return n;
    };

    std::vector<const VideoFeatures*> eligible;
    for (const auto* v : train)
        if (!v->annotations.empty() && annotated_same_class(v) >= 2) eligible.push_back(v);
    if (eligible.empty())
        throw std::runtime_error("sample_triplet: no class has two annotated train videos");

    const VideoFeatures* qv = eligible[uniform_int(rng, 0, (long)eligible.size() - 1)];
    const Segment gt = qv->annotations[uniform_int(rng, 0, (long)qv->annotations.size() - 1)];

    std::vector<const VideoFeatures*> positives, negatives;
    for (const auto* v : train) {
        if (v == qv) continue;
        if (v->class_label == qv->class_label) {
            if (!v->annotations.empty()) positives.push_back(v);
        } else {
            negatives.push_back(v);
        }
    }
    if (positives.empty() || negatives.empty())
        throw std::runtime_error("sample_triplet: insufficient corpus for query class '" +
                                 qv->class_label + "'");

    Triplet t;
    t.query_video = qv;
    t.query_segment = gt;
    t.query = resample_or_pad(qv->frames.slice_rows((int)gt.start, (int)gt.end), T).first;
    t.positive = positives[uniform_int(rng, 0, (long)positives.size() - 1)];
    t.negative = negatives[uniform_int(rng, 0, (long)negatives.size() - 1)];
    return t;
}

// --------------------------------------------------------------------------
// File formats

namespace {

struct LineReader {
    std::istream& in;
    int line_no = 0;
    bool next(std::string& out) {
        if (!std::getline(in, out)) return false;
        ++line_no;
        return true;
    }
    [[noreturn]] void fail(const std::string& why) const {
        throw std::runtime_error("feature file: line " + std::to_string(line_no) + ": " + why);
    }
};

double parse_double(const std::string& tok, LineReader& r) {
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        r.fail("unparsable number '" + tok + "'");
    }
    if (pos != tok.size()) r.fail("unparsable number '" + tok + "'");
    if (!std::isfinite(v)) r.fail("non-finite value '" + tok + "'");
    return v;
}

}  // namespace

VideoFeatures load_feature_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("feature file: cannot open '" + path + "'");
    LineReader r{in};
    std::string line;

    if (!r.next(line)) {
        r.line_no = 1;
        r.fail("missing header 'L d'");
    }
    std::istringstream header(line);
    long L = 0, d = 0;
    if (!(header >> L >> d) || L < 1 || d < 1) r.fail("malformed header, expected 'L d'");

    VideoFeatures v;
    v.id = fs::path(path).stem().string();
    v.frames = Matrix((int)L, (int)d);

    if (!r.next(line)) {
        ++r.line_no;
        r.fail("missing 'class <label>' line");
    }
    {
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw != "class" || !(ss >> v.class_label)) r.fail("expected 'class <label>'");
    }

    if (!r.next(line)) {
        ++r.line_no;
        r.fail("missing 'annotations ...' line");
    }
    {
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw != "annotations") r.fail("expected 'annotations [s e ...]'");
        std::vector<double> nums;
        std::string tok;
        while (ss >> tok) nums.push_back(parse_double(tok, r));
        if (nums.size() % 2 != 0) r.fail("annotations need an even number of values");
        for (size_t i = 0; i < nums.size(); i += 2) {
            Segment seg{nums[i], nums[i + 1]};
            if (!seg.valid() || seg.end > (double)L)
                r.fail("annotation [" + format_double(seg.start) + "," + format_double(seg.end) +
                       ") does not fit video of length " + std::to_string(L));
            v.annotations.push_back(seg);
        }
    }

    for (long i = 0; i < L; ++i) {
        if (!r.next(line)) {
            ++r.line_no;
            r.fail("expected feature row " + std::to_string(i + 1) + " of " + std::to_string(L));
        }
        std::istringstream ss(line);
        std::string tok;
        long j = 0;
        while (ss >> tok) {
            if (j >= d) r.fail("row has more than " + std::to_string(d) + " values");
            v.frames((int)i, (int)j) = parse_double(tok, r);
            ++j;
        }
        if (j != d)
            r.fail("row has " + std::to_string(j) + " values, expected " + std::to_string(d));
    }
    return v;
}

void save_feature_file(const VideoFeatures& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("feature file: cannot write '" + path + "'");
    out << v.frames.rows() << ' ' << v.frames.cols() << '\n';
    out << "class " << v.class_label << '\n';
    out << "annotations";
    for (const auto& seg : v.annotations)
        out << ' ' << format_double(seg.start) << ' ' << format_double(seg.end);
    out << '\n';
    for (int i = 0; i < v.frames.rows(); ++i) {
        for (int j = 0; j < v.frames.cols(); ++j) {
            if (j) out << ' ';
            out << format_double(v.frames(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("feature file: write failed for '" + path + "'");
}

Corpus load_corpus_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("manifest: cannot open '" + manifest_path + "'");
    const fs::path base = fs::path(manifest_path).parent_path();

    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string first;
        ss >> first;
        if (first == "split") {
            std::string cls, which;
            if (!(ss >> cls >> which))
                throw std::runtime_error("manifest: line " + std::to_string(line_no) +
                                         ": expected 'split <class> <train|val|test>'");
            Split s;
            if (which == "train")
                s = Split::Train;
            else if (which == "val")
                s = Split::Val;
            else if (which == "test")
                s = Split::Test;
            else
                throw std::runtime_error("manifest: line " + std::to_string(line_no) +
                                         ": unknown split '" + which + "'");
            for (const auto& [c, old] : corpus.class_splits)
                if (c == cls)
                    throw std::runtime_error("manifest: line " + std::to_string(line_no) +
                                             ": duplicate split for class '" + cls + "'");
            corpus.class_splits.emplace_back(cls, s);
        } else {
            corpus.videos.push_back(load_feature_file((base / line).string()));
        }
    }
    for (const auto& v : corpus.videos) corpus.split_of(v.class_label);  // must be assigned
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir, const std::string& manifest_name) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / manifest_name);
    if (!manifest) throw std::runtime_error("manifest: cannot write in '" + dir + "'");
    for (const auto& [cls, split] : corpus.class_splits)
        manifest << "split " << cls << ' ' << split_name(split) << '\n';
    for (const auto& v : corpus.videos) {
        const std::string name = v.id + ".feat";
        save_feature_file(v, (fs::path(dir) / name).string());
        manifest << name << '\n';
    }
    if (!manifest) throw std::runtime_error("manifest: write failed in '" + dir + "'");
}

}  // namespace vmr
