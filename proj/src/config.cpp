#include "vmr/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vmr {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream ss(s);
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "': expected integer, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        unsigned long long r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "': expected integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "': expected number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& tok : split_list(v)) out.push_back(to_int(key, tok));
    if (out.empty()) throw std::invalid_argument("config: key '" + key + "': empty list");
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& tok : split_list(v)) out.push_back(to_double(key, tok));
    if (out.empty()) throw std::invalid_argument("config: key '" + key + "': empty list");
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    char buf[32];
    for (size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", v[i]);
        s += (i ? "," : "") + std::string(buf);
    }
    return s;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

void RunConfig::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, v] : kv) {
        if (key == "dataset.num_classes") dataset.num_classes = to_int(key, v);
        else if (key == "dataset.subactions_per_class") dataset.subactions_per_class = to_int(key, v);
        else if (key == "dataset.feature_dim") dataset.feature_dim = to_int(key, v);
        else if (key == "dataset.video_length_min") dataset.video_length_min = to_int(key, v);
        else if (key == "dataset.video_length_max") dataset.video_length_max = to_int(key, v);
        else if (key == "dataset.action_length_min") dataset.action_length_min = to_int(key, v);
        else if (key == "dataset.action_length_max") dataset.action_length_max = to_int(key, v);
        else if (key == "dataset.noise_sigma") dataset.noise_sigma = to_double(key, v);
        else if (key == "dataset.permutation_probability") dataset.permutation_probability = to_double(key, v);
        else if (key == "dataset.speed_jitter_min") dataset.speed_jitter_min = to_double(key, v);
        else if (key == "dataset.speed_jitter_max") dataset.speed_jitter_max = to_double(key, v);
        else if (key == "dataset.videos_per_class") dataset.videos_per_class = to_int(key, v);
        else if (key == "dataset.train_classes") dataset.train_classes = to_int(key, v);
        else if (key == "dataset.val_classes") dataset.val_classes = to_int(key, v);
        else if (key == "dataset.test_classes") dataset.test_classes = to_int(key, v);
        else if (key == "dataset.seed") dataset.seed = to_u64(key, v);
        else if (key == "dataset.corpus") corpus_manifest = v;
        else if (key == "model.T") model.T = to_int(key, v);
        else if (key == "model.hidden_dim") model.hidden_dim = to_int(key, v);
        else if (key == "model.fusion_layers") model.fusion_layers = to_int(key, v);
        else if (key == "model.ks") model.ks = to_int_list(key, v);
        else if (key == "model.dropout") model.dropout_rate = to_double(key, v);
        else if (key == "model.variant") {
            if (v == "graph") model.cnn_variant = false;
            else if (v == "cnn") model.cnn_variant = true;
            else throw std::invalid_argument("config: key 'model.variant': expected graph|cnn, got '" + v + "'");
        }
        else if (key == "model.shared_lstm") model.shared_lstm = to_bool(key, v);
        else if (key == "model.bn_eps") model.bn_eps = to_double(key, v);
        else if (key == "model.bn_momentum") model.bn_momentum = to_double(key, v);
        else if (key == "train.gamma") train.margin_gamma = to_double(key, v);
        else if (key == "train.lambda") train.lambda_reg = to_double(key, v);
        else if (key == "train.mu") train.mu = to_double(key, v);
        else if (key == "train.batch_size") train.batch_size = to_int(key, v);
        else if (key == "train.epochs") train.epochs = to_int(key, v);
        else if (key == "train.lr_triplet") train.lr_triplet = to_double(key, v);
        else if (key == "train.beta1") train.beta1 = to_double(key, v);
        else if (key == "train.beta2") train.beta2 = to_double(key, v);
        else if (key == "train.adam_eps") train.adam_eps = to_double(key, v);
        else if (key == "train.lr_regression") train.lr_regression = to_double(key, v);
        else if (key == "train.seed") train.seed = to_u64(key, v);
        else if (key == "train.checkpoint_interval") train.checkpoint_interval = to_int(key, v);
        else if (key == "train.joint_total_loss") train.joint_total_loss = to_bool(key, v);
        else if (key == "proposals.window_fractions") {
            train.proposals.window_fractions = to_double_list(key, v);
            eval.proposals.window_fractions = train.proposals.window_fractions;
        }
        else if (key == "proposals.stride_fraction") {
            train.proposals.stride_fraction = to_double(key, v);
            eval.proposals.stride_fraction = train.proposals.stride_fraction;
        }
        else if (key == "eval.thresholds") eval.thresholds = to_double_list(key, v);
        else if (key == "eval.frame_len_min") eval.frame_len_min = to_int(key, v);
        else if (key == "eval.frame_len_max") eval.frame_len_max = to_int(key, v);
        else if (key == "eval.seed") eval.seed = to_u64(key, v);
        else if (key == "eval.checkpoint") checkpoint = v;
        else if (key == "eval.baseline") {
            if (v != "chance" && v != "frame" && v != "none")
                throw std::invalid_argument("config: key 'eval.baseline': expected chance|frame|none, got '" + v + "'");
            baseline = v;
        }
        else if (key == "eval.dump_proposals") dump_proposals = v;
        else if (key == "eval.proposals_file") proposals_file = v;
        else if (key == "ablate.layer_counts") ablate_layers = to_int_list(key, v);
        else if (key == "ablate.graph_counts") ablate_graphs = to_int_list(key, v);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out << "dataset.num_classes = " << dataset.num_classes << '\n'
        << "dataset.subactions_per_class = " << dataset.subactions_per_class << '\n'
        << "dataset.feature_dim = " << dataset.feature_dim << '\n'
        << "dataset.video_length_min = " << dataset.video_length_min << '\n'
        << "dataset.video_length_max = " << dataset.video_length_max << '\n'
        << "dataset.action_length_min = " << dataset.action_length_min << '\n'
        << "dataset.action_length_max = " << dataset.action_length_max << '\n'
        << "dataset.noise_sigma = " << fmt(dataset.noise_sigma) << '\n'
        << "dataset.permutation_probability = " << fmt(dataset.permutation_probability) << '\n'
        << "dataset.speed_jitter_min = " << fmt(dataset.speed_jitter_min) << '\n'
        << "dataset.speed_jitter_max = " << fmt(dataset.speed_jitter_max) << '\n'
        << "dataset.videos_per_class = " << dataset.videos_per_class << '\n'
        << "dataset.train_classes = " << dataset.train_classes << '\n'
        << "dataset.val_classes = " << dataset.val_classes << '\n'
        << "dataset.test_classes = " << dataset.test_classes << '\n'
        << "dataset.seed = " << dataset.seed << '\n';
    if (!corpus_manifest.empty()) out << "dataset.corpus = " << corpus_manifest << '\n';
    out << "model.T = " << model.T << '\n'
        << "model.hidden_dim = " << model.hidden_dim << '\n'
        << "model.fusion_layers = " << model.fusion_layers << '\n'
        << "model.ks = " << join(model.ks) << '\n'
        << "model.dropout = " << fmt(model.dropout_rate) << '\n'
        << "model.variant = " << (model.cnn_variant ? "cnn" : "graph") << '\n'
        << "model.shared_lstm = " << (model.shared_lstm ? "true" : "false") << '\n'
        << "model.bn_eps = " << fmt(model.bn_eps) << '\n'
        << "model.bn_momentum = " << fmt(model.bn_momentum) << '\n'
        << "train.gamma = " << fmt(train.margin_gamma) << '\n'
        << "train.lambda = " << fmt(train.lambda_reg) << '\n'
        << "train.mu = " << fmt(train.mu) << '\n'
        << "train.batch_size = " << train.batch_size << '\n'
        << "train.epochs = " << train.epochs << '\n'
        << "train.lr_triplet = " << fmt(train.lr_triplet) << '\n'
        << "train.beta1 = " << fmt(train.beta1) << '\n'
        << "train.beta2 = " << fmt(train.beta2) << '\n'
        << "train.adam_eps = " << fmt(train.adam_eps) << '\n'
        << "train.lr_regression = " << fmt(train.lr_regression) << '\n'
        << "train.seed = " << train.seed << '\n'
        << "train.checkpoint_interval = " << train.checkpoint_interval << '\n'
        << "train.joint_total_loss = " << (train.joint_total_loss ? "true" : "false") << '\n'
        << "proposals.window_fractions = " << join(train.proposals.window_fractions) << '\n'
        << "proposals.stride_fraction = " << fmt(train.proposals.stride_fraction) << '\n'
        << "eval.thresholds = " << join(eval.thresholds) << '\n'
        << "eval.frame_len_min = " << eval.frame_len_min << '\n'
        << "eval.frame_len_max = " << eval.frame_len_max << '\n'
        << "eval.seed = " << eval.seed << '\n';
    if (!checkpoint.empty()) out << "eval.checkpoint = " << checkpoint << '\n';
    out << "eval.baseline = " << baseline << '\n';
    if (!dump_proposals.empty()) out << "eval.dump_proposals = " << dump_proposals << '\n';
    if (!proposals_file.empty()) out << "eval.proposals_file = " << proposals_file << '\n';
    out << "ablate.layer_counts = " << join(ablate_layers) << '\n'
        << "ablate.graph_counts = " << join(ablate_graphs) << '\n';
    return out.str();
}

std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: " + origin + " line " + std::to_string(line_no) +
                                        ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config: " + origin + " line " + std::to_string(line_no) +
                                        ": empty key");
        if (kv.count(key))
            throw std::invalid_argument("config: " + origin + " line " + std::to_string(line_no) +
                                        ": duplicate key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path);
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (!path.empty()) cfg.apply(parse_config_file(path));
    return cfg;
}

std::string config_hash(const std::string& resolved_text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : resolved_text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace vmr
