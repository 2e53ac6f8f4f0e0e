#include "vmr/model.hpp"

#include "vmr/rand.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vmr {

int ModelConfig::head_width(int stage) const {
    switch (stage) {
        case 0: return hidden_dim;
        case 1: return std::max(1, hidden_dim / 2);
        case 2: return std::max(1, hidden_dim / 4);
    }
    throw std::logic_error("head_width: bad stage");
}

// --------------------------------------------------------------------------
// Initialization

namespace {

constexpr const char* kGateNames[4] = {"i", "f", "o", "g"};

Matrix uniform_matrix(int rows, int cols, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt((double)std::max(1, fan_in));
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng, -bound, bound);
    return m;
}

void init_lstm(const std::string& prefix, int d_in, int d_h, ParamStore& store,
               std::mt19937_64& rng) {
    for (const char* g : kGateNames) {
        store.create(prefix + ".Wx_" + g, uniform_matrix(d_in, d_h, d_in, rng));
        store.create(prefix + ".Wh_" + g, uniform_matrix(d_h, d_h, d_h, rng));
        store.create(prefix + ".b_" + g, uniform_matrix(1, d_h, d_h, rng));
    }
}

void init_head(const std::string& prefix, int d_in, int out_dim, const ModelConfig& cfg,
               ParamStore& store, std::mt19937_64& rng) {
    int w_prev = d_in;
    for (int s = 1; s <= 2; ++s) {
        const int w = cfg.head_width(s);
        const std::string stage = prefix + "." + std::to_string(s - 1);
        store.create(stage + ".W", uniform_matrix(w_prev, w, w_prev, rng));
        store.create(stage + ".b", uniform_matrix(1, w, w_prev, rng));
        store.create(stage + ".bn.gamma", Matrix::full(1, w, 1.0));
        store.create(stage + ".bn.beta", Matrix(1, w));
        store.create(stage + ".bn.run_mean", Matrix(1, w), /*trainable=*/false);
        store.create(stage + ".bn.run_var", Matrix::full(1, w, 1.0), /*trainable=*/false);
        w_prev = w;
    }
    store.create(prefix + ".out.W", uniform_matrix(w_prev, out_dim, w_prev, rng));
    store.create(prefix + ".out.b", uniform_matrix(1, out_dim, w_prev, rng));
}

std::string lstm_prefix(const ModelConfig& cfg, bool query_stream) {
    if (cfg.shared_lstm) return "lstm_s";
    return query_stream ? "lstm_q" : "lstm_p";
}

}  // namespace

void init_model_params(const ModelConfig& cfg, ParamStore& store, std::mt19937_64& rng) {
    if (cfg.T < 1 || cfg.feature_dim < 1 || cfg.hidden_dim < 1 || cfg.fusion_layers < 0)
        throw std::invalid_argument("model config: dimensions must be positive");
    if (cfg.ks.empty()) throw std::invalid_argument("model config: ks must be non-empty");

    const int d = cfg.feature_dim, h = cfg.hidden_dim;
    init_lstm(lstm_prefix(cfg, true), d, h, store, rng);
    if (!cfg.shared_lstm) init_lstm(lstm_prefix(cfg, false), d, h, store, rng);

    const int K = (int)cfg.ks.size();
    for (int l = 0; l < cfg.fusion_layers; ++l) {
        const std::string prefix = "fusion." + std::to_string(l);
        store.create(prefix + ".W_pre", uniform_matrix(h, h, h, rng));
        for (int k = 0; k < K; ++k)
            store.create(prefix + ".Wk." + std::to_string(k), uniform_matrix(h, h, h, rng));
        store.create(prefix + ".W_post", uniform_matrix(K * h, h, K * h, rng));
    }

    init_head("score", h, 1, cfg, store, rng);
    init_head("reg", h, 2, cfg, store, rng);
}

// --------------------------------------------------------------------------
// Tape builders

std::vector<NodeId> adjacency_nodes(Tape& tape, const AdjacencySet& adj) {
    std::vector<NodeId> nodes;
    nodes.reserve(adj.matrices.size());
    for (const Matrix& m : adj.matrices) nodes.push_back(tape.leaf(m));
    return nodes;
}

Matrix make_dropout_mask(int rows, int cols, double rate, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw std::invalid_argument("dropout rate must be in [0,1)");
    Matrix mask(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < mask.size(); ++i)
        mask.data()[i] = uniform01(rng) < rate ? 0.0 : keep;
    return mask;
}

NodeId lstm_encode(Tape& tape, ParamStore& params, const std::string& prefix, const Matrix& seq,
                   const ModelConfig& cfg, const ForwardOptions& opt) {
    const int T = seq.rows(), d_h = cfg.hidden_dim;
    if (seq.cols() != cfg.feature_dim)
        throw std::invalid_argument("lstm_encode: input width " + std::to_string(seq.cols()) +
                                    " does not match feature_dim " +
                                    std::to_string(cfg.feature_dim));

    // Gate parameters fused along the feature axis so each timestep is one
    // matmul; the input projections for all timesteps run as one product.
    std::vector<NodeId> wx, wh, b;
    for (const char* g : kGateNames) {
        wx.push_back(tape.param(params, prefix + ".Wx_" + g));
        wh.push_back(tape.param(params, prefix + ".Wh_" + g));
        b.push_back(tape.param(params, prefix + ".b_" + g));
    }
    NodeId wx_all = tape.concat_cols(wx);
    NodeId wh_all = tape.concat_cols(wh);
    NodeId b_all = tape.concat_cols(b);
    NodeId xw = tape.add_row_vec(tape.matmul(tape.leaf(seq), wx_all), b_all);  // T x 4*d_h

    NodeId h = tape.leaf(Matrix(1, d_h));
    NodeId c = tape.leaf(Matrix(1, d_h));
    std::vector<NodeId> hidden;
    hidden.reserve(T);
    for (int t = 0; t < T; ++t) {
        NodeId z = tape.add(tape.slice_rows(xw, t, t + 1), tape.matmul(h, wh_all));
        NodeId gi = tape.sigmoid(tape.slice_cols(z, 0, d_h));
        NodeId gf = tape.sigmoid(tape.slice_cols(z, d_h, 2 * d_h));
        NodeId go = tape.sigmoid(tape.slice_cols(z, 2 * d_h, 3 * d_h));
        NodeId gc = tape.tanh(tape.slice_cols(z, 3 * d_h, 4 * d_h));
        c = tape.add(tape.hadamard(gf, c), tape.hadamard(gi, gc));
        h = tape.hadamard(go, tape.tanh(c));
        hidden.push_back(h);
    }
    NodeId out = tape.concat_rows(hidden);
    if (opt.training && cfg.dropout_rate > 0.0) {
        if (!opt.rng) throw std::invalid_argument("lstm_encode: training dropout needs an rng");
        out = tape.hadamard(out, tape.leaf(make_dropout_mask(T, d_h, cfg.dropout_rate, *opt.rng)));
    }
    return out;
}

NodeId build_h0(Tape& tape, NodeId hq, NodeId hp) {
    const Matrix& a = tape.value(hq);
    const Matrix& b = tape.value(hp);
    check_shape(a.cols() == b.cols() && a.rows() == b.rows(), "build_h0", a, b);
    return tape.concat_rows({hq, hp});
}

NodeId fusion_layer(Tape& tape, ParamStore& params, const std::string& prefix, NodeId H,
                    const std::vector<NodeId>& adjacency, bool cnn_variant) {
    for (NodeId a : adjacency)
        check_shape(tape.value(a).cols() == tape.value(H).rows(), "fusion_layer adjacency",
                    tape.value(a), tape.value(H));
    NodeId projected = tape.matmul(H, tape.param(params, prefix + ".W_pre"));
    std::vector<NodeId> branches;
    branches.reserve(adjacency.size());
    for (size_t k = 0; k < adjacency.size(); ++k) {
        NodeId wk = tape.param(params, prefix + ".Wk." + std::to_string(k));
        NodeId mixed = cnn_variant ? projected : tape.matmul(adjacency[k], projected);
        branches.push_back(tape.tanh(tape.matmul(mixed, wk)));
    }
    return tape.matmul(tape.concat_cols(branches), tape.param(params, prefix + ".W_post"));
}

NodeId fusion_forward(Tape& tape, ParamStore& params, NodeId h0,
                      const std::vector<NodeId>& adjacency, const ModelConfig& cfg) {
    NodeId h = h0;
    for (int l = 0; l < cfg.fusion_layers; ++l)
        h = fusion_layer(tape, params, "fusion." + std::to_string(l), h, adjacency,
                         cfg.cnn_variant);
    return h;
}

NodeId pair_to_pooled(Tape& tape, ParamStore& params, const Matrix& q, const Matrix& p,
                      const std::vector<NodeId>& adjacency, const ModelConfig& cfg,
                      const ForwardOptions& opt) {
    NodeId hq = lstm_encode(tape, params, lstm_prefix(cfg, true), q, cfg, opt);
    NodeId hp = lstm_encode(tape, params, lstm_prefix(cfg, false), p, cfg, opt);
    NodeId fused = fusion_forward(tape, params, build_h0(tape, hq, hp), adjacency, cfg);
    return tape.mean_over_rows(fused);
}

namespace {

NodeId mlp_head(Tape& tape, ParamStore& params, const std::string& prefix, NodeId input,
                const ModelConfig& cfg, const ForwardOptions& opt, bool bound_output) {
    NodeId x = input;
    for (int s = 0; s < 2; ++s) {
        const std::string stage = prefix + "." + std::to_string(s);
        x = tape.add_row_vec(tape.matmul(x, tape.param(params, stage + ".W")),
                             tape.param(params, stage + ".b"));
        NodeId gamma = tape.param(params, stage + ".bn.gamma");
        NodeId beta = tape.param(params, stage + ".bn.beta");
        if (opt.training) {
            x = tape.batch_norm_train(x, gamma, beta, params, stage + ".bn.run_mean",
                                      stage + ".bn.run_var", cfg.bn_eps, cfg.bn_momentum,
                                      opt.update_running_stats);
        } else {
            x = tape.batch_norm_eval(x, gamma, beta, params.value(stage + ".bn.run_mean"),
                                     params.value(stage + ".bn.run_var"), cfg.bn_eps);
        }
        x = tape.tanh(x);
    }
    x = tape.add_row_vec(tape.matmul(x, tape.param(params, prefix + ".out.W")),
                         tape.param(params, prefix + ".out.b"));
    return bound_output ? tape.tanh(x) : x;
}

}  // namespace

NodeId score_head(Tape& tape, ParamStore& params, NodeId input, const ModelConfig& cfg,
                  const ForwardOptions& opt) {
    return mlp_head(tape, params, "score", input, cfg, opt, /*bound_output=*/true);
}

NodeId regression_head(Tape& tape, ParamStore& params, NodeId input, const ModelConfig& cfg,
                       const ForwardOptions& opt) {
    return mlp_head(tape, params, "reg", input, cfg, opt, /*bound_output=*/false);
}

PairOutput forward_pair(const Matrix& q, const Matrix& p, ParamStore& params,
                        const ModelConfig& cfg, const AdjacencySet& adj,
                        const ForwardOptions& opt) {
    if (adj.node_count() != q.rows() + p.rows())
        throw std::invalid_argument("forward_pair: adjacency is over " +
                                    std::to_string(adj.node_count()) + " nodes but inputs give " +
                                    std::to_string(q.rows() + p.rows()));
    Tape tape;
    std::vector<NodeId> adjacency = adjacency_nodes(tape, adj);
    NodeId pooled = pair_to_pooled(tape, params, q, p, adjacency, cfg, opt);
    NodeId s = score_head(tape, params, pooled, cfg, opt);
    NodeId reg = regression_head(tape, params, pooled, cfg, opt);
    PairOutput out;
    out.score = tape.scalar(s);
    out.t_center = tape.value(reg)(0, 0);
    out.t_length = tape.value(reg)(0, 1);
    return out;
}

// --------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    for (const auto& [name, e] : store.entries()) {
        if (!e.value.all_finite())
            throw std::runtime_error("checkpoint: parameter '" + name + "' has non-finite values");
        out << name << ' ' << e.value.rows() << ' ' << e.value.cols();
        for (size_t i = 0; i < e.value.size(); ++i) out << ' ' << format_double(e.value.data()[i]);
        out << '\n';
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(ParamStore& store, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name;
        int rows = 0, cols = 0;
        if (!(ss >> name >> rows >> cols))
            throw std::runtime_error("checkpoint: line " + std::to_string(line_no) +
                                     ": expected 'name rows cols values...'");
        if (!store.has(name))
            throw std::runtime_error("checkpoint mismatch: parameter '" + name +
                                     "' is not part of the configured architecture");
        Matrix& dst = store.value(name);
        if (dst.rows() != rows || dst.cols() != cols)
            throw std::runtime_error("checkpoint mismatch: parameter '" + name + "' has shape " +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     " but the architecture expects " + dst.shape_str());
        for (size_t i = 0; i < dst.size(); ++i)
            if (!(ss >> dst.data()[i]))
                throw std::runtime_error("checkpoint: line " + std::to_string(line_no) +
                                         ": too few values for '" + name + "'");
        double extra;
        if (ss >> extra)
            throw std::runtime_error("checkpoint: line " + std::to_string(line_no) +
                                     ": too many values for '" + name + "'");
        if (!dst.all_finite())
            throw std::runtime_error("checkpoint: line " + std::to_string(line_no) +
                                     ": non-finite values for '" + name + "'");
        seen.insert(name);
    }
    for (const auto& [name, e] : store.entries())
        if (!seen.count(name))
            throw std::runtime_error("checkpoint mismatch: parameter '" + name +
                                     "' missing from '" + path + "'");
}

}  // namespace vmr
