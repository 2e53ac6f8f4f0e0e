#pragma once

#include "vmr/graphs.hpp"
#include "vmr/tape.hpp"

#include <random>
#include <string>
#include <vector>

namespace vmr {

struct ModelConfig {
    int T = 16;
    int feature_dim = 32;  // d, matches the corpus
    int hidden_dim = 32;   // d_h; LSTM and fusion layers preserve this width
    int fusion_layers = 2;
    std::vector<int> ks = {1, 2, 3};
    double dropout_rate = 0.4;
    bool cnn_variant = false;  // per-graph convolution becomes a plain projection
    bool shared_lstm = false;  // one parameter set for both encoders
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    int head_width(int stage) const;  // d, d/2, d/4 chain
};

struct ForwardOptions {
    bool training = false;
    bool update_running_stats = false;  // batch-norm side effect, training only
    std::mt19937_64* rng = nullptr;     // dropout source; required when training with dropout
};

// Creates every named parameter (two LSTMs, L fusion layers, both heads)
// with uniform +-1/sqrt(fan_in) init, plus batch-norm running statistics.
void init_model_params(const ModelConfig& cfg, ParamStore& store, std::mt19937_64& rng);

// Tape builders ------------------------------------------------------------

std::vector<NodeId> adjacency_nodes(Tape& tape, const AdjacencySet& adj);

// Standard LSTM recurrence over the rows of seq (T x d), zero initial
// state; returns the stacked hidden states (T x d_h). Output dropout when
// training.
NodeId lstm_encode(Tape& tape, ParamStore& params, const std::string& prefix, const Matrix& seq,
                   const ModelConfig& cfg, const ForwardOptions& opt);

// Row-concatenation [Hq; Hp], query rows first.
NodeId build_h0(Tape& tape, NodeId hq, NodeId hp);

// One fusion layer: H~ = H W_pre; per graph tanh(A_k H~ W_k) (or
// tanh(H~ W_k) in the cnn variant); feature concat; times W_post.
NodeId fusion_layer(Tape& tape, ParamStore& params, const std::string& prefix, NodeId H,
                    const std::vector<NodeId>& adjacency, bool cnn_variant);

NodeId fusion_forward(Tape& tape, ParamStore& params, NodeId h0,
                      const std::vector<NodeId>& adjacency, const ModelConfig& cfg);

// Full pipeline for one (query, proposal) pair up to the pooled feature
// (1 x d_h). The query/proposal encoders use separate parameters unless
// shared_lstm is set.
NodeId pair_to_pooled(Tape& tape, ParamStore& params, const Matrix& q, const Matrix& p,
                      const std::vector<NodeId>& adjacency, const ModelConfig& cfg,
                      const ForwardOptions& opt);

// MLP heads per the (linear -> batch-norm -> tanh) stage family; the final
// stage has no batch-norm. The score head squashes to [-1, 1], the
// regression head emits an unbounded N x 2.
NodeId score_head(Tape& tape, ParamStore& params, NodeId input, const ModelConfig& cfg,
                  const ForwardOptions& opt);
NodeId regression_head(Tape& tape, ParamStore& params, NodeId input, const ModelConfig& cfg,
                       const ForwardOptions& opt);

struct PairOutput {
    double score = 0.0;
    double t_center = 0.0;
    double t_length = 0.0;
};

PairOutput forward_pair(const Matrix& q, const Matrix& p, ParamStore& params,
                        const ModelConfig& cfg, const AdjacencySet& adj,
                        const ForwardOptions& opt = {});

// Checkpoint: one "name rows cols v1 v2 ..." line per store entry
// (parameters and running statistics), name-ordered.
void save_checkpoint(const ParamStore& store, const std::string& path);
// Validates names and shapes both ways against the existing store.
void load_checkpoint(ParamStore& store, const std::string& path);

Matrix make_dropout_mask(int rows, int cols, double rate, std::mt19937_64& rng);

}  // namespace vmr
