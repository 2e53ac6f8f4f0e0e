#pragma once

#include "vmr/dataset.hpp"
#include "vmr/model.hpp"
#include "vmr/proposals.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace vmr {

struct TrainConfig {
    double margin_gamma = 0.5;
    double lambda_reg = 5e-3;
    double mu = 1.0;
    int batch_size = 32;
    int epochs = 200;
    double lr_triplet = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double lr_regression = 0.1;
    std::uint64_t seed = 7;
    int checkpoint_interval = 0;  // epochs; 0 = final checkpoint only
    // L_total = L_tri + mu*L_reg through a single optimizer over all
    // parameters, instead of the dual-optimizer setup.
    bool joint_total_loss = false;
    ProposalConfig proposals;
};

struct AdamState {
    double lr, beta1, beta2, eps;
    long step_count = 0;
    std::map<std::string, Matrix> m, v;

    AdamState(double lr_, double b1, double b2, double eps_)
        : lr(lr_), beta1(b1), beta2(b2), eps(eps_) {}
};

// Bias-corrected Adam update applied to trainable parameters whose names
// pass the filter; everything else stays bitwise unchanged.
void adam_step(AdamState& state, ParamStore& params,
               const std::function<bool(const std::string&)>& name_filter);

// Relative offsets between a proposal and its ground truth.
struct OffsetTarget {
    double t_center = 0.0;  // (loc - loc*) / len*
    double t_length = 0.0;  // log(len / len*)
};

OffsetTarget encode_offsets(const Segment& proposal, const Segment& gt);

// Sum over the batch of hinge terms max(0, gamma - s_pos + s_neg) plus
// lambda * ||theta||^2 over every trainable parameter.
double triplet_loss(const std::vector<std::pair<double, double>>& pos_neg_scores,
                    const ParamStore& params, double gamma, double lambda);

// Mean over pairs of |Tc - Tc*| + |Tl - Tl*|.
double regression_loss(const std::vector<std::pair<double, double>>& preds,
                       const std::vector<OffsetTarget>& targets);

// Tape-side loss assembly, shared between the train loop and the gradient
// checks.
struct BatchLossNodes {
    NodeId l_tri = -1;
    NodeId l_reg = -1;
};

struct PreparedTriplet {
    Matrix query;            // T x d
    Matrix positive_frames;  // T x d, best-IoU proposal of the positive video
    Matrix negative_frames;  // T x d, best-IoU proposal of the negative video
    OffsetTarget target;     // offsets of the positive proposal vs its gt
};

BatchLossNodes build_batch_losses(Tape& tape, ParamStore& params,
                                  const std::vector<PreparedTriplet>& batch,
                                  const std::vector<NodeId>& adjacency, const ModelConfig& cfg,
                                  const TrainConfig& tcfg, const ForwardOptions& opt);

// Per-video training inputs: best proposal against the video's own ground
// truth, its resampled features and offset targets.
PreparedTriplet prepare_triplet(const Triplet& t, const ModelConfig& cfg, const TrainConfig& tcfg);

struct TrainResult {
    std::vector<std::pair<double, double>> loss_history;  // per-epoch mean (L_tri, L_reg)
};

// Initializes parameters into `params` from the config seed and runs the
// epoch loop. When out_dir is non-empty, writes checkpoint(s) and
// loss_history.csv there. Aborts with a diagnostic naming the epoch if a
// loss goes non-finite.
TrainResult train(const TrainConfig& tcfg, const ModelConfig& cfg, const Corpus& corpus,
                  ParamStore& params, const std::string& out_dir = {});

bool is_regression_head_param(const std::string& name);

void write_loss_history_csv(const std::vector<std::pair<double, double>>& history,
                            const std::string& path);

}  // namespace vmr
