#include "vmr/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace fs = std::filesystem;

namespace vmr {

bool is_regression_head_param(const std::string& name) {
    return name.rfind("reg.", 0) == 0;
}

void adam_step(AdamState& state, ParamStore& params,
               const std::function<bool(const std::string&)>& name_filter) {
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, (double)state.step_count);
    const double bc2 = 1.0 - std::pow(state.beta2, (double)state.step_count);
    for (auto& [name, e] : params.entries()) {
        if (!e.trainable || !name_filter(name)) continue;
        Matrix& m = state.m.try_emplace(name, e.value.rows(), e.value.cols()).first->second;
        Matrix& v = state.v.try_emplace(name, e.value.rows(), e.value.cols()).first->second;
        if (!m.same_shape(e.value))
            throw std::logic_error("adam_step: moment shape drift for '" + name + "'");
        for (size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad.data()[i];
            m.data()[i] = state.beta1 * m.data()[i] + (1.0 - state.beta1) * g;
            v.data()[i] = state.beta2 * v.data()[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m.data()[i] / bc1;
            const double v_hat = v.data()[i] / bc2;
            e.value.data()[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

OffsetTarget encode_offsets(const Segment& proposal, const Segment& gt) {
    if (!(gt.length() > 0.0))
        throw std::invalid_argument("encode_offsets: ground truth has non-positive length");
    if (!(proposal.length() > 0.0))
        throw std::invalid_argument("encode_offsets: proposal has non-positive length");
    OffsetTarget t;
    t.t_length = std::log(proposal.length() / gt.length());
    t.t_center = (proposal.center() - gt.center()) / gt.length();
    return t;
}

double triplet_loss(const std::vector<std::pair<double, double>>& pos_neg_scores,
                    const ParamStore& params, double gamma, double lambda) {
    double loss = 0.0;
    for (const auto& [s_pos, s_neg] : pos_neg_scores)
        loss += std::max(0.0, gamma - s_pos + s_neg);
    if (lambda != 0.0) {
        double theta_sq = 0.0;
        for (const auto& [name, e] : params.entries()) {
            if (!e.trainable) continue;
            for (size_t i = 0; i < e.value.size(); ++i)
                theta_sq += e.value.data()[i] * e.value.data()[i];
        }
        loss += lambda * theta_sq;
    }
    return loss;
}

double regression_loss(const std::vector<std::pair<double, double>>& preds,
                       const std::vector<OffsetTarget>& targets) {
    if (preds.empty() || preds.size() != targets.size())
        throw std::invalid_argument("regression_loss: need equal-length non-empty lists");
    double loss = 0.0;
    for (size_t i = 0; i < preds.size(); ++i)
        loss += std::fabs(preds[i].first - targets[i].t_center) +
                std::fabs(preds[i].second - targets[i].t_length);
    return loss / (double)preds.size();
}

// --------------------------------------------------------------------------
// Tape-side batch losses

BatchLossNodes build_batch_losses(Tape& tape, ParamStore& params,
                                  const std::vector<PreparedTriplet>& batch,
                                  const std::vector<NodeId>& adjacency, const ModelConfig& cfg,
                                  const TrainConfig& tcfg, const ForwardOptions& opt) {
    if (batch.empty()) throw std::invalid_argument("build_batch_losses: empty batch");
    const int B = (int)batch.size();

    std::vector<NodeId> pooled_pos, pooled_neg;
    pooled_pos.reserve(B);
    pooled_neg.reserve(B);
    for (const PreparedTriplet& t : batch) {
        // The query encoding is shared between the positive and negative
        // pair of the same triplet.
        NodeId hq = lstm_encode(tape, params, cfg.shared_lstm ? "lstm_s" : "lstm_q", t.query, cfg,
                                opt);
        NodeId hp = lstm_encode(tape, params, cfg.shared_lstm ? "lstm_s" : "lstm_p",
                                t.positive_frames, cfg, opt);
        NodeId hn = lstm_encode(tape, params, cfg.shared_lstm ? "lstm_s" : "lstm_p",
                                t.negative_frames, cfg, opt);
        NodeId fused_pos = fusion_forward(tape, params, build_h0(tape, hq, hp), adjacency, cfg);
        NodeId fused_neg = fusion_forward(tape, params, build_h0(tape, hq, hn), adjacency, cfg);
        pooled_pos.push_back(tape.mean_over_rows(fused_pos));
        pooled_neg.push_back(tape.mean_over_rows(fused_neg));
    }

    // Heads run on the stacked batch so batch-norm sees B rows.
    NodeId s_pos = score_head(tape, params, tape.concat_rows(pooled_pos), cfg, opt);
    NodeId s_neg = score_head(tape, params, tape.concat_rows(pooled_neg), cfg, opt);
    NodeId hinge = tape.sum_all(tape.relu(tape.add_const(tape.sub(s_neg, s_pos),
                                                         tcfg.margin_gamma)));
    NodeId l_tri = hinge;
    if (tcfg.lambda_reg != 0.0) {
        NodeId theta_sq = -1;
        for (const auto& [name, e] : params.entries()) {
            if (!e.trainable) continue;
            NodeId sq = tape.sum_sq(tape.param(params, name));
            theta_sq = theta_sq < 0 ? sq : tape.add(theta_sq, sq);
        }
        l_tri = tape.add(hinge, tape.scale(theta_sq, tcfg.lambda_reg));
    }

    NodeId preds = regression_head(tape, params, tape.concat_rows(pooled_pos), cfg, opt);
    Matrix target_mat(B, 2);
    for (int i = 0; i < B; ++i) {
        target_mat(i, 0) = batch[i].target.t_center;
        target_mat(i, 1) = batch[i].target.t_length;
    }
    NodeId l_reg = tape.scale(
        tape.sum_all(tape.abs(tape.sub(preds, tape.leaf(std::move(target_mat))))), 1.0 / B);

    return {l_tri, l_reg};
}

// --------------------------------------------------------------------------
// Triplet preparation

namespace {

struct VideoCache {
    Matrix proposal_frames;  // T x d
    Segment proposal;
    bool has_target = false;
    OffsetTarget target;
};

VideoCache prepare_video(const VideoFeatures& v, int T, const ProposalConfig& pcfg) {
    VideoCache cache;
    const auto proposals = proposals_for_video(v, pcfg);
    if (!v.annotations.empty()) {
        const Proposal* best = &proposals.front();
        const Segment* best_gt = &v.annotations.front();
        double best_score = -1.0;
        for (const auto& p : proposals) {
            for (const auto& ann : v.annotations) {
                const double s = tiou(p.segment, ann);
                if (s > best_score) {
                    best = &p;
                    best_gt = &ann;
                    best_score = s;
                }
            }
        }
        cache.proposal = best->segment;
        cache.has_target = true;
        cache.target = encode_offsets(best->segment, *best_gt);
    } else {
        // Unannotated videos only ever act as negatives; fall back to the
        // widest window.
        cache.proposal = proposals.back().segment;
        for (const auto& p : proposals)
            if (p.segment.length() > cache.proposal.length()) cache.proposal = p.segment;
    }
    cache.proposal_frames =
        resample_or_pad(v.frames.slice_rows((int)cache.proposal.start, (int)cache.proposal.end), T)
            .first;
    return cache;
}

}  // namespace

PreparedTriplet prepare_triplet(const Triplet& t, const ModelConfig& cfg,
                                const TrainConfig& tcfg) {
    PreparedTriplet out;
    out.query = t.query;
    VideoCache pos = prepare_video(*t.positive, cfg.T, tcfg.proposals);
    VideoCache neg = prepare_video(*t.negative, cfg.T, tcfg.proposals);
    out.positive_frames = std::move(pos.proposal_frames);
    out.negative_frames = std::move(neg.proposal_frames);
    out.target = pos.target;
    return out;
}

// --------------------------------------------------------------------------
// Epoch loop

TrainResult train(const TrainConfig& tcfg, const ModelConfig& cfg, const Corpus& corpus,
                  ParamStore& params, const std::string& out_dir) {
    if (tcfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(tcfg.margin_gamma > 0.0)) throw std::invalid_argument("train: gamma must be > 0");
    if (tcfg.lambda_reg < 0.0 || tcfg.mu < 0.0)
        throw std::invalid_argument("train: lambda and mu must be >= 0");

    std::mt19937_64 rng(tcfg.seed);
    if (params.size() == 0) init_model_params(cfg, params, rng);
    const AdjacencySet adj = build_adjacency_set(cfg.T, cfg.ks);

    const auto train_videos = corpus.videos_in(Split::Train);
    if (train_videos.empty()) throw std::invalid_argument("train: corpus has no train split");
    const int batches_per_epoch =
        std::max(1, (int)train_videos.size() / tcfg.batch_size);

    // Proposal choice and offset targets per video never change; cache them.
    std::unordered_map<const VideoFeatures*, VideoCache> cache;
    for (const auto* v : train_videos) cache.emplace(v, prepare_video(*v, cfg.T, tcfg.proposals));

    AdamState opt_tri(tcfg.lr_triplet, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);
    AdamState opt_reg(tcfg.lr_regression, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);
    const auto all_params = [](const std::string&) { return true; };

    ForwardOptions fwd;
    fwd.training = true;
    fwd.update_running_stats = true;
    fwd.rng = &rng;

    TrainResult result;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        double tri_sum = 0.0, reg_sum = 0.0;
        for (int b = 0; b < batches_per_epoch; ++b) {
            std::vector<PreparedTriplet> batch;
            batch.reserve(tcfg.batch_size);
            for (int i = 0; i < tcfg.batch_size; ++i) {
                Triplet t = sample_triplet(corpus, cfg.T, rng);
                PreparedTriplet pt;
                pt.query = std::move(t.query);
                const VideoCache& pos = cache.at(t.positive);
                const VideoCache& neg = cache.at(t.negative);
                pt.positive_frames = pos.proposal_frames;
                pt.negative_frames = neg.proposal_frames;
                pt.target = pos.target;
                batch.push_back(std::move(pt));
            }

            Tape tape;
            std::vector<NodeId> adjacency = adjacency_nodes(tape, adj);
            BatchLossNodes losses =
                build_batch_losses(tape, params, batch, adjacency, cfg, tcfg, fwd);
            const double l_tri = tape.scalar(losses.l_tri);
            const double l_reg = tape.scalar(losses.l_reg);
            if (!std::isfinite(l_tri) || !std::isfinite(l_reg))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         ": L_tri=" + format_double(l_tri) +
                                         " L_reg=" + format_double(l_reg));
            tri_sum += l_tri;
            reg_sum += l_reg;

            if (tcfg.joint_total_loss) {
                params.zero_grads();
                tape.backward_scalar(losses.l_tri);
                tape.backward_scalar(losses.l_reg, tcfg.mu);
                adam_step(opt_tri, params, all_params);
            } else {
                params.zero_grads();
                tape.backward_scalar(losses.l_tri);
                adam_step(opt_tri, params, all_params);
                // Reuse the recorded forward; its values still describe the
                // pre-step parameter point.
                params.zero_grads();
                tape.backward_scalar(losses.l_reg, tcfg.mu);
                adam_step(opt_reg, params, is_regression_head_param);
            }
            params.zero_grads();
        }
        result.loss_history.emplace_back(tri_sum / batches_per_epoch,
                                         reg_sum / batches_per_epoch);

        if (!out_dir.empty() && tcfg.checkpoint_interval > 0 &&
            (epoch + 1) % tcfg.checkpoint_interval == 0 && epoch + 1 < tcfg.epochs) {
            save_checkpoint(params,
                            (fs::path(out_dir) / ("checkpoint_epoch" + std::to_string(epoch + 1) +
                                                  ".txt"))
                                .string());
        }
    }

    if (!out_dir.empty()) {
        save_checkpoint(params, (fs::path(out_dir) / "checkpoint.txt").string());
        write_loss_history_csv(result.loss_history,
                               (fs::path(out_dir) / "loss_history.csv").string());
    }
    return result;
}

void write_loss_history_csv(const std::vector<std::pair<double, double>>& history,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("loss history: cannot write '" + path + "'");
    out << "epoch,mean_triplet_loss,mean_regression_loss\n";
    for (size_t i = 0; i < history.size(); ++i)
        out << i << ',' << format_double(history[i].first) << ','
            << format_double(history[i].second) << '\n';
    if (!out) throw std::runtime_error("loss history: write failed for '" + path + "'");
}

}  // namespace vmr
