#pragma once

#include "vmr/dataset.hpp"
#include "vmr/model.hpp"
#include "vmr/proposals.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace vmr {

struct EvalConfig {
    std::vector<double> thresholds = {0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
    ProposalConfig proposals;
    // Externally computed proposals by video id; videos not listed fall
    // back to sliding windows.
    std::map<std::string, std::vector<Segment>> ingested_proposals;
    int frame_len_min = 1;
    int frame_len_max = 0;  // 0 = video length
    std::uint64_t seed = 0;
};

std::vector<Proposal> reference_proposals(const VideoFeatures& ref, const EvalConfig& ecfg);

struct QueryResult {
    std::string query_id;
    std::string reference_id;
    int selected_index = -1;
    double s_pred = 0.0, e_pred = 0.0;
    double tiou_value = 0.0;
    double score = 0.0;
};

struct EvalReport {
    std::vector<double> thresholds;
    std::vector<double> map_at_1;  // one per threshold
    std::vector<QueryResult> results;
    std::string config_hash;
    std::string corpus_id;
    std::uint64_t seed = 0;
    int skipped_queries = 0;
};

// Score and predicted offsets for one (query, proposal) pair. Pluggable so
// the evaluation plumbing can be driven by the network or by a test
// oracle.
struct ProposalScore {
    double score = 0.0;
    double t_center = 0.0;
    double t_length = 0.0;
};
using PairScorer = std::function<ProposalScore(const Matrix& query_T, const VideoFeatures& ref,
                                               const Segment& proposal,
                                               const Matrix& proposal_frames_T)>;

PairScorer model_scorer(ParamStore& params, const ModelConfig& cfg, const AdjacencySet& adj);

// Argmax index; exact ties resolve to the lowest index.
int select_proposal(const std::vector<double>& scores);

// len_pred = exp(-Tl) * len; loc_pred = loc - Tc * len_pred; the segment is
// [loc_pred - len_pred/2, loc_pred + len_pred/2), unclamped.
Segment decode_offsets(const Segment& proposal, double t_center, double t_length);

// Clamps to [0, video_length] while keeping at least one timestep.
Segment clamp_segment(const Segment& seg, double video_length);

// Pairs every annotated test-split clip with the next same-class test
// video; selects, refines and scores against the reference ground truth.
EvalReport evaluate(const Corpus& corpus, const PairScorer& scorer, const ModelConfig& cfg,
                    const EvalConfig& ecfg);

// Training-free baselines, reported through the same machinery.
EvalReport evaluate_chance_baseline(const Corpus& corpus, const EvalConfig& ecfg);
EvalReport evaluate_frame_baseline(const Corpus& corpus, const EvalConfig& ecfg);

// Minimum mean squared frame distance along the linearly warped diagonal,
// over candidate segments [s, s+len) with len in [len_min, len_max]. Rows
// of both inputs are L2-normalized first. Ties: earliest start, then
// shortest.
Segment frame_level_baseline(const Matrix& query, const Matrix& reference, int len_min,
                             int len_max);

Segment chance_baseline(const std::vector<Proposal>& proposals, std::mt19937_64& rng);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_details_csv(const EvalReport& report, const std::string& path);

}  // namespace vmr
