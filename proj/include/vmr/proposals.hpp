#pragma once

#include "vmr/dataset.hpp"

#include <string>
#include <vector>

namespace vmr {

struct Proposal {
    Segment segment;
    std::string source_video;
};

struct ProposalConfig {
    // Window lengths as fractions of the video length.
    std::vector<double> window_fractions = {0.25, 0.5, 0.75, 1.0};
    double stride_fraction = 0.25;
};

// Multi-scale sliding windows: for each window length w <= video_length,
// starts at multiples of max(1, round(w*stride_fraction)) with
// start + w <= video_length. Deduplicated, ordered by (start, length).
std::vector<Proposal> sliding_window_proposals(int video_length,
                                               const std::vector<int>& window_lengths,
                                               double stride_fraction,
                                               const std::string& source_video = {});

std::vector<Proposal> proposals_for_video(const VideoFeatures& video, const ProposalConfig& cfg);

// Temporal intersection-over-union of two segments on the real line.
double tiou(const Segment& a, const Segment& b);

// Argmax of tiou against gt; ties broken by earliest start, then shortest.
const Proposal& best_by_tiou(const std::vector<Proposal>& candidates, const Segment& gt);

// Text format: one "video_id start end" per line.
std::vector<Proposal> load_proposal_file(const std::string& path);
void save_proposal_file(const std::vector<Proposal>& proposals, const std::string& path);

}  // namespace vmr
