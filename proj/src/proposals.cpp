#include "vmr/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vmr {

std::vector<Proposal> sliding_window_proposals(int video_length,
                                               const std::vector<int>& window_lengths,
                                               double stride_fraction,
                                               const std::string& source_video) {
    if (window_lengths.empty())
        throw std::invalid_argument("sliding_window_proposals: empty window list");
    if (!(stride_fraction > 0.0 && stride_fraction <= 1.0))
        throw std::invalid_argument("sliding_window_proposals: stride_fraction must be in (0,1]");
    if (video_length < 1)
        throw std::invalid_argument("sliding_window_proposals: video_length must be >= 1");

    std::set<std::pair<int, int>> seen;  // (start, end); set gives the (start, length) order
    for (int w : window_lengths) {
        if (w < 1) throw std::invalid_argument("sliding_window_proposals: window length must be >= 1");
        if (w > video_length) continue;
        const int stride = std::max(1, (int)std::lround(w * stride_fraction));
        for (int start = 0; start + w <= video_length; start += stride)
            seen.emplace(start, start + w);
    }
    std::vector<Proposal> out;
    out.reserve(seen.size());
    for (const auto& [s, e] : seen)
        out.push_back({{(double)s, (double)e}, source_video});
    return out;
}

std::vector<Proposal> proposals_for_video(const VideoFeatures& video, const ProposalConfig& cfg) {
    std::vector<int> lengths;
    for (double f : cfg.window_fractions)
        lengths.push_back(std::max(1, (int)std::lround(f * video.length())));
    return sliding_window_proposals(video.length(), lengths, cfg.stride_fraction, video.id);
}

double tiou(const Segment& a, const Segment& b) {
    const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
    if (inter <= 0.0) return 0.0;
    const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    return inter / uni;
}

const Proposal& best_by_tiou(const std::vector<Proposal>& candidates, const Segment& gt) {
    if (candidates.empty()) throw std::invalid_argument("best_by_tiou: empty candidate list");
    const Proposal* best = &candidates[0];
    double best_score = tiou(best->segment, gt);
    for (const auto& c : candidates) {
        const double score = tiou(c.segment, gt);
        const bool better =
            score > best_score ||
            (score == best_score &&
             (c.segment.start < best->segment.start ||
              (c.segment.start == best->segment.start && c.segment.length() < best->segment.length())));
        if (better) {
            best = &c;
            best_score = score;
        }
    }
    return *best;
}

std::vector<Proposal> load_proposal_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("proposal file: cannot open '" + path + "'");
    std::vector<Proposal> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Proposal p;
        if (!(ss >> p.source_video >> p.segment.start >> p.segment.end) || !p.segment.valid())
            throw std::runtime_error("proposal file: line " + std::to_string(line_no) +
                                     ": expected 'video_id start end'");
        out.push_back(std::move(p));
    }
    return out;
}

void save_proposal_file(const std::vector<Proposal>& proposals, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("proposal file: cannot write '" + path + "'");
    for (const auto& p : proposals)
        out << p.source_video << ' ' << format_double(p.segment.start) << ' '
            << format_double(p.segment.end) << '\n';
    if (!out) throw std::runtime_error("proposal file: write failed for '" + path + "'");
}

}  // namespace vmr
