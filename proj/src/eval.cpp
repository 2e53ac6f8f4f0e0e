#include "vmr/eval.hpp"

#include "vmr/rand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace vmr {

namespace {

std::string format_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct QueryPair {
    const VideoFeatures* query_video;
    Segment clip;
    const VideoFeatures* reference;
    std::string query_id;
};

// Each annotated test clip is a query; its reference is the next test
// video of the same class in corpus order.
std::vector<QueryPair> build_query_pairs(const Corpus& corpus, int& skipped) {
    const auto test = corpus.videos_in(Split::Test);
    std::vector<QueryPair> pairs;
    skipped = 0;
    for (size_t i = 0; i < test.size(); ++i) {
        const VideoFeatures* qv = test[i];
        if (qv->annotations.empty()) continue;
        const VideoFeatures* ref = nullptr;
        for (size_t off = 1; off < test.size(); ++off) {
            const VideoFeatures* cand = test[(i + off) % test.size()];
            if (cand != qv && cand->class_label == qv->class_label &&
                !cand->annotations.empty()) {
                ref = cand;
                break;
            }
        }
        if (!ref) {
            std::fprintf(stderr, "eval: skipping query from '%s': no same-class reference\n",
                         qv->id.c_str());
            ++skipped;
            continue;
        }
        for (size_t a = 0; a < qv->annotations.size(); ++a)
            pairs.push_back({qv, qv->annotations[a], ref,
                             qv->id + "#a" + std::to_string(a)});
    }
    return pairs;
}

double best_tiou_against_gt(const VideoFeatures& ref, const Segment& seg) {
    double best = 0.0;
    for (const auto& gt : ref.annotations) best = std::max(best, tiou(seg, gt));
    return best;
}

EvalReport finalize_report(std::vector<QueryResult> results, const Corpus& corpus,
                           const EvalConfig& ecfg, int skipped) {
    EvalReport report;
    report.thresholds = ecfg.thresholds;
    report.seed = ecfg.seed;
    report.skipped_queries = skipped;
    report.results = std::move(results);
    const double n = std::max<size_t>(1, report.results.size());
    for (double th : ecfg.thresholds) {
        int hits = 0;
        for (const auto& r : report.results)
            if (r.tiou_value > th) ++hits;
        report.map_at_1.push_back(hits / n);
    }
    (void)corpus;
    return report;
}

}  // namespace

std::vector<Proposal> reference_proposals(const VideoFeatures& ref, const EvalConfig& ecfg) {
    auto it = ecfg.ingested_proposals.find(ref.id);
    if (it == ecfg.ingested_proposals.end()) return proposals_for_video(ref, ecfg.proposals);
    std::vector<Proposal> out;
    out.reserve(it->second.size());
    for (const Segment& seg : it->second) {
        if (!seg.valid() || seg.end > (double)ref.length())
            throw std::invalid_argument("ingested proposal [" + format_double(seg.start) + "," +
                                        format_double(seg.end) + ") does not fit video '" +
                                        ref.id + "'");
        out.push_back({seg, ref.id});
    }
    if (out.empty()) throw std::invalid_argument("ingested proposals: none for video '" + ref.id + "'");
    return out;
}

PairScorer model_scorer(ParamStore& params, const ModelConfig& cfg, const AdjacencySet& adj) {
    return [&params, cfg, &adj](const Matrix& query_T, const VideoFeatures&, const Segment&,
                                const Matrix& proposal_frames_T) {
        PairOutput o = forward_pair(query_T, proposal_frames_T, params, cfg, adj);
        return ProposalScore{o.score, o.t_center, o.t_length};
    };
}

int select_proposal(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("select_proposal: no proposals");
    int best = 0;
    for (int i = 1; i < (int)scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

Segment decode_offsets(const Segment& proposal, double t_center, double t_length) {
    if (!(proposal.length() > 0.0))
        throw std::invalid_argument("decode_offsets: proposal has non-positive length");
    if (!std::isfinite(t_center) || !std::isfinite(t_length))
        throw std::runtime_error("decode_offsets: non-finite offsets");
    const double len_pred = std::exp(-t_length) * proposal.length();
    const double loc_pred = proposal.center() - t_center * len_pred;
    const Segment out{loc_pred - 0.5 * len_pred, loc_pred + 0.5 * len_pred};
    if (!std::isfinite(out.start) || !std::isfinite(out.end))
        throw std::runtime_error("decode_offsets: offsets overflow the refined segment");
    return out;
}

Segment clamp_segment(const Segment& seg, double video_length) {
    const double lo = std::max(0.0, std::min(seg.start, video_length - 1.0));
    const double hi = std::min(video_length, std::max(seg.end, lo + 1.0));
    return {lo, hi};
}

EvalReport evaluate(const Corpus& corpus, const PairScorer& scorer, const ModelConfig& cfg,
                    const EvalConfig& ecfg) {
    int skipped = 0;
    const auto pairs = build_query_pairs(corpus, skipped);
    std::vector<QueryResult> results(pairs.size());
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic)
    for (long qi = 0; qi < (long)pairs.size(); ++qi) {
        try {
            const QueryPair& qp = pairs[qi];
            const Matrix query_T =
                resample_or_pad(qp.query_video->frames.slice_rows((int)qp.clip.start,
                                                                  (int)qp.clip.end),
                                cfg.T)
                    .first;
            const auto proposals = reference_proposals(*qp.reference, ecfg);
            std::vector<double> scores(proposals.size());
            std::vector<ProposalScore> outputs(proposals.size());
            for (size_t p = 0; p < proposals.size(); ++p) {
                const Segment& seg = proposals[p].segment;
                const Matrix frames_T =
                    resample_or_pad(qp.reference->frames.slice_rows((int)seg.start,
                                                                    (int)seg.end),
                                    cfg.T)
                        .first;
                outputs[p] = scorer(query_T, *qp.reference, seg, frames_T);
                scores[p] = outputs[p].score;
            }
            const int m = select_proposal(scores);
            const Segment refined =
                clamp_segment(decode_offsets(proposals[m].segment, outputs[m].t_center,
                                             outputs[m].t_length),
                              qp.reference->length());

            QueryResult r;
            r.query_id = qp.query_id;
            r.reference_id = qp.reference->id;
            r.selected_index = m;
            r.s_pred = refined.start;
            r.e_pred = refined.end;
            r.tiou_value = best_tiou_against_gt(*qp.reference, refined);
            r.score = scores[m];
            results[qi] = std::move(r);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return finalize_report(std::move(results), corpus, ecfg, skipped);
}

EvalReport evaluate_chance_baseline(const Corpus& corpus, const EvalConfig& ecfg) {
    int skipped = 0;
    const auto pairs = build_query_pairs(corpus, skipped);
    std::mt19937_64 rng(ecfg.seed);
    std::vector<QueryResult> results(pairs.size());
    for (size_t qi = 0; qi < pairs.size(); ++qi) {
        const QueryPair& qp = pairs[qi];
        const auto proposals = reference_proposals(*qp.reference, ecfg);
        const Segment pick = chance_baseline(proposals, rng);
        QueryResult r;
        r.query_id = qp.query_id;
        r.reference_id = qp.reference->id;
        for (size_t p = 0; p < proposals.size(); ++p)
            if (proposals[p].segment.start == pick.start && proposals[p].segment.end == pick.end)
                r.selected_index = (int)p;
        r.s_pred = pick.start;
        r.e_pred = pick.end;
        r.tiou_value = best_tiou_against_gt(*qp.reference, pick);
        results[qi] = std::move(r);
    }
    return finalize_report(std::move(results), corpus, ecfg, skipped);
}

EvalReport evaluate_frame_baseline(const Corpus& corpus, const EvalConfig& ecfg) {
    int skipped = 0;
    const auto pairs = build_query_pairs(corpus, skipped);
    std::vector<QueryResult> results(pairs.size());
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic)
    for (long qi = 0; qi < (long)pairs.size(); ++qi) {
        try {
            const QueryPair& qp = pairs[qi];
            const Matrix clip =
                qp.query_video->frames.slice_rows((int)qp.clip.start, (int)qp.clip.end);
            const int L = qp.reference->length();
            const int len_max = ecfg.frame_len_max > 0 ? std::min(ecfg.frame_len_max, L) : L;
            const Segment seg =
                frame_level_baseline(clip, qp.reference->frames, ecfg.frame_len_min, len_max);
            QueryResult r;
            r.query_id = qp.query_id;
            r.reference_id = qp.reference->id;
            r.s_pred = seg.start;
            r.e_pred = seg.end;
            r.tiou_value = best_tiou_against_gt(*qp.reference, seg);
            results[qi] = std::move(r);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return finalize_report(std::move(results), corpus, ecfg, skipped);
}

Segment frame_level_baseline(const Matrix& query, const Matrix& reference, int len_min,
                             int len_max) {
    const int m = query.rows(), L = reference.rows();
    if (m < 1 || L < 1) throw std::invalid_argument("frame_level_baseline: empty input");
    if (query.cols() != reference.cols())
        check_shape(false, "frame_level_baseline", query, reference);
    len_min = std::max(1, len_min);
    len_max = std::min(len_max, L);
    if (len_min > len_max)
        throw std::invalid_argument("frame_level_baseline: empty length range [" +
                                    std::to_string(len_min) + "," + std::to_string(len_max) + "]");

    auto normalized = [](const Matrix& a) {
        Matrix out = a;
        for (int i = 0; i < out.rows(); ++i) {
            double norm2 = 0.0;
            for (int j = 0; j < out.cols(); ++j) norm2 += out(i, j) * out(i, j);
            if (norm2 > 0.0) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (int j = 0; j < out.cols(); ++j) out(i, j) *= inv;
            }
        }
        return out;
    };
    const Matrix q = normalized(query);
    const Matrix r = normalized(reference);

    // Distance table D[i][j] = ||q_i - r_j||^2.
    Matrix dist(m, L);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < L; ++j) {
            double s = 0.0;
            for (int c = 0; c < q.cols(); ++c) {
                const double d = q(i, c) - r(j, c);
                s += d * d;
            }
            dist(i, j) = s;
        }

    Segment best{0.0, 0.0};
    double best_cost = 0.0;
    bool found = false;
    for (int s = 0; s + len_min <= L; ++s) {
        for (int len = len_min; len <= len_max && s + len <= L; ++len) {
            double cost = 0.0;
            for (int i = 0; i < m; ++i) {
                const int col =
                    m == 1 ? s : s + (int)std::lround((double)i * (len - 1) / (m - 1));
                cost += dist(i, col);
            }
            cost /= m;
            if (!found || cost < best_cost) {
                best = {(double)s, (double)(s + len)};
                best_cost = cost;
                found = true;
            }
        }
    }
    return best;
}

Segment chance_baseline(const std::vector<Proposal>& proposals, std::mt19937_64& rng) {
    if (proposals.empty()) throw std::invalid_argument("chance_baseline: no proposals");
    return proposals[uniform_int(rng, 0, (long)proposals.size() - 1)].segment;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write '" + path + "'");
    out << "threshold,map\n";
    for (size_t i = 0; i < report.thresholds.size(); ++i)
        out << format_short(report.thresholds[i]) << ',' << format_short(report.map_at_1[i])
            << '\n';
    if (!out) throw std::runtime_error("report: write failed for '" + path + "'");
}

void write_details_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write '" + path + "'");
    out << "query_id,reference_id,selected_index,s_pred,e_pred,tiou,score\n";
    for (const auto& r : report.results)
        out << r.query_id << ',' << r.reference_id << ',' << r.selected_index << ','
            << format_short(r.s_pred) << ',' << format_short(r.e_pred) << ','
            << format_short(r.tiou_value) << ',' << format_short(r.score) << '\n';
    if (!out) throw std::runtime_error("report: write failed for '" + path + "'");
}

}  // namespace vmr
