#pragma once

#include "vmr/matrix.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vmr {

// Half-open timestep interval [start, end).
struct Segment {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }
    double center() const { return 0.5 * (start + end); }
    bool valid() const { return start >= 0.0 && start < end; }
};

enum class Split { Train, Val, Test };

struct VideoFeatures {
    std::string id;
    std::string class_label;
    Matrix frames;  // L x d
    std::vector<Segment> annotations;

    int length() const { return frames.rows(); }
    int dim() const { return frames.cols(); }
};

struct SyntheticSpec {
    int num_classes = 10;
    int subactions_per_class = 3;
    int feature_dim = 32;
    int video_length_min = 24, video_length_max = 64;
    int action_length_min = 8, action_length_max = 24;
    double noise_sigma = 0.1;
    double permutation_probability = 0.5;
    double speed_jitter_min = 0.75, speed_jitter_max = 1.25;
    int videos_per_class = 20;
    int train_classes = 8, val_classes = 1, test_classes = 1;
    std::uint64_t seed = 1;
};

struct Corpus {
    std::vector<VideoFeatures> videos;
    // Class-disjoint split assignment.
    std::vector<std::pair<std::string, Split>> class_splits;

    Split split_of(const std::string& class_label) const;
    std::vector<const VideoFeatures*> videos_in(Split split) const;
    std::vector<std::string> classes_in(Split split) const;
};

struct Triplet {
    Matrix query;  // T x d, resampled query clip
    const VideoFeatures* query_video = nullptr;
    Segment query_segment;
    const VideoFeatures* positive = nullptr;
    const VideoFeatures* negative = nullptr;
};

Corpus generate_synthetic_corpus(const SyntheticSpec& spec);

// L > T: picks rows at round(i*(L-1)/(T-1)); L <= T: zero-pads the tail.
// Returns the T x d matrix and valid_length = min(L, T).
std::pair<Matrix, int> resample_or_pad(const Matrix& frames, int T);

Triplet sample_triplet(const Corpus& corpus, int T, std::mt19937_64& rng);

// Text feature file:
//   line 1: "L d"
//   line 2: "class <label>"
//   line 3: "annotations s1 e1 [s2 e2 ...]"
//   then L lines of d space-separated reals.
VideoFeatures load_feature_file(const std::string& path);
void save_feature_file(const VideoFeatures& v, const std::string& path);

// Manifest: one feature-file path per line (relative to the manifest's
// directory) plus "split <class> <train|val|test>" directives.
Corpus load_corpus_manifest(const std::string& manifest_path);
void save_corpus(const Corpus& corpus, const std::string& dir, const std::string& manifest_name);

const char* split_name(Split s);

}  // namespace vmr
