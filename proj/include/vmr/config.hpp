#pragma once

#include "vmr/dataset.hpp"
#include "vmr/eval.hpp"
#include "vmr/model.hpp"
#include "vmr/training.hpp"

#include <map>
#include <string>

namespace vmr {

// Flat "key = value" run configuration with section prefixes
// (dataset.*, model.*, train.*, proposals.*, eval.*). Unknown keys are
// rejected; every run writes its resolved form next to its outputs.
struct RunConfig {
    SyntheticSpec dataset;
    std::string corpus_manifest;  // dataset.corpus
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    std::string checkpoint;          // eval.checkpoint
    std::string baseline = "none";   // eval.baseline: chance | frame | none
    std::string dump_proposals;      // eval.dump_proposals (optional path)
    std::string proposals_file;      // eval.proposals_file (optional ingestion)
    std::vector<int> ablate_layers = {1, 2, 3};  // ablate.layer_counts
    std::vector<int> ablate_graphs = {1, 2, 3};  // ablate.graph_counts

    void apply(const std::map<std::string, std::string>& kv);
    std::string resolved_text() const;
};

std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin);

RunConfig load_run_config(const std::string& path);  // empty path = defaults

// FNV-1a over the resolved text; identifies a run in reports.
std::string config_hash(const std::string& resolved_text);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace vmr
