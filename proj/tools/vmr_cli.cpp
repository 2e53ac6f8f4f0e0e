#include "vmr/config.hpp"
#include "vmr/eval.hpp"
#include "vmr/graphs.hpp"
#include "vmr/training.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::string variant;
    std::string thresholds;
    std::string baseline;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key = value config file");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "seed override for this command");
    cmd->add_option("--variant", flags.variant, "graph | cnn")
        ->check(CLI::IsMember({"graph", "cnn"}));
    cmd->add_option("--thresholds", flags.thresholds, "comma-separated tIoU thresholds");
    cmd->add_option("--baseline", flags.baseline, "chance | frame | none")
        ->check(CLI::IsMember({"chance", "frame", "none"}));
}

vmr::RunConfig make_config(const CommonFlags& flags) {
    vmr::RunConfig cfg = vmr::load_run_config(flags.config_path);
    std::map<std::string, std::string> overrides;
    if (!flags.variant.empty()) overrides["model.variant"] = flags.variant;
    if (!flags.thresholds.empty()) overrides["eval.thresholds"] = flags.thresholds;
    if (!flags.baseline.empty()) overrides["eval.baseline"] = flags.baseline;
    cfg.apply(overrides);
    return cfg;
}

void write_resolved(const vmr::RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    vmr::write_text_file((fs::path(out_dir) / "resolved_config.txt").string(),
                         cfg.resolved_text());
}

vmr::Corpus load_corpus_for(const vmr::RunConfig& cfg) {
    if (cfg.corpus_manifest.empty())
        throw std::runtime_error("missing corpus path: set dataset.corpus in the config");
    return vmr::load_corpus_manifest(cfg.corpus_manifest);
}

int corpus_feature_dim(const vmr::Corpus& corpus) {
    if (corpus.videos.empty()) throw std::runtime_error("corpus has no videos");
    return corpus.videos.front().dim();
}

void load_ingested_proposals(vmr::RunConfig& cfg) {
    if (cfg.proposals_file.empty()) return;
    for (const auto& p : vmr::load_proposal_file(cfg.proposals_file))
        cfg.eval.ingested_proposals[p.source_video].push_back(p.segment);
}

void dump_all_proposals(const vmr::Corpus& corpus, const vmr::RunConfig& cfg,
                        const std::string& path) {
    std::vector<vmr::Proposal> all;
    for (const auto& v : corpus.videos) {
        auto props = vmr::proposals_for_video(v, cfg.eval.proposals);
        all.insert(all.end(), props.begin(), props.end());
    }
    vmr::save_proposal_file(all, path);
}

int cmd_gen_data(const CommonFlags& flags) {
    vmr::RunConfig cfg = make_config(flags);
    if (flags.seed >= 0) cfg.dataset.seed = (std::uint64_t)flags.seed;
    vmr::Corpus corpus = vmr::generate_synthetic_corpus(cfg.dataset);
    vmr::save_corpus(corpus, flags.out_dir, "corpus.manifest");
    write_resolved(cfg, flags.out_dir);
    std::cout << "wrote " << corpus.videos.size() << " videos to " << flags.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    vmr::RunConfig cfg = make_config(flags);
    if (flags.seed >= 0) cfg.train.seed = (std::uint64_t)flags.seed;
    vmr::Corpus corpus = load_corpus_for(cfg);
    cfg.model.feature_dim = corpus_feature_dim(corpus);
    write_resolved(cfg, flags.out_dir);
    vmr::ParamStore params;
    vmr::TrainResult result = vmr::train(cfg.train, cfg.model, corpus, params, flags.out_dir);
    std::cout << "trained " << result.loss_history.size() << " epochs; checkpoint in "
              << flags.out_dir << "\n";
    if (!result.loss_history.empty())
        std::cout << "first-epoch L_tri " << result.loss_history.front().first
                  << ", final-epoch L_tri " << result.loss_history.back().first << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& flags) {
    vmr::RunConfig cfg = make_config(flags);
    if (flags.seed >= 0) cfg.eval.seed = (std::uint64_t)flags.seed;
    if (cfg.checkpoint.empty())
        throw std::runtime_error("missing checkpoint path: set eval.checkpoint in the config");
    vmr::Corpus corpus = load_corpus_for(cfg);
    cfg.model.feature_dim = corpus_feature_dim(corpus);
    load_ingested_proposals(cfg);
    write_resolved(cfg, flags.out_dir);

    vmr::ParamStore params;
    std::mt19937_64 init_rng(0);
    vmr::init_model_params(cfg.model, params, init_rng);
    vmr::load_checkpoint(params, cfg.checkpoint);
    const vmr::AdjacencySet adj = vmr::build_adjacency_set(cfg.model.T, cfg.model.ks);

    vmr::EvalReport report =
        vmr::evaluate(corpus, vmr::model_scorer(params, cfg.model, adj), cfg.model, cfg.eval);
    report.config_hash = vmr::config_hash(cfg.resolved_text());
    report.corpus_id = cfg.corpus_manifest;
    vmr::write_report_csv(report, (fs::path(flags.out_dir) / "report.csv").string());
    vmr::write_details_csv(report, (fs::path(flags.out_dir) / "details.csv").string());

    if (cfg.baseline == "chance") {
        vmr::EvalReport chance = vmr::evaluate_chance_baseline(corpus, cfg.eval);
        vmr::write_report_csv(chance, (fs::path(flags.out_dir) / "report_chance.csv").string());
        vmr::write_details_csv(chance, (fs::path(flags.out_dir) / "details_chance.csv").string());
    } else if (cfg.baseline == "frame") {
        vmr::EvalReport frame = vmr::evaluate_frame_baseline(corpus, cfg.eval);
        vmr::write_report_csv(frame, (fs::path(flags.out_dir) / "report_frame.csv").string());
        vmr::write_details_csv(frame, (fs::path(flags.out_dir) / "details_frame.csv").string());
    }
    if (!cfg.dump_proposals.empty()) dump_all_proposals(corpus, cfg, cfg.dump_proposals);

    std::cout << "evaluated " << report.results.size() << " queries";
    if (report.skipped_queries) std::cout << " (" << report.skipped_queries << " skipped)";
    std::cout << "; mAP@" << report.thresholds.front() << " = " << report.map_at_1.front()
              << "\n";
    return 0;
}

int cmd_baseline(const CommonFlags& flags) {
    vmr::RunConfig cfg = make_config(flags);
    if (flags.seed >= 0) cfg.eval.seed = (std::uint64_t)flags.seed;
    vmr::Corpus corpus = load_corpus_for(cfg);
    load_ingested_proposals(cfg);
    write_resolved(cfg, flags.out_dir);

    vmr::EvalReport chance = vmr::evaluate_chance_baseline(corpus, cfg.eval);
    vmr::write_report_csv(chance, (fs::path(flags.out_dir) / "report_chance.csv").string());
    vmr::write_details_csv(chance, (fs::path(flags.out_dir) / "details_chance.csv").string());
    vmr::EvalReport frame = vmr::evaluate_frame_baseline(corpus, cfg.eval);
    vmr::write_report_csv(frame, (fs::path(flags.out_dir) / "report_frame.csv").string());
    vmr::write_details_csv(frame, (fs::path(flags.out_dir) / "details_frame.csv").string());
    std::cout << "chance mAP@" << chance.thresholds.front() << " = " << chance.map_at_1.front()
              << ", frame mAP@" << frame.thresholds.front() << " = " << frame.map_at_1.front()
              << "\n";
    return 0;
}

int cmd_ablate(const CommonFlags& flags) {
    vmr::RunConfig cfg = make_config(flags);
    if (flags.seed >= 0) cfg.train.seed = (std::uint64_t)flags.seed;
    vmr::Corpus corpus = load_corpus_for(cfg);
    cfg.model.feature_dim = corpus_feature_dim(corpus);
    write_resolved(cfg, flags.out_dir);

    std::ostringstream table;
    table << "n,k";
    for (double th : cfg.eval.thresholds) table << ",map@" << th;
    table << "\n";

    for (int n : cfg.ablate_layers) {
        for (int k : cfg.ablate_graphs) {
            vmr::RunConfig cell = cfg;
            cell.model.fusion_layers = n;
            cell.model.ks.clear();
            for (int i = 1; i <= k; ++i) cell.model.ks.push_back(i);
            const std::string cell_dir =
                (fs::path(flags.out_dir) /
                 ("ablate_n" + std::to_string(n) + "_k" + std::to_string(k)))
                    .string();
            fs::create_directories(cell_dir);
            vmr::write_text_file((fs::path(cell_dir) / "resolved_config.txt").string(),
                                 cell.resolved_text());

            vmr::ParamStore params;
            vmr::train(cell.train, cell.model, corpus, params, cell_dir);
            const vmr::AdjacencySet adj =
                vmr::build_adjacency_set(cell.model.T, cell.model.ks);
            vmr::EvalReport report = vmr::evaluate(
                corpus, vmr::model_scorer(params, cell.model, adj), cell.model, cell.eval);
            report.config_hash = vmr::config_hash(cell.resolved_text());
            report.corpus_id = cell.corpus_manifest;
            vmr::write_report_csv(report, (fs::path(cell_dir) / "report.csv").string());
            vmr::write_details_csv(report, (fs::path(cell_dir) / "details.csv").string());

            table << n << ',' << k;
            for (double v : report.map_at_1) table << ',' << v;
            table << "\n";
            std::cout << "ablate n=" << n << " k=" << k << " mAP@"
                      << report.thresholds.front() << " = " << report.map_at_1.front() << "\n";
        }
    }
    vmr::write_text_file((fs::path(flags.out_dir) / "ablation.csv").string(), table.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"video moment retrieval via multi-graph feature fusion"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, ablate_flags, baseline_flags;
    auto* gen = app.add_subcommand("gen-data", "synthesize a corpus to disk");
    add_common(gen, gen_flags);
    auto* train = app.add_subcommand("train", "train a model on a corpus");
    add_common(train, train_flags);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_flags);
    auto* ablate = app.add_subcommand("ablate", "layer-count x graph-count grid");
    add_common(ablate, ablate_flags);
    auto* baseline = app.add_subcommand("baseline", "training-free baselines");
    add_common(baseline, baseline_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_flags);
        if (train->parsed()) return cmd_train(train_flags);
        if (eval->parsed()) return cmd_eval(eval_flags);
        if (ablate->parsed()) return cmd_ablate(ablate_flags);
        if (baseline->parsed()) return cmd_baseline(baseline_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
