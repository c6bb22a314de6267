#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "taskaff/io.hpp"
#include "taskaff/pipeline.hpp"

using namespace taskaff;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> eta;
    std::optional<int> budget;
    std::optional<int> runs;
    std::optional<int> n_samples;
    std::optional<std::string> mode;  // harness mode: mtl | reptile
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Pipeline config JSON file");
    cmd->add_option("--seed", opts.seed, "Master seed override");
    cmd->add_option("--out", opts.out, "Output directory override");
    cmd->add_option("--eta", opts.eta, "SCA step size override");
    cmd->add_option("--budget", opts.budget, "Inference budget (max groups) override");
    cmd->add_option("--runs", opts.runs, "Grouping restart count override");
    cmd->add_option("--n-samples", opts.n_samples, "SCA sample count override");
    cmd->add_option("--mode", opts.mode, "Training mode: mtl or reptile")
        ->check(CLI::IsMember({"mtl", "reptile"}));
}

PipelineConfig make_config(const CommonOpts& opts) {
    PipelineConfig cfg =
        opts.config_path.empty() ? default_config() : load_config(opts.config_path);
    if (opts.seed) cfg.master_seed = *opts.seed;
    if (opts.out) cfg.out_dir = *opts.out;
    if (opts.eta) cfg.sca.eta = *opts.eta;
    if (opts.budget) cfg.grouping.budget = *opts.budget;
    if (opts.runs) cfg.grouping.runs = *opts.runs;
    if (opts.n_samples) cfg.sca.n_samples = *opts.n_samples;
    if (opts.mode) cfg.harness.mode = train_mode_from_string(*opts.mode);
    return cfg;
}

AffinityMatrix load_affinity(const std::string& dir) {
    NamedMatrix raw = read_matrix_csv(dir + "/affinity_raw.csv");
    NamedMatrix norm = read_matrix_csv(dir + "/affinity_normalized.csv");
    AffinityMatrix A;
    A.raw = raw.values;
    A.normalized = norm.values;
    A.task_names = raw.col_names;
    return A;
}

int cmd_run(const CommonOpts& opts) {
    return run_pipeline(make_config(opts));
}

int cmd_affinity(const CommonOpts& opts) {
    PipelineConfig cfg = make_config(opts);
    ResolvedInputs inputs = resolve_inputs(cfg);
    AffinityMatrix A = stage_affinity(cfg, inputs);
    std::filesystem::create_directories(cfg.out_dir);
    write_affinity_csv(A, cfg.out_dir);
    std::cout << "affinity matrices written to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_embed(const CommonOpts& opts) {
    PipelineConfig cfg = make_config(opts);
    NamedMatrix norm = read_matrix_csv(cfg.out_dir + "/affinity_normalized.csv");
    NodeEmbeddings emb = stage_embed(cfg, norm.values, norm.row_names);
    write_embeddings_csv(emb, norm.row_names, cfg.out_dir + "/embeddings.csv");
    std::cout << "embeddings written, reconstruction loss " << emb.final_loss << "\n";
    return 0;
}

int cmd_group(const CommonOpts& opts) {
    PipelineConfig cfg = make_config(opts);
    AffinityMatrix A = load_affinity(cfg.out_dir);
    GroupingResult res = stage_group(cfg, A);
    write_embeddings_csv(res.embeddings, A.task_names, cfg.out_dir + "/embeddings.csv");
    write_grouping_json(res, A.task_names, config_hash(cfg), cfg.out_dir + "/grouping.json");
    std::cout << "selected run " << res.run_index << " with mean silhouette "
              << res.mean_silhouette << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    PipelineConfig cfg = make_config(opts);
    ResolvedInputs inputs = resolve_inputs(cfg);
    nlohmann::json grouping = nlohmann::json::parse(
        read_text_file(cfg.out_dir + "/grouping.json"));

    std::vector<std::vector<int>> groups;
    for (const auto& cluster : grouping["clusters"]) {
        std::vector<int> g;
        for (const auto& name : cluster) {
            auto it = std::find(inputs.dataset.task_names.begin(),
                                inputs.dataset.task_names.end(), name.get<std::string>());
            if (it == inputs.dataset.task_names.end()) {
                throw std::runtime_error("grouping.json names task '" +
                                         name.get<std::string>() + "' absent from the dataset");
            }
            g.push_back(static_cast<int>(it - inputs.dataset.task_names.begin()));
        }
        groups.push_back(std::move(g));
    }

    GroupPerformanceReport rep = stage_train(cfg, inputs, groups);
    write_performance_json(rep, inputs.dataset.task_names, config_hash(cfg),
                           cfg.out_dir + "/performance.json");
    std::cout << "collective performance " << rep.collective << "\n";
    return 0;
}

int cmd_oracle(const CommonOpts& opts) {
    PipelineConfig cfg = make_config(opts);
    ResolvedInputs inputs = resolve_inputs(cfg);
    int T = inputs.dataset.task_count();
    if (T > 8) {
        std::cerr << "oracle: refusing to enumerate partitions for T=" << T
                  << " tasks (limit is 8); the candidate count grows as Bell(T)\n";
        return 1;
    }
    TrainConfig tc = cfg.harness;
    tc.seed = derive_seed(cfg.master_seed, "harness");
    OracleResult res = exhaustive_oracle(T, cfg.grouping.budget, inputs.splits, inputs.arch, tc);

    nlohmann::json j;
    j["config_hash"] = config_hash(cfg);
    j["best_collective"] = res.best_collective;
    nlohmann::json best = nlohmann::json::array();
    for (const auto& g : res.best_partition) {
        nlohmann::json arr = nlohmann::json::array();
        for (int t : g) arr.push_back(inputs.dataset.task_names[t]);
        best.push_back(arr);
    }
    j["best_partition"] = best;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& [partition, score] : res.table) {
        nlohmann::json parts = nlohmann::json::array();
        for (const auto& g : partition) {
            nlohmann::json arr = nlohmann::json::array();
            for (int t : g) arr.push_back(inputs.dataset.task_names[t]);
            parts.push_back(arr);
        }
        table.push_back({{"partition", parts}, {"collective", score}});
    }
    j["table"] = table;
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/oracle.json", j.dump(2) + "\n");
    std::cout << "oracle best collective " << res.best_collective << "\n";
    return 0;
}

int cmd_report(const CommonOpts& opts) {
    return write_report(make_config(opts));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sample-wise convergence task affinity and grouping pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* run = app.add_subcommand("run", "Run the full pipeline and write all reports");
    auto* affinity = app.add_subcommand("affinity", "Compute the SCA affinity matrices");
    auto* embed = app.add_subcommand("embed", "Train the GAT and export node embeddings");
    auto* group = app.add_subcommand("group", "Select the best grouping over restarts");
    auto* train = app.add_subcommand("train", "Train and evaluate the selected grouping");
    auto* oracle = app.add_subcommand("oracle", "Brute-force best partition (T <= 8)");
    auto* report = app.add_subcommand("report", "Merge stage outputs into a summary");
    for (CLI::App* cmd : {run, affinity, embed, group, train, oracle, report}) {
        add_common(cmd, opts);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opts);
        if (affinity->parsed()) return cmd_affinity(opts);
        if (embed->parsed()) return cmd_embed(opts);
        if (group->parsed()) return cmd_group(opts);
        if (train->parsed()) return cmd_train(opts);
        if (oracle->parsed()) return cmd_oracle(opts);
        if (report->parsed()) return cmd_report(opts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
