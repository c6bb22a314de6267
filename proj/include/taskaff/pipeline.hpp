#pragma once

#include <string>

#include "taskaff/grouping.hpp"
#include "taskaff/harness.hpp"
#include "taskaff/sca.hpp"
#include "taskaff/synthdata.hpp"

namespace taskaff {

struct ScaConfig {
    double eta = 0.01;
    int n_samples = 100;
    AffinityMode mode = AffinityMode::vector_mode;
};

struct BaselineConfig {
    bool random = true;
    bool oracle = false;
};

struct PipelineConfig {
    uint64_t master_seed = 0;
    PlantedSpec planted;
    std::string dataset_dir;  // when set, overrides the planted generator
    ModelArch arch;           // task_losses filled from the dataset
    ScaConfig sca;
    GroupingConfig grouping;
    TrainConfig harness;
    BaselineConfig baselines;
    std::string out_dir = "out";
};

PipelineConfig default_config();
PipelineConfig config_from_json(const std::string& json_text);
std::string config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::string& path);

// Hash of the canonical JSON dump, embedded in every JSON report.
std::string config_hash(const PipelineConfig& config);

// Resolves the dataset (planted or imported) and completes arch.task_losses.
struct ResolvedInputs {
    MultiTaskDataset dataset;
    SplitDataset splits;
    ModelArch arch;
    std::vector<std::vector<int>> ground_truth;  // empty for imported datasets
};

ResolvedInputs resolve_inputs(const PipelineConfig& config);

MultiTaskModel pipeline_model(const PipelineConfig& config, const ModelArch& arch);

AffinityMatrix stage_affinity(const PipelineConfig& config, const ResolvedInputs& inputs);
NodeEmbeddings stage_embed(const PipelineConfig& config, const Mat& normalized,
                           const std::vector<std::string>& names);
GroupingResult stage_group(const PipelineConfig& config, const AffinityMatrix& A);
GroupPerformanceReport stage_train(const PipelineConfig& config, const ResolvedInputs& inputs,
                                   const std::vector<std::vector<int>>& groupings);

void write_affinity_csv(const AffinityMatrix& A, const std::string& out_dir);
void write_embeddings_csv(const NodeEmbeddings& emb, const std::vector<std::string>& names,
                          const std::string& path);
void write_grouping_json(const GroupingResult& res, const std::vector<std::string>& names,
                         const std::string& hash, const std::string& path);
void write_performance_json(const GroupPerformanceReport& rep,
                            const std::vector<std::string>& names, const std::string& hash,
                            const std::string& path);

// Runs every stage and writes all report files; returns process exit code.
int run_pipeline(const PipelineConfig& config);

// Merges stage outputs in out_dir into summary.json and plot_data.tsv.
int write_report(const PipelineConfig& config);

}  // namespace taskaff
