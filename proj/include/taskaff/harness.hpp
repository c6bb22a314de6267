#pragma once

#include <string>
#include <vector>

#include "taskaff/dataset.hpp"
#include "taskaff/numcore.hpp"
#include "taskaff/taskmodels.hpp"

namespace taskaff {

enum class TrainMode { mtl, reptile };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
    TrainMode mode = TrainMode::mtl;
    int epochs = 50;            // mtl epochs / reptile meta-iterations
    int batch_size = 16;
    double learning_rate = 0.05;  // mtl step size
    int inner_iters = 25;         // reptile inner-loop batches
    double inner_lr = 0.1;        // beta
    double outer_lr = 0.001;      // alpha
    uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    MultiTaskModel model;
    std::vector<int> tasks;  // original task indices, model head order
    Vec loss_curve;          // per epoch / meta-iteration average loss
};

// Minibatch SGD on the group-averaged loss over a hard-sharing model.
TrainResult train_group_mtl(const std::vector<int>& group, const MultiTaskDataset& train_data,
                            const ModelArch& arch_template, const TrainConfig& config);

// One meta-iteration: per task, inner-loop SGD from W_t = theta updating both
// W_t and the task head; then theta <- theta - alpha * mean(theta - W_t).
// Head updates persist across meta-iterations.
TrainResult train_group_reptile(const std::vector<int>& group, const MultiTaskDataset& train_data,
                                const ModelArch& arch_template, const TrainConfig& config);

// Negative MSE for regression tasks, balanced accuracy for binary tasks.
double task_metric(const MultiTaskModel& model, int head_idx, int task_idx,
                   const MultiTaskDataset& data);

struct TaskOutcome {
    std::string name;
    double val_metric = 0.0;
    double test_metric = 0.0;
    int chosen_group = -1;
};

struct GroupPerformanceReport {
    std::vector<TaskOutcome> tasks;
    std::vector<Vec> loss_curves;  // one per group
    std::vector<std::vector<int>> groupings;
    double collective = 0.0;       // mean of per-task test metrics
    double wall_clock_s = 0.0;
};

// Trains one model per group; tasks in several groups keep the model with the
// best validation metric.
GroupPerformanceReport evaluate_groupings(const std::vector<std::vector<int>>& groupings,
                                          const SplitDataset& data, const ModelArch& arch_template,
                                          const TrainConfig& config);

std::vector<std::vector<int>> random_groupings(int T, int b, SeededRng& rng);

// All partitions of {0..T-1} into at most max_blocks non-empty blocks.
std::vector<std::vector<std::vector<int>>> enumerate_partitions(int T, int max_blocks);

uint64_t stirling_partition_count(int T, int max_blocks);

struct OracleResult {
    std::vector<std::vector<int>> best_partition;
    double best_collective = 0.0;
    std::vector<std::pair<std::vector<std::vector<int>>, double>> table;
};

// Brute force over every candidate partition; guarded to T <= 8.
OracleResult exhaustive_oracle(int T, int b, const SplitDataset& data,
                               const ModelArch& arch_template, const TrainConfig& config);

}  // namespace taskaff
