#pragma once

#include <vector>

#include "taskaff/dataset.hpp"

namespace taskaff {

// Planted-group generator: each group draws a base teacher direction, each
// task's teacher mixes the group base with independent noise, so within-group
// teacher correlation is controlled by rho_in and cross-group correlation by
// rho_out.
struct PlantedSpec {
    int groups = 2;
    int tasks_per_group = 2;
    int input_dim = 8;
    int n_samples = 200;
    std::array<double, 3> split_fractions = {0.6, 0.2, 0.2};
    double rho_in = 0.95;
    double rho_out = 0.0;
    double noise = 0.0;
    std::vector<LossKind> group_loss;  // one per group; empty means all mse
    uint64_t seed = 0;

    int task_count() const { return groups * tasks_per_group; }
    void validate() const;
};

struct PlantedDataset {
    MultiTaskDataset data;
    std::vector<std::vector<int>> ground_truth;  // task indices per group
    Mat teachers;                                // T x input_dim
};

PlantedDataset generate_planted(const PlantedSpec& spec);

}  // namespace taskaff
