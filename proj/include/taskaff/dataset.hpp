#pragma once

#include <array>
#include <string>
#include <vector>

#include "taskaff/numcore.hpp"
#include "taskaff/taskmodels.hpp"

namespace taskaff {

// Shared features with one label column per task.
struct MultiTaskDataset {
    Mat X;  // n x d
    Mat Y;  // n x T
    std::vector<std::string> task_names;
    std::vector<LossKind> task_losses;

    int size() const { return X.rows; }
    int input_dim() const { return X.cols; }
    int task_count() const { return Y.cols; }

    MtlSample sample(int i) const;
    MultiTaskDataset subset(const std::vector<int>& indices) const;
};

struct SplitDataset {
    MultiTaskDataset train, val, test;
};

// Seeded shuffle then contiguous slices; sizes floor per fraction with the
// remainder going to train.
SplitDataset split(const MultiTaskDataset& data, const std::array<double, 3>& fractions,
                   SeededRng& rng);

// One shared features file plus one label file per task, with a manifest.
void export_dataset_csv(const MultiTaskDataset& data, const std::string& dir);
MultiTaskDataset import_dataset_csv(const std::string& dir);

}  // namespace taskaff
