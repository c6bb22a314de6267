#pragma once

#include <string>
#include <vector>

#include "taskaff/dataset.hpp"
#include "taskaff/numcore.hpp"
#include "taskaff/taskmodels.hpp"

namespace taskaff {

enum class AffinityMode { vector_mode, tensorwise, meta };

std::string to_string(AffinityMode m);
AffinityMode affinity_mode_from_string(const std::string& s);

// One-gradient-step optima of the shared parameters, per (sample, task),
// plus the per-sample shared optimum under the averaged loss.
struct SampleOptimaSet {
    ParamVector theta0;
    double eta = 0.0;
    int n = 0;
    int T = 0;
    std::vector<std::vector<Vec>> task_optima;  // [sample][task]
    std::vector<Vec> shared_optima;             // [sample]
};

struct SmoothnessEstimate {
    double H = 0.0;
    std::string method;
    double safety_factor = 1.0;
};

struct AffinityMatrix {
    Mat raw;         // mean L1 distances, symmetric, zero diagonal
    Mat normalized;  // row-wise 1 - value/rowmax, in [0, 1]
    AffinityMode mode = AffinityMode::vector_mode;
    int n_samples = 0;
    std::vector<std::string> task_names;
};

struct LossBoundReport {
    double loss = 0.0;     // averaged multi-task loss at the shared optimum
    double loss_sum = 0.0; // same without the 1/T factor
    double density = 0.0;  // psi
    double bound = 0.0;    // T^3 psi^2
    bool holds = false;
    double slack = 0.0;    // bound - loss
};

// One SGD step on the shared parameters only, from theta0, under task t's
// loss on the given sample; head parameters held fixed.
Vec task_sample_optimum(const MultiTaskModel& model, int t, const MtlSample& sample, double eta);

// One SGD step under the averaged loss; equals the mean of task optima.
Vec shared_sample_optimum(const MultiTaskModel& model, const MtlSample& sample, double eta);

SampleOptimaSet compute_optima(const MultiTaskModel& model, const MultiTaskDataset& data,
                               const std::vector<int>& sample_indices, double eta);

// (sqrt(H)/m^2) * sum over ordered pairs of L1 distances, self-pairs included.
double optima_density(const std::vector<Vec>& optima, double H);
double dataset_density(const std::vector<Vec>& shared_optima, double H);

// H = safety * max probed central-finite-difference diagonal Hessian entry,
// probing `coord_probes` coordinates per (sample, task).
SmoothnessEstimate estimate_smoothness(const MultiTaskModel& model, const MultiTaskDataset& data,
                                       const std::vector<int>& sample_indices, int coord_probes,
                                       uint64_t seed, double safety_factor = 1.0, double h = 1e-4);

LossBoundReport check_loss_bound(const MultiTaskModel& model, const MtlSample& sample, double eta,
                                 double H);

double pairwise_affinity(const SampleOptimaSet& optima, int task_i, int task_j);
double pairwise_affinity_tensorwise(const SampleOptimaSet& optima, int task_i, int task_j);

// Reptile view: each task contributes its own aligned sample list.
struct TaskSample {
    Vec x;
    double y = 0.0;
};
double pairwise_affinity_meta(const MultiTaskModel& model, int task_i, int task_j,
                              const std::vector<TaskSample>& samples_i,
                              const std::vector<TaskSample>& samples_j, double eta);

Mat normalize_affinity(const Mat& raw);

// Sample subset = first n_samples of a seeded shuffle of the dataset.
AffinityMatrix build_affinity_matrix(const MultiTaskModel& model, const MultiTaskDataset& data,
                                     int n_samples, double eta, AffinityMode mode, uint64_t seed);

}  // namespace taskaff
