#pragma once

#include <vector>

#include "taskaff/numcore.hpp"
#include "taskaff/sca.hpp"
#include "taskaff/taskgraph.hpp"

namespace taskaff {

// Diagonal-covariance Gaussian mixture fitted by EM.
struct GmmModel {
    int K = 0;
    Vec weights;              // pi_k, simplex
    Mat means;                // K x D
    Mat vars;                 // K x D, floored at var_floor
    std::vector<double> loglik_trace;

    static constexpr double var_floor = 1e-6;
};

GmmModel gmm_fit(const Mat& Z, int K, SeededRng& rng, int max_iters = 200, double tol = 1e-8);

Mat responsibilities(const GmmModel& gmm, const Mat& Z);

// task i joins cluster k iff r_ik >= threshold or k is the argmax.
std::vector<std::vector<int>> soft_assign(const Mat& r, double threshold);

// Merge every singleton into the cluster with the nearest centroid. The
// union replaces both the singleton and its target.
std::vector<std::vector<int>> refine_singletons(const std::vector<std::vector<int>>& clusters,
                                                const Mat& Z);

struct SilhouetteResult {
    Vec per_node;
    double mean = 0.0;
};

SilhouetteResult silhouette(const Mat& Z, const std::vector<int>& hard_labels);

struct GroupingResult {
    std::vector<std::vector<int>> clusters;  // possibly overlapping
    std::vector<int> hard_labels;            // refined argmax assignment
    Mat resp;                                // T x K
    Vec silhouettes;
    double mean_silhouette = 0.0;
    uint64_t seed = 0;
    int run_index = 0;
    NodeEmbeddings embeddings;
};

struct GroupingConfig {
    int budget = 2;         // b: maximum number of groups
    double threshold = 0.3; // soft-membership cutoff
    int runs = 10;
    int em_max_iters = 200;
    double em_tol = 1e-8;
    GatConfig gat;
};

// One full run: train GAT on the graph, fit a GMM with K = budget, soft
// assign, refine singletons, score.
GroupingResult run_grouping_once(const TaskGraph& graph, const GroupingConfig& config,
                                 uint64_t seed, int run_index);

// Best of `runs` restarts by mean silhouette, ties to the lowest run index.
GroupingResult select_grouping(const AffinityMatrix& A, const GroupingConfig& config,
                               uint64_t master_seed);

}  // namespace taskaff
