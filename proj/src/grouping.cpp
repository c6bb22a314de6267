#include "taskaff/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "taskaff/io.hpp"

namespace taskaff {

namespace {

double sq_dist(const Mat& Z, int i, const Vec& c) {
    double acc = 0.0;
    for (int d = 0; d < Z.cols; ++d) {
        double diff = Z(i, d) - c[d];
        acc += diff * diff;
    }
    return acc;
}

double eu_dist(const Mat& Z, int i, int j) {
    double acc = 0.0;
    for (int d = 0; d < Z.cols; ++d) {
        double diff = Z(i, d) - Z(j, d);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

Vec global_variance(const Mat& Z) {
    int n = Z.rows, D = Z.cols;
    Vec mean(D, 0.0), var(D, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) mean[d] += Z(i, d);
    }
    for (double& m : mean) m /= n;
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) {
            double diff = Z(i, d) - mean[d];
            var[d] += diff * diff;
        }
    }
    for (double& v : var) v = std::max(v / n, GmmModel::var_floor);
    return var;
}

// Index of the point farthest (max-min distance) from the given means.
int farthest_point(const Mat& Z, const Mat& means, int K_used) {
    int best = 0;
    double best_d = -1.0;
    for (int i = 0; i < Z.rows; ++i) {
        double min_d = std::numeric_limits<double>::max();
        for (int k = 0; k < K_used; ++k) {
            min_d = std::min(min_d, sq_dist(Z, i, means.row_vec(k)));
        }
        if (min_d > best_d) {
            best_d = min_d;
            best = i;
        }
    }
    return best;
}

double log_gauss_diag(const Mat& Z, int i, const Mat& means, const Mat& vars, int k) {
    double acc = 0.0;
    for (int d = 0; d < Z.cols; ++d) {
        double diff = Z(i, d) - means(k, d);
        acc += -0.5 * std::log(2.0 * M_PI * vars(k, d)) - diff * diff / (2.0 * vars(k, d));
    }
    return acc;
}

// Log-space E-step; returns responsibilities and the log-likelihood.
double e_step(const GmmModel& gmm, const Mat& Z, Mat& r) {
    int n = Z.rows;
    double loglik = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec logp(gmm.K);
        double maxv = -std::numeric_limits<double>::max();
        for (int k = 0; k < gmm.K; ++k) {
            logp[k] = std::log(gmm.weights[k]) + log_gauss_diag(Z, i, gmm.means, gmm.vars, k);
            maxv = std::max(maxv, logp[k]);
        }
        double denom = 0.0;
        for (int k = 0; k < gmm.K; ++k) denom += std::exp(logp[k] - maxv);
        loglik += maxv + std::log(denom);
        for (int k = 0; k < gmm.K; ++k) r(i, k) = std::exp(logp[k] - maxv) / denom;
    }
    return loglik;
}

}  // namespace

GmmModel gmm_fit(const Mat& Z, int K, SeededRng& rng, int max_iters, double tol) {
    int n = Z.rows, D = Z.cols;
    require(K >= 1, "gmm_fit: K must be at least 1");
    require(K <= n, "gmm_fit: K exceeds number of points");

    GmmModel gmm;
    gmm.K = K;
    gmm.weights.assign(K, 1.0 / K);
    gmm.means = Mat(K, D);
    gmm.vars = Mat(K, D);

    // farthest-point seeding from a random start
    int first = rng.uniform_int(n);
    for (int d = 0; d < D; ++d) gmm.means(0, d) = Z(first, d);
    for (int k = 1; k < K; ++k) {
        int idx = farthest_point(Z, gmm.means, k);
        for (int d = 0; d < D; ++d) gmm.means(k, d) = Z(idx, d);
    }
    Vec gvar = global_variance(Z);
    for (int k = 0; k < K; ++k) {
        for (int d = 0; d < D; ++d) gmm.vars(k, d) = gvar[d];
    }

    Mat r(n, K);
    double prev_ll = -std::numeric_limits<double>::max();
    int reinits = 0;
    for (int iter = 0; iter < max_iters; ++iter) {
        double ll = e_step(gmm, Z, r);

        Vec mass(K, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < K; ++k) mass[k] += r(i, k);
        }
        bool degenerate = false;
        for (int k = 0; k < K; ++k) {
            if (mass[k] < 1e-10) {
                if (++reinits > 3) {
                    throw std::runtime_error("gmm_fit: component " + std::to_string(k) +
                                             " degenerate after 3 reinitializations");
                }
                int idx = farthest_point(Z, gmm.means, K);
                for (int d = 0; d < D; ++d) {
                    gmm.means(k, d) = Z(idx, d);
                    gmm.vars(k, d) = gvar[d];
                }
                degenerate = true;
            }
        }
        if (degenerate) continue;

        gmm.loglik_trace.push_back(ll);
        for (int k = 0; k < K; ++k) {
            gmm.weights[k] = mass[k] / n;
            for (int d = 0; d < D; ++d) {
                double m = 0.0;
                for (int i = 0; i < n; ++i) m += r(i, k) * Z(i, d);
                gmm.means(k, d) = m / mass[k];
            }
            for (int d = 0; d < D; ++d) {
                double v = 0.0;
                for (int i = 0; i < n; ++i) {
                    double diff = Z(i, d) - gmm.means(k, d);
                    v += r(i, k) * diff * diff;
                }
                gmm.vars(k, d) = std::max(v / mass[k], GmmModel::var_floor);
            }
        }
        if (iter > 0 && std::fabs(ll - prev_ll) < tol * (std::fabs(prev_ll) + 1.0)) break;
        prev_ll = ll;
    }
    return gmm;
}

Mat responsibilities(const GmmModel& gmm, const Mat& Z) {
    Mat r(Z.rows, gmm.K);
    e_step(gmm, Z, r);
    return r;
}

std::vector<std::vector<int>> soft_assign(const Mat& r, double threshold) {
    require(threshold > 0.0 && threshold <= 1.0, "soft_assign: threshold must be in (0, 1]");
    int n = r.rows, K = r.cols;
    std::vector<std::vector<int>> clusters(K);
    for (int i = 0; i < n; ++i) {
        int argmax = 0;
        for (int k = 1; k < K; ++k) {
            if (r(i, k) > r(i, argmax)) argmax = k;
        }
        for (int k = 0; k < K; ++k) {
            if (k == argmax || r(i, k) >= threshold) clusters[k].push_back(i);
        }
    }
    clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                  [](const std::vector<int>& c) { return c.empty(); }),
                   clusters.end());
    return clusters;
}

namespace {

Vec cluster_centroid(const std::vector<int>& cluster, const Mat& Z) {
    Vec c(Z.cols, 0.0);
    for (int i : cluster) {
        for (int d = 0; d < Z.cols; ++d) c[d] += Z(i, d);
    }
    for (double& v : c) v /= static_cast<double>(cluster.size());
    return c;
}

}  // namespace

std::vector<std::vector<int>> refine_singletons(const std::vector<std::vector<int>>& clusters,
                                                const Mat& Z) {
    std::vector<std::vector<int>> out = clusters;
    while (out.size() > 1) {
        int singleton = -1;
        for (size_t c = 0; c < out.size(); ++c) {
            if (out[c].size() == 1) {
                singleton = static_cast<int>(c);
                break;
            }
        }
        if (singleton < 0) break;

        Vec point(Z.cols);
        for (int d = 0; d < Z.cols; ++d) point[d] = Z(out[singleton][0], d);
        int target = -1;
        double best = std::numeric_limits<double>::max();
        for (size_t c = 0; c < out.size(); ++c) {
            if (static_cast<int>(c) == singleton) continue;
            Vec centroid = cluster_centroid(out[c], Z);
            double acc = 0.0;
            for (int d = 0; d < Z.cols; ++d) {
                double diff = point[d] - centroid[d];
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                target = static_cast<int>(c);
            }
        }

        std::set<int> merged(out[target].begin(), out[target].end());
        merged.insert(out[singleton][0]);
        std::vector<int> merged_vec(merged.begin(), merged.end());
        int lo = std::min(singleton, target);
        int hi = std::max(singleton, target);
        out.erase(out.begin() + hi);
        out[lo] = std::move(merged_vec);
    }
    return out;
}

SilhouetteResult silhouette(const Mat& Z, const std::vector<int>& hard_labels) {
    int n = Z.rows;
    require(static_cast<int>(hard_labels.size()) == n, "silhouette: label count mismatch");
    std::set<int> label_set(hard_labels.begin(), hard_labels.end());
    require(label_set.size() >= 2, "silhouette: undefined for a single cluster");

    SilhouetteResult res;
    res.per_node.resize(n);
    for (int i = 0; i < n; ++i) {
        double a = 0.0;
        int own = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i || hard_labels[j] != hard_labels[i]) continue;
            a += eu_dist(Z, i, j);
            ++own;
        }
        a = own > 0 ? a / own : 0.0;

        double b = std::numeric_limits<double>::max();
        for (int label : label_set) {
            if (label == hard_labels[i]) continue;
            double acc = 0.0;
            int count = 0;
            for (int j = 0; j < n; ++j) {
                if (hard_labels[j] != label) continue;
                acc += eu_dist(Z, i, j);
                ++count;
            }
            b = std::min(b, acc / count);
        }

        double denom = std::max(a, b);
        res.per_node[i] = denom > 0.0 ? (b - a) / denom : 0.0;
        res.mean += res.per_node[i];
    }
    res.mean /= n;
    return res;
}

GroupingResult run_grouping_once(const TaskGraph& graph, const GroupingConfig& config,
                                 uint64_t seed, int run_index) {
    GroupingResult res;
    res.seed = seed;
    res.run_index = run_index;

    GatConfig gat = config.gat;
    gat.seed = seed;
    res.embeddings = train_gat(graph, gat);

    SeededRng rng(seed, 2);
    GmmModel gmm = gmm_fit(res.embeddings.Z, config.budget, rng, config.em_max_iters,
                           config.em_tol);
    for (size_t i = 1; i < gmm.loglik_trace.size(); ++i) {
        if (gmm.loglik_trace[i] < gmm.loglik_trace[i - 1] - 1e-9) {
            throw std::runtime_error("gmm_fit: log-likelihood decreased during EM");
        }
    }

    res.resp = responsibilities(gmm, res.embeddings.Z);
    res.clusters = refine_singletons(soft_assign(res.resp, config.threshold), res.embeddings.Z);

    // refined hard partition: argmax assignment, then the same singleton rule
    std::vector<std::vector<int>> hard_clusters(gmm.K);
    for (int i = 0; i < graph.T; ++i) {
        int argmax = 0;
        for (int k = 1; k < gmm.K; ++k) {
            if (res.resp(i, k) > res.resp(i, argmax)) argmax = k;
        }
        hard_clusters[argmax].push_back(i);
    }
    hard_clusters.erase(std::remove_if(hard_clusters.begin(), hard_clusters.end(),
                                       [](const std::vector<int>& c) { return c.empty(); }),
                        hard_clusters.end());
    hard_clusters = refine_singletons(hard_clusters, res.embeddings.Z);

    res.hard_labels.assign(graph.T, -1);
    for (size_t c = 0; c < hard_clusters.size(); ++c) {
        for (int i : hard_clusters[c]) res.hard_labels[i] = static_cast<int>(c);
    }

    if (hard_clusters.size() >= 2) {
        SilhouetteResult sil = silhouette(res.embeddings.Z, res.hard_labels);
        res.silhouettes = sil.per_node;
        res.mean_silhouette = sil.mean;
    } else {
        // everything collapsed to one cluster; score below any real silhouette
        res.silhouettes.assign(graph.T, 0.0);
        res.mean_silhouette = -2.0;
    }
    return res;
}

GroupingResult select_grouping(const AffinityMatrix& A, const GroupingConfig& config,
                               uint64_t master_seed) {
    require(config.budget >= 2, "select_grouping: budget must be at least 2");
    require(config.runs >= 1, "select_grouping: need at least one run");

    TaskGraph graph = build_graph(A);
    GroupingResult best;
    bool have_best = false;
    for (int r = 0; r < config.runs; ++r) {
        uint64_t seed = derive_seed(master_seed, "grouping-run", static_cast<uint64_t>(r));
        GroupingResult res = run_grouping_once(graph, config, seed, r);
        if (!have_best || res.mean_silhouette > best.mean_silhouette) {
            best = std::move(res);
            have_best = true;
        }
    }
    if (best.mean_silhouette <= -2.0) {
        throw std::runtime_error("select_grouping: every run collapsed to a single cluster");
    }
    return best;
}

}  // namespace taskaff
