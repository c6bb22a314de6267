#include "taskaff/sca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace taskaff {

std::string to_string(AffinityMode m) {
    switch (m) {
        case AffinityMode::vector_mode: return "vector";
        case AffinityMode::tensorwise: return "tensorwise";
        case AffinityMode::meta: return "meta";
    }
    return "vector";
}

AffinityMode affinity_mode_from_string(const std::string& s) {
    if (s == "vector") return AffinityMode::vector_mode;
    if (s == "tensorwise") return AffinityMode::tensorwise;
    if (s == "meta") return AffinityMode::meta;
    throw std::invalid_argument("unknown affinity mode: " + s);
}

namespace {

void check_finite(const Vec& g, const std::string& what) {
    for (double v : g) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite gradient in " + what);
    }
}

}  // namespace

Vec task_sample_optimum(const MultiTaskModel& model, int t, const MtlSample& sample, double eta) {
    require(eta > 0.0, "task_sample_optimum: eta must be positive");
    Vec g = shared_grad(model, t, sample);
    check_finite(g, "task_sample_optimum (task " + std::to_string(t) + ")");
    return sgd_step(model.shared.values, g, eta);
}

Vec shared_sample_optimum(const MultiTaskModel& model, const MtlSample& sample, double eta) {
    require(eta > 0.0, "shared_sample_optimum: eta must be positive");
    Vec g = averaged_shared_grad(model, sample);
    check_finite(g, "shared_sample_optimum");
    return sgd_step(model.shared.values, g, eta);
}

SampleOptimaSet compute_optima(const MultiTaskModel& model, const MultiTaskDataset& data,
                               const std::vector<int>& sample_indices, double eta) {
    SampleOptimaSet out;
    out.theta0 = model.shared;
    out.eta = eta;
    out.n = static_cast<int>(sample_indices.size());
    out.T = model.arch.task_count();
    out.task_optima.reserve(out.n);
    out.shared_optima.reserve(out.n);
    for (int i : sample_indices) {
        MtlSample s = data.sample(i);
        std::vector<Vec> per_task;
        per_task.reserve(out.T);
        for (int t = 0; t < out.T; ++t) per_task.push_back(task_sample_optimum(model, t, s, eta));
        out.task_optima.push_back(std::move(per_task));
        out.shared_optima.push_back(shared_sample_optimum(model, s, eta));
    }
    return out;
}

namespace {

double pair_sum_density(const std::vector<Vec>& optima, double H) {
    require(!optima.empty(), "density: need at least one optimum");
    require(H > 0.0, "density: H must be positive");
    size_t m = optima.size();
    double acc = 0.0;
    for (size_t j = 0; j < m; ++j) {
        for (size_t k = j + 1; k < m; ++k) {
            acc += 2.0 * l1_distance(optima[j], optima[k]);  // both orderings
        }
    }
    return std::sqrt(H) / (static_cast<double>(m) * m) * acc;
}

}  // namespace

double optima_density(const std::vector<Vec>& optima, double H) {
    return pair_sum_density(optima, H);
}

double dataset_density(const std::vector<Vec>& shared_optima, double H) {
    return pair_sum_density(shared_optima, H);
}

SmoothnessEstimate estimate_smoothness(const MultiTaskModel& model, const MultiTaskDataset& data,
                                       const std::vector<int>& sample_indices, int coord_probes,
                                       uint64_t seed, double safety_factor, double h) {
    require(coord_probes >= 1, "estimate_smoothness: need at least one probe");
    require(safety_factor >= 1.0, "estimate_smoothness: safety factor must be >= 1");
    SeededRng rng(seed, 0);
    int dim = static_cast<int>(model.shared.values.size());
    double max_entry = 0.0;
    for (int i : sample_indices) {
        MtlSample s = data.sample(i);
        for (int t = 0; t < model.arch.task_count(); ++t) {
            auto loss_at = [&](const Vec& theta) {
                MultiTaskModel probe = model;
                probe.shared.values = theta;
                double p = forward(probe, t, s.x);
                return task_loss(p, s.labels[t], model.arch.task_losses[t]);
            };
            int probes = std::min(coord_probes, dim);
            for (int q = 0; q < probes; ++q) {
                int k = (probes == dim) ? q : rng.uniform_int(dim);
                double d2 = finite_diff_second(loss_at, model.shared.values, k, h);
                max_entry = std::max(max_entry, d2);
            }
        }
    }
    SmoothnessEstimate est;
    est.safety_factor = safety_factor;
    est.method = "central finite-difference diagonal Hessian, h=" + std::to_string(h);
    est.H = std::max(safety_factor * max_entry, 1e-12);
    return est;
}

LossBoundReport check_loss_bound(const MultiTaskModel& model, const MtlSample& sample, double eta,
                                 double H) {
    int T = model.arch.task_count();
    std::vector<Vec> task_optima;
    task_optima.reserve(T);
    for (int t = 0; t < T; ++t) task_optima.push_back(task_sample_optimum(model, t, sample, eta));
    Vec shared_opt = shared_sample_optimum(model, sample, eta);

    MultiTaskModel at_opt = model;
    at_opt.shared.values = shared_opt;

    LossBoundReport rep;
    rep.loss = average_multitask_loss(at_opt, sample);
    rep.loss_sum = rep.loss * T;
    rep.density = optima_density(task_optima, H);
    rep.bound = static_cast<double>(T) * T * T * rep.density * rep.density;
    rep.slack = rep.bound - rep.loss;
    rep.holds = rep.loss <= rep.bound + 1e-9;
    return rep;
}

double pairwise_affinity(const SampleOptimaSet& optima, int task_i, int task_j) {
    require(task_i >= 0 && task_i < optima.T && task_j >= 0 && task_j < optima.T,
            "pairwise_affinity: task index out of range");
    require(optima.n > 0, "pairwise_affinity: empty optima set");
    double acc = 0.0;
    for (int i = 0; i < optima.n; ++i) {
        acc += l1_distance(optima.task_optima[i][task_i], optima.task_optima[i][task_j]);
    }
    return acc / optima.n;
}

double pairwise_affinity_tensorwise(const SampleOptimaSet& optima, int task_i, int task_j) {
    require(optima.n > 0, "pairwise_affinity_tensorwise: empty optima set");
    const auto& tensors = optima.theta0.layout->tensors;
    int l = static_cast<int>(tensors.size());
    double acc = 0.0;
    for (int i = 0; i < optima.n; ++i) {
        const Vec& a = optima.task_optima[i][task_i];
        const Vec& b = optima.task_optima[i][task_j];
        for (const TensorSpec& spec : tensors) {
            for (size_t k = spec.offset; k < spec.offset + spec.size(); ++k) {
                acc += std::fabs(a[k] - b[k]);
            }
        }
    }
    return acc / optima.n / l;
}

double pairwise_affinity_meta(const MultiTaskModel& model, int task_i, int task_j,
                              const std::vector<TaskSample>& samples_i,
                              const std::vector<TaskSample>& samples_j, double eta) {
    require(samples_i.size() == samples_j.size(), "pairwise_affinity_meta: unequal sample counts");
    require(!samples_i.empty(), "pairwise_affinity_meta: empty sample lists");
    int T = model.arch.task_count();
    double acc = 0.0;
    for (size_t i = 0; i < samples_i.size(); ++i) {
        MtlSample si;
        si.x = samples_i[i].x;
        si.labels.assign(T, 0.0);
        si.labels[task_i] = samples_i[i].y;
        MtlSample sj;
        sj.x = samples_j[i].x;
        sj.labels.assign(T, 0.0);
        sj.labels[task_j] = samples_j[i].y;
        Vec oi = task_sample_optimum(model, task_i, si, eta);
        Vec oj = task_sample_optimum(model, task_j, sj, eta);
        acc += l1_distance(oi, oj);
    }
    return acc / static_cast<double>(samples_i.size());
}

Mat normalize_affinity(const Mat& raw) {
    require(raw.rows == raw.cols, "normalize_affinity: matrix must be square");
    Mat out(raw.rows, raw.cols);
    for (int i = 0; i < raw.rows; ++i) {
        double rowmax = 0.0;
        for (int j = 0; j < raw.cols; ++j) {
            require(raw(i, j) >= 0.0, "normalize_affinity: negative entry");
            rowmax = std::max(rowmax, raw(i, j));
        }
        for (int j = 0; j < raw.cols; ++j) {
            // all-zero row: identical tasks, maximally affine
            out(i, j) = (rowmax == 0.0) ? 1.0 : 1.0 - raw(i, j) / rowmax;
        }
    }
    return out;
}

AffinityMatrix build_affinity_matrix(const MultiTaskModel& model, const MultiTaskDataset& data,
                                     int n_samples, double eta, AffinityMode mode, uint64_t seed) {
    require(data.size() >= 1, "build_affinity_matrix: dataset too small");
    require(n_samples >= 1, "build_affinity_matrix: need at least one sample");
    n_samples = std::min(n_samples, data.size());

    std::vector<int> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    SeededRng rng(seed, 0);
    rng.shuffle(idx);
    idx.resize(n_samples);

    int T = model.arch.task_count();
    AffinityMatrix A;
    A.mode = mode;
    A.n_samples = n_samples;
    A.task_names = data.task_names;
    A.raw = Mat(T, T);

    if (mode == AffinityMode::meta) {
        std::vector<std::vector<TaskSample>> per_task(T);
        for (int t = 0; t < T; ++t) {
            for (int i : idx) {
                TaskSample ts;
                ts.x = data.X.row_vec(i);
                ts.y = data.Y(i, t);
                per_task[t].push_back(std::move(ts));
            }
        }
        for (int a = 0; a < T; ++a) {
            for (int b = a + 1; b < T; ++b) {
                double v = pairwise_affinity_meta(model, a, b, per_task[a], per_task[b], eta);
                A.raw(a, b) = v;
                A.raw(b, a) = v;
            }
        }
    } else {
        SampleOptimaSet optima = compute_optima(model, data, idx, eta);
        for (int a = 0; a < T; ++a) {
            for (int b = a + 1; b < T; ++b) {
                double v = (mode == AffinityMode::tensorwise)
                               ? pairwise_affinity_tensorwise(optima, a, b)
                               : pairwise_affinity(optima, a, b);
                A.raw(a, b) = v;
                A.raw(b, a) = v;
            }
        }
    }
    A.normalized = normalize_affinity(A.raw);
    return A;
}

}  // namespace taskaff
