#include "taskaff/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "taskaff/io.hpp"

namespace taskaff {

std::string to_string(TrainMode m) {
    return m == TrainMode::mtl ? "mtl" : "reptile";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "mtl") return TrainMode::mtl;
    if (s == "reptile") return TrainMode::reptile;
    throw std::invalid_argument("unknown train mode: " + s);
}

void TrainConfig::validate() const {
    require(epochs >= 1, "train config: iterations must be at least 1");
    require(batch_size >= 1, "train config: batch size must be at least 1");
    require(learning_rate > 0.0 && inner_lr > 0.0, "train config: rates must be positive");
    require(outer_lr >= 0.0, "train config: outer rate must be non-negative");
    require(inner_iters >= 1, "train config: inner iterations must be at least 1");
}

namespace {

ModelArch group_arch(const std::vector<int>& group, const ModelArch& arch_template) {
    require(!group.empty(), "group training: empty group");
    ModelArch arch = arch_template;
    arch.task_losses.clear();
    for (int t : group) {
        require(t >= 0 && t < arch_template.task_count(), "group training: task index out of range");
        arch.task_losses.push_back(arch_template.task_losses[t]);
    }
    return arch;
}

MtlSample group_sample(const MultiTaskDataset& data, int i, const std::vector<int>& group) {
    MtlSample s;
    s.x = data.X.row_vec(i);
    s.labels.reserve(group.size());
    for (int t : group) s.labels.push_back(data.Y(i, t));
    return s;
}

int thread_count_from_env() {
    const char* env = std::getenv("TASKAFF_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    return n > 1 ? n : 1;
}

// Deterministic parallel map: job i writes only slot i.
void parallel_for_jobs(int n_jobs, const std::function<void(int)>& job) {
    int threads = std::min(thread_count_from_env(), n_jobs);
    if (threads <= 1) {
        for (int i = 0; i < n_jobs; ++i) job(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n_jobs);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                int i = next.fetch_add(1);
                if (i >= n_jobs) break;
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

TrainResult train_group_mtl(const std::vector<int>& group, const MultiTaskDataset& train_data,
                            const ModelArch& arch_template, const TrainConfig& config) {
    config.validate();
    ModelArch arch = group_arch(group, arch_template);
    SeededRng init_rng(config.seed, 20);
    SeededRng batch_rng(config.seed, 21);

    TrainResult res;
    res.tasks = group;
    res.model = init_shared(arch, init_rng);
    int Tg = static_cast<int>(group.size());
    int n = train_data.size();

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        batch_rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            int end = std::min(start + config.batch_size, n);
            int bsz = end - start;

            Vec shared_g(res.model.shared.values.size(), 0.0);
            std::vector<Vec> head_g(Tg, Vec(res.model.heads[0].layout->total, 0.0));
            double batch_loss = 0.0;
            for (int b = start; b < end; ++b) {
                MtlSample s = group_sample(train_data, order[b], group);
                batch_loss += average_multitask_loss(res.model, s);
                Vec sg = averaged_shared_grad(res.model, s);
                for (size_t k = 0; k < sg.size(); ++k) shared_g[k] += sg[k];
                for (int t = 0; t < Tg; ++t) {
                    Vec hg = head_grad(res.model, t, s);
                    // per-task head sees the averaged objective's 1/T factor
                    for (size_t k = 0; k < hg.size(); ++k) head_g[t][k] += hg[k] / Tg;
                }
            }
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train_group_mtl: divergence at epoch " +
                                         std::to_string(epoch));
            }
            for (double& v : shared_g) v /= bsz;
            for (auto& hg : head_g) {
                for (double& v : hg) v /= bsz;
            }
            res.model.shared.values =
                sgd_step(res.model.shared.values, shared_g, config.learning_rate);
            for (int t = 0; t < Tg; ++t) {
                res.model.heads[t].values =
                    sgd_step(res.model.heads[t].values, head_g[t], config.learning_rate);
            }
            epoch_loss += batch_loss;
            ++batches;
        }
        res.loss_curve.push_back(epoch_loss / batches);
    }
    return res;
}

TrainResult train_group_reptile(const std::vector<int>& group, const MultiTaskDataset& train_data,
                                const ModelArch& arch_template, const TrainConfig& config) {
    config.validate();
    ModelArch arch = group_arch(group, arch_template);
    SeededRng init_rng(config.seed, 20);
    SeededRng batch_rng(config.seed, 22);

    TrainResult res;
    res.tasks = group;
    res.model = init_shared(arch, init_rng);
    int Tg = static_cast<int>(group.size());
    int n = train_data.size();

    for (int meta = 0; meta < config.epochs; ++meta) {
        const Vec theta = res.model.shared.values;
        std::vector<Vec> inner_weights(Tg);
        double meta_loss = 0.0;
        int loss_terms = 0;

        for (int t = 0; t < Tg; ++t) {
            Vec W = theta;
            for (int it = 0; it < config.inner_iters; ++it) {
                std::vector<int> batch(config.batch_size);
                for (int& b : batch) b = batch_rng.uniform_int(n);

                MultiTaskModel inner = res.model;
                inner.shared.values = W;
                Vec gW(W.size(), 0.0);
                Vec gH(res.model.heads[t].layout->total, 0.0);
                double batch_loss = 0.0;
                for (int b : batch) {
                    MtlSample s = group_sample(train_data, b, group);
                    double p = forward(inner, t, s.x);
                    batch_loss += task_loss(p, s.labels[t], arch.task_losses[t]);
                    Vec sg = shared_grad(inner, t, s);
                    for (size_t k = 0; k < sg.size(); ++k) gW[k] += sg[k];
                    Vec hg = head_grad(inner, t, s);
                    for (size_t k = 0; k < hg.size(); ++k) gH[k] += hg[k];
                }
                batch_loss /= config.batch_size;
                if (!std::isfinite(batch_loss)) {
                    throw std::runtime_error("train_group_reptile: divergence at meta-iteration " +
                                             std::to_string(meta));
                }
                for (double& v : gW) v /= config.batch_size;
                for (double& v : gH) v /= config.batch_size;
                W = sgd_step(W, gW, config.inner_lr);
                res.model.heads[t].values =
                    sgd_step(res.model.heads[t].values, gH, config.inner_lr);
                meta_loss += batch_loss;
                ++loss_terms;
            }
            inner_weights[t] = std::move(W);
        }

        // G = (1/T) sum (theta - W_t); theta <- theta - alpha G
        Vec G(theta.size(), 0.0);
        for (int t = 0; t < Tg; ++t) {
            for (size_t k = 0; k < theta.size(); ++k) G[k] += theta[k] - inner_weights[t][k];
        }
        for (double& v : G) v /= Tg;
        for (size_t k = 0; k < theta.size(); ++k) {
            res.model.shared.values[k] = theta[k] - config.outer_lr * G[k];
        }
        res.loss_curve.push_back(meta_loss / loss_terms);
    }
    return res;
}

double task_metric(const MultiTaskModel& model, int head_idx, int task_idx,
                   const MultiTaskDataset& data) {
    require(data.size() > 0, "task_metric: empty dataset");
    LossKind kind = data.task_losses[task_idx];
    if (kind == LossKind::mse) {
        double acc = 0.0;
        for (int i = 0; i < data.size(); ++i) {
            double p = forward(model, head_idx, data.X.row_vec(i));
            double r = p - data.Y(i, task_idx);
            acc += r * r;
        }
        return -acc / data.size();
    }
    int pos = 0, neg = 0, tp = 0, tn = 0;
    for (int i = 0; i < data.size(); ++i) {
        double p = forward(model, head_idx, data.X.row_vec(i));
        bool pred = p >= 0.0;
        bool truth = data.Y(i, task_idx) > 0.5;
        if (truth) {
            ++pos;
            if (pred) ++tp;
        } else {
            ++neg;
            if (!pred) ++tn;
        }
    }
    if (pos == 0) return static_cast<double>(tn) / neg;
    if (neg == 0) return static_cast<double>(tp) / pos;
    return 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
}

GroupPerformanceReport evaluate_groupings(const std::vector<std::vector<int>>& groupings,
                                          const SplitDataset& data, const ModelArch& arch_template,
                                          const TrainConfig& config) {
    int T = arch_template.task_count();
    std::vector<bool> covered(T, false);
    for (const auto& g : groupings) {
        for (int t : g) {
            require(t >= 0 && t < T, "evaluate_groupings: task index out of range");
            covered[t] = true;
        }
    }
    for (int t = 0; t < T; ++t) {
        require(covered[t], "evaluate_groupings: task " + std::to_string(t) + " uncovered");
    }

    auto t0 = std::chrono::steady_clock::now();
    GroupPerformanceReport rep;
    rep.groupings = groupings;
    rep.loss_curves.resize(groupings.size());

    std::vector<TrainResult> trained(groupings.size());
    parallel_for_jobs(static_cast<int>(groupings.size()), [&](int g) {
        TrainConfig cfg = config;
        cfg.seed = derive_seed(config.seed, "group-train", static_cast<uint64_t>(g));
        trained[g] = (config.mode == TrainMode::reptile)
                         ? train_group_reptile(groupings[g], data.train, arch_template, cfg)
                         : train_group_mtl(groupings[g], data.train, arch_template, cfg);
    });

    const MultiTaskDataset& val = data.val.size() > 0 ? data.val : data.train;
    const MultiTaskDataset& test = data.test.size() > 0 ? data.test : val;

    rep.tasks.resize(T);
    for (size_t g = 0; g < groupings.size(); ++g) {
        rep.loss_curves[g] = trained[g].loss_curve;
        for (size_t h = 0; h < groupings[g].size(); ++h) {
            int t = groupings[g][h];
            double vm = task_metric(trained[g].model, static_cast<int>(h), t, val);
            TaskOutcome& out = rep.tasks[t];
            if (out.chosen_group < 0 || vm > out.val_metric) {
                out.name = static_cast<int>(val.task_names.size()) == T
                               ? val.task_names[t]
                               : "task" + std::to_string(t);
                out.val_metric = vm;
                out.test_metric = task_metric(trained[g].model, static_cast<int>(h), t, test);
                out.chosen_group = static_cast<int>(g);
            }
        }
    }

    for (const TaskOutcome& out : rep.tasks) rep.collective += out.test_metric;
    rep.collective /= T;
    rep.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::vector<std::vector<int>> random_groupings(int T, int b, SeededRng& rng) {
    require(b >= 2 && b <= T, "random_groupings: need 2 <= b <= T");
    while (true) {
        std::vector<std::vector<int>> groups(b);
        for (int t = 0; t < T; ++t) groups[rng.uniform_int(b)].push_back(t);
        bool ok = true;
        for (const auto& g : groups) {
            if (g.empty()) ok = false;
        }
        if (ok) return groups;
    }
}

namespace {

void partitions_rec(int t, int T, int max_blocks, std::vector<std::vector<int>>& current,
                    std::vector<std::vector<std::vector<int>>>& out) {
    if (t == T) {
        out.push_back(current);
        return;
    }
    for (size_t b = 0; b < current.size(); ++b) {
        current[b].push_back(t);
        partitions_rec(t + 1, T, max_blocks, current, out);
        current[b].pop_back();
    }
    if (static_cast<int>(current.size()) < max_blocks) {
        current.push_back({t});
        partitions_rec(t + 1, T, max_blocks, current, out);
        current.pop_back();
    }
}

}  // namespace

std::vector<std::vector<std::vector<int>>> enumerate_partitions(int T, int max_blocks) {
    require(T >= 1 && max_blocks >= 1, "enumerate_partitions: invalid arguments");
    std::vector<std::vector<std::vector<int>>> out;
    std::vector<std::vector<int>> current;
    partitions_rec(0, T, max_blocks, current, out);
    return out;
}

uint64_t stirling_partition_count(int T, int max_blocks) {
    // S(n, k) via the standard recurrence, summed over k <= max_blocks
    std::vector<std::vector<uint64_t>> S(T + 1, std::vector<uint64_t>(T + 1, 0));
    S[0][0] = 1;
    for (int n = 1; n <= T; ++n) {
        for (int k = 1; k <= n; ++k) {
            S[n][k] = S[n - 1][k - 1] + static_cast<uint64_t>(k) * S[n - 1][k];
        }
    }
    uint64_t total = 0;
    for (int k = 1; k <= std::min(T, max_blocks); ++k) total += S[T][k];
    return total;
}

OracleResult exhaustive_oracle(int T, int b, const SplitDataset& data,
                               const ModelArch& arch_template, const TrainConfig& config) {
    require(T <= 8, "exhaustive_oracle: refusing T > 8 (partition count explodes)");
    require(T >= 1 && b >= 1, "exhaustive_oracle: invalid arguments");

    auto candidates = enumerate_partitions(T, b);
    OracleResult res;
    std::vector<double> scores(candidates.size());
    for (size_t c = 0; c < candidates.size(); ++c) {
        GroupPerformanceReport rep = evaluate_groupings(candidates[c], data, arch_template, config);
        scores[c] = rep.collective;
        res.table.emplace_back(candidates[c], rep.collective);
    }
    size_t best = 0;
    for (size_t c = 1; c < candidates.size(); ++c) {
        if (scores[c] > scores[best]) best = c;
    }
    res.best_partition = candidates[best];
    res.best_collective = scores[best];
    return res;
}

}  // namespace taskaff
