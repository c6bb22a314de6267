#include "taskaff/numcore.hpp"

#include <cmath>
#include <limits>

namespace taskaff {

uint64_t SeededRng::mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SeededRng::SeededRng(uint64_t master_seed, uint64_t stream_id) {
    state_ = mix(master_seed);
    state_ = mix(state_ ^ mix(stream_id + 0x853c49e6748fea9bULL));
}

uint64_t SeededRng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so log is finite
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int SeededRng::uniform_int(int n) {
    require(n > 0, "uniform_int: n must be positive");
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % un;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
}

OptimizerState OptimizerState::sgd(double lr) {
    require(lr > 0.0, "sgd: learning rate must be positive");
    OptimizerState s;
    s.kind = Kind::sgd;
    s.learning_rate = lr;
    return s;
}

OptimizerState OptimizerState::adam(double lr, size_t dim, double beta1, double beta2,
                                    double epsilon) {
    require(lr > 0.0, "adam: learning rate must be positive");
    OptimizerState s;
    s.kind = Kind::adam;
    s.learning_rate = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.m.assign(dim, 0.0);
    s.v.assign(dim, 0.0);
    return s;
}

double l1_distance(const Vec& a, const Vec& b) {
    require(a.size() == b.size(), "l1_distance: dimension mismatch");
    double acc = 0.0;
    for (size_t k = 0; k < a.size(); ++k) acc += std::fabs(a[k] - b[k]);
    return acc;
}

Vec sgd_step(const Vec& params, const Vec& grads, double lr) {
    require(params.size() == grads.size(), "sgd_step: shape mismatch");
    require(lr > 0.0, "sgd_step: learning rate must be positive");
    Vec out(params.size());
    for (size_t k = 0; k < params.size(); ++k) out[k] = params[k] - lr * grads[k];
    return out;
}

Vec adam_step(OptimizerState& state, const Vec& params, const Vec& grads) {
    require(state.kind == OptimizerState::Kind::adam, "adam_step: state is not adam");
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adam_step: shape mismatch");
    state.step_count += 1;
    double b1t = std::pow(state.beta1, static_cast<double>(state.step_count));
    double b2t = std::pow(state.beta2, static_cast<double>(state.step_count));
    Vec out(params.size());
    for (size_t k = 0; k < params.size(); ++k) {
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grads[k];
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grads[k] * grads[k];
        double mhat = state.m[k] / (1.0 - b1t);
        double vhat = state.v[k] / (1.0 - b2t);
        out[k] = params[k] - state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    return out;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    require(h > 0.0, "finite_diff_grad: h must be positive");
    Vec g(x.size());
    Vec xp = x;
    for (size_t k = 0; k < x.size(); ++k) {
        double orig = xp[k];
        xp[k] = orig + h;
        double fp = f(xp);
        xp[k] = orig - h;
        double fm = f(xp);
        xp[k] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("finite_diff_grad: non-finite evaluation at coordinate " +
                                     std::to_string(k));
        }
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double finite_diff_second(const std::function<double(const Vec&)>& f, const Vec& x, int k,
                          double h) {
    Vec xp = x;
    double orig = xp[k];
    double f0 = f(xp);
    xp[k] = orig + h;
    double fp = f(xp);
    xp[k] = orig - h;
    double fm = f(xp);
    if (!std::isfinite(f0) || !std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("finite_diff_second: non-finite evaluation at coordinate " +
                                 std::to_string(k));
    }
    return (fp - 2.0 * f0 + fm) / (h * h);
}

}  // namespace taskaff
