#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskaff {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
    int rows = 0;
    int cols = 0;
    Vec data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }

    Vec row_vec(int i) const { return Vec(row(i), row(i) + cols); }
};

// Deterministic, platform-stable stream RNG built on the splitmix64 step
// function. Identical (master_seed, stream_id) gives identical sequences
// everywhere; distinct stream_ids give independent streams.
class SeededRng {
  public:
    SeededRng(uint64_t master_seed, uint64_t stream_id = 0);

    uint64_t next_u64();
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    double normal();                       // standard normal, Box-Muller
    int uniform_int(int n);                // [0, n), unbiased

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[uniform_int(i + 1)]);
        }
    }

    static uint64_t mix(uint64_t x);  // splitmix64 finalizer, exposed for seed derivation

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct OptimizerState {
    enum class Kind { sgd, adam };

    Kind kind = Kind::sgd;
    double learning_rate = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    Vec m;  // first moment
    Vec v;  // second moment
    long step_count = 0;

    static OptimizerState sgd(double lr);
    static OptimizerState adam(double lr, size_t dim, double beta1 = 0.9, double beta2 = 0.999,
                               double epsilon = 1e-8);
};

double l1_distance(const Vec& a, const Vec& b);

Vec sgd_step(const Vec& params, const Vec& grads, double lr);

// Updates moments and step count in place, returns the new parameters.
Vec adam_step(OptimizerState& state, const Vec& params, const Vec& grads);

// Central differences, (f(x+h e_k) - f(x-h e_k)) / 2h per coordinate.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5);

// Central second difference along one coordinate.
double finite_diff_second(const std::function<double(const Vec&)>& f, const Vec& x, int k,
                          double h = 1e-4);

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace taskaff
