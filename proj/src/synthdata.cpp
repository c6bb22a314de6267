#include "taskaff/synthdata.hpp"

#include <cmath>

namespace taskaff {

void PlantedSpec::validate() const {
    require(groups >= 1 && tasks_per_group >= 1, "planted: need at least one task");
    require(input_dim >= 1, "planted: input_dim must be positive");
    require(n_samples >= 1, "planted: need at least one sample");
    require(rho_in >= 0.0 && rho_in <= 1.0, "planted: rho_in must be in [0,1]");
    require(rho_out >= 0.0 && rho_out <= 1.0, "planted: rho_out must be in [0,1]");
    require(rho_in > rho_out, "planted: rho_in must exceed rho_out");
    require(noise >= 0.0, "planted: noise must be non-negative");
    double s = split_fractions[0] + split_fractions[1] + split_fractions[2];
    require(std::abs(s - 1.0) < 1e-12, "planted: split fractions must sum to 1");
    require(group_loss.empty() || static_cast<int>(group_loss.size()) == groups,
            "planted: group_loss must have one entry per group");
}

PlantedDataset generate_planted(const PlantedSpec& spec) {
    spec.validate();
    int T = spec.task_count();
    int d = spec.input_dim;

    PlantedDataset out;
    out.teachers = Mat(T, d);
    out.data.task_losses.resize(T);

    SeededRng teacher_rng(spec.seed, 10);
    Vec common(d);
    for (double& v : common) v = teacher_rng.normal();

    for (int g = 0; g < spec.groups; ++g) {
        // bases across groups correlate at rho_out
        Vec base(d);
        for (int k = 0; k < d; ++k) {
            base[k] = std::sqrt(spec.rho_out) * common[k] +
                      std::sqrt(1.0 - spec.rho_out) * teacher_rng.normal();
        }
        std::vector<int> members;
        for (int j = 0; j < spec.tasks_per_group; ++j) {
            int t = g * spec.tasks_per_group + j;
            members.push_back(t);
            for (int k = 0; k < d; ++k) {
                out.teachers(t, k) = spec.rho_in * base[k] +
                                     std::sqrt(1.0 - spec.rho_in * spec.rho_in) *
                                         teacher_rng.normal();
            }
            out.data.task_losses[t] =
                spec.group_loss.empty() ? LossKind::mse : spec.group_loss[g];
            out.data.task_names.push_back("task" + std::to_string(t));
        }
        out.ground_truth.push_back(std::move(members));
    }

    SeededRng sample_rng(spec.seed, 11);
    out.data.X = Mat(spec.n_samples, d);
    out.data.Y = Mat(spec.n_samples, T);
    for (int i = 0; i < spec.n_samples; ++i) {
        for (int k = 0; k < d; ++k) out.data.X(i, k) = sample_rng.normal();
        for (int t = 0; t < T; ++t) {
            double y = 0.0;
            for (int k = 0; k < d; ++k) y += out.teachers(t, k) * out.data.X(i, k);
            if (spec.noise > 0.0) y += spec.noise * sample_rng.normal();
            if (out.data.task_losses[t] == LossKind::bce) y = y > 0.0 ? 1.0 : 0.0;
            out.data.Y(i, t) = y;
        }
    }
    return out;
}

}  // namespace taskaff
