#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "taskaff/synthdata.hpp"

using namespace taskaff;

namespace {

PlantedSpec base_spec() {
    PlantedSpec spec;
    spec.groups = 2;
    spec.tasks_per_group = 3;
    spec.input_dim = 6;
    spec.n_samples = 50;
    spec.rho_in = 0.9;
    spec.rho_out = 0.0;
    spec.seed = 11;
    return spec;
}

double teacher_cos(const Mat& teachers, int a, int b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < teachers.cols; ++k) {
        dot += teachers(a, k) * teachers(b, k);
        na += teachers(a, k) * teachers(a, k);
        nb += teachers(b, k) * teachers(b, k);
    }
    return dot / std::sqrt(na * nb);
}

double mean_cos(const PlantedDataset& ds, bool within) {
    int T = ds.teachers.rows;
    int per = static_cast<int>(ds.ground_truth[0].size());
    double acc = 0.0;
    int count = 0;
    for (int a = 0; a < T; ++a) {
        for (int b = a + 1; b < T; ++b) {
            if (((a / per) == (b / per)) != within) continue;
            acc += teacher_cos(ds.teachers, a, b);
            ++count;
        }
    }
    return acc / count;
}

}  // namespace

TEST_SUITE_BEGIN("synthdata");

TEST_CASE("generation is deterministic and well shaped") {
    PlantedSpec spec = base_spec();
    PlantedDataset a = generate_planted(spec);
    PlantedDataset b = generate_planted(spec);
    CHECK(a.data.X.data == b.data.X.data);
    CHECK(a.data.Y.data == b.data.Y.data);
    CHECK(a.teachers.data == b.teachers.data);

    CHECK(a.data.size() == 50);
    CHECK(a.data.input_dim() == 6);
    CHECK(a.data.task_count() == 6);
    CHECK(a.data.task_names.size() == 6);
    CHECK(a.ground_truth == std::vector<std::vector<int>>{{0, 1, 2}, {3, 4, 5}});
    for (LossKind k : a.data.task_losses) CHECK(k == LossKind::mse);

    spec.seed = 12;
    PlantedDataset c = generate_planted(spec);
    CHECK(a.data.X.data != c.data.X.data);
}

TEST_CASE("fully correlated groups produce identical teachers and labels") {
    PlantedSpec spec = base_spec();
    spec.rho_in = 1.0;
    spec.noise = 0.0;
    PlantedDataset ds = generate_planted(spec);
    for (const auto& group : ds.ground_truth) {
        int first = group[0];
        for (int t : group) {
            for (int k = 0; k < ds.teachers.cols; ++k) {
                CHECK(ds.teachers(t, k) == ds.teachers(first, k));
            }
            for (int i = 0; i < ds.data.size(); ++i) {
                CHECK(ds.data.Y(i, t) == ds.data.Y(i, first));
            }
        }
    }
}

TEST_CASE("cross-group teachers are near-orthogonal in high dimension") {
    PlantedSpec spec = base_spec();
    spec.input_dim = 512;
    spec.n_samples = 4;
    spec.rho_in = 0.95;
    spec.rho_out = 0.0;
    PlantedDataset ds = generate_planted(spec);
    CHECK(std::fabs(mean_cos(ds, false)) < 0.2);
    CHECK(mean_cos(ds, true) > 0.7);
}

TEST_CASE("within-group alignment increases with the mixing coefficient") {
    PlantedSpec lo = base_spec();
    lo.input_dim = 128;
    lo.rho_in = 0.3;
    PlantedSpec hi = lo;
    hi.rho_in = 0.9;
    CHECK(mean_cos(generate_planted(hi), true) > mean_cos(generate_planted(lo), true));
}

TEST_CASE("per-group loss kinds control the label encoding") {
    PlantedSpec spec = base_spec();
    spec.group_loss = {LossKind::mse, LossKind::bce};
    PlantedDataset ds = generate_planted(spec);
    bool any_nonbinary = false;
    for (int i = 0; i < ds.data.size(); ++i) {
        for (int t : ds.ground_truth[1]) {
            CHECK((ds.data.Y(i, t) == 0.0 || ds.data.Y(i, t) == 1.0));
        }
        for (int t : ds.ground_truth[0]) {
            if (ds.data.Y(i, t) != 0.0 && ds.data.Y(i, t) != 1.0) any_nonbinary = true;
        }
    }
    CHECK(any_nonbinary);
    for (int t : ds.ground_truth[0]) CHECK(ds.data.task_losses[t] == LossKind::mse);
    for (int t : ds.ground_truth[1]) CHECK(ds.data.task_losses[t] == LossKind::bce);
}

TEST_CASE("spec validation rejects inconsistent settings") {
    PlantedSpec spec = base_spec();
    spec.rho_in = 0.2;
    spec.rho_out = 0.5;
    CHECK_THROWS_AS(generate_planted(spec), std::invalid_argument);
    spec = base_spec();
    spec.split_fractions = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = base_spec();
    spec.n_samples = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = base_spec();
    spec.group_loss = {LossKind::mse};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("splits partition the dataset with the remainder going to train") {
    PlantedSpec spec = base_spec();
    spec.n_samples = 11;
    MultiTaskDataset data = generate_planted(spec).data;
    SeededRng rng(5);
    SplitDataset s = split(data, {0.6, 0.2, 0.2}, rng);
    CHECK(s.val.size() == 2);
    CHECK(s.test.size() == 2);
    CHECK(s.train.size() == 7);  // 11 - 2 - 2

    // every original row appears exactly once across the splits
    auto rows = [](const MultiTaskDataset& d) {
        std::vector<Vec> out;
        for (int i = 0; i < d.size(); ++i) out.push_back(d.X.row_vec(i));
        return out;
    };
    std::vector<Vec> all = rows(s.train);
    for (const Vec& r : rows(s.val)) all.push_back(r);
    for (const Vec& r : rows(s.test)) all.push_back(r);
    std::vector<Vec> orig = rows(data);
    std::sort(all.begin(), all.end());
    std::sort(orig.begin(), orig.end());
    CHECK(all == orig);

    CHECK_THROWS_AS(split(data, {0.5, 0.2, 0.2}, rng), std::invalid_argument);
}

TEST_CASE("csv export and import round-trip the dataset") {
    PlantedSpec spec = base_spec();
    spec.n_samples = 7;
    spec.group_loss = {LossKind::mse, LossKind::bce};
    MultiTaskDataset data = generate_planted(spec).data;

    std::string dir = (std::filesystem::temp_directory_path() / "taskaff_ds_test").string();
    std::filesystem::remove_all(dir);
    export_dataset_csv(data, dir);
    MultiTaskDataset back = import_dataset_csv(dir);
    CHECK(back.X.data == data.X.data);
    CHECK(back.Y.data == data.Y.data);
    CHECK(back.task_names == data.task_names);
    CHECK(back.task_losses == data.task_losses);
    std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
