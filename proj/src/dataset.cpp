#include "taskaff/dataset.hpp"

#include <filesystem>
#include <numeric>
#include <sstream>

#include "taskaff/io.hpp"

#include "json.hpp"

namespace taskaff {

MtlSample MultiTaskDataset::sample(int i) const {
    require(i >= 0 && i < size(), "dataset: sample index out of range");
    MtlSample s;
    s.x = X.row_vec(i);
    s.labels = Y.row_vec(i);
    return s;
}

MultiTaskDataset MultiTaskDataset::subset(const std::vector<int>& indices) const {
    MultiTaskDataset out;
    out.task_names = task_names;
    out.task_losses = task_losses;
    out.X = Mat(static_cast<int>(indices.size()), X.cols);
    out.Y = Mat(static_cast<int>(indices.size()), Y.cols);
    for (size_t r = 0; r < indices.size(); ++r) {
        int i = indices[r];
        require(i >= 0 && i < size(), "subset: index out of range");
        for (int j = 0; j < X.cols; ++j) out.X(static_cast<int>(r), j) = X(i, j);
        for (int j = 0; j < Y.cols; ++j) out.Y(static_cast<int>(r), j) = Y(i, j);
    }
    return out;
}

SplitDataset split(const MultiTaskDataset& data, const std::array<double, 3>& fractions,
                   SeededRng& rng) {
    double sum = fractions[0] + fractions[1] + fractions[2];
    require(std::abs(sum - 1.0) < 1e-12, "split: fractions must sum to 1");
    require(data.size() > 0, "split: empty dataset");

    std::vector<int> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);

    int n = data.size();
    int n_val = static_cast<int>(fractions[1] * n);
    int n_test = static_cast<int>(fractions[2] * n);
    int n_train = n - n_val - n_test;  // remainder goes to train
    require(fractions[0] == 0.0 || n_train > 0, "split: empty train split");

    SplitDataset out;
    out.train = data.subset({idx.begin(), idx.begin() + n_train});
    out.val = data.subset({idx.begin() + n_train, idx.begin() + n_train + n_val});
    out.test = data.subset({idx.begin() + n_train + n_val, idx.end()});
    return out;
}

void export_dataset_csv(const MultiTaskDataset& data, const std::string& dir) {
    std::filesystem::create_directories(dir);

    std::vector<std::string> xcols, xrows;
    for (int j = 0; j < data.X.cols; ++j) xcols.push_back("x" + std::to_string(j));
    for (int i = 0; i < data.X.rows; ++i) xrows.push_back(std::to_string(i));
    write_matrix_csv(dir + "/features.csv", data.X, xcols, xrows);

    for (int t = 0; t < data.task_count(); ++t) {
        Mat col(data.size(), 1);
        for (int i = 0; i < data.size(); ++i) col(i, 0) = data.Y(i, t);
        write_matrix_csv(dir + "/labels_" + data.task_names[t] + ".csv", col, {"label"}, xrows);
    }

    nlohmann::json manifest;
    manifest["n"] = data.size();
    manifest["input_dim"] = data.input_dim();
    manifest["tasks"] = nlohmann::json::array();
    for (int t = 0; t < data.task_count(); ++t) {
        manifest["tasks"].push_back(
            {{"name", data.task_names[t]}, {"loss", to_string(data.task_losses[t])}});
    }
    write_text_file(dir + "/dataset.json", manifest.dump(2) + "\n");
}

MultiTaskDataset import_dataset_csv(const std::string& dir) {
    nlohmann::json manifest = nlohmann::json::parse(read_text_file(dir + "/dataset.json"));
    MultiTaskDataset data;
    NamedMatrix feats = read_matrix_csv(dir + "/features.csv");
    data.X = feats.values;
    int n = data.X.rows;
    int T = static_cast<int>(manifest["tasks"].size());
    data.Y = Mat(n, T);
    for (int t = 0; t < T; ++t) {
        std::string name = manifest["tasks"][t]["name"].get<std::string>();
        data.task_names.push_back(name);
        data.task_losses.push_back(loss_kind_from_string(manifest["tasks"][t]["loss"].get<std::string>()));
        NamedMatrix col = read_matrix_csv(dir + "/labels_" + name + ".csv");
        if (col.values.rows != n) {
            throw std::runtime_error("labels_" + name + ".csv row count does not match features");
        }
        for (int i = 0; i < n; ++i) data.Y(i, t) = col.values(i, 0);
    }
    return data;
}

}  // namespace taskaff
