#include "taskaff/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "taskaff/io.hpp"

#include "json.hpp"

namespace taskaff {

using nlohmann::json;

PipelineConfig default_config() {
    PipelineConfig cfg;
    cfg.planted.groups = 2;
    cfg.planted.tasks_per_group = 2;
    cfg.planted.input_dim = 8;
    cfg.planted.n_samples = 300;
    cfg.arch.input_dim = 8;
    cfg.arch.trunk_layers = {8};
    cfg.arch.activation = Activation::tanh_fn;
    cfg.grouping.budget = 2;
    return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
    json j;
    j["master_seed"] = cfg.master_seed;
    j["dataset_dir"] = cfg.dataset_dir;
    j["out_dir"] = cfg.out_dir;

    json planted;
    planted["groups"] = cfg.planted.groups;
    planted["tasks_per_group"] = cfg.planted.tasks_per_group;
    planted["input_dim"] = cfg.planted.input_dim;
    planted["n_samples"] = cfg.planted.n_samples;
    planted["split_fractions"] = cfg.planted.split_fractions;
    planted["rho_in"] = cfg.planted.rho_in;
    planted["rho_out"] = cfg.planted.rho_out;
    planted["noise"] = cfg.planted.noise;
    planted["seed"] = cfg.planted.seed;
    json gl = json::array();
    for (LossKind k : cfg.planted.group_loss) gl.push_back(to_string(k));
    planted["group_loss"] = gl;
    j["planted"] = planted;

    json arch;
    arch["input_dim"] = cfg.arch.input_dim;
    arch["trunk_layers"] = cfg.arch.trunk_layers;
    arch["activation"] = to_string(cfg.arch.activation);
    arch["head_hidden"] = cfg.arch.head_hidden;
    j["arch"] = arch;

    j["sca"] = {{"eta", cfg.sca.eta},
                {"n_samples", cfg.sca.n_samples},
                {"mode", to_string(cfg.sca.mode)}};

    j["gat"] = {{"epochs", cfg.grouping.gat.epochs},
                {"learning_rate", cfg.grouping.gat.learning_rate},
                {"heads", cfg.grouping.gat.layer1_heads},
                {"leaky_slope", cfg.grouping.gat.leaky_slope}};

    j["grouping"] = {{"budget", cfg.grouping.budget},
                     {"threshold", cfg.grouping.threshold},
                     {"runs", cfg.grouping.runs},
                     {"em_max_iters", cfg.grouping.em_max_iters},
                     {"em_tol", cfg.grouping.em_tol}};

    j["harness"] = {{"mode", to_string(cfg.harness.mode)},
                    {"epochs", cfg.harness.epochs},
                    {"batch_size", cfg.harness.batch_size},
                    {"learning_rate", cfg.harness.learning_rate},
                    {"inner_iters", cfg.harness.inner_iters},
                    {"inner_lr", cfg.harness.inner_lr},
                    {"outer_lr", cfg.harness.outer_lr}};

    j["baselines"] = {{"random", cfg.baselines.random}, {"oracle", cfg.baselines.oracle}};
    return j.dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    PipelineConfig cfg = default_config();
    try {
        if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<uint64_t>();
        if (j.contains("dataset_dir")) cfg.dataset_dir = j["dataset_dir"].get<std::string>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("planted")) {
            const json& p = j["planted"];
            if (p.contains("groups")) cfg.planted.groups = p["groups"].get<int>();
            if (p.contains("tasks_per_group"))
                cfg.planted.tasks_per_group = p["tasks_per_group"].get<int>();
            if (p.contains("input_dim")) cfg.planted.input_dim = p["input_dim"].get<int>();
            if (p.contains("n_samples")) cfg.planted.n_samples = p["n_samples"].get<int>();
            if (p.contains("split_fractions"))
                cfg.planted.split_fractions = p["split_fractions"].get<std::array<double, 3>>();
            if (p.contains("rho_in")) cfg.planted.rho_in = p["rho_in"].get<double>();
            if (p.contains("rho_out")) cfg.planted.rho_out = p["rho_out"].get<double>();
            if (p.contains("noise")) cfg.planted.noise = p["noise"].get<double>();
            if (p.contains("seed")) cfg.planted.seed = p["seed"].get<uint64_t>();
            if (p.contains("group_loss")) {
                cfg.planted.group_loss.clear();
                for (const auto& s : p["group_loss"]) {
                    cfg.planted.group_loss.push_back(loss_kind_from_string(s.get<std::string>()));
                }
            }
        }
        if (j.contains("arch")) {
            const json& a = j["arch"];
            if (a.contains("input_dim")) cfg.arch.input_dim = a["input_dim"].get<int>();
            if (a.contains("trunk_layers"))
                cfg.arch.trunk_layers = a["trunk_layers"].get<std::vector<int>>();
            if (a.contains("activation"))
                cfg.arch.activation = activation_from_string(a["activation"].get<std::string>());
            if (a.contains("head_hidden"))
                cfg.arch.head_hidden = a["head_hidden"].get<std::vector<int>>();
        }
        if (j.contains("sca")) {
            const json& s = j["sca"];
            if (s.contains("eta")) cfg.sca.eta = s["eta"].get<double>();
            if (s.contains("n_samples")) cfg.sca.n_samples = s["n_samples"].get<int>();
            if (s.contains("mode"))
                cfg.sca.mode = affinity_mode_from_string(s["mode"].get<std::string>());
        }
        if (j.contains("gat")) {
            const json& g = j["gat"];
            if (g.contains("epochs")) cfg.grouping.gat.epochs = g["epochs"].get<int>();
            if (g.contains("learning_rate"))
                cfg.grouping.gat.learning_rate = g["learning_rate"].get<double>();
            if (g.contains("heads")) cfg.grouping.gat.layer1_heads = g["heads"].get<int>();
            if (g.contains("leaky_slope"))
                cfg.grouping.gat.leaky_slope = g["leaky_slope"].get<double>();
        }
        if (j.contains("grouping")) {
            const json& g = j["grouping"];
            if (g.contains("budget")) cfg.grouping.budget = g["budget"].get<int>();
            if (g.contains("threshold")) cfg.grouping.threshold = g["threshold"].get<double>();
            if (g.contains("runs")) cfg.grouping.runs = g["runs"].get<int>();
            if (g.contains("em_max_iters")) cfg.grouping.em_max_iters = g["em_max_iters"].get<int>();
            if (g.contains("em_tol")) cfg.grouping.em_tol = g["em_tol"].get<double>();
        }
        if (j.contains("harness")) {
            const json& h = j["harness"];
            if (h.contains("mode")) cfg.harness.mode = train_mode_from_string(h["mode"].get<std::string>());
            if (h.contains("epochs")) cfg.harness.epochs = h["epochs"].get<int>();
            if (h.contains("batch_size")) cfg.harness.batch_size = h["batch_size"].get<int>();
            if (h.contains("learning_rate"))
                cfg.harness.learning_rate = h["learning_rate"].get<double>();
            if (h.contains("inner_iters")) cfg.harness.inner_iters = h["inner_iters"].get<int>();
            if (h.contains("inner_lr")) cfg.harness.inner_lr = h["inner_lr"].get<double>();
            if (h.contains("outer_lr")) cfg.harness.outer_lr = h["outer_lr"].get<double>();
        }
        if (j.contains("baselines")) {
            const json& b = j["baselines"];
            if (b.contains("random")) cfg.baselines.random = b["random"].get<bool>();
            if (b.contains("oracle")) cfg.baselines.oracle = b["oracle"].get<bool>();
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config field error: ") + e.what());
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    return config_from_json(read_text_file(path));
}

std::string config_hash(const PipelineConfig& cfg) {
    PipelineConfig canon = cfg;
    canon.out_dir.clear();  // where results land does not change what was run
    std::ostringstream ss;
    ss << std::hex << fnv1a64(config_to_json(canon));
    return ss.str();
}

ResolvedInputs resolve_inputs(const PipelineConfig& config) {
    ResolvedInputs out;
    if (!config.dataset_dir.empty()) {
        out.dataset = import_dataset_csv(config.dataset_dir);
    } else {
        PlantedSpec spec = config.planted;
        if (spec.seed == 0) spec.seed = derive_seed(config.master_seed, "planted");
        PlantedDataset planted = generate_planted(spec);
        out.dataset = std::move(planted.data);
        out.ground_truth = std::move(planted.ground_truth);
    }
    out.arch = config.arch;
    out.arch.input_dim = out.dataset.input_dim();
    out.arch.task_losses = out.dataset.task_losses;
    out.arch.validate();

    SeededRng split_rng(derive_seed(config.master_seed, "split"), 0);
    out.splits = split(out.dataset, config.planted.split_fractions, split_rng);
    return out;
}

MultiTaskModel pipeline_model(const PipelineConfig& config, const ModelArch& arch) {
    SeededRng rng(derive_seed(config.master_seed, "model-init"), 0);
    return init_shared(arch, rng);
}

AffinityMatrix stage_affinity(const PipelineConfig& config, const ResolvedInputs& inputs) {
    MultiTaskModel model = pipeline_model(config, inputs.arch);
    return build_affinity_matrix(model, inputs.dataset, config.sca.n_samples, config.sca.eta,
                                 config.sca.mode, derive_seed(config.master_seed, "affinity"));
}

NodeEmbeddings stage_embed(const PipelineConfig& config, const Mat& normalized,
                           const std::vector<std::string>& names) {
    TaskGraph graph = graph_from_normalized(normalized, names);
    GatConfig gat = config.grouping.gat;
    gat.seed = derive_seed(config.master_seed, "grouping-run", 0);
    return train_gat(graph, gat);
}

GroupingResult stage_group(const PipelineConfig& config, const AffinityMatrix& A) {
    return select_grouping(A, config.grouping, config.master_seed);
}

GroupPerformanceReport stage_train(const PipelineConfig& config, const ResolvedInputs& inputs,
                                   const std::vector<std::vector<int>>& groupings) {
    TrainConfig cfg = config.harness;
    cfg.seed = derive_seed(config.master_seed, "harness");
    return evaluate_groupings(groupings, inputs.splits, inputs.arch, cfg);
}

void write_affinity_csv(const AffinityMatrix& A, const std::string& out_dir) {
    write_matrix_csv(out_dir + "/affinity_raw.csv", A.raw, A.task_names, A.task_names);
    write_matrix_csv(out_dir + "/affinity_normalized.csv", A.normalized, A.task_names,
                     A.task_names);
}

void write_embeddings_csv(const NodeEmbeddings& emb, const std::vector<std::string>& names,
                          const std::string& path) {
    std::vector<std::string> cols;
    for (int j = 0; j < emb.Z.cols; ++j) cols.push_back("z" + std::to_string(j));
    write_matrix_csv(path, emb.Z, cols, names);
}

namespace {

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

void write_grouping_json(const GroupingResult& res, const std::vector<std::string>& names,
                         const std::string& hash, const std::string& path) {
    json j;
    j["config_hash"] = hash;
    j["seed"] = res.seed;
    j["run_index"] = res.run_index;
    j["mean_silhouette"] = res.mean_silhouette;
    j["silhouettes"] = res.silhouettes;
    j["hard_labels"] = res.hard_labels;
    j["responsibilities"] = matrix_to_json(res.resp);
    json clusters = json::array();
    for (const auto& c : res.clusters) {
        json names_arr = json::array();
        for (int t : c) names_arr.push_back(names[t]);
        clusters.push_back(names_arr);
    }
    j["clusters"] = clusters;
    j["gat_final_loss"] = res.embeddings.final_loss;
    j["gat_initial_loss"] = res.embeddings.initial_loss;
    write_text_file(path, j.dump(2) + "\n");
}

void write_performance_json(const GroupPerformanceReport& rep,
                            const std::vector<std::string>& names, const std::string& hash,
                            const std::string& path) {
    json j;
    j["config_hash"] = hash;
    j["collective"] = rep.collective;
    j["wall_clock_s"] = rep.wall_clock_s;
    json tasks = json::array();
    for (const TaskOutcome& t : rep.tasks) {
        tasks.push_back({{"name", t.name},
                         {"val_metric", t.val_metric},
                         {"test_metric", t.test_metric},
                         {"group", t.chosen_group}});
    }
    j["tasks"] = tasks;
    json groups = json::array();
    for (const auto& g : rep.groupings) {
        json arr = json::array();
        for (int t : g) arr.push_back(names[t]);
        groups.push_back(arr);
    }
    j["groupings"] = groups;
    write_text_file(path, j.dump(2) + "\n");
}

namespace {

void write_loss_curves_tsv(const GroupPerformanceReport& rep, const std::string& path) {
    std::ostringstream out;
    out << "group\tepoch\tloss\n";
    for (size_t g = 0; g < rep.loss_curves.size(); ++g) {
        for (size_t e = 0; e < rep.loss_curves[g].size(); ++e) {
            out << g << '\t' << e << '\t' << format_double(rep.loss_curves[g][e]) << '\n';
        }
    }
    write_text_file(path, out.str());
}

}  // namespace

int run_pipeline(const PipelineConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    std::string hash = config_hash(config);
    write_text_file(config.out_dir + "/config.json", config_to_json(config));

    json summary;
    summary["config_hash"] = hash;
    summary["stages"] = json::object();
    auto record_stage = [&](const std::string& name, double seconds, bool ok,
                            const std::string& error = "") {
        json s;
        s["ok"] = ok;
        s["wall_clock_s"] = seconds;
        if (!error.empty()) s["error"] = error;
        summary["stages"][name] = s;
    };
    auto finish = [&](int code) {
        summary["ok"] = (code == 0);
        write_text_file(config.out_dir + "/summary.json", summary.dump(2) + "\n");
        return code;
    };

    using clock = std::chrono::steady_clock;
    auto elapsed = [](clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    ResolvedInputs inputs;
    {
        auto t0 = clock::now();
        try {
            inputs = resolve_inputs(config);
            export_dataset_csv(inputs.dataset, config.out_dir + "/dataset");
            record_stage("data", elapsed(t0), true);
        } catch (const std::exception& e) {
            record_stage("data", elapsed(t0), false, e.what());
            return finish(2);
        }
    }

    AffinityMatrix A;
    {
        auto t0 = clock::now();
        try {
            A = stage_affinity(config, inputs);
            write_affinity_csv(A, config.out_dir);
            record_stage("affinity", elapsed(t0), true);
        } catch (const std::exception& e) {
            record_stage("affinity", elapsed(t0), false, e.what());
            return finish(2);
        }
    }

    GroupingResult grouping;
    {
        auto t0 = clock::now();
        try {
            grouping = stage_group(config, A);
            write_embeddings_csv(grouping.embeddings, A.task_names,
                                 config.out_dir + "/embeddings.csv");
            write_grouping_json(grouping, A.task_names, hash, config.out_dir + "/grouping.json");
            record_stage("grouping", elapsed(t0), true);
        } catch (const std::exception& e) {
            record_stage("grouping", elapsed(t0), false, e.what());
            return finish(2);
        }
    }

    {
        auto t0 = clock::now();
        try {
            GroupPerformanceReport rep = stage_train(config, inputs, grouping.clusters);
            write_performance_json(rep, A.task_names, hash, config.out_dir + "/performance.json");
            write_loss_curves_tsv(rep, config.out_dir + "/loss_curves.tsv");
            summary["collective"] = rep.collective;
            record_stage("train", elapsed(t0), true);
        } catch (const std::exception& e) {
            record_stage("train", elapsed(t0), false, e.what());
            return finish(2);
        }
    }

    int T = inputs.dataset.task_count();
    if (config.baselines.random) {
        auto t0 = clock::now();
        try {
            SeededRng rng(derive_seed(config.master_seed, "random-baseline"), 0);
            auto groups = random_groupings(T, config.grouping.budget, rng);
            GroupPerformanceReport rep = stage_train(config, inputs, groups);
            write_performance_json(rep, A.task_names, hash,
                                   config.out_dir + "/performance_random.json");
            summary["collective_random"] = rep.collective;
            record_stage("random-baseline", elapsed(t0), true);
        } catch (const std::exception& e) {
            record_stage("random-baseline", elapsed(t0), false, e.what());
            return finish(2);
        }
    }
    if (config.baselines.oracle) {
        auto t0 = clock::now();
        try {
            TrainConfig cfg = config.harness;
            cfg.seed = derive_seed(config.master_seed, "harness");
            OracleResult oracle =
                exhaustive_oracle(T, config.grouping.budget, inputs.splits, inputs.arch, cfg);
            json j;
            j["config_hash"] = hash;
            j["best_collective"] = oracle.best_collective;
            json best = json::array();
            for (const auto& g : oracle.best_partition) {
                json arr = json::array();
                for (int t : g) arr.push_back(A.task_names[t]);
                best.push_back(arr);
            }
            j["best_partition"] = best;
            json table = json::array();
            for (const auto& [partition, score] : oracle.table) {
                json row;
                json parts = json::array();
                for (const auto& g : partition) {
                    json arr = json::array();
                    for (int t : g) arr.push_back(A.task_names[t]);
                    parts.push_back(arr);
                }
                row["partition"] = parts;
                row["collective"] = score;
                table.push_back(row);
            }
            j["table"] = table;
            write_text_file(config.out_dir + "/oracle.json", j.dump(2) + "\n");
            summary["collective_oracle"] = oracle.best_collective;
            record_stage("oracle", elapsed(t0), true);
        } catch (const std::exception& e) {
            record_stage("oracle", elapsed(t0), false, e.what());
            return finish(2);
        }
    }

    return finish(0);
}

int write_report(const PipelineConfig& config) {
    const std::string& dir = config.out_dir;
    json summary;
    summary["config_hash"] = config_hash(config);

    std::ostringstream tsv;
    tsv << "section\tkey\tindex\tvalue\n";

    NamedMatrix norm = read_matrix_csv(dir + "/affinity_normalized.csv");
    for (int i = 0; i < norm.values.rows; ++i) {
        for (int j = 0; j < norm.values.cols; ++j) {
            tsv << "affinity\t" << norm.row_names[i] << ':' << norm.col_names[j] << "\t0\t"
                << format_double(norm.values(i, j)) << '\n';
        }
    }

    json grouping = json::parse(read_text_file(dir + "/grouping.json"));
    summary["grouping"] = grouping;
    for (size_t i = 0; i < grouping["silhouettes"].size(); ++i) {
        tsv << "silhouette\t" << norm.row_names[i] << "\t0\t"
            << format_double(grouping["silhouettes"][i].get<double>()) << '\n';
    }

    if (std::filesystem::exists(dir + "/performance.json")) {
        json perf = json::parse(read_text_file(dir + "/performance.json"));
        summary["performance"] = perf;
    }
    if (std::filesystem::exists(dir + "/performance_random.json")) {
        summary["performance_random"] =
            json::parse(read_text_file(dir + "/performance_random.json"));
    }
    if (std::filesystem::exists(dir + "/oracle.json")) {
        summary["oracle"] = json::parse(read_text_file(dir + "/oracle.json"));
    }
    if (std::filesystem::exists(dir + "/loss_curves.tsv")) {
        std::istringstream in(read_text_file(dir + "/loss_curves.tsv"));
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string group, epoch, loss;
            std::getline(ls, group, '\t');
            std::getline(ls, epoch, '\t');
            std::getline(ls, loss, '\t');
            tsv << "loss_curve\tgroup" << group << '\t' << epoch << '\t' << loss << '\n';
        }
    }

    write_text_file(dir + "/report.json", summary.dump(2) + "\n");
    write_text_file(dir + "/plot_data.tsv", tsv.str());
    return 0;
}

}  // namespace taskaff
