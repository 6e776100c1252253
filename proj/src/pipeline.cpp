#include "fasm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace fasm {

void PipelineConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("dataset path is required");
    if (schema.time_column.empty() || schema.event_column.empty() ||
        schema.group_column.empty())
        throw ConfigError("schema must name time, event and group columns");
    if (sensitive.empty()) throw ConfigError("at least one sensitive variable is required");
    split.validate();
    rashomon.validate();
    if (!(t_end > t_start) || grid_step <= 0.0)
        throw ConfigError("evaluation window requires t_start < t_end and a positive step");
    if (bootstrap_enabled && n_boot < 100)
        throw ConfigError("bootstrap requires n_boot >= 100");
    if (output_dir.empty()) throw ConfigError("output directory is required");
    if (threads <= 0) throw ConfigError("threads must be positive");
}

PipelineConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }

    PipelineConfig c;
    try {
        const auto& data = j.at("data");
        c.dataset_path = data.at("path").get<std::string>();
        c.schema.time_column = data.value("time", "time");
        c.schema.event_column = data.value("event", "event");
        c.schema.group_column = data.value("group", "group");
        c.schema.covariate_columns =
            data.at("covariates").get<std::vector<std::string>>();
        c.sensitive = j.at("sensitive").get<std::vector<std::string>>();

        if (j.contains("split")) {
            const auto& s = j["split"];
            c.split.train_fraction = s.value("train", 0.7);
            c.split.val_fraction = s.value("val", 0.1);
            c.split.test_fraction = s.value("test", 0.2);
            c.split.seed = s.value("seed", 0ULL);
        }
        if (j.contains("fit")) {
            const auto& f = j["fit"];
            c.ties = ties_from_string(f.value("ties", "efron"));
            c.fit.max_iterations = f.value("max_iterations", 50);
            c.fit.tolerance = f.value("tolerance", 1e-9);
        }
        if (j.contains("rashomon")) {
            const auto& r = j["rashomon"];
            c.rashomon.epsilon = r.value("epsilon", 0.05);
            c.rashomon.epsilon0 = r.value("epsilon0", 0.02);
            c.rashomon.u1 = r.value("u1", 0.1);
            c.rashomon.u2 = r.value("u2", 2.0);
            c.rashomon.n_target = r.value("n_target", 500);
            c.rashomon.max_draws = r.value("max_draws", 25000);
            c.rashomon.seed = r.value("seed", 0ULL);
            c.rashomon.gate_with_epsilon0 = r.value("gate_with_epsilon0", false);
            c.measure_name = r.value("measure", "r2_pseudo_likelihood_ratio");
        }
        if (j.contains("evaluation")) {
            const auto& e = j["evaluation"];
            c.t_start = e.value("t_start", 0.0);
            c.t_end = e.value("t_end", 120.0);
            c.grid_step = e.value("step", 1.0);
        }
        if (j.contains("bootstrap")) {
            const auto& b = j["bootstrap"];
            c.bootstrap_enabled = b.value("enabled", true);
            c.n_boot = b.value("n_boot", 200);
            c.bootstrap_seed = b.value("seed", 0ULL);
        }
        c.output_dir = j.value("output_dir", "");
        c.threads = j.value("threads", 1);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ModelEvaluation evaluate_model(const CoxModel& model, const SurvivalDataset& dataset,
                               const TimeGrid& grid, const std::string& label,
                               bool with_bootstrap, int n_boot, std::uint64_t seed) {
    ModelEvaluation ev;
    ev.label = label;
    const RiskScores scores = predict_risk_all(model, dataset);
    ev.report = metric_report(dataset, scores, grid);
    if (ev.report.disp.cross_applicable) {
        const std::vector<double> m = {ev.report.disp.delta_ci, ev.report.disp.delta_iauc,
                                       ev.report.disp.delta_xci,
                                       ev.report.disp.i_delta_xauc};
        ev.msi = msi_value(m);
        ev.msi_infinite = std::isinf(ev.msi);
    }
    if (with_bootstrap) {
        ev.report.c_index_ci =
            bootstrap_ci(dataset, model, BootstrapMetric::c_index, grid, n_boot, seed);
        ev.report.i_auc_ci =
            bootstrap_ci(dataset, model, BootstrapMetric::i_auc, grid, n_boot, seed ^ 1);
    }
    return ev;
}

namespace {

ordered_json eval_to_json(const ModelEvaluation& ev) {
    ordered_json m;
    m["model"] = ev.label;
    m["delta_iauc"] = ev.report.disp.delta_iauc;
    m["delta_ci"] = ev.report.disp.delta_ci;
    m["delta_xci"] = ev.report.disp.delta_xci;
    m["i_delta_xauc"] = ev.report.disp.i_delta_xauc;
    m["i_auc"] = ev.report.i_auc_overall;
    if (ev.report.i_auc_ci)
        m["i_auc_ci"] = {ev.report.i_auc_ci->lower, ev.report.i_auc_ci->upper};
    m["c_index"] = ev.report.c_index_overall;
    if (ev.report.c_index_ci)
        m["c_index_ci"] = {ev.report.c_index_ci->lower, ev.report.c_index_ci->upper};
    m["msi"] = ev.msi_infinite ? ordered_json("inf") : ordered_json(ev.msi);

    ordered_json per_group = ordered_json::object();
    for (const auto& [g, v] : ev.report.c_index_by_group) per_group[g]["c_index"] = v;
    for (const auto& [g, v] : ev.report.i_auc_by_group) per_group[g]["i_auc"] = v;
    m["per_group"] = per_group;

    ordered_json xci = ordered_json::array();
    for (const auto& [a, b, v] : ev.report.x_ci_pairs)
        xci.push_back({{"case_group", a}, {"control_group", b}, {"value", v}});
    m["x_ci"] = xci;
    return m;
}

}  // namespace

void write_report_json(const std::vector<ModelEvaluation>& evals, const TimeGrid& grid,
                       const std::string& path) {
    ordered_json j;
    j["metric_order"] = kCanonicalMetricOrder;
    j["window"] = {{"t_start", grid.t_start}, {"t_end", grid.t_end}};
    ordered_json table = ordered_json::array();
    for (const auto& ev : evals) table.push_back(eval_to_json(ev));
    j["models"] = table;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

void write_curves_csv(const std::vector<ModelEvaluation>& evals,
                      const std::vector<CoxModel>& models,
                      const SurvivalDataset& dataset, const TimeGrid& grid,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "model,metric,pair,time,value\n";
    out.precision(17);

    for (const auto& ev : evals) {
        for (const auto& [a, b, series] : ev.report.x_auc_series)
            for (std::size_t k = 0; k < grid.points.size(); ++k)
                if (series[k])
                    out << ev.label << ",x_auc," << a << '|' << b << ','
                        << grid.points[k] << ',' << *series[k] << '\n';
        for (std::size_t k = 0; k < grid.points.size(); ++k)
            if (ev.report.disp.delta_xauc_t[k])
                out << ev.label << ",delta_xauc,," << grid.points[k] << ','
                    << *ev.report.disp.delta_xauc_t[k] << '\n';
    }

    // Predicted-risk quantiles (1 - S(t|x)) by group and event status.
    const double quantiles[3] = {0.25, 0.5, 0.75};
    const char* names[3] = {"risk_q25", "risk_q50", "risk_q75"};
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        for (double t : grid.points) {
            for (const auto& g : dataset.group_levels) {
                for (int ev_flag = 0; ev_flag < 2; ++ev_flag) {
                    std::vector<double> risks;
                    for (const auto& s : dataset.subjects) {
                        if (s.group != g || s.event != (ev_flag == 1)) continue;
                        risks.push_back(1.0 -
                                        predict_survival(models[mi], s, dataset, t));
                    }
                    if (risks.empty()) continue;
                    std::sort(risks.begin(), risks.end());
                    for (int q = 0; q < 3; ++q) {
                        const double h =
                            (static_cast<double>(risks.size()) - 1.0) * quantiles[q];
                        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
                        const std::size_t hi = std::min(lo + 1, risks.size() - 1);
                        const double v =
                            risks[lo] + (h - std::floor(h)) * (risks[hi] - risks[lo]);
                        out << evals[mi].label << ',' << names[q] << ',' << g << '|'
                            << (ev_flag ? "event" : "censored") << ',' << t << ',' << v
                            << '\n';
                    }
                }
            }
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

RunOutputs run_pipeline(const PipelineConfig& config) {
    config.validate();
    fs::create_directories(config.output_dir);
    const std::string out_model = config.output_dir + "/fasm_model.json";
    const std::string out_rash = config.output_dir + "/rashomon.jsonl";
    const std::string out_val = config.output_dir + "/report_val.json";
    const std::string out_test = config.output_dir + "/report_test.json";
    const std::string out_curves = config.output_dir + "/curves.csv";
    const std::string out_manifest = config.output_dir + "/manifest.json";
    const std::string all_outputs[] = {out_model, out_rash, out_val,
                                       out_test, out_curves, out_manifest};

    auto cleanup = [&] {
        for (const auto& p : all_outputs) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    };

    try {
        using clock = std::chrono::steady_clock;
        std::vector<std::pair<std::string, double>> timings;
        auto mark = [&, last = clock::now()](const std::string& stage) mutable {
            const auto now = clock::now();
            timings.emplace_back(
                stage, std::chrono::duration<double>(now - last).count());
            last = now;
        };

        const SurvivalDataset full = load_csv(config.dataset_path, config.schema);
        if (full.group_levels.size() < 2)
            throw MetricUndefinedError(
                "pipeline: cross-group metrics need >= 2 group levels");
        mark("load");

        SplitResult split = stratified_split(full, config.split);
        mark("split");

        VariablePartition partition;
        partition.sensitive = config.sensitive;
        for (const auto& v : full.variable_names)
            if (std::find(config.sensitive.begin(), config.sensitive.end(), v) ==
                config.sensitive.end())
                partition.nonsensitive.push_back(v);

        if (config.measure_name != "r2_pseudo_likelihood_ratio")
            throw ConfigError("unknown performance measure '" + config.measure_name + "'");
        const PerformanceMeasure measure = default_measure();

        RashomonConfig rconfig = config.rashomon;
        rconfig.threads = config.threads;
        RashomonSet set = build_integral_set(split.train, split.val, partition, rconfig,
                                             measure, config.ties, config.fit);
        mark("rashomon");

        const TimeGrid grid =
            TimeGrid::regular(config.t_start, config.t_end, config.grid_step);
        SelectionResult sel = select_fasm(set, split.val, grid, config.threads);
        mark("select");

        // Comparison models: fairness-unaware full optimum and the optimum
        // with all sensitive variables dropped.
        const CoxModel& coxph = set.full_model.model;
        FitResult blind =
            fit(split.train, partition.nonsensitive, config.fit, config.ties);

        std::vector<CoxModel> models = {coxph, blind.model, sel.model};
        const char* labels[] = {"CoxPH", "Under-blindness", "FASM"};

        RunOutputs out;
        out.selection = sel;
        out.output_dir = config.output_dir;
        for (int i = 0; i < 3; ++i) {
            out.test_evaluations.push_back(evaluate_model(
                models[static_cast<std::size_t>(i)], split.test, grid, labels[i],
                config.bootstrap_enabled, config.n_boot,
                config.bootstrap_seed ^ static_cast<std::uint64_t>(i)));
            out.val_evaluations.push_back(
                evaluate_model(models[static_cast<std::size_t>(i)], split.val, grid,
                               labels[i], false));
        }
        mark("evaluate");

        std::ofstream mf(out_model);
        if (!mf) throw IoError("cannot write " + out_model);
        mf << model_to_json(sel.model) << '\n';
        mf.close();
        write_rashomon_jsonl(set, out_rash);
        write_report_json(out.val_evaluations, grid, out_val);
        write_report_json(out.test_evaluations, grid, out_test);
        write_curves_csv(out.test_evaluations, models, split.test, grid, out_curves);
        mark("write");

        ordered_json manifest;
        manifest["toolkit_version"] = "0.1.0";
        manifest["config"] = {
            {"dataset", config.dataset_path},
            {"sensitive", config.sensitive},
            {"split",
             {{"train", config.split.train_fraction},
              {"val", config.split.val_fraction},
              {"test", config.split.test_fraction},
              {"seed", config.split.seed}}},
            {"ties", to_string(config.ties)},
            {"rashomon",
             {{"epsilon", config.rashomon.epsilon},
              {"epsilon0", config.rashomon.epsilon0},
              {"u1", config.rashomon.u1},
              {"u2", config.rashomon.u2},
              {"n_target", config.rashomon.n_target},
              {"max_draws", config.rashomon.max_draws},
              {"seed", config.rashomon.seed},
              {"measure", config.measure_name}}},
            {"evaluation",
             {{"t_start", config.t_start},
              {"t_end", config.t_end},
              {"step", config.grid_step}}},
            {"bootstrap",
             {{"enabled", config.bootstrap_enabled},
              {"n_boot", config.n_boot},
              {"seed", config.bootstrap_seed}}}};
        manifest["selected_model"] = {
            {"case", sensitive_names(partition, sel.best.case_mask)},
            {"draw", sel.best.draw_index},
            {"validation_performance", sel.best.performance},
            {"msi", sel.best.msi_result.infinite
                        ? ordered_json("inf")
                        : ordered_json(sel.best.msi_result.msi)}};
        ordered_json files = ordered_json::object();
        for (const auto& p : {out_model, out_rash, out_val, out_test, out_curves}) {
            std::ostringstream hex;
            hex << std::hex << fnv1a_file(p);
            files[fs::path(p).filename().string()] = hex.str();
        }
        manifest["files"] = files;
        ordered_json tj = ordered_json::object();
        for (const auto& [stage, secs] : timings) tj[stage] = secs;
        manifest["timings_seconds"] = tj;
        std::ofstream mout(out_manifest);
        if (!mout) throw IoError("cannot write " + out_manifest);
        mout << manifest.dump(2) << '\n';
        if (!mout) throw IoError("write failed: " + out_manifest);

        return out;
    } catch (...) {
        cleanup();
        throw;
    }
}

}  // namespace fasm
