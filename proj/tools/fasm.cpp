#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <iostream>
#include <sstream>

#include "fasm/pipeline.hpp"

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// "name:value,name:value" -> ordered pairs
std::vector<std::pair<std::string, double>> parse_named_reals(const std::string& s) {
    std::vector<std::pair<std::string, double>> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto pos = item.rfind(':');
        if (pos == std::string::npos)
            throw fasm::ConfigError("expected name:value, got '" + item + "'");
        out.emplace_back(item.substr(0, pos), std::stod(item.substr(pos + 1)));
    }
    return out;
}

std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

// "first:last:step" -> grid points first, first+step, ..., last; the window
// opens one step before the first point (clamped at 0).
fasm::TimeGrid parse_grid(const std::string& s) {
    double a, b, c;
    char c1, c2;
    std::stringstream ss(s);
    if (!(ss >> a >> c1 >> b >> c2 >> c) || c1 != ':' || c2 != ':')
        throw fasm::ConfigError("grid must be first:last:step, got '" + s + "'");
    if (c <= 0.0) throw fasm::ConfigError("grid step must be positive");
    fasm::TimeGrid g;
    g.t_start = std::max(0.0, a - c);
    g.t_end = b;
    for (int k = 0;; ++k) {
        const double t = a + c * k;
        if (t > b + 1e-12) break;
        g.points.push_back(std::min(t, b));
    }
    g.validate();
    return g;
}

struct SchemaFlags {
    std::string time = "time";
    std::string event = "event";
    std::string group = "group";
    std::string covariates;

    fasm::ColumnSchema schema() const {
        fasm::ColumnSchema sc;
        sc.time_column = time;
        sc.event_column = event;
        sc.group_column = group;
        sc.covariate_columns = parse_list(covariates);
        return sc;
    }
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& f) {
    cmd->add_option("--time", f.time, "time column name");
    cmd->add_option("--event", f.event, "event column name");
    cmd->add_option("--group", f.group, "group column name");
    cmd->add_option("--covariates", f.covariates, "comma-separated covariate columns")
        ->required();
}

int cmd_simulate(const std::string& out, std::size_t n, std::uint64_t seed,
                 const std::string& groups, const std::string& beta, double shape,
                 double scale, const std::string& censor, double horizon) {
    fasm::SimSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.group_proportions = parse_named_reals(groups);
    spec.true_beta = parse_named_reals(beta);
    spec.baseline_shape = shape;
    spec.baseline_scale = scale;
    for (const auto& [g, r] : parse_named_reals(censor)) spec.censor_rate[g] = r;
    spec.horizon = horizon;

    const fasm::SurvivalDataset ds = fasm::simulate_cohort(spec);
    fasm::write_csv(ds, out);

    // Truth sidecar for oracle checks downstream.
    ordered_json truth;
    ordered_json tb = ordered_json::object();
    for (const auto& [k, v] : spec.true_beta) tb[k] = v;
    truth["true_beta"] = tb;
    truth["baseline_shape"] = spec.baseline_shape;
    truth["baseline_scale"] = spec.baseline_scale;
    ordered_json cr = ordered_json::object();
    for (const auto& [k, v] : spec.censor_rate) cr[k] = v;
    truth["censor_rate"] = cr;
    truth["horizon"] = spec.horizon;
    truth["seed"] = spec.seed;
    truth["n"] = spec.n;
    std::ofstream tf(out + ".truth.json");
    if (!tf) throw fasm::IoError("cannot write " + out + ".truth.json");
    tf << truth.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fairness-aware survival modeling toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort CSV");
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 0;
    std::string sim_out, sim_groups = "A:0.5,B:0.5";
    std::string sim_beta = "x1:0.8,x2:-0.5";
    std::string sim_censor;
    double sim_shape = 1.5, sim_scale = 60.0,
           sim_horizon = std::numeric_limits<double>::infinity();
    sim->add_option("--n", sim_n, "cohort size");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--out", sim_out, "output CSV path")->required();
    sim->add_option("--groups", sim_groups, "group:proportion list");
    sim->add_option("--beta", sim_beta, "true coefficients, name:value list");
    sim->add_option("--shape", sim_shape, "Weibull baseline shape");
    sim->add_option("--scale", sim_scale, "Weibull baseline scale");
    sim->add_option("--censor", sim_censor, "group:rate exponential censoring");
    sim->add_option("--horizon", sim_horizon, "administrative censoring time");

    // summarize
    auto* summ = app.add_subcommand("summarize", "descriptive cohort summary");
    std::string summ_data;
    SchemaFlags summ_schema;
    summ->add_option("--data", summ_data, "cohort CSV")->required();
    add_schema_flags(summ, summ_schema);

    // fit
    auto* fitc = app.add_subcommand("fit", "fit a Cox model");
    std::string fit_data, fit_roster, fit_out, fit_ties = "efron";
    SchemaFlags fit_schema;
    fitc->add_option("--data", fit_data, "cohort CSV")->required();
    add_schema_flags(fitc, fit_schema);
    fitc->add_option("--roster", fit_roster, "variables to fit (default: all)");
    fitc->add_option("--ties", fit_ties, "efron|breslow");
    fitc->add_option("--out", fit_out, "model JSON path");

    // rashomon
    auto* rash = app.add_subcommand("rashomon", "build the integral Rashomon set");
    std::string rash_config, rash_out;
    rash->add_option("--config", rash_config, "pipeline config JSON")->required();
    rash->add_option("--out", rash_out, "output directory (overrides config)");

    // select
    auto* selc = app.add_subcommand("select", "build the set and select the FASM model");
    std::string sel_config, sel_out;
    selc->add_option("--config", sel_config, "pipeline config JSON")->required();
    selc->add_option("--out", sel_out, "output directory (overrides config)");

    // evaluate
    auto* evalc = app.add_subcommand("evaluate", "audit a serialized model on a dataset");
    std::string eval_model, eval_data, eval_grid = "1:120:1", eval_out;
    SchemaFlags eval_schema;
    evalc->add_option("--model", eval_model, "model JSON")->required();
    evalc->add_option("--data", eval_data, "cohort CSV")->required();
    add_schema_flags(evalc, eval_schema);
    evalc->add_option("--grid", eval_grid, "start:end:step");
    evalc->add_option("--out", eval_out, "output directory")->required();

    // run
    auto* runc = app.add_subcommand("run", "full pipeline from a config file");
    std::string run_config, run_out;
    int run_threads = 0;
    runc->add_option("--config", run_config, "pipeline config JSON")->required();
    runc->add_option("--out", run_out, "output directory (overrides config)");
    runc->add_option("--threads", run_threads, "worker cap (overrides config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*sim)
            return cmd_simulate(sim_out, sim_n, sim_seed, sim_groups, sim_beta, sim_shape,
                                sim_scale, sim_censor, sim_horizon);

        if (*summ) {
            const auto ds = fasm::load_csv(summ_data, summ_schema.schema());
            const auto s = fasm::summarize(ds);
            ordered_json j;
            auto block = [](const fasm::GroupSummary& g) {
                ordered_json b;
                b["count"] = g.count;
                b["percent"] = g.percent;
                b["mean_survival_time"] = g.mean_survival_time;
                b["event_rate"] = g.event_rate;
                ordered_json vars = ordered_json::object();
                for (const auto& v : g.variables) {
                    if (v.indicator)
                        vars[v.name] = {{"n", v.count_positive},
                                        {"percent", 100.0 * v.mean}};
                    else
                        vars[v.name] = {{"mean", v.mean},     {"sd", v.sd},
                                        {"median", v.median}, {"q1", v.q1},
                                        {"q3", v.q3}};
                }
                b["variables"] = vars;
                return b;
            };
            j["overall"] = block(s.overall);
            ordered_json groups = ordered_json::object();
            for (const auto& g : s.per_group) groups[g.group] = block(g);
            j["by_group"] = groups;
            std::cout << j.dump(2) << '\n';
            return 0;
        }

        if (*fitc) {
            const auto ds = fasm::load_csv(fit_data, fit_schema.schema());
            const auto roster =
                fit_roster.empty() ? ds.variable_names : parse_list(fit_roster);
            const auto res =
                fasm::fit(ds, roster, {}, fasm::ties_from_string(fit_ties));
            const std::string text = fasm::model_to_json(res.model);
            if (fit_out.empty()) {
                std::cout << text << '\n';
            } else {
                std::ofstream out(fit_out);
                if (!out) throw fasm::IoError("cannot write " + fit_out);
                out << text << '\n';
            }
            std::cerr << "log-likelihood " << res.summary.log_partial_likelihood_at_optimum
                      << " (null " << res.summary.log_partial_likelihood_null << "), "
                      << res.summary.iterations << " iterations\n";
            return 0;
        }

        if (*rash || *selc) {
            auto config = fasm::config_from_json_file(*rash ? rash_config : sel_config);
            const std::string override_out = *rash ? rash_out : sel_out;
            if (!override_out.empty()) config.output_dir = override_out;
            fs::create_directories(config.output_dir);

            const auto full = fasm::load_csv(config.dataset_path, config.schema);
            auto split = fasm::stratified_split(full, config.split);
            fasm::VariablePartition partition;
            partition.sensitive = config.sensitive;
            for (const auto& v : full.variable_names)
                if (std::find(config.sensitive.begin(), config.sensitive.end(), v) ==
                    config.sensitive.end())
                    partition.nonsensitive.push_back(v);
            fasm::RashomonConfig rc = config.rashomon;
            rc.threads = config.threads;
            const auto set =
                fasm::build_integral_set(split.train, split.val, partition, rc,
                                         fasm::default_measure(), config.ties, config.fit);
            fasm::write_rashomon_jsonl(set, config.output_dir + "/rashomon.jsonl");
            if (*selc) {
                const auto grid = fasm::TimeGrid::regular(config.t_start, config.t_end,
                                                          config.grid_step);
                const auto sel =
                    fasm::select_fasm(set, split.val, grid, config.threads);
                std::ofstream out(config.output_dir + "/fasm_model.json");
                if (!out)
                    throw fasm::IoError("cannot write " + config.output_dir +
                                        "/fasm_model.json");
                out << fasm::model_to_json(sel.model) << '\n';
            }
            return 0;
        }

        if (*evalc) {
            const auto model = [&] {
                std::ifstream in(eval_model);
                if (!in) throw fasm::IoError("cannot open " + eval_model);
                std::stringstream buf;
                buf << in.rdbuf();
                return fasm::model_from_json(buf.str());
            }();
            auto ds = fasm::load_csv(eval_data, eval_schema.schema());
            // Canonical subject order, so reports do not depend on row order.
            std::stable_sort(ds.subjects.begin(), ds.subjects.end(),
                             [](const fasm::Subject& a, const fasm::Subject& b) {
                                 if (a.time != b.time) return a.time < b.time;
                                 if (a.event != b.event) return a.event < b.event;
                                 if (a.group != b.group) return a.group < b.group;
                                 return a.covariates < b.covariates;
                             });
            std::sort(ds.group_levels.begin(), ds.group_levels.end());
            for (const auto& name : model.variable_names)
                if (ds.variable_index(name) < 0)
                    throw fasm::SchemaError("dataset lacks model covariate '" + name + "'");
            const auto grid = parse_grid(eval_grid);
            fs::create_directories(eval_out);
            const auto ev = fasm::evaluate_model(model, ds, grid, "model");
            fasm::write_report_json({ev}, grid, eval_out + "/report.json");
            fasm::write_curves_csv({ev}, {model}, ds, grid, eval_out + "/curves.csv");
            return 0;
        }

        if (*runc) {
            auto config = fasm::config_from_json_file(run_config);
            if (!run_out.empty()) config.output_dir = run_out;
            if (run_threads > 0) config.threads = run_threads;
            fasm::run_pipeline(config);
            return 0;
        }
    } catch (const fasm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const fasm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const fasm::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const fasm::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
