#include "fasm/rashomon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "fasm/rng.hpp"

namespace fasm {

void VariablePartition::validate(const SurvivalDataset& dataset) const {
    for (const auto& v : nonsensitive)
        if (dataset.variable_index(v) < 0)
            throw SchemaError("nonsensitive variable '" + v + "' not in dataset");
    for (const auto& v : sensitive) {
        if (dataset.variable_index(v) < 0)
            throw SchemaError("sensitive variable '" + v + "' not in dataset");
        if (std::find(nonsensitive.begin(), nonsensitive.end(), v) != nonsensitive.end())
            throw ConfigError("variable '" + v + "' listed as both sensitive and nonsensitive");
    }
    if (sensitive.size() > 10)
        throw ConfigError("more than 10 sensitive variables; 2^|S| case fits intractable");
}

void RashomonConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    if (!(epsilon0 > 0.0 && epsilon0 < epsilon))
        throw ConfigError("epsilon0 must lie in (0, epsilon)");
    if (!(u1 > 0.0 && u1 < u2)) throw ConfigError("require 0 < u1 < u2");
    if (n_target <= 0 || max_draws < n_target)
        throw ConfigError("require 0 < n_target <= max_draws");
    if (threads <= 0) throw ConfigError("threads must be positive");
}

double performance_r2pl(const SurvivalDataset& dataset,
                        const std::vector<std::string>& roster,
                        const Eigen::VectorXd& beta, TiesMethod ties) {
    const double ll = log_partial_likelihood(dataset, roster, beta, ties).value;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(beta.size());
    const double ll0 = log_partial_likelihood(dataset, roster, zero, ties).value;
    const double n = static_cast<double>(dataset.size());
    return 1.0 - std::exp(-2.0 * (ll - ll0) / n);
}

PerformanceMeasure default_measure() {
    return {"r2_pseudo_likelihood_ratio", &performance_r2pl};
}

std::vector<std::string> case_roster(const VariablePartition& partition,
                                     std::uint32_t mask) {
    std::vector<std::string> roster = partition.nonsensitive;
    for (std::size_t b = 0; b < partition.sensitive.size(); ++b)
        if (mask & (1u << b)) roster.push_back(partition.sensitive[b]);
    return roster;
}

std::vector<std::string> sensitive_names(const VariablePartition& partition,
                                         std::uint32_t mask) {
    std::vector<std::string> out;
    for (std::size_t b = 0; b < partition.sensitive.size(); ++b)
        if (mask & (1u << b)) out.push_back(partition.sensitive[b]);
    return out;
}

std::vector<CaseFit> case_optima(const SurvivalDataset& train,
                                 const VariablePartition& partition, TiesMethod ties,
                                 const FitConfig& fit_config) {
    partition.validate(train);
    const std::uint32_t n_cases = 1u << partition.sensitive.size();
    std::vector<CaseFit> out;
    for (std::uint32_t mask = 0; mask < n_cases; ++mask) {
        CaseFit cf;
        cf.mask = mask;
        cf.roster = case_roster(partition, mask);
        try {
            auto res = fit(train, cf.roster, fit_config, ties);
            cf.model = std::move(res.model);
            cf.summary = std::move(res.summary);
            cf.fit_ok = true;
        } catch (const NumericError& e) {
            cf.fit_error = e.what();
        }
        out.push_back(std::move(cf));
    }
    return out;
}

namespace {

// Symmetric square root of a (numerically) PSD matrix; negative eigenvalues
// clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw ConditioningError("eigendecomposition of covariance failed");
    const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

CaseSet sample_case(const CaseFit& optimum, const SurvivalDataset& validation,
                    const RashomonConfig& config, const PerformanceMeasure& measure,
                    std::uint64_t case_seed) {
    config.validate();
    if (!optimum.fit_ok) throw ConfigError("sample_case: case optimum did not fit");
    if (validation.subjects.empty() || validation.n_events() == 0)
        throw DataError("sample_case: validation set needs events");

    CaseSet out;
    out.optimum = optimum;
    out.optimum_performance = measure.score(validation, optimum.roster,
                                            optimum.model.beta, optimum.model.ties);
    const double threshold = (1.0 - config.epsilon0) * out.optimum_performance;
    const Eigen::MatrixXd root = psd_sqrt(optimum.summary.covariance);
    const auto p = optimum.model.beta.size();

    // Draw d is a pure function of (case_seed, d); acceptance is checked in
    // parallel blocks and winners taken in draw order, so the result does not
    // depend on the worker count.
    auto run_draw = [&](int d, SampledModel& slot) {
        auto eng = stream(case_seed, static_cast<std::uint64_t>(d));
        std::uniform_real_distribution<double> unif(config.u1, config.u2);
        const double k = unif(eng);
        Eigen::VectorXd z(p);
        for (Eigen::Index c = 0; c < p; ++c) {
            std::normal_distribution<double> norm(0.0, 1.0);
            z(c) = norm(eng);
        }
        slot.beta = optimum.model.beta + std::sqrt(k) * (root * z);
        slot.case_mask = optimum.mask;
        slot.draw_index = d;
        slot.performance =
            measure.score(validation, optimum.roster, slot.beta, optimum.model.ties);
    };

    const int block = std::max(config.n_target, 64 * config.threads);
    std::vector<SampledModel> scratch;
    int next_draw = 0;
    while (next_draw < config.max_draws &&
           static_cast<int>(out.accepted.size()) < config.n_target) {
        const int count = std::min(block, config.max_draws - next_draw);
        scratch.assign(static_cast<std::size_t>(count), SampledModel{});
        if (config.threads == 1) {
            for (int d = 0; d < count; ++d) run_draw(next_draw + d, scratch[static_cast<std::size_t>(d)]);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < config.threads; ++w)
                pool.emplace_back([&, w] {
                    for (int d = w; d < count; d += config.threads)
                        run_draw(next_draw + d, scratch[static_cast<std::size_t>(d)]);
                });
            for (auto& th : pool) th.join();
        }
        for (int d = 0; d < count &&
                        static_cast<int>(out.accepted.size()) < config.n_target;
             ++d) {
            out.draws_used = next_draw + d + 1;
            if (scratch[static_cast<std::size_t>(d)].performance >= threshold)
                out.accepted.push_back(scratch[static_cast<std::size_t>(d)]);
        }
        next_draw += count;
    }
    out.acceptance_rate = out.draws_used
                              ? static_cast<double>(out.accepted.size()) /
                                    static_cast<double>(out.draws_used)
                              : 0.0;
    if (out.accepted.empty())
        throw SamplingExhaustedError("no acceptances after " +
                                     std::to_string(out.draws_used) + " draws");
    return out;
}

std::size_t RashomonSet::total_models() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += 1 + c.accepted.size();  // optimum + samples
    return n;
}

RashomonSet build_integral_set(const SurvivalDataset& train,
                               const SurvivalDataset& validation,
                               const VariablePartition& partition,
                               const RashomonConfig& config,
                               const PerformanceMeasure& measure, TiesMethod ties,
                               const FitConfig& fit_config) {
    config.validate();
    RashomonSet set;
    set.partition = partition;
    set.config = config;
    set.measure_name = measure.name;

    auto fits = case_optima(train, partition, ties, fit_config);
    const std::uint32_t full_mask = (1u << partition.sensitive.size()) - 1u;
    for (auto& cf : fits)
        if (cf.mask == full_mask) set.full_model = cf;
    if (!set.full_model.fit_ok)
        throw NumericError("full-model fit failed: " + set.full_model.fit_error);
    set.full_model_performance =
        measure.score(validation, set.full_model.roster, set.full_model.model.beta, ties);

    const double gate_margin = config.gate_with_epsilon0 ? config.epsilon0 : config.epsilon;
    const double gate = (1.0 - gate_margin) * set.full_model_performance;
    for (auto& cf : fits) {
        if (!cf.fit_ok) {
            set.excluded.push_back(cf);
            continue;
        }
        const double perf = measure.score(validation, cf.roster, cf.model.beta, ties);
        if (perf < gate) {
            set.excluded.push_back(cf);
            continue;
        }
        const std::uint64_t case_seed = splitmix64(config.seed ^ (0xc45e5eedULL + cf.mask));
        set.cases.push_back(sample_case(cf, validation, config, measure, case_seed));
    }
    return set;
}

void write_rashomon_jsonl(const RashomonSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);

    nlohmann::ordered_json header;
    header["record"] = "header";
    header["measure"] = set.measure_name;
    header["config"] = {{"epsilon", set.config.epsilon},
                        {"epsilon0", set.config.epsilon0},
                        {"u1", set.config.u1},
                        {"u2", set.config.u2},
                        {"n_target", set.config.n_target},
                        {"max_draws", set.config.max_draws},
                        {"seed", set.config.seed}};
    header["sensitive"] = set.partition.sensitive;
    header["full_model_performance"] = set.full_model_performance;
    nlohmann::ordered_json refs = nlohmann::ordered_json::array();
    for (const auto& c : set.cases)
        refs.push_back({{"case", sensitive_names(set.partition, c.optimum.mask)},
                        {"performance", c.optimum_performance},
                        {"acceptance_rate", c.acceptance_rate}});
    header["cases"] = refs;
    out << header.dump() << '\n';

    for (const auto& c : set.cases) {
        auto emit = [&](const Eigen::VectorXd& beta, double perf, int draw) {
            nlohmann::ordered_json rec;
            rec["case"] = sensitive_names(set.partition, c.optimum.mask);
            nlohmann::ordered_json b;
            for (std::size_t i = 0; i < c.optimum.roster.size(); ++i)
                b[c.optimum.roster[i]] = beta(static_cast<Eigen::Index>(i));
            rec["beta"] = b;
            rec["performance"] = perf;
            rec["draw"] = draw;
            out << rec.dump() << '\n';
        };
        emit(c.optimum.model.beta, c.optimum_performance, -1);
        for (const auto& s : c.accepted) emit(s.beta, s.performance, s.draw_index);
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fasm
