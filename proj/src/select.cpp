#include "fasm/select.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace fasm {

FairnessProfile fairness_profile(const RiskScores& scores, const SurvivalDataset& dataset,
                                 const TimeGrid& grid) {
    if (dataset.group_levels.size() < 2)
        throw MetricUndefinedError("fairness_profile: need >= 2 groups");
    const StepFunction G = censoring_km(dataset);
    const StepFunction S = kaplan_meier(dataset);
    const Disparities d = disparities(dataset, scores, G, S, grid);

    FairnessProfile p;
    p.metric_names = kCanonicalMetricOrder;
    p.metrics = {d.delta_ci, d.delta_iauc, d.delta_xci, d.i_delta_xauc};
    p.window = grid;
    return p;
}

FairnessProfile fairness_profile(const CoxModel& model, const SurvivalDataset& dataset,
                                 const TimeGrid& grid) {
    return fairness_profile(predict_risk_all(model, dataset), dataset, grid);
}

double msi_value(const std::vector<double>& metrics) {
    if (metrics.size() < 2) throw ConfigError("msi requires at least 2 metrics");
    double sum = 0.0;
    for (std::size_t j = 0; j < metrics.size(); ++j) {
        if (metrics[j] < 0.0)
            throw ConfigError("msi: fairness metrics must be nonnegative");
        sum += metrics[j] * metrics[(j + 1) % metrics.size()];
    }
    if (sum == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / sum;
}

MSIResult msi(const FairnessProfile& profile) {
    MSIResult r;
    r.profile = profile;
    r.msi = msi_value(profile.metrics);
    r.infinite = std::isinf(r.msi);
    return r;
}

namespace {

// Higher MSI wins; infinities rank above all finite values. Ties: higher
// validation performance, then lower draw index.
bool better(const Candidate& a, const Candidate& b) {
    if (a.profiled != b.profiled) return a.profiled;
    if (a.msi_result.msi != b.msi_result.msi) return a.msi_result.msi > b.msi_result.msi;
    if (a.performance != b.performance) return a.performance > b.performance;
    return a.draw_index < b.draw_index;
}

}  // namespace

SelectionResult select_fasm(const RashomonSet& set, const SurvivalDataset& dataset,
                            const TimeGrid& grid, int threads) {
    if (set.cases.empty()) throw SelectionError("select_fasm: empty Rashomon set");

    std::vector<Candidate> cands;
    std::vector<std::size_t> case_of;  // candidate -> index into set.cases
    for (std::size_t ci = 0; ci < set.cases.size(); ++ci) {
        const auto& cs = set.cases[ci];
        Candidate opt;
        opt.beta = cs.optimum.model.beta;
        opt.roster = cs.optimum.roster;
        opt.case_mask = cs.optimum.mask;
        opt.performance = cs.optimum_performance;
        opt.draw_index = -1;
        cands.push_back(std::move(opt));
        case_of.push_back(ci);
        for (const auto& s : cs.accepted) {
            Candidate c;
            c.beta = s.beta;
            c.roster = cs.optimum.roster;
            c.case_mask = s.case_mask;
            c.performance = s.performance;
            c.draw_index = s.draw_index;
            cands.push_back(std::move(c));
            case_of.push_back(ci);
        }
    }

    auto profile_one = [&](Candidate& c) {
        try {
            RiskScores scores;
            scores.reserve(dataset.size());
            std::vector<int> cols;
            for (const auto& name : c.roster) {
                const int idx = dataset.variable_index(name);
                if (idx < 0) throw SchemaError("dataset lacks covariate '" + name + "'");
                cols.push_back(idx);
            }
            for (const auto& s : dataset.subjects) {
                double lp = 0.0;
                for (std::size_t k = 0; k < cols.size(); ++k)
                    lp += c.beta(static_cast<Eigen::Index>(k)) *
                          s.covariates[static_cast<std::size_t>(cols[k])];
                scores.push_back(lp);
            }
            c.msi_result = msi(fairness_profile(scores, dataset, grid));
            c.profiled = true;
        } catch (const Error& e) {
            c.profile_error = e.what();
        }
    };

    if (threads <= 1) {
        for (auto& c : cands) profile_one(c);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < cands.size();
                     i += static_cast<std::size_t>(threads))
                    profile_one(cands[i]);
            });
        for (auto& th : pool) th.join();
    }

    if (std::none_of(cands.begin(), cands.end(),
                     [](const Candidate& c) { return c.profiled; }))
        throw SelectionError("select_fasm: every candidate failed profiling");

    std::stable_sort(cands.begin(), cands.end(), better);

    SelectionResult out;
    out.best = cands.front();
    out.ranked = std::move(cands);

    // Rebuild the winning model with its case's baseline (inherited, never
    // refit for sampled members).
    for (const auto& cs : set.cases) {
        if (cs.optimum.mask != out.best.case_mask) continue;
        out.model.beta = out.best.beta;
        out.model.variable_names = out.best.roster;
        out.model.ties = cs.optimum.model.ties;
        out.model.baseline_cumhaz = cs.optimum.model.baseline_cumhaz;
        break;
    }
    return out;
}

}  // namespace fasm
