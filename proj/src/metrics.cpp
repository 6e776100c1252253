#include "fasm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "fasm/rng.hpp"

namespace fasm {

TimeGrid TimeGrid::regular(double t_start, double t_end, double step) {
    if (step <= 0.0) throw ConfigError("grid step must be positive");
    TimeGrid g;
    g.t_start = t_start;
    g.t_end = t_end;
    for (double t = t_start + step; t <= t_end + 1e-12; t += step) g.points.push_back(t);
    if (!g.points.empty()) g.points.back() = std::min(g.points.back(), t_end);
    g.validate();
    return g;
}

void TimeGrid::validate() const {
    if (points.empty()) throw ConfigError("time grid must be nonempty");
    if (!(t_end > t_start) || t_start < 0.0)
        throw ConfigError("time grid requires 0 <= t_start < t_end");
    double prev = t_start;
    for (double t : points) {
        if (!(t > prev) || t > t_end + 1e-12)
            throw ConfigError("grid points must be strictly increasing within (t_start, t_end]");
        prev = t;
    }
}

namespace {

double concordance_credit(double ri, double rj) {
    if (ri > rj) return 1.0;
    if (ri == rj) return 0.5;
    return 0.0;
}

void check_scores(const SurvivalDataset& dataset, const RiskScores& scores) {
    if (scores.size() != dataset.size())
        throw ConfigError("scores length does not match dataset");
}

}  // namespace

double c_index(const SurvivalDataset& dataset, const RiskScores& scores,
               const StepFunction& G, const std::optional<std::string>& restrict_group) {
    check_scores(dataset, scores);
    double num = 0.0, den = 0.0;
    const std::size_t n = dataset.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& si = dataset.subjects[i];
        if (!si.event) continue;
        if (restrict_group && si.group != *restrict_group) continue;
        const double w = ipcw_pair_weight(G, si.time);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& sj = dataset.subjects[j];
            if (!(si.time < sj.time)) continue;
            if (restrict_group && sj.group != *restrict_group) continue;
            num += w * concordance_credit(scores[i], scores[j]);
            den += w;
        }
    }
    if (den == 0.0) throw MetricUndefinedError("c_index: no comparable pairs");
    return num / den;
}

double x_ci(const SurvivalDataset& dataset, const RiskScores& scores,
            const StepFunction& G, const std::string& a, const std::string& b) {
    check_scores(dataset, scores);
    double num = 0.0, den = 0.0;
    const std::size_t n = dataset.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& si = dataset.subjects[i];
        if (!si.event || si.group != a) continue;
        const double w = ipcw_pair_weight(G, si.time);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& sj = dataset.subjects[j];
            if (sj.group != b || !(si.time < sj.time)) continue;
            num += w * concordance_credit(scores[i], scores[j]);
            den += w;
        }
    }
    if (den == 0.0)
        throw MetricUndefinedError("x_ci(" + a + "," + b + "): no comparable pairs");
    return num / den;
}

double auc_t(const SurvivalDataset& dataset, const RiskScores& scores,
             const StepFunction& G, double t,
             const std::optional<std::pair<std::string, std::string>>& restrict) {
    check_scores(dataset, scores);
    const double g_control = std::max(G(t), kIpcwFloor);
    const double w_control = 1.0 / g_control;
    double num = 0.0, den = 0.0;
    const std::size_t n = dataset.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& si = dataset.subjects[i];
        if (!si.event || si.time > t) continue;  // cases: event by t
        if (restrict && si.group != restrict->first) continue;
        const double wi = 1.0 / std::max(G.left_limit(si.time), kIpcwFloor);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& sj = dataset.subjects[j];
            if (!(sj.time > t)) continue;  // controls: still at risk past t
            if (restrict && sj.group != restrict->second) continue;
            const double w = wi * w_control;
            num += w * concordance_credit(scores[i], scores[j]);
            den += w;
        }
    }
    if (den == 0.0) throw MetricUndefinedError("auc_t: no cases or no controls at t");
    return num / den;
}

namespace {

// Shared integration core for i_auc and i_delta_xauc: a Riemann-Stieltjes
// average of per-grid-point values against dS, with undefined points passing
// their mass to the nearest later defined point (earlier if none later).
double stieltjes_average(const std::vector<std::optional<double>>& values,
                         const StepFunction& S_hat, const TimeGrid& grid,
                         const char* what) {
    const std::size_t m = grid.points.size();
    std::vector<double> mass(m);
    double prev = S_hat(grid.t_start);
    const double norm = S_hat(grid.t_start) - S_hat(grid.t_end);
    if (norm <= 0.0)
        throw MetricUndefinedError(std::string(what) + ": no survival mass in window");
    for (std::size_t k = 0; k < m; ++k) {
        const double cur = S_hat(grid.points[k]);
        mass[k] = prev - cur;
        prev = cur;
    }

    std::vector<double> effective(m, 0.0);
    bool any_defined = false;
    for (std::size_t k = 0; k < m; ++k)
        if (values[k]) any_defined = true;
    if (!any_defined)
        throw MetricUndefinedError(std::string(what) + ": undefined at every grid point");

    // Assign each undefined point's mass to its receiving defined point, in
    // ascending grid order.
    for (std::size_t k = 0; k < m; ++k) {
        if (values[k]) {
            effective[k] += mass[k];
            continue;
        }
        if (mass[k] == 0.0) continue;
        std::size_t target = m;
        for (std::size_t j = k + 1; j < m; ++j)
            if (values[j]) { target = j; break; }
        if (target == m)
            for (std::size_t j = k; j-- > 0;)
                if (values[j]) { target = j; break; }
        effective[target] += mass[k];
    }

    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        if (values[k]) acc += *values[k] * effective[k];
    return acc / norm;
}

}  // namespace

double i_auc(const SurvivalDataset& dataset, const RiskScores& scores,
             const StepFunction& G, const StepFunction& S_hat, const TimeGrid& grid,
             const std::optional<std::string>& restrict_group) {
    grid.validate();
    std::vector<std::optional<double>> auc(grid.points.size());
    std::optional<std::pair<std::string, std::string>> restrict;
    if (restrict_group) restrict = std::make_pair(*restrict_group, *restrict_group);
    for (std::size_t k = 0; k < grid.points.size(); ++k) {
        try {
            auc[k] = auc_t(dataset, scores, G, grid.points[k], restrict);
        } catch (const MetricUndefinedError&) {
        }
    }
    return stieltjes_average(auc, S_hat, grid, "i_auc");
}

Disparities disparities(const SurvivalDataset& dataset, const RiskScores& scores,
                        const StepFunction& G, const StepFunction& S_hat,
                        const TimeGrid& grid) {
    grid.validate();
    Disparities out;
    const auto& groups = dataset.group_levels;
    const std::size_t m = grid.points.size();
    out.delta_xauc_t.assign(m, std::nullopt);

    std::vector<double> group_ci, group_iauc;
    for (const auto& g : groups) {
        group_ci.push_back(c_index(dataset, scores, G, g));
        group_iauc.push_back(i_auc(dataset, scores, G, S_hat, grid, g));
    }
    for (std::size_t a = 0; a < groups.size(); ++a)
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
            out.delta_ci = std::max(out.delta_ci, std::abs(group_ci[a] - group_ci[b]));
            out.delta_iauc =
                std::max(out.delta_iauc, std::abs(group_iauc[a] - group_iauc[b]));
        }

    if (groups.size() < 2) return out;  // cross metrics not applicable
    out.cross_applicable = true;

    for (std::size_t a = 0; a < groups.size(); ++a)
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
            const double ab = x_ci(dataset, scores, G, groups[a], groups[b]);
            const double ba = x_ci(dataset, scores, G, groups[b], groups[a]);
            out.delta_xci = std::max(out.delta_xci, std::abs(ab - ba));
        }

    for (std::size_t k = 0; k < m; ++k) {
        std::optional<double> worst;
        for (std::size_t a = 0; a < groups.size(); ++a)
            for (std::size_t b = a + 1; b < groups.size(); ++b) {
                try {
                    const double ab = auc_t(dataset, scores, G, grid.points[k],
                                            std::make_pair(groups[a], groups[b]));
                    const double ba = auc_t(dataset, scores, G, grid.points[k],
                                            std::make_pair(groups[b], groups[a]));
                    const double gap = std::abs(ab - ba);
                    if (!worst || gap > *worst) worst = gap;
                } catch (const MetricUndefinedError&) {
                }
            }
        out.delta_xauc_t[k] = worst;
    }
    out.i_delta_xauc = stieltjes_average(out.delta_xauc_t, S_hat, grid, "i_delta_xauc");
    return out;
}

BootstrapInterval bootstrap_ci(const SurvivalDataset& dataset, const CoxModel& model,
                               BootstrapMetric metric, const TimeGrid& grid,
                               int n_boot, std::uint64_t seed) {
    if (n_boot < 100) throw ConfigError("bootstrap requires n_boot >= 100");

    auto evaluate = [&](const SurvivalDataset& ds) {
        const RiskScores scores = predict_risk_all(model, ds);
        const StepFunction G = censoring_km(ds);
        if (metric == BootstrapMetric::c_index) return c_index(ds, scores, G);
        const StepFunction S = kaplan_meier(ds);
        return i_auc(ds, scores, G, S, grid);
    };

    BootstrapInterval out;
    out.point = evaluate(dataset);

    const std::size_t n = dataset.size();
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_boot));
    for (int r = 0; r < n_boot; ++r) {
        auto eng = stream(seed, static_cast<std::uint64_t>(r));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        SurvivalDataset rep;
        rep.variable_names = dataset.variable_names;
        rep.subjects.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            rep.subjects.push_back(dataset.subjects[pick(eng)]);
        for (const auto& lvl : dataset.group_levels)
            for (const auto& s : rep.subjects)
                if (s.group == lvl) { rep.group_levels.push_back(lvl); break; }
        try {
            stats.push_back(evaluate(rep));
        } catch (const NumericError&) {
            ++out.dropped;
        }
    }
    if (out.dropped * 10 > n_boot)
        throw MetricUndefinedError("bootstrap: more than 10% of replicates undefined");

    std::sort(stats.begin(), stats.end());
    auto pct = [&](double q) {
        const double h = (static_cast<double>(stats.size()) - 1.0) * q;
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, stats.size() - 1);
        return stats[lo] + (h - std::floor(h)) * (stats[hi] - stats[lo]);
    };
    out.lower = pct(0.025);
    out.upper = pct(0.975);
    return out;
}

MetricReport metric_report(const SurvivalDataset& dataset, const RiskScores& scores,
                           const TimeGrid& grid) {
    const StepFunction G = censoring_km(dataset);
    const StepFunction S = kaplan_meier(dataset);

    MetricReport r;
    r.grid = grid;
    r.c_index_overall = c_index(dataset, scores, G);
    r.i_auc_overall = i_auc(dataset, scores, G, S, grid);
    for (const auto& g : dataset.group_levels) {
        r.c_index_by_group.emplace_back(g, c_index(dataset, scores, G, g));
        r.i_auc_by_group.emplace_back(g, i_auc(dataset, scores, G, S, grid, g));
    }
    for (const auto& a : dataset.group_levels)
        for (const auto& b : dataset.group_levels) {
            if (a == b) continue;
            r.x_ci_pairs.emplace_back(a, b, x_ci(dataset, scores, G, a, b));
            std::vector<std::optional<double>> series(grid.points.size());
            for (std::size_t k = 0; k < grid.points.size(); ++k) {
                try {
                    series[k] =
                        auc_t(dataset, scores, G, grid.points[k], std::make_pair(a, b));
                } catch (const MetricUndefinedError&) {
                }
            }
            r.x_auc_series.emplace_back(a, b, std::move(series));
        }
    r.disp = disparities(dataset, scores, G, S, grid);
    return r;
}

}  // namespace fasm
