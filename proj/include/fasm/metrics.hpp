#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fasm/cox.hpp"
#include "fasm/dataset.hpp"
#include "fasm/km.hpp"

namespace fasm {

using RiskScores = std::vector<double>;  // index-aligned with a SurvivalDataset

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<double> points;  // strictly increasing, in (t_start, t_end]

    static TimeGrid regular(double t_start, double t_end, double step);
    void validate() const;
};

// IPCW-weighted concordance over pairs (i, j) with delta_i = 1 and T_i < T_j.
// restrict_group limits both members to one group.
double c_index(const SurvivalDataset& dataset, const RiskScores& scores,
               const StepFunction& G,
               const std::optional<std::string>& restrict_group = std::nullopt);

// Cross-group concordance: i restricted to group a, j to group b.
double x_ci(const SurvivalDataset& dataset, const RiskScores& scores,
            const StepFunction& G, const std::string& a, const std::string& b);

// Cumulative/dynamic AUC at time t. Cases {delta=1, T <= t} weighted
// 1/max(G(T_i-), floor); controls {T > t} weighted 1/max(G(t), floor).
// restrict maps cases to group a and controls to group b.
double auc_t(const SurvivalDataset& dataset, const RiskScores& scores,
             const StepFunction& G, double t,
             const std::optional<std::pair<std::string, std::string>>& restrict =
                 std::nullopt);

// Time-integrated AUC: Riemann-Stieltjes sum of AUC(t) against dS over the
// grid, normalized by S(t_start) - S(t_end). Grid points with undefined AUC
// pass their S-mass to the nearest later defined point (earlier if none).
double i_auc(const SurvivalDataset& dataset, const RiskScores& scores,
             const StepFunction& G, const StepFunction& S_hat, const TimeGrid& grid,
             const std::optional<std::string>& restrict_group = std::nullopt);

struct Disparities {
    double delta_ci = 0.0;
    double delta_iauc = 0.0;
    double delta_xci = 0.0;
    std::vector<std::optional<double>> delta_xauc_t;  // one entry per grid point
    double i_delta_xauc = 0.0;
    bool cross_applicable = false;  // false when < 2 groups
};

Disparities disparities(const SurvivalDataset& dataset, const RiskScores& scores,
                        const StepFunction& G, const StepFunction& S_hat,
                        const TimeGrid& grid);

enum class BootstrapMetric { c_index, i_auc };

struct BootstrapInterval {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    int dropped = 0;
};

// Percentile bootstrap over subject resamples; G and S re-estimated per
// replicate. Replicate r draws from an RNG stream seeded with seed ^ r.
BootstrapInterval bootstrap_ci(const SurvivalDataset& dataset, const CoxModel& model,
                               BootstrapMetric metric, const TimeGrid& grid,
                               int n_boot, std::uint64_t seed);

struct MetricReport {
    double c_index_overall = 0.0;
    std::vector<std::pair<std::string, double>> c_index_by_group;
    double i_auc_overall = 0.0;
    std::vector<std::pair<std::string, double>> i_auc_by_group;
    // Ordered group pairs (a, b) with their xCI values.
    std::vector<std::tuple<std::string, std::string, double>> x_ci_pairs;
    // xAUC(t) series per ordered pair; entries align with grid.points.
    std::vector<std::tuple<std::string, std::string, std::vector<std::optional<double>>>>
        x_auc_series;
    Disparities disp;
    TimeGrid grid;
    std::optional<BootstrapInterval> c_index_ci;
    std::optional<BootstrapInterval> i_auc_ci;
};

MetricReport metric_report(const SurvivalDataset& dataset, const RiskScores& scores,
                           const TimeGrid& grid);

}  // namespace fasm
