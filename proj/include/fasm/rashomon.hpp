#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fasm/cox.hpp"
#include "fasm/dataset.hpp"

namespace fasm {

struct VariablePartition {
    std::vector<std::string> nonsensitive;  // X_U
    std::vector<std::string> sensitive;     // X_S

    void validate(const SurvivalDataset& dataset) const;
};

// Named, pure scoring contract: higher is better; null model scores 0 for the
// default measure.
struct PerformanceMeasure {
    std::string name;
    std::function<double(const SurvivalDataset&, const std::vector<std::string>& roster,
                         const Eigen::VectorXd& beta, TiesMethod)>
        score;
};

// Likelihood-ratio pseudo-R^2: 1 - exp(-2 (l(beta) - l(0)) / n).
double performance_r2pl(const SurvivalDataset& dataset,
                        const std::vector<std::string>& roster,
                        const Eigen::VectorXd& beta, TiesMethod ties);

PerformanceMeasure default_measure();

struct RashomonConfig {
    double epsilon = 0.05;    // integral-set margin
    double epsilon0 = 0.02;   // case-specific margin, < epsilon
    double u1 = 0.1;          // sampling-scale bounds, 0 < u1 < u2
    double u2 = 2.0;
    int n_target = 500;       // accepted models per case
    int max_draws = 25000;
    std::uint64_t seed = 0;
    bool gate_with_epsilon0 = false;  // alternative case-inclusion gate
    int threads = 1;

    void validate() const;
};

struct SampledModel {
    Eigen::VectorXd beta;             // over its case's roster
    std::uint32_t case_mask = 0;      // bitmask over partition.sensitive
    double performance = 0.0;         // validation-set score
    int draw_index = 0;
};

struct CaseFit {
    std::uint32_t mask = 0;                    // subset of sensitive variables included
    std::vector<std::string> roster;           // nonsensitive + included sensitive
    CoxModel model;
    FitSummary summary;
    bool fit_ok = false;
    std::string fit_error;
};

struct CaseSet {
    CaseFit optimum;
    double optimum_performance = 0.0;  // validation-set score
    std::vector<SampledModel> accepted;
    int draws_used = 0;
    double acceptance_rate = 0.0;
};

struct RashomonSet {
    std::vector<CaseSet> cases;        // cases that passed the inclusion gate
    std::vector<CaseFit> excluded;     // failed fits or gate
    CaseFit full_model;                // the all-sensitive reference optimum
    double full_model_performance = 0.0;
    VariablePartition partition;
    RashomonConfig config;
    std::string measure_name;

    std::size_t total_models() const;
};

// One fitted optimum per subset of the sensitive variables, rosters
// enumerated in subset-bitmask order. Per-case fit failures are recorded,
// not fatal.
std::vector<CaseFit> case_optima(const SurvivalDataset& train,
                                 const VariablePartition& partition, TiesMethod ties,
                                 const FitConfig& fit_config = {});

// Rejection sampling around one case optimum: beta ~ N(beta*, k Sigma*) with
// k ~ U(u1, u2); accept iff validation score >= (1 - epsilon0) * optimum
// score. Draw d uses an RNG stream seeded with case_seed ^ d, so results are
// identical for any worker count.
CaseSet sample_case(const CaseFit& optimum, const SurvivalDataset& validation,
                    const RashomonConfig& config, const PerformanceMeasure& measure,
                    std::uint64_t case_seed);

RashomonSet build_integral_set(const SurvivalDataset& train,
                               const SurvivalDataset& validation,
                               const VariablePartition& partition,
                               const RashomonConfig& config,
                               const PerformanceMeasure& measure,
                               TiesMethod ties = TiesMethod::efron,
                               const FitConfig& fit_config = {});

std::vector<std::string> case_roster(const VariablePartition& partition,
                                     std::uint32_t mask);
std::vector<std::string> sensitive_names(const VariablePartition& partition,
                                         std::uint32_t mask);

// Line-delimited JSON: header record {config, measure, references}, then one
// record per model.
void write_rashomon_jsonl(const RashomonSet& set, const std::string& path);

}  // namespace fasm
