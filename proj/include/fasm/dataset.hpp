#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fasm/errors.hpp"

namespace fasm {

struct Subject {
    std::vector<double> covariates;  // aligned with SurvivalDataset::variable_names
    double time = 0.0;               // follow-up duration, > 0
    bool event = false;              // true = event observed, false = censored
    std::string group;               // sensitive attribute value
};

struct SurvivalDataset {
    std::vector<Subject> subjects;
    std::vector<std::string> variable_names;  // defines coefficient order downstream
    std::vector<std::string> group_levels;    // distinct labels, each with >= 1 subject

    std::size_t size() const { return subjects.size(); }
    std::size_t n_events() const;
    int variable_index(const std::string& name) const;  // -1 if absent
    int group_index(const std::string& level) const;

    // Checks type invariants (positive finite times, covariate widths,
    // group-level coverage); throws DataError on violation.
    void validate() const;
};

struct ColumnSchema {
    std::string time_column;
    std::string event_column;
    std::string group_column;
    std::vector<std::string> covariate_columns;
};

SurvivalDataset load_csv(const std::string& path, const ColumnSchema& schema);

struct SplitSpec {
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitResult {
    SurvivalDataset train;
    SurvivalDataset val;
    SurvivalDataset test;
};

// Strata are group x event cells; counts per split follow largest-remainder
// rounding with ties broken in split order (train, val, test).
SplitResult stratified_split(const SurvivalDataset& dataset, const SplitSpec& spec);

struct SimSpec {
    std::size_t n = 0;
    std::vector<std::pair<std::string, double>> group_proportions;  // sums to 1
    std::vector<std::pair<std::string, double>> true_beta;  // "group=<level>" names hit the indicator
    double baseline_shape = 1.0;
    double baseline_scale = 1.0;
    std::map<std::string, double> censor_rate;  // exponential rate per group
    double horizon = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;

    void validate() const;
};

SurvivalDataset simulate_cohort(const SimSpec& spec);

struct VariableSummary {
    std::string name;
    bool indicator = false;  // all observed values in {0,1}
    double mean = 0.0;
    double sd = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::size_t count_positive = 0;  // indicator frequency
};

struct GroupSummary {
    std::string group;  // empty for the overall block
    std::size_t count = 0;
    double percent = 0.0;
    std::vector<VariableSummary> variables;
    double mean_survival_time = 0.0;
    double event_rate = 0.0;
};

struct CohortSummary {
    GroupSummary overall;
    std::vector<GroupSummary> per_group;
};

CohortSummary summarize(const SurvivalDataset& dataset);

void write_csv(const SurvivalDataset& dataset, const std::string& path);

}  // namespace fasm
