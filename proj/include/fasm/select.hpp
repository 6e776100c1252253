#pragma once

#include <limits>
#include <string>
#include <vector>

#include "fasm/metrics.hpp"
#include "fasm/rashomon.hpp"

namespace fasm {

// Canonical metric order; the cyclic sum in the MSI depends on adjacency, so
// the order is part of the declared configuration and echoed in reports.
struct FairnessProfile {
    std::vector<double> metrics;  // nonnegative, canonical order below
    std::vector<std::string> metric_names;
    TimeGrid window;
};

inline const std::vector<std::string> kCanonicalMetricOrder = {
    "delta_ci", "delta_iauc", "delta_xci", "i_delta_xauc"};

struct MSIResult {
    double msi = 0.0;
    bool infinite = false;  // cyclic product sum was exactly 0
    FairnessProfile profile;
};

FairnessProfile fairness_profile(const CoxModel& model, const SurvivalDataset& dataset,
                                 const TimeGrid& grid);
FairnessProfile fairness_profile(const RiskScores& scores, const SurvivalDataset& dataset,
                                 const TimeGrid& grid);

// MSI = 1 / sum_j m_j m_{j+1} with cyclic wraparound m_{J+1} = m_1.
MSIResult msi(const FairnessProfile& profile);

double msi_value(const std::vector<double>& metrics);  // +inf if sum is 0

struct Candidate {
    Eigen::VectorXd beta;
    std::vector<std::string> roster;
    std::uint32_t case_mask = 0;
    double performance = 0.0;  // validation score
    int draw_index = -1;       // -1 for case optima
    MSIResult msi_result;
    bool profiled = false;
    std::string profile_error;
};

struct SelectionResult {
    Candidate best;
    CoxModel model;                  // best candidate with its case baseline
    std::vector<Candidate> ranked;   // all candidates, best first
};

// Evaluates every member of the set (case optima included) on the dataset and
// returns the MSI argmax. Ties: higher validation performance, then lower
// draw index.
SelectionResult select_fasm(const RashomonSet& set, const SurvivalDataset& dataset,
                            const TimeGrid& grid, int threads = 1);

}  // namespace fasm
