#pragma once

#include <algorithm>

#include "fasm/dataset.hpp"
#include "fasm/step_function.hpp"

namespace fasm {

inline constexpr double kIpcwFloor = 0.05;

// Kaplan-Meier estimate of the event-survival curve S(t).
StepFunction kaplan_meier(const SurvivalDataset& dataset);

// Censoring-survival curve G(t) = P(C > t): KM with the event indicator
// inverted. At tied event/censoring times the event precedes the censoring,
// which falls out of risk sets defined as {time >= t}.
StepFunction censoring_km(const SurvivalDataset& dataset);

// Uno-style pair weight for a comparable pair anchored at an event at
// case_time: 1 / max(G(t-), floor)^2.
inline double ipcw_pair_weight(const StepFunction& G, double case_time,
                               double truncation_floor = kIpcwFloor) {
    const double g = std::max(G.left_limit(case_time), truncation_floor);
    return 1.0 / (g * g);
}

}  // namespace fasm
