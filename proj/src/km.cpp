#include "fasm/km.hpp"

#include <algorithm>
#include <map>

namespace fasm {

namespace {

StepFunction km_curve(const SurvivalDataset& dataset, bool flip_events) {
    if (dataset.subjects.empty()) throw DataError("kaplan_meier: empty dataset");

    // d_k = events at t_k, n_k = at-risk count {time >= t_k}.
    std::map<double, std::size_t> events_at;
    for (const auto& s : dataset.subjects) {
        const bool ev = flip_events ? !s.event : s.event;
        if (ev) ++events_at[s.time];
    }

    std::vector<double> obs_times;
    obs_times.reserve(dataset.size());
    for (const auto& s : dataset.subjects) obs_times.push_back(s.time);
    std::sort(obs_times.begin(), obs_times.end());

    std::vector<double> times, values;
    double surv = 1.0;
    for (const auto& [t, d] : events_at) {
        const auto at_risk = obs_times.end() -
                             std::lower_bound(obs_times.begin(), obs_times.end(), t);
        surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
        times.push_back(t);
        values.push_back(surv);
    }
    return StepFunction(std::move(times), std::move(values), 1.0);
}

}  // namespace

StepFunction kaplan_meier(const SurvivalDataset& dataset) {
    return km_curve(dataset, false);
}

StepFunction censoring_km(const SurvivalDataset& dataset) {
    return km_curve(dataset, true);
}

}  // namespace fasm
