#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace fasm {

// Right-continuous step curve. Evaluation at t returns the value of the last
// jump <= t, else value_before_first. Jump times strictly increasing.
class StepFunction {
public:
    StepFunction() = default;
    StepFunction(std::vector<double> times, std::vector<double> values,
                 double value_before_first = 1.0)
        : times_(std::move(times)),
          values_(std::move(values)),
          before_first_(value_before_first) {}

    double operator()(double t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return before_first_;
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    // Left limit: value of the last jump strictly before t.
    double left_limit(double t) const {
        auto it = std::lower_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return before_first_;
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }
    double value_before_first() const { return before_first_; }
    bool empty() const { return times_.empty(); }

private:
    std::vector<double> times_;
    std::vector<double> values_;
    double before_first_ = 1.0;
};

}  // namespace fasm
