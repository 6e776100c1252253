#include "fasm/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace fasm {

std::string to_string(TiesMethod ties) {
    return ties == TiesMethod::efron ? "efron" : "breslow";
}

TiesMethod ties_from_string(const std::string& s) {
    if (s == "efron") return TiesMethod::efron;
    if (s == "breslow") return TiesMethod::breslow;
    throw ConfigError("unknown ties method '" + s + "'");
}

namespace {

struct Design {
    Eigen::MatrixXd X;            // n x p, rows sorted by (time, original index)
    std::vector<double> times;    // ascending
    std::vector<bool> events;
    std::size_t n = 0;
    std::size_t p = 0;
};

Design make_design(const SurvivalDataset& dataset, const std::vector<std::string>& roster) {
    Design d;
    d.n = dataset.size();
    d.p = roster.size();
    std::vector<int> cols;
    for (const auto& name : roster) {
        const int c = dataset.variable_index(name);
        if (c < 0) throw SchemaError("variable '" + name + "' not in dataset");
        cols.push_back(c);
    }
    std::vector<std::size_t> order(d.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.subjects[a].time < dataset.subjects[b].time;
    });
    d.X.resize(static_cast<Eigen::Index>(d.n), static_cast<Eigen::Index>(d.p));
    d.times.resize(d.n);
    d.events.resize(d.n);
    for (std::size_t r = 0; r < d.n; ++r) {
        const auto& s = dataset.subjects[order[r]];
        d.times[r] = s.time;
        d.events[r] = s.event;
        for (std::size_t c = 0; c < d.p; ++c)
            d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                s.covariates[static_cast<std::size_t>(cols[c])];
    }
    return d;
}

// Log partial likelihood with analytic gradient/Hessian. Walks event times
// from the largest down, accumulating the risk-set sums S0, S1, S2. The
// linear predictor is centered at its maximum; the value is invariant.
Objective objective_on(const Design& d, const Eigen::VectorXd& beta, TiesMethod ties) {
    const auto n = static_cast<Eigen::Index>(d.n);
    const auto p = static_cast<Eigen::Index>(d.p);

    Objective out;
    out.gradient = Eigen::VectorXd::Zero(p);
    out.hessian = Eigen::MatrixXd::Zero(p, p);

    Eigen::VectorXd eta = d.X * beta;
    const double shift = d.n ? eta.maxCoeff() : 0.0;
    eta.array() -= shift;
    Eigen::VectorXd w = eta.array().exp();

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    bool any_event = false;
    Eigen::Index i = n;
    while (i > 0) {
        // Block of tied observed times [lo, i).
        Eigen::Index lo = i;
        const double t = d.times[static_cast<std::size_t>(i - 1)];
        while (lo > 0 && d.times[static_cast<std::size_t>(lo - 1)] == t) --lo;
        for (Eigen::Index r = i - 1; r >= lo; --r) {
            s0 += w(r);
            s1 += w(r) * d.X.row(r).transpose();
            s2 += w(r) * d.X.row(r).transpose() * d.X.row(r);
        }

        double d0 = 0.0;
        Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p, p);
        std::size_t deaths = 0;
        for (Eigen::Index r = lo; r < i; ++r) {
            if (!d.events[static_cast<std::size_t>(r)]) continue;
            ++deaths;
            any_event = true;
            out.value += eta(r);
            out.gradient += d.X.row(r).transpose();
            d0 += w(r);
            d1 += w(r) * d.X.row(r).transpose();
            d2 += w(r) * d.X.row(r).transpose() * d.X.row(r);
        }
        if (deaths > 0) {
            const double dd = static_cast<double>(deaths);
            if (ties == TiesMethod::breslow) {
                out.value -= dd * std::log(s0);
                out.gradient -= dd * (s1 / s0);
                out.hessian -= dd * (s2 / s0 - (s1 / s0) * (s1 / s0).transpose());
            } else {
                for (std::size_t l = 0; l < deaths; ++l) {
                    const double f = static_cast<double>(l) / dd;
                    const double phi0 = s0 - f * d0;
                    const Eigen::VectorXd phi1 = s1 - f * d1;
                    const Eigen::MatrixXd phi2 = s2 - f * d2;
                    out.value -= std::log(phi0);
                    out.gradient -= phi1 / phi0;
                    out.hessian -= phi2 / phi0 - (phi1 / phi0) * (phi1 / phi0).transpose();
                }
            }
        }
        i = lo;
    }

    if (!any_event) throw ObjectiveError("no events in dataset");
    return out;
}

}  // namespace

Objective log_partial_likelihood(const SurvivalDataset& dataset,
                                 const std::vector<std::string>& roster,
                                 const Eigen::VectorXd& beta, TiesMethod ties) {
    if (static_cast<std::size_t>(beta.size()) != roster.size())
        throw ConfigError("beta length does not match roster");
    return objective_on(make_design(dataset, roster), beta, ties);
}

FitResult fit(const SurvivalDataset& dataset, const std::vector<std::string>& roster,
              const FitConfig& config, TiesMethod ties) {
    const Design d = make_design(dataset, roster);
    for (std::size_t c = 0; c < roster.size(); ++c) {
        const auto col = d.X.col(static_cast<Eigen::Index>(c));
        if ((col.array() == col(0)).all())
            throw DegenerateDesignError("constant covariate column '" + roster[c] + "'");
    }

    const auto p = static_cast<Eigen::Index>(d.p);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Objective obj = objective_on(d, beta, ties);
    const double ll_null = obj.value;

    FitResult out;
    out.summary.log_partial_likelihood_null = ll_null;

    int iter = 0;
    bool converged = false;
    for (; iter < config.max_iterations; ++iter) {
        Eigen::MatrixXd info = -obj.hessian;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            throw ConditioningError("singular Hessian in Newton step");
        Eigen::VectorXd step = ldlt.solve(obj.gradient);
        if (!step.allFinite())
            throw ConditioningError("non-finite Newton step (ill-conditioned Hessian)");

        // Step halving when the objective decreases.
        double scale = 1.0;
        Eigen::VectorXd beta_next;
        Objective obj_next;
        int halves = 0;
        for (;; ++halves) {
            beta_next = beta + scale * step;
            obj_next = objective_on(d, beta_next, ties);
            if (obj_next.value >= obj.value || halves >= config.step_halving_max) break;
            scale *= 0.5;
        }

        const double change = std::abs(obj_next.value - obj.value);
        const double rel = change / (std::abs(obj.value) + 1.0);
        beta = beta_next;
        obj = obj_next;

        if (beta.cwiseAbs().maxCoeff() > config.divergence_bound)
            throw SeparationError(
                "coefficient exceeded divergence bound " +
                std::to_string(config.divergence_bound) +
                " (monotone likelihood / separation)");
        if (rel < config.tolerance) {
            converged = true;
            ++iter;
            break;
        }
    }

    Eigen::MatrixXd info = -obj.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
        throw ConditioningError("singular information matrix at the optimum");
    Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    cov = 0.5 * (cov + cov.transpose()).eval();

    out.summary.log_partial_likelihood_at_optimum = obj.value;
    out.summary.covariance = cov;
    out.summary.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.summary.iterations = iter;
    out.summary.converged = converged;

    out.model.beta = beta;
    out.model.variable_names = roster;
    out.model.ties = ties;
    out.model.baseline_cumhaz = breslow_baseline(dataset, roster, beta, ties);
    return out;
}

StepFunction breslow_baseline(const SurvivalDataset& dataset,
                              const std::vector<std::string>& roster,
                              const Eigen::VectorXd& beta, TiesMethod ties) {
    (void)ties;  // increments are d_t / sum_{risk set} exp(beta'x) either way
    const Design d = make_design(dataset, roster);
    const Eigen::VectorXd w = (d.X * beta).array().exp();

    std::vector<double> times, values;
    double cumhaz = 0.0;
    std::size_t i = 0;
    double risk_sum = w.sum();
    while (i < d.n) {
        std::size_t hi = i;
        const double t = d.times[i];
        std::size_t deaths = 0;
        while (hi < d.n && d.times[hi] == t) {
            if (d.events[hi]) ++deaths;
            ++hi;
        }
        if (deaths > 0) {
            cumhaz += static_cast<double>(deaths) / risk_sum;
            times.push_back(t);
            values.push_back(cumhaz);
        }
        for (std::size_t r = i; r < hi; ++r) risk_sum -= w(static_cast<Eigen::Index>(r));
        i = hi;
    }
    return StepFunction(std::move(times), std::move(values), 0.0);
}

double predict_risk(const CoxModel& model, const Subject& subject,
                    const SurvivalDataset& dataset) {
    double lp = 0.0;
    for (std::size_t c = 0; c < model.variable_names.size(); ++c) {
        const int idx = dataset.variable_index(model.variable_names[c]);
        if (idx < 0)
            throw SchemaError("subject lacks covariate '" + model.variable_names[c] + "'");
        lp += model.beta(static_cast<Eigen::Index>(c)) *
              subject.covariates[static_cast<std::size_t>(idx)];
    }
    return lp;
}

double predict_survival(const CoxModel& model, const Subject& subject,
                        const SurvivalDataset& dataset, double time) {
    const double lp = predict_risk(model, subject, dataset);
    return std::exp(-model.baseline_cumhaz(time) * std::exp(lp));
}

std::vector<double> predict_risk_all(const CoxModel& model, const SurvivalDataset& dataset) {
    std::vector<double> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset.subjects) out.push_back(predict_risk(model, s, dataset));
    return out;
}

std::string model_to_json(const CoxModel& model) {
    nlohmann::ordered_json j;
    j["variable_names"] = model.variable_names;
    std::vector<double> beta(model.beta.data(), model.beta.data() + model.beta.size());
    j["beta"] = beta;
    j["ties"] = to_string(model.ties);
    j["baseline"] = {{"times", model.baseline_cumhaz.times()},
                     {"cumhaz", model.baseline_cumhaz.values()}};
    return j.dump(2);
}

CoxModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    CoxModel m;
    m.variable_names = j.at("variable_names").get<std::vector<std::string>>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    if (beta.size() != m.variable_names.size())
        throw SchemaError("model JSON: beta and variable_names lengths differ");
    m.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                               static_cast<Eigen::Index>(beta.size()));
    m.ties = ties_from_string(j.at("ties").get<std::string>());
    auto times = j.at("baseline").at("times").get<std::vector<double>>();
    auto cumhaz = j.at("baseline").at("cumhaz").get<std::vector<double>>();
    if (times.size() != cumhaz.size())
        throw SchemaError("model JSON: baseline arrays must be index-aligned");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw SchemaError("model JSON: baseline times must be strictly increasing");
    m.baseline_cumhaz = StepFunction(std::move(times), std::move(cumhaz), 0.0);
    return m;
}

}  // namespace fasm
