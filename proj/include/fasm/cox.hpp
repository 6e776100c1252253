#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fasm/dataset.hpp"
#include "fasm/step_function.hpp"

namespace fasm {

enum class TiesMethod { efron, breslow };

std::string to_string(TiesMethod ties);
TiesMethod ties_from_string(const std::string& s);

struct CoxModel {
    Eigen::VectorXd beta;                     // aligned with variable_names
    std::vector<std::string> variable_names;  // the model's variable roster
    StepFunction baseline_cumhaz;             // Breslow H0(t), nondecreasing, H0(0)=0
    TiesMethod ties = TiesMethod::efron;
};

struct FitSummary {
    double log_partial_likelihood_at_optimum = 0.0;
    double log_partial_likelihood_null = 0.0;
    Eigen::MatrixXd covariance;  // inverse observed information
    Eigen::VectorXd standard_errors;
    int iterations = 0;
    bool converged = false;
};

struct FitConfig {
    int max_iterations = 50;
    double tolerance = 1e-9;  // relative log-likelihood change
    int step_halving_max = 10;
    double divergence_bound = 20.0;  // max |beta component|
};

struct Objective {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

// Log partial likelihood with exact analytic gradient and Hessian.
// roster names a subset of dataset.variable_names; |beta| = |roster|.
Objective log_partial_likelihood(const SurvivalDataset& dataset,
                                 const std::vector<std::string>& roster,
                                 const Eigen::VectorXd& beta, TiesMethod ties);

struct FitResult {
    CoxModel model;
    FitSummary summary;
};

FitResult fit(const SurvivalDataset& dataset, const std::vector<std::string>& roster,
              const FitConfig& config = {}, TiesMethod ties = TiesMethod::efron);

StepFunction breslow_baseline(const SurvivalDataset& dataset,
                              const std::vector<std::string>& roster,
                              const Eigen::VectorXd& beta, TiesMethod ties);

// Linear predictor beta' x; higher = higher risk.
double predict_risk(const CoxModel& model, const Subject& subject,
                    const SurvivalDataset& dataset);

// S(t|x) = exp(-H0(t) * exp(beta' x)).
double predict_survival(const CoxModel& model, const Subject& subject,
                        const SurvivalDataset& dataset, double time);

// Risk scores for every subject, index-aligned with the dataset.
std::vector<double> predict_risk_all(const CoxModel& model, const SurvivalDataset& dataset);

std::string model_to_json(const CoxModel& model);
CoxModel model_from_json(const std::string& text);

}  // namespace fasm
