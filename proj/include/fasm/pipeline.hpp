#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fasm/dataset.hpp"
#include "fasm/metrics.hpp"
#include "fasm/rashomon.hpp"
#include "fasm/select.hpp"

namespace fasm {

struct PipelineConfig {
    // Data
    std::string dataset_path;
    ColumnSchema schema;
    std::vector<std::string> sensitive;  // variable names after encoding

    // Split
    SplitSpec split;

    // Fit
    TiesMethod ties = TiesMethod::efron;
    FitConfig fit;

    // Rashomon
    RashomonConfig rashomon;
    std::string measure_name = "r2_pseudo_likelihood_ratio";

    // Evaluation window
    double t_start = 0.0;
    double t_end = 120.0;
    double grid_step = 1.0;

    // Bootstrap
    bool bootstrap_enabled = true;
    int n_boot = 200;
    std::uint64_t bootstrap_seed = 0;

    std::string output_dir;
    int threads = 1;

    void validate() const;
};

PipelineConfig config_from_json_file(const std::string& path);

struct ModelEvaluation {
    std::string label;  // "CoxPH", "Under-blindness", "FASM"
    MetricReport report;
    double msi = 0.0;
    bool msi_infinite = false;
};

struct RunOutputs {
    SelectionResult selection;
    std::vector<ModelEvaluation> test_evaluations;  // CoxPH, Under-blindness, FASM
    std::vector<ModelEvaluation> val_evaluations;
    std::string output_dir;
};

// Full pipeline: load -> split -> case optima -> Rashomon sampling on the
// validation set -> MSI selection -> three-model test-set evaluation ->
// reports + manifest. Removes partial outputs on failure.
RunOutputs run_pipeline(const PipelineConfig& config);

// Standalone audit of a serialized model on a dataset; writes report JSON and
// curves CSV when paths are nonempty.
ModelEvaluation evaluate_model(const CoxModel& model, const SurvivalDataset& dataset,
                               const TimeGrid& grid, const std::string& label,
                               bool with_bootstrap = false, int n_boot = 200,
                               std::uint64_t seed = 0);

void write_report_json(const std::vector<ModelEvaluation>& evals, const TimeGrid& grid,
                       const std::string& path);
void write_curves_csv(const std::vector<ModelEvaluation>& evals,
                      const std::vector<CoxModel>& models,
                      const SurvivalDataset& dataset, const TimeGrid& grid,
                      const std::string& path);

std::uint64_t fnv1a_file(const std::string& path);

}  // namespace fasm
