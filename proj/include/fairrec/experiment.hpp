#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/eval.hpp"
#include "fairrec/recommender.hpp"
#include "fairrec/synth.hpp"

namespace fairrec {

/// The three experimental configurations: train on raw ratings; train on
/// debiased ratings and evaluate the raw model output; debiased training
/// plus per-user preference correction and re-ranking.
enum class PipelineMode { Baseline, DebiasOnly, Full };

std::string mode_name(PipelineMode m);
PipelineMode mode_from_name(const std::string& name);

enum class BiasProfileMode { TopN, AllPairs };

struct EvalSettings {
    std::size_t top_n = 10;
    /// Held-out ratings at or above this count as relevant; defaults to
    /// ceil(0.8 * scale_max) when unset.
    std::optional<double> relevance_threshold;
    double bin_width = 0.05;
    BiasProfileMode bias_profile = BiasProfileMode::TopN;
    bool graded_gains = false;
};

struct DataSource {
    // Exactly one of the two is active: file paths, or a generator config.
    std::string ratings_path;
    std::string catalog_path;
    LoadOptions load;
    std::optional<GenerativeConfig> synth;
};

struct FilterSettings {
    bool enabled = false;
    std::size_t min_item_ratings = 1;
    std::size_t min_user_ratings = 1;
    FilterMode mode = FilterMode::Sequential;
};

struct ExperimentConfig {
    DataSource data;
    FilterSettings filter;
    double test_user_fraction = 0.2;
    double holdout_fraction = 0.5;
    std::vector<ModelConfig> algorithms;
    std::vector<PipelineMode> modes = {PipelineMode::Baseline, PipelineMode::DebiasOnly,
                                       PipelineMode::Full};
    EvalSettings eval;
    std::uint64_t seed = 0;
    /// Diagnostic switch: estimate nothing, use theta = 0 everywhere. With it
    /// set, debias-only must reproduce baseline outputs exactly.
    bool force_zero_theta = false;
    bool emit_recommendations = false;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string serialize_experiment_config(const ExperimentConfig& config);
/// Stable hash of the canonical serialized form.
std::string config_fingerprint(const ExperimentConfig& config);

GenerativeConfig parse_generative_config(const std::string& json_text);

struct CellOutcome {
    std::string name;  // "<algorithm>_<mode>"
    bool ok = false;
    std::string error;
    MetricsReport metrics;  // valid when ok
};

struct RunResult {
    std::string fingerprint;
    std::uint64_t partition_hash = 0;
    std::vector<CellOutcome> cells;
    bool complete = true;
};

/// Executes the whole pipeline under `out_dir`: manifest first, then one
/// subdirectory per algorithm x mode. A failing cell is recorded and skipped,
/// not fatal. `with_timings` adds wall-clock timings to the manifest and is
/// off by default so reruns stay byte-identical.
RunResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                         bool with_timings = false);

struct ReportResult {
    std::vector<std::string> missing_cells;
    bool complete = true;
};

/// Builds the summary, significance, and comparison tables from a finished
/// run directory. Missing cells become gaps, not errors.
ReportResult write_report(const std::string& run_dir, const std::string& report_dir);

/// CLI entry point shared by the binary and the tests; returns the process
/// exit code (0 ok, 1 total failure, 2 partial results).
int cli_main(const std::vector<std::string>& args);

}  // namespace fairrec
