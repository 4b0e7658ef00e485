#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fairhead/cohort.hpp"
#include "fairhead/metrics.hpp"
#include "fairhead/synth.hpp"
#include "fairhead/training.hpp"

namespace fairhead {

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(const std::string& name);

struct ExperimentConfig {
    // A dataset directory (its splits.csv is used when present) or a
    // generator configuration.
    std::variant<std::filesystem::path, SynthConfig> data = SynthConfig{};
    // Unset with synthetic data means the generator's own rules.
    std::optional<CohortSpec> cohort;
    double test_fraction = 0.2;
    ExtractorConfig extractor;
    TrainConfig pretrain;
    TrainConfig finetune;
    std::vector<Method> methods{Method::erm, Method::fine_tune, Method::dfr, Method::fair_cb};
    std::size_t trials = 100;
    std::uint64_t base_seed = 0;
    double threshold = kDefaultThreshold;
    std::optional<std::filesystem::path> output;
    ReportFormat format = ReportFormat::csv;

    // Settings that train well on the default synthetic benchmark.
    static ExperimentConfig desk_defaults();
    void validate() const;
};

// JSON mirror of ExperimentConfig; missing fields keep desk_defaults().
// Relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

struct TrialRecord {
    Method method = Method::erm;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double auc_avg = 0.0;
    double eo_diff_avg = 0.0;
    double wacc_avg = 0.0;
    double af_avg = 0.0;
    std::size_t sample_units = 0;  // units in the fine-tuning subset (0 for ERM)
    bool operator==(const TrialRecord&) const = default;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

struct MethodSummary {
    Method method = Method::erm;
    MeanStd auc, eo_diff, wacc, af;
};

struct ResultsTable {
    std::vector<MethodSummary> summary;  // in ExperimentConfig::methods order
    std::vector<TrialRecord> trials;     // method-major, then seed order

    const MethodSummary& of(Method m) const;
};

// Summaries from raw records, reduced in seed order. af.mean is defined as
// wacc.mean - eo_diff.mean; std is the sample standard deviation (0 for T = 1).
ResultsTable summarize(std::vector<TrialRecord> records, const std::vector<Method>& methods);

// Runs every trial; `workers` > 1 spreads trials over threads without
// changing any result.
ResultsTable run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1);

std::string format_report(const ResultsTable& r, ReportFormat format);
void emit_report(const ResultsTable& r, ReportFormat format, const std::filesystem::path& path);

// Decimal text with four fractional digits (correctly rounded, ties to even).
std::string format4(double v);

}  // namespace fairhead
