#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairhead/cohort.hpp"
#include "fairhead/dataset.hpp"
#include "fairhead/matrix.hpp"
#include "fairhead/model.hpp"

namespace fairhead {

inline constexpr double kDefaultThreshold = 0.5;

// Mann-Whitney AUC with midranks: P(pos > neg) + P(tie) / 2. nullopt when the
// label column has no positives or no negatives.
std::optional<double> auc(std::span<const double> scores, std::span<const unsigned char> labels);

// Per (label, group) confusion counts at `threshold` (prob >= threshold is a
// positive prediction). A rate with zero support is undefined, not 0.
struct HardRates {
    double threshold = kDefaultThreshold;
    Matrix<std::size_t> positives;  // C x |G|
    Matrix<std::size_t> negatives;
    Matrix<std::size_t> true_pos;
    Matrix<std::size_t> false_pos;

    std::size_t classes() const noexcept { return positives.rows(); }
    std::size_t groups() const noexcept { return positives.cols(); }
    std::optional<double> tpr(std::size_t k, std::size_t g) const;
    std::optional<double> fpr(std::size_t k, std::size_t g) const;
};

HardRates hard_rates(const MatrixD& probs, const MatrixU8& labels, const GroupAssignment& groups,
                     double threshold = kDefaultThreshold);

struct Exclusion {
    std::string metric;
    std::size_t label = 0;
    std::string reason;
    bool operator==(const Exclusion&) const = default;
};

struct PerLabelMetric {
    std::vector<std::optional<double>> per_label;
    std::optional<double> average;  // mean over defined labels
    std::vector<Exclusion> excluded;
};

// EO_Diff_k = max(max_g tpr - min_g tpr, max_g fpr - min_g fpr) over defined
// cells; a label needs two defined groups for each rate.
PerLabelMetric eo_diff(const HardRates& rates);

// Balanced accuracy (TPR + TNR) / 2 per label over the whole set.
PerLabelMetric wacc(const MatrixD& probs, const MatrixU8& labels, double threshold = kDefaultThreshold);

PerLabelMetric auc_per_label(const MatrixD& probs, const MatrixU8& labels);

inline double accuracy_fairness(double wacc_avg, double eo_diff_avg) { return wacc_avg - eo_diff_avg; }

struct EvaluationReport {
    std::vector<std::string> label_names;
    std::vector<std::optional<double>> auc_per_label;
    double auc_avg = 0.0;
    std::vector<std::optional<double>> wacc_per_label;
    double wacc_avg = 0.0;
    std::vector<std::optional<double>> eo_diff_per_label;
    double eo_diff_avg = 0.0;
    double af_avg = 0.0;
    HardRates rates;
    std::vector<Exclusion> excluded;
};

// Throws when every label is excluded for some metric, naming that metric.
EvaluationReport evaluate_predictions(const MatrixD& probs, const MatrixU8& labels, const GroupAssignment& groups,
                                      std::vector<std::string> label_names, double threshold = kDefaultThreshold);

EvaluationReport evaluate(const HeadModel& head, const MatrixD& features, const MatrixU8& labels,
                          const GroupAssignment& groups, std::vector<std::string> label_names,
                          double threshold = kDefaultThreshold);

// `groups` covers every row of `d`; only `rows` are evaluated.
EvaluationReport evaluate(const HeadModel& head, const ExtractorModel& extractor, const Dataset& d,
                          std::span<const std::size_t> rows, const GroupAssignment& groups,
                          double threshold = kDefaultThreshold);

std::string report_to_json(const EvaluationReport& r, const std::string& method);
// "method,auc_avg,eo_diff_avg,wacc_avg,af_avg" plus one row.
std::string report_to_csv(const EvaluationReport& r, const std::string& method);

}  // namespace fairhead
