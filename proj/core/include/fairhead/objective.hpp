#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fairhead/cohort.hpp"
#include "fairhead/matrix.hpp"

namespace fairhead {

// p_k: positive weight of the class-weighted BCE, ref-count / class-count.
// w_k = (n - n_k) / n and W = sum_k w_k: frequency weights of the penalty.
struct ClassWeights {
    std::vector<double> pos_weight;
    std::vector<double> freq_weight;
    double freq_total = 0.0;
    std::vector<std::size_t> pos_count;
};

std::vector<std::size_t> positive_counts(const MatrixU8& labels);

std::vector<double> class_pos_weights(std::span<const std::size_t> pos_count, std::size_t reference_class);
std::vector<double> class_pos_weights(const MatrixU8& labels, std::size_t reference_class);

struct FrequencyWeights {
    std::vector<double> weight;
    double total = 0.0;
};
FrequencyWeights class_freq_weights(std::span<const std::size_t> pos_count, std::size_t n);
FrequencyWeights class_freq_weights(const MatrixU8& labels);

// Both weight sets from one label matrix (the full training split).
ClassWeights class_weights(const MatrixU8& labels, std::size_t reference_class);

double sigmoid(double z);

// Logits and their sigmoid, kept together so losses can use the stable
// log-sum-exp form on logits while rate terms use probabilities.
struct Predictions {
    MatrixD logits;
    MatrixD probs;

    static Predictions from_logits(MatrixD logits);
    std::size_t batch() const noexcept { return logits.rows(); }
    std::size_t classes() const noexcept { return logits.cols(); }
};

struct LossValue {
    double value = 0.0;
    MatrixD grad_logits;
};

// (1/batch) sum_i sum_k [ p_k y_ik softplus(-z_ik) + (1 - y_ik) softplus(z_ik) ]
// with the exact gradient in logit space.
LossValue weighted_bce(const Predictions& pred, const MatrixU8& labels, std::span<const double> pos_weight);

// Per-(class, group) soft rate gaps over a batch, one-vs-rest. With N_g the
// number of batch rows in g,
//   fpr_kg = | sum_{i in g} p_ik (1-y_ik) / N_g - sum_{i not in g} p_ik (1-y_ik) / (N - N_g) |
// and fnr_kg the same with (1 - p_ik) y_ik. The denominators are group sizes,
// not negative/positive counts. Cells with an empty side are 0.
struct SoftRateGaps {
    MatrixD fpr;  // C x |G|
    MatrixD fnr;
    // Differences inside the absolute values; 0 on degenerate cells.
    MatrixD fpr_signed;
    MatrixD fnr_signed;
    std::vector<std::size_t> group_size;
};

SoftRateGaps soft_rate_gaps(const Predictions& pred, const MatrixU8& labels, const GroupAssignment& batch_groups);

struct PenaltyValue {
    double fpr = 0.0;
    double fnr = 0.0;
};

// fpr = (1/|G|) sum_g (1/W) sum_k w_k fpr_kg, and the same for fnr.
PenaltyValue fairness_penalty(const SoftRateGaps& gaps, std::span<const double> freq_weight, std::size_t group_count);

struct FairnessPenalty {
    MatrixD per_class_group_fpr;
    MatrixD per_class_group_fnr;
    double aggregated_fpr = 0.0;
    double aggregated_fnr = 0.0;
    double alpha = 0.0;
};

struct FairnessLossValue {
    double value = 0.0;
    double bce = 0.0;
    FairnessPenalty penalty;
    MatrixD grad_logits;
};

// weighted_bce + alpha * (fpr + fnr), gradient included. The absolute values
// take subgradient 0 at exactly zero.
FairnessLossValue fairness_loss(const Predictions& pred, const MatrixU8& labels, const GroupAssignment& batch_groups,
                                const ClassWeights& weights, double alpha);

}  // namespace fairhead
