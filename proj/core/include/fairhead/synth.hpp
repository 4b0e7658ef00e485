#pragma once

#include <cstdint>
#include <vector>

#include "fairhead/cohort.hpp"
#include "fairhead/dataset.hpp"

namespace fairhead {

// Seeded multi-label data with a planted, tunable group-conditional bias.
//
// Each sample gets attribute bits (bit j = 1 is the advantaged level of
// attribute j), findings drawn independently with prevalence pi_k, and a
// reference label that is on exactly when no finding is. Features are
//   x = sum_k y~_k * s_g * v_k + noise_scale * N(0, I)
// with unit class directions v_k of pairwise overlap rho, signal
// s_g = signal_scale * (1 - beta * disadvantage(g)), and y~ the labels with a
// (beta / 4) * disadvantage(g) chance of flipping each entry. The flips only
// shape the features; recorded labels are the true ones.
struct SynthConfig {
    std::size_t n = 8000;
    std::size_t d = 16;
    std::size_t c = 6;  // findings + the reference label
    std::size_t attribute_count = 3;
    // c - 1 findings, or one value for all; empty selects
    // min(0.4, 1 - 0.07^(1 / (c - 1))) for every finding.
    std::vector<double> prevalence;
    double overlap = 0.2;
    double signal_scale = 8.0;
    double group_bias = 0.0;
    double noise_scale = 1.0;
    // Strength of the +-1 attribute signature added along directions orthogonal
    // to every class direction; 0 makes groups invisible in the features.
    double group_signal = 3.0;
    std::uint64_t seed = 0;
    // Optional marginal over the 2^attribute_count groups; empty selects the
    // default (imbalanced) marginal.
    std::vector<double> group_weights;

    void validate() const;
    std::vector<double> resolved_prevalence() const;
    std::vector<double> resolved_group_weights() const;
};

inline constexpr const char* kReferenceLabel = "no_finding";

// Share of attribute bits at the disadvantaged (0) level.
double disadvantage(std::size_t group_index, const SynthConfig& cfg);

// Sample counts of the eight income x insurance x race groups in a reference
// chest X-ray cohort, indexed by income + 2 * insurance + 4 * race with
// 1 = high / high / white.
const std::vector<double>& reference_group_counts();

Dataset generate(const SynthConfig& cfg);

// Rules that recover the generating bits exactly from the raw attributes.
CohortSpec default_cohort_spec(const SynthConfig& cfg);

}  // namespace fairhead
