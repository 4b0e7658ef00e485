#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fairhead/cohort.hpp"
#include "fairhead/dataset.hpp"
#include "fairhead/model.hpp"
#include "fairhead/objective.hpp"

namespace fairhead {

struct ExtractorConfig {
    // Dense+ReLU layer widths; the last one is the feature width. Empty means
    // identity features.
    std::vector<std::size_t> layer_widths{64, 32};
    bool zero_init_head = false;
};

struct TrainConfig {
    Method method = Method::erm;
    double learning_rate = 1e-4;
    double weight_decay = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 3;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    std::size_t units_per_group = 100;
    // FINE_TUNE draw size in units; unset means group_count * units_per_group.
    std::optional<std::size_t> sample_budget;

    // Image-scale settings: Adam lr 1e-4, wd 1e-4, batch 32, three epochs.
    static TrainConfig paper_pretrain();
    // lr 5e-5, wd 1e-3, batch 32, one epoch, alpha 1.
    static TrainConfig paper_finetune(Method m);

    void validate() const;
};

// Per-epoch mini-batch losses, for progress checks.
struct TrainLog {
    std::vector<std::vector<double>> batch_loss;
};

// Layers use seeded He-uniform weights and zero biases; the head uses
// uniform(+-1/sqrt(f)) weights and zero biases.
ExtractorModel init_extractor(std::size_t input_dim, std::size_t classes, const ExtractorConfig& arch, std::uint64_t seed);
HeadModel init_head(std::size_t feature_dim, std::size_t classes, std::uint64_t seed);

// Jointly trains extractor and head on `rows` of `d` by minimizing the
// class-weighted BCE; p_k comes from those rows and d's reference class.
ExtractorModel pretrain_extractor(const Dataset& d, std::span<const std::size_t> rows, const ExtractorConfig& arch,
                                  const TrainConfig& cfg, TrainLog* log = nullptr);

// Trains a freshly initialized head on frozen features. FINE_TUNE and DFR use
// the weighted BCE, FAIR_CB the fairness loss with cfg.alpha. `groups` gives
// each feature row's group.
HeadModel finetune_head(const MatrixD& features, const MatrixU8& labels, const GroupAssignment& groups,
                        const ClassWeights& weights, const TrainConfig& cfg, TrainLog* log = nullptr);

}  // namespace fairhead
