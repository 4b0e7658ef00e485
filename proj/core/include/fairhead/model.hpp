#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fairhead/matrix.hpp"
#include "fairhead/objective.hpp"

namespace fairhead {

// y = x W + b, W stored (in x out).
struct DenseLayer {
    MatrixD weight;
    std::vector<double> bias;

    std::size_t in() const noexcept { return weight.rows(); }
    std::size_t out() const noexcept { return weight.cols(); }
    bool operator==(const DenseLayer&) const = default;
};

MatrixD dense_forward(const DenseLayer& layer, const MatrixD& x);

enum class Method { erm, fine_tune, dfr, fair_cb };

std::string method_name(Method m);  // "erm", "finetune", "dfr", "fair-cb"
Method parse_method(const std::string& name);
std::string method_label(Method m);  // report row label: ERM, FINE_TUNE, DFR, FAIR_CB

struct HeadMetadata {
    Method method = Method::erm;
    std::uint64_t seed = 0;
    double learning_rate = 0.0;
    double weight_decay = 0.0;
    std::size_t batch_size = 0;
    std::size_t epochs = 0;
    double alpha = 0.0;
    bool operator==(const HeadMetadata&) const = default;
};

// Linear multi-label classification layer, features (f) -> logits (C).
struct HeadModel {
    DenseLayer layer;
    HeadMetadata meta;
    bool operator==(const HeadModel&) const = default;
};

// Feed-forward feature extractor: each layer is dense + ReLU; the last layer's
// width is the feature width. With no layers the extractor is the identity.
// The ERM head trained alongside it travels with it.
struct ExtractorModel {
    std::size_t input_dim = 0;
    std::vector<DenseLayer> layers;
    HeadModel head;

    std::size_t feature_dim() const noexcept { return layers.empty() ? input_dim : layers.back().out(); }
    bool operator==(const ExtractorModel&) const = default;
};

MatrixD extract_features(const ExtractorModel& m, const MatrixD& x);
MatrixD extract_features(const ExtractorModel& m, const MatrixF& x);

Predictions predict(const HeadModel& h, const MatrixD& features);

// FNV-1a over the raw parameter bytes, for frozen-parameter assertions.
std::uint64_t parameter_checksum(const ExtractorModel& m);

// Model directory: model.json (kind, shapes, metadata, tensor list) plus
// params.bin with every tensor in list order as little-endian binary32.
// Parameters are rounded to 32-bit on save.
void save_head(const HeadModel& h, const std::filesystem::path& dir);
HeadModel load_head(const std::filesystem::path& dir);
void save_extractor(const ExtractorModel& m, const std::filesystem::path& dir);
ExtractorModel load_extractor(const std::filesystem::path& dir);

}  // namespace fairhead
