#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairhead/matrix.hpp"

namespace fairhead {

enum class AttributeKind { numeric, categorical };

// One raw (pre-binarization) attribute. Exactly one of the value vectors is
// populated, selected by kind.
struct AttributeColumn {
    std::string name;
    AttributeKind kind = AttributeKind::numeric;
    std::vector<float> numeric;
    std::vector<std::string> categorical;

    std::size_t size() const noexcept {
        return kind == AttributeKind::numeric ? numeric.size() : categorical.size();
    }
    bool operator==(const AttributeColumn&) const = default;
};

// The sample universe: features (n x d), binary multi-label targets (n x C),
// raw attributes and the unit (study) each sample belongs to. Immutable after
// construction; the constructor enforces every invariant.
class Dataset {
public:
    Dataset() = default;

    // Empty unit_ids means one unit per sample, named by row index.
    Dataset(MatrixF features, MatrixU8 labels, std::vector<std::string> label_names,
            std::vector<AttributeColumn> attributes, std::vector<std::string> unit_ids = {},
            std::optional<std::size_t> reference_class = std::nullopt);

    std::size_t n() const noexcept { return features_.rows(); }
    std::size_t d() const noexcept { return features_.cols(); }
    std::size_t c() const noexcept { return labels_.cols(); }

    const MatrixF& features() const noexcept { return features_; }
    const MatrixU8& labels() const noexcept { return labels_; }
    const std::vector<std::string>& label_names() const noexcept { return label_names_; }
    const std::vector<AttributeColumn>& attributes() const noexcept { return attributes_; }
    const std::vector<std::string>& unit_ids() const noexcept { return unit_ids_; }
    std::optional<std::size_t> reference_class() const noexcept { return reference_class_; }

    std::vector<std::string> attribute_names() const;
    const AttributeColumn& attribute(std::string_view name) const;
    std::size_t label_index(std::string_view name) const;

    // Rows in the given order; unit ids and attributes follow their rows.
    Dataset subset(std::span<const std::size_t> rows) const;

    bool operator==(const Dataset&) const = default;

private:
    MatrixF features_;
    MatrixU8 labels_;
    std::vector<std::string> label_names_;
    std::vector<AttributeColumn> attributes_;
    std::vector<std::string> unit_ids_;
    std::optional<std::size_t> reference_class_;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct Unit {
    std::string id;
    std::vector<std::size_t> rows;
};

// Units restricted to `pool`, in order of first appearance. An empty pool
// span means every row of the dataset.
std::vector<Unit> units_of(const Dataset& d, std::span<const std::size_t> pool = {});

std::vector<std::size_t> all_rows(const Dataset& d);

// Random unit-level partition. round(test_fraction * units) units go to test;
// both sides come back sorted ascending.
DatasetSplit split_by_unit(const Dataset& d, double test_fraction, std::uint64_t seed);

// Directory format: manifest.json, features.bin (f32 LE, row-major),
// labels.bin (u8 0/1, row-major), attributes.csv and optionally splits.csv.
void save_dataset(const Dataset& d, const std::filesystem::path& dir,
                  const std::optional<DatasetSplit>& split = std::nullopt);
Dataset load_dataset(const std::filesystem::path& dir);

// splits.csv: "unit_id,split" with split in {train,test}, one row per unit.
void save_split(const Dataset& d, const DatasetSplit& split, const std::filesystem::path& file);
DatasetSplit load_split(const Dataset& d, const std::filesystem::path& file);

// The split referenced by the manifest's "files" entry, if there is one.
std::optional<DatasetSplit> load_dataset_split(const std::filesystem::path& dir, const Dataset& d);

}  // namespace fairhead
