#include "fairhead/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fairhead/random.hpp"
#include "io_util.hpp"

namespace fairhead {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset::Dataset(MatrixF features, MatrixU8 labels, std::vector<std::string> label_names,
                 std::vector<AttributeColumn> attributes, std::vector<std::string> unit_ids,
                 std::optional<std::size_t> reference_class)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      label_names_(std::move(label_names)),
      attributes_(std::move(attributes)),
      unit_ids_(std::move(unit_ids)),
      reference_class_(reference_class) {
    const std::size_t rows = features_.rows();
    if (labels_.rows() != rows) throw Error("dataset: labels have a different row count than features");
    if (label_names_.size() != labels_.cols()) throw Error("dataset: label_names size does not match label columns");
    for (auto v : labels_.data())
        if (v > 1) throw Error("label not binary");
    for (auto v : features_.data())
        if (!std::isfinite(v)) throw Error("non-finite feature value");

    std::set<std::string> seen;
    for (const auto& name : label_names_)
        if (!seen.insert(name).second) throw Error("duplicate label name: " + name);
    seen.clear();
    for (const auto& col : attributes_) {
        if (!seen.insert(col.name).second) throw Error("duplicate attribute name: " + col.name);
        if (col.size() != rows) throw Error("dataset: attribute '" + col.name + "' has wrong row count");
        if (col.kind == AttributeKind::numeric && !col.categorical.empty())
            throw Error("dataset: numeric attribute '" + col.name + "' carries categorical values");
        if (col.kind == AttributeKind::categorical && !col.numeric.empty())
            throw Error("dataset: categorical attribute '" + col.name + "' carries numeric values");
    }
    if (reference_class_ && *reference_class_ >= labels_.cols())
        throw Error("dataset: reference class index out of range");

    if (unit_ids_.empty()) {
        unit_ids_.reserve(rows);
        for (std::size_t i = 0; i < rows; ++i) unit_ids_.push_back(std::to_string(i));
    }
    if (unit_ids_.size() != rows) throw Error("dataset: unit_ids have wrong row count");
}

std::vector<std::string> Dataset::attribute_names() const {
    std::vector<std::string> names;
    names.reserve(attributes_.size());
    for (const auto& col : attributes_) names.push_back(col.name);
    return names;
}

const AttributeColumn& Dataset::attribute(std::string_view name) const {
    for (const auto& col : attributes_)
        if (col.name == name) return col;
    throw Error("unknown attribute: " + std::string(name));
}

std::size_t Dataset::label_index(std::string_view name) const {
    for (std::size_t k = 0; k < label_names_.size(); ++k)
        if (label_names_[k] == name) return k;
    throw Error("unknown label: " + std::string(name));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<AttributeColumn> attrs;
    for (const auto& col : attributes_) {
        AttributeColumn out{col.name, col.kind, {}, {}};
        for (auto r : rows) {
            if (col.kind == AttributeKind::numeric) out.numeric.push_back(col.numeric.at(r));
            else out.categorical.push_back(col.categorical.at(r));
        }
        attrs.push_back(std::move(out));
    }
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (auto r : rows) ids.push_back(unit_ids_.at(r));
    return Dataset(gather_rows(features_, rows), gather_rows(labels_, rows), label_names_, std::move(attrs),
                   std::move(ids), reference_class_);
}

std::vector<std::size_t> all_rows(const Dataset& d) {
    std::vector<std::size_t> rows(d.n());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

std::vector<Unit> units_of(const Dataset& d, std::span<const std::size_t> pool) {
    std::vector<std::size_t> everything;
    if (pool.empty()) {
        everything = all_rows(d);
        pool = everything;
    }
    std::vector<Unit> units;
    std::unordered_map<std::string, std::size_t> slot;
    for (auto r : pool) {
        if (r >= d.n()) throw Error("row index out of range");
        const auto& id = d.unit_ids()[r];
        auto [it, inserted] = slot.try_emplace(id, units.size());
        if (inserted) units.push_back({id, {}});
        units[it->second].rows.push_back(r);
    }
    return units;
}

DatasetSplit split_by_unit(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (d.n() == 0) throw Error("split_by_unit: dataset is empty");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("split_by_unit: test_fraction must lie in (0,1)");
    auto units = units_of(d);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(units.size())));
    if (n_test == 0 || n_test == units.size())
        throw Error("split_by_unit: test_fraction " + std::to_string(test_fraction) + " leaves one side empty with " +
                    std::to_string(units.size()) + " units");

    std::vector<std::size_t> order(units.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span(order));

    DatasetSplit split;
    for (std::size_t u = 0; u < order.size(); ++u) {
        auto& side = u < n_test ? split.test : split.train;
        const auto& rows = units[order[u]].rows;
        side.insert(side.end(), rows.begin(), rows.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

namespace {

constexpr const char* kManifest = "manifest.json";

std::string attributes_csv(const Dataset& d) {
    std::string out = "unit_id";
    for (const auto& col : d.attributes()) out += "," + detail::csv_field(col.name);
    out += "\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
        out += detail::csv_field(d.unit_ids()[i]);
        for (const auto& col : d.attributes()) {
            out += ",";
            if (col.kind == AttributeKind::numeric) out += detail::format_f32(col.numeric[i]);
            else out += detail::csv_quote(col.categorical[i]);
        }
        out += "\n";
    }
    return out;
}

std::string splits_csv(const Dataset& d, const DatasetSplit& split) {
    std::string out = "unit_id,split\n";
    for (const auto& [side, name] : {std::pair{&split.train, "train"}, std::pair{&split.test, "test"}}) {
        for (const auto& unit : units_of(d, *side)) out += detail::csv_field(unit.id) + "," + name + "\n";
    }
    return out;
}

}  // namespace

void save_dataset(const Dataset& d, const fs::path& dir, const std::optional<DatasetSplit>& split) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());

    json files = {{"features", "features.bin"}, {"labels", "labels.bin"}, {"attributes", "attributes.csv"}};
    if (split) files["splits"] = "splits.csv";

    json manifest = {
        {"n", d.n()},
        {"d", d.d()},
        {"c", d.c()},
        {"label_names", d.label_names()},
        {"attribute_names", d.attribute_names()},
        {"reference_class", d.reference_class() ? json(d.label_names()[*d.reference_class()]) : json(nullptr)},
        {"files", files},
    };
    detail::write_file(dir / kManifest, manifest.dump(2) + "\n");
    detail::write_file(dir / "features.bin", detail::encode_f32_le(d.features().data()));
    const auto& lab = d.labels().data();
    detail::write_file(dir / "labels.bin", std::string_view(reinterpret_cast<const char*>(lab.data()), lab.size()));
    detail::write_file(dir / "attributes.csv", attributes_csv(d));
    if (split) detail::write_file(dir / "splits.csv", splits_csv(d, *split));
}

Dataset load_dataset(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(detail::read_file(dir / kManifest));
    } catch (const json::exception& e) {
        throw Error("malformed manifest in " + dir.string() + ": " + e.what());
    }
    std::size_t n = 0, d = 0, c = 0;
    std::vector<std::string> label_names, attribute_names;
    json files;
    try {
        n = manifest.at("n").get<std::size_t>();
        d = manifest.at("d").get<std::size_t>();
        c = manifest.at("c").get<std::size_t>();
        label_names = manifest.at("label_names").get<std::vector<std::string>>();
        attribute_names = manifest.at("attribute_names").get<std::vector<std::string>>();
        files = manifest.at("files");
    } catch (const json::exception& e) {
        throw Error("manifest in " + dir.string() + " is missing or mistypes a field: " + e.what());
    }
    auto file_for = [&](const char* key) {
        return dir / (files.contains(key) ? files[key].get<std::string>() : std::string(key) + ".bin");
    };

    auto feature_bytes = detail::read_file(file_for("features"));
    if (feature_bytes.size() != n * d * 4)
        throw Error("shape mismatch: features.bin has " + std::to_string(feature_bytes.size()) + " bytes, manifest implies " +
                    std::to_string(n * d * 4));
    MatrixF features(n, d, detail::decode_f32_le(feature_bytes));

    auto label_bytes = detail::read_file(file_for("labels"));
    if (label_bytes.size() != n * c)
        throw Error("shape mismatch: labels.bin has " + std::to_string(label_bytes.size()) + " bytes, manifest implies " +
                    std::to_string(n * c));
    std::vector<unsigned char> label_data(label_bytes.begin(), label_bytes.end());
    MatrixU8 labels(n, c, std::move(label_data));

    const auto attr_path = dir / (files.contains("attributes") ? files["attributes"].get<std::string>() : "attributes.csv");
    auto rows = detail::parse_csv(detail::read_file(attr_path), attr_path.string());
    if (rows.empty()) throw Error(attr_path.string() + ": missing header");
    const auto& header = rows.front().fields;
    if (header.size() != attribute_names.size() + 1 || header[0] != "unit_id")
        throw Error(attr_path.string() + ": header does not match manifest attribute_names");
    for (std::size_t j = 0; j < attribute_names.size(); ++j)
        if (header[j + 1] != attribute_names[j])
            throw Error(attr_path.string() + ": header column '" + header[j + 1] + "' does not match manifest");
    if (rows.size() - 1 != n)
        throw Error("shape mismatch: attributes.csv has " + std::to_string(rows.size() - 1) + " rows, manifest says " +
                    std::to_string(n));

    std::vector<std::string> unit_ids;
    unit_ids.reserve(n);
    std::vector<AttributeColumn> attrs;
    for (std::size_t j = 0; j < attribute_names.size(); ++j) {
        // A column is categorical when its values are quoted.
        bool any_quoted = false, any_bare = false;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].fields.size() != header.size())
                throw Error(attr_path.string() + ": row " + std::to_string(i) + " has the wrong number of fields");
            (rows[i].quoted[j + 1] ? any_quoted : any_bare) = true;
        }
        if (any_quoted && any_bare)
            throw Error(attr_path.string() + ": attribute '" + attribute_names[j] + "' mixes quoted and bare values");
        AttributeColumn col{attribute_names[j], any_quoted ? AttributeKind::categorical : AttributeKind::numeric, {}, {}};
        for (std::size_t i = 1; i < rows.size(); ++i) {
            auto& field = rows[i].fields[j + 1];
            if (any_quoted) col.categorical.push_back(std::move(field));
            else col.numeric.push_back(detail::parse_f32(field, attr_path.string() + " row " + std::to_string(i)));
        }
        attrs.push_back(std::move(col));
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto& id = rows[i].fields[0];
        unit_ids.push_back(id.empty() ? std::to_string(i - 1) : std::move(id));
    }

    std::optional<std::size_t> reference;
    if (manifest.contains("reference_class") && !manifest["reference_class"].is_null()) {
        const auto name = manifest["reference_class"].get<std::string>();
        auto it = std::find(label_names.begin(), label_names.end(), name);
        if (it == label_names.end()) throw Error("reference_class '" + name + "' is not a label name");
        reference = static_cast<std::size_t>(it - label_names.begin());
    }
    if (label_names.size() != c) throw Error("manifest: label_names has " + std::to_string(label_names.size()) +
                                              " entries but c = " + std::to_string(c));

    return Dataset(std::move(features), std::move(labels), std::move(label_names), std::move(attrs), std::move(unit_ids),
                   reference);
}

void save_split(const Dataset& d, const DatasetSplit& split, const fs::path& file) {
    detail::write_file(file, splits_csv(d, split));
}

DatasetSplit load_split(const Dataset& d, const fs::path& file) {
    auto rows = detail::parse_csv(detail::read_file(file), file.string());
    if (rows.empty() || rows[0].fields != std::vector<std::string>{"unit_id", "split"})
        throw Error(file.string() + ": expected header 'unit_id,split'");
    std::unordered_map<std::string, bool> is_test;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        if (f.size() != 2) throw Error(file.string() + ": row " + std::to_string(i) + " must have two fields");
        if (f[1] != "train" && f[1] != "test")
            throw Error(file.string() + ": split must be 'train' or 'test', got '" + f[1] + "'");
        if (!is_test.emplace(f[0], f[1] == "test").second)
            throw Error(file.string() + ": unit '" + f[0] + "' listed twice");
    }
    DatasetSplit split;
    for (std::size_t i = 0; i < d.n(); ++i) {
        auto it = is_test.find(d.unit_ids()[i]);
        if (it == is_test.end()) continue;
        (it->second ? split.test : split.train).push_back(i);
    }
    return split;
}

std::optional<DatasetSplit> load_dataset_split(const fs::path& dir, const Dataset& d) {
    auto manifest = json::parse(detail::read_file(dir / kManifest));
    if (!manifest.contains("files") || !manifest["files"].contains("splits")) return std::nullopt;
    return load_split(d, dir / manifest["files"]["splits"].get<std::string>());
}

}  // namespace fairhead
