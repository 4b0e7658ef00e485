#include "fairhead/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fairhead/random.hpp"
#include "io_util.hpp"

namespace fairhead {

using nlohmann::json;

CohortSpec parse_cohort_spec(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("cohort spec: malformed JSON: ") + e.what());
    }
    if (!doc.contains("rules") || !doc["rules"].is_array()) throw Error("cohort spec: expected a 'rules' array");
    CohortSpec spec;
    for (const auto& r : doc["rules"]) {
        if (!r.contains("attribute") || !r["attribute"].is_string()) throw Error("cohort spec: rule without 'attribute'");
        AttributeRule rule{r["attribute"].get<std::string>(), ThresholdRule{}};
        if (r.contains("categories")) {
            rule.rule = CategoryRule{r["categories"].get<std::vector<std::string>>()};
        } else if (r.contains("threshold")) {
            const auto& t = r["threshold"];
            if (t.is_number()) rule.rule = ThresholdRule{t.get<double>()};
            else if (t.is_null() || (t.is_string() && t.get<std::string>() == "median")) rule.rule = ThresholdRule{};
            else throw Error("cohort spec: threshold for '" + rule.attribute + "' must be a number or \"median\"");
        } else {
            throw Error("cohort spec: rule for '" + rule.attribute + "' needs 'threshold' or 'categories'");
        }
        spec.rules.push_back(std::move(rule));
    }
    if (spec.rules.empty()) throw Error("cohort spec: at least one rule is required");
    if (spec.rules.size() > 20) throw Error("cohort spec: too many rules");
    return spec;
}

CohortSpec load_cohort_spec(const std::filesystem::path& file) {
    return parse_cohort_spec(detail::read_file(file));
}

std::string cohort_spec_to_json(const CohortSpec& spec) {
    json rules = json::array();
    for (const auto& r : spec.rules) {
        json j = {{"attribute", r.attribute}};
        if (const auto* t = std::get_if<ThresholdRule>(&r.rule)) {
            j["threshold"] = t->threshold ? json(*t->threshold) : json("median");
        } else {
            j["categories"] = std::get<CategoryRule>(r.rule).categories;
        }
        rules.push_back(std::move(j));
    }
    return json({{"rules", rules}}).dump(2);
}

CohortSpec resolve_thresholds(const CohortSpec& spec, const Dataset& d, std::span<const std::size_t> rows) {
    CohortSpec out = spec;
    for (auto& rule : out.rules) {
        auto* t = std::get_if<ThresholdRule>(&rule.rule);
        if (!t || t->threshold) continue;
        const auto& col = d.attribute(rule.attribute);
        if (col.kind != AttributeKind::numeric)
            throw Error("threshold rule on categorical attribute: " + rule.attribute);
        std::vector<double> values;
        if (rows.empty()) values.assign(col.numeric.begin(), col.numeric.end());
        else
            for (auto r : rows) values.push_back(col.numeric.at(r));
        if (values.empty()) throw Error("cannot take the median of '" + rule.attribute + "' over zero rows");
        std::sort(values.begin(), values.end());
        const auto mid = values.size() / 2;
        t->threshold = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    }
    return out;
}

GroupAssignment assign_groups(const Dataset& d, const CohortSpec& spec) {
    if (spec.rules.empty()) throw Error("cohort spec has no rules");
    GroupAssignment a;
    a.group_count = spec.group_count();
    a.group_index.assign(d.n(), 0);
    for (std::size_t j = 0; j < spec.rules.size(); ++j) {
        const auto& rule = spec.rules[j];
        const auto& col = d.attribute(rule.attribute);
        a.bit_order.push_back(rule.attribute);
        const std::uint32_t bit = 1u << j;
        if (const auto* t = std::get_if<ThresholdRule>(&rule.rule)) {
            if (col.kind != AttributeKind::numeric)
                throw Error("threshold rule on categorical attribute: " + rule.attribute);
            if (!t->threshold) throw Error("median threshold for '" + rule.attribute + "' has not been resolved");
            for (std::size_t i = 0; i < d.n(); ++i)
                if (static_cast<double>(col.numeric[i]) >= *t->threshold) a.group_index[i] |= bit;
        } else {
            const auto& cats = std::get<CategoryRule>(rule.rule).categories;
            for (std::size_t i = 0; i < d.n(); ++i) {
                bool in = false;
                if (col.kind == AttributeKind::categorical) {
                    in = std::find(cats.begin(), cats.end(), col.categorical[i]) != cats.end();
                } else {
                    const auto text = detail::format_f32(col.numeric[i]);
                    in = std::find(cats.begin(), cats.end(), text) != cats.end();
                }
                if (in) a.group_index[i] |= bit;
            }
        }
    }
    std::unordered_map<std::string, std::uint32_t> unit_group;
    for (std::size_t i = 0; i < d.n(); ++i) {
        auto [it, inserted] = unit_group.try_emplace(d.unit_ids()[i], a.group_index[i]);
        if (!inserted && it->second != a.group_index[i])
            throw Error("unit '" + d.unit_ids()[i] + "' has samples in groups " + std::to_string(it->second) + " and " +
                        std::to_string(a.group_index[i]));
    }
    return a;
}

GroupAssignment select_rows(const GroupAssignment& a, std::span<const std::size_t> rows) {
    GroupAssignment out{{}, a.group_count, a.bit_order};
    out.group_index.reserve(rows.size());
    for (auto r : rows) out.group_index.push_back(a.group_index.at(r));
    return out;
}

std::vector<GroupCount> group_counts(const GroupAssignment& a) {
    std::vector<GroupCount> out(a.group_count);
    const std::size_t bits = a.bit_order.size();
    for (std::size_t g = 0; g < a.group_count; ++g) {
        out[g].group_index = g;
        for (std::size_t j = 0; j < bits; ++j) out[g].bits.push_back(static_cast<int>((g >> j) & 1u));
    }
    for (auto g : a.group_index) ++out.at(g).count;
    return out;
}

std::string level_name(const AttributeRule& rule, int bit) {
    if (std::holds_alternative<ThresholdRule>(rule.rule)) return bit ? "High" : "Low";
    std::string cats;
    for (const auto& c : std::get<CategoryRule>(rule.rule).categories) cats += (cats.empty() ? "" : "|") + c;
    if (!cats.empty()) cats[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cats[0])));
    return bit ? cats : "Non-" + cats;
}

std::string group_counts_csv(const std::vector<GroupCount>& counts, const CohortSpec& spec) {
    std::string out = "group_index";
    for (const auto& r : spec.rules) out += "," + detail::csv_field(r.attribute);
    out += ",count\n";
    for (const auto& row : counts) {
        out += std::to_string(row.group_index);
        for (std::size_t j = 0; j < spec.rules.size(); ++j) out += "," + detail::csv_field(level_name(spec.rules[j], row.bits[j]));
        out += "," + std::to_string(row.count) + "\n";
    }
    return out;
}

namespace {

std::string thousands(std::size_t v) {
    auto s = std::to_string(v);
    for (int pos = static_cast<int>(s.size()) - 3; pos > 0; pos -= 3) s.insert(static_cast<std::size_t>(pos), ",");
    return s;
}

}  // namespace

std::string group_counts_table(const std::vector<GroupCount>& counts, const CohortSpec& spec) {
    std::string out;
    for (const auto& r : spec.rules) out += r.attribute + " & ";
    out += "No. Samples\n";
    std::size_t total = 0;
    for (const auto& row : counts) {
        for (std::size_t j = 0; j < spec.rules.size(); ++j) out += level_name(spec.rules[j], row.bits[j]) + " & ";
        out += thousands(row.count) + "\n";
        total += row.count;
    }
    out += "Total & ";
    for (std::size_t j = 1; j < spec.rules.size(); ++j) out += "& ";
    out += thousands(total) + "\n";
    return out;
}

std::vector<std::size_t> balanced_sample(const Dataset& d, const GroupAssignment& a, std::size_t units_per_group,
                                         std::uint64_t seed, std::span<const std::size_t> pool) {
    if (a.group_index.size() != d.n()) throw Error("balanced_sample: assignment does not cover the dataset");
    const auto units = units_of(d, pool);
    std::vector<std::vector<std::size_t>> by_group(a.group_count);
    for (std::size_t u = 0; u < units.size(); ++u) by_group[a.group_index[units[u].rows.front()]].push_back(u);

    for (std::size_t g = 0; g < a.group_count; ++g)
        if (by_group[g].size() < units_per_group)
            throw Error("balanced_sample: group " + std::to_string(g) + " has " + std::to_string(by_group[g].size()) +
                        " units, fewer than the " + std::to_string(units_per_group) + " requested");

    Rng rng(seed);
    std::vector<std::size_t> out;
    for (auto& members : by_group) {
        // Partial Fisher-Yates: the first m slots become the draw.
        for (std::size_t i = 0; i < units_per_group; ++i) {
            auto j = i + static_cast<std::size_t>(rng.below(members.size() - i));
            std::swap(members[i], members[j]);
            const auto& rows = units[members[i]].rows;
            out.insert(out.end(), rows.begin(), rows.end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> random_sample(const Dataset& d, std::size_t size, std::uint64_t seed,
                                       std::span<const std::size_t> pool) {
    const auto units = units_of(d, pool);
    if (size > units.size())
        throw Error("random_sample: requested " + std::to_string(size) + " units but only " + std::to_string(units.size()) +
                    " are available");
    std::vector<std::size_t> order(units.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size; ++i) {
        auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
        const auto& rows = units[order[i]].rows;
        out.insert(out.end(), rows.begin(), rows.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace fairhead
