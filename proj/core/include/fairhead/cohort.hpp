#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fairhead/dataset.hpp"

namespace fairhead {

// value >= threshold -> 1. An unset threshold is resolved to the median of the
// attribute over a reference row set (usually the training split).
struct ThresholdRule {
    std::optional<double> threshold;
    bool operator==(const ThresholdRule&) const = default;
};

// value in categories -> 1.
struct CategoryRule {
    std::vector<std::string> categories;
    bool operator==(const CategoryRule&) const = default;
};

struct AttributeRule {
    std::string attribute;
    std::variant<ThresholdRule, CategoryRule> rule;
    bool operator==(const AttributeRule&) const = default;
};

// Ordered binarization rules; rule j contributes bit j of the group index, so
// |G| = 2^rules.
struct CohortSpec {
    std::vector<AttributeRule> rules;

    std::size_t group_count() const { return std::size_t{1} << rules.size(); }
    bool operator==(const CohortSpec&) const = default;
};

// JSON: {"rules": [{"attribute": "income", "threshold": 50000},
//                  {"attribute": "insurance", "threshold": "median"},
//                  {"attribute": "race", "categories": ["white"]}]}
CohortSpec parse_cohort_spec(const std::string& json_text);
CohortSpec load_cohort_spec(const std::filesystem::path& file);
std::string cohort_spec_to_json(const CohortSpec& spec);

// Replaces median thresholds with the median of the attribute over `rows`
// (all rows when empty).
CohortSpec resolve_thresholds(const CohortSpec& spec, const Dataset& d, std::span<const std::size_t> rows = {});

struct GroupAssignment {
    std::vector<std::uint32_t> group_index;
    std::size_t group_count = 0;
    std::vector<std::string> bit_order;

    bool member(std::size_t sample, std::size_t group) const { return group_index[sample] == group; }
    bool operator==(const GroupAssignment&) const = default;
};

// Groups every row of `d`. Median thresholds must be resolved first. Throws if
// a unit's samples land in different groups.
GroupAssignment assign_groups(const Dataset& d, const CohortSpec& spec);

// Restricts an assignment to the listed rows (same group_count).
GroupAssignment select_rows(const GroupAssignment& a, std::span<const std::size_t> rows);

struct GroupCount {
    std::size_t group_index = 0;
    std::vector<int> bits;  // bit j = rule j's binarized value
    std::size_t count = 0;
};

std::vector<GroupCount> group_counts(const GroupAssignment& a);

// Human-readable level names: "Low"/"High" for thresholds, "<cats>"/"Non-<cats>"
// for category rules.
std::string level_name(const AttributeRule& rule, int bit);

// CSV with header "group_index,<attribute names>,count".
std::string group_counts_csv(const std::vector<GroupCount>& counts, const CohortSpec& spec);
// Table rendering in the "Low & Low & White & 20,638" style.
std::string group_counts_table(const std::vector<GroupCount>& counts, const CohortSpec& spec);

// Exactly m units per group drawn uniformly without replacement from `pool`
// (all rows when empty); every sample of a drawn unit is returned. Output is
// sorted ascending.
std::vector<std::size_t> balanced_sample(const Dataset& d, const GroupAssignment& a, std::size_t units_per_group,
                                         std::uint64_t seed, std::span<const std::size_t> pool = {});

// `size` units drawn uniformly without replacement, ignoring groups.
std::vector<std::size_t> random_sample(const Dataset& d, std::size_t size, std::uint64_t seed,
                                       std::span<const std::size_t> pool = {});

}  // namespace fairhead
