#include <doctest.h>

#include <map>
#include <set>

#include "fairhead/cohort.hpp"
#include "fairhead/synth.hpp"
#include "support.hpp"

using namespace fairhead;
using testing::bit_spec;
using testing::grouped_dataset;

namespace {

Dataset attribute_dataset() {
    // income, insurance numeric; race categorical.
    AttributeColumn income{"income", AttributeKind::numeric, {10, 90, 50, 70}, {}};
    AttributeColumn insurance{"insurance", AttributeKind::numeric, {95, 80, 91, 99}, {}};
    AttributeColumn race{"race", AttributeKind::categorical, {}, {"white", "black", "asian", "white"}};
    return Dataset(MatrixF(4, 1), MatrixU8(4, 1), {"none"}, {income, insurance, race});
}

CohortSpec paper_spec(double income_cut, double insurance_cut) {
    return {{{"income", ThresholdRule{income_cut}},
             {"insurance", ThresholdRule{insurance_cut}},
             {"race", CategoryRule{{"white"}}}}};
}

std::vector<int> all_groups(int groups, int per_group) {
    std::vector<int> out;
    for (int g = 0; g < groups; ++g)
        for (int i = 0; i < per_group; ++i) out.push_back(g);
    return out;
}

}  // namespace

TEST_CASE("three rules give eight groups") {
    const auto a = assign_groups(attribute_dataset(), paper_spec(60, 90));
    CHECK(a.group_count == 8);
    CHECK(a.bit_order == std::vector<std::string>{"income", "insurance", "race"});
}

TEST_CASE("bits (0,1,0) map to group 2") {
    // row 0: income 10 (<60 -> 0), insurance 95 (>=90 -> 1), race white -> 1 => 0 + 2 + 4
    // row 2: income 50 -> 0, insurance 91 -> 1, asian -> 0 => 2
    const auto a = assign_groups(attribute_dataset(), paper_spec(60, 90));
    CHECK(a.group_index == std::vector<std::uint32_t>{6, 1, 2, 7});
}

TEST_CASE("threshold is inclusive") {
    const auto a = assign_groups(attribute_dataset(), paper_spec(70, 99));
    CHECK(a.group_index[3] == 7);  // income 70 >= 70, insurance 99 >= 99
}

TEST_CASE("identical samples fill one group") {
    const auto d = grouped_dataset(std::vector<int>(6, 5), 3);
    const auto counts = group_counts(assign_groups(d, bit_spec(3)));
    REQUIRE(counts.size() == 8);
    for (const auto& c : counts) CHECK(c.count == (c.group_index == 5 ? 6u : 0u));
}

TEST_CASE("group_counts example [0,0,1,7]") {
    GroupAssignment a{{0, 0, 1, 7}, 8, {"x", "y", "z"}};
    const auto counts = group_counts(a);
    REQUIRE(counts.size() == 8);
    CHECK(counts[0].count == 2);
    CHECK(counts[1].count == 1);
    CHECK(counts[7].count == 1);
    for (int g : {2, 3, 4, 5, 6}) CHECK(counts[g].count == 0);
    CHECK(counts[6].bits == std::vector<int>{0, 1, 1});

    GroupAssignment empty{{}, 8, {"x", "y", "z"}};
    for (const auto& c : group_counts(empty)) CHECK(c.count == 0);
}

TEST_CASE("decoding group_index reproduces each rule's binarization") {
    const auto d = generate(SynthConfig{});
    const auto spec = default_cohort_spec(SynthConfig{});
    const auto a = assign_groups(d, spec);
    const auto& income = d.attribute("income").numeric;
    const auto& insurance = d.attribute("insurance").numeric;
    const auto& race = d.attribute("race").categorical;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const auto g = a.group_index[i];
        CHECK(((g >> 0) & 1u) == (income[i] >= 60000.0f ? 1u : 0u));
        CHECK(((g >> 1) & 1u) == (insurance[i] >= 90.0f ? 1u : 0u));
        CHECK(((g >> 2) & 1u) == (race[i] == "white" ? 1u : 0u));
    }
}

TEST_CASE("table rendering mirrors level names and thousands separators") {
    GroupAssignment a;
    a.group_count = 8;
    a.bit_order = {"income", "insurance", "race"};
    a.group_index.assign(20638, 4);
    const auto spec = paper_spec(60, 90);
    const auto table = group_counts_table(group_counts(a), spec);
    CHECK(table.find("Low & Low & White & 20,638\n") != std::string::npos);
    CHECK(table.find("High & High & Non-White & 0\n") != std::string::npos);
    CHECK(table.find("Total & & & 20,638\n") != std::string::npos);
    const auto csv = group_counts_csv(group_counts(a), spec);
    CHECK(csv.rfind("group_index,income,insurance,race,count\n", 0) == 0);
    CHECK(csv.find("\n4,Low,Low,White,20638\n") != std::string::npos);
}

TEST_CASE("assign_groups errors") {
    const auto d = attribute_dataset();
    CHECK_THROWS_WITH_AS(assign_groups(d, {{{"zip", ThresholdRule{1.0}}}}), doctest::Contains("unknown attribute"), Error);
    CHECK_THROWS_WITH_AS(assign_groups(d, {{{"race", ThresholdRule{1.0}}}}),
                         doctest::Contains("threshold rule on categorical attribute"), Error);
    CHECK_THROWS_AS(assign_groups(d, {{{"income", ThresholdRule{}}}}), Error);
}

TEST_CASE("units straddling groups are rejected") {
    const auto d = grouped_dataset({0, 1, 1}, 1, {"u", "u", "v"});
    CHECK_THROWS_WITH_AS(assign_groups(d, bit_spec(1)), doctest::Contains("unit 'u'"), Error);
}

TEST_CASE("median thresholds resolve over the given rows") {
    const auto d = attribute_dataset();
    const CohortSpec spec{{{"income", ThresholdRule{}}}};
    const auto resolved = resolve_thresholds(spec, d);
    const auto t = std::get<ThresholdRule>(resolved.rules[0].rule).threshold;
    REQUIRE(t);
    CHECK(*t == doctest::Approx(60.0));  // median of {10, 50, 70, 90}
    const std::vector<std::size_t> rows{0, 1, 2};
    CHECK(*std::get<ThresholdRule>(resolve_thresholds(spec, d, rows).rules[0].rule).threshold == 50.0);
}

TEST_CASE("cohort spec JSON parses and round-trips") {
    const auto spec = parse_cohort_spec(R"({"rules": [{"attribute": "income", "threshold": 50000},
        {"attribute": "insurance", "threshold": "median"}, {"attribute": "race", "categories": ["white"]}]})");
    REQUIRE(spec.rules.size() == 3);
    CHECK(spec.group_count() == 8);
    CHECK(std::get<ThresholdRule>(spec.rules[0].rule).threshold == 50000.0);
    CHECK_FALSE(std::get<ThresholdRule>(spec.rules[1].rule).threshold);
    CHECK(parse_cohort_spec(cohort_spec_to_json(spec)) == spec);
    CHECK_THROWS_AS(parse_cohort_spec(R"({"rules": []})"), Error);
    CHECK_THROWS_AS(parse_cohort_spec("not json"), Error);
    CHECK_THROWS_AS(parse_cohort_spec(R"({"rules": [{"attribute": "x"}]})"), Error);
}

TEST_CASE("balanced_sample: 8 groups of 10, m = 5") {
    const auto d = grouped_dataset(all_groups(8, 10), 3);
    const auto a = assign_groups(d, bit_spec(3));
    const auto rows = balanced_sample(d, a, 5, 42);
    CHECK(rows.size() == 40);
    std::map<std::uint32_t, int> per;
    for (auto r : rows) ++per[a.group_index[r]];
    for (std::uint32_t g = 0; g < 8; ++g) CHECK(per[g] == 5);
    CHECK(std::set<std::size_t>(rows.begin(), rows.end()).size() == rows.size());
}

TEST_CASE("balanced_sample names the deficient group") {
    auto groups = all_groups(8, 10);
    groups.erase(std::find(groups.begin(), groups.end(), 3));  // group 3 has 9 units
    const auto d = grouped_dataset(groups, 3);
    const auto a = assign_groups(d, bit_spec(3));
    CHECK_THROWS_WITH_AS(balanced_sample(d, a, 11, 0), doctest::Contains("group 0 has 10 units"), Error);
    CHECK_THROWS_WITH_AS(balanced_sample(d, a, 10, 0), doctest::Contains("group 3 has 9 units"), Error);
}

TEST_CASE("balanced_sample draws whole units") {
    std::vector<int> groups;
    std::vector<std::string> units;
    for (int g = 0; g < 2; ++g)
        for (int u = 0; u < 6; ++u)
            for (int r = 0; r <= u % 3; ++r) {
                groups.push_back(g);
                units.push_back(std::to_string(g) + "-" + std::to_string(u));
            }
    const auto d = grouped_dataset(groups, 1, units);
    const auto a = assign_groups(d, bit_spec(1));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto rows = balanced_sample(d, a, 4, seed);
        std::map<std::string, int> taken;
        for (auto r : rows) ++taken[units[r]];
        CHECK(taken.size() == 8);
        for (const auto& [u, count] : taken) CHECK(count == std::count(units.begin(), units.end(), u));
    }
}

TEST_CASE("balanced_sample is seed-deterministic and seed-sensitive") {
    const auto d = grouped_dataset(all_groups(8, 30), 3);
    const auto a = assign_groups(d, bit_spec(3));
    std::set<std::vector<std::size_t>> distinct;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rows = balanced_sample(d, a, 10, seed);
        CHECK(rows == balanced_sample(d, a, 10, seed));
        distinct.insert(rows);
    }
    CHECK(distinct.size() == 100);
}

TEST_CASE("balanced_sample respects the pool") {
    const auto d = grouped_dataset(all_groups(2, 10), 1);
    const auto a = assign_groups(d, bit_spec(1));
    const std::vector<std::size_t> pool{0, 2, 4, 6, 8, 10, 12, 14, 16, 18};
    for (auto r : balanced_sample(d, a, 5, 1, pool)) CHECK(r % 2 == 0);
    CHECK_THROWS_AS(balanced_sample(d, a, 6, 1, pool), Error);
}

TEST_CASE("random_sample edge cases") {
    const auto d = grouped_dataset(all_groups(2, 7), 1);
    auto everything = random_sample(d, d.n(), 3);
    CHECK(everything == all_rows(d));
    CHECK(random_sample(d, 0, 3).empty());
    CHECK_THROWS_AS(random_sample(d, d.n() + 1, 3), Error);
    CHECK(random_sample(d, 5, 9) == random_sample(d, 5, 9));
}

TEST_CASE("random_sample group proportions track the population over 1000 seeds") {
    std::vector<int> groups;
    const int sizes[] = {50, 10, 25, 15};
    for (int g = 0; g < 4; ++g)
        for (int i = 0; i < sizes[g]; ++i) groups.push_back(g);
    const auto d = grouped_dataset(groups, 2);
    const auto a = assign_groups(d, bit_spec(2));
    std::vector<double> drawn(4, 0.0);
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
        for (auto r : random_sample(d, 20, seed)) {
            drawn[a.group_index[r]] += 1.0;
            total += 1.0;
        }
    for (int g = 0; g < 4; ++g) CHECK(std::fabs(drawn[g] / total - sizes[g] / 100.0) <= 0.05);
}
