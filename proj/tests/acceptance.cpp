// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fairhead/experiment.hpp"
#include "fairhead/random.hpp"
#include "support.hpp"

using namespace fairhead;

namespace {

// Tolerances.
constexpr double kFdStep = 1e-4;
constexpr double kFdAbs = 1e-6;
constexpr double kFdRel = 1e-4;
constexpr double kKink = 1e-6;
constexpr double kGolden = 1e-12;
constexpr double kIdentity = 1e-12;
constexpr double kInvariance = 1e-12;
constexpr double kAucDrop = 0.05;
constexpr int kReplications = 20;
constexpr int kRequiredPasses = 18;
constexpr std::size_t kTrials = 20;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome gradient_oracle() {
    Rng rng(20240611);
    int checked = 0, bad = 0;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        MatrixD z(16, 3);
        MatrixU8 y(16, 3);
        std::vector<int> g;
        for (std::size_t i = 0; i < 16; ++i) {
            g.push_back(static_cast<int>(rng.below(4)));
            for (std::size_t k = 0; k < 3; ++k) z(i, k) = 3.0 * rng.normal(), y(i, k) = rng.bernoulli(0.4);
        }
        ClassWeights w;
        for (std::size_t k = 0; k < 3; ++k) {
            w.pos_weight.push_back(rng.uniform(0.5, 5.0));
            w.freq_weight.push_back(rng.uniform(0.1, 1.0));
            w.freq_total += w.freq_weight.back();
        }
        const double alpha = rng.uniform(0.1, 5.0);
        const auto groups = testing::assignment(g, 4);
        const auto base = fairness_loss(Predictions::from_logits(z), y, groups, w, alpha);
        bool kink = false;
        for (double v : base.penalty.per_class_group_fpr.data()) kink |= v != 0.0 && v < kKink;
        for (double v : base.penalty.per_class_group_fnr.data()) kink |= v != 0.0 && v < kKink;
        if (kink) continue;
        ++checked;
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t k = 0; k < 3; ++k) {
                auto up = z, down = z;
                up(i, k) += kFdStep;
                down(i, k) -= kFdStep;
                const double fd = (fairness_loss(Predictions::from_logits(up), y, groups, w, alpha).value -
                                   fairness_loss(Predictions::from_logits(down), y, groups, w, alpha).value) /
                                  (2 * kFdStep);
                const double err = std::fabs(fd - base.grad_logits(i, k));
                worst = std::max(worst, err);
                if (err > std::max(kFdAbs, kFdRel * std::fabs(fd))) ++bad;
            }
    }
    return {bad == 0 && checked >= 90,
            std::to_string(checked) + " instances checked, " + std::to_string(bad) + " entries off, max abs err " +
                fmt("%.2e", worst)};
}

Outcome metric_oracles() {
    Rng rng(77);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng.below(63);
        std::vector<double> s(n);
        std::vector<unsigned char> y(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(rng.below(10)) / 10.0, y[i] = rng.bernoulli(0.5);
        y[0] = 1, y[1] = 0;
        if (*auc(s, y) != testing::brute_auc(s, y)) ++mismatches;
    }

    // 8 samples, 2 labels, groups {0-3}, {4-7}; expected values worked by hand.
    MatrixD p(8, 2);
    MatrixU8 yy(8, 2);
    const double p0[] = {0.9, 0.4, 0.6, 0.2, 0.7, 0.8, 0.1, 0.3}, p1[] = {0.5, 0.5, 0.3, 0.1, 0.6, 0.2, 0.9, 0.5};
    const int y0[] = {1, 1, 0, 0, 1, 1, 0, 0}, y1[] = {1, 0, 0, 0, 1, 1, 1, 0};
    for (std::size_t i = 0; i < 8; ++i)
        p(i, 0) = p0[i], p(i, 1) = p1[i], yy(i, 0) = static_cast<unsigned char>(y0[i]),
                yy(i, 1) = static_cast<unsigned char>(y1[i]);
    const auto r = evaluate_predictions(p, yy, testing::assignment({0, 0, 0, 0, 1, 1, 1, 1}, 2), {"a", "b"});
    const bool golden = std::fabs(*r.eo_diff_per_label[0] - 0.5) <= kGolden &&
                        std::fabs(*r.eo_diff_per_label[1] - 2.0 / 3.0) <= kGolden &&
                        std::fabs(*r.wacc_per_label[0] - 0.75) <= kGolden &&
                        std::fabs(*r.wacc_per_label[1] - 0.625) <= kGolden &&
                        std::fabs(r.eo_diff_avg - 7.0 / 12.0) <= kGolden && std::fabs(r.wacc_avg - 0.6875) <= kGolden &&
                        std::fabs(r.auc_avg - 0.84375) <= kGolden;
    return {mismatches == 0 && golden, std::to_string(mismatches) + "/1000 AUC mismatches, golden fixture " +
                                           (golden ? "matches" : "differs")};
}

Outcome formula_exactness() {
    const std::vector<std::size_t> counts{25, 100};
    const auto p = class_pos_weights(counts, 1);
    const std::vector<std::size_t> nk{20};
    const auto w = class_freq_weights(nk, 100);
    const std::vector<std::size_t> three{50, 50, 10};
    const auto p3 = class_pos_weights(three, 0);
    const auto w3 = class_freq_weights(std::vector<std::size_t>{0, 50, 100}, 100);
    const bool ok = p[0] == 4.0 && p[1] == 1.0 && w.weight[0] == 0.8 && w.total == 0.8 &&
                    p3 == std::vector<double>{1.0, 1.0, 5.0} && w3.weight == std::vector<double>{1.0, 0.5, 0.0} &&
                    w3.total == 1.5;
    return {ok, "p = " + fmt("%.17g", p[0]) + ", w = " + fmt("%.17g", w.weight[0])};
}

Outcome af_identity() {
    const double erm = accuracy_fairness(0.6438, 0.4243), ft = accuracy_fairness(0.6292, 0.3811);
    const double dfr = accuracy_fairness(0.6526, 0.3677);
    const bool ok = std::fabs(erm - 0.2195) <= kIdentity && std::fabs(ft - 0.2481) <= kIdentity;
    return {ok, "ERM " + fmt("%.4f", erm) + ", fine-tuning " + fmt("%.4f", ft) + "; DFR row excluded (computes " +
                    fmt("%.4f", dfr) + ", printed 0.2579)"};
}

Outcome symmetry_suite() {
    Rng rng(9);
    std::string failures;
    // Each group holds the same (logit, label) multiset.
    MatrixD z(16, 3);
    MatrixU8 y(16, 3);
    std::vector<int> g;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 3; ++k) z(i, k) = rng.normal(), y(i, k) = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < 16; ++i) {
        g.push_back(static_cast<int>(i / 4));
        for (std::size_t k = 0; k < 3; ++k) z(i, k) = z(i % 4, k), y(i, k) = y(i % 4, k);
    }
    for (std::size_t k = 0; k < 3; ++k) y(0, k) = y(4, k) = y(8, k) = y(12, k) = 1, y(1, k) = y(5, k) = y(9, k) = y(13, k) = 0;
    const auto groups = testing::assignment(g, 4);
    const auto gaps = soft_rate_gaps(Predictions::from_logits(z), y, groups);
    // In-group and out-group sums run in different orders, so zero means rounding-level.
    const auto zero = [](const MatrixD& m) {
        return std::all_of(m.data().begin(), m.data().end(), [](double v) { return v <= kInvariance; });
    };
    if (!zero(gaps.fpr) || !zero(gaps.fnr)) failures += " identical-groups gaps";
    const auto report = evaluate_predictions(Predictions::from_logits(z).probs, y, groups, {"a", "b", "c"});
    if (report.eo_diff_avg != 0.0) failures += " identical-groups EO";

    ClassWeights w{{1.0, 2.0, 3.0}, {0.5, 0.3, 0.9}, 1.7, {}};
    const auto single = fairness_loss(Predictions::from_logits(z), y, testing::assignment(std::vector<int>(16, 0), 1), w, 5.0);
    if (single.penalty.aggregated_fpr != 0.0 || single.penalty.aggregated_fnr != 0.0 || single.value != single.bce)
        failures += " single-group";

    for (int t = 0; t < 50; ++t) {
        MatrixD zr(16, 3);
        MatrixU8 yr(16, 3);
        std::vector<int> gr;
        for (std::size_t i = 0; i < 16; ++i) {
            gr.push_back(static_cast<int>(rng.below(4)));
            for (std::size_t k = 0; k < 3; ++k) zr(i, k) = 2 * rng.normal(), yr(i, k) = rng.bernoulli(0.4);
        }
        const auto base = fairness_loss(Predictions::from_logits(zr), yr, testing::assignment(gr, 4), w, 2.0);
        std::vector<std::size_t> order(16);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        std::vector<int> gp;
        for (auto i : order) gp.push_back(gr[i]);
        const auto perm = fairness_loss(Predictions::from_logits(gather_rows(zr, order)), gather_rows(yr, order),
                                        testing::assignment(gp, 4), w, 2.0);
        std::vector<int> relabel{2, 0, 3, 1}, gl;
        for (int v : gr) gl.push_back(relabel[static_cast<std::size_t>(v)]);
        const auto rel = fairness_loss(Predictions::from_logits(zr), yr, testing::assignment(gl, 4), w, 2.0);
        if (std::fabs(base.value - perm.value) > kInvariance || std::fabs(base.value - rel.value) > kInvariance) {
            failures += " invariance(instance " + std::to_string(t) + ")";
            break;
        }
    }
    return {failures.empty(), failures.empty() ? "identical groups, single group, 50 permutation/relabel instances"
                                               : "failed:" + failures};
}

Outcome sampler_contract() {
    auto cfg = ExperimentConfig::desk_defaults();
    const auto& synth = std::get<SynthConfig>(cfg.data);
    const auto d = generate(synth);
    const auto split = split_by_unit(d, cfg.test_fraction, derive_seed(cfg.base_seed, "split"));
    const auto groups = assign_groups(d, default_cohort_spec(synth));
    const std::size_t m = cfg.finetune.units_per_group;
    int bad_balanced = 0, bad_random = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rows = balanced_sample(d, groups, m, seed, split.train);
        std::vector<std::size_t> per_group(groups.group_count, 0);
        for (const auto& u : units_of(d, rows)) ++per_group[groups.group_index[u.rows.front()]];
        if (std::any_of(per_group.begin(), per_group.end(), [&](std::size_t c) { return c != m; })) ++bad_balanced;
        if (units_of(d, random_sample(d, groups.group_count * m, seed, split.train)).size() != groups.group_count * m)
            ++bad_random;
    }
    cfg.trials = 3;
    int bad_records = 0;
    for (const auto& r : run_experiment(cfg).trials)
        if (r.method != Method::erm && r.sample_units != groups.group_count * m) ++bad_records;
    return {bad_balanced == 0 && bad_random == 0 && bad_records == 0 && groups.group_count == 8,
            std::to_string(100 - bad_balanced) + "/100 balanced draws exact, " + std::to_string(100 - bad_random) +
                "/100 random draws at budget " + std::to_string(groups.group_count * m) + ", " +
                std::to_string(bad_records) + " trial records off budget"};
}

Outcome qualitative() {
    int passes = 0;
    std::string failed;
    for (int b = 0; b < kReplications; ++b) {
        auto cfg = ExperimentConfig::desk_defaults();
        auto& s = std::get<SynthConfig>(cfg.data);
        s.group_bias = 0.8;
        s.seed = static_cast<std::uint64_t>(b);
        cfg.base_seed = 1000 * static_cast<std::uint64_t>(b);
        cfg.trials = kTrials;
        const auto r = run_experiment(cfg);
        const auto &erm = r.of(Method::erm), &ft = r.of(Method::fine_tune), &dfr = r.of(Method::dfr),
                   &fair = r.of(Method::fair_cb);
        const bool order = fair.eo_diff.mean < dfr.eo_diff.mean && dfr.eo_diff.mean < erm.eo_diff.mean;
        const bool af = fair.af.mean > erm.af.mean && fair.af.mean > ft.af.mean && fair.af.mean > dfr.af.mean;
        const bool auc = fair.auc.mean >= erm.auc.mean - kAucDrop;
        if (order && af && auc) ++passes;
        else failed += " " + std::to_string(b);
    }
    return {passes >= kRequiredPasses, std::to_string(passes) + "/" + std::to_string(kReplications) +
                                           " replications pass (need " + std::to_string(kRequiredPasses) + ")" +
                                           (failed.empty() ? "" : "; failing base seeds:" + failed)};
}

Outcome determinism() {
    auto cfg = ExperimentConfig::desk_defaults();
    std::get<SynthConfig>(cfg.data).group_bias = 0.8;
    cfg.trials = kTrials;
    const auto a = run_experiment(cfg), b = run_experiment(cfg), c = run_experiment(cfg, 4);
    bool same = true;
    for (auto f : {ReportFormat::csv, ReportFormat::json}) {
        const auto ra = format_report(a, f);
        same = same && ra == format_report(b, f) && ra == format_report(c, f);
    }
    return {same, same ? "repeat and 4-worker reports byte-identical (csv, json)" : "reports differ"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient-oracle", gradient_oracle},   {"metric-oracles", metric_oracles},
        {"formula-exactness", formula_exactness}, {"af-identity", af_identity},
        {"symmetry-suite", symmetry_suite},     {"sampler-contract", sampler_contract},
        {"qualitative-reproduction", qualitative}, {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %-26s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
