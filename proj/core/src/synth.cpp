#include "fairhead/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "fairhead/random.hpp"

namespace fairhead {

namespace {

struct AttributeLayout {
    std::string name;
    bool categorical = false;
    double low_min, cut, high_max;  // numeric: low ~ U[low_min, cut), high ~ U[cut, high_max)
};

AttributeLayout layout_for(std::size_t j) {
    switch (j) {
        case 0: return {"income", false, 15000.0, 60000.0, 150000.0};
        case 1: return {"insurance", false, 70.0, 90.0, 99.0};
        case 2: return {"race", true, 0, 0, 0};
        default: return {"sdoh" + std::to_string(j), false, 0.0, 0.5, 1.0};
    }
}

// Unit vectors with pairwise dot product `overlap`: sqrt(1 - rho) e_k + sqrt(rho) u
// over a seeded orthonormal set {e_1..e_C, u}.
struct Directions {
    std::vector<std::vector<double>> cls;
    std::vector<std::vector<double>> attr;
};

Directions class_directions(std::size_t classes, std::size_t attrs, std::size_t dim, double overlap, Rng& rng) {
    std::vector<std::vector<double>> basis;
    while (basis.size() < classes + 1 + attrs) {
        std::vector<double> v(dim);
        for (auto& x : v) x = rng.normal();
        for (const auto& b : basis) {
            const double dot = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
        }
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    const auto& shared = basis[classes];
    Directions dirs{std::vector<std::vector<double>>(classes, std::vector<double>(dim)), {}};
    const double own = std::sqrt(1.0 - overlap), common = std::sqrt(overlap);
    for (std::size_t k = 0; k < classes; ++k)
        for (std::size_t i = 0; i < dim; ++i) dirs.cls[k][i] = own * basis[k][i] + common * shared[i];
    dirs.attr.assign(basis.begin() + static_cast<std::ptrdiff_t>(classes + 1), basis.end());
    return dirs;
}

}  // namespace

const std::vector<double>& reference_group_counts() {
    static const std::vector<double> counts = {
        10650,  // low income, low insurance, non-white
        9666,   // high, low, non-white
        26261,  // low, high, non-white
        5261,   // high, high, non-white
        20638,  // low, low, white
        50499,  // high, low, white
        20308,  // low, high, white
        13214,  // high, high, white
    };
    return counts;
}

void SynthConfig::validate() const {
    if (n == 0) throw Error("synth: n must be positive");
    if (c < 2) throw Error("synth: need at least one finding plus the reference label (c >= 2)");
    if (attribute_count < 1 || attribute_count > 16) throw Error("synth: attribute count must be in 1..16");
    if (d < c + 1) throw Error("synth: d must be at least c + 1 to hold the class directions");
    if (group_signal > 0.0 && d < c + 1 + attribute_count)
        throw Error("synth: d must be at least c + 1 + attrs when group_signal > 0");
    if (!(group_signal >= 0.0)) throw Error("synth: group_signal must be >= 0");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw Error("synth: overlap must lie in [0, 1)");
    if (!(signal_scale > 0.0)) throw Error("synth: signal_scale must be > 0");
    if (!(noise_scale > 0.0)) throw Error("synth: noise_scale must be > 0");
    if (!(group_bias >= 0.0 && group_bias <= 1.0)) throw Error("synth: group bias must lie in [0, 1]");
    const auto prev = resolved_prevalence();
    double none = 1.0;
    for (double p : prev) {
        if (!(p > 0.0 && p < 1.0)) throw Error("synth: prevalences must lie in (0, 1)");
        none *= 1.0 - p;
    }
    if (none < 0.05) throw Error("synth: reference label prevalence " + std::to_string(none) + " is below 0.05");
    const auto weights = resolved_group_weights();
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error("synth: group weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw Error("synth: group weights sum to zero");
}

std::vector<double> SynthConfig::resolved_prevalence() const {
    if (!prevalence.empty()) {
        if (prevalence.size() == 1) return std::vector<double>(c - 1, prevalence[0]);
        if (prevalence.size() != c - 1)
            throw Error("synth: expected " + std::to_string(c - 1) + " prevalences (one per finding), got " +
                        std::to_string(prevalence.size()));
        return prevalence;
    }
    // Near-even prevalence keeps the false-negative side of the penalty from
    // being swamped; the cap keeps the reference label at >= 7% for large c.
    const double pi = std::min(0.4, 1.0 - std::pow(0.07, 1.0 / static_cast<double>(c - 1)));
    std::vector<double> out(c - 1, pi);
    return out;
}

std::vector<double> SynthConfig::resolved_group_weights() const {
    const std::size_t groups = std::size_t{1} << attribute_count;
    if (!group_weights.empty()) {
        if (group_weights.size() != groups)
            throw Error("synth: expected " + std::to_string(groups) + " group weights, got " +
                        std::to_string(group_weights.size()));
        return group_weights;
    }
    if (attribute_count == 3) return reference_group_counts();
    // Independent bits with uneven marginals.
    std::vector<double> out(groups, 1.0);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t j = 0; j < attribute_count; ++j) {
            const double p_high = 0.65 - 0.15 * static_cast<double>(j % 3);
            out[g] *= (g >> j) & 1u ? p_high : 1.0 - p_high;
        }
    return out;
}

double disadvantage(std::size_t group_index, const SynthConfig& cfg) {
    const std::size_t groups = std::size_t{1} << cfg.attribute_count;
    if (group_index >= groups) throw Error("disadvantage: group index out of range");
    const auto high_bits = static_cast<std::size_t>(std::popcount(group_index));
    return static_cast<double>(cfg.attribute_count - high_bits) / static_cast<double>(cfg.attribute_count);
}

Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    const auto prevalence = cfg.resolved_prevalence();
    const auto weights = cfg.resolved_group_weights();
    std::vector<double> cumulative(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    const double total_weight = cumulative.back();

    const std::size_t classes = cfg.c, findings = cfg.c - 1, groups = weights.size();
    Rng dir_rng(derive_seed(cfg.seed, "synth-directions"));
    const std::size_t attr_dirs = cfg.group_signal > 0.0 ? cfg.attribute_count : 0;
    const auto dirs = class_directions(classes, attr_dirs, cfg.d, cfg.overlap, dir_rng);

    std::vector<double> signal(groups), flip(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        const double dis = disadvantage(g, cfg);
        signal[g] = cfg.signal_scale * (1.0 - cfg.group_bias * dis);
        flip[g] = cfg.group_bias / 4.0 * dis;
    }

    std::vector<AttributeLayout> layouts;
    std::vector<AttributeColumn> attrs;
    for (std::size_t j = 0; j < cfg.attribute_count; ++j) {
        layouts.push_back(layout_for(j));
        attrs.push_back({layouts.back().name,
                         layouts.back().categorical ? AttributeKind::categorical : AttributeKind::numeric, {}, {}});
    }

    MatrixF features(cfg.n, cfg.d);
    MatrixU8 labels(cfg.n, classes);
    Rng rng(derive_seed(cfg.seed, "synth-samples"));
    std::vector<double> x(cfg.d);
    std::vector<unsigned char> generative(classes);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double u = rng.uniform() * total_weight;
        std::size_t g = 0;
        while (g + 1 < groups && u >= cumulative[g]) ++g;

        bool any = false;
        for (std::size_t k = 0; k < findings; ++k) {
            labels(i, k) = rng.bernoulli(prevalence[k]) ? 1 : 0;
            any = any || labels(i, k);
        }
        labels(i, findings) = any ? 0 : 1;

        for (std::size_t k = 0; k < classes; ++k) {
            generative[k] = labels(i, k);
            if (rng.bernoulli(flip[g])) generative[k] ^= 1;
        }
        for (std::size_t j = 0; j < cfg.d; ++j) x[j] = cfg.noise_scale * rng.normal();
        for (std::size_t k = 0; k < classes; ++k)
            if (generative[k])
                for (std::size_t j = 0; j < cfg.d; ++j) x[j] += signal[g] * dirs.cls[k][j];
        for (std::size_t a = 0; a < attr_dirs; ++a) {
            const double sign = (g >> a) & 1u ? 1.0 : -1.0;
            for (std::size_t j = 0; j < cfg.d; ++j) x[j] += sign * cfg.group_signal * dirs.attr[a][j];
        }
        for (std::size_t j = 0; j < cfg.d; ++j) features(i, j) = static_cast<float>(x[j]);

        for (std::size_t j = 0; j < cfg.attribute_count; ++j) {
            const bool high = (g >> j) & 1u;
            const auto& lay = layouts[j];
            if (lay.categorical) {
                attrs[j].categorical.emplace_back(high ? "white" : "non-white");
            } else {
                const double v = high ? rng.uniform(lay.cut, lay.high_max) : rng.uniform(lay.low_min, lay.cut);
                // Keep float rounding from pushing a low value onto the cut.
                auto f = static_cast<float>(v);
                if (!high && f >= static_cast<float>(lay.cut)) f = std::nextafter(static_cast<float>(lay.cut), 0.0f);
                if (high && f < static_cast<float>(lay.cut)) f = static_cast<float>(lay.cut);
                attrs[j].numeric.push_back(f);
            }
        }
    }

    std::vector<std::string> names;
    for (std::size_t k = 0; k < findings; ++k) names.push_back("finding_" + std::to_string(k + 1));
    names.emplace_back(kReferenceLabel);
    return Dataset(std::move(features), std::move(labels), std::move(names), std::move(attrs), {}, findings);
}

CohortSpec default_cohort_spec(const SynthConfig& cfg) {
    CohortSpec spec;
    for (std::size_t j = 0; j < cfg.attribute_count; ++j) {
        const auto lay = layout_for(j);
        if (lay.categorical) spec.rules.push_back({lay.name, CategoryRule{{"white"}}});
        else spec.rules.push_back({lay.name, ThresholdRule{static_cast<double>(static_cast<float>(lay.cut))}});
    }
    return spec;
}

}  // namespace fairhead
