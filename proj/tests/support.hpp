#pragma once

// Shared fixtures and independent reference implementations. The oracles are
// written from the textbook definitions with plain loops and deliberately
// share no code with the library.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "fairhead/cohort.hpp"
#include "fairhead/dataset.hpp"
#include "fairhead/matrix.hpp"

namespace testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("fairhead-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

// Pairwise definition: P(pos > neg) + P(tie) / 2 over all pairs.
inline double brute_auc(const std::vector<double>& s, const std::vector<unsigned char>& y) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1.0;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

inline double naive_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Class-weighted BCE written with log(sigmoid) directly, averaged over rows.
inline double naive_bce(const fairhead::MatrixD& z, const fairhead::MatrixU8& y, const std::vector<double>& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t k = 0; k < z.cols(); ++k) {
            const double yhat = naive_sigmoid(z(i, k));
            total += y(i, k) ? -p[k] * std::log(yhat) : -std::log(1.0 - yhat);
        }
    return total / static_cast<double>(z.rows());
}

struct NaiveGaps {
    std::vector<std::vector<double>> fpr, fnr;  // [k][g], signed
};

// One-vs-rest differences of group-size-normalized error mass.
inline NaiveGaps naive_gaps(const fairhead::MatrixD& z, const fairhead::MatrixU8& y, const std::vector<int>& group,
                            int groups) {
    const std::size_t n = z.rows(), c = z.cols();
    NaiveGaps out{std::vector<std::vector<double>>(c, std::vector<double>(groups, 0.0)),
                  std::vector<std::vector<double>>(c, std::vector<double>(groups, 0.0))};
    for (int g = 0; g < groups; ++g) {
        double in_n = 0, out_n = 0;
        for (std::size_t i = 0; i < n; ++i) (group[i] == g ? in_n : out_n) += 1.0;
        if (in_n == 0 || out_n == 0) continue;
        for (std::size_t k = 0; k < c; ++k) {
            double fp_in = 0, fp_out = 0, fn_in = 0, fn_out = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double yhat = naive_sigmoid(z(i, k));
                const double fp = yhat * (1 - y(i, k)), fn = (1 - yhat) * y(i, k);
                if (group[i] == g) fp_in += fp, fn_in += fn;
                else fp_out += fp, fn_out += fn;
            }
            out.fpr[k][g] = fp_in / in_n - fp_out / out_n;
            out.fnr[k][g] = fn_in / in_n - fn_out / out_n;
        }
    }
    return out;
}

inline double naive_fairness_loss(const fairhead::MatrixD& z, const fairhead::MatrixU8& y,
                                  const std::vector<int>& group, int groups, const std::vector<double>& p,
                                  const std::vector<double>& w, double alpha) {
    const auto gaps = naive_gaps(z, y, group, groups);
    double W = 0;
    for (double x : w) W += x;
    double fpr = 0, fnr = 0;
    for (int g = 0; g < groups; ++g)
        for (std::size_t k = 0; k < w.size(); ++k) {
            fpr += w[k] * std::fabs(gaps.fpr[k][g]) / W;
            fnr += w[k] * std::fabs(gaps.fnr[k][g]) / W;
        }
    return naive_bce(z, y, p) + alpha * (fpr + fnr) / groups;
}

inline fairhead::GroupAssignment assignment(const std::vector<int>& group, int groups) {
    fairhead::GroupAssignment a;
    a.group_count = static_cast<std::size_t>(groups);
    for (int g : group) a.group_index.push_back(static_cast<std::uint32_t>(g));
    return a;
}

// n single-sample units, one numeric attribute "a" per rule bit and d = 2
// features; group of row i is groups_of[i].
inline fairhead::Dataset grouped_dataset(const std::vector<int>& groups_of, std::size_t bits,
                                         std::vector<std::string> unit_ids = {}) {
    const std::size_t n = groups_of.size();
    fairhead::MatrixF x(n, 2);
    fairhead::MatrixU8 y(n, 2);
    std::vector<fairhead::AttributeColumn> attrs;
    for (std::size_t b = 0; b < bits; ++b) {
        fairhead::AttributeColumn col{"a" + std::to_string(b), fairhead::AttributeKind::numeric, {}, {}};
        for (std::size_t i = 0; i < n; ++i) col.numeric.push_back(static_cast<float>((groups_of[i] >> b) & 1));
        attrs.push_back(std::move(col));
    }
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = static_cast<float>(i);
        y(i, i % 2) = 1;
    }
    return fairhead::Dataset(std::move(x), std::move(y), {"finding", "none"}, std::move(attrs), std::move(unit_ids), 1);
}

inline fairhead::CohortSpec bit_spec(std::size_t bits) {
    fairhead::CohortSpec spec;
    for (std::size_t b = 0; b < bits; ++b) spec.rules.push_back({"a" + std::to_string(b), fairhead::ThresholdRule{0.5}});
    return spec;
}

}  // namespace testing
