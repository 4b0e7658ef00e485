#include "fairhead/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

namespace fairhead {

using nlohmann::json;

std::optional<double> auc(std::span<const double> scores, std::span<const unsigned char> labels) {
    if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (auto y : labels) pos += y ? 1 : 0;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positive midranks; ranks are 1-based and ties share the average.
    double rank_sum = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start;
        while (end < n && scores[order[end]] == scores[order[start]]) ++end;
        const double midrank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t i = start; i < end; ++i)
            if (labels[order[i]]) rank_sum += midrank;
        start = end;
    }
    const double np = static_cast<double>(pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

std::optional<double> HardRates::tpr(std::size_t k, std::size_t g) const {
    if (positives(k, g) == 0) return std::nullopt;
    return static_cast<double>(true_pos(k, g)) / static_cast<double>(positives(k, g));
}

std::optional<double> HardRates::fpr(std::size_t k, std::size_t g) const {
    if (negatives(k, g) == 0) return std::nullopt;
    return static_cast<double>(false_pos(k, g)) / static_cast<double>(negatives(k, g));
}

HardRates hard_rates(const MatrixD& probs, const MatrixU8& labels, const GroupAssignment& groups, double threshold) {
    if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
        throw Error("hard_rates: probs and labels differ in shape");
    if (groups.group_index.size() != labels.rows()) throw Error("hard_rates: group assignment does not match rows");
    const std::size_t classes = labels.cols(), count = groups.group_count;
    HardRates r{threshold, Matrix<std::size_t>(classes, count), Matrix<std::size_t>(classes, count),
                Matrix<std::size_t>(classes, count), Matrix<std::size_t>(classes, count)};
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        const auto g = groups.group_index[i];
        for (std::size_t k = 0; k < classes; ++k) {
            const bool predicted = probs(i, k) >= threshold;
            if (labels(i, k)) {
                ++r.positives(k, g);
                if (predicted) ++r.true_pos(k, g);
            } else {
                ++r.negatives(k, g);
                if (predicted) ++r.false_pos(k, g);
            }
        }
    }
    return r;
}

namespace {

void finish_average(PerLabelMetric& m) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& v : m.per_label) {
        if (!v) continue;
        sum += *v;
        ++count;
    }
    if (count > 0) m.average = sum / static_cast<double>(count);
}

std::vector<double> column(const MatrixD& m, std::size_t k) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, k);
    return out;
}

std::vector<unsigned char> column(const MatrixU8& m, std::size_t k) {
    std::vector<unsigned char> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, k);
    return out;
}

}  // namespace

PerLabelMetric eo_diff(const HardRates& rates) {
    PerLabelMetric m;
    for (std::size_t k = 0; k < rates.classes(); ++k) {
        std::vector<double> tprs, fprs;
        for (std::size_t g = 0; g < rates.groups(); ++g) {
            if (auto t = rates.tpr(k, g)) tprs.push_back(*t);
            if (auto f = rates.fpr(k, g)) fprs.push_back(*f);
        }
        if (tprs.size() < 2 || fprs.size() < 2) {
            m.per_label.push_back(std::nullopt);
            m.excluded.push_back({"eo_diff", k,
                                  "fewer than two groups with defined " + std::string(tprs.size() < 2 ? "tpr" : "fpr")});
            continue;
        }
        const auto [tmin, tmax] = std::minmax_element(tprs.begin(), tprs.end());
        const auto [fmin, fmax] = std::minmax_element(fprs.begin(), fprs.end());
        m.per_label.push_back(std::max(*tmax - *tmin, *fmax - *fmin));
    }
    finish_average(m);
    return m;
}

PerLabelMetric wacc(const MatrixD& probs, const MatrixU8& labels, double threshold) {
    if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
        throw Error("wacc: probs and labels differ in shape");
    PerLabelMetric m;
    for (std::size_t k = 0; k < labels.cols(); ++k) {
        std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
        for (std::size_t i = 0; i < labels.rows(); ++i) {
            const bool predicted = probs(i, k) >= threshold;
            if (labels(i, k)) {
                ++pos;
                tp += predicted ? 1 : 0;
            } else {
                ++neg;
                tn += predicted ? 0 : 1;
            }
        }
        if (pos == 0 || neg == 0) {
            m.per_label.push_back(std::nullopt);
            m.excluded.push_back({"wacc", k, pos == 0 ? "no positives" : "no negatives"});
            continue;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        const double tnr = static_cast<double>(tn) / static_cast<double>(neg);
        m.per_label.push_back((tpr + tnr) / 2.0);
    }
    finish_average(m);
    return m;
}

PerLabelMetric auc_per_label(const MatrixD& probs, const MatrixU8& labels) {
    if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
        throw Error("auc: probs and labels differ in shape");
    PerLabelMetric m;
    for (std::size_t k = 0; k < labels.cols(); ++k) {
        const auto scores = column(probs, k);
        const auto ys = column(labels, k);
        auto value = auc(scores, ys);
        if (!value) m.excluded.push_back({"auc", k, "single-class label column"});
        m.per_label.push_back(value);
    }
    finish_average(m);
    return m;
}

EvaluationReport evaluate_predictions(const MatrixD& probs, const MatrixU8& labels, const GroupAssignment& groups,
                                      std::vector<std::string> label_names, double threshold) {
    if (labels.rows() == 0) throw Error("evaluate: the test set is empty");
    if (label_names.size() != labels.cols()) throw Error("evaluate: label_names do not match label columns");
    auto a = auc_per_label(probs, labels);
    auto w = wacc(probs, labels, threshold);
    auto rates = hard_rates(probs, labels, groups, threshold);
    auto e = eo_diff(rates);
    if (!a.average) throw Error("evaluate: every label is excluded for metric auc");
    if (!w.average) throw Error("evaluate: every label is excluded for metric wacc");
    if (!e.average) throw Error("evaluate: every label is excluded for metric eo_diff");

    EvaluationReport r;
    r.label_names = std::move(label_names);
    r.auc_per_label = std::move(a.per_label);
    r.auc_avg = *a.average;
    r.wacc_per_label = std::move(w.per_label);
    r.wacc_avg = *w.average;
    r.eo_diff_per_label = std::move(e.per_label);
    r.eo_diff_avg = *e.average;
    r.af_avg = accuracy_fairness(r.wacc_avg, r.eo_diff_avg);
    r.rates = std::move(rates);
    for (auto* list : {&a.excluded, &w.excluded, &e.excluded})
        r.excluded.insert(r.excluded.end(), list->begin(), list->end());
    return r;
}

EvaluationReport evaluate(const HeadModel& head, const MatrixD& features, const MatrixU8& labels,
                          const GroupAssignment& groups, std::vector<std::string> label_names, double threshold) {
    return evaluate_predictions(predict(head, features).probs, labels, groups, std::move(label_names), threshold);
}

EvaluationReport evaluate(const HeadModel& head, const ExtractorModel& extractor, const Dataset& d,
                          std::span<const std::size_t> rows, const GroupAssignment& groups, double threshold) {
    if (groups.group_index.size() != d.n()) throw Error("evaluate: group assignment does not cover the dataset");
    const auto features = extract_features(extractor, gather_rows(d.features(), rows));
    return evaluate(head, features, gather_rows(d.labels(), rows), select_rows(groups, rows), d.label_names(),
                    threshold);
}

namespace {

json optional_list(const std::vector<std::optional<double>>& xs) {
    json out = json::array();
    for (const auto& x : xs) out.push_back(x ? json(*x) : json(nullptr));
    return out;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string report_to_json(const EvaluationReport& r, const std::string& method) {
    json rates = json::array();
    for (std::size_t k = 0; k < r.rates.classes(); ++k) {
        for (std::size_t g = 0; g < r.rates.groups(); ++g) {
            auto t = r.rates.tpr(k, g);
            auto f = r.rates.fpr(k, g);
            rates.push_back({{"label", r.label_names[k]},
                             {"group", g},
                             {"positives", r.rates.positives(k, g)},
                             {"negatives", r.rates.negatives(k, g)},
                             {"tpr", t ? json(*t) : json(nullptr)},
                             {"fpr", f ? json(*f) : json(nullptr)}});
        }
    }
    json excluded = json::array();
    for (const auto& e : r.excluded)
        excluded.push_back({{"metric", e.metric}, {"label", r.label_names.at(e.label)}, {"reason", e.reason}});
    json doc = {{"method", method},
                {"threshold", r.rates.threshold},
                {"label_names", r.label_names},
                {"auc_per_label", optional_list(r.auc_per_label)},
                {"auc_avg", r.auc_avg},
                {"wacc_per_label", optional_list(r.wacc_per_label)},
                {"wacc_avg", r.wacc_avg},
                {"eo_diff_per_label", optional_list(r.eo_diff_per_label)},
                {"eo_diff_avg", r.eo_diff_avg},
                {"af_avg", r.af_avg},
                {"hard_rates", rates},
                {"excluded", excluded}};
    return doc.dump(2) + "\n";
}

std::string report_to_csv(const EvaluationReport& r, const std::string& method) {
    return "method,auc_avg,eo_diff_avg,wacc_avg,af_avg\n" + method + "," + fixed4(r.auc_avg) + "," +
           fixed4(r.eo_diff_avg) + "," + fixed4(r.wacc_avg) + "," + fixed4(r.af_avg) + "\n";
}

}  // namespace fairhead
