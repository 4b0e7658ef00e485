#include "fairhead/objective.hpp"

#include <cmath>

namespace fairhead {

std::vector<std::size_t> positive_counts(const MatrixU8& labels) {
    std::vector<std::size_t> counts(labels.cols(), 0);
    for (std::size_t i = 0; i < labels.rows(); ++i)
        for (std::size_t k = 0; k < labels.cols(); ++k) counts[k] += labels(i, k);
    return counts;
}

std::vector<double> class_pos_weights(std::span<const std::size_t> pos_count, std::size_t reference_class) {
    if (reference_class >= pos_count.size()) throw Error("reference class index out of range");
    const auto ref = pos_count[reference_class];
    if (ref == 0) throw Error("reference class has no positive samples");
    std::vector<double> p(pos_count.size());
    for (std::size_t k = 0; k < pos_count.size(); ++k) {
        if (pos_count[k] == 0) throw Error("class " + std::to_string(k) + " has no positive samples");
        p[k] = static_cast<double>(ref) / static_cast<double>(pos_count[k]);
    }
    return p;
}

std::vector<double> class_pos_weights(const MatrixU8& labels, std::size_t reference_class) {
    return class_pos_weights(positive_counts(labels), reference_class);
}

FrequencyWeights class_freq_weights(std::span<const std::size_t> pos_count, std::size_t n) {
    if (n == 0) throw Error("class_freq_weights: n must be at least 1");
    FrequencyWeights out;
    out.weight.resize(pos_count.size());
    for (std::size_t k = 0; k < pos_count.size(); ++k) {
        if (pos_count[k] > n) throw Error("class_freq_weights: positive count exceeds n");
        out.weight[k] = static_cast<double>(n - pos_count[k]) / static_cast<double>(n);
        out.total += out.weight[k];
    }
    return out;
}

FrequencyWeights class_freq_weights(const MatrixU8& labels) {
    return class_freq_weights(positive_counts(labels), labels.rows());
}

ClassWeights class_weights(const MatrixU8& labels, std::size_t reference_class) {
    ClassWeights w;
    w.pos_count = positive_counts(labels);
    w.pos_weight = class_pos_weights(w.pos_count, reference_class);
    auto freq = class_freq_weights(w.pos_count, labels.rows());
    w.freq_weight = std::move(freq.weight);
    w.freq_total = freq.total;
    return w;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_shapes(const Predictions& pred, const MatrixU8& labels) {
    if (pred.logits.rows() != labels.rows() || pred.logits.cols() != labels.cols())
        throw Error("shape mismatch between predictions (" + std::to_string(pred.logits.rows()) + "x" +
                    std::to_string(pred.logits.cols()) + ") and labels (" + std::to_string(labels.rows()) + "x" +
                    std::to_string(labels.cols()) + ")");
    if (pred.probs.rows() != pred.logits.rows() || pred.probs.cols() != pred.logits.cols())
        throw Error("predictions: probs and logits differ in shape");
}

}  // namespace

Predictions Predictions::from_logits(MatrixD logits) {
    MatrixD probs(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.size(); ++i) probs.data()[i] = sigmoid(logits.data()[i]);
    return {std::move(logits), std::move(probs)};
}

LossValue weighted_bce(const Predictions& pred, const MatrixU8& labels, std::span<const double> pos_weight) {
    check_shapes(pred, labels);
    const std::size_t batch = pred.batch(), classes = pred.classes();
    if (pos_weight.size() != classes) throw Error("weighted_bce: pos_weight has wrong length");
    for (double p : pos_weight)
        if (!(std::isfinite(p) && p > 0.0)) throw Error("weighted_bce: pos_weight must be finite and positive");

    LossValue out{0.0, MatrixD(batch, classes)};
    if (batch == 0) return out;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double sum = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t k = 0; k < classes; ++k) {
            const double z = pred.logits(i, k);
            const double p = pred.probs(i, k);
            if (labels(i, k)) {
                sum += pos_weight[k] * softplus(-z);
                out.grad_logits(i, k) = -pos_weight[k] * (1.0 - p) * inv_batch;
            } else {
                sum += softplus(z);
                out.grad_logits(i, k) = p * inv_batch;
            }
        }
    }
    out.value = sum * inv_batch;
    return out;
}

SoftRateGaps soft_rate_gaps(const Predictions& pred, const MatrixU8& labels, const GroupAssignment& batch_groups) {
    check_shapes(pred, labels);
    const std::size_t batch = pred.batch(), classes = pred.classes(), groups = batch_groups.group_count;
    if (batch_groups.group_index.size() != batch) throw Error("soft_rate_gaps: group assignment does not match batch");

    SoftRateGaps gaps{MatrixD(classes, groups), MatrixD(classes, groups), MatrixD(classes, groups),
                      MatrixD(classes, groups), std::vector<std::size_t>(groups, 0)};
    for (auto g : batch_groups.group_index) ++gaps.group_size.at(g);

    // Per (k, g): false-positive mass and missed-positive mass inside g, plus
    // batch totals so the complement is total minus in-group.
    MatrixD fp_in(classes, groups), fn_in(classes, groups);
    std::vector<double> fp_total(classes, 0.0), fn_total(classes, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        const auto g = batch_groups.group_index[i];
        for (std::size_t k = 0; k < classes; ++k) {
            const double p = pred.probs(i, k);
            if (labels(i, k)) {
                fn_in(k, g) += 1.0 - p;
                fn_total[k] += 1.0 - p;
            } else {
                fp_in(k, g) += p;
                fp_total[k] += p;
            }
        }
    }
    for (std::size_t g = 0; g < groups; ++g) {
        const auto inside = gaps.group_size[g];
        const auto outside = batch - inside;
        if (inside == 0 || outside == 0) continue;
        for (std::size_t k = 0; k < classes; ++k) {
            const double fpr = fp_in(k, g) / static_cast<double>(inside) -
                               (fp_total[k] - fp_in(k, g)) / static_cast<double>(outside);
            const double fnr = fn_in(k, g) / static_cast<double>(inside) -
                               (fn_total[k] - fn_in(k, g)) / static_cast<double>(outside);
            gaps.fpr_signed(k, g) = fpr;
            gaps.fnr_signed(k, g) = fnr;
            gaps.fpr(k, g) = std::abs(fpr);
            gaps.fnr(k, g) = std::abs(fnr);
        }
    }
    return gaps;
}

PenaltyValue fairness_penalty(const SoftRateGaps& gaps, std::span<const double> freq_weight, std::size_t group_count) {
    const std::size_t classes = gaps.fpr.rows();
    if (freq_weight.size() != classes) throw Error("fairness_penalty: weight vector has wrong length");
    if (group_count == 0 || gaps.fpr.cols() != group_count) throw Error("fairness_penalty: group count mismatch");
    double total_weight = 0.0;
    for (double w : freq_weight) total_weight += w;
    if (!(total_weight > 0.0)) throw Error("fairness_penalty: W = 0 (every class is positive in every sample)");

    PenaltyValue out;
    for (std::size_t g = 0; g < group_count; ++g) {
        double fpr_g = 0.0, fnr_g = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            fpr_g += gaps.fpr(k, g) * freq_weight[k];
            fnr_g += gaps.fnr(k, g) * freq_weight[k];
        }
        out.fpr += fpr_g / total_weight;
        out.fnr += fnr_g / total_weight;
    }
    out.fpr /= static_cast<double>(group_count);
    out.fnr /= static_cast<double>(group_count);
    return out;
}

FairnessLossValue fairness_loss(const Predictions& pred, const MatrixU8& labels, const GroupAssignment& batch_groups,
                                const ClassWeights& weights, double alpha) {
    if (!(alpha >= 0.0)) throw Error("fairness_loss: alpha must be >= 0");
    auto bce = weighted_bce(pred, labels, weights.pos_weight);
    auto gaps = soft_rate_gaps(pred, labels, batch_groups);
    const std::size_t groups = batch_groups.group_count;
    const auto agg = fairness_penalty(gaps, weights.freq_weight, groups);

    FairnessLossValue out;
    out.bce = bce.value;
    out.value = bce.value + alpha * (agg.fpr + agg.fnr);
    out.penalty = {gaps.fpr, gaps.fnr, agg.fpr, agg.fnr, alpha};
    out.grad_logits = std::move(bce.grad_logits);
    if (alpha == 0.0 || pred.batch() == 0) return out;

    // d|D_kg|/dz_ik = sign(D_kg) * dD_kg/dz_ik, where D_kg is a difference of an
    // in-group mean and an out-of-group mean. Fold sign, weights and the 1/N
    // factors into one coefficient per (k, g) and side.
    const std::size_t batch = pred.batch(), classes = pred.classes();
    const double scale = alpha / (static_cast<double>(groups) * weights.freq_total);
    auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
    MatrixD fp_in(classes, groups), fp_out(classes, groups), fn_in(classes, groups), fn_out(classes, groups);
    std::vector<double> fp_out_sum(classes, 0.0), fn_out_sum(classes, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        const auto inside = gaps.group_size[g];
        const auto outside = batch - inside;
        if (inside == 0 || outside == 0) continue;
        for (std::size_t k = 0; k < classes; ++k) {
            const double c = scale * weights.freq_weight[k];
            const double sp = c * sign(gaps.fpr_signed(k, g));
            const double sn = c * sign(gaps.fnr_signed(k, g));
            fp_in(k, g) = sp / static_cast<double>(inside);
            fp_out(k, g) = -sp / static_cast<double>(outside);
            fn_in(k, g) = sn / static_cast<double>(inside);
            fn_out(k, g) = -sn / static_cast<double>(outside);
            fp_out_sum[k] += fp_out(k, g);
            fn_out_sum[k] += fn_out(k, g);
        }
    }
    for (std::size_t i = 0; i < batch; ++i) {
        const auto g = batch_groups.group_index[i];
        for (std::size_t k = 0; k < classes; ++k) {
            const double p = pred.probs(i, k);
            const double dp = p * (1.0 - p);
            if (labels(i, k)) {
                // d(1 - p)/dz = -p(1 - p)
                const double coef = fn_out_sum[k] - fn_out(k, g) + fn_in(k, g);
                out.grad_logits(i, k) -= coef * dp;
            } else {
                const double coef = fp_out_sum[k] - fp_out(k, g) + fp_in(k, g);
                out.grad_logits(i, k) += coef * dp;
            }
        }
    }
    return out;
}

}  // namespace fairhead
