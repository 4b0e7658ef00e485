#include "fairhead/training.hpp"

#include <cmath>
#include <numeric>

#include "fairhead/optimizer.hpp"
#include "fairhead/random.hpp"

namespace fairhead {

TrainConfig TrainConfig::paper_pretrain() {
    TrainConfig c;
    c.method = Method::erm;
    c.learning_rate = 1e-4;
    c.weight_decay = 1e-4;
    c.batch_size = 32;
    c.epochs = 3;
    return c;
}

TrainConfig TrainConfig::paper_finetune(Method m) {
    TrainConfig c;
    c.method = m;
    c.learning_rate = 5e-5;
    c.weight_decay = 1e-3;
    c.batch_size = 32;
    c.epochs = 1;
    c.alpha = 1.0;
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error("train config: learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw Error("train config: weight_decay must be >= 0");
    if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
    if (!(alpha >= 0.0)) throw Error("train config: alpha must be >= 0");
}

namespace {

HeadMetadata meta_of(const TrainConfig& cfg) {
    return {cfg.method, cfg.seed, cfg.learning_rate, cfg.weight_decay, cfg.batch_size, cfg.epochs, cfg.alpha};
}

DenseLayer uniform_layer(std::size_t in, std::size_t out, double bound, Rng& rng) {
    DenseLayer l{MatrixD(in, out), std::vector<double>(out, 0.0)};
    for (auto& w : l.weight.data()) w = rng.uniform(-bound, bound);
    return l;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const auto end = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

// dW = x^T delta, db = column sums of delta.
void accumulate_dense_grad(const MatrixD& x, const MatrixD& delta, MatrixD& dw, std::vector<double>& db) {
    dw = MatrixD(x.cols(), delta.cols());
    db.assign(delta.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        auto di = delta.row(i);
        for (std::size_t o = 0; o < delta.cols(); ++o) db[o] += di[o];
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double xj = xi[j];
            if (xj == 0.0) continue;
            auto row = dw.row(j);
            for (std::size_t o = 0; o < delta.cols(); ++o) row[o] += xj * di[o];
        }
    }
}

// delta W^T, masked by the ReLU activity of `act`.
MatrixD backprop_relu(const MatrixD& delta, const DenseLayer& layer, const MatrixD& act) {
    MatrixD out(delta.rows(), layer.in());
    for (std::size_t i = 0; i < delta.rows(); ++i) {
        auto di = delta.row(i);
        auto oi = out.row(i);
        auto ai = act.row(i);
        for (std::size_t j = 0; j < layer.in(); ++j) {
            if (ai[j] <= 0.0) continue;
            auto w = layer.weight.row(j);
            double s = 0.0;
            for (std::size_t o = 0; o < layer.out(); ++o) s += w[o] * di[o];
            oi[j] = s;
        }
    }
    return out;
}

}  // namespace

ExtractorModel init_extractor(std::size_t input_dim, std::size_t classes, const ExtractorConfig& arch,
                              std::uint64_t seed) {
    Rng rng(derive_seed(seed, "extractor-init"));
    ExtractorModel m;
    m.input_dim = input_dim;
    std::size_t in = input_dim;
    for (auto width : arch.layer_widths) {
        if (width == 0) throw Error("extractor: layer width must be positive");
        m.layers.push_back(uniform_layer(in, width, std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(in, 1))), rng));
        in = width;
    }
    if (arch.zero_init_head) m.head.layer = {MatrixD(in, classes), std::vector<double>(classes, 0.0)};
    else m.head = init_head(in, classes, derive_seed(seed, "erm-head-init"));
    return m;
}

HeadModel init_head(std::size_t feature_dim, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(feature_dim, 1)));
    return {uniform_layer(feature_dim, classes, bound, rng), {}};
}

ExtractorModel pretrain_extractor(const Dataset& d, std::span<const std::size_t> rows, const ExtractorConfig& arch,
                                  const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    if (!d.reference_class()) throw Error("pretrain: dataset has no reference class");
    const auto features = matrix_cast<double>(gather_rows(d.features(), rows));
    const auto labels = gather_rows(d.labels(), rows);
    const auto pos_weight = class_pos_weights(labels, *d.reference_class());

    auto model = init_extractor(d.d(), d.c(), arch, cfg.seed);
    model.head.meta = meta_of(cfg);
    model.head.meta.method = Method::erm;
    if (rows.empty() || cfg.epochs == 0) return model;

    const std::size_t depth = model.layers.size();
    AdamW opt({cfg.learning_rate, cfg.weight_decay});
    std::vector<MatrixD> dw(depth + 1);
    std::vector<std::vector<double>> db(depth + 1);
    std::vector<MatrixD> acts(depth + 1);
    Rng shuffle_rng(derive_seed(cfg.seed, "pretrain-shuffle"));

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (log) log->batch_loss.emplace_back();
        for (const auto& batch : epoch_batches(rows.size(), cfg.batch_size, shuffle_rng)) {
            acts[0] = gather_rows(features, batch);
            for (std::size_t l = 0; l < depth; ++l) {
                acts[l + 1] = dense_forward(model.layers[l], acts[l]);
                for (auto& v : acts[l + 1].data()) v = v > 0.0 ? v : 0.0;
            }
            const auto pred = Predictions::from_logits(dense_forward(model.head.layer, acts[depth]));
            const auto loss = weighted_bce(pred, gather_rows(labels, batch), pos_weight);
            if (log) log->batch_loss.back().push_back(loss.value);

            accumulate_dense_grad(acts[depth], loss.grad_logits, dw[depth], db[depth]);
            if (depth > 0) {
                MatrixD delta = backprop_relu(loss.grad_logits, model.head.layer, acts[depth]);
                for (std::size_t l = depth; l-- > 0;) {
                    accumulate_dense_grad(acts[l], delta, dw[l], db[l]);
                    if (l > 0) delta = backprop_relu(delta, model.layers[l], acts[l]);
                }
            }

            std::vector<ParamRef> params;
            for (std::size_t l = 0; l < depth; ++l) {
                params.push_back({model.layers[l].weight.data(), dw[l].data(), true});
                params.push_back({model.layers[l].bias, db[l], false});
            }
            params.push_back({model.head.layer.weight.data(), dw[depth].data(), true});
            params.push_back({model.head.layer.bias, db[depth], false});
            opt.step(params);
        }
    }
    return model;
}

HeadModel finetune_head(const MatrixD& features, const MatrixU8& labels, const GroupAssignment& groups,
                        const ClassWeights& weights, const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    if (cfg.method == Method::erm) throw Error("finetune: ERM reuses the pre-trained head and is not fine-tuned");
    if (features.rows() == 0) throw Error("finetune: the fine-tuning subset is empty");
    if (labels.rows() != features.rows() || groups.group_index.size() != features.rows())
        throw Error("finetune: features, labels and groups disagree on row count");
    if (weights.pos_weight.size() != labels.cols()) throw Error("finetune: class weights do not match label count");
    if (cfg.method == Method::fair_cb && !(weights.freq_total > 0.0))
        throw Error("finetune: W = 0 (every class is positive in every training sample)");

    HeadModel head = init_head(features.cols(), labels.cols(), derive_seed(cfg.seed, "head-init"));
    head.meta = meta_of(cfg);
    AdamW opt({cfg.learning_rate, cfg.weight_decay});
    Rng shuffle_rng(derive_seed(cfg.seed, "finetune-shuffle"));
    MatrixD dw;
    std::vector<double> db;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (log) log->batch_loss.emplace_back();
        for (const auto& batch : epoch_batches(features.rows(), cfg.batch_size, shuffle_rng)) {
            const auto x = gather_rows(features, batch);
            const auto y = gather_rows(labels, batch);
            const auto pred = predict(head, x);
            double value = 0.0;
            MatrixD grad;
            if (cfg.method == Method::fair_cb) {
                auto loss = fairness_loss(pred, y, select_rows(groups, batch), weights, cfg.alpha);
                value = loss.value;
                grad = std::move(loss.grad_logits);
            } else {
                auto loss = weighted_bce(pred, y, weights.pos_weight);
                value = loss.value;
                grad = std::move(loss.grad_logits);
            }
            if (log) log->batch_loss.back().push_back(value);
            accumulate_dense_grad(x, grad, dw, db);
            const ParamRef params[] = {{head.layer.weight.data(), dw.data(), true}, {head.layer.bias, db, false}};
            opt.step(params);
        }
    }
    return head;
}

}  // namespace fairhead
