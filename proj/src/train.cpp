#include "jrlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jrlab/errors.hpp"
#include "jrlab/loss.hpp"

namespace jrlab {

void TrainConfig::validate() const {
    if (lambda_jr < 0.0 || !std::isfinite(lambda_jr))
        throw ConfigError("lambda_jr must be finite and >= 0");
    if (lambda_wd < 0.0 || !std::isfinite(lambda_wd))
        throw ConfigError("lambda_wd must be finite and >= 0");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout_rate must lie in [0, 1)");
    if (!exact_reg && n_proj < 1) throw ConfigError("n_proj must be at least 1");
    if (eta0 <= 0.0 || !std::isfinite(eta0)) throw ConfigError("eta0 must be positive");
    if (quench_every == 0) throw ConfigError("quench_every must be positive");
    if (total_iters == 0) throw ConfigError("total_iters must be positive");
    if (!full_batch && batch_size == 0) throw ConfigError("batch_size must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (adv_eps_max < 0.0 || !std::isfinite(adv_eps_max))
        throw ConfigError("adv_eps_max must be finite and >= 0");
    if (log_every == 0) throw ConfigError("log_every must be positive");
}

Dataset subsample_per_class(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    ds.validate();
    if (k == 0) throw ConfigError("subsample_per_class: k must be positive");
    std::vector<std::vector<std::size_t>> by_class(ds.classes);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < ds.classes; ++c) {
        if (by_class[c].size() < k)
            throw DataError("subsample_per_class: class " + std::to_string(c) + " has only "
                            + std::to_string(by_class[c].size()) + " examples, need "
                            + std::to_string(k));
        Rng crng = rng.child(c + 1);
        crng.shuffle(by_class[c]);
        chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + k);
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.classes = ds.classes;
    out.pre = ds.pre;
    out.images = Tensor::zeros({chosen.size(), ds.width()});
    out.labels.resize(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        const double* src = ds.images.row(chosen[i]);
        std::copy(src, src + ds.width(), out.images.row(i));
        out.labels[i] = ds.labels[chosen[i]];
    }
    return out;
}

void sgd_step(Mlp& model, ParamGrads& velocity, const ParamGrads& grads, double eta, double rho,
              double lambda_wd) {
    if (!velocity.congruent_with(model) || !grads.congruent_with(model))
        throw DimensionError("sgd_step: velocity/grads not congruent with model");
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Layer& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            double& v = velocity.weight[l].data[i];
            double& w = layer.weight.data[i];
            v = rho * v - eta * (grads.weight[l].data[i] + lambda_wd * w);
            w += v;
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            double& v = velocity.bias[l].data[i];
            double& b = layer.bias.data[i];
            v = rho * v - eta * (grads.bias[l].data[i] + lambda_wd * b);
            b += v;
        }
    }
}

double lr_at(const TrainConfig& cfg, std::size_t t) {
    const double k = std::floor(static_cast<double>(t) / static_cast<double>(cfg.quench_every));
    return cfg.eta0 * std::pow(10.0, -k);
}

Tensor fgsm_augment(const Tensor& raw_batch, const std::vector<int>& labels, const Mlp& model,
                    const Preprocess& pre, double eps_max, Rng& rng) {
    if (eps_max < 0.0) throw ConfigError("fgsm_augment: eps_max must be >= 0");
    if (eps_max == 0.0) return raw_batch;
    const std::size_t B = raw_batch.rows();
    if (labels.size() != B) throw DimensionError("fgsm_augment: label count != batch rows");

    ForwardTrace trace = forward(model, pre.apply(raw_batch));
    LossGrad lg = softmax_cross_entropy(trace.logits(), labels);
    // dL/dx_raw = dL/dx_pre / std; std > 0 so the signs already match.
    Tensor g = vjp_input(model, trace, lg.dlogits);

    Tensor out = raw_batch;
    for (std::size_t r = 0; r < B; ++r) {
        const double eps = rng.uniform(0.0, eps_max);
        const double* grow = g.row(r);
        double* row = out.row(r);
        for (std::size_t i = 0; i < out.cols(); ++i) {
            const double s = grow[i] > 0.0 ? 1.0 : (grow[i] < 0.0 ? -1.0 : 0.0);
            row[i] = std::clamp(row[i] + eps * s, 0.0, 1.0);
        }
    }
    return out;
}

StepOutcome joint_loss_and_grads(const Mlp& model, const Tensor& X_pre,
                                 const std::vector<int>& labels, const TrainConfig& cfg,
                                 Rng& dropout_rng, Rng& proj_rng, ParamGrads& out_grads) {
    const bool dropping = cfg.dropout_rate > 0.0;
    ForwardTrace trace = forward(model, X_pre, cfg.dropout_rate, dropping, &dropout_rng);
    LossGrad lg = softmax_cross_entropy(trace.logits(), labels);

    StepOutcome out;
    out.supervised_loss = lg.loss;
    out.reg_value = std::numeric_limits<double>::quiet_NaN();
    out.joint_loss = lg.loss;
    if (cfg.lambda_jr > 0.0 && !dropping) {
        // The penalty is measured on the dropout-free graph, which here is
        // the supervised trace itself, so both terms share one fused
        // backward instead of paying a second full backprop.
        const std::size_t B = trace.batch;
        const std::size_t C = model.output_width();
        std::vector<Tensor> projections;
        double jr_scale;
        if (cfg.exact_reg) {
            jr_scale = 1.0 / static_cast<double>(B);
            projections.reserve(C);
            for (std::size_t c = 0; c < C; ++c) {
                Tensor V = Tensor::zeros({B, C});
                for (std::size_t r = 0; r < B; ++r) V.at(r, c) = 1.0;
                projections.push_back(std::move(V));
            }
        } else {
            jr_scale = static_cast<double>(C)
                       / (static_cast<double>(cfg.n_proj) * static_cast<double>(B));
            projections.reserve(cfg.n_proj);
            for (std::size_t mu = 0; mu < cfg.n_proj; ++mu)
                projections.push_back(sample_unit_sphere(B, C, proj_rng));
        }
        out_grads = ParamGrads::zeros_like(model);
        const double ssum = joint_backward(model, trace, lg.dlogits, projections,
                                           0.5 * cfg.lambda_jr * jr_scale, out_grads);
        out.reg_value = jr_scale * ssum;
        out.joint_loss += 0.5 * cfg.lambda_jr * out.reg_value;
        return out;
    }

    out_grads = backprop_params(model, trace, lg.dlogits);
    if (cfg.lambda_jr > 0.0) {
        // Dropout masks pollute the supervised trace; the penalty gets its
        // own clean one.
        ForwardTrace clean = forward(model, X_pre);
        JacobianResult reg = cfg.exact_reg ? jacreg_exact(model, clean)
                                           : jacreg_estimate(model, clean, cfg.n_proj, proj_rng);
        out.reg_value = reg.value;
        out.joint_loss += 0.5 * cfg.lambda_jr * reg.value;
        out_grads.add_scaled(reg.grads, 0.5 * cfg.lambda_jr);
    }
    return out;
}

double test_accuracy(const Mlp& model, const Dataset& ds, std::size_t n) {
    const std::size_t N = (n == 0) ? ds.size() : std::min(n, ds.size());
    if (N == 0) return 0.0;
    std::size_t hits = 0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < N; start += chunk) {
        const std::size_t b = std::min(chunk, N - start);
        Tensor X = Tensor::zeros({b, ds.width()});
        for (std::size_t r = 0; r < b; ++r) {
            const double* src = ds.images.row(start + r);
            std::copy(src, src + ds.width(), X.row(r));
        }
        std::vector<int> got = predict(model, ds.pre.apply(X));
        for (std::size_t r = 0; r < b; ++r)
            if (got[r] == ds.labels[start + r]) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(N);
}

double mean_jacobian_frobenius(const Mlp& model, const Dataset& ds, std::size_t n) {
    const std::size_t N = (n == 0) ? ds.size() : std::min(n, ds.size());
    if (N == 0) return 0.0;
    double sum = 0.0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < N; start += chunk) {
        const std::size_t b = std::min(chunk, N - start);
        Tensor X = Tensor::zeros({b, ds.width()});
        for (std::size_t r = 0; r < b; ++r) {
            const double* src = ds.images.row(start + r);
            std::copy(src, src + ds.width(), X.row(r));
        }
        for (double sq : jacobian_sq_norms(model, ds.pre.apply(X))) sum += std::sqrt(sq);
    }
    return sum / static_cast<double>(N);
}

TrainResult train(Mlp model, const Dataset& full_ds, const TrainConfig& cfg,
                  const Dataset* test_ds) {
    cfg.validate();
    model.validate();
    model.precision = cfg.precision;
    full_ds.validate();

    Rng root(cfg.seed);
    Rng batch_rng = root.child(1);
    Rng dropout_rng = root.child(2);
    Rng proj_rng = root.child(3);
    Rng adv_rng = root.child(4);

    Dataset subsampled;
    const Dataset* ds = &full_ds;
    if (cfg.samples_per_class > 0) {
        subsampled = subsample_per_class(full_ds, cfg.samples_per_class,
                                         root.child(5).next_u64());
        ds = &subsampled;
    }
    if (ds->width() != model.input_width())
        throw DimensionError("train: dataset width " + std::to_string(ds->width())
                             + " != model input width " + std::to_string(model.input_width()));

    const std::size_t N = ds->size();
    const std::size_t B = cfg.full_batch ? N : std::min(cfg.batch_size, N);

    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    std::size_t cursor = N;  // forces an initial shuffle

    ParamGrads velocity = ParamGrads::zeros_like(model);
    ParamGrads grads = ParamGrads::zeros_like(model);
    TrainResult result;
    result.history.train_size = N;

    Tensor X_raw = Tensor::zeros({B, ds->width()});
    std::vector<int> labels(B);
    StepOutcome last{};

    for (std::size_t t = 0; t < cfg.total_iters; ++t) {
        if (cfg.full_batch) {
            for (std::size_t r = 0; r < B; ++r) {
                const double* src = ds->images.row(r);
                std::copy(src, src + ds->width(), X_raw.row(r));
                labels[r] = ds->labels[r];
            }
        } else {
            for (std::size_t r = 0; r < B; ++r) {
                if (cursor >= N) {
                    batch_rng.shuffle(order);
                    cursor = 0;
                }
                const std::size_t idx = order[cursor++];
                const double* src = ds->images.row(idx);
                std::copy(src, src + ds->width(), X_raw.row(r));
                labels[r] = ds->labels[idx];
            }
        }

        const Tensor* batch = &X_raw;
        Tensor adv;
        if (cfg.adv_eps_max > 0.0) {
            adv = fgsm_augment(X_raw, labels, model, ds->pre, cfg.adv_eps_max, adv_rng);
            batch = &adv;
        }
        Tensor X_pre = ds->pre.apply(*batch);

        last = joint_loss_and_grads(model, X_pre, labels, cfg, dropout_rng, proj_rng, grads);
        if (!std::isfinite(last.joint_loss))
            throw TrainDivergence(t, last.joint_loss,
                                  "training diverged at iteration " + std::to_string(t)
                                      + ": joint loss is not finite (lr="
                                      + std::to_string(lr_at(cfg, t)) + ")");

        const double lr = lr_at(cfg, t);
        if (t % cfg.log_every == 0) {
            HistoryRow row{t, last.supervised_loss, last.reg_value,
                           std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN(), lr};
            if (test_ds) {
                row.test_acc = test_accuracy(model, *test_ds, cfg.eval_points);
                row.jf_norm = mean_jacobian_frobenius(model, *test_ds, cfg.eval_jf_points);
            }
            result.history.rows.push_back(row);
        }
        sgd_step(model, velocity, grads, lr, cfg.momentum, cfg.lambda_wd);
    }

    HistoryRow final_row{cfg.total_iters, last.supervised_loss, last.reg_value,
                         std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN(),
                         lr_at(cfg, cfg.total_iters - 1)};
    if (test_ds) {
        final_row.test_acc = test_accuracy(model, *test_ds, cfg.eval_points);
        final_row.jf_norm = mean_jacobian_frobenius(model, *test_ds, cfg.eval_jf_points);
    }
    result.history.rows.push_back(final_row);
    result.model = std::move(model);
    return result;
}

}  // namespace jrlab
