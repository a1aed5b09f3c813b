#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jrlab/dataset.hpp"
#include "jrlab/jacreg.hpp"
#include "jrlab/mlp.hpp"
#include "jrlab/rng.hpp"

namespace jrlab {

struct TrainConfig {
    double lambda_jr = 0.0;      // joint-loss coefficient on ||J||_F^2 / 2
    double lambda_wd = 0.0;      // L2 coefficient, applied inside the step
    double dropout_rate = 0.0;   // [0, 1), hidden-layer inputs only
    std::size_t n_proj = 1;      // projections per step
    bool exact_reg = false;      // use the exact sum over classes instead
    double eta0 = 0.1;
    std::size_t quench_every = 5000;  // ten-fold lr decay cadence
    std::size_t total_iters = 15000;
    std::size_t batch_size = 100;
    bool full_batch = false;
    double momentum = 0.9;
    double adv_eps_max = 0.0;  // > 0 turns on FGSM-augmented training
    std::uint64_t seed = 0;
    std::size_t samples_per_class = 0;  // 0 = use every example
    std::size_t log_every = 100;
    std::size_t eval_points = 2000;     // test points per logged accuracy
    std::size_t eval_jf_points = 200;   // test points per logged ||J||_F
    Precision precision = Precision::f64;

    void validate() const;  // throws ConfigError on any out-of-range field
};

struct HistoryRow {
    std::size_t iteration;
    double loss;       // supervised cross-entropy on the step's batch
    double reg_value;  // batch ||J||_F^2 (estimate) at the step, NaN if off
    double test_acc;   // percent
    double jf_norm;    // mean test ||J(x)||_F
    double lr;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;
    std::size_t train_size = 0;
};

struct TrainResult {
    Mlp model;
    TrainHistory history;
};

// Exactly k seeded-random examples of every class.  Throws DataError when
// a class has fewer than k members.
Dataset subsample_per_class(const Dataset& ds, std::size_t k, std::uint64_t seed);

// v <- rho v - eta (grads + lambda_wd theta); theta <- theta + v.
// Weight decay touches weights and biases alike.
void sgd_step(Mlp& model, ParamGrads& velocity, const ParamGrads& grads, double eta, double rho,
              double lambda_wd);

// Learning rate at step t: eta0 * 10^(-floor(t / quench_every)).
double lr_at(const TrainConfig& cfg, std::size_t t);

// Per-example FGSM corruption for adversarial training: eps ~ U[0,
// eps_max] per row, one sign-gradient step in raw pixel space (the 1/std
// preprocessing factor is positive, so signs pass through), cropped back
// to [0, 1].  The caller preprocesses afterwards as usual.
Tensor fgsm_augment(const Tensor& raw_batch, const std::vector<int>& labels, const Mlp& model,
                    const Preprocess& pre, double eps_max, Rng& rng);

// One batch evaluation of the joint objective and its parameter gradient:
//   L = cross_entropy + (lambda_jr / 2) * batch-mean ||J||_F^2
// Supervised term runs on the train-mode graph (dropout via dropout_rng);
// the regularizer always runs on the clean eval-mode graph.  With dropout
// off the supervised trace is already clean and both terms share one fused
// backward pass.  Weight decay is absent here by design — it lives inside
// sgd_step.
struct StepOutcome {
    double supervised_loss = 0.0;
    double reg_value = 0.0;   // batch ||J||_F^2 (or estimate); NaN when off
    double joint_loss = 0.0;  // supervised + (lambda_jr / 2) * reg
};
StepOutcome joint_loss_and_grads(const Mlp& model, const Tensor& X_pre,
                                 const std::vector<int>& labels, const TrainConfig& cfg,
                                 Rng& dropout_rng, Rng& proj_rng, ParamGrads& out_grads);

// Full SGD-with-momentum loop over the raw dataset (preprocessing applied
// per batch with ds.pre).  Deterministic for a fixed config.  When
// test_ds is given, logged rows include test accuracy and mean test
// ||J||_F.  A non-finite joint loss aborts with TrainDivergence.
TrainResult train(Mlp model, const Dataset& train_ds, const TrainConfig& cfg,
                  const Dataset* test_ds = nullptr);

// Percent accuracy over the first n points (0 = all), batched eval.
double test_accuracy(const Mlp& model, const Dataset& ds, std::size_t n = 0);

// Mean Frobenius norm ||J(x)||_F over the first n points (0 = all).
double mean_jacobian_frobenius(const Mlp& model, const Dataset& ds, std::size_t n = 0);

}  // namespace jrlab
