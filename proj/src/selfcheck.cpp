#include "jrlab/selfcheck.hpp"

#include <cmath>
#include <cstdio>

#include "jrlab/grad.hpp"
#include "jrlab/jacreg.hpp"
#include "jrlab/loss.hpp"
#include "jrlab/train.hpp"

namespace jrlab {

namespace {

Mlp small_net(std::uint64_t seed) {
    return xavier_init({6, 8, 7, 4}, Activation::Tanh, seed);
}

Tensor random_batch(std::size_t B, std::size_t I, std::uint64_t seed) {
    Rng rng(seed);
    Tensor X = Tensor::zeros({B, I});
    rng.fill_normal(X.data.data(), X.size());
    return X;
}

std::vector<int> random_labels(std::size_t B, std::size_t C, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> y(B);
    for (int& v : y) v = static_cast<int>(rng.uniform_index(C));
    return y;
}

CheckResult make(const std::string& name, double measured, double tol,
                 const std::string& note = "") {
    CheckResult r;
    r.name = name;
    r.measured = measured;
    r.tolerance = tol;
    r.pass = measured <= tol;
    r.note = note;
    return r;
}

void negate(ParamGrads& g) { g.scale(-1.0); }

}  // namespace

std::vector<CheckResult> run_selfchecks(const CheckOptions& opt) {
    std::vector<CheckResult> out;

    // Supervised gradients against central finite differences.
    {
        double worst = 0.0;
        for (std::uint64_t s = 1; s <= 3; ++s) {
            Mlp model = small_net(s);
            Tensor X = random_batch(5, model.input_width(), 100 + s);
            std::vector<int> y = random_labels(5, model.output_width(), 200 + s);
            ForwardTrace trace = forward(model, X);
            LossGrad lg = softmax_cross_entropy(trace.logits(), y);
            ParamGrads got = backprop_params(model, trace, lg.dlogits);
            ParamGrads want = finite_diff_param_grads(model, [&](const Mlp& m) {
                return softmax_cross_entropy(forward_logits(m, X), y).loss;
            });
            worst = std::max(worst, grad_max_rel_error(got, want));
        }
        out.push_back(make("supervised_grad_vs_fd", worst, 1e-5));
    }

    // Exact penalty gradients against finite differences.
    {
        double worst = 0.0;
        for (std::uint64_t s = 4; s <= 6; ++s) {
            Mlp model = small_net(s);
            Tensor X = random_batch(4, model.input_width(), 300 + s);
            JacobianResult got = jacreg_exact(model, X);
            ParamGrads want = finite_diff_param_grads(
                model, [&](const Mlp& m) { return jacreg_exact(m, X).value; });
            worst = std::max(worst, grad_max_rel_error(got.grads, want));
        }
        out.push_back(make("exact_penalty_grad_vs_fd", worst, 1e-5));
    }

    // Estimated penalty under a frozen stream: gradient of the very
    // function being logged.
    {
        double worst = 0.0;
        for (std::uint64_t s = 7; s <= 9; ++s) {
            Mlp model = small_net(s);
            Tensor X = random_batch(4, model.input_width(), 400 + s);
            Rng rng(900 + s);
            Rng frozen = rng;
            JacobianResult got = jacreg_estimate(model, X, 2, frozen);
            ParamGrads want = finite_diff_param_grads(model, [&](const Mlp& m) {
                Rng replay = rng;
                return jacreg_estimate(m, X, 2, replay).value;
            });
            worst = std::max(worst, grad_max_rel_error(got.grads, want));
        }
        out.push_back(make("estimated_penalty_grad_vs_fd", worst, 1e-5));
    }

    // Joint objective: the gradient fed to the optimiser matches the
    // finite difference of the loss it reports.
    {
        double worst = 0.0;
        for (std::uint64_t s = 10; s <= 11; ++s) {
            Mlp model = small_net(s);
            Tensor X = random_batch(5, model.input_width(), 500 + s);
            std::vector<int> y = random_labels(5, model.output_width(), 600 + s);
            TrainConfig cfg;
            cfg.lambda_jr = 0.05;
            cfg.n_proj = 2;
            ParamGrads got = ParamGrads::zeros_like(model);
            Rng d1(1), p1(2);
            joint_loss_and_grads(model, X, y, cfg, d1, p1, got);
            ParamGrads want = finite_diff_param_grads(model, [&](const Mlp& m) {
                Rng d(1), p(2);
                ParamGrads scratch = ParamGrads::zeros_like(m);
                return joint_loss_and_grads(m, X, y, cfg, d, p, scratch).joint_loss;
            });
            worst = std::max(worst, grad_max_rel_error(got, want));
        }
        out.push_back(make("joint_loss_grad_vs_fd", worst, 1e-5));
    }

    // Unbiasedness: z-score of the sample mean against the exact norm.
    {
        Mlp model = small_net(12);
        Tensor X = random_batch(1, model.input_width(), 700);
        const double exact = jacreg_exact(model, X).value;
        Tensor J = finite_diff_jacobian(model, Tensor::from({X.cols()}, X.data));
        Rng rng(701);
        EstimatorStats st = estimator_stats(J, 20000, rng);
        const double z = std::fabs(st.mean - exact) / std::max(st.mean_se, 1e-30);
        char note[96];
        std::snprintf(note, sizeof(note), "mean=%.6g exact=%.6g", st.mean, exact);
        out.push_back(make("estimator_unbiased_zscore", z, 4.0, note));
    }

    // Variance: sample variance within 5 standard errors of the analytic
    // value, and the analytic value under the universal bound.
    {
        double worst_z = 0.0, worst_excess = 0.0;
        for (std::uint64_t s = 13; s <= 15; ++s) {
            Rng jr(s);
            const std::size_t C = 2 + 3 * (s - 13), I = 7;
            Tensor J = Tensor::zeros({C, I});
            jr.fill_normal(J.data.data(), J.size());
            Rng rng(800 + s);
            EstimatorStats st = estimator_stats(J, 20000, rng);
            // se of a sample variance ~ sqrt(2/(n-1)) * sigma^2 for
            // near-Gaussian draws; keep a conservative floor.
            const double se = st.closed_form_variance
                              * std::sqrt(2.0 / static_cast<double>(st.n_samples - 1));
            worst_z = std::max(
                worst_z, std::fabs(st.variance - st.closed_form_variance)
                             / std::max(se, 1e-30));
            worst_excess =
                std::max(worst_excess, st.closed_form_variance - st.variance_bound);
        }
        out.push_back(make("estimator_variance_vs_closed_form_zscore", worst_z, 8.0));
        out.push_back(make("closed_form_variance_under_bound", worst_excess, 0.0,
                           "analytic variance minus bound, per random J"));
    }

    // Sampling-free gradients match the exact path.
    {
        double worst_val = 0.0, worst_grad = 0.0;
        for (std::uint64_t s = 16; s <= 20; ++s) {
            Mlp model = small_net(s);
            Tensor x = Tensor::zeros({model.input_width()});
            Rng rng(1000 + s);
            rng.fill_normal(x.data.data(), x.size());
            JacobianResult closed = cyclopropagation(model, x);
            if (opt.flip_closed_form_sign) negate(closed.grads);
            JacobianResult exact = jacreg_exact(model, Tensor::from({1, x.size()}, x.data));
            worst_val = std::max(worst_val, std::fabs(closed.value - exact.value)
                                                / std::max(1e-300, std::fabs(exact.value)));
            ParamGrads diff = closed.grads;
            diff.add_scaled(exact.grads, -1.0);
            worst_grad = std::max(worst_grad, diff.max_abs());
        }
        out.push_back(make("closed_form_value_vs_exact_rel", worst_val, 1e-10));
        out.push_back(make("closed_form_grads_vs_exact_abs", worst_grad, 1e-8));
    }

    // Quench arithmetic and sphere sampling basics.
    {
        TrainConfig cfg;
        cfg.eta0 = 0.1;
        cfg.quench_every = 5000;
        double worst = 0.0;
        for (std::size_t t : {std::size_t(0), std::size_t(4999), std::size_t(5000),
                              std::size_t(14999), std::size_t(15000)}) {
            const double want =
                cfg.eta0
                * std::pow(10.0, -std::floor(static_cast<double>(t)
                                             / static_cast<double>(cfg.quench_every)));
            worst = std::max(worst, std::fabs(lr_at(cfg, t) - want));
        }
        out.push_back(make("quench_schedule_exact", worst, 0.0));

        Rng rng(42);
        Tensor V = sample_unit_sphere(64, 10, rng);
        double worst_norm = 0.0;
        for (std::size_t r = 0; r < V.rows(); ++r)
            worst_norm = std::max(worst_norm,
                                  std::fabs(std::sqrt(dot(V.row(r), V.row(r), 10)) - 1.0));
        out.push_back(make("sphere_sample_unit_norm", worst_norm, 1e-12));
    }

    return out;
}

int report_selfchecks(const std::vector<CheckResult>& results, std::string& out) {
    int failures = 0;
    for (const CheckResult& r : results) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-44s measured=%-12.4g tol=%-10.4g %s%s%s\n",
                      r.name.c_str(), r.measured, r.tolerance, r.pass ? "PASS" : "FAIL",
                      r.note.empty() ? "" : "  # ", r.note.c_str());
        out += line;
        if (!r.pass) ++failures;
    }
    return failures;
}

}  // namespace jrlab
