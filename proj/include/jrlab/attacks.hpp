#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jrlab/dataset.hpp"
#include "jrlab/mlp.hpp"
#include "jrlab/rng.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab {

enum class AttackKind { White, Fgsm, Pgd, Cw };

const char* attack_name(AttackKind k);
AttackKind attack_from_name(const std::string& name);

// Every attack works in raw [0, 1] pixel space; model gradients are pulled
// back through the preprocessing map (a positive 1/std scale), so budgets
// and distances keep their pixel meaning.
struct AttackConfig {
    AttackKind kind = AttackKind::Pgd;
    double pgd_step = 1.0 / 255.0;   // per-iteration sign-step amplitude
    double pgd_ball = 32.0 / 255.0;  // l-inf projection radius
    std::size_t pgd_max_iters = 100;
    double cw_adam_lr = 0.005;
    double cw_c_init = 0.01;
    std::size_t cw_binary_steps = 10;
    std::size_t cw_max_opt_iters = 1000;  // Adam steps per binary-search round
    std::uint64_t seed = 0;

    void validate() const;  // magnitudes >= 0, pgd step <= ball
};

// x + noise, noise ~ N(0, sigma^2) i.i.d., cropped to [0, 1].
Tensor white_noise_perturb(const Tensor& x_raw, double sigma, Rng& rng);

// One sign-gradient step of amplitude eps on the supervised loss, in raw
// space, cropped.  sign(0) contributes nothing.
Tensor fgsm_attack(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label,
                   double eps);

// Iterated sign steps (amplitude cfg.pgd_step), each followed by
// projection onto the l-inf ball around the original and a crop; stops at
// the first misclassification.  An input that is already misclassified
// returns immediately with zero iterations.
struct PgdOutcome {
    Tensor x;
    bool fooled = false;
    std::size_t iters = 0;
};
PgdOutcome pgd_attack(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label,
                      const AttackConfig& cfg);

// L2-minimising attack in tanh change-of-variables space: minimise
// ||x(w) - x||^2 + c * f6 with the margin loss
// f6 = max(z_label - max_{c != label} z_c, 0), Adam on w, and the
// trade-off constant c binary-searched upward from cfg.cw_c_init.
// Failure to fool is reported through the flag, never as an error.
struct CwOutcome {
    Tensor x;
    bool fooled = false;
    double l2 = 0.0;  // ||x_adv - x_raw||_2 in raw pixel space
};
CwOutcome cw_attack(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label,
                    const AttackConfig& cfg);

struct RobustnessCurve {
    AttackKind kind = AttackKind::White;
    std::vector<double> abscissa;  // sigma, or L2 fooling distance
    std::vector<double> value;     // accuracy %, or cumulative test error %
    bool value_is_error = false;
    std::size_t n_test = 0;
};

// Accuracy per noise level, one perturbed copy per (point, sigma), over
// the first n_test points (0 = all).  sigmas must be strictly increasing;
// sigma = 0 reproduces clean accuracy.
RobustnessCurve accuracy_under_noise(const Mlp& model, const Dataset& test,
                                     const std::vector<double>& sigmas, std::size_t n_test,
                                     Rng& rng);

// Minimal successful perturbation for each of the first n_test points
// (0 = all):
//   white — fixed noise direction, sigma doubling then 20-step bisection;
//   fgsm  — bisection on eps to 1e-4 absolute;
//   pgd/cw — distance of the returned adversarial example.
// Points the attack never fools are censored at the largest budget tried:
// excluded from the median, still counted in the curve denominator.
struct FoolingPoint {
    std::size_t index = 0;
    double distance = 0.0;
    bool censored = false;
};
struct SweepResult {
    RobustnessCurve curve;  // cumulative test error % vs L2 distance
    std::vector<FoolingPoint> points;
    double median = 0.0;  // over uncensored distances; NaN if none
    std::size_t n_censored = 0;
};
SweepResult fooling_distance_sweep(const Mlp& model, const Dataset& test,
                                   const AttackConfig& cfg, std::size_t n_test);

}  // namespace jrlab
