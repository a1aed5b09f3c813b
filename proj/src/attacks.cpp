#include "jrlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jrlab/errors.hpp"
#include "jrlab/grad.hpp"
#include "jrlab/loss.hpp"

namespace jrlab {

const char* attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::White: return "white";
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
        case AttackKind::Cw: return "cw";
    }
    return "?";
}

AttackKind attack_from_name(const std::string& name) {
    if (name == "white") return AttackKind::White;
    if (name == "fgsm") return AttackKind::Fgsm;
    if (name == "pgd") return AttackKind::Pgd;
    if (name == "cw") return AttackKind::Cw;
    throw ConfigError("unknown attack '" + name + "' (expected white, fgsm, pgd or cw)");
}

void AttackConfig::validate() const {
    if (pgd_step < 0.0 || pgd_ball < 0.0 || cw_adam_lr < 0.0 || cw_c_init < 0.0)
        throw ConfigError("attack: magnitudes must be >= 0");
    if (pgd_step > pgd_ball) throw ConfigError("attack: pgd step exceeds the l-inf ball");
    if (pgd_max_iters == 0 || cw_binary_steps == 0 || cw_max_opt_iters == 0)
        throw ConfigError("attack: iteration counts must be positive");
}

namespace {

void check_point(const Tensor& x, const Mlp& model, int label) {
    if (x.ndim() != 1 || x.size() != model.input_width())
        throw DimensionError("attack: x must be rank-1 of the model input width");
    if (label < 0 || static_cast<std::size_t>(label) >= model.output_width())
        throw IndexError("attack: label " + std::to_string(label) + " outside [0, "
                         + std::to_string(model.output_width()) + ")");
}

Tensor as_batch(const Tensor& x) { return Tensor::from({1, x.size()}, x.data); }

int predict_one(const Mlp& model, const Preprocess& pre, const Tensor& x_raw) {
    Tensor z = forward_logits(model, pre.apply(as_batch(x_raw)));
    return argmax_row(z.row(0), z.cols());
}

// dL_super/dx in raw pixel space at raw point x (label fixed).
Tensor loss_grad_raw(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label) {
    ForwardTrace trace = forward(model, pre.apply(as_batch(x_raw)));
    LossGrad lg = softmax_cross_entropy(trace.logits(), {label});
    Tensor g = vjp_input(model, trace, lg.dlogits);
    g *= 1.0 / pre.std_dev;  // chain rule through x' = (x - mean)/std
    return Tensor::from({g.cols()}, g.data);
}

double l2_distance(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

Tensor white_noise_perturb(const Tensor& x_raw, double sigma, Rng& rng) {
    if (sigma < 0.0 || !std::isfinite(sigma))
        throw ConfigError("white_noise_perturb: sigma must be finite and >= 0");
    Tensor out = x_raw;
    for (double& v : out.data) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
    return out;
}

Tensor fgsm_attack(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label,
                   double eps) {
    check_point(x_raw, model, label);
    if (eps < 0.0) throw ConfigError("fgsm_attack: eps must be >= 0");
    if (eps == 0.0) return x_raw;
    Tensor g = loss_grad_raw(model, pre, x_raw, label);
    Tensor out = x_raw;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = g.data[i] > 0.0 ? 1.0 : (g.data[i] < 0.0 ? -1.0 : 0.0);
        out.data[i] = std::clamp(out.data[i] + eps * s, 0.0, 1.0);
    }
    return out;
}

PgdOutcome pgd_attack(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label,
                      const AttackConfig& cfg) {
    cfg.validate();
    check_point(x_raw, model, label);
    PgdOutcome out;
    out.x = x_raw;
    if (predict_one(model, pre, out.x) != label) {
        out.fooled = true;
        return out;  // zero iterations by contract
    }
    for (std::size_t it = 1; it <= cfg.pgd_max_iters; ++it) {
        Tensor g = loss_grad_raw(model, pre, out.x, label);
        for (std::size_t i = 0; i < out.x.size(); ++i) {
            const double s = g.data[i] > 0.0 ? 1.0 : (g.data[i] < 0.0 ? -1.0 : 0.0);
            double v = out.x.data[i] + cfg.pgd_step * s;
            v = std::clamp(v, x_raw.data[i] - cfg.pgd_ball, x_raw.data[i] + cfg.pgd_ball);
            out.x.data[i] = std::clamp(v, 0.0, 1.0);
        }
        out.iters = it;
        if (predict_one(model, pre, out.x) != label) {
            out.fooled = true;
            return out;
        }
    }
    return out;
}

CwOutcome cw_attack(const Mlp& model, const Preprocess& pre, const Tensor& x_raw, int label,
                    const AttackConfig& cfg) {
    cfg.validate();
    check_point(x_raw, model, label);
    const std::size_t I = x_raw.size();
    const std::size_t C = model.output_width();

    CwOutcome best;
    best.x = x_raw;
    best.l2 = std::numeric_limits<double>::infinity();

    // w parameterises x = (tanh(w) + 1) / 2, which keeps iterates inside
    // the box without projections.
    Tensor w0 = Tensor::zeros({I});
    for (std::size_t i = 0; i < I; ++i) {
        const double xi = std::clamp(x_raw.data[i], 1e-6, 1.0 - 1e-6);
        w0.data[i] = std::atanh(2.0 * xi - 1.0);
    }

    double c = cfg.cw_c_init;
    double c_lo = 0.0, c_hi = std::numeric_limits<double>::infinity();
    const double b1 = 0.9, b2 = 0.999, eps_adam = 1e-8;

    for (std::size_t round = 0; round < cfg.cw_binary_steps; ++round) {
        Tensor w = w0;
        Tensor m = Tensor::zeros({I}), v = Tensor::zeros({I});
        bool round_fooled = false;

        for (std::size_t it = 1; it <= cfg.cw_max_opt_iters; ++it) {
            Tensor x = Tensor::zeros({I});
            for (std::size_t i = 0; i < I; ++i) x.data[i] = (std::tanh(w.data[i]) + 1.0) / 2.0;

            ForwardTrace trace = forward(model, pre.apply(as_batch(x)));
            const double* z = trace.logits().row(0);
            int runner = -1;
            double zmax = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < C; ++k)
                if (static_cast<int>(k) != label && z[k] > zmax) {
                    zmax = z[k];
                    runner = static_cast<int>(k);
                }
            const double margin = z[label] - zmax;

            if (margin < 0.0) {
                round_fooled = true;
                const double d = l2_distance(x, x_raw);
                if (d < best.l2) {
                    best.x = x;
                    best.l2 = d;
                    best.fooled = true;
                }
            }

            // d/dx of ||x - x0||^2 + c * f6, with f6 active only above the
            // margin kink.
            Tensor gx = Tensor::zeros({I});
            for (std::size_t i = 0; i < I; ++i) gx.data[i] = 2.0 * (x.data[i] - x_raw.data[i]);
            if (margin > 0.0) {
                Tensor V = Tensor::zeros({1, C});
                V.at(0, static_cast<std::size_t>(label)) = 1.0;
                V.at(0, static_cast<std::size_t>(runner)) = -1.0;
                Tensor gm = vjp_input(model, trace, V);
                for (std::size_t i = 0; i < I; ++i)
                    gx.data[i] += c * gm.data[i] / pre.std_dev;
            }

            // Chain through the reparameterisation, then one Adam step.
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(it));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(it));
            for (std::size_t i = 0; i < I; ++i) {
                const double th = std::tanh(w.data[i]);
                const double gw = gx.data[i] * (1.0 - th * th) / 2.0;
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * gw;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * gw * gw;
                w.data[i] -= cfg.cw_adam_lr * (m.data[i] / bc1)
                             / (std::sqrt(v.data[i] / bc2) + eps_adam);
            }
        }

        if (round_fooled) {
            c_hi = c;
            c = (c_lo + c_hi) / 2.0;
        } else {
            c_lo = c;
            c = std::isinf(c_hi) ? c * 10.0 : (c_lo + c_hi) / 2.0;
        }
    }
    if (!best.fooled) best.l2 = l2_distance(best.x, x_raw);  // = 0, by construction
    return best;
}

RobustnessCurve accuracy_under_noise(const Mlp& model, const Dataset& test,
                                     const std::vector<double>& sigmas, std::size_t n_test,
                                     Rng& rng) {
    for (std::size_t i = 1; i < sigmas.size(); ++i)
        if (sigmas[i] <= sigmas[i - 1])
            throw ConfigError("accuracy_under_noise: sigmas must be strictly increasing");
    if (!sigmas.empty() && sigmas.front() < 0.0)
        throw ConfigError("accuracy_under_noise: sigma must be >= 0");
    test.validate();
    const std::size_t N = n_test == 0 ? test.size() : std::min(n_test, test.size());
    if (N == 0) throw DataError("accuracy_under_noise: empty test set");

    RobustnessCurve curve;
    curve.kind = AttackKind::White;
    curve.n_test = N;
    curve.abscissa = sigmas;
    curve.value.resize(sigmas.size(), 0.0);
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        std::size_t hits = 0;
        for (std::size_t p = 0; p < N; ++p) {
            Rng prng = rng.child(si * N + p + 1);
            Tensor noisy = white_noise_perturb(test.image(p), sigmas[si], prng);
            if (predict_one(model, test.pre, noisy) == test.labels[p]) ++hits;
        }
        curve.value[si] = 100.0 * static_cast<double>(hits) / static_cast<double>(N);
    }
    return curve;
}

namespace {

// Minimal fooling budget along a fixed direction-family f(budget), given a
// predicate that evaluates and remembers the best (smallest) success.
struct BudgetSearch {
    double lo = 0.0;      // largest budget known to fail
    double hi = 0.0;      // smallest budget known to fool (once found)
    bool found = false;
};

}  // namespace

SweepResult fooling_distance_sweep(const Mlp& model, const Dataset& test,
                                   const AttackConfig& cfg, std::size_t n_test) {
    cfg.validate();
    test.validate();
    const std::size_t N = n_test == 0 ? test.size() : std::min(n_test, test.size());
    if (N == 0) throw DataError("fooling_distance_sweep: empty test set");

    Rng root(cfg.seed);
    SweepResult out;
    out.points.reserve(N);

    for (std::size_t p = 0; p < N; ++p) {
        const Tensor x = test.image(p);
        const int label = test.labels[p];
        FoolingPoint fp;
        fp.index = p;

        if (predict_one(model, test.pre, x) != label) {
            fp.distance = 0.0;  // cleanly misclassified: fooled for free
            out.points.push_back(fp);
            continue;
        }

        switch (cfg.kind) {
            case AttackKind::White: {
                // One fixed noise direction per point; scale its sigma.
                Rng prng = root.child(p + 1);
                Tensor dir = Tensor::zeros({x.size()});
                prng.fill_normal(dir.data.data(), dir.size());
                auto probe = [&](double sigma) {
                    Tensor noisy = x;
                    for (std::size_t i = 0; i < noisy.size(); ++i)
                        noisy.data[i] = std::clamp(noisy.data[i] + sigma * dir.data[i], 0.0, 1.0);
                    return noisy;
                };
                BudgetSearch bs;
                double sigma = 0.01;
                for (int d = 0; d < 14 && !bs.found; ++d) {
                    if (predict_one(model, test.pre, probe(sigma)) != label) {
                        bs.hi = sigma;
                        bs.found = true;
                    } else {
                        bs.lo = sigma;
                        sigma *= 2.0;
                    }
                }
                if (!bs.found) {
                    fp.censored = true;
                    fp.distance = l2_distance(probe(bs.lo), x);
                    break;
                }
                for (int it = 0; it < 20; ++it) {
                    const double mid = (bs.lo + bs.hi) / 2.0;
                    if (predict_one(model, test.pre, probe(mid)) != label)
                        bs.hi = mid;
                    else
                        bs.lo = mid;
                }
                fp.distance = l2_distance(probe(bs.hi), x);
                break;
            }
            case AttackKind::Fgsm: {
                auto probe = [&](double eps) { return fgsm_attack(model, test.pre, x, label, eps); };
                BudgetSearch bs;
                double eps = 1.0 / 255.0;
                for (int d = 0; d < 10 && !bs.found; ++d) {  // up to eps = 2 > box diameter
                    if (predict_one(model, test.pre, probe(eps)) != label) {
                        bs.hi = eps;
                        bs.found = true;
                    } else {
                        bs.lo = eps;
                        eps *= 2.0;
                    }
                }
                if (!bs.found) {
                    fp.censored = true;
                    fp.distance = l2_distance(probe(bs.lo), x);
                    break;
                }
                while (bs.hi - bs.lo > 1e-4) {
                    const double mid = (bs.lo + bs.hi) / 2.0;
                    if (predict_one(model, test.pre, probe(mid)) != label)
                        bs.hi = mid;
                    else
                        bs.lo = mid;
                }
                fp.distance = l2_distance(probe(bs.hi), x);
                break;
            }
            case AttackKind::Pgd: {
                PgdOutcome r = pgd_attack(model, test.pre, x, label, cfg);
                fp.censored = !r.fooled;
                fp.distance = l2_distance(r.x, x);
                break;
            }
            case AttackKind::Cw: {
                CwOutcome r = cw_attack(model, test.pre, x, label, cfg);
                fp.censored = !r.fooled;
                fp.distance = r.fooled ? r.l2 : l2_distance(r.x, x);
                break;
            }
        }
        out.points.push_back(fp);
    }

    std::vector<double> fooled;
    for (const FoolingPoint& fp : out.points) {
        if (fp.censored)
            ++out.n_censored;
        else
            fooled.push_back(fp.distance);
    }
    std::sort(fooled.begin(), fooled.end());
    if (fooled.empty()) {
        out.median = std::numeric_limits<double>::quiet_NaN();
    } else if (fooled.size() % 2 == 1) {
        out.median = fooled[fooled.size() / 2];
    } else {
        out.median = (fooled[fooled.size() / 2 - 1] + fooled[fooled.size() / 2]) / 2.0;
    }

    out.curve.kind = cfg.kind;
    out.curve.value_is_error = true;
    out.curve.n_test = N;
    std::size_t count = 0;
    for (std::size_t i = 0; i < fooled.size(); ++i) {
        ++count;
        if (i + 1 < fooled.size() && fooled[i + 1] == fooled[i]) continue;
        out.curve.abscissa.push_back(fooled[i]);
        out.curve.value.push_back(100.0 * static_cast<double>(count) / static_cast<double>(N));
    }
    return out;
}

}  // namespace jrlab
