#include "jrlab/slice.hpp"

#include <algorithm>
#include <cmath>

#include "jrlab/errors.hpp"
#include "jrlab/loss.hpp"
#include "jrlab/rng.hpp"

namespace jrlab {

namespace {

double norm(const Tensor& t) { return std::sqrt(squared_norm(t)); }

// Orthonormalise (d1, d2) in place; throws BasisError when they do not
// span a plane.
void gram_schmidt(Tensor& d1, Tensor& d2) {
    const double n1 = norm(d1);
    if (!(n1 > 1e-12)) throw BasisError("slice basis: first direction is numerically zero");
    d1 *= 1.0 / n1;
    const double proj = dot(d1.data.data(), d2.data.data(), d1.size());
    for (std::size_t i = 0; i < d2.size(); ++i) d2.data[i] -= proj * d1.data[i];
    const double n2 = norm(d2);
    if (!(n2 > 1e-12))
        throw BasisError("slice basis: directions are collinear (residual norm "
                         + std::to_string(n2) + ")");
    d2 *= 1.0 / n2;
}

Tensor plane_point(const Tensor& center, const Tensor& u, const Tensor& v, double a, double b) {
    Tensor x = center;
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data[i] = std::clamp(x.data[i] + a * u.data[i] + b * v.data[i], 0.0, 1.0);
    return x;
}

DecisionSlice build(const Mlp& model, const Preprocess& pre, const Tensor& center, Tensor u,
                    Tensor v, std::size_t resolution, double extent, std::uint64_t seed) {
    if (resolution < 3 || resolution % 2 == 0)
        throw ConfigError("slice: resolution must be odd and at least 3");
    if (!(extent > 0.0) || !std::isfinite(extent))
        throw ConfigError("slice: extent must be positive");
    if (center.ndim() != 1 || center.size() != model.input_width())
        throw DimensionError("slice: center must be rank-1 of the model input width");
    if (u.shape != center.shape || v.shape != center.shape)
        throw DimensionError("slice: basis directions must match the center's width");
    gram_schmidt(u, v);

    DecisionSlice s;
    s.center = center;
    s.basis_u = u;
    s.basis_v = v;
    s.extent = extent;
    s.resolution = resolution;
    s.basis_seed = seed;
    s.cell_class.assign(resolution * resolution, -1);
    s.cell_max_prob.assign(resolution * resolution, 0.0);

    // Grid evaluation, batched row-by-row.
    const std::size_t G = resolution;
    const double step = 2.0 * extent / static_cast<double>(G - 1);
    Tensor X = Tensor::zeros({G, center.size()});
    for (std::size_t i = 0; i < G; ++i) {
        const double a = -extent + static_cast<double>(i) * step;
        for (std::size_t j = 0; j < G; ++j) {
            const double b = -extent + static_cast<double>(j) * step;
            Tensor x = plane_point(center, u, v, a, b);
            std::copy(x.data.begin(), x.data.end(), X.row(j));
        }
        Tensor z = forward_logits(model, pre.apply(X));
        for (std::size_t j = 0; j < G; ++j) {
            const int cls = argmax_row(z.row(j), z.cols());
            s.cell_class[s.cell(i, j)] = cls;
            std::vector<double> p = softmax_row(z.row(j), z.cols());
            s.cell_max_prob[s.cell(i, j)] = p[static_cast<std::size_t>(cls)];
        }
    }

    // The center is a node of the odd grid, so this is the same crop-and-
    // predict path the grid used.
    Tensor c0 = plane_point(center, u, v, 0.0, 0.0);
    Tensor z0 = forward_logits(model, pre.apply(Tensor::from({1, c0.size()}, c0.data)));
    s.center_class = argmax_row(z0.row(0), z0.cols());

    // Radial bisection for the nearest in-plane decision change.
    auto class_at = [&](double a, double b) {
        Tensor x = plane_point(center, u, v, a, b);
        Tensor z = forward_logits(model, pre.apply(Tensor::from({1, x.size()}, x.data)));
        return argmax_row(z.row(0), z.cols());
    };
    const std::size_t n_angles = 64;
    double best = extent;
    const double march = extent / 64.0;
    for (std::size_t k = 0; k < n_angles; ++k) {
        const double phi = 2.0 * 3.14159265358979323846 * static_cast<double>(k)
                           / static_cast<double>(n_angles);
        const double ca = std::cos(phi), sb = std::sin(phi);
        double lo = 0.0, hi = 0.0;
        bool found = false;
        for (double r = march; r <= extent + 1e-12 && !found; r += march) {
            if (class_at(r * ca, r * sb) != s.center_class) {
                hi = r;
                found = true;
            } else {
                lo = r;
            }
        }
        if (!found) continue;
        while (hi - lo > 1e-3) {
            const double mid = (lo + hi) / 2.0;
            if (class_at(mid * ca, mid * sb) != s.center_class)
                hi = mid;
            else
                lo = mid;
        }
        best = std::min(best, hi);
    }
    s.boundary_radius = best;
    return s;
}

}  // namespace

DecisionSlice decision_slice(const Mlp& model, const Preprocess& pre, const Tensor& center,
                             std::size_t resolution, double extent, std::uint64_t seed) {
    Rng rng(seed);
    Tensor u = Tensor::zeros({center.size()});
    Tensor v = Tensor::zeros({center.size()});
    Rng r1 = rng.child(1), r2 = rng.child(2);
    r1.fill_normal(u.data.data(), u.size());
    r2.fill_normal(v.data.data(), v.size());
    return build(model, pre, center, std::move(u), std::move(v), resolution, extent, seed);
}

DecisionSlice decision_slice_with_basis(const Mlp& model, const Preprocess& pre,
                                        const Tensor& center, const Tensor& dir1,
                                        const Tensor& dir2, std::size_t resolution,
                                        double extent) {
    return build(model, pre, center, dir1, dir2, resolution, extent, 0);
}

}  // namespace jrlab
