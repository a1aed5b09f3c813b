#pragma once

#include <cstdint>
#include <vector>

#include "jrlab/dataset.hpp"
#include "jrlab/mlp.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab {

// A 2-D cross-section of the classifier's decision cells: the plane
// through `center` spanned by an orthonormal basis (u, v), sampled on a
// (resolution x resolution) grid of half-width `extent` in raw input
// units.  Grid points are cropped to [0, 1] before evaluation, matching
// how any probe would reach the model.
struct DecisionSlice {
    Tensor center;  // rank-1 raw input
    Tensor basis_u, basis_v;
    double extent = 0.0;
    std::size_t resolution = 0;
    int center_class = -1;
    std::vector<int> cell_class;        // row-major [resolution x resolution]
    std::vector<double> cell_max_prob;  // max softmax probability per cell
    double boundary_radius = 0.0;       // nearest in-plane class change
    std::uint64_t basis_seed = 0;

    std::size_t cell(std::size_t i, std::size_t j) const { return i * resolution + j; }
};

// Random-plane slice: two seeded Gaussian directions, Gram-Schmidt
// orthonormalised.  resolution must be odd and >= 3 so the center point is
// itself a grid node; the center cell's class always equals the model's
// direct prediction.  boundary_radius comes from radial bisection along 64
// angles to 1e-3 input units, capped at `extent` when no change is found.
DecisionSlice decision_slice(const Mlp& model, const Preprocess& pre, const Tensor& center,
                             std::size_t resolution, double extent, std::uint64_t seed);

// Same, but the plane is spanned by two caller-provided directions (for
// example FGSM directions of two other models), orthonormalised here.
// Collinear or zero directions throw BasisError.
DecisionSlice decision_slice_with_basis(const Mlp& model, const Preprocess& pre,
                                        const Tensor& center, const Tensor& dir1,
                                        const Tensor& dir2, std::size_t resolution,
                                        double extent);

}  // namespace jrlab
