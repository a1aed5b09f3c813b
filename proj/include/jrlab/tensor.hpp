#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace jrlab {

// Dense row-major tensor of doubles.  Rank 1 and 2 cover everything this
// library does; shape is carried explicitly so dimension mismatches fail
// loudly instead of reading garbage.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::initializer_list<std::size_t> s);
    static Tensor zeros(const std::vector<std::size_t>& s);
    static Tensor from(std::vector<std::size_t> s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    // 2-D accessors; throw DimensionError when the rank is wrong.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;
    double* row(std::size_t r);
    const double* row(std::size_t r) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);
};

// Throws DimensionError naming `what` when a non-finite entry appears.
void ensure_finite(const Tensor& t, const char* what);

// Sum of squared entries.
double squared_norm(const Tensor& t);

double dot(const double* a, const double* b, std::size_t n);

}  // namespace jrlab
