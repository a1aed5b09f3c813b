#include "jrlab/tensor.hpp"

#include <cmath>
#include <string>

#include "jrlab/errors.hpp"

namespace jrlab {

static std::size_t shape_product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
}

Tensor Tensor::zeros(std::initializer_list<std::size_t> s) {
    return zeros(std::vector<std::size_t>(s));
}

Tensor Tensor::zeros(const std::vector<std::size_t>& s) {
    Tensor t;
    t.shape = s;
    t.data.assign(shape_product(s), 0.0);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> s, std::vector<double> values) {
    if (shape_product(s) != values.size())
        throw DimensionError("tensor shape does not match value count ("
                             + std::to_string(shape_product(s)) + " vs "
                             + std::to_string(values.size()) + ")");
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(values);
    return t;
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw DimensionError("rows(): tensor is not 2-D");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw DimensionError("cols(): tensor is not 2-D");
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    if (ndim() != 2 || r >= shape[0] || c >= shape[1])
        throw DimensionError("at(): index outside 2-D tensor");
    return data[r * shape[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (ndim() != 2 || r >= shape[0] || c >= shape[1])
        throw DimensionError("at(): index outside 2-D tensor");
    return data[r * shape[1] + c];
}

double* Tensor::row(std::size_t r) {
    if (ndim() != 2 || r >= shape[0]) throw DimensionError("row(): index outside 2-D tensor");
    return data.data() + r * shape[1];
}

const double* Tensor::row(std::size_t r) const {
    if (ndim() != 2 || r >= shape[0]) throw DimensionError("row(): index outside 2-D tensor");
    return data.data() + r * shape[1];
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) throw DimensionError("operator+=: shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data) v *= s;
    return *this;
}

void ensure_finite(const Tensor& t, const char* what) {
    if (!t.all_finite())
        throw DimensionError(std::string(what) + " contains a non-finite entry");
}

double squared_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace jrlab
