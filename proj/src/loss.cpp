#include "jrlab/loss.hpp"

#include <cmath>
#include <string>

#include "jrlab/errors.hpp"

namespace jrlab {

std::vector<double> softmax_row(const double* logits, std::size_t n, double temperature) {
    if (temperature <= 0.0) throw ConfigError("softmax: temperature must be positive");
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    std::vector<double> p(n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp((logits[i] - mx) / temperature);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

LossGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                               double temperature) {
    if (temperature <= 0.0) throw ConfigError("softmax: temperature must be positive");
    const std::size_t B = logits.rows(), C = logits.cols();
    if (labels.size() != B)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size())
                             + " labels for batch of " + std::to_string(B));
    LossGrad out;
    out.loss = 0.0;
    out.dlogits = Tensor::zeros({B, C});
    const double inv = 1.0 / (static_cast<double>(B) * temperature);
    for (std::size_t r = 0; r < B; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw IndexError("cross_entropy: label " + std::to_string(y)
                             + " outside [0, " + std::to_string(C) + ") at row "
                             + std::to_string(r));
        const double* z = logits.row(r);
        double mx = z[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, z[c]);
        double lse = 0.0;
        for (std::size_t c = 0; c < C; ++c) lse += std::exp((z[c] - mx) / temperature);
        lse = std::log(lse);
        out.loss += lse - (z[static_cast<std::size_t>(y)] - mx) / temperature;
        double* g = out.dlogits.row(r);
        for (std::size_t c = 0; c < C; ++c)
            g[c] = std::exp((z[c] - mx) / temperature - lse) * inv;
        g[static_cast<std::size_t>(y)] -= inv;
    }
    out.loss /= static_cast<double>(B);
    return out;
}

int argmax_row(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
}

std::vector<int> predict(const Mlp& model, const Tensor& X) {
    Tensor z = forward_logits(model, X);
    std::vector<int> out(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) out[r] = argmax_row(z.row(r), z.cols());
    return out;
}

}  // namespace jrlab
