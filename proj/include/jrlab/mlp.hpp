#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "jrlab/linalg.hpp"
#include "jrlab/rng.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab {

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1, Identity = 2 };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// One affine layer z -> act(W z + b).  `dropout_input` marks whether the
// layer's input participates in dropout during training; the input layer
// never does, so raw features are never zeroed.
struct Layer {
    Tensor weight;  // [out x in]
    Tensor bias;    // [out]
    Activation activation = Activation::Tanh;
    bool dropout_input = false;

    std::size_t fan_in() const { return weight.cols(); }
    std::size_t fan_out() const { return weight.rows(); }
};

struct Mlp {
    std::vector<Layer> layers;
    Precision precision = Precision::f64;

    std::size_t input_width() const;
    std::size_t output_width() const;
    std::size_t layer_count() const { return layers.size(); }
    std::vector<std::size_t> dims() const;  // [n_in, hidden..., n_out]
    std::size_t param_count() const;

    // Chained widths, at least one layer, identity on the last layer.
    void validate() const;
};

// Uniform Xavier/Glorot initialisation: W ~ U[-a, a] with
// a = sqrt(6 / (fan_in + fan_out)), biases zero.  `dims` is
// [n_in, hidden..., n_out]; `hidden_activation` applies to every layer but
// the last, which is identity so the outputs are logits.
Mlp xavier_init(const std::vector<std::size_t>& dims, Activation hidden_activation,
                std::uint64_t seed);

// Gradient (or velocity) container congruent with a model's parameters.
struct ParamGrads {
    std::vector<Tensor> weight;
    std::vector<Tensor> bias;

    static ParamGrads zeros_like(const Mlp& model);
    void add_scaled(const ParamGrads& other, double s);
    void scale(double s);
    double max_abs() const;
    bool congruent_with(const Mlp& model) const;
};

// Everything forward() saw, kept for the backward passes.  act[0] is the
// input batch; act[l+1] = activation(preact[l]).  mask[l], when non-empty,
// holds the inverted-dropout factors (0 or 1/(1-p)) applied to act[l]
// before layer l consumed it.
struct ForwardTrace {
    std::vector<Tensor> preact;
    std::vector<Tensor> act;
    std::vector<Tensor> mask;
    std::vector<std::size_t> dims;
    std::size_t batch = 0;
    bool train_mode = false;

    const Tensor& logits() const { return act.back(); }
};

// Runs the batch through the model.  X is [B x n_in], already
// preprocessed.  In train mode with dropout_rate > 0, eligible layer
// inputs are zeroed i.i.d. with probability dropout_rate and survivors are
// scaled by 1/(1-dropout_rate), so activations match eval mode in
// expectation; rng must then be provided.  dropout_rate must lie in [0, 1).
ForwardTrace forward(const Mlp& model, const Tensor& X, double dropout_rate = 0.0,
                     bool train_mode = false, Rng* rng = nullptr);

// Eval-mode logits only.
Tensor forward_logits(const Mlp& model, const Tensor& X);

// Effective input consumed by layer l under `trace` (applies the stored
// dropout mask when present).
Tensor layer_input(const ForwardTrace& trace, std::size_t l);

// Throws StateError unless the trace was produced by a model of this shape.
void require_congruent(const Mlp& model, const ForwardTrace& trace);

// Elementwise activation helpers evaluated from the stored pre-activation
// and activation values (tanh reuses act: sigma' = 1 - z^2).
void activation_deriv(Activation a, const double* pre, const double* act, double* out,
                      std::size_t n);
void activation_second_deriv(Activation a, const double* pre, const double* act, double* out,
                             std::size_t n);

// Binary checkpoint round-trip.  Layout (little-endian): magic "JRLABNET",
// u32 version=1, u32 layer count, then per layer u32 out, u32 in, u8
// activation tag, u8 dropout_input, u16 zero pad, f64 weights row-major,
// f64 biases; finally u8 precision tag.  Load failures throw ParseError
// (bad magic, short file, unknown tags) with the failing offset.
void save_checkpoint(const Mlp& model, const std::string& path);
Mlp load_checkpoint(const std::string& path);
void save_checkpoint(const Mlp& model, std::ostream& out);
Mlp load_checkpoint(std::istream& in, const std::string& name);

}  // namespace jrlab
