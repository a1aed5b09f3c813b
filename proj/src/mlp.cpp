#include "jrlab/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jrlab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace jrlab {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + name + "' (expected tanh, relu or identity)");
}

std::size_t Mlp::input_width() const {
    if (layers.empty()) throw StateError("model has no layers");
    return layers.front().fan_in();
}

std::size_t Mlp::output_width() const {
    if (layers.empty()) throw StateError("model has no layers");
    return layers.back().fan_out();
}

std::vector<std::size_t> Mlp::dims() const {
    std::vector<std::size_t> d;
    d.push_back(input_width());
    for (const Layer& l : layers) d.push_back(l.fan_out());
    return d;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

void Mlp::validate() const {
    if (layers.empty()) throw StateError("model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        if (layer.weight.ndim() != 2)
            throw DimensionError("layer " + std::to_string(l) + ": weight is not 2-D");
        if (layer.bias.size() != layer.fan_out())
            throw DimensionError("layer " + std::to_string(l) + ": bias width "
                                 + std::to_string(layer.bias.size()) + " != fan-out "
                                 + std::to_string(layer.fan_out()));
        if (l > 0 && layer.fan_in() != layers[l - 1].fan_out())
            throw DimensionError("layer " + std::to_string(l) + ": fan-in "
                                 + std::to_string(layer.fan_in()) + " != previous fan-out "
                                 + std::to_string(layers[l - 1].fan_out()));
    }
    if (layers.back().activation != Activation::Identity)
        throw StateError("last layer must be identity so outputs are logits");
    if (layers.front().dropout_input)
        throw StateError("input layer must not drop its input");
}

Mlp xavier_init(const std::vector<std::size_t>& dims, Activation hidden_activation,
                std::uint64_t seed) {
    if (dims.size() < 2) throw ConfigError("xavier_init: need at least [n_in, n_out]");
    for (std::size_t d : dims)
        if (d == 0) throw ConfigError("xavier_init: zero layer width");
    Mlp model;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        layer.weight = Tensor::zeros({fan_out, fan_in});
        layer.bias = Tensor::zeros({fan_out});
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Rng wrng = rng.child(l + 1);
        for (double& w : layer.weight.data) w = wrng.uniform(-a, a);
        const bool last = (l + 2 == dims.size());
        layer.activation = last ? Activation::Identity : hidden_activation;
        layer.dropout_input = (l > 0);
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

ParamGrads ParamGrads::zeros_like(const Mlp& model) {
    ParamGrads g;
    for (const Layer& l : model.layers) {
        g.weight.push_back(Tensor::zeros(l.weight.shape));
        g.bias.push_back(Tensor::zeros(l.bias.shape));
    }
    return g;
}

void ParamGrads::add_scaled(const ParamGrads& other, double s) {
    if (weight.size() != other.weight.size())
        throw DimensionError("add_scaled: layer count mismatch");
    for (std::size_t l = 0; l < weight.size(); ++l) {
        if (!weight[l].same_shape(other.weight[l]) || !bias[l].same_shape(other.bias[l]))
            throw DimensionError("add_scaled: shape mismatch at layer " + std::to_string(l));
        for (std::size_t i = 0; i < weight[l].size(); ++i)
            weight[l].data[i] += s * other.weight[l].data[i];
        for (std::size_t i = 0; i < bias[l].size(); ++i)
            bias[l].data[i] += s * other.bias[l].data[i];
    }
}

void ParamGrads::scale(double s) {
    for (Tensor& t : weight) t *= s;
    for (Tensor& t : bias) t *= s;
}

double ParamGrads::max_abs() const {
    double m = 0.0;
    for (const Tensor& t : weight)
        for (double v : t.data) m = std::max(m, std::fabs(v));
    for (const Tensor& t : bias)
        for (double v : t.data) m = std::max(m, std::fabs(v));
    return m;
}

bool ParamGrads::congruent_with(const Mlp& model) const {
    if (weight.size() != model.layers.size() || bias.size() != model.layers.size()) return false;
    for (std::size_t l = 0; l < weight.size(); ++l)
        if (!weight[l].same_shape(model.layers[l].weight)
            || !bias[l].same_shape(model.layers[l].bias))
            return false;
    return true;
}

static void apply_activation(Activation a, const double* pre, double* act, std::size_t n) {
    switch (a) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) act[i] = std::tanh(pre[i]);
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            break;
        case Activation::Identity:
            std::memcpy(act, pre, n * sizeof(double));
            break;
    }
}

void activation_deriv(Activation a, const double* pre, const double* act, double* out,
                      std::size_t n) {
    switch (a) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 - act[i] * act[i];
            break;
        case Activation::Relu:
            // subgradient 0 at the kink
            for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? 1.0 : 0.0;
            break;
        case Activation::Identity:
            for (std::size_t i = 0; i < n; ++i) out[i] = 1.0;
            break;
    }
}

void activation_second_deriv(Activation a, const double* pre, const double* act, double* out,
                             std::size_t n) {
    (void)pre;
    switch (a) {
        case Activation::Tanh:
            // d/dz (1 - tanh^2) = -2 tanh (1 - tanh^2)
            for (std::size_t i = 0; i < n; ++i) out[i] = -2.0 * act[i] * (1.0 - act[i] * act[i]);
            break;
        case Activation::Relu:
        case Activation::Identity:
            for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
            break;
    }
}

ForwardTrace forward(const Mlp& model, const Tensor& X, double dropout_rate, bool train_mode,
                     Rng* rng) {
    model.validate();
    if (X.ndim() != 2 || X.cols() != model.input_width())
        throw DimensionError("forward: input is not [B x " + std::to_string(model.input_width())
                             + "]");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("forward: dropout_rate must lie in [0, 1)");
    const bool dropping = train_mode && dropout_rate > 0.0;
    if (dropping && rng == nullptr)
        throw ConfigError("forward: dropout requires an rng stream");

    const std::size_t B = X.rows();
    const std::size_t L = model.layer_count();
    ForwardTrace trace;
    trace.dims = model.dims();
    trace.batch = B;
    trace.train_mode = train_mode;
    trace.act.reserve(L + 1);
    trace.preact.reserve(L);
    trace.mask.assign(L, Tensor{});
    trace.act.push_back(X);

    const double keep = 1.0 - dropout_rate;
    for (std::size_t l = 0; l < L; ++l) {
        const Layer& layer = model.layers[l];
        const std::size_t n_in = layer.fan_in(), n_out = layer.fan_out();

        const Tensor* in = &trace.act[l];
        Tensor masked;
        if (dropping && layer.dropout_input) {
            Tensor& mask = trace.mask[l];
            mask = Tensor::zeros({B, n_in});
            for (double& m : mask.data) m = (rng->uniform() < dropout_rate) ? 0.0 : 1.0 / keep;
            masked = trace.act[l];
            for (std::size_t i = 0; i < masked.size(); ++i) masked.data[i] *= mask.data[i];
            in = &masked;
        }

        Tensor pre = Tensor::zeros({B, n_out});
        gemm_nt(model.precision, B, n_out, n_in, 1.0, in->data.data(),
                layer.weight.data.data(), 0.0, pre.data.data());
        for (std::size_t r = 0; r < B; ++r) {
            double* row = pre.row(r);
            for (std::size_t c = 0; c < n_out; ++c) row[c] += layer.bias.data[c];
        }
        Tensor act = Tensor::zeros({B, n_out});
        apply_activation(layer.activation, pre.data.data(), act.data.data(), pre.size());
        trace.preact.push_back(std::move(pre));
        trace.act.push_back(std::move(act));
    }
    return trace;
}

Tensor forward_logits(const Mlp& model, const Tensor& X) {
    return forward(model, X).act.back();
}

Tensor layer_input(const ForwardTrace& trace, std::size_t l) {
    if (l >= trace.preact.size()) throw IndexError("layer_input: layer index out of range");
    Tensor in = trace.act[l];
    const Tensor& mask = trace.mask[l];
    if (mask.size() != 0)
        for (std::size_t i = 0; i < in.size(); ++i) in.data[i] *= mask.data[i];
    return in;
}

void require_congruent(const Mlp& model, const ForwardTrace& trace) {
    if (trace.dims != model.dims())
        throw StateError("trace was recorded on a model with different layer widths");
    if (trace.act.size() != model.layer_count() + 1
        || trace.preact.size() != model.layer_count())
        throw StateError("trace is incomplete for this model");
}

// --- checkpoint i/o ---------------------------------------------------

namespace {

constexpr char kMagic[8] = {'J', 'R', 'L', 'A', 'B', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v, const std::string& name, const char* what) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError(name + ": truncated checkpoint while reading " + what);
}

void read_doubles(std::istream& in, double* dst, std::size_t n, const std::string& name,
                  const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError(name + ": truncated checkpoint while reading " + what);
}

}  // namespace

void save_checkpoint(const Mlp& model, std::ostream& out) {
    model.validate();
    for (const Layer& l : model.layers) {
        ensure_finite(l.weight, "checkpoint weight");
        ensure_finite(l.bias, "checkpoint bias");
    }
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(model.layer_count()));
    for (const Layer& l : model.layers) {
        write_pod(out, static_cast<std::uint32_t>(l.fan_out()));
        write_pod(out, static_cast<std::uint32_t>(l.fan_in()));
        write_pod(out, static_cast<std::uint8_t>(l.activation));
        write_pod(out, static_cast<std::uint8_t>(l.dropout_input ? 1 : 0));
        write_pod(out, static_cast<std::uint16_t>(0));
        out.write(reinterpret_cast<const char*>(l.weight.data.data()),
                  static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(l.bias.data.data()),
                  static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
    }
    write_pod(out, static_cast<std::uint8_t>(model.precision == Precision::f32 ? 1 : 0));
}

void save_checkpoint(const Mlp& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open '" + path + "' for writing");
    save_checkpoint(model, out);
    out.flush();
    if (!out) throw LoadError("failed to write checkpoint to '" + path + "'");
}

Mlp load_checkpoint(std::istream& in, const std::string& name) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError(name + ": bad checkpoint magic at offset 0");
    std::uint32_t version = 0, layer_count = 0;
    read_pod(in, version, name, "version");
    if (version != kVersion)
        throw ParseError(name + ": unsupported checkpoint version "
                         + std::to_string(version));
    read_pod(in, layer_count, name, "layer count");
    if (layer_count == 0 || layer_count > 1024)
        throw ParseError(name + ": implausible layer count " + std::to_string(layer_count));

    Mlp model;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        std::uint32_t n_out = 0, n_in = 0;
        std::uint8_t act = 0, drop = 0;
        std::uint16_t pad = 0;
        read_pod(in, n_out, name, "layer width");
        read_pod(in, n_in, name, "layer width");
        read_pod(in, act, name, "activation tag");
        read_pod(in, drop, name, "dropout flag");
        read_pod(in, pad, name, "padding");
        if (n_out == 0 || n_in == 0)
            throw ParseError(name + ": zero layer width in layer " + std::to_string(l));
        if (act > 2)
            throw ParseError(name + ": unknown activation tag " + std::to_string(act)
                             + " in layer " + std::to_string(l));
        Layer layer;
        layer.activation = static_cast<Activation>(act);
        layer.dropout_input = drop != 0;
        layer.weight = Tensor::zeros({n_out, n_in});
        layer.bias = Tensor::zeros({n_out});
        read_doubles(in, layer.weight.data.data(), layer.weight.size(), name, "weights");
        read_doubles(in, layer.bias.data.data(), layer.bias.size(), name, "biases");
        model.layers.push_back(std::move(layer));
    }
    std::uint8_t prec = 0;
    read_pod(in, prec, name, "precision tag");
    if (prec > 1) throw ParseError(name + ": unknown precision tag " + std::to_string(prec));
    model.precision = prec == 1 ? Precision::f32 : Precision::f64;
    model.validate();
    for (const Layer& l : model.layers) {
        if (!l.weight.all_finite() || !l.bias.all_finite())
            throw ParseError(name + ": checkpoint holds non-finite parameters");
    }
    return model;
}

Mlp load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
    return load_checkpoint(in, path);
}

}  // namespace jrlab
