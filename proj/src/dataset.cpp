#include "jrlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "jrlab/errors.hpp"
#include "jrlab/rng.hpp"

namespace jrlab {

void Preprocess::validate() const {
    if (!std::isfinite(mean) || !std::isfinite(std_dev))
        throw ConfigError("preprocess: stats must be finite");
    if (std_dev <= 0.0) throw ConfigError("preprocess: std must be positive");
}

Tensor Preprocess::apply(const Tensor& raw) const {
    validate();
    Tensor out = raw;
    for (double& v : out.data) v = (v - mean) / std_dev;
    return out;
}

Tensor Preprocess::invert(const Tensor& scaled) const {
    validate();
    Tensor out = scaled;
    for (double& v : out.data) v = v * std_dev + mean;
    return out;
}

void Dataset::validate() const {
    if (images.ndim() != 2) throw DataError("dataset: images must be [N x I]");
    if (images.rows() != labels.size())
        throw DataError("dataset: " + std::to_string(images.rows()) + " images vs "
                        + std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw DataError("dataset: label " + std::to_string(labels[i]) + " at row "
                            + std::to_string(i) + " outside [0, " + std::to_string(classes)
                            + ")");
    pre.validate();
}

Tensor Dataset::image(std::size_t r) const {
    const double* row = images.row(r);
    return Tensor::from({images.cols()}, std::vector<double>(row, row + images.cols()));
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError(path + ": truncated while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16)
           | (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw LoadError("cannot open image file '" + images_path + "'");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw LoadError("cannot open label file '" + labels_path + "'");

    const std::uint32_t img_magic = read_be32(img, images_path, "magic");
    if (img_magic != 2051)
        throw ParseError(images_path + ": bad image magic " + std::to_string(img_magic)
                         + " at offset 0 (want 2051)");
    const std::uint32_t lab_magic = read_be32(lab, labels_path, "magic");
    if (lab_magic != 2049)
        throw ParseError(labels_path + ": bad label magic " + std::to_string(lab_magic)
                         + " at offset 0 (want 2049)");

    const std::uint32_t n_img = read_be32(img, images_path, "image count");
    const std::uint32_t rows = read_be32(img, images_path, "row count");
    const std::uint32_t cols = read_be32(img, images_path, "column count");
    const std::uint32_t n_lab = read_be32(lab, labels_path, "label count");
    if (n_img != n_lab)
        throw ParseError(images_path + ": " + std::to_string(n_img) + " images but "
                         + std::to_string(n_lab) + " labels in " + labels_path);

    const std::size_t I = std::size_t(rows) * cols;
    Dataset ds;
    ds.images = Tensor::zeros({n_img, I});
    ds.labels.resize(n_img);

    std::vector<unsigned char> buf(I);
    for (std::uint32_t r = 0; r < n_img; ++r) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(I));
        if (!img)
            throw ParseError(images_path + ": truncated at image " + std::to_string(r)
                             + " of " + std::to_string(n_img));
        double* row = ds.images.row(r);
        for (std::size_t i = 0; i < I; ++i) row[i] = buf[i] / 255.0;
    }
    int max_label = -1;
    for (std::uint32_t r = 0; r < n_lab; ++r) {
        unsigned char y;
        lab.read(reinterpret_cast<char*>(&y), 1);
        if (!lab)
            throw ParseError(labels_path + ": truncated at label " + std::to_string(r)
                             + " of " + std::to_string(n_lab));
        ds.labels[r] = y;
        max_label = std::max(max_label, int(y));
    }
    ds.classes = static_cast<std::size_t>(max_label + 1);
    ds.validate();
    return ds;
}

Tensor bilinear_upsample(const Tensor& img, std::size_t target) {
    if (img.ndim() != 2 || img.rows() != img.cols())
        throw DimensionError("bilinear_upsample: input must be square");
    const std::size_t S = img.rows();
    if (S < 2 || S >= target)
        throw DimensionError("bilinear_upsample: input side must be in [2, target)");
    Tensor out = Tensor::zeros({target, target});
    const double scale = static_cast<double>(S - 1) / static_cast<double>(target - 1);
    for (std::size_t i = 0; i < target; ++i) {
        const double sy = i * scale;
        const std::size_t y0 = std::min(static_cast<std::size_t>(sy), S - 2);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t j = 0; j < target; ++j) {
            const double sx = j * scale;
            const std::size_t x0 = std::min(static_cast<std::size_t>(sx), S - 2);
            const double fx = sx - static_cast<double>(x0);
            const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x0 + 1) * fx;
            const double bot = img.at(y0 + 1, x0) * (1.0 - fx) + img.at(y0 + 1, x0 + 1) * fx;
            out.at(i, j) = top * (1.0 - fy) + bot * fy;
        }
    }
    return out;
}

Dataset make_blobs(const BlobSpec& spec, std::size_t per_class, std::uint64_t noise_seed) {
    if (spec.classes < 2) throw ConfigError("make_blobs: need at least 2 classes");
    if (spec.side < 8) throw ConfigError("make_blobs: side must be at least 8");
    if (per_class == 0) throw ConfigError("make_blobs: per_class must be positive");
    const std::size_t I = spec.side * spec.side;
    const std::size_t N = per_class * spec.classes;

    // Class prototypes: a few smooth bumps at seeded positions, so classes
    // are separable but not linearly trivial.
    Rng proto_rng(spec.prototype_seed);
    Tensor protos = Tensor::zeros({spec.classes, I});
    for (std::size_t c = 0; c < spec.classes; ++c) {
        Rng r = proto_rng.child(c + 1);
        double* p = protos.row(c);
        const double lo = 0.15 * spec.side, hi = 0.85 * spec.side;
        for (int bump = 0; bump < 3; ++bump) {
            const double cy = r.uniform(lo, hi), cx = r.uniform(lo, hi);
            const double sigma = r.uniform(0.06 * spec.side, 0.16 * spec.side);
            const double amp = r.uniform(0.5, 0.9);
            for (std::size_t y = 0; y < spec.side; ++y)
                for (std::size_t x = 0; x < spec.side; ++x) {
                    const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    p[y * spec.side + x] += amp * std::exp(-d2 / (2.0 * sigma * sigma));
                }
        }
        for (std::size_t i = 0; i < I; ++i) p[i] = std::clamp(p[i], 0.0, 1.0);
    }

    Dataset ds;
    ds.classes = spec.classes;
    ds.images = Tensor::zeros({N, I});
    ds.labels.resize(N);
    Rng noise_rng(noise_seed);
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t c = n % spec.classes;
        ds.labels[n] = static_cast<int>(c);
        Rng r = noise_rng.child(n + 1);
        double* row = ds.images.row(n);
        const double* p = protos.row(c);
        for (std::size_t i = 0; i < I; ++i)
            row[i] = std::clamp(p[i] + spec.noise_sigma * r.normal(), 0.0, 1.0);
    }

    // Dataset-wide stats, mirroring how published pixel stats are produced.
    double mean = 0.0;
    for (double v : ds.images.data) mean += v;
    mean /= static_cast<double>(ds.images.size());
    double var = 0.0;
    for (double v : ds.images.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ds.images.size());
    ds.pre.mean = mean;
    ds.pre.std_dev = std::sqrt(std::max(var, 1e-12));
    ds.validate();
    return ds;
}

}  // namespace jrlab
