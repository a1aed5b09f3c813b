#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jrlab/tensor.hpp"

namespace jrlab {

// Affine pixel normalisation x' = (x - mean) / std applied right before a
// model sees data; raw storage stays in [0, 1] so perturbation budgets
// keep their pixel-space meaning.
struct Preprocess {
    double mean = 0.1307;
    double std_dev = 0.3081;

    void validate() const;
    double apply(double raw) const { return (raw - mean) / std_dev; }
    double invert(double scaled) const { return scaled * std_dev + mean; }
    Tensor apply(const Tensor& raw) const;
    Tensor invert(const Tensor& scaled) const;
};

struct Dataset {
    Tensor images;            // [N x I], raw floats in [0, 1]
    std::vector<int> labels;  // values in [0, classes)
    std::size_t classes = 0;
    Preprocess pre;           // stats the consuming model should use

    std::size_t size() const { return labels.size(); }
    std::size_t width() const { return images.ndim() == 2 ? images.cols() : 0; }
    void validate() const;

    // Raw image row r as a rank-1 tensor.
    Tensor image(std::size_t r) const;
};

// Reads the big-endian IDX pair (image magic 2051, label magic 2049);
// uint8 pixels land in [0, 1] via /255.  Malformed input throws ParseError
// with distinct messages for bad magic (naming the offset), truncation,
// and image/label count mismatch.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Align-corners bilinear interpolation of a square [S x S] image onto
// [target x target], S < target.  Corners are preserved exactly and the
// output range never leaves [min(img), max(img)].
Tensor bilinear_upsample(const Tensor& img, std::size_t target);

// Seeded synthetic classification images: every class is a fixed mixture
// of Gaussian bumps (the prototype, addressed by prototype_seed) plus
// per-sample pixel noise, cropped to [0, 1].  Exists so the whole suite,
// training included, runs without any downloaded data.
struct BlobSpec {
    std::size_t classes = 10;
    std::size_t side = 28;
    double noise_sigma = 0.25;
    std::uint64_t prototype_seed = 9001;
};
Dataset make_blobs(const BlobSpec& spec, std::size_t per_class, std::uint64_t noise_seed);

}  // namespace jrlab
