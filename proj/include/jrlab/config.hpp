#pragma once

#include <string>
#include <utility>
#include <vector>

#include "jrlab/attacks.hpp"
#include "jrlab/dataset.hpp"
#include "jrlab/train.hpp"

namespace jrlab {

// Flat ordered key=value pairs: the exchange format between config files,
// CLI flag overrides, and written manifests.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Parses `key = value` lines; '#' starts a comment, blank lines skipped.
// Later duplicates override earlier ones at lookup time.
KeyValues parse_key_values(const std::string& text, const std::string& origin);
KeyValues load_key_values(const std::string& path);

// Where training/eval data comes from.  source "blobs" needs no files;
// source "idx" reads train/test IDX pairs from data_dir (or the
// JRLAB_DATA_DIR environment variable when data_dir is empty).
struct DataSpec {
    std::string source = "blobs";  // "blobs" | "idx"
    std::string data_dir;
    std::size_t blob_per_class = 500;
    std::size_t blob_test_per_class = 200;
    std::size_t blob_classes = 10;
    std::size_t blob_side = 28;
    double blob_noise_sigma = 0.25;
    std::uint64_t blob_prototype_seed = 9001;
    std::uint64_t blob_train_seed = 71;
    std::uint64_t blob_test_seed = 72;

    void validate() const;
};

// Loads the (train, test) pair described by the spec.  Test preprocessing
// stats always copy the training set's, the convention the published
// pixel stats follow.
std::pair<Dataset, Dataset> load_data(const DataSpec& spec);

// A full training-run description: every key round-trips through text, so
// a written manifest reproduces the run byte-for-byte.
struct RunSpec {
    TrainConfig train;
    DataSpec data;
    std::vector<std::size_t> hidden = {128, 64};
    Activation hidden_activation = Activation::Tanh;

    // Unknown keys throw ConfigError naming the key and listing valid
    // ones; keys in `also_allowed` are someone else's and pass through.
    static RunSpec from_key_values(const KeyValues& kvs,
                                   const std::vector<std::string>& also_allowed = {});
    KeyValues to_key_values() const;  // fully resolved, stable ordering
    static const std::vector<std::string>& keys();
};

// Attack run description for the attack/sweep commands.
struct AttackSpec {
    AttackConfig attack;
    std::size_t n_test = 200;
    std::vector<double> sigmas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};  // white-noise curve

    static AttackSpec from_key_values(const KeyValues& kvs,
                                      const std::vector<std::string>& also_allowed = {});
    KeyValues to_key_values() const;
    static const std::vector<std::string>& keys();
};

// Serialises key=value lines (one per pair) for manifests.
std::string render_key_values(const KeyValues& kvs);

}  // namespace jrlab
