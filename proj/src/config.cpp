#include "jrlab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "jrlab/csv.hpp"
#include "jrlab/errors.hpp"

namespace jrlab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) { return csv_double(v); }

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0' || v.find('-') != std::string::npos)
        throw ConfigError("key '" + key + "': '" + v + "' is not a non-negative integer");
    return x;
}

// Single-pass reader over flat key=value pairs with a closed registry.
struct KvReader {
    explicit KvReader(const KeyValues& kvs) {
        for (const auto& [k, v] : kvs) map_[k] = v;  // later entries win
    }

    bool take(const std::string& key, std::string& out) {
        known_.push_back(key);
        auto it = map_.find(key);
        if (it == map_.end()) return false;
        out = it->second;
        map_.erase(it);
        return true;
    }

    void allow(const std::vector<std::string>& keys) {
        for (const std::string& k : keys) map_.erase(k);
    }

    void finish(const std::vector<std::string>& registry) const {
        if (map_.empty()) return;
        std::string keys;
        for (const std::string& k : registry) keys += (keys.empty() ? "" : ", ") + k;
        throw ConfigError("unknown config key '" + map_.begin()->first + "'; valid keys: "
                          + keys);
    }

    std::map<std::string, std::string> map_;
    std::vector<std::string> known_;
};

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
    KeyValues out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(lineno)
                             + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
        out.emplace_back(key, value);
    }
    return out;
}

KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_key_values(buf.str(), path);
}

void DataSpec::validate() const {
    if (source != "blobs" && source != "idx")
        throw ConfigError("dataset must be 'blobs' or 'idx', got '" + source + "'");
    if (source == "blobs") {
        if (blob_per_class == 0 || blob_test_per_class == 0)
            throw ConfigError("blob per-class counts must be positive");
        if (blob_classes < 2) throw ConfigError("blob_classes must be at least 2");
        if (blob_side < 8) throw ConfigError("blob_side must be at least 8");
        if (blob_noise_sigma < 0.0) throw ConfigError("blob_noise_sigma must be >= 0");
    }
}

std::pair<Dataset, Dataset> load_data(const DataSpec& spec) {
    spec.validate();
    if (spec.source == "blobs") {
        BlobSpec bs;
        bs.classes = spec.blob_classes;
        bs.side = spec.blob_side;
        bs.noise_sigma = spec.blob_noise_sigma;
        bs.prototype_seed = spec.blob_prototype_seed;
        Dataset train = make_blobs(bs, spec.blob_per_class, spec.blob_train_seed);
        Dataset test = make_blobs(bs, spec.blob_test_per_class, spec.blob_test_seed);
        test.pre = train.pre;
        return {std::move(train), std::move(test)};
    }
    std::string dir = spec.data_dir;
    if (dir.empty())
        if (const char* env = std::getenv("JRLAB_DATA_DIR")) dir = env;
    if (dir.empty())
        throw ConfigError("dataset=idx needs data_dir or the JRLAB_DATA_DIR environment "
                          "variable");
    Dataset train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    Dataset test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    test.pre = train.pre;
    return {std::move(train), std::move(test)};
}

const std::vector<std::string>& RunSpec::keys() {
    static const std::vector<std::string> k = {
        "lambda_jr",    "lambda_wd",       "dropout_rate",        "n_proj",
        "eta0",         "quench_every",    "total_iters",         "batch_size",
        "momentum",     "adv_eps_max",     "seed",                "samples_per_class",
        "log_every",    "eval_points",     "eval_jf_points",      "precision",
        "hidden",       "activation",      "dataset",             "data_dir",
        "blob_per_class", "blob_test_per_class", "blob_classes",  "blob_side",
        "blob_noise_sigma", "blob_prototype_seed", "blob_train_seed", "blob_test_seed",
    };
    return k;
}

RunSpec RunSpec::from_key_values(const KeyValues& kvs,
                                 const std::vector<std::string>& also_allowed) {
    RunSpec spec;
    KvReader r(kvs);
    std::string v;

    if (r.take("lambda_jr", v)) spec.train.lambda_jr = parse_double("lambda_jr", v);
    if (r.take("lambda_wd", v)) spec.train.lambda_wd = parse_double("lambda_wd", v);
    if (r.take("dropout_rate", v)) spec.train.dropout_rate = parse_double("dropout_rate", v);
    if (r.take("n_proj", v)) {
        if (v == "exact") {
            spec.train.exact_reg = true;
        } else {
            spec.train.exact_reg = false;
            spec.train.n_proj = parse_u64("n_proj", v);
        }
    }
    if (r.take("eta0", v)) spec.train.eta0 = parse_double("eta0", v);
    if (r.take("quench_every", v)) spec.train.quench_every = parse_u64("quench_every", v);
    if (r.take("total_iters", v)) spec.train.total_iters = parse_u64("total_iters", v);
    if (r.take("batch_size", v)) {
        if (v == "full") {
            spec.train.full_batch = true;
        } else {
            spec.train.full_batch = false;
            spec.train.batch_size = parse_u64("batch_size", v);
        }
    }
    if (r.take("momentum", v)) spec.train.momentum = parse_double("momentum", v);
    if (r.take("adv_eps_max", v)) spec.train.adv_eps_max = parse_double("adv_eps_max", v);
    if (r.take("seed", v)) spec.train.seed = parse_u64("seed", v);
    if (r.take("samples_per_class", v))
        spec.train.samples_per_class = parse_u64("samples_per_class", v);
    if (r.take("log_every", v)) spec.train.log_every = parse_u64("log_every", v);
    if (r.take("eval_points", v)) spec.train.eval_points = parse_u64("eval_points", v);
    if (r.take("eval_jf_points", v))
        spec.train.eval_jf_points = parse_u64("eval_jf_points", v);
    if (r.take("precision", v)) {
        if (v == "f64")
            spec.train.precision = Precision::f64;
        else if (v == "f32")
            spec.train.precision = Precision::f32;
        else
            throw ConfigError("precision must be f64 or f32, got '" + v + "'");
    }
    if (r.take("hidden", v)) {
        spec.hidden.clear();
        std::istringstream in(v);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty()) spec.hidden.push_back(parse_u64("hidden", tok));
        }
    }
    if (r.take("activation", v)) spec.hidden_activation = activation_from_name(v);
    if (r.take("dataset", v)) spec.data.source = v;
    if (r.take("data_dir", v)) spec.data.data_dir = v;
    if (r.take("blob_per_class", v)) spec.data.blob_per_class = parse_u64("blob_per_class", v);
    if (r.take("blob_test_per_class", v))
        spec.data.blob_test_per_class = parse_u64("blob_test_per_class", v);
    if (r.take("blob_classes", v)) spec.data.blob_classes = parse_u64("blob_classes", v);
    if (r.take("blob_side", v)) spec.data.blob_side = parse_u64("blob_side", v);
    if (r.take("blob_noise_sigma", v))
        spec.data.blob_noise_sigma = parse_double("blob_noise_sigma", v);
    if (r.take("blob_prototype_seed", v))
        spec.data.blob_prototype_seed = parse_u64("blob_prototype_seed", v);
    if (r.take("blob_train_seed", v))
        spec.data.blob_train_seed = parse_u64("blob_train_seed", v);
    if (r.take("blob_test_seed", v)) spec.data.blob_test_seed = parse_u64("blob_test_seed", v);

    r.allow(also_allowed);
    r.finish(keys());
    spec.train.validate();
    spec.data.validate();
    return spec;
}

KeyValues RunSpec::to_key_values() const {
    KeyValues kv;
    kv.emplace_back("lambda_jr", fmt_double(train.lambda_jr));
    kv.emplace_back("lambda_wd", fmt_double(train.lambda_wd));
    kv.emplace_back("dropout_rate", fmt_double(train.dropout_rate));
    kv.emplace_back("n_proj", train.exact_reg ? "exact" : std::to_string(train.n_proj));
    kv.emplace_back("eta0", fmt_double(train.eta0));
    kv.emplace_back("quench_every", std::to_string(train.quench_every));
    kv.emplace_back("total_iters", std::to_string(train.total_iters));
    kv.emplace_back("batch_size", train.full_batch ? "full" : std::to_string(train.batch_size));
    kv.emplace_back("momentum", fmt_double(train.momentum));
    kv.emplace_back("adv_eps_max", fmt_double(train.adv_eps_max));
    kv.emplace_back("seed", std::to_string(train.seed));
    kv.emplace_back("samples_per_class", std::to_string(train.samples_per_class));
    kv.emplace_back("log_every", std::to_string(train.log_every));
    kv.emplace_back("eval_points", std::to_string(train.eval_points));
    kv.emplace_back("eval_jf_points", std::to_string(train.eval_jf_points));
    kv.emplace_back("precision", train.precision == Precision::f32 ? "f32" : "f64");
    std::string h;
    for (std::size_t d : hidden) h += (h.empty() ? "" : ",") + std::to_string(d);
    kv.emplace_back("hidden", h);
    kv.emplace_back("activation", activation_name(hidden_activation));
    kv.emplace_back("dataset", data.source);
    kv.emplace_back("data_dir", data.data_dir);
    kv.emplace_back("blob_per_class", std::to_string(data.blob_per_class));
    kv.emplace_back("blob_test_per_class", std::to_string(data.blob_test_per_class));
    kv.emplace_back("blob_classes", std::to_string(data.blob_classes));
    kv.emplace_back("blob_side", std::to_string(data.blob_side));
    kv.emplace_back("blob_noise_sigma", fmt_double(data.blob_noise_sigma));
    kv.emplace_back("blob_prototype_seed", std::to_string(data.blob_prototype_seed));
    kv.emplace_back("blob_train_seed", std::to_string(data.blob_train_seed));
    kv.emplace_back("blob_test_seed", std::to_string(data.blob_test_seed));
    return kv;
}

const std::vector<std::string>& AttackSpec::keys() {
    static const std::vector<std::string> k = {
        "kind",       "pgd_step",         "pgd_ball",        "pgd_max_iters",
        "cw_adam_lr", "cw_c_init",        "cw_binary_steps", "cw_max_opt_iters",
        "n_test",     "sigmas",           "attack_seed",
    };
    return k;
}

AttackSpec AttackSpec::from_key_values(const KeyValues& kvs,
                                       const std::vector<std::string>& also_allowed) {
    AttackSpec spec;
    KvReader r(kvs);
    std::string v;
    if (r.take("kind", v)) spec.attack.kind = attack_from_name(v);
    if (r.take("pgd_step", v)) spec.attack.pgd_step = parse_double("pgd_step", v);
    if (r.take("pgd_ball", v)) spec.attack.pgd_ball = parse_double("pgd_ball", v);
    if (r.take("pgd_max_iters", v)) spec.attack.pgd_max_iters = parse_u64("pgd_max_iters", v);
    if (r.take("cw_adam_lr", v)) spec.attack.cw_adam_lr = parse_double("cw_adam_lr", v);
    if (r.take("cw_c_init", v)) spec.attack.cw_c_init = parse_double("cw_c_init", v);
    if (r.take("cw_binary_steps", v))
        spec.attack.cw_binary_steps = parse_u64("cw_binary_steps", v);
    if (r.take("cw_max_opt_iters", v))
        spec.attack.cw_max_opt_iters = parse_u64("cw_max_opt_iters", v);
    if (r.take("n_test", v)) spec.n_test = parse_u64("n_test", v);
    if (r.take("sigmas", v)) {
        spec.sigmas.clear();
        std::istringstream in(v);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty()) spec.sigmas.push_back(parse_double("sigmas", tok));
        }
    }
    if (r.take("attack_seed", v)) spec.attack.seed = parse_u64("attack_seed", v);
    r.allow(also_allowed);
    r.finish(keys());
    spec.attack.validate();
    return spec;
}

KeyValues AttackSpec::to_key_values() const {
    KeyValues kv;
    kv.emplace_back("kind", attack_name(attack.kind));
    kv.emplace_back("pgd_step", fmt_double(attack.pgd_step));
    kv.emplace_back("pgd_ball", fmt_double(attack.pgd_ball));
    kv.emplace_back("pgd_max_iters", std::to_string(attack.pgd_max_iters));
    kv.emplace_back("cw_adam_lr", fmt_double(attack.cw_adam_lr));
    kv.emplace_back("cw_c_init", fmt_double(attack.cw_c_init));
    kv.emplace_back("cw_binary_steps", std::to_string(attack.cw_binary_steps));
    kv.emplace_back("cw_max_opt_iters", std::to_string(attack.cw_max_opt_iters));
    kv.emplace_back("n_test", std::to_string(n_test));
    std::string s;
    for (double x : sigmas) s += (s.empty() ? "" : ",") + fmt_double(x);
    kv.emplace_back("sigmas", s);
    kv.emplace_back("attack_seed", std::to_string(attack.seed));
    return kv;
}

std::string render_key_values(const KeyValues& kvs) {
    std::string out;
    for (const auto& [k, v] : kvs) out += k + " = " + v + "\n";
    return out;
}

}  // namespace jrlab
