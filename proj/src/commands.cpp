#include "jrlab/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "jrlab/csv.hpp"
#include "jrlab/errors.hpp"
#include "jrlab/selfcheck.hpp"

namespace jrlab {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw LoadError("cannot create output directory '" + dir + "': " + ec.message());
}

Mlp build_model(const RunSpec& spec, std::size_t input_width, std::size_t classes) {
    std::vector<std::size_t> dims;
    dims.push_back(input_width);
    for (std::size_t h : spec.hidden) dims.push_back(h);
    dims.push_back(classes);
    Mlp model = xavier_init(dims, spec.hidden_activation, spec.train.seed);
    model.precision = spec.train.precision;
    return model;
}

void check_width(const Mlp& model, const Dataset& ds, const char* who) {
    if (model.input_width() != ds.width())
        throw LoadError(std::string(who) + ": checkpoint expects input width "
                        + std::to_string(model.input_width()) + " but dataset provides "
                        + std::to_string(ds.width()));
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        const auto a = tok.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const auto b = tok.find_last_not_of(" \t");
        tok = tok.substr(a, b - a + 1);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw ConfigError(std::string(what) + ": '" + tok + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

}  // namespace

void cmd_train(const KeyValues& kvs, const std::string& out_dir, std::ostream& log) {
    RunSpec spec = RunSpec::from_key_values(kvs);
    ensure_dir(out_dir);
    auto [train_ds, test_ds] = load_data(spec.data);
    Mlp model = build_model(spec, train_ds.width(), train_ds.classes);

    log << "training " << model.input_width();
    for (std::size_t h : spec.hidden) log << "-" << h;
    log << "-" << model.output_width() << " on " << train_ds.size() << " examples ("
        << spec.data.source << ")\n";

    TrainResult result = train(std::move(model), train_ds, spec.train, &test_ds);
    save_checkpoint(result.model, out_dir + "/checkpoint.bin");
    write_text_file(out_dir + "/history.csv", history_csv(result.history));
    write_text_file(out_dir + "/manifest.txt", render_key_values(spec.to_key_values()));

    const HistoryRow& last = result.history.rows.back();
    log << "done: final loss " << csv_double(last.loss) << ", test acc "
        << csv_double(last.test_acc) << "%, test ||J||_F " << csv_double(last.jf_norm) << "\n";
}

void cmd_eval(const std::string& checkpoint, const KeyValues& kvs, const std::string& csv_path,
              std::ostream& log) {
    RunSpec spec = RunSpec::from_key_values(kvs);
    Mlp model = load_checkpoint(checkpoint);
    auto [train_ds, test_ds] = load_data(spec.data);
    (void)train_ds;
    check_width(model, test_ds, "eval");

    const std::size_t n_acc = std::min<std::size_t>(test_ds.size(), spec.train.eval_points);
    const std::size_t n_jf = std::min<std::size_t>(test_ds.size(), spec.train.eval_jf_points);
    const double acc = test_accuracy(model, test_ds, n_acc);
    const double jf = mean_jacobian_frobenius(model, test_ds, n_jf);
    log << "accuracy " << csv_double(acc) << "% over " << n_acc << " points\n";
    log << "mean ||J||_F " << csv_double(jf) << " over " << n_jf << " points\n";
    if (!csv_path.empty()) {
        std::string csv = "n_acc,accuracy,n_jf,mean_jf\n";
        csv += std::to_string(n_acc) + "," + csv_double(acc) + "," + std::to_string(n_jf) + ","
               + csv_double(jf) + "\n";
        write_text_file(csv_path, csv);
    }
}

void cmd_attack(const std::string& checkpoint, const KeyValues& kvs, const std::string& out_dir,
                std::ostream& log) {
    AttackSpec aspec = AttackSpec::from_key_values(kvs, RunSpec::keys());
    RunSpec rspec = RunSpec::from_key_values(kvs, AttackSpec::keys());
    ensure_dir(out_dir);
    Mlp model = load_checkpoint(checkpoint);
    auto [train_ds, test_ds] = load_data(rspec.data);
    (void)train_ds;
    check_width(model, test_ds, "attack");

    write_text_file(out_dir + "/manifest.txt", render_key_values(aspec.to_key_values()));
    if (aspec.attack.kind == AttackKind::White) {
        Rng rng(aspec.attack.seed);
        RobustnessCurve curve =
            accuracy_under_noise(model, test_ds, aspec.sigmas, aspec.n_test, rng);
        write_text_file(out_dir + "/curve.csv", curve_csv(curve));
        log << "white-noise curve over " << curve.n_test << " points, " << curve.abscissa.size()
            << " sigma values\n";
        return;
    }
    SweepResult sweep = fooling_distance_sweep(model, test_ds, aspec.attack, aspec.n_test);
    write_text_file(out_dir + "/curve.csv", curve_csv(sweep.curve));
    write_text_file(out_dir + "/points.csv", sweep_points_csv(sweep));
    log << attack_name(aspec.attack.kind) << " sweep over " << sweep.curve.n_test
        << " points: median distance " << csv_double(sweep.median) << ", censored "
        << sweep.n_censored << "\n";
}

void cmd_sweep(const KeyValues& kvs, const std::string& lambdas, const std::string& seeds,
               const std::string& out_dir, std::ostream& log) {
    std::vector<std::string> extra = AttackSpec::keys();
    RunSpec base = RunSpec::from_key_values(kvs, extra);
    AttackSpec aspec = AttackSpec::from_key_values(kvs, RunSpec::keys());
    const std::vector<double> lambda_list = parse_list(lambdas, "lambdas");
    std::vector<double> seed_list = parse_list(seeds, "seeds");
    for (double l : lambda_list)
        if (l < 0.0) throw ConfigError("lambdas must be non-negative");
    ensure_dir(out_dir);

    auto [train_ds, test_ds] = load_data(base.data);
    std::string combined = "lambda,seed,kind,abscissa,value\n";

    for (double lambda : lambda_list) {
        RunSpec spec = base;
        spec.train.lambda_jr = lambda;
        const std::string lambda_dir = out_dir + "/lambda_" + csv_double(lambda);
        ensure_dir(lambda_dir);
        write_text_file(lambda_dir + "/manifest.txt", render_key_values(spec.to_key_values()));

        for (double seed_value : seed_list) {
            spec.train.seed = static_cast<std::uint64_t>(seed_value);
            const std::string cell = lambda_dir + "/seed_" + std::to_string(spec.train.seed);
            ensure_dir(cell);
            log << "sweep cell lambda=" << csv_double(lambda) << " seed=" << spec.train.seed
                << "\n";

            Mlp model = build_model(spec, train_ds.width(), train_ds.classes);
            TrainResult result = train(std::move(model), train_ds, spec.train, &test_ds);
            save_checkpoint(result.model, cell + "/checkpoint.bin");
            write_text_file(cell + "/history.csv", history_csv(result.history));
            write_text_file(cell + "/manifest.txt", render_key_values(spec.to_key_values()));

            Rng rng(aspec.attack.seed);
            RobustnessCurve noise =
                accuracy_under_noise(result.model, test_ds, aspec.sigmas, aspec.n_test, rng);
            write_text_file(cell + "/noise.csv", curve_csv(noise));
            for (std::size_t i = 0; i < noise.abscissa.size(); ++i)
                combined += csv_double(lambda) + "," + std::to_string(spec.train.seed)
                            + ",white," + csv_double(noise.abscissa[i]) + ","
                            + csv_double(noise.value[i]) + "\n";

            AttackConfig pgd = aspec.attack;
            pgd.kind = AttackKind::Pgd;
            SweepResult sweep = fooling_distance_sweep(result.model, test_ds, pgd, aspec.n_test);
            write_text_file(cell + "/pgd_curve.csv", curve_csv(sweep.curve));
            write_text_file(cell + "/pgd_points.csv", sweep_points_csv(sweep));
            for (std::size_t i = 0; i < sweep.curve.abscissa.size(); ++i)
                combined += csv_double(lambda) + "," + std::to_string(spec.train.seed) + ",pgd,"
                            + csv_double(sweep.curve.abscissa[i]) + ","
                            + csv_double(sweep.curve.value[i]) + "\n";
        }
    }
    write_text_file(out_dir + "/combined.csv", combined);
    log << "sweep complete: " << lambda_list.size() << " lambdas x " << seed_list.size()
        << " seeds\n";
}

void cmd_slice(const std::string& checkpoint, const KeyValues& kvs, const std::string& csv_path,
               std::ostream& log) {
    static const std::vector<std::string> slice_keys = {
        "slice_index", "resolution", "extent", "slice_seed",
        "slice_mode",  "basis_checkpoint_1", "basis_checkpoint_2"};

    const auto as_u64 = [](const std::string& key, const std::string& v) -> std::uint64_t {
        char* end = nullptr;
        const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
        return n;
    };
    const auto as_double = [](const std::string& key, const std::string& v) -> double {
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError(key + ": '" + v + "' is not a number");
        return x;
    };

    std::size_t index = 0, resolution = 25;
    double extent = 5.0;
    std::uint64_t seed = 1;
    std::string mode = "random", bc1, bc2;
    for (const auto& [k, v] : kvs) {
        if (k == "slice_index") index = as_u64(k, v);
        else if (k == "resolution") resolution = as_u64(k, v);
        else if (k == "extent") extent = as_double(k, v);
        else if (k == "slice_seed") seed = as_u64(k, v);
        else if (k == "slice_mode") mode = v;
        else if (k == "basis_checkpoint_1") bc1 = v;
        else if (k == "basis_checkpoint_2") bc2 = v;
    }
    RunSpec rspec = RunSpec::from_key_values(kvs, slice_keys);

    Mlp model = load_checkpoint(checkpoint);
    auto [train_ds, test_ds] = load_data(rspec.data);
    (void)train_ds;
    check_width(model, test_ds, "slice");
    if (index >= test_ds.size())
        throw ConfigError("slice_index " + std::to_string(index) + " outside test set of "
                          + std::to_string(test_ds.size()));
    Tensor center = test_ds.image(index);

    DecisionSlice slice;
    if (mode == "random") {
        slice = decision_slice(model, test_ds.pre, center, resolution, extent, seed);
    } else if (mode == "fgsm-basis") {
        if (bc1.empty() || bc2.empty())
            throw ConfigError("slice_mode=fgsm-basis needs basis_checkpoint_1 and _2");
        // Plane spanned by the sign-gradient directions of two other
        // models at this point.
        Mlp m1 = load_checkpoint(bc1);
        Mlp m2 = load_checkpoint(bc2);
        const int label = test_ds.labels[index];
        Tensor a1 = fgsm_attack(m1, test_ds.pre, center, label, 0.1);
        Tensor a2 = fgsm_attack(m2, test_ds.pre, center, label, 0.1);
        for (std::size_t i = 0; i < center.size(); ++i) {
            a1.data[i] -= center.data[i];
            a2.data[i] -= center.data[i];
        }
        slice = decision_slice_with_basis(model, test_ds.pre, center, a1, a2, resolution,
                                          extent);
    } else {
        throw ConfigError("slice_mode must be random or fgsm-basis, got '" + mode + "'");
    }
    write_text_file(csv_path, slice_csv(slice));
    log << "slice at test point " << index << ": center class " << slice.center_class
        << ", boundary radius " << csv_double(slice.boundary_radius) << "\n";
}

int cmd_check(bool inject_closed_form_sign_flip, std::ostream& log) {
    CheckOptions opt;
    opt.flip_closed_form_sign = inject_closed_form_sign_flip;
    std::vector<CheckResult> results = run_selfchecks(opt);
    std::string report;
    const int failures = report_selfchecks(results, report);
    log << report;
    log << (failures == 0 ? "all checks passed\n"
                          : std::to_string(failures) + " check(s) FAILED\n");
    return failures;
}

}  // namespace jrlab
