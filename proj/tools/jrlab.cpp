// jrlab — train, evaluate, attack, sweep, slice, and self-check small
// Jacobian-regularized MLP classifiers.  Every config key doubles as a
// kebab-case flag; flags override values from --config files.

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jrlab/commands.hpp"
#include "jrlab/errors.hpp"
#include "jrlab/linalg.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    jrlab::KeyValues overrides;
};

std::string kebab(const std::string& key) {
    std::string flag = "--" + key;
    for (char& c : flag)
        if (c == '_') c = '-';
    return flag;
}

// One string option per config key; values land in args.overrides in the
// order given, after any file values, so they win at lookup time.
void attach_keys(CLI::App* cmd, CommonArgs& args, const std::vector<std::string>& keys) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    for (const std::string& key : keys) {
        cmd->add_option_function<std::string>(
            kebab(key),
            [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); },
            "config key '" + key + "'");
    }
}

jrlab::KeyValues resolve(const CommonArgs& args) {
    jrlab::KeyValues kvs;
    if (!args.config_path.empty()) kvs = jrlab::load_key_values(args.config_path);
    kvs.insert(kvs.end(), args.overrides.begin(), args.overrides.end());
    return kvs;
}

std::vector<std::string> concat(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
    std::vector<std::string> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    jrlab::init_blas_threads();

    CLI::App app{"Jacobian-regularization training and robustness laboratory"};
    app.require_subcommand(1);

    auto train_args = std::make_shared<CommonArgs>();
    auto train_out = std::make_shared<std::string>("run");
    CLI::App* train = app.add_subcommand("train", "train a model; writes checkpoint.bin, "
                                                  "history.csv, manifest.txt");
    attach_keys(train, *train_args, jrlab::RunSpec::keys());
    train->add_option("--out", *train_out, "output directory")->capture_default_str();

    auto eval_args = std::make_shared<CommonArgs>();
    auto eval_ckpt = std::make_shared<std::string>();
    auto eval_csv = std::make_shared<std::string>();
    CLI::App* eval = app.add_subcommand("eval", "clean accuracy and mean test ||J||_F of a "
                                                "checkpoint");
    eval->add_option("checkpoint", *eval_ckpt, "model checkpoint")->required();
    attach_keys(eval, *eval_args, jrlab::RunSpec::keys());
    eval->add_option("--csv", *eval_csv, "also write a one-row CSV here");

    auto attack_args = std::make_shared<CommonArgs>();
    auto attack_ckpt = std::make_shared<std::string>();
    auto attack_out = std::make_shared<std::string>("attack");
    CLI::App* attack = app.add_subcommand("attack", "white-noise curve or fooling-distance "
                                                    "sweep against a checkpoint");
    attack->add_option("checkpoint", *attack_ckpt, "model checkpoint")->required();
    attach_keys(attack, *attack_args,
                concat(jrlab::RunSpec::keys(), jrlab::AttackSpec::keys()));
    attack->add_option("--out", *attack_out, "output directory")->capture_default_str();

    auto sweep_args = std::make_shared<CommonArgs>();
    auto sweep_lambdas = std::make_shared<std::string>();
    auto sweep_seeds = std::make_shared<std::string>("0");
    auto sweep_out = std::make_shared<std::string>("sweep");
    CLI::App* sweep = app.add_subcommand("sweep", "train one model per (lambda, seed) and run "
                                                  "the robustness harness on each");
    attach_keys(sweep, *sweep_args, concat(jrlab::RunSpec::keys(), jrlab::AttackSpec::keys()));
    sweep->add_option("--lambdas", *sweep_lambdas, "comma-separated lambda_jr values")
        ->required();
    sweep->add_option("--seeds", *sweep_seeds, "comma-separated seeds")->capture_default_str();
    sweep->add_option("--out", *sweep_out, "output directory")->capture_default_str();

    static const std::vector<std::string> slice_keys = {
        "slice_index", "resolution", "extent", "slice_seed",
        "slice_mode",  "basis_checkpoint_1", "basis_checkpoint_2"};
    auto slice_args = std::make_shared<CommonArgs>();
    auto slice_ckpt = std::make_shared<std::string>();
    auto slice_csv = std::make_shared<std::string>("slice.csv");
    CLI::App* slice = app.add_subcommand("slice", "decision-cell cross-section around a test "
                                                  "point");
    slice->add_option("checkpoint", *slice_ckpt, "model checkpoint")->required();
    attach_keys(slice, *slice_args, concat(jrlab::RunSpec::keys(), slice_keys));
    slice->add_option("--csv", *slice_csv, "output CSV path")->capture_default_str();

    auto check_flip = std::make_shared<bool>(false);
    CLI::App* check = app.add_subcommand("check", "gradient, estimator, and equivalence "
                                                  "self-tests");
    check->add_flag("--inject-sign-flip", *check_flip,
                    "test fixture: corrupt the closed-form gradients so the equivalence "
                    "suite must fail");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            jrlab::cmd_train(resolve(*train_args), *train_out, std::cout);
        } else if (eval->parsed()) {
            jrlab::cmd_eval(*eval_ckpt, resolve(*eval_args), *eval_csv, std::cout);
        } else if (attack->parsed()) {
            jrlab::cmd_attack(*attack_ckpt, resolve(*attack_args), *attack_out, std::cout);
        } else if (sweep->parsed()) {
            jrlab::cmd_sweep(resolve(*sweep_args), *sweep_lambdas, *sweep_seeds, *sweep_out,
                             std::cout);
        } else if (slice->parsed()) {
            jrlab::cmd_slice(*slice_ckpt, resolve(*slice_args), *slice_csv, std::cout);
        } else if (check->parsed()) {
            return jrlab::cmd_check(*check_flip, std::cout) == 0 ? 0 : 1;
        }
    } catch (const jrlab::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const jrlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
