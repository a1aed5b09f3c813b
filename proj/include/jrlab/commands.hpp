#pragma once

#include <iosfwd>
#include <string>

#include "jrlab/config.hpp"

namespace jrlab {

// Library-level command bodies shared by the CLI binary and the tests.
// Each resolves its configuration from `kvs` (file values already merged
// with CLI overrides by the caller), performs the work, writes outputs
// under out_dir, and reports human-readable progress on `log`.  Errors
// surface as exceptions; the CLI turns them into exit codes.

// Trains a model; writes checkpoint.bin, history.csv, manifest.txt.
void cmd_train(const KeyValues& kvs, const std::string& out_dir, std::ostream& log);

// Loads a checkpoint, evaluates clean accuracy and the mean exact
// ||J(x)||_F over the test set; optional CSV at `csv_path`.
void cmd_eval(const std::string& checkpoint, const KeyValues& kvs, const std::string& csv_path,
              std::ostream& log);

// Attacks a checkpoint.  kind=white emits the accuracy-vs-sigma curve;
// fgsm/pgd/cw emit per-point fooling distances plus the cumulative
// error-vs-distance curve.
void cmd_attack(const std::string& checkpoint, const KeyValues& kvs, const std::string& out_dir,
                std::ostream& log);

// Trains one model per (lambda, seed), runs the noise curve and the PGD
// sweep on each, and writes per-cell directories plus combined.csv.
void cmd_sweep(const KeyValues& kvs, const std::string& lambdas, const std::string& seeds,
               const std::string& out_dir, std::ostream& log);

// Exports a decision-cell slice around a test point as CSV.
void cmd_slice(const std::string& checkpoint, const KeyValues& kvs, const std::string& csv_path,
               std::ostream& log);

// Runs the self-check suites; returns the number of failures.
int cmd_check(bool inject_closed_form_sign_flip, std::ostream& log);

}  // namespace jrlab
