#pragma once

#include <string>
#include <vector>

namespace jrlab {

// Fast in-process verification of the library's analytic claims, meant to
// run on any install in under a minute: gradient checks against central
// finite differences, estimator unbiasedness and its variance bound,
// agreement of the sampling-free gradient path with the exact one, and
// the quench schedule arithmetic.
struct CheckResult {
    std::string name;
    double measured = 0.0;   // the quantity compared (error, z-score, ratio)
    double tolerance = 0.0;  // pass iff measured <= tolerance
    bool pass = false;
    std::string note;
};

struct CheckOptions {
    // Test fixture: negates the sampling-free gradients so the
    // method-equivalence suite must catch it.  Never set outside tests.
    bool flip_closed_form_sign = false;
};

std::vector<CheckResult> run_selfchecks(const CheckOptions& opt = {});

// Prints one line per check ("name: measured=... tol=... PASS|FAIL") and
// returns the number of failures.
int report_selfchecks(const std::vector<CheckResult>& results, std::string& out);

}  // namespace jrlab
