#pragma once

#include <string>
#include <vector>

#include "jrlab/attacks.hpp"
#include "jrlab/slice.hpp"
#include "jrlab/train.hpp"

namespace jrlab {

// Shortest round-trippable decimal rendering so rewritten CSVs
// are byte-stable for identical doubles.
std::string csv_double(double v);

void write_text_file(const std::string& path, const std::string& content);

// history: '# key = value' preamble lines, then
// iteration,loss,reg_value,test_acc,jf_norm,lr
std::string history_csv(const TrainHistory& history);

// curve: '# ...' preamble, then abscissa,value
std::string curve_csv(const RobustnessCurve& curve);

// per-point sweep outcomes: index,distance,censored
std::string sweep_points_csv(const SweepResult& sweep);

// slice grid: self-describing preamble (center hash, basis seed, extent,
// resolution, center class, boundary radius), then i,j,du,dv,pred_class,max_prob
std::string slice_csv(const DecisionSlice& slice);

}  // namespace jrlab
