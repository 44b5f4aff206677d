#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tvts/tape.hpp"
#include "tvts/tensor.hpp"

namespace tvts::gradcheck {

constexpr double kTol = 1e-4;   // max accepted relative error
constexpr double kStep = 1e-5;  // central-difference step

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

// Relative error with a small-magnitude floor so near-zero gradients are
// compared absolutely at 1e-4 * 1e-4.
double rel_err(double ad, double fd);

// f builds a tracked scalar loss from the inputs; inputs are tracked leaves.
// Returns the worst rel_err between reverse-mode and central differences over
// every element of every input.
using LossFn = std::function<Tensor(std::vector<Tensor>&, Tape*)>;
double check(const LossFn& f, std::vector<Tensor> inputs, double h = kStep);

// The full suite: every differentiable op plus the composed TVTS loss at tiny
// dims (D_h=8, K=3, M=4, H=W=16), `seeds` random draws each.
// include_broken_fixture adds a deliberately wrong gradient rule so the
// harness itself is testable.
std::vector<CheckResult> run_all(uint64_t seed0, int seeds, bool include_broken_fixture);

}  // namespace tvts::gradcheck
