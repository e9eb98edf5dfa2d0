#pragma once

// Central finite-difference verification of every analytic gradient in the
// library. The finite-difference side only ever calls forward evaluations,
// so it stays independent of the backward implementations it checks.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace margiheat::gradcheck {

constexpr double kStep = 1e-5;
constexpr double kTolClosedForm = 1e-4;
constexpr double kTolModel = 1e-3;

// Worst relative error between an analytic gradient and central differences
// over the given parameter indices. `eval` recomputes the scalar output
// after `x` has been perturbed in place.
double worst_rel_err(const std::function<double()>& eval, double* x,
                     const double* analytic, const std::vector<size_t>& idx,
                     double step = kStep);

struct OpReport {
  std::string op;
  double worst_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::vector<OpReport> ops;
  bool all_pass = true;
};

// Individual checks; each returns the worst relative error over `n_seeds`
// random problem instances starting at `seed`.
double check_softmax(uint64_t seed, int n_seeds);
double check_soft_argmax(uint64_t seed, int n_seeds);
double check_jsd(uint64_t seed, int n_seeds);
double check_loss_3d(uint64_t seed, int n_seeds);
double check_loss_2d(uint64_t seed, int n_seeds);
double check_axis_permute(uint64_t seed, int n_seeds);
double check_conv(uint64_t seed, int n_seeds);
double check_residual(uint64_t seed, int n_seeds);
// Full 1-stage model through the hybrid 3D loss; finite differences on a
// random sample of parameters from every parameter group.
double check_full_model(uint64_t seed, int n_seeds);

// Runs everything with the spec tolerances (closed-form ops at 1e-4, the
// composed model at 1e-3). `tol_scale` lets the CLI tighten or loosen both.
SuiteReport run_suite(uint64_t seed, int n_seeds, double tol_scale = 1.0);

}  // namespace margiheat::gradcheck
