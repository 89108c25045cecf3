#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

// Cubic P-splines: B-spline basis on equally spaced knots with a difference
// penalty on adjacent coefficients, smoothing chosen by GCV.

namespace intraday {

inline constexpr int kSplineDegree = 3;

// 17 log-spaced values 1e-4 .. 1e4.
std::vector<double> default_gamma_grid();

struct PSplineConfig {
  int interior_knots = 10;
  int penalty_order = 2;
  std::vector<double> gamma_grid = default_gamma_grid();
};

struct SplineModel {
  double lower = 0.0;  // training range; evaluation clamps into it
  double upper = 1.0;
  std::vector<double> knots;  // interior knots, strictly increasing
  int degree = kSplineDegree;
  int penalty_order = 2;
  std::vector<double> coefficients;  // knots.size() + degree + 1
  double smoothing = 0.0;

  std::size_t basis_size() const { return knots.size() + degree + 1; }
  double evaluate(double x) const;

  bool operator==(const SplineModel&) const = default;
};

std::vector<double> equally_spaced_knots(double lower, double upper, int interior);

// Values of the interior + 4 basis functions at x, clamped into [lower, upper].
Eigen::VectorXd bspline_basis(double lower, double upper, int interior, double x);

// D'D for the order-th difference matrix over n coefficients.
Eigen::MatrixXd difference_penalty(Eigen::Index n, int order);

// Penalized weighted least squares written in normal-equation form.
// One smoothing parameter per penalty block; the combination minimizing
// GCV = n * RSS / (n - edf)^2 over the Cartesian grid wins, earliest on ties.
// Block b is penalized by gamma_b * tr(X'WX_bb) / tr(S_b) * S_b.
struct PenaltyBlock {
  Eigen::Index offset = 0;
  Eigen::MatrixXd penalty;
};

struct PlsProblem {
  Eigen::MatrixXd xtwx;
  Eigen::VectorXd xtwy;
  double ytwy = 0.0;  // includes any within-group sum of squares
  double n_obs = 0.0;
  std::vector<PenaltyBlock> blocks;
};

struct PlsSolution {
  Eigen::VectorXd beta;
  std::vector<double> gammas;
  double rss = 0.0;
  double edf = 0.0;
  double gcv = 0.0;
};

PlsSolution solve_pls(const PlsProblem& problem, std::span<const double> gamma_grid);

// Single-covariate fit. weights may be empty (unit weights).
// Throws DegenerateInput when x has fewer than 4 distinct values.
SplineModel fit_pspline(std::span<const double> x, std::span<const double> y,
                        std::span<const double> weights, const PSplineConfig& config = {});

}  // namespace intraday
