#include "intraday/pspline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "intraday/error.hpp"

namespace intraday {

std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 16; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
  return grid;
}

std::vector<double> equally_spaced_knots(double lower, double upper, int interior) {
  std::vector<double> knots;
  const double h = (upper - lower) / (interior + 1);
  for (int j = 1; j <= interior; ++j) knots.push_back(lower + j * h);
  return knots;
}

Eigen::VectorXd bspline_basis(double lower, double upper, int interior, double x) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(interior + kSplineDegree + 1);
  const double h = (upper - lower) / (interior + 1);
  const double pos = h > 0.0 ? (std::clamp(x, lower, upper) - lower) / h : 0.0;
  const int seg = std::min(static_cast<int>(std::floor(pos)), interior);
  const double u = pos - seg;
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double v = 1.0 - u;
  b[seg] = v * v * v / 6.0;
  b[seg + 1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
  b[seg + 2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
  b[seg + 3] = u3 / 6.0;
  return b;
}

double SplineModel::evaluate(double x) const {
  const auto b = bspline_basis(lower, upper, static_cast<int>(knots.size()), x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) s += b[i] * coefficients[static_cast<std::size_t>(i)];
  return s;
}

Eigen::MatrixXd difference_penalty(Eigen::Index n, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n, n);
  for (int o = 0; o < order; ++o) {
    const Eigen::Index rows = d.rows() - 1;
    d = (d.bottomRows(rows) - d.topRows(rows)).eval();
  }
  return d.transpose() * d;
}

PlsSolution solve_pls(const PlsProblem& problem, std::span<const double> gamma_grid) {
  const auto nb = problem.blocks.size();
  const auto ng = gamma_grid.size();
  if (ng == 0) throw DegenerateInput("empty smoothing grid");
  std::size_t combos = 1;
  for (std::size_t b = 0; b < nb; ++b) combos *= ng;

  // Smoothing parameters are relative to the data weight on each block, so
  // one grid serves any sample size.
  std::vector<double> scale(nb, 1.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& blk = problem.blocks[b];
    const auto m = blk.penalty.rows();
    const double tp = blk.penalty.trace();
    const double tx = problem.xtwx.block(blk.offset, blk.offset, m, m).trace();
    if (tp > 0.0 && tx > 0.0) scale[b] = tx / tp;
  }

  PlsSolution best;
  best.gcv = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(nb, 0);
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (std::size_t b = 0; b < nb; ++b) {
      idx[b] = rest % ng;
      rest /= ng;
    }
    Eigen::MatrixXd a = problem.xtwx;
    std::vector<double> gammas(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& blk = problem.blocks[b];
      gammas[b] = gamma_grid[idx[b]];
      const auto m = blk.penalty.rows();
      a.block(blk.offset, blk.offset, m, m) += gammas[b] * scale[b] * blk.penalty;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) continue;
    Eigen::VectorXd beta = ldlt.solve(problem.xtwy);
    const double rss = std::max(
        0.0, problem.ytwy - 2.0 * beta.dot(problem.xtwy) + beta.dot(problem.xtwx * beta));
    const double edf = ldlt.solve(problem.xtwx).trace();
    const double denom = problem.n_obs - edf;
    const double gcv = denom > 1e-9 ? problem.n_obs * rss / (denom * denom)
                                    : std::numeric_limits<double>::infinity();
    if (gcv < best.gcv || best.beta.size() == 0) {
      best.beta = std::move(beta);
      best.gammas = gammas;
      best.rss = rss;
      best.edf = edf;
      best.gcv = gcv;
    }
  }
  if (best.beta.size() == 0 || !best.beta.allFinite())
    throw DegenerateInput("penalized least squares has no solution");
  return best;
}

SplineModel fit_pspline(std::span<const double> x, std::span<const double> y,
                        std::span<const double> weights, const PSplineConfig& config) {
  if (x.size() != y.size()) throw LengthMismatch(x.size(), y.size());
  if (!weights.empty() && weights.size() != x.size()) throw LengthMismatch(x.size(), weights.size());
  if (std::set<double>(x.begin(), x.end()).size() < 4)
    throw DegenerateInput("p-spline needs at least 4 distinct x values");
  for (double v : y) {
    if (!std::isfinite(v)) throw DegenerateInput("non-finite response");
  }
  if (config.interior_knots < 0 || config.penalty_order < 0) throw ConfigError("invalid p-spline config");

  SplineModel m;
  m.lower = *std::min_element(x.begin(), x.end());
  m.upper = *std::max_element(x.begin(), x.end());
  m.knots = equally_spaced_knots(m.lower, m.upper, config.interior_knots);
  m.penalty_order = config.penalty_order;
  const auto p = static_cast<Eigen::Index>(m.basis_size());

  PlsProblem prob;
  prob.xtwx = Eigen::MatrixXd::Zero(p, p);
  prob.xtwy = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const auto b = bspline_basis(m.lower, m.upper, config.interior_knots, x[i]);
    prob.xtwx.noalias() += w * b * b.transpose();
    prob.xtwy += w * y[i] * b;
    prob.ytwy += w * y[i] * y[i];
    prob.n_obs += w;
  }
  prob.blocks.push_back({0, difference_penalty(p, config.penalty_order)});
  const auto sol = solve_pls(prob, config.gamma_grid);
  m.coefficients.assign(sol.beta.data(), sol.beta.data() + sol.beta.size());
  m.smoothing = sol.gammas.front();
  return m;
}

}  // namespace intraday
