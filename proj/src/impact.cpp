#include "intraday/impact.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include "intraday/error.hpp"

namespace intraday {

namespace {

constexpr std::array<RegimeId, 3> kRegimes{RegimeId::xbid, RegimeId::cutover, RegimeId::local};

std::string stratum_name(ImpactKind kind, RegimeId regime) {
  return to_string(kind) + "/" + to_string(regime);
}

TermForm choose_form(std::size_t distinct, bool force_linear) {
  if (distinct <= 1) return TermForm::none;
  if (force_linear || distinct < 4) return TermForm::linear;
  return TermForm::spline;
}

// Observation reduced to its covariates; identical rows are pooled.
struct Row {
  double k;
  double log_n;
  bool weekend;
  bool peak;
  double y;
};

bool same_covariates(const Row& a, const Row& b) {
  return a.k == b.k && a.log_n == b.log_n && a.weekend == b.weekend && a.peak == b.peak;
}

struct Group {
  Row x;
  double count;
  double mean;
  double within_ss;
};

std::vector<Group> pool(const std::vector<Row>& rows) {
  std::vector<Group> groups;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < rows.size() && same_covariates(rows[i], rows[j])) sum += rows[j++].y;
    const double count = static_cast<double>(j - i);
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t m = i; m < j; ++m) ss += (rows[m].y - mean) * (rows[m].y - mean);
    groups.push_back({rows[i], count, mean, ss});
    i = j;
  }
  return groups;
}

// Column layout of one term inside the design matrix.
struct TermLayout {
  TermForm form = TermForm::none;
  double lower = 0.0;
  double upper = 0.0;
  int interior = 0;
  double center = 0.0;  // linear: weighted covariate mean
  Eigen::MatrixXd z;    // spline: basis -> centered coefficients
  Eigen::Index offset = 0;
  Eigen::Index width = 0;

  void fill(double x, Eigen::Ref<Eigen::VectorXd> out) const {
    if (form == TermForm::linear) {
      out[offset] = std::clamp(x, lower, upper) - center;
    } else if (form == TermForm::spline) {
      out.segment(offset, width) = z.transpose() * bspline_basis(lower, upper, interior, x);
    }
  }
};

TermLayout layout_term(const std::vector<Group>& groups, double Row::*field,
                       TermForm form, int interior, Eigen::Index offset) {
  TermLayout t;
  t.form = form;
  t.offset = offset;
  if (form == TermForm::none) return t;
  t.lower = groups.front().x.*field;
  t.upper = t.lower;
  for (const auto& g : groups) {
    t.lower = std::min(t.lower, g.x.*field);
    t.upper = std::max(t.upper, g.x.*field);
  }
  if (form == TermForm::linear) {
    double n = 0.0;
    double s = 0.0;
    for (const auto& g : groups) {
      n += g.count;
      s += g.count * g.x.*field;
    }
    t.center = s / n;
    t.width = 1;
    return t;
  }
  t.interior = interior;
  const Eigen::Index q = interior + kSplineDegree + 1;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(q);
  for (const auto& g : groups) c += g.count * bspline_basis(t.lower, t.upper, interior, g.x.*field);
  // Orthonormal basis of {beta : c'beta = 0}.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd full_q = qr.householderQ() * Eigen::MatrixXd::Identity(q, q);
  t.z = full_q.rightCols(q - 1);
  t.width = q - 1;
  return t;
}

AdditiveTerm finish_term(const TermLayout& t, const Eigen::VectorXd& beta, int penalty_order,
                         double gamma, double& intercept) {
  AdditiveTerm out;
  out.form = t.form;
  out.lower = t.lower;
  out.upper = t.upper;
  if (t.form == TermForm::linear) {
    out.slope = beta[t.offset];
    intercept -= out.slope * t.center;
  } else if (t.form == TermForm::spline) {
    const Eigen::VectorXd coef = t.z * beta.segment(t.offset, t.width);
    out.spline.lower = t.lower;
    out.spline.upper = t.upper;
    out.spline.knots = equally_spaced_knots(t.lower, t.upper, t.interior);
    out.spline.penalty_order = penalty_order;
    out.spline.coefficients.assign(coef.data(), coef.data() + coef.size());
    out.spline.smoothing = gamma;
  }
  return out;
}

struct Structure {
  TermForm k_form;
  TermForm n_form;
  bool weekend;
  bool peak;
};

AdditivePredictor fit_additive(const std::vector<Row>& rows, const Structure& s,
                               const ImpactFitConfig& config) {
  const auto groups = pool(rows);
  Eigen::Index p = 1;
  const auto k_layout = layout_term(groups, &Row::k, s.k_form, config.k_knots, p);
  p += k_layout.width;
  const auto n_layout = layout_term(groups, &Row::log_n, s.n_form, config.n_knots, p);
  p += n_layout.width;
  const Eigen::Index we_col = s.weekend ? p++ : -1;
  const Eigen::Index pk_col = s.peak ? p++ : -1;

  PlsProblem prob;
  prob.xtwx = Eigen::MatrixXd::Zero(p, p);
  prob.xtwy = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd x(p);
  for (const auto& g : groups) {
    x.setZero();
    x[0] = 1.0;
    k_layout.fill(g.x.k, x);
    n_layout.fill(g.x.log_n, x);
    if (we_col >= 0) x[we_col] = g.x.weekend ? 1.0 : 0.0;
    if (pk_col >= 0) x[pk_col] = g.x.peak ? 1.0 : 0.0;
    prob.xtwx.noalias() += g.count * x * x.transpose();
    prob.xtwy += g.count * g.mean * x;
    prob.ytwy += g.count * g.mean * g.mean + g.within_ss;
    prob.n_obs += g.count;
  }
  for (const auto* t : {&k_layout, &n_layout}) {
    if (t->form != TermForm::spline) continue;
    const Eigen::MatrixXd d = difference_penalty(t->z.rows(), config.penalty_order);
    prob.blocks.push_back({t->offset, t->z.transpose() * d * t->z});
  }
  const auto sol = solve_pls(prob, config.gamma_grid);

  AdditivePredictor out;
  out.intercept = sol.beta[0];
  std::size_t block = 0;
  const double k_gamma = k_layout.form == TermForm::spline ? sol.gammas[block++] : 0.0;
  const double n_gamma = n_layout.form == TermForm::spline ? sol.gammas[block++] : 0.0;
  out.k_term = finish_term(k_layout, sol.beta, config.penalty_order, k_gamma, out.intercept);
  out.n_term = finish_term(n_layout, sol.beta, config.penalty_order, n_gamma, out.intercept);
  out.use_weekend = s.weekend;
  out.beta_weekend = s.weekend ? sol.beta[we_col] : 0.0;
  out.use_peak = s.peak;
  out.beta_peak = s.peak ? sol.beta[pk_col] : 0.0;
  out.gcv = sol.gcv;
  out.edf = sol.edf;
  return out;
}

StratumModel fit_stratum(ImpactKind kind, RegimeId regime, std::vector<ImpactObservation> obs,
                         const ImpactFitConfig& config) {
  const auto positive = std::count_if(obs.begin(), obs.end(), [](const auto& o) { return o.impact > 0.0; });
  if (static_cast<std::size_t>(positive) < config.min_observations)
    throw InsufficientData(stratum_name(kind, regime));

  std::vector<Row> rows;
  rows.reserve(obs.size());
  std::vector<double> raw;
  StratumModel m;
  m.kind = kind;
  m.regime = regime;
  m.observations = obs.size();
  for (const auto& o : obs) {
    if (o.impact < config.epsilon) ++m.floored;
    rows.push_back({static_cast<double>(o.k), std::log(o.n), o.t_meta.weekend, o.t_meta.peak,
                    std::log(std::max(o.impact, config.epsilon))});
  }
  // Canonical order makes the fit independent of input order.
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto key = [&](std::size_t i) {
    const auto& r = rows[i];
    return std::make_tuple(r.k, r.log_n, r.weekend, r.peak, r.y, obs[i].impact);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<Row> sorted;
  sorted.reserve(rows.size());
  for (auto i : order) {
    sorted.push_back(rows[i]);
    raw.push_back(obs[i].impact);
  }

  std::set<double> ks;
  std::set<double> ns;
  std::set<bool> wes;
  std::set<bool> pks;
  for (const auto& r : sorted) {
    ks.insert(r.k);
    ns.insert(r.log_n);
    wes.insert(r.weekend);
    pks.insert(r.peak);
  }
  const Structure s{choose_form(ks.size(), regime == RegimeId::cutover), choose_form(ns.size(), false),
                    wes.size() > 1, pks.size() > 1};
  m.log_mu = fit_additive(sorted, s, config);

  const double scale = std::sqrt(std::numbers::pi / 2.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    auto& r = sorted[i];
    const TimeMeta tm{r.weekend, r.peak};
    const double mu = std::exp(m.log_mu.evaluate(r.k, r.log_n, tm));
    r.y = std::log(std::max(std::abs(raw[i] - mu) * scale, config.epsilon));
  }
  m.log_sigma = fit_additive(sorted, s, config);
  return m;
}

}  // namespace

std::string to_string(ImpactKind kind) { return kind == ImpactKind::temporary ? "temporary" : "permanent"; }

std::string to_string(RegimeId regime) {
  switch (regime) {
    case RegimeId::xbid:
      return "xbid";
    case RegimeId::cutover:
      return "cutover";
    case RegimeId::local:
      return "local";
  }
  return "?";
}

ImpactKind parse_impact_kind(const std::string& text) {
  if (text == "temporary") return ImpactKind::temporary;
  if (text == "permanent") return ImpactKind::permanent;
  throw ParseError(0, "unknown impact kind '" + text + "'");
}

RegimeId parse_regime(const std::string& text) {
  for (auto r : kRegimes) {
    if (to_string(r) == text) return r;
  }
  throw ParseError(0, "unknown regime '" + text + "'");
}

std::string to_string(TermForm form) {
  switch (form) {
    case TermForm::none:
      return "none";
    case TermForm::linear:
      return "linear";
    case TermForm::spline:
      return "spline";
  }
  return "?";
}

TermForm parse_term_form(const std::string& text) {
  for (auto f : {TermForm::none, TermForm::linear, TermForm::spline}) {
    if (to_string(f) == text) return f;
  }
  throw ParseError(0, "unknown term form '" + text + "'");
}

RegimeId classify_regime(int k, int n) {
  if (k < 1 || k > n)
    throw OutOfRange("bucket " + std::to_string(k) + " outside 1.." + std::to_string(n));
  if (k <= n - 61) return RegimeId::xbid;
  if (k <= n - 59) return RegimeId::cutover;
  return RegimeId::local;
}

std::vector<ImpactObservation> extract_temporary(const BucketGrid& grid, const VolumeBucketScheme& scheme) {
  std::vector<ImpactObservation> out;
  const auto meta = time_meta(grid.delivery_start());
  for (int k = 1; k <= grid.n_buckets(); ++k) {
    for (std::size_t r = 1; r <= grid.n_volume_buckets(); ++r) {
      const auto& c = grid.cell(k, r);
      if (c.empty) continue;
      out.push_back({ImpactKind::temporary, k, scheme.representative(r), meta, c.median_bas});
    }
  }
  return out;
}

PermanentExtraction extract_permanent(std::span<const OrderEvent> events, const BucketGrid& grid,
                                      const PermanentWindows& windows, const VolumeBucketScheme& scheme) {
  PermanentExtraction out;
  std::vector<const OrderEvent*> matches;
  for (const auto& e : events) {
    if (e.action == Action::match) matches.push_back(&e);
  }
  if (matches.empty()) return out;
  std::stable_sort(matches.begin(), matches.end(),
                   [](const OrderEvent* a, const OrderEvent* b) { return a->valid_from < b->valid_from; });

  const Seconds begin = grid.window_start();
  const Seconds end = begin + kBucketSeconds * grid.n_buckets();
  const auto timeline = BookTimeline::build(events, begin, end, scheme);
  const auto meta = time_meta(grid.delivery_start());

  std::size_t i = 0;
  while (i < matches.size()) {
    const Seconds start = matches[i]->valid_from;
    Seconds last = start;
    double volume = 0.0;
    std::size_t j = i;
    while (j < matches.size() && matches[j]->valid_from - last < windows.cluster_gap) {
      last = matches[j]->valid_from;
      volume += matches[j]->volume;
      ++j;
    }
    i = j;
    ++out.clusters;
    const Seconds pre_begin = start - windows.pre;
    const Seconds post_begin = last + windows.delay;
    const Seconds post_end = post_begin + windows.post;
    if (pre_begin < begin || post_end > end) {
      ++out.skipped_window;
      continue;
    }
    const auto r = scheme.bucket_of(volume);
    const auto pre = timeline.median_bas(pre_begin, start, r);
    const auto post = timeline.median_bas(post_begin, post_end, r);
    if (!pre || !post) {
      ++out.skipped_empty;
      continue;
    }
    const int k = static_cast<int>((start - begin) / kBucketSeconds) + 1;
    out.observations.push_back({ImpactKind::permanent, k, scheme.representative(r), meta, *post - *pre});
  }
  return out;
}

double AdditiveTerm::evaluate(double x) const {
  switch (form) {
    case TermForm::none:
      return 0.0;
    case TermForm::linear:
      return slope * std::clamp(x, lower, upper);
    case TermForm::spline:
      return spline.evaluate(x);
  }
  return 0.0;
}

double AdditivePredictor::evaluate(double k, double log_n, const TimeMeta& t_meta) const {
  double eta = intercept + k_term.evaluate(k) + n_term.evaluate(log_n);
  if (use_weekend && t_meta.weekend) eta += beta_weekend;
  if (use_peak && t_meta.peak) eta += beta_peak;
  return eta;
}

void validate(const ImpactFitConfig& c) {
  if (c.k_knots < 1 || c.n_knots < 1) throw ConfigError("spline knot counts must be >= 1");
  if (c.penalty_order < 1) throw ConfigError("penalty_order must be >= 1");
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (c.gamma_grid.empty()) throw ConfigError("gamma grid is empty");
  for (double g : c.gamma_grid) {
    if (!(g >= 0.0)) throw ConfigError("gamma values must be >= 0");
  }
}

ImpactModel::ImpactModel(int horizon, double epsilon,
                         std::array<std::array<std::optional<StratumModel>, 3>, 2> strata)
    : horizon_(horizon), epsilon_(epsilon), strata_(std::move(strata)) {
  if (horizon_ < 1) throw OutOfRange("impact model horizon must be >= 1");
}

const std::optional<StratumModel>& ImpactModel::stratum(ImpactKind kind, RegimeId regime) const {
  return strata_[static_cast<std::size_t>(kind)][static_cast<std::size_t>(regime)];
}

ImpactEstimate ImpactModel::evaluate(ImpactKind kind, double n, int k, int horizon,
                                     const TimeMeta& t_meta) const {
  if (!fitted()) throw NotFitted();
  if (n < 0.0 || !std::isfinite(n)) throw OutOfRange("trade volume must be >= 0");
  if (n == 0.0) return {};
  const int aligned = std::clamp(k + horizon_ - horizon, 1, horizon_);
  const auto& s = stratum(kind, classify_regime(aligned, horizon_));
  if (!s) throw NotFitted();
  const double log_n = std::log(n);
  return {std::exp(s->log_mu.evaluate(aligned, log_n, t_meta)),
          std::exp(s->log_sigma.evaluate(aligned, log_n, t_meta))};
}

ImpactModel fit_impact_model(std::span<const ImpactObservation> observations, int horizon,
                             const ImpactFitConfig& config) {
  validate(config);
  if (horizon < 1) throw OutOfRange("fit horizon must be >= 1");
  std::array<std::array<std::vector<ImpactObservation>, 3>, 2> by_stratum;
  for (const auto& o : observations) {
    if (!(o.n > 0.0) || !std::isfinite(o.impact))
      throw DegenerateInput("observation with non-positive volume or non-finite impact");
    const auto regime = classify_regime(o.k, horizon);
    by_stratum[static_cast<std::size_t>(o.kind)][static_cast<std::size_t>(regime)].push_back(o);
  }
  std::array<std::array<std::optional<StratumModel>, 3>, 2> strata;
  for (auto kind : {ImpactKind::temporary, ImpactKind::permanent}) {
    for (auto regime : kRegimes) {
      auto& obs = by_stratum[static_cast<std::size_t>(kind)][static_cast<std::size_t>(regime)];
      if (obs.empty()) continue;
      strata[static_cast<std::size_t>(kind)][static_cast<std::size_t>(regime)] =
          fit_stratum(kind, regime, std::move(obs), config);
    }
  }
  return ImpactModel(horizon, config.epsilon, std::move(strata));
}

ImpactEstimate eval_impact(const ImpactModel& model, ImpactKind kind, double n, int k, int horizon,
                           const TimeMeta& t_meta) {
  return model.evaluate(kind, n, k, horizon, t_meta);
}

}  // namespace intraday
