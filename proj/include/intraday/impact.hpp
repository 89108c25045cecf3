#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "intraday/calendar.hpp"
#include "intraday/lob_core.hpp"
#include "intraday/pspline.hpp"

// Temporary and permanent market impact: observation extraction from the
// discretized book and the regime-partitioned additive log-scale model.
//
// Minute indices k are counted against a horizon H, the number of minutes
// from the start of bucket 1 to delivery (BucketGrid::horizon()).

namespace intraday {

enum class ImpactKind : std::uint8_t { temporary = 0, permanent = 1 };
enum class RegimeId : std::uint8_t { xbid = 0, cutover = 1, local = 2 };

std::string to_string(ImpactKind kind);
std::string to_string(RegimeId regime);
ImpactKind parse_impact_kind(const std::string& text);
RegimeId parse_regime(const std::string& text);

// xbid for k <= n-61, cutover for k in {n-60, n-59}, local above.
// Throws OutOfRange unless 1 <= k <= n.
RegimeId classify_regime(int k, int n);

struct ImpactObservation {
  ImpactKind kind = ImpactKind::temporary;
  int k = 1;
  double n = 0.0;  // MWh
  TimeMeta t_meta{};
  double impact = 0.0;  // EUR/MWh

  bool operator==(const ImpactObservation&) const = default;
};

// One observation per populated (k, r) cell: n is the representative volume
// of bucket r, impact the cell's median spread.
std::vector<ImpactObservation> extract_temporary(
    const BucketGrid& grid, const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

struct PermanentWindows {
  Seconds cluster_gap = 10;  // matches closer than this chain into one cluster
  Seconds pre = 20;          // spread measured over [start - pre, start)
  Seconds delay = 40;        // wait after the cluster's last match
  Seconds post = 20;         // spread measured over [end + delay, end + delay + post)
};

struct PermanentExtraction {
  std::vector<ImpactObservation> observations;
  std::size_t clusters = 0;
  std::size_t skipped_window = 0;  // window leaves the grid horizon
  std::size_t skipped_empty = 0;   // no two-sided depth at the cluster's bucket
};

// Events are in seconds since the file's observation start, consistent with
// grid.window_start().
PermanentExtraction extract_permanent(
    std::span<const OrderEvent> events, const BucketGrid& grid, const PermanentWindows& windows = {},
    const VolumeBucketScheme& scheme = VolumeBucketScheme::standard());

struct ImpactEstimate {
  double mu = 0.0;
  double sigma = 0.0;

  bool operator==(const ImpactEstimate&) const = default;
};

// Anything the optimizer can price trades against.
class ImpactSurface {
 public:
  virtual ~ImpactSurface() = default;
  // Impact of trading n >= 0 MWh in bucket k of a window with the given horizon.
  virtual ImpactEstimate evaluate(ImpactKind kind, double n, int k, int horizon,
                                  const TimeMeta& t_meta) const = 0;
};

enum class TermForm : std::uint8_t { none, linear, spline };

std::string to_string(TermForm form);
TermForm parse_term_form(const std::string& text);

// One covariate's contribution. Inputs are clamped to [lower, upper].
struct AdditiveTerm {
  TermForm form = TermForm::none;
  double lower = 0.0;
  double upper = 0.0;
  double slope = 0.0;   // linear
  SplineModel spline;   // spline, centered over the training data

  double evaluate(double x) const;

  bool operator==(const AdditiveTerm&) const = default;
};

// intercept + f_k(k) + f_n(log n) + beta_weekend * we + beta_peak * peak
struct AdditivePredictor {
  double intercept = 0.0;
  AdditiveTerm k_term;
  AdditiveTerm n_term;  // covariate is log(n)
  bool use_weekend = false;
  double beta_weekend = 0.0;
  bool use_peak = false;
  double beta_peak = 0.0;
  double gcv = 0.0;
  double edf = 0.0;

  double evaluate(double k, double log_n, const TimeMeta& t_meta) const;

  bool operator==(const AdditivePredictor&) const = default;
};

struct StratumModel {
  ImpactKind kind = ImpactKind::temporary;
  RegimeId regime = RegimeId::xbid;
  AdditivePredictor log_mu;
  AdditivePredictor log_sigma;
  std::size_t observations = 0;
  std::size_t floored = 0;  // responses raised to epsilon before the log

  bool operator==(const StratumModel&) const = default;
};

struct ImpactFitConfig {
  int k_knots = 10;
  int n_knots = 8;
  int penalty_order = 2;
  double epsilon = 0.01;
  std::size_t min_observations = 8;  // per stratum, counting positive impacts only
  std::vector<double> gamma_grid = default_gamma_grid();
};

void validate(const ImpactFitConfig& config);

class ImpactModel : public ImpactSurface {
 public:
  ImpactModel() = default;
  ImpactModel(int horizon, double epsilon, std::array<std::array<std::optional<StratumModel>, 3>, 2> strata);

  bool fitted() const { return horizon_ > 0; }
  int horizon() const { return horizon_; }
  double epsilon() const { return epsilon_; }
  const std::optional<StratumModel>& stratum(ImpactKind kind, RegimeId regime) const;

  // n = 0 gives (0, 0). k is shifted onto the training horizon,
  // k' = k + horizon() - horizon, and clamped to [1, horizon()].
  ImpactEstimate evaluate(ImpactKind kind, double n, int k, int horizon,
                          const TimeMeta& t_meta) const override;

  bool operator==(const ImpactModel& o) const {
    return horizon_ == o.horizon_ && epsilon_ == o.epsilon_ && strata_ == o.strata_;
  }

 private:
  int horizon_ = 0;
  double epsilon_ = 0.01;
  std::array<std::array<std::optional<StratumModel>, 3>, 2> strata_{};
};

// Two-stage fit per (kind, regime) stratum present in the data: log mu by
// penalized least squares on log(max(impact, epsilon)), then log sigma on
// log(max(|impact - mu_hat| * sqrt(pi / 2), epsilon)). A stratum without
// observations is left empty and evaluating it throws NotFitted; a stratum
// with fewer than min_observations positive impacts throws InsufficientData.
ImpactModel fit_impact_model(std::span<const ImpactObservation> observations, int horizon,
                             const ImpactFitConfig& config = {});

// Throws NotFitted for a default-constructed model.
ImpactEstimate eval_impact(const ImpactModel& model, ImpactKind kind, double n, int k, int horizon,
                           const TimeMeta& t_meta);

inline constexpr int kImpactModelVersion = 1;

nlohmann::json to_json(const ImpactModel& model);
ImpactModel impact_model_from_json(const nlohmann::json& j);
void save_impact_model(const std::filesystem::path& path, const ImpactModel& model);
ImpactModel load_impact_model(const std::filesystem::path& path);

}  // namespace intraday
