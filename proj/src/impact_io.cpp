#include <fstream>

#include "intraday/error.hpp"
#include "intraday/impact.hpp"

namespace intraday {

namespace {

using nlohmann::json;

json term_to_json(const AdditiveTerm& t) {
  json j{{"form", to_string(t.form)}, {"lower", t.lower}, {"upper", t.upper}};
  if (t.form == TermForm::linear) j["slope"] = t.slope;
  if (t.form == TermForm::spline) {
    j["knots"] = t.spline.knots;
    j["degree"] = t.spline.degree;
    j["penalty_order"] = t.spline.penalty_order;
    j["coefficients"] = t.spline.coefficients;
    j["gamma"] = t.spline.smoothing;
  }
  return j;
}

AdditiveTerm term_from_json(const json& j) {
  AdditiveTerm t;
  t.form = parse_term_form(j.at("form").get<std::string>());
  t.lower = j.at("lower").get<double>();
  t.upper = j.at("upper").get<double>();
  if (t.form == TermForm::linear) t.slope = j.at("slope").get<double>();
  if (t.form == TermForm::spline) {
    t.spline.lower = t.lower;
    t.spline.upper = t.upper;
    t.spline.knots = j.at("knots").get<std::vector<double>>();
    t.spline.degree = j.at("degree").get<int>();
    t.spline.penalty_order = j.at("penalty_order").get<int>();
    t.spline.coefficients = j.at("coefficients").get<std::vector<double>>();
    t.spline.smoothing = j.at("gamma").get<double>();
    if (t.spline.degree != kSplineDegree || t.spline.coefficients.size() != t.spline.basis_size())
      throw ParseError(0, "spline term has inconsistent degree or coefficient count");
  }
  return t;
}

json predictor_to_json(const AdditivePredictor& p) {
  return {{"intercept", p.intercept},
          {"k", term_to_json(p.k_term)},
          {"log_n", term_to_json(p.n_term)},
          {"use_weekend", p.use_weekend},
          {"beta_weekend", p.beta_weekend},
          {"use_peak", p.use_peak},
          {"beta_peak", p.beta_peak},
          {"gcv", p.gcv},
          {"edf", p.edf}};
}

AdditivePredictor predictor_from_json(const json& j) {
  AdditivePredictor p;
  p.intercept = j.at("intercept").get<double>();
  p.k_term = term_from_json(j.at("k"));
  p.n_term = term_from_json(j.at("log_n"));
  p.use_weekend = j.at("use_weekend").get<bool>();
  p.beta_weekend = j.at("beta_weekend").get<double>();
  p.use_peak = j.at("use_peak").get<bool>();
  p.beta_peak = j.at("beta_peak").get<double>();
  p.gcv = j.at("gcv").get<double>();
  p.edf = j.at("edf").get<double>();
  return p;
}

}  // namespace

nlohmann::json to_json(const ImpactModel& model) {
  if (!model.fitted()) throw NotFitted();
  json strata = json::array();
  for (auto kind : {ImpactKind::temporary, ImpactKind::permanent}) {
    for (auto regime : {RegimeId::xbid, RegimeId::cutover, RegimeId::local}) {
      const auto& s = model.stratum(kind, regime);
      if (!s) continue;
      strata.push_back({{"kind", to_string(kind)},
                        {"regime", to_string(regime)},
                        {"observations", s->observations},
                        {"floored", s->floored},
                        {"log_mu", predictor_to_json(s->log_mu)},
                        {"log_sigma", predictor_to_json(s->log_sigma)}});
    }
  }
  return {{"format", "intraday-impact-model"},
          {"version", kImpactModelVersion},
          {"horizon", model.horizon()},
          {"epsilon", model.epsilon()},
          {"regimes", {{"xbid", "k <= H-61"}, {"cutover", "k in {H-60, H-59}"}, {"local", "k >= H-58"}}},
          {"strata", std::move(strata)}};
}

ImpactModel impact_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "intraday-impact-model")
      throw ParseError(0, "not an impact model document");
    const int version = j.at("version").get<int>();
    if (version != kImpactModelVersion) throw SchemaVersionMismatch(version);
    std::array<std::array<std::optional<StratumModel>, 3>, 2> strata;
    for (const auto& s : j.at("strata")) {
      StratumModel m;
      m.kind = parse_impact_kind(s.at("kind").get<std::string>());
      m.regime = parse_regime(s.at("regime").get<std::string>());
      m.observations = s.at("observations").get<std::size_t>();
      m.floored = s.at("floored").get<std::size_t>();
      m.log_mu = predictor_from_json(s.at("log_mu"));
      m.log_sigma = predictor_from_json(s.at("log_sigma"));
      strata[static_cast<std::size_t>(m.kind)][static_cast<std::size_t>(m.regime)] = std::move(m);
    }
    return ImpactModel(j.at("horizon").get<int>(), j.at("epsilon").get<double>(), std::move(strata));
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("impact model: ") + e.what());
  }
}

void save_impact_model(const std::filesystem::path& path, const ImpactModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

ImpactModel load_impact_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
  return impact_model_from_json(j);
}

}  // namespace intraday
