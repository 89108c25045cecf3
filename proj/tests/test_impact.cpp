#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "intraday/error.hpp"
#include "intraday/impact.hpp"
#include "impact_truth.hpp"
#include "support.hpp"

using namespace intraday;
using namespace testing_support;
using impact_truth::simulate;
using impact_truth::true_log_mu;

TEST(ClassifyRegime, Examples) {
  EXPECT_EQ(classify_regime(209, 270), RegimeId::xbid);
  EXPECT_EQ(classify_regime(210, 270), RegimeId::cutover);
  EXPECT_EQ(classify_regime(211, 270), RegimeId::cutover);
  EXPECT_EQ(classify_regime(212, 270), RegimeId::local);
  EXPECT_EQ(classify_regime(1, 62), RegimeId::xbid);
  EXPECT_EQ(classify_regime(2, 62), RegimeId::cutover);
  EXPECT_THROW(classify_regime(0, 270), OutOfRange);
  EXPECT_THROW(classify_regime(271, 270), OutOfRange);
}

TEST(ClassifyRegime, PartitionProperty) {
  for (int n = 62; n <= 600; ++n) {
    int counts[3] = {0, 0, 0};
    RegimeId prev = RegimeId::xbid;
    for (int k = 1; k <= n; ++k) {
      const auto r = classify_regime(k, n);
      ++counts[static_cast<int>(r)];
      EXPECT_GE(static_cast<int>(r), static_cast<int>(prev));  // regimes follow each other in order
      prev = r;
    }
    EXPECT_EQ(counts[0] + counts[1] + counts[2], n);
    EXPECT_EQ(counts[1], 2);
    EXPECT_EQ(counts[0], n - 61);
  }
}

TEST(ExtractTemporary, OneObservationPerPopulatedCell) {
  const auto d = delivery();
  BucketGrid grid(d, 12, VolumeBucketScheme::standard().size(), 0);
  grid.cell(10, 1).empty = false;
  grid.cell(10, 1).median_bas = 0.8;
  grid.cell(3, 4).empty = false;
  grid.cell(3, 4).median_bas = 2.5;
  const auto obs = extract_temporary(grid);
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_EQ(obs[0], (ImpactObservation{ImpactKind::temporary, 3, 12.5, time_meta(d), 2.5}));
  EXPECT_EQ(obs[1], (ImpactObservation{ImpactKind::temporary, 10, 0.5, time_meta(d), 0.8}));
}

TEST(ExtractTemporary, MatchesGridOnSyntheticBook) {
  SynthConfig c;
  const auto p = synth_product(c, delivery(), 60);
  const auto grid = aggregate(p.events, p.delivery_start, p.observation_start, p.arrival);
  const auto obs = extract_temporary(grid);
  const auto& scheme = VolumeBucketScheme::standard();
  std::vector<std::pair<double, double>> expected;
  for (int k = 1; k <= grid.n_buckets(); ++k)
    for (std::size_t r = 1; r <= grid.n_volume_buckets(); ++r)
      if (!grid.cell(k, r).empty) expected.emplace_back(scheme.representative(r), grid.cell(k, r).median_bas);
  ASSERT_EQ(obs.size(), expected.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_EQ(obs[i].n, expected[i].first);
    EXPECT_EQ(obs[i].impact, expected[i].second);
  }
}

TEST(ExtractPermanent, HandBuiltCluster) {
  const auto d = delivery();
  const auto obs = d - std::chrono::minutes{35};
  std::vector<OrderEvent> ev{add(Side::buy, 50.0, 1.0, 0, 300), add(Side::sell, 51.0, 1.0, 0, 100),
                             add(Side::sell, 51.3, 1.0, 100, 300), match(Side::buy, 51.0, 0.5, 60)};
  const auto grid = aggregate(ev, d, obs, obs);
  const auto out = extract_permanent(ev, grid);
  ASSERT_EQ(out.observations.size(), 1u);
  EXPECT_EQ(out.clusters, 1u);
  EXPECT_EQ(out.observations[0].kind, ImpactKind::permanent);
  EXPECT_EQ(out.observations[0].k, 2);
  EXPECT_EQ(out.observations[0].n, 0.5);
  EXPECT_NEAR(out.observations[0].impact, 0.3, 1e-12);

  // A second match 5 s later joins the cluster.
  ev.push_back(match(Side::buy, 51.0, 0.4, 65));
  const auto merged = extract_permanent(ev, grid);
  EXPECT_EQ(merged.clusters, 1u);
  ASSERT_EQ(merged.observations.size(), 1u);
  EXPECT_NEAR(merged.observations[0].impact, 0.3, 1e-12);

  // 30 s apart: two clusters, the second one's post window still in range.
  ev.back() = match(Side::buy, 51.0, 0.4, 90);
  EXPECT_EQ(extract_permanent(ev, grid).clusters, 2u);
}

TEST(ExtractPermanent, EdgeCases) {
  const auto d = delivery();
  const auto obs = d - std::chrono::minutes{35};
  std::vector<OrderEvent> ev{add(Side::buy, 50.0, 1.0, 0, 300), add(Side::sell, 51.0, 1.0, 0, 300)};
  const auto grid = aggregate(ev, d, obs, obs);
  EXPECT_TRUE(extract_permanent(ev, grid).observations.empty());
  ev.push_back(match(Side::buy, 51.0, 0.5, 10));   // pre window before the grid
  ev.push_back(match(Side::buy, 51.0, 0.5, 280));  // post window after the grid
  const auto out = extract_permanent(ev, grid);
  EXPECT_EQ(out.clusters, 2u);
  EXPECT_EQ(out.skipped_window, 2u);
  EXPECT_TRUE(out.observations.empty());
}

TEST(FitImpactModel, GenerateAndRecover) {
  const auto obs = simulate(1, 3);
  const auto model = fit_impact_model(obs, 300);
  const auto& scheme = VolumeBucketScheme::standard();
  double se = 0.0;
  double sum = 0.0;
  int count = 0;
  // Held-out points: between the design volumes, every 7th bucket.
  for (int k = 4; k <= 270; k += 7) {
    for (std::size_t r = 1; r < 14; ++r) {
      const double n = std::sqrt(scheme.representative(r) * scheme.representative(r + 1));
      const TimeMeta tm{false, false};
      const double truth = std::exp(true_log_mu(k, n, 300));
      const double fit = model.evaluate(ImpactKind::temporary, n, k, 300, tm).mu;
      se += (fit - truth) * (fit - truth);
      sum += truth;
      ++count;
    }
  }
  EXPECT_LE(std::sqrt(se / count), 0.10 * sum / count);
}

TEST(FitImpactModel, PermutationInvariant) {
  auto obs = simulate(2, 1);
  const auto a = fit_impact_model(obs, 300);
  std::mt19937_64 rng(4);
  std::shuffle(obs.begin(), obs.end(), rng);
  EXPECT_EQ(fit_impact_model(obs, 300), a);
}

TEST(FitImpactModel, ConstantResponse) {
  std::vector<ImpactObservation> obs;
  for (int k = 1; k <= 270; ++k)
    for (double n : {0.5, 3.0, 7.5, 12.5, 17.5}) obs.push_back({ImpactKind::temporary, k, n, {}, 0.7});
  ImpactFitConfig cfg;
  const auto m = fit_impact_model(obs, 300, cfg);
  for (int k : {5, 240, 241, 260}) {
    const auto e = m.evaluate(ImpactKind::temporary, 4.0, k, 300, {});
    EXPECT_NEAR(e.mu, 0.7, 1e-9);
    EXPECT_NEAR(e.sigma, cfg.epsilon, 1e-9);
  }
  EXPECT_FALSE(m.stratum(ImpactKind::permanent, RegimeId::xbid).has_value());
  EXPECT_THROW(m.evaluate(ImpactKind::permanent, 1.0, 5, 300, {}), NotFitted);
}

TEST(FitImpactModel, MonotoneSurfaceStaysMonotone) {
  const auto m = fit_impact_model(simulate(3, 4), 300);
  for (int k : {20, 150, 239, 240, 250, 270}) {
    double prev = 0.0;
    for (double ln = std::log(0.5); ln <= std::log(112.5); ln += 0.05) {
      const double mu = m.evaluate(ImpactKind::temporary, std::exp(ln), k, 300, {}).mu;
      EXPECT_GE(mu, prev * (1.0 - 1e-9)) << k << " " << ln;
      prev = mu;
    }
  }
}

TEST(FitImpactModel, StratumErrors) {
  std::vector<ImpactObservation> obs;
  for (int k = 1; k <= 3; ++k) obs.push_back({ImpactKind::temporary, k, 0.5 * k, {}, 1.0});
  try {
    fit_impact_model(obs, 300);
    FAIL();
  } catch (const InsufficientData& e) {
    EXPECT_NE(std::string(e.what()).find("temporary/xbid"), std::string::npos);
  }
  obs.push_back({ImpactKind::temporary, 1, -1.0, {}, 1.0});
  EXPECT_THROW(fit_impact_model(obs, 300), DegenerateInput);
  ImpactFitConfig bad;
  bad.epsilon = 0.0;
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(ImpactModel, EvaluationRules) {
  const auto m = fit_impact_model(simulate(5, 1), 300);
  const TimeMeta tm{};
  EXPECT_EQ(m.evaluate(ImpactKind::temporary, 0.0, 10, 300, tm), (ImpactEstimate{0.0, 0.0}));
  EXPECT_THROW(m.evaluate(ImpactKind::temporary, -1.0, 10, 300, tm), OutOfRange);
  // No extrapolation past the largest training volume.
  const double top = m.evaluate(ImpactKind::temporary, 112.5, 10, 300, tm).mu;
  EXPECT_DOUBLE_EQ(m.evaluate(ImpactKind::temporary, 900.0, 10, 300, tm).mu, top);
  // Shorter horizons line up at the delivery end.
  EXPECT_EQ(m.evaluate(ImpactKind::temporary, 3.0, 30, 90, tm), m.evaluate(ImpactKind::temporary, 3.0, 240, 300, tm));
  EXPECT_EQ(m.evaluate(ImpactKind::temporary, 3.0, 1, 600, tm), m.evaluate(ImpactKind::temporary, 3.0, 1, 300, tm));
  EXPECT_THROW(eval_impact(ImpactModel{}, ImpactKind::temporary, 1.0, 1, 300, tm), NotFitted);
}

TEST(ImpactModel, JsonRoundTrip) {
  const auto m = fit_impact_model(simulate(6, 1), 300);
  auto j = to_json(m);
  EXPECT_EQ(impact_model_from_json(j), m);
  j["volume_profile"] = {1, 2, 3};  // extra keys are ignored
  EXPECT_EQ(impact_model_from_json(j), m);
  const auto path = std::filesystem::temp_directory_path() / "intraday_model_test.json";
  save_impact_model(path, m);
  EXPECT_EQ(load_impact_model(path), m);
  std::filesystem::remove(path);
  j["version"] = 99;
  EXPECT_THROW(impact_model_from_json(j), SchemaVersionMismatch);
  EXPECT_THROW(impact_model_from_json(nlohmann::json{{"format", "other"}}), ParseError);
  EXPECT_THROW(to_json(ImpactModel{}), NotFitted);
}
