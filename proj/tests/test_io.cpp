#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rfnltiso/csv.hpp"
#include "rfnltiso/serialization.hpp"

using namespace rfnltiso;

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int k = 0; k < 10000; ++k) {
    double v = std::bit_cast<double>(bits(gen));
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(parse_double(format_double(std::numeric_limits<double>::denorm_min())),
            std::numeric_limits<double>::denorm_min());
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_THROW(parse_double("1.5x"), DataError);
  EXPECT_THROW(parse_double(""), DataError);
}

TEST(TimeSeriesCsv, RoundTrip) {
  GeneratorConfig g;
  g.T = 50;
  const auto data = generate(g);
  std::stringstream ss;
  write_timeseries_csv(ss, data);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,node_1,node_2,node_3,node_4,node_5");
  const auto back = read_timeseries_csv(ss);
  EXPECT_EQ(back.N, data.N);
  EXPECT_EQ(back.T, data.T);
  EXPECT_EQ(back.values, data.values);
}

TEST(TimeSeriesCsv, RejectsMalformedInput) {
  std::stringstream ragged("t,node_1,node_2\n0,1.0,2.0\n1,3.0\n");
  EXPECT_THROW(read_timeseries_csv(ragged), DataError);
  std::stringstream bad_header("time,x\n0,1\n");
  EXPECT_THROW(read_timeseries_csv(bad_header), DataError);
  std::stringstream nan_cell("t,node_1\n0,nan\n");
  EXPECT_THROW(read_timeseries_csv(nan_cell), DataError);
  std::stringstream empty("");
  EXPECT_THROW(read_timeseries_csv(empty), DataError);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  TimeSeriesMatrix d(2, 4);
  d.values = {1, 10, 2, 10, 3, 10, 4, 10};
  standardize(d);
  double mean = 0.0, var = 0.0;
  for (std::size_t t = 0; t < 4; ++t) mean += d.at(0, t);
  for (std::size_t t = 0; t < 4; ++t) var += d.at(0, t) * d.at(0, t);
  EXPECT_NEAR(mean, 0.0, 1e-14);
  EXPECT_NEAR(var / 4.0, 1.0, 1e-14);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(d.at(1, t), 0.0);
}

TEST(TopologyJsonl, RoundTrip) {
  GeneratorConfig g;
  g.T = 2500;
  g.switch_interval = 1000;
  const auto data = generate(g);
  std::stringstream ss;
  write_topology_jsonl(ss, data);
  const auto back = read_topology_jsonl(ss);
  ASSERT_EQ(back.size(), data.snapshots.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].t, data.snapshots[i].t);
    EXPECT_EQ(back[i].topology, data.snapshots[i].topology);
  }
  std::stringstream bad("{\"t\":0,\"N\":2,\"P\":1,\"a\":[1],\"active\":[1]}\n");
  EXPECT_THROW(read_topology_jsonl(bad), DataError);
}

TEST(PseudoAdjacencyCsv, HeaderOrderAndRoundTrip) {
  std::stringstream ss;
  write_pseudo_adjacency_header(ss, 2, 2);
  PseudoAdjacency a(2, 2, 7);
  for (std::size_t i = 0; i < a.b.size(); ++i) a.b[i] = 0.1 * static_cast<double>(i) + 1e-17;
  write_pseudo_adjacency_row(ss, a);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,b_1_1_1,b_1_1_2,b_1_2_1,b_1_2_2,b_2_1_1,b_2_1_2,b_2_2_1,b_2_2_2");
  const auto back = read_pseudo_adjacency_csv(ss, 2, 2);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].t, 7u);
  EXPECT_EQ(back[0].b, a.b);
  std::stringstream wrong(text);
  EXPECT_THROW(read_pseudo_adjacency_csv(wrong, 3, 2), DataError);
}

TEST(PredictionsCsv, RoundTrip) {
  std::stringstream ss;
  write_predictions_header(ss, 2);
  const std::vector<double> y{1.5, -2.25}, yhat{1.0 / 3.0, 2e-300};
  write_predictions_row(ss, 3, y, yhat);
  const auto tab = read_predictions_csv(ss);
  EXPECT_EQ(tab.N, 2u);
  EXPECT_EQ(tab.times, std::vector<std::size_t>{3});
  EXPECT_EQ(tab.observed[1][0], -2.25);
  EXPECT_EQ(tab.predicted[0][0], 1.0 / 3.0);
  EXPECT_EQ(tab.predicted[1][0], 2e-300);
}

TEST(CurveCsv, UndefinedEntriesAreNull) {
  std::stringstream ss;
  const std::vector<std::size_t> t{0, 1};
  const std::vector<std::optional<double>> v{0.25, std::nullopt};
  write_curve_csv(ss, t, v);
  EXPECT_EQ(ss.str(), "t,value\n0,0.25\n1,null\n");
}

TEST(ConfigJson, GeneratorRoundTripAndUnknownKeys) {
  GeneratorConfig g;
  g.N = 4;
  g.switch_interval = 250;
  g.nonlinearity = Nonlinearity::linear;
  g.seed = 99;
  const auto back = generator_config_from_json(to_json(g));
  EXPECT_EQ(to_json(back), to_json(g));
  auto j = to_json(g);
  j["swtich_interval"] = 3;
  EXPECT_THROW(generator_config_from_json(j), ConfigError);
  auto k = to_json(g);
  k["N"] = "five";
  EXPECT_THROW(generator_config_from_json(k), ConfigError);
}

TEST(ConfigJson, EstimatorRoundTripAndValidation) {
  EstimatorConfig c;
  c.D = 10;
  c.schedule = StepSchedule::inverse_sqrt;
  c.convention = StepConvention::step_size;
  c.shared_map = false;
  const auto back = estimator_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  auto j = to_json(c);
  j["lamda"] = 0.1;
  EXPECT_THROW(estimator_config_from_json(j), ConfigError);
  auto k = to_json(c);
  k["gamma"] = -1.0;
  EXPECT_THROW(estimator_config_from_json(k), ConfigError);
  auto s = to_json(c);
  s["schedule"] = "harmonic";
  EXPECT_THROW(estimator_config_from_json(s), ConfigError);
}

TEST(ConfigJson, RffMapRoundTrip) {
  const auto m = sample_frequencies(GaussianKernelSpec{0.3}, 8, 12345);
  EXPECT_EQ(rff_map_from_json(json::parse(to_json(m).dump())), m);
  auto j = to_json(m);
  j["D"] = 9;
  EXPECT_THROW(rff_map_from_json(j), ConfigError);
}

namespace {

template <class Est, class Restore>
void check_resume_bit_exact(Est a, Restore restore) {
  GeneratorConfig g;
  g.T = 600;
  g.seed = 4;
  const auto data = generate(g);
  Est b = a;
  for (std::size_t t = 0; t < 300; ++t) a.observe(data.sample(t));
  const std::string text = checkpoint_to_json(a).dump();
  auto resumed = restore(json::parse(text));
  for (std::size_t t = 0; t < 300; ++t) b.observe(data.sample(t));
  for (std::size_t t = 300; t < data.T; ++t) {
    const auto ra = a.observe(data.sample(t));
    const auto rr = resumed.observe(data.sample(t));
    ASSERT_EQ(ra->predictions, rr->predictions);
    ASSERT_EQ(ra->t, rr->t);
  }
  EXPECT_EQ(a.state(), resumed.state());
  EXPECT_EQ(a.consumed(), resumed.consumed());
}

}  // namespace

TEST(Checkpoint, RfResumeIsBitExact) {
  EstimatorConfig c;
  c.rff_seed = 5;
  check_resume_bit_exact(make_rf_estimator(c), rf_estimator_from_checkpoint);
  c.shared_map = false;
  check_resume_bit_exact(make_rf_estimator(c), rf_estimator_from_checkpoint);
}

TEST(Checkpoint, LinearResumeIsBitExact) {
  check_resume_bit_exact(make_linear_baseline(EstimatorConfig{}), linear_baseline_from_checkpoint);
}

TEST(Checkpoint, RejectsForeignOrCorrupt) {
  auto est = make_rf_estimator(EstimatorConfig{});
  auto j = checkpoint_to_json(est);
  EXPECT_THROW(linear_baseline_from_checkpoint(j), ConfigError);
  auto bad = j;
  bad["format"] = "something-else";
  EXPECT_THROW(rf_estimator_from_checkpoint(bad), ConfigError);
  auto short_alpha = j;
  short_alpha["state"]["alpha"] = std::vector<double>{1.0};
  EXPECT_THROW(rf_estimator_from_checkpoint(short_alpha), ConfigError);
}
