#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "pipf/io.hpp"

using namespace pipf;

TEST(Numbers, RoundTripExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int k = 0; k < 10000; ++k) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(k % 13) - 6.0);
    EXPECT_EQ(parse_number(format_number(v)), v);
  }
  for (double v : {0.0, -0.0, 1.0, 0.1, 1e-300, 1e300, std::numeric_limits<double>::denorm_min(),
                   std::numeric_limits<double>::infinity()}) {
    EXPECT_EQ(parse_number(format_number(v)), v);
  }
}

TEST(Numbers, NanIsEmpty) {
  EXPECT_EQ(format_number(std::nan("")), "");
  EXPECT_TRUE(std::isnan(parse_number("")));
}

TEST(Numbers, FixedFormat) {
  EXPECT_EQ(format_number(0.25), "0.25");
  EXPECT_EQ(format_number(-3.0), "-3");
  EXPECT_THROW(parse_number("1,5"), InvalidInput);
  EXPECT_THROW(parse_number("abc"), InvalidInput);
  EXPECT_THROW(parse_number("1.5x"), InvalidInput);
}

TEST(Csv, SplitKeepsTrailingEmptyField) {
  EXPECT_EQ(split_csv_line("a,,b,"), (std::vector<std::string>{"a", "", "b", ""}));
}

TEST(Config, DefaultsMatchModel) {
  const RunConfig c = parse_config("{}");
  EXPECT_EQ(c.model.m, 80.0);
  EXPECT_EQ(c.model.r0, 1.0);
  EXPECT_EQ(c.model.g, 9.8);
  const auto s = c.stabilizer_config();
  EXPECT_EQ(s.constraints.U_max[0], 2.0);
  EXPECT_EQ(s.constraints.U_min[1], -1.0);
  EXPECT_EQ(s.pitch.k1_ladder, (std::vector<double>{1, 10, 100, 1000}));
  EXPECT_EQ(s.vertical.k1_ladder, (std::vector<double>{1e6, 1e7, 1e8}));
  EXPECT_NEAR(c.capture_reach(), std::cos(deg_to_rad(10.0)), 1e-15);
}

TEST(Config, RoundTripIsIdempotent) {
  const std::string text = R"({
    "model": {"m": 60, "r0": 0.9},
    "sweep": {"n_omega": 3, "n_vx": 2, "vx0": [0.9, 1.7], "inertia_nd": 0.08},
    "stabilizer": {"eta": 0.25, "pitch": {"k1": [1, 10], "k2": 1e4, "k3": 1e5}},
    "case": {"omega0": 2.5},
    "capture": {"nsteps": 3},
    "workers": 4,
    "out_dir": "results"
  })";
  const RunConfig c = parse_config(text);
  EXPECT_EQ(c.model.m, 60.0);
  EXPECT_EQ(c.sweep.n_omega, 3);
  ASSERT_TRUE(c.sweep.vx0.has_value());
  EXPECT_EQ((*c.sweep.vx0)[1], 1.7);
  EXPECT_EQ(c.stabilizer.pitch.k1, (std::vector<double>{1, 10}));
  const std::string once = serialize_config(c);
  const std::string twice = serialize_config(parse_config(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(serialize_config(parse_config(serialize_config(RunConfig{}))),
            serialize_config(RunConfig{}));
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_config(R"({"modle": {}})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"model": {"mass": 80}})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"stabilizer": {"pitch": {"k4": 1}}})"), InvalidInput);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("{"), InvalidInput);
  EXPECT_THROW(parse_config("[]"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"model": {"m": "heavy"}})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"model": {"m": -1}})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"bounds": {"F": [2, 0]}})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"sweep": {"n_vx": 1}})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"schema": 2})"), InvalidInput);
  EXPECT_THROW(parse_config(R"({"workers": 0})"), InvalidInput);
  EXPECT_THROW(load_config("/nonexistent/config.json"), InvalidInput);
}

TEST(MapCsv, RoundTrip) {
  PerformanceMap map;
  map.omega_values = {1.0, 5.0};
  map.vx_values = {0.8, 2.0};
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double w : map.omega_values) {
    for (double v : map.vx_values) {
      LandingOutcome o;
      o.landing_case = {w, v, -0.3, 0.04, deg_to_rad(60.0)};
      o.success = w < 3.0;
      o.reason = o.success ? FailureReason::None : FailureReason::AlphaInfeasible;
      if (o.success) {
        o.feasibility = FeasibilityReport{};
        o.feasibility->T_lb = u(rng) / 7.0;
        o.feasibility->T_ub = u(rng) / 3.0;
        o.T_vs_star = u(rng) / 11.0;
        o.grf = {u(rng), 3.0 * u(rng)};
      }
      map.cases.push_back(o);
    }
  }
  std::ostringstream os;
  write_map_csv(os, map);
  std::istringstream is(os.str());
  const auto rows = read_map_csv(is);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& o = map.cases[k];
    EXPECT_EQ(rows[k].index, k);
    EXPECT_EQ(rows[k].omega0, o.landing_case.omega0_nd);
    EXPECT_EQ(rows[k].vx0, o.landing_case.vx0_nd);
    EXPECT_EQ(rows[k].success, o.success);
    EXPECT_EQ(rows[k].reason, to_string(o.reason));
    if (o.success) {
      EXPECT_EQ(rows[k].T_lb, o.feasibility->T_lb);
      EXPECT_EQ(rows[k].T_ub, o.feasibility->T_ub);
      EXPECT_EQ(rows[k].T_vs_star, o.T_vs_star);
      EXPECT_EQ(rows[k].min_Ffz, o.grf.min_Ffz_nd);
      EXPECT_EQ(rows[k].max_mu, o.grf.max_mu);
    } else {
      EXPECT_TRUE(std::isnan(rows[k].T_lb));
      EXPECT_TRUE(std::isnan(rows[k].max_mu));
    }
  }
  // Writing the parsed values again reproduces the bytes.
  std::ostringstream again;
  write_map_csv(again, map);
  EXPECT_EQ(again.str(), os.str());
}

TEST(MapCsv, RejectsCorruptFiles) {
  std::istringstream empty("");
  EXPECT_THROW(read_map_csv(empty), InvalidInput);
  std::istringstream header("a,b,c\n");
  EXPECT_THROW(read_map_csv(header), InvalidInput);
  std::ostringstream os;
  CsvWriter w(os);
  w.header(map_csv_columns());
  os << "0,1,0.8\n";
  std::istringstream short_row(os.str());
  EXPECT_THROW(read_map_csv(short_row), InvalidInput);
}

TEST(BoundaryJson, CarriesSchemaAndFit) {
  PerformanceMap map;
  map.spec.n_omega = 2;
  map.boundary = BoundaryFit{-2.0, 7.0, 0.9};
  const auto j = boundary_json(map);
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["boundary"]["slope"], -2.0);
  map.boundary.reset();
  EXPECT_TRUE(boundary_json(map)["boundary"].is_null());
}
