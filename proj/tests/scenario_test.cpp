#include <gtest/gtest.h>

#include <fstream>

#include "flexmarket/scenario.hpp"

namespace flexmarket {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class ScenarioFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("flexmarket_scenario_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

json minimal(int total = 4, int horizon = 2) {
  const int n = total + horizon;
  return json{{"time", {{"dt_hours", 1.0}, {"total_steps", total}, {"horizon_len", horizon}}},
              {"series",
               {{"outdoor_temp", std::vector<double>(n, 70.0)},
                {"irradiance_frac", std::vector<double>(n, 0.5)},
                {"lem_price", std::vector<double>(n, 0.2)}}},
              {"agents", {{{"id", "home"}, {"gamma", 1.0}, {"fixed_load", 2.0}}}}};
}

json full() {
  json doc = minimal(24, 24);
  doc["name"] = "full";
  doc["policy"] = {{"beta", 0.4}};
  doc["agents"][0]["devices"] = {
      {{"type", "battery"}, {"id", "bs"}, {"capacity_kwh", 13.5}, {"p_min", -5}, {"p_max", 5}, {"soc_init", 0.5}},
      {{"type", "ev"},
       {"id", "ev"},
       {"capacity_kwh", 60},
       {"p_min", -7},
       {"p_max", 7},
       {"soc_init", 0.6},
       {"away_window", {9, 17}},
       {"soc_target", 0.9},
       {"target_step", 9}},
      {{"type", "heat_pump"},
       {"id", "hp"},
       {"r_th", 2},
       {"c_th", 2},
       {"cop", 3},
       {"p_rated", 3},
       {"t_min", 67},
       {"t_max", 73},
       {"t_setpoint", 70},
       {"t_init", 70}},
      {{"type", "pv"}, {"id", "pv"}, {"p_rated", 5}}};
  return doc;
}

Error catch_error(const json& doc) {
  try {
    parse_scenario(doc, ".");
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an error";
  return Error(ErrorKind::kValidation, "none");
}

TEST_F(ScenarioFiles, MinimalFixedLoadAgent) {
  const Scenario s = load_scenario(write("s.json", minimal().dump()));
  ASSERT_EQ(s.agents.size(), 1u);
  EXPECT_TRUE(s.agents[0].devices.empty());
  EXPECT_EQ(s.agents[0].fixed_load, std::vector<double>(6, 2.0));
  EXPECT_EQ(s.policy.beta, std::vector<double>(4, 0.0));
  EXPECT_EQ(s.weights, ObjectiveWeights{});
}

TEST(Scenario, NegativeGammaNamesField) {
  json doc = minimal();
  doc["agents"][0]["gamma"] = -1;
  const Error e = catch_error(doc);
  EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  EXPECT_TRUE(e.names_field("agents[0].gamma"));
}

TEST(Scenario, ShortSeriesNamesLength) {
  json doc = minimal(4, 2);
  doc["series"]["irradiance_frac"] = std::vector<double>(5, 0.1);
  const Error e = catch_error(doc);
  EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  ASSERT_TRUE(e.names_field("series.irradiance_frac"));
  EXPECT_NE(std::string(e.what()).find("length"), std::string::npos);
}

TEST(Scenario, EpsilonOrderChecked) {
  json doc = minimal();
  doc["agents"][0]["eps_lo"] = 0.3;
  doc["agents"][0]["eps_hi"] = 0.2;
  EXPECT_TRUE(catch_error(doc).names_field("eps_hi"));
}

TEST(Scenario, RangeChecksOnSeries) {
  json doc = minimal();
  doc["series"]["irradiance_frac"][1] = 1.5;
  doc["series"]["lem_price"][0] = 0.0;
  const Error e = catch_error(doc);
  EXPECT_TRUE(e.names_field("series.irradiance_frac[1]"));
  EXPECT_TRUE(e.names_field("series.lem_price[0]"));
}

TEST(Scenario, UnknownFieldIsParseError) {
  json doc = minimal();
  doc["weights"] = {{"xi_evv", 3.0}};
  const Error e = catch_error(doc);
  EXPECT_EQ(e.kind(), ErrorKind::kParse);
  EXPECT_TRUE(e.names_field("weights.xi_evv"));
}

TEST(Scenario, DeviceValidationNamesDevice) {
  json doc = full();
  doc["agents"][0]["devices"][2]["t_setpoint"] = 90;
  const Error e = catch_error(doc);
  EXPECT_TRUE(e.names_field("agents[0].devices[2].t_setpoint"));
}

TEST(Scenario, NoAgentsRejected) {
  json doc = minimal();
  doc["agents"] = json::array();
  EXPECT_TRUE(catch_error(doc).names_field("agents"));
}

TEST_F(ScenarioFiles, MissingFile) {
  try {
    load_scenario(dir_ / "nope.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFileMissing);
    EXPECT_NE(std::string(e.what()).find("scenario not found"), std::string::npos);
  }
}

TEST_F(ScenarioFiles, MalformedJson) {
  try {
    load_scenario(write("bad.json", "{\"time\": "));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
}

TEST_F(ScenarioFiles, CsvSeriesResolveRelativeToScenario) {
  fs::create_directories(dir_ / "data");
  write_series_csv(dir_ / "data" / "price.csv", std::vector<double>(6, 0.125));
  json doc = minimal();
  doc["series"]["lem_price"] = "data/price.csv";
  const Scenario s = load_scenario(write("s.json", doc.dump()));
  EXPECT_EQ(s.series.lem_price, std::vector<double>(6, 0.125));
}

TEST_F(ScenarioFiles, MalformedCsvIsParseError) {
  write("price.csv", "step,value\n0,0.1\n1,abc\n");
  json doc = minimal();
  doc["series"]["lem_price"] = "price.csv";
  write("s.json", doc.dump());
  try {
    load_scenario(dir_ / "s.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_TRUE(e.names_field("series.lem_price"));
  }
}

TEST(Scenario, RoundTripIsIdentical) {
  const Scenario s = parse_scenario(full(), ".");
  ASSERT_EQ(s.agents[0].devices.size(), 4u);
  const Scenario again = parse_scenario(scenario_to_json(s), ".");
  EXPECT_TRUE(again == s);
  EXPECT_EQ(scenario_to_json(again).dump(), scenario_to_json(s).dump());
}

TEST(Scenario, CyclicPaddingRepeatsLastDay) {
  json doc = minimal(24, 24);
  std::vector<double> temps(24);
  for (int i = 0; i < 24; ++i) temps[i] = i;
  doc["time"]["pad_cyclic"] = true;
  doc["series"]["outdoor_temp"] = temps;
  doc["series"]["irradiance_frac"] = std::vector<double>(24, 0.0);
  doc["series"]["lem_price"] = std::vector<double>(24, 0.1);
  const Scenario s = parse_scenario(doc, ".");
  ASSERT_EQ(s.series.outdoor_temp.size(), 48u);
  for (int i = 0; i < 24; ++i) EXPECT_EQ(s.series.outdoor_temp[24 + i], i);
}

TEST(Scenario, OverridesEditDocument) {
  json doc = full();
  apply_override(doc, "weights.xi_ev=3.5");
  apply_override(doc, "agents.0.gamma=2");
  apply_override(doc, "name=renamed");
  const Scenario s = parse_scenario(doc, ".");
  EXPECT_EQ(s.weights.xi_ev, 3.5);
  EXPECT_EQ(s.agents[0].gamma, 2.0);
  EXPECT_EQ(s.name, "renamed");
  EXPECT_THROW(apply_override(doc, "agents.7.gamma=1"), Error);
  EXPECT_THROW(apply_override(doc, "no_equals"), Error);
  apply_override(doc, "agents.0.eps_hi=0.001");
  EXPECT_TRUE(catch_error(doc).names_field("eps_hi"));
}

TEST(Horizon, WindowsAndStates) {
  const Scenario s = parse_scenario(full(), ".");
  const HorizonView v = slice_horizon(s, 0);
  EXPECT_EQ(v.length, 24);
  EXPECT_EQ(v.outdoor_temp.size(), 24u);
  EXPECT_EQ(v.step(23), 23);
  ASSERT_EQ(v.states.size(), 1u);
  ASSERT_EQ(v.states[0].size(), 4u);
  EXPECT_EQ(v.states[0][0], (DeviceState{DeviceKind::kBattery, 0.5}));
  EXPECT_EQ(v.states[0][2], (DeviceState{DeviceKind::kHeatPump, 70.0}));
}

TEST(Horizon, BoundaryUsesPadAndBeyondThrows) {
  json doc = full();
  doc["time"]["pad_cyclic"] = true;
  for (const char* k : {"outdoor_temp", "irradiance_frac", "lem_price"})
    doc["series"][k] = std::vector<double>(24, 0.3);
  const Scenario s = parse_scenario(doc, ".");
  for (int t = 0; t < s.time.total_steps; ++t) {
    const HorizonView v = slice_horizon(s, t);
    EXPECT_EQ(v.irradiance_frac.size(), 24u);
    EXPECT_EQ(v.fixed_load[0].size(), 24u);
  }
  EXPECT_NO_THROW(slice_horizon(s, 23));
  EXPECT_NO_THROW(slice_horizon(s, 24));
  try {
    slice_horizon(s, 25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfRange);
  }
  EXPECT_THROW(slice_horizon(s, -1), Error);
}

}  // namespace
}  // namespace flexmarket
