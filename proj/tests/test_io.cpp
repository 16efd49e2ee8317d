#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "lindstedt/lindstedt.hpp"

using namespace lindstedt;

namespace {

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lindstedt_io_" + name);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Json, MalformedReportsLineAndColumn) {
  std::string msg = error_of([] { parse_json_text("{\n  \"a\": 1\n  \"b\": 2\n}", "x.json"); });
  EXPECT_EQ(msg.rfind("x.json:3:", 0), 0u) << msg;
  EXPECT_NE(msg.find("malformed JSON"), std::string::npos);
  std::string first = error_of([] { parse_json_text("[1,", "y"); });
  EXPECT_TRUE(std::regex_search(first, std::regex("^y:1:[0-9]+: ")));
}

TEST(Json, MissingFileIsAnInputError) { EXPECT_THROW(read_file("/nonexistent/spec.json"), InputError); }

TEST(Rotation, ValuesDefaultToFlow) {
  RotationVector w = parse_rotation(json::parse(R"({"values": [1.0, 0.5]})"));
  EXPECT_EQ(w.kind, Dynamics::flow);
  EXPECT_EQ(w.values, (std::vector<double>{1.0, 0.5}));
}

TEST(Rotation, SurdForm) {
  RotationVector w = parse_rotation(json::parse(R"({"surd": [{"a": 1, "c": 1}, {"a": -1, "b": 1, "m": 5, "c": 2}]})"));
  ASSERT_EQ(w.values.size(), 2u);
  EXPECT_DOUBLE_EQ(w.values[0], 1.0);
  EXPECT_NEAR(w.values[1], (std::sqrt(5.0) - 1) / 2, 1e-15);
  EXPECT_TRUE(w.surds);
  EXPECT_THROW(parse_rotation(json::parse(R"({"surd": {"a": 1, "c": 0}})")), InputError);
}

TEST(Rotation, CfAndNamedForms) {
  RotationVector c = parse_rotation(json::parse(R"({"cf": {"preperiod": [2], "period": [1]}})"));
  EXPECT_EQ(c.kind, Dynamics::map);
  EXPECT_NEAR(c.values[0], 1.0 / (2 + (std::sqrt(5.0) - 1) / 2), 1e-14);
  RotationVector g = parse_rotation(json::parse(R"({"name": "golden"})"));
  EXPECT_NEAR(g.values[0], (std::sqrt(5.0) - 1) / 2, 1e-15);
  RotationVector f = parse_rotation(json::parse(R"({"name": "silver", "kind": "flow", "nu_max": 50})"));
  EXPECT_EQ(f.kind, Dynamics::flow);
  EXPECT_EQ(f.nu_max, 50);
}

TEST(Rotation, Rejections) {
  EXPECT_THROW(parse_rotation(json::parse(R"({"values": [1], "name": "golden"})")), InputError);
  EXPECT_THROW(parse_rotation(json::parse(R"({})")), InputError);
  EXPECT_THROW(parse_rotation(json::parse(R"({"cf": {"preperiod": [1], "period": []}})")), InputError);
  EXPECT_THROW(parse_rotation(json::parse(R"({"name": "bronze"})")), InputError);
  EXPECT_THROW(parse_rotation(json::parse(R"({"values": ["x"]})")), InputError);
  std::string msg = error_of([] { parse_rotation(json::parse(R"({"values": [1], "colour": 3})")); });
  EXPECT_NE(msg.find("unknown key 'colour'"), std::string::npos) << msg;
}

TEST(ModelSpecParse, StandardMapForcesMapKind) {
  ParsedSpec p = parse_model_spec(json::parse(R"({"model": "standard_map", "omega": {"values": [0.618]}, "order": 6})"));
  EXPECT_EQ(p.model.kind, ModelKind::standard_map);
  EXPECT_EQ(p.omega.kind, Dynamics::map);
  EXPECT_EQ(p.order, 6);
}

TEST(ModelSpecParse, LowerToriDefaults) {
  ParsedSpec p = parse_model_spec(json::parse(R"({
    "model": "lower_tori", "omega": {"values": [1.0]}, "s": 1, "beta0": [0],
    "forcing": [{"nu": [0, 1], "re": 0.5}, {"nu": [0, -1], "re": 0.5}, {"nu": [1, 0], "re": 0.25, "im": 0.1},
                {"nu": [-1, 0], "re": 0.25, "im": -0.1}]})"));
  EXPECT_EQ(p.model.r, 1);
  EXPECT_EQ(p.omega.kind, Dynamics::flow);
  ASSERT_EQ(p.model.forcing.size(), 4u);
  EXPECT_EQ(p.model.forcing[2].coeff, cplx(0.25, 0.1));
  EXPECT_NO_THROW(Model(p.model, p.omega));
}

TEST(ModelSpecParse, Rejections) {
  EXPECT_THROW(parse_model_spec(json::parse(R"({"omega": {"values": [1]}})")), InputError);
  EXPECT_THROW(parse_model_spec(json::parse(R"({"model": "pendulum", "omega": {"values": [1]}})")), InputError);
  EXPECT_THROW(parse_model_spec(json::parse(R"({"model": "dissipative", "omega": {"values": [1]}, "order": 0})")),
               InputError);
  EXPECT_THROW(parse_model_spec(json::parse(R"({"model": "dissipative", "omega": {"values": [1]}, "forcing": [{"re": 1}]})")),
               InputError);
  EXPECT_THROW(parse_model_spec(json::parse(R"({"model": "dissipative", "omega": {"values": [1]}, "extra": 1})")),
               InputError);
}

TEST(Hash, KnownValuesAndDeterminism) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  json c = json::parse(R"({"order": 4, "omega": {"name": "golden"}})");
  EXPECT_EQ(config_hash("solve", c), config_hash("solve", c));
  EXPECT_NE(config_hash("solve", c), config_hash("analyze", c));
  EXPECT_EQ(config_hash("solve", c).size(), 16u);
}

TEST(Reports, HeaderStamps) {
  RotationVector w = golden_map();
  stamp_diophantine(w, 1.0, 100);
  json h = report_header("bryuno", "abc", &w);
  EXPECT_EQ(h["command"], "bryuno");
  EXPECT_EQ(h["config_hash"], "abc");
  EXPECT_DOUBLE_EQ(h["gamma"].get<double>(), w.gamma);
  EXPECT_EQ(h["nu_max"], 100);
  EXPECT_TRUE(report_header("x", "y", nullptr)["gamma"].is_null());
}

TEST(Reports, SolveReportCarriesDiagnostics) {
  ParsedSpec p = parse_model_spec(json::parse(R"({"model": "standard_map", "omega": {"name": "golden"}})"));
  Model m(p.model, p.omega);
  SolveReport r = solve_lindstedt(m, 3);
  json j = solve_report_json(m, r, 3, "h");
  for (const char* key : {"command", "config_hash", "gamma", "nu_max", "model", "order", "compatibility", "min_divisor"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["compatibility"].size(), 3u);
  EXPECT_EQ(j["model"], "standard_map");
}

TEST(Files, PlotDataFormat) {
  auto dir = scratch("plot");
  plot_norms((dir / "n.dat").string(), {0.0, std::exp(1.0), std::exp(2.0)});
  EXPECT_EQ(slurp(dir / "n.dat"), "# k log_norm\n1 1\n2 2\n");
}

TEST(Files, SeriesCsvRoundTrip) {
  ParsedSpec p = parse_model_spec(json::parse(R"({"model": "standard_map", "omega": {"name": "golden"}})"));
  Model m(p.model, p.omega);
  SolveReport r = solve_lindstedt(m, 5);
  auto dir = scratch("csv");
  write_series_csv((dir / "s.csv").string(), r.series);
  std::ifstream in(dir / "s.csv");
  FTSeries back = read_csv(in);
  for (int k = 0; k <= 5; ++k)
    for (const auto& [nu, c] : r.series.order(k)) EXPECT_EQ(back.coeff(k, nu), c);
}

TEST(Files, JsonWriterIsStable) {
  auto dir = scratch("json");
  json j = json::parse(R"({"b": 1, "a": [0.1, 2]})");
  write_json((dir / "a.json").string(), j);
  write_json((dir / "b.json").string(), j);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(slurp(dir / "a.json").substr(0, 10), "{\n  \"b\": 1");
}
