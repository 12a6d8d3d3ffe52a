#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcfbm/io.hpp"

using namespace tcfbm;

namespace {
json base() {
  return json::parse(R"({"task":"verify-harnack","model":{"hurst":0.3,"clock":{"kind":"deterministic"}},"run":{}})");
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST(Fmt12, Digits) {
  EXPECT_EQ(fmt12(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(fmt12(2.0), "2");
  EXPECT_EQ(fmt12(1.23456789012345e-20), "1.23456789012e-20");
  EXPECT_EQ(fmt12(std::nan("")), "nan");
  EXPECT_EQ(num(1.0 / 3.0).get<double>(), 0.333333333333);
  EXPECT_TRUE(num(INFINITY).is_null());
}

TEST(Hash, StableFnv) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
  const auto a = parse_config(base()), b = parse_config(base());
  EXPECT_EQ(a.hash(), b.hash());
  auto doc = base();
  doc["run"]["seed"] = 2;
  EXPECT_NE(parse_config(doc).hash(), a.hash());
}

TEST(Config, Defaults) {
  const auto c = parse_config(base());
  EXPECT_EQ(c.task, "verify-harnack");
  EXPECT_EQ(c.model.dim, 1u);
  EXPECT_EQ(c.model.scale, NoiseScale::representation);
  EXPECT_EQ(c.run.x, std::vector<double>{0.0});
  EXPECT_EQ(c.run.y, std::vector<double>{1.0});
  EXPECT_EQ(c.run.inequality, InequalityKind::log);
  EXPECT_DOUBLE_EQ(c.run.f({0.5}), 1.5);
  auto fbm = base();
  fbm["task"] = "simulate-fbm";
  EXPECT_EQ(parse_config(fbm).model.scale, NoiseScale::unit_fbm);
}

TEST(Config, Strictness) {
  auto d = base();
  d["run"]["n_path"] = 10;
  EXPECT_NE(config_error(d).find("unknown key 'n_path'"), std::string::npos);
  d = base();
  d["task"] = "nope";
  EXPECT_NE(config_error(d).find("unknown task"), std::string::npos);
  d = base();
  d["model"]["hurst"] = 0.5;
  EXPECT_NE(config_error(d).find("(0,1/2)"), std::string::npos);
  d = base();
  d["model"]["hurst"] = 0.0;
  EXPECT_NE(config_error(d).find("model.hurst"), std::string::npos);
  d = base();
  d["run"]["seed"] = -1;
  EXPECT_NE(config_error(d).find("run.seed"), std::string::npos);
  d = base();
  d["run"]["x"] = json::array({0.0, 1.0});
  EXPECT_NE(config_error(d).find("run.x"), std::string::npos);
  d = base();
  d["model"]["clock"] = json::parse(R"({"kind":"subordinator","bernstein":{"stable_alpha":1.5}})");
  EXPECT_NE(config_error(d).find("model.clock.bernstein"), std::string::npos);
  d = base();
  d["model"]["drift"] = json::parse(R"({"kind":"cubic","certificate":"yamada_watanabe"})");
  EXPECT_NE(config_error(d).find("one-sided"), std::string::npos);
  d = base();
  d["run"]["f"] = json::parse(R"({"op":"coord","index":2})");
  EXPECT_NE(config_error(d).find("run.f"), std::string::npos);
  d = base();
  d["run"]["epsilon"] = 1.0;
  EXPECT_NE(config_error(d).find("run.epsilon"), std::string::npos);
}

TEST(Config, FunctionParsing) {
  auto f = parse_function(json::parse(
      R"({"op":"add","args":[{"op":"constant","value":1},{"op":"pow","arg":{"op":"coord","index":2},"n":2},{"op":"norm"}]})"));
  f.bind_dimension(2);
  EXPECT_NEAR(f({3.0, 4.0}), 1.0 + 16.0 + 5.0, 1e-14);
  EXPECT_THROW(parse_function(json::parse(R"({"op":"coord","index":0})")), ConfigError);
  EXPECT_THROW(parse_function(json::parse(R"({"op":"frob"})")), ConfigError);
  EXPECT_THROW(parse_function(json::parse(R"({"op":"exp"})")), ConfigError);
}

TEST(Config, ClocksAndAnisotropy) {
  auto d = json::parse(R"({"task":"verify-harnack","model":{"dimension":2,"hurst":[0.2,0.4],
    "clocks":[{"kind":"subordinator","bernstein":{"stable_alpha":0.5}},
              {"kind":"inverse_subordinator","bernstein":{"stable_alpha":0.8}}],
    "drift":{"kind":"linear","rate":0.5,"certificate":"yamada_watanabe"}}})");
  const auto c = parse_config(d);
  EXPECT_EQ(c.model.dim, 2u);
  EXPECT_EQ(c.model.clocks.size(), 2u);
  EXPECT_EQ(c.run.y, (std::vector<double>{1.0, 0.0}));
  d["model"]["clock"] = json::parse(R"({"kind":"deterministic"})");
  EXPECT_NE(config_error(d).find("either"), std::string::npos);
}

TEST(Config, ShippedConfigsParse) {
  const std::filesystem::path dir = TCFBM_CONFIG_DIR;
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 10u);
}

TEST(Csv, HeaderAndRows) {
  const auto path = (std::filesystem::temp_directory_path() / "tcfbm_csv_test.csv").string();
  {
    CsvWriter w(path, {"t", "x"}, 0xabcULL, 9);
    w.row({0.5, 1.0 / 3.0});
  }
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "# config_hash=0000000000000abc seed=9\nt,x\n0.5,0.333333333333\n");
  std::filesystem::remove(path);
}
