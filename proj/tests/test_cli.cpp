#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pibound/cli.hpp"
#include "pibound/errors.hpp"

using namespace pibound;

namespace {

ErrorCode parse_error(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_csv(in);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse error for: " << text);
  return ErrorCode::Io;
}

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome invoke(const RunConfig& config) {
  std::ostringstream out, err;
  const int status = run(config, out, err);
  return {status, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pibound_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

const std::string kFixture = std::string(PIBOUND_DATA_DIR) + "/fixture_50.csv";

}  // namespace

TEST_CASE("minimal csv") {
  std::istringstream in("w,y1,z1\n0,1.0,0.5\n1,2.0,0.5\n");
  const auto s = parse_csv(in);
  CHECK(s.n0() == 1);
  CHECK(s.n1() == 1);
  CHECK(s.dy() == 1);
  CHECK(s.dz() == 1);
  CHECK(s.y(1, 0) == 2.0);
}

TEST_CASE("header lookup by name") {
  std::istringstream in("\xEF\xBB\xBFz2, id ,y1,z1,w\r\n3,a,1,2,0\r\n\r\n4,b,5,6,1\r\n");
  const auto s = parse_csv(in);
  CHECK(s.dz() == 2);
  CHECK(s.z(0, 0) == 2.0);
  CHECK(s.z(0, 1) == 3.0);
  CHECK(s.z(1, 1) == 4.0);
  CHECK(s.w == std::vector<int>{0, 1});
}

TEST_CASE("csv errors") {
  CHECK(parse_error("") == ErrorCode::MissingColumn);
  CHECK(parse_error("y1,z1\n1,2\n") == ErrorCode::MissingColumn);
  CHECK(parse_error("w,z1\n0,2\n") == ErrorCode::MissingColumn);
  CHECK(parse_error("w,y1,y3,z1\n0,1,1,2\n") == ErrorCode::MissingColumn);
  CHECK(parse_error("w,y1,z1\n0,1,2\n2,1,2\n") == ErrorCode::NonBinaryTreatment);
  CHECK(parse_error("w,y1,z1\n0,1,2\n1,x,2\n") == ErrorCode::NonNumericCell);
  CHECK(parse_error("w,y1,z1\n0,1,2\n1,,2\n") == ErrorCode::NonNumericCell);
  CHECK(parse_error("w,y1,z1\n0,1\n") == ErrorCode::NonNumericCell);
  CHECK(parse_error("w,y1,z1\n0,1,nan\n1,1,1\n") == ErrorCode::NonFiniteInput);
  CHECK(parse_error("w,y1,z1\n0,1,2\n0,1,2\n") == ErrorCode::EmptyGroup);
  CHECK(parse_error("w,y1,z1\n") == ErrorCode::EmptyGroup);

  std::istringstream in("w,y1,z1\n0,1,2\n1,1,2\n1,oops,2\n");
  try {
    parse_csv(in, "data.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("data.csv:4") != std::string::npos);
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("'y1'") != std::string::npos);
  }
  std::istringstream bad_w("w,y1,z1\n0,1,2\n2,1,2\n");
  try {
    parse_csv(bad_w);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("csv round trip is exact") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  ObservedSample s;
  s.y.resize(100, 2);
  s.z.resize(100, 3);
  for (int r = 0; r < 100; ++r) {
    s.w.push_back(r % 3 == 0 ? 1 : 0);
    for (int c = 0; c < 2; ++c) s.y(r, c) = normal(rng) * std::pow(10.0, r % 7 - 3);
    for (int c = 0; c < 3; ++c) s.z(r, c) = normal(rng) / 3.0;
  }
  s.y(5, 1) = -0.0;
  s.z(7, 2) = 5e-324;
  std::ostringstream out;
  write_csv(s, out);
  std::istringstream in(out.str());
  const auto t = parse_csv(in);
  CHECK(t.w == s.w);
  REQUIRE(t.y.rows() == 100);
  REQUIRE(t.z.cols() == 3);
  CHECK(std::memcmp(t.y.data(), s.y.data(), sizeof(double) * 200) == 0);
  CHECK(std::memcmp(t.z.data(), s.z.data(), sizeof(double) * 300) == 0);
}

TEST_CASE("oracle command") {
  RunConfig c;
  c.command = Command::Oracle;
  c.eta = "0";
  c.format = OutputFormat::Csv;
  const auto r = invoke(c);
  REQUIRE(r.status == 0);
  CHECK(r.out == "eta,v_u,v_c,v_ip\n0,0.367443740628,5.76,0.367443740628\n");
}

TEST_CASE("sweep on the bundled fixture") {
  RunConfig c;
  c.command = Command::Sweep;
  c.input = kFixture;
  c.eta = "0,1,10";
  const auto r = invoke(c);
  REQUIRE(r.status == 0);
  const auto doc = nlohmann::json::parse(r.out);
  const auto& rows = doc["results"];
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 1; k < 3; ++k) {
    CHECK(rows[k]["lower"].get<double>() >= rows[k - 1]["lower"].get<double>() - 1e-9);
    CHECK(rows[k]["upper"].get<double>() <= rows[k - 1]["upper"].get<double>() + 1e-9);
  }
  CHECK(doc["config"]["command"] == "sweep");
  // Same config, same bytes.
  CHECK(invoke(c).out == r.out);
}

TEST_CASE("error paths exit nonzero without artifacts") {
  const auto empty = scratch("empty.csv");
  std::ofstream(empty).close();
  const auto out_path = scratch("result.json");
  std::filesystem::remove(out_path);

  RunConfig c;
  c.command = Command::Bounds;
  c.input = empty.string();
  c.output = out_path.string();
  auto r = invoke(c);
  CHECK(r.status != 0);
  CHECK(r.err.find("MissingColumn") != std::string::npos);
  CHECK(!std::filesystem::exists(out_path));
  CHECK(!std::filesystem::exists(out_path.string() + ".tmp"));

  c.input = kFixture;
  c.eta = "0,1";  // bounds takes one eta
  CHECK(invoke(c).status != 0);
  c.eta = "-1";
  r = invoke(c);
  CHECK(r.status != 0);
  CHECK(r.err.find("EtaNegative") != std::string::npos);
  c.eta = "1";
  c.preset = "linear-location";  // two sources
  CHECK(invoke(c).status != 0);
  c.preset.reset();
  c.cost = "cubic";
  CHECK(invoke(c).status != 0);
  CHECK(!std::filesystem::exists(out_path));

  c.cost = "sq-sum";
  r = invoke(c);
  CHECK(r.status == 0);
  CHECK(r.out.empty());
  CHECK(std::filesystem::exists(out_path));
  std::filesystem::remove(out_path);
}

TEST_CASE("plan dump and formats") {
  RunConfig c;
  c.command = Command::Bounds;
  c.preset = "linear-location";
  c.n = 6;
  c.m = 4;
  c.eta = "2";
  c.side = "lower";
  c.dump_plan = scratch("plan.csv").string();
  c.format = OutputFormat::Table;
  const auto r = invoke(c);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("lower_penalty") != std::string::npos);
  std::ifstream plan(*c.dump_plan);
  std::string line;
  double mass = 0.0;
  std::getline(plan, line);
  CHECK(line == "i,j,mass");
  while (std::getline(plan, line)) mass += std::stod(line.substr(line.rfind(',') + 1));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("report commands") {
  RunConfig c;
  c.preset = "linear-location";
  c.n = 60;
  c.m = 60;
  c.eta = "0,10";
  c.command = Command::Neyman;
  auto r = invoke(c);
  REQUIRE(r.status == 0);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["results"][0]["relative_sample_size"] == 1.0);
  CHECK(doc["config"]["cost"] == "sq-diff");

  c.command = Command::Corr;
  c.clamp = true;
  r = invoke(c);
  REQUIRE(r.status == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["summary"]["clamped"] == true);
  CHECK(doc["results"].size() == 2);
}

TEST_CASE("model commands") {
  RunConfig c;
  c.command = Command::Rate;
  c.eta = "10";
  c.sizes = {20, 40};
  c.seeds = 3;
  c.format = OutputFormat::Json;
  auto r = invoke(c);
  REQUIRE(r.status == 0);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["results"].size() == 2);
  CHECK(doc["summary"]["slope"].is_number());

  c.command = Command::Synth;
  c.preset = "scale";
  c.draws = 2000;
  c.eta = "1,10";
  r = invoke(c);
  REQUIRE(r.status == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["results"].size() == 4);
  CHECK(doc["summary"]["target"] == "v_c");

  c.command = Command::Rate;  // not a Gaussian linear model
  c.eta = "10";
  CHECK(invoke(c).status != 0);

  c.command = Command::Oracle;
  c.preset.reset();
  c.model_json = std::string(PIBOUND_DATA_DIR) + "/gaussian_linear.json";
  c.eta = "0";
  r = invoke(c);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("0.367443740628") != std::string::npos);
}
