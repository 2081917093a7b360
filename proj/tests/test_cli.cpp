#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "posmap/cli.hpp"
#include "support.hpp"

using namespace posmap;
using posmap::cli::RunConfig;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args, const char* env_seed = nullptr) {
  args.insert(args.begin(), "posmap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  try {
    auto cfg = cli::parse_args(static_cast<int>(argv.size()), argv.data(), env_seed, out);
    o.code = cfg ? cli::run(*cfg, out, err) : 0;
  } catch (const cli::UsageError& e) {
    err << e.what();
    o.code = 2;
  }
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("posmap_test_" + name);
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST(Io, MatrixRoundTrip) {
  Rng rng(1);
  const ComplexMatrix m = random_complex_matrix(3, 2, rng);
  const Json j = to_json(m);
  EXPECT_EQ(j["rows"], 3);
  EXPECT_EQ(j["re"].size(), 6u);
  const ComplexMatrix back = matrix_from_json(Json::parse(j.dump()));
  EXPECT_EQ(max_abs_diff(m, back), 0.0);  // lossless
}

TEST(Io, MatrixStrictness) {
  EXPECT_THROW(matrix_from_json(Json::parse(R"({"rows":1,"cols":1,"re":[1],"im":[0],"extra":1})")), FormatError);
  EXPECT_THROW(matrix_from_json(Json::parse(R"({"rows":2,"cols":1,"re":[1],"im":[0]})")), FormatError);
  EXPECT_THROW(matrix_from_json(Json::parse(R"({"rows":1,"cols":1,"re":["1"],"im":[0]})")), FormatError);
}

TEST(Io, MapSpecRoundTrip) {
  Rng rng(2);
  const MapSpec spec =
      MapSpec::new_family(3, 2, posmap::testing::random_phases(3, rng, true), default_antisymmetric_unitary(4));
  const MapSpec back = map_spec_from_json(Json::parse(to_json(spec).dump()));
  EXPECT_EQ(back.family, spec.family);
  EXPECT_EQ(back.n, 3u);
  EXPECT_EQ(back.k, 2u);
  EXPECT_EQ(back.z.values(), spec.z.values());
  EXPECT_EQ(max_abs_diff(back.unitary, spec.unitary), 0.0);
}

TEST(Io, MapSpecShorthands) {
  const MapSpec a = map_spec_from_json(Json::parse(R"({"family":"new","N":3,"K":1,"z":1,"unitary":"sigma_y"})"));
  EXPECT_EQ(a.z.size(), 3u);
  EXPECT_EQ(max_abs_diff(a.unitary, sigma_y()), 0.0);
  const MapSpec b = map_spec_from_json(Json::parse(R"({"family":"generalized-reduction","N":3,"z":[1,0.5,-1]})"));
  EXPECT_EQ(b.z.at(1, 2), Complex(-1.0, 0.0));
  EXPECT_THROW(map_spec_from_json(Json::parse(R"({"family":"reduction","N":3,"z":1})")), FormatError);
  EXPECT_THROW(map_spec_from_json(Json::parse(R"({"family":"new","N":3,"z":[1,1]})")), FormatError);
  EXPECT_THROW(map_spec_from_json(Json::parse(R"({"family":"new","N":2,"colour":1})")), FormatError);
}

TEST(Io, BlockSpecRoundTripUsesOneBasedPairs) {
  Rng rng(3);
  const BlockSpec spec = posmap::testing::rank_one_recipe(3, 2, rng);
  const Json j = to_json(spec);
  EXPECT_EQ(j["off_diagonal"][0]["i"], 1);
  EXPECT_EQ(j["off_diagonal"][0]["j"], 2);
  const BlockSpec back = block_spec_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.alphas, spec.alphas);
  EXPECT_EQ(max_abs_diff(back.blocks.at(1, 2), spec.blocks.at(1, 2)), 0.0);

  Json missing = j;
  missing["off_diagonal"].erase(1);
  EXPECT_THROW(block_spec_from_json(missing), FormatError);
  Json zero_based = j;
  zero_based["off_diagonal"][0]["i"] = 0;
  EXPECT_THROW(block_spec_from_json(zero_based), FormatError);
}

TEST(Cli, ComplexLiteralParsing) {
  EXPECT_EQ(cli::parse_complex("1"), Complex(1.0, 0.0));
  EXPECT_EQ(cli::parse_complex("0.5-0.25i"), Complex(0.5, -0.25));
  EXPECT_EQ(cli::parse_complex("-i"), Complex(0.0, -1.0));
  EXPECT_EQ(cli::parse_complex("1e-3+2i"), Complex(1e-3, 2.0));
  EXPECT_THROW(cli::parse_complex("abc"), cli::UsageError);
}

TEST(Cli, DetectExampleReportsMinusOneOver48) {
  const Outcome o = run_cli({"detect", "--family", "new", "--N", "2", "--K", "1", "--z", "1", "--no-timestamp"});
  ASSERT_EQ(o.code, 0) << o.err;
  const Json j = Json::parse(o.out);
  EXPECT_NEAR(j["results"]["detection"]["detection_value"].get<double>(), -1.0 / 48.0, 1e-12);
  EXPECT_TRUE(j["results"]["detection"]["ppt_ok"].get<bool>());
  EXPECT_EQ(j["seed"], 42);
  EXPECT_EQ(j["decisions"]["zero_set_left_convention"], "plain");
  EXPECT_FALSE(j.contains("timestamp"));
  EXPECT_TRUE(j["results"]["detection"].contains("rho"));
}

TEST(Cli, CertifyBlockNamesCond2AndTriple) {
  BlockSpec s;
  s.n_blocks = 2;
  s.block_size = 1;
  s.alphas = {0.5, 0.5};
  s.z = UpperTriangular<Complex>(2, 1.0);
  s.blocks = UpperTriangular<ComplexMatrix>(2, ComplexMatrix{{std::sqrt(0.4)}});
  s.diag_blocks = {ComplexMatrix{{0.8}}, ComplexMatrix{{0.5}}};
  const auto path = temp_file("bad.json", to_json(s).dump());
  const Outcome o = run_cli({"certify-block", "--spec", path.string(), "--no-timestamp"});
  EXPECT_EQ(o.code, 1);
  const Json j = Json::parse(o.out);
  EXPECT_EQ(j["status"], "fail");
  const auto& failed = j["failed_invariants"];
  EXPECT_NE(std::find(failed.begin(), failed.end(), "cond2"), failed.end());
  const Json& triple = j["results"]["conditions"]["worst_triple"];
  EXPECT_EQ(triple["condition"], "cond2");
  EXPECT_EQ(triple["i"], 1);
  EXPECT_NE(o.err.find("cond2"), std::string::npos);
}

TEST(Cli, CertifyBlockFromMapPasses) {
  const Outcome o = run_cli({"certify-block", "--family", "new", "--N", "3", "--K", "1", "--z", "random"});
  EXPECT_EQ(o.code, 0) << o.out;
}

TEST(Cli, FullReportContainsAllSections) {
  const Outcome o = run_cli({"full-report", "--family", "new", "--N", "3", "--K", "1", "--trials", "50", "--no-timestamp"});
  ASSERT_EQ(o.code, 0) << o.err;
  const Json j = Json::parse(o.out);
  const Json& r = j["results"];
  EXPECT_TRUE(r["positivity_scan"].contains("min_value"));
  EXPECT_LT(r["choi"]["min_eigenvalue"].get<double>(), 0.0);
  EXPECT_TRUE(r["detection"].contains("detection_value"));
  EXPECT_TRUE(r["optimality"]["optimal"].get<bool>());
  EXPECT_TRUE(r["nd_optimality"].contains("covariance_residual"));
}

TEST(Cli, ReportsAreByteIdenticalWithoutTimestamp) {
  const std::vector<std::string> args = {"full-report", "--family", "new", "--N", "2", "--K", "1",
                                         "--trials", "40", "--no-timestamp"};
  EXPECT_EQ(run_cli(args).out, run_cli(args).out);
  auto with_ts = args;
  with_ts.pop_back();
  EXPECT_TRUE(Json::parse(run_cli(with_ts).out).contains("timestamp"));
}

TEST(Cli, SeedPrecedence) {
  const std::vector<std::string> base = {"check-positive", "--family", "robertson", "--trials", "3", "--no-timestamp"};
  EXPECT_EQ(Json::parse(run_cli(base).out)["seed"], 42);
  const Json env = Json::parse(run_cli(base, "7").out);
  EXPECT_EQ(env["seed"], 7);
  EXPECT_EQ(env["seed_source"], "env");
  auto flagged = base;
  flagged.insert(flagged.end(), {"--seed", "9"});
  const Json flag = Json::parse(run_cli(flagged, "7").out);
  EXPECT_EQ(flag["seed"], 9);
  EXPECT_EQ(flag["seed_source"], "flag");
  EXPECT_EQ(run_cli(base, "seven").code, 2);
}

TEST(Cli, ConfigFileAndStrictness) {
  const auto good = temp_file("cfg.json", R"({"command":"detect","map_spec":{"family":"new","N":2,"K":1,"z":1},
    "seed":5,"tolerances":{"psd_slack":1e-9},"no_timestamp":true})");
  const Outcome o = run_cli({"--config", good.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const Json j = Json::parse(o.out);
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["seed_source"], "config");
  // config beats env, flag beats config
  EXPECT_EQ(Json::parse(run_cli({"--config", good.string()}, "11").out)["seed"], 5);
  EXPECT_EQ(Json::parse(run_cli({"--config", good.string(), "--seed", "12"}).out)["seed"], 12);

  const auto bad = temp_file("cfg_bad.json", R"({"command":"detect","sed":5})");
  EXPECT_EQ(run_cli({"--config", bad.string()}).code, 2);
  const auto malformed = temp_file("cfg_malformed.json", "{ not json");
  EXPECT_EQ(run_cli({"--config", malformed.string()}).code, 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"detect", "--family", "reduction", "--N", "3"}).code, 2);
  EXPECT_EQ(run_cli({"detect", "--family", "new", "--N", "2", "--z", "2"}).code, 2);  // |z| > 1
  EXPECT_EQ(run_cli({"build", "--family", "new", "--N", "3", "--K", "3", "--format", "csv"}).code, 0);  // d^2 = 324
  // d^2 = 4356 > 4096 is refused before any work; --allow-large gets past the
  // guard and stops at the invalid phase instead.
  const Outcome refused = run_cli({"detect", "--family", "new", "--N", "33", "--z", "2"});
  EXPECT_EQ(refused.code, 2);
  EXPECT_NE(refused.err.find("--allow-large"), std::string::npos);
  const Outcome allowed = run_cli({"detect", "--family", "new", "--N", "33", "--z", "2", "--allow-large"});
  EXPECT_EQ(allowed.code, 2);
  EXPECT_EQ(allowed.err.find("--allow-large"), std::string::npos);
  EXPECT_EQ(run_cli({"witness", "--family", "new", "--N", "2", "--format", "yaml"}).code, 2);
  EXPECT_EQ(run_cli({"certify-block", "--spec", "/nonexistent/spec.json"}).code, 2);
}

TEST(Cli, MathematicalFailuresExitOne) {
  // phases off the unit circle: optimality hypothesis violated
  const Outcome o = run_cli({"optimality", "--family", "new", "--N", "3", "--z", "0.5", "--no-timestamp"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(Json::parse(o.out)["failed_invariants"].dump().find("unimodular_phases"), std::string::npos);
  // non-real phase: covariance fails
  EXPECT_EQ(run_cli({"nd-optimality", "--family", "new", "--N", "2", "--z", "i"}).code, 1);
}

TEST(Cli, CsvAndTextFormats) {
  const Outcome csv = run_cli({"detect", "--family", "new", "--N", "2", "--format", "csv", "--no-timestamp"});
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.rfind("field,value\n", 0), 0u);
  EXPECT_NE(csv.out.find("results.detection.detection_value,"), std::string::npos);
  EXPECT_EQ(csv.out.find("\"re\""), std::string::npos);  // matrices stay JSON-only
  const Outcome text = run_cli({"witness", "--family", "reduction", "--N", "3", "--trials", "5", "--format", "text"});
  EXPECT_NE(text.out.find("results.witness.min_eigenvalue = "), std::string::npos);
}

TEST(Cli, OutputFile) {
  const auto path = std::filesystem::temp_directory_path() / "posmap_test_out.json";
  std::filesystem::remove(path);
  const Outcome o = run_cli({"build", "--family", "robertson", "--output", path.string(), "--no-timestamp"});
  EXPECT_EQ(o.code, 0);
  EXPECT_TRUE(o.out.empty());
  std::ifstream in(path);
  EXPECT_EQ(Json::parse(in)["map_spec"]["family"], "robertson");
}
