#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include <bagp/cli.hpp>
#include <bagp/csv.hpp>
#include <bagp/metrics.hpp>
#include <bagp/serialize.hpp>

namespace fs = std::filesystem;
using bagp::cli::kExitNumerical;
using bagp::cli::kExitOk;
using bagp::cli::kExitValidation;

namespace {

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("bagp_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
    return path(name);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = bagp::cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  // Ten points of a smooth increasing function of one variable.
  std::string monotone_1d() const {
    std::ostringstream s;
    s << "x1,y\n" << std::setprecision(17);
    for (int i = 0; i < 10; ++i) {
      const double x = (i + 0.5) / 10.0;
      s << x << ',' << std::atan(4.0 * (x - 0.4)) << '\n';
    }
    return write("train.csv", s.str());
  }

  std::string toy_data(std::size_t n) const {
    const auto r = run({"gen-design", "--n", std::to_string(n), "--dim", "6", "--function", "toy6d", "--seed",
                        "3", "--output", path("toy.csv")});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return path("toy.csv");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, EmptyCsvIsAValidationError) {
  const auto data = write("empty.csv", "x1,y\n");
  const auto r = run({"fit", "--data", data, "--output", path("m.json")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("no data rows"), std::string::npos) << r.err;
}

TEST_F(Cli, NonNumericCellIsReportedWithPosition) {
  const auto data = write("bad.csv", "x1,y\n0.1,1\n0.5,abc\n");
  const auto r = run({"fit", "--data", data, "--output", path("m.json")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("row 3, column 2"), std::string::npos) << r.err;
}

TEST_F(Cli, InputsOutsideUnitCubeNeedNormalize) {
  const auto data = write("wide.csv", "x1,y\n0,0\n5,1\n10,2\n");
  EXPECT_EQ(run({"fit", "--data", data, "--output", path("m.json")}).code, kExitValidation);
  const auto r = run({"fit", "--data", data, "--output", path("m.json"), "--normalize"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(bagp::model_from_json(slurp(path("m.json"))).normalization.has_value());
}

TEST_F(Cli, FitOneDimensionalReachesTrainingQ2) {
  const auto data = monotone_1d();
  const auto r = run({"fit", "--data", data, "--output", path("m.json"), "--knots", "6"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto manifest = nlohmann::json::parse(slurp(path("m.manifest.json")));
  EXPECT_EQ(manifest["command"], "fit");
  EXPECT_EQ(manifest["version"], BAGP_VERSION);
  EXPECT_EQ(manifest["config"]["knots"], 6);
  EXPECT_GE(manifest["report"]["q2_train"].get<double>(), 0.9);
  EXPECT_TRUE(manifest["report"].contains("kkt"));
  EXPECT_GT(manifest["wall_seconds"].get<double>(), 0.0);
}

TEST_F(Cli, UnknownFlagIsAUsageError) {
  EXPECT_EQ(run({"fit", "--data", monotone_1d(), "--output", path("m.json"), "--knotz", "3"}).code,
            kExitValidation);
  EXPECT_EQ(run({}).code, kExitValidation);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(Cli, BadBlocksAreRejected) {
  const auto data = toy_data(20);
  for (const char* blocks : {"1,2;2", "7", "{1,x}"}) {
    EXPECT_EQ(run({"fit", "--data", data, "--output", path("m.json"), "--blocks", blocks}).code, kExitValidation)
        << blocks;
  }
}

TEST_F(Cli, MaxModSingleIterationWritesOneHistoryRow) {
  const auto data = toy_data(30);
  const auto r = run({"maxmod", "--data", data, "--output", path("mm.json"), "--max-iterations", "1", "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(line_count(slurp(path("mm.history.csv"))), 2u);
  const auto manifest = nlohmann::json::parse(slurp(path("mm.manifest.json")));
  EXPECT_EQ(manifest["report"]["stop_reason"], "max_iterations");
}

TEST_F(Cli, MaxModHugeEps2StopsAfterFirstIteration) {
  const auto data = toy_data(30);
  const auto r = run({"maxmod", "--data", data, "--output", path("mm.json"), "--eps2", "1e9", "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(line_count(slurp(path("mm.history.csv"))), 2u);
  const auto manifest = nlohmann::json::parse(slurp(path("mm.manifest.json")));
  EXPECT_EQ(manifest["report"]["stop_reason"], "se_below_eps2");
}

TEST_F(Cli, ManifestReplaysAsConfig) {
  const auto data = toy_data(30);
  ASSERT_EQ(run({"maxmod", "--data", data, "--output", path("a.json"), "--max-iterations", "3", "--quiet"}).code,
            kExitOk);
  const auto replay = run({"maxmod", "--config", path("a.manifest.json"), "--output", path("b.json"),
                           "--history", path("b.csv"), "--manifest", path("b.manifest.json")});
  ASSERT_EQ(replay.code, kExitOk) << replay.err;
  const auto a = bagp::model_from_json(slurp(path("a.json")));
  const auto b = bagp::model_from_json(slurp(path("b.json")));
  EXPECT_EQ(a.xi, b.xi);
  const auto ma = nlohmann::json::parse(slurp(path("a.manifest.json")));
  const auto mb = nlohmann::json::parse(slurp(path("b.manifest.json")));
  EXPECT_EQ(mb["config"]["max-iterations"], 3);
  EXPECT_EQ(mb["config"]["output"], path("b.json"));
  EXPECT_EQ(ma["report"]["partition"], mb["report"]["partition"]);
}

TEST_F(Cli, UnknownConfigKeyIsRejected) {
  const auto cfg = write("c.json", R"({"knots": 4, "knotz": 3})");
  const auto r = run({"fit", "--config", cfg, "--data", monotone_1d(), "--output", path("m.json")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("knotz"), std::string::npos);
}

TEST_F(Cli, CommandLineOverridesConfig) {
  const auto cfg = write("c.json", R"({"knots": 4, "directions": ["increasing"]})");
  ASSERT_EQ(run({"fit", "--config", cfg, "--data", monotone_1d(), "--output", path("m.json"), "--knots", "5"}).code,
            kExitOk);
  const auto model = bagp::model_from_json(slurp(path("m.json")));
  EXPECT_EQ(model.basis.size(), 5u);
  const auto manifest = nlohmann::json::parse(slurp(path("m.manifest.json")));
  EXPECT_EQ(manifest["config"]["directions"], "increasing");
}

TEST_F(Cli, ThreadsFromEnvironment) {
  ::setenv("BAGP_THREADS", "2", 1);
  const auto r = run({"fit", "--data", monotone_1d(), "--output", path("m.json")});
  ::setenv("BAGP_THREADS", "zero", 1);
  const auto bad = run({"fit", "--data", monotone_1d(), "--output", path("m2.json")});
  ::unsetenv("BAGP_THREADS");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(path("m.manifest.json")))["config"]["threads"], 2);
  EXPECT_EQ(bad.code, kExitValidation);
}

TEST_F(Cli, PredictMatchesInProcessEvaluation) {
  const auto data = toy_data(30);
  ASSERT_EQ(run({"maxmod", "--data", data, "--output", path("mm.json"), "--max-iterations", "4", "--quiet"}).code,
            kExitOk);
  const auto pts = run({"gen-design", "--n", "50", "--dim", "6", "--seed", "9", "--output", path("pts.csv")});
  ASSERT_EQ(pts.code, kExitOk) << pts.err;
  const auto r = run({"predict", "--model", path("mm.json"), "--points", path("pts.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream in(r.out);
  const auto pred = bagp::read_table(in);
  std::ifstream pin(path("pts.csv"));
  const auto X = bagp::read_table(pin).values;
  const auto model = bagp::model_from_json(slurp(path("mm.json")));
  const bagp::Vector expect = model.basis.design_matrix(X).transpose() * model.xi;
  ASSERT_EQ(pred.values.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    EXPECT_NEAR(pred.values(i, 0), expect[i], 1e-15 * std::max(1.0, std::abs(expect[i])));
  }
}

TEST_F(Cli, PredictBlocksAddOneColumnPerBlock) {
  const auto data = toy_data(20);
  ASSERT_EQ(run({"fit", "--data", data, "--output", path("m.json"), "--blocks", "{1,3}{2,4}", "--fixed"}).code,
            kExitOk);
  const auto r = run({"predict", "--model", path("m.json"), "--points", data, "--blocks"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream in(r.out);
  const auto t = bagp::read_table(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"y", "block1", "block2"}));
  EXPECT_EQ(t.values.cols(), 3);
}

TEST_F(Cli, PredictRejectsDimensionMismatchAndOutOfRange) {
  ASSERT_EQ(run({"fit", "--data", monotone_1d(), "--output", path("m.json")}).code, kExitOk);
  const auto two = write("two.csv", "x1,x2\n0.1,0.2\n");
  EXPECT_EQ(run({"predict", "--model", path("m.json"), "--points", two}).code, kExitValidation);
  const auto far = write("far.csv", "x1\n1.5\n");
  EXPECT_EQ(run({"predict", "--model", path("m.json"), "--points", far}).code, kExitValidation);
  const auto clamped = run({"predict", "--model", path("m.json"), "--points", far, "--clamp"});
  ASSERT_EQ(clamped.code, kExitOk) << clamped.err;
  const auto edge = write("edge.csv", "x1\n1\n");
  EXPECT_EQ(clamped.out, run({"predict", "--model", path("m.json"), "--points", edge}).out);
}

TEST_F(Cli, SampleIsReproducibleAndFeasible) {
  const auto data = monotone_1d();
  ASSERT_EQ(run({"fit", "--data", data, "--output", path("m.json"), "--knots", "8"}).code, kExitOk);
  for (const char* name : {"s1.csv", "s2.csv"}) {
    const auto r = run({"sample", "--model", path("m.json"), "--data", data, "--draws", "200", "--seed", "11",
                        "--output", path(name)});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  EXPECT_EQ(slurp(path("s1.csv")), slurp(path("s2.csv")));
  const auto check = run({"check", "--model", path("m.json"), "--samples", path("s1.csv")});
  EXPECT_EQ(check.code, kExitOk) << check.out;
  const auto report = nlohmann::json::parse(check.out);
  EXPECT_EQ(report["report"]["rows"], 200);
  EXPECT_EQ(report["report"]["infeasible_rows"], 0);
  const auto manifest = nlohmann::json::parse(slurp(path("s1.manifest.json")));
  EXPECT_EQ(manifest["report"]["draws"], 200);
  EXPECT_LE(manifest["report"]["max_violation"].get<double>(), 1e-8);
}

TEST_F(Cli, SampleRejectsZeroDraws) {
  const auto data = monotone_1d();
  ASSERT_EQ(run({"fit", "--data", data, "--output", path("m.json")}).code, kExitOk);
  EXPECT_EQ(run({"sample", "--model", path("m.json"), "--data", data, "--draws", "0", "--output", path("s.csv")}).code,
            kExitValidation);
}

TEST_F(Cli, CheckFlagsInfeasibleDraws) {
  const auto data = monotone_1d();
  ASSERT_EQ(run({"fit", "--data", data, "--output", path("m.json"), "--knots", "3"}).code, kExitOk);
  const auto bad = write("bad.csv", "xi1,xi2,xi3\n0,1,2\n2,1,0\n");
  const auto r = run({"check", "--model", path("m.json"), "--samples", bad});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_EQ(nlohmann::json::parse(r.out)["report"]["infeasible_rows"], 1);
}

TEST_F(Cli, BenchWritesReportsAndManifest) {
  const auto r = run({"bench", "hd-monotone", "--dims", "2", "--replicates", "2", "--test-points", "100",
                      "--starts", "1", "--out-dir", path("out")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = slurp(path("out/hd-monotone.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "dimension,replicate,n,basis_size,q2_mean,q2_mode,q2_constrained_mean,fit_seconds,sample_seconds");
  EXPECT_EQ(line_count(csv), 3u);
  const auto manifest = nlohmann::json::parse(slurp(path("out/hd-monotone.manifest.json")));
  EXPECT_EQ(manifest["config"]["suite"], "hd-monotone");
  EXPECT_EQ(manifest["report"]["summaries"].size(), 1u);
  EXPECT_NE(slurp(path("out/hd-monotone.md")).find("| D |"), std::string::npos);
  EXPECT_EQ(run({"bench", "nope", "--out-dir", path("out")}).code, kExitValidation);
}

TEST_F(Cli, GenDesignIsDeterministic) {
  const auto a = run({"gen-design", "--n", "12", "--dim", "3", "--seed", "4"});
  const auto b = run({"gen-design", "--n", "12", "--dim", "3", "--seed", "4"});
  ASSERT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(line_count(a.out), 13u);
  EXPECT_EQ(run({"gen-design", "--n", "12", "--dim", "3", "--function", "block-arctan"}).code, kExitValidation);
}
