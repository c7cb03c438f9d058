#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kronsampler/cli.hpp"
#include "kronsampler/frame_potential.hpp"
#include "kronsampler/instances.hpp"
#include "kronsampler/samplers.hpp"
#include "oracles.hpp"

using namespace kronsampler;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kronsampler_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string write_factor(const fs::path& dir, const std::string& name, const Matrix& m) {
  const auto p = dir / name;
  write_matrix_csv(p, m);
  return p.string();
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) lines.push_back(line);
  return lines;
}

// Drops the wall_time_ns column (second to last) from a bench row.
std::string without_time(const std::string& line) {
  const auto last = line.rfind(',');
  const auto prev = line.rfind(',', last - 1);
  return line.substr(0, prev) + line.substr(last);
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) { setenv("KRONSAMPLER_THREADS", value, 1); }
  ~ThreadsEnv() { unsetenv("KRONSAMPLER_THREADS"); }
};

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run({}).code, cli::kExitValidation);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"gen", "--shape", "4,4"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"gen", "--shape", "four,2"}).code, cli::kExitValidation);
}

TEST(Cli, GenWritesOneFilePerModeAndTrialDeterministically) {
  const auto a = fresh_dir("gen_a");
  const auto b = fresh_dir("gen_b");
  ASSERT_EQ(run({"gen", "--kind", "signed", "--shape", "200,40", "--seed", "7", "--trials", "100", "--out-dir", a.string()}).code, 0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(a)) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, 100U);
  ASSERT_EQ(run({"gen", "--kind", "signed", "--shape", "200,40", "--seed", "7", "--trials", "100", "--out-dir", b.string()}).code, 0);
  for (const auto& e : fs::directory_iterator(a)) EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename()));

  const auto t = fresh_dir("gen_t");
  ASSERT_EQ(run({"gen", "--kind", "gaussian", "--shape", "50,10", "--shape", "60,20", "--shape", "70,15", "--seed", "1",
                 "--trials", "2", "--out-dir", t.string()})
                .code,
            0);
  for (int mode = 1; mode <= 3; ++mode) EXPECT_TRUE(fs::exists(t / ("trial_0001_mode_" + std::to_string(mode) + ".csv")));
  const Matrix m = read_matrix_csv(t / "trial_0001_mode_2.csv");
  EXPECT_EQ(m.rows(), 60);
  EXPECT_EQ(m.cols(), 20);
  const auto spec = ensemble_spec_from_json(json::parse(slurp(t / "spec.json")));
  EXPECT_EQ(m, generate(spec, 1)[1]);
}

TEST(Cli, SelectFfwCardinality) {
  const auto d = fresh_dir("select_ffw");
  const auto f = write_factor(d, "f.csv", oracle::random_matrix(200, 40, 1));
  const auto r = run({"select", "--algo", "ffw", "--budget", "60", "--factors", f});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["modes"][0]["indices"].size(), 60U);
  EXPECT_EQ(j["algorithm"], "ffw");
  EXPECT_NE(r.err.find("fp="), std::string::npos);
}

TEST(Cli, SelectExhaustiveMatchesLibrary) {
  const auto d = fresh_dir("select_ex");
  const Matrix m = gen_sign_condition(EnsembleSpec{EnsembleKind::sign_condition, {{12, 2}}, 3, 1}, 0)[0];
  const auto f = write_factor(d, "f.csv", m);
  const auto out = (d / "s.json").string();
  ASSERT_EQ(run({"select", "--algo", "exhaustive", "--budget", "4", "--factors", f, "--out", out}).code, 0);
  const Selection got = selection_from_json(json::parse(slurp(out)));
  const Matrix reread = read_matrix_csv(fs::path(f));
  const Selection want = exhaustive_optimum(ProblemInstance({FactorMatrix(reread)}, 4), Objective::fp);
  EXPECT_EQ(got.modes, want.modes);
}

TEST(Cli, SelectRandomIsReproducible) {
  const auto d = fresh_dir("select_rand");
  const auto f1 = write_factor(d, "a.csv", oracle::random_matrix(10, 2, 1));
  const auto f2 = write_factor(d, "b.csv", oracle::random_matrix(8, 3, 2));
  const std::vector<std::string> args{"select", "--algo", "random", "--budget", "9", "--factors", f1 + "," + f2, "--seed", "5"};
  const auto a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, run(args).out);
  EXPECT_EQ(json::parse(a.out)["seed"], 5);
  EXPECT_EQ(json::parse(a.out)["modes"].size(), 2U);
}

TEST(Cli, SelectErrors) {
  const auto d = fresh_dir("select_err");
  const auto f = write_factor(d, "f.csv", oracle::random_matrix(10, 2, 1));
  EXPECT_EQ(run({"select", "--algo", "ffw", "--budget", "11", "--factors", f}).code, cli::kExitValidation);
  EXPECT_EQ(run({"select", "--algo", "ffw", "--budget", "4", "--factors", (d / "missing.csv").string()}).code,
            cli::kExitValidation);
  EXPECT_EQ(run({"select", "--algo", "framesense", "--budget", "5", "--factors", f + "," + f}).code, cli::kExitValidation);
  EXPECT_EQ(run({"select", "--algo", "exhaustive", "--guard", "5", "--budget", "4", "--factors", f}).code,
            cli::kExitResource);
}

TEST(Cli, EvalMetrics) {
  const auto d = fresh_dir("eval");
  const auto id = write_factor(d, "id.csv", Matrix::Identity(3, 3));
  const auto all = (d / "all.json").string();
  std::ofstream(all) << R"({"algorithm":"manual","seed":null,"budget":3,"modes":[{"n":3,"indices":[1,2,3]}]})";
  auto r = run({"eval", "--selection", all, "--factors", id});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["mse"].get<double>(), 3.0);
  EXPECT_DOUBLE_EQ(j["fp"].get<double>(), 3.0);

  const Matrix m = oracle::random_matrix(9, 2, 4);
  const auto f = write_factor(d, "m.csv", m);
  const auto sel = (d / "m.json").string();
  std::ofstream(sel) << R"({"algorithm":"manual","seed":null,"budget":4,"modes":[{"n":9,"indices":[2,3,7,9]}]})";
  r = run({"eval", "--selection", sel, "--factors", f, "--metric", "both"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = json::parse(r.out);
  const std::vector<FactorMatrix> fm{FactorMatrix(read_matrix_csv(fs::path(f)))};
  const std::vector<IndexSet> s{IndexSet({1, 2, 6, 8}, 9)};
  EXPECT_DOUBLE_EQ(j["fp"].get<double>(), frame_potential_product(fm, s));
  EXPECT_DOUBLE_EQ(j["mse"].get<double>(), mse(fm, s));

  const auto full = (d / "full.json").string();
  std::ofstream(full) << R"({"algorithm":"manual","seed":null,"budget":9,"modes":[{"n":9,"indices":[1,2,3,4,5,6,7,8,9]}]})";
  r = run({"eval", "--selection", full, "--factors", f, "--metric", "fp", "--format", "csv"});
  ASSERT_EQ(r.code, 0);
  const auto lines = csv_lines(r.out);
  ASSERT_EQ(lines.size(), 2U);
  EXPECT_EQ(lines[0], "algorithm,shapes,budget,fp,mse,status,error");
  const double fp = std::stod(lines[1].substr(lines[1].find(",9,") + 3));
  EXPECT_DOUBLE_EQ(fp, fm[0].full_fp());
}

TEST(Cli, EvalRankDeficientGivesStructuredRow) {
  const auto d = fresh_dir("eval_sing");
  Matrix m(3, 2);
  m << 1, 0, 2, 0, 0, 1;
  const auto f = write_factor(d, "m.csv", m);
  const auto sel = (d / "s.json").string();
  std::ofstream(sel) << R"({"algorithm":"manual","seed":null,"budget":2,"modes":[{"n":3,"indices":[1,2]}]})";
  const auto r = run({"eval", "--selection", sel, "--factors", f});
  EXPECT_EQ(r.code, cli::kExitNumerical);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["status"], "singular");
  EXPECT_TRUE(j["mse"].is_null());
  EXPECT_EQ(j["mode"], 1);
}

TEST(Cli, BoundReports) {
  const auto d = fresh_dir("bound");
  const Matrix m = gen_sign_condition(EnsembleSpec{EnsembleKind::sign_condition, {{12, 2}}, 9, 1}, 0)[0];
  const auto f = write_factor(d, "f.csv", m);
  for (const char* kind : {"gamma", "gratio"}) {
    auto r = run({"bound", "--kind", kind, "--factors", f, "--budget", "4", "--oracle", "exhaustive"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_TRUE(j["satisfied"].get<bool>());
    EXPECT_FALSE(j["surrogate"].get<bool>());

    r = run({"bound", "--kind", kind, "--factors", f, "--budget", "4", "--oracle", "random:200"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(json::parse(r.out)["surrogate"].get<bool>());

    r = run({"bound", "--kind", kind, "--factors", f, "--budget", "12", "--oracle", "exhaustive"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(json::parse(r.out)["satisfied"].get<bool>());
  }
  const auto g = write_factor(d, "g.csv", gen_sign_condition(EnsembleSpec{EnsembleKind::sign_condition, {{6, 2}}, 9, 1}, 0)[0]);
  auto r = run({"bound", "--kind", "tensor", "--factors", f + "," + g, "--budget", "8", "--oracle", "exhaustive", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_lines(r.out)[0], "kind,M_or_gamma,bound,achieved,reference,surrogate,satisfied");
  EXPECT_EQ(csv_lines(r.out)[1].rfind("tensor-exponential,", 0), 0U);

  const auto big = write_factor(d, "big.csv", oracle::random_matrix(60, 3, 1));
  EXPECT_EQ(run({"bound", "--kind", "gamma", "--factors", big, "--budget", "30", "--oracle", "exhaustive"}).code,
            cli::kExitResource);
  EXPECT_EQ(run({"bound", "--kind", "gamma", "--factors", big, "--budget", "30", "--oracle", "random:x"}).code,
            cli::kExitValidation);
}

TEST(Cli, BenchRowsAreStableAcrossWorkerCounts) {
  const auto d = fresh_dir("bench");
  const std::vector<std::string> base{"bench", "--kind", "signed", "--shape", "20,3", "--shape", "15,2",
                                      "--algos", "ffw,greedyfp,random", "--budgets", "10:30:10", "--trials", "4",
                                      "--seed", "11"};
  auto args1 = base;
  args1.insert(args1.end(), {"--out", (d / "one.csv").string()});
  auto args3 = base;
  args3.insert(args3.end(), {"--out", (d / "three.csv").string()});
  {
    ThreadsEnv env("1");
    ASSERT_EQ(run(args1).code, 0);
  }
  {
    ThreadsEnv env("3");
    const auto r = run(args3);
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("3 workers"), std::string::npos);
  }
  const auto one = csv_lines(slurp(d / "one.csv"));
  const auto three = csv_lines(slurp(d / "three.csv"));
  ASSERT_EQ(one.size(), 1U + 3 * 4 * 3);
  EXPECT_EQ(one[0], "trial,algo,shapes,budget,fp,mse,bound_kind,bound,achieved,surrogate,wall_time_ns,seed");
  ASSERT_EQ(one.size(), three.size());
  for (std::size_t i = 1; i < one.size(); ++i) {
    EXPECT_EQ(without_time(one[i]), without_time(three[i]));
    const auto last = one[i].rfind(',');
    const auto prev = one[i].rfind(',', last - 1);
    EXPECT_GT(std::stoll(one[i].substr(prev + 1, last - prev - 1)), 0);
  }
  // trial seed = base + trial
  EXPECT_EQ(one[1].substr(one[1].rfind(',') + 1), "11");
  EXPECT_EQ(one[4].substr(one[4].rfind(',') + 1), "12");

  const auto agg = csv_lines(slurp(d / "one.csv.aggregate.csv"));
  EXPECT_EQ(agg.size(), 1U + 3 * 3);
  const auto meta = json::parse(slurp(d / "one.csv.meta.json"));
  EXPECT_EQ(meta["grid"].size(), 3U);
  EXPECT_TRUE(meta.contains("greedyfp_note"));
}

TEST(Cli, BenchRecordsFailuresAndContinues) {
  const auto d = fresh_dir("bench_fail");
  const auto out = (d / "b.csv").string();
  // exhaustive on 40×3 at L=20 exceeds the enumeration guard
  const auto r = run({"bench", "--shape", "40,3", "--algos", "ffw,exhaustive", "--budgets", "20", "--trials", "2",
                      "--out", out});
  ASSERT_EQ(r.code, 0);
  const auto lines = csv_lines(slurp(out));
  ASSERT_EQ(lines.size(), 5U);
  EXPECT_NE(lines[1].find(",ffw,"), std::string::npos);
  EXPECT_EQ(json::parse(slurp(out + ".meta.json"))["failures"].size(), 2U);
  EXPECT_NE(r.err.find("exhaustive"), std::string::npos);
}

TEST(Cli, BenchBoundColumns) {
  const auto d = fresh_dir("bench_bound");
  const auto out = (d / "b.csv").string();
  ASSERT_EQ(run({"bench", "--kind", "signed", "--shape", "12,2", "--algos", "ffw", "--budgets", "4", "--trials", "2",
                 "--bound", "gamma", "--oracle", "exhaustive", "--out", out})
                .code,
            0);
  const auto lines = csv_lines(slurp(out));
  ASSERT_EQ(lines.size(), 3U);
  EXPECT_NE(lines[1].find(",vector-gamma,"), std::string::npos);
  EXPECT_NE(lines[1].find(",false,"), std::string::npos);
}

TEST(Cli, BenchPresetsValidate) {
  EXPECT_EQ(run({"bench", "--suite", "nope"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"bench", "--shape", "10,2", "--budgets", "50", "--out", (fresh_dir("bp") / "x.csv").string()}).code,
            cli::kExitValidation);
  const auto d = fresh_dir("bench_runtime");
  const auto out = (d / "rt.csv").string();
  ASSERT_EQ(run({"bench", "--suite", "runtime", "--sizes", "50,60", "--rank", "5", "--trials", "1", "--out", out}).code, 0);
  const auto lines = csv_lines(slurp(out));
  ASSERT_EQ(lines.size(), 5U);
  EXPECT_NE(lines[1].find(",50x5,25,"), std::string::npos);
  EXPECT_NE(lines[3].find(",60x5,30,"), std::string::npos);
}

TEST(Cli, ImageFullBudgetMatchesTruncation) {
  const auto d = fresh_dir("image");
  const auto pgm = (d / "in.pgm").string();
  ASSERT_EQ(run({"testimage", "--height", "48", "--width", "40", "--seed", "2", "--out", pgm}).code, 0);
  const auto metrics = (d / "m.json").string();
  auto r = run({"image", "--input", pgm, "--k1", "6", "--k2", "6", "--budget", "88", "--algo", "ffw", "--out",
                (d / "out.pgm").string(), "--metrics", metrics});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(slurp(metrics));
  const Matrix pixels = read_pgm(pgm);
  const auto inst = image_to_instance(pixels, 6, 6);
  EXPECT_LT(j["mse_vs_truncated"].get<double>(), 1e-6 * (inst.approximation().squaredNorm() / pixels.size()));
  EXPECT_EQ(j["mode_budgets"], (std::vector<int>{48, 40}));
  EXPECT_TRUE(fs::exists(d / "out.pgm"));

  r = run({"image", "--input", pgm, "--k1", "6", "--k2", "6", "--budget", "11", "--out", (d / "x.pgm").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
  r = run({"image", "--test-image", "32", "--k1", "4", "--k2", "4", "--budget", "20", "--algo", "greedyfp", "--out",
           (d / "y.pgm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["samples"].get<int>() > 0, true);
}
