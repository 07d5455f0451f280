#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "koow/reports.hpp"
#include "koow/simulation.hpp"

using namespace koow;

namespace {

namespace fs = std::filesystem;

struct CliFixture {
  fs::path dir;

  CliFixture() {
    dir = fs::temp_directory_path() / ("koow_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto [ds, coeffs] = generate(scenario_by_name("linear", 50), 2024);
    (void)coeffs;
    write_csv(ds, (dir / "data.csv").string());
  }
  ~CliFixture() { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  int run(const std::string& args, const std::string& tag) const {
    const std::string cmd = std::string(KOOW_CLI_PATH) + " " + args + " >" +
                            path(tag + ".stdout") + " 2>" + path(tag + ".stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  bool exists(const std::string& name) const { return fs::exists(path(name)); }
};

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("weights command smoke run writes its three outputs") {
  CliFixture fx;
  const int code = fx.run("weights --data " + fx.path("data.csv") +
                              " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y"
                              " --lambda 1 --out " + fx.path("run1"),
                          "w1");
  CHECK(code == 0);
  CHECK(fx.exists("run1_weights.csv"));
  CHECK(fx.exists("run1_solver.json"));
  CHECK(fx.exists("run1_balance.json"));
  const std::string weights = fx.slurp("run1_weights.csv");
  CHECK(count_lines(weights) == 51);  // header + 50 rows
  CHECK(weights.rfind("row_index,weight,weight_normalized", 0) == 0);
  const std::string solver = fx.slurp("run1_solver.json");
  CHECK(solver.find("\"schema_version\"") != std::string::npos);
  CHECK(solver.find("\"converged\": true") != std::string::npos);
}

TEST_CASE("repeated identical invocations are byte-identical") {
  CliFixture fx;
  const std::string flags = "weights --data " + fx.path("data.csv") +
                            " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y"
                            " --lambda 1 --seed 7 --out ";
  CHECK(fx.run(flags + fx.path("a"), "ra") == 0);
  CHECK(fx.run(flags + fx.path("b"), "rb") == 0);
  CHECK(fx.slurp("a_weights.csv") == fx.slurp("b_weights.csv"));
  CHECK(fx.slurp("a_solver.json") == fx.slurp("b_solver.json"));
  CHECK(fx.slurp("a_balance.json") == fx.slurp("b_balance.json"));
  CHECK(fx.slurp("ra.stdout") == fx.slurp("rb.stdout"));
}

TEST_CASE("flag validation errors exit 1 and name the offending flag") {
  CliFixture fx;
  SUBCASE("negative lambda") {
    const int code = fx.run("weights --data " + fx.path("data.csv") +
                                " --treatment a --confounders x1 --lambda -1 --out " +
                                fx.path("bad"),
                            "neg");
    CHECK(code == 1);
    CHECK(fx.slurp("neg.stderr").find("--lambda") != std::string::npos);
  }

  SUBCASE("tune without outcome") {
    const int code = fx.run("weights --data " + fx.path("data.csv") +
                                " --treatment a --confounders x1,x2 --tune --out " +
                                fx.path("bad"),
                            "tune");
    CHECK(code == 1);
    CHECK(fx.slurp("tune.stderr").find("outcome") != std::string::npos);
  }

  SUBCASE("missing column") {
    const int code = fx.run("weights --data " + fx.path("data.csv") +
                                " --treatment a --confounders x9 --out " + fx.path("bad"),
                            "col");
    CHECK(code == 1);
    CHECK(fx.slurp("col.stderr").find("MissingColumn") != std::string::npos);
  }

  SUBCASE("no outcome requires explicit hyperparameters") {
    const int code = fx.run("weights --data " + fx.path("data.csv") +
                                " --treatment a --confounders x1,x2 --out " + fx.path("bad"),
                            "nohyper");
    CHECK(code == 1);
    const int ok = fx.run("weights --data " + fx.path("data.csv") +
                              " --treatment a --confounders x1,x2 --theta-x 1 --theta-a 1 "
                              "--gamma 1 --out " + fx.path("okhyper"),
                          "okhyper");
    CHECK(ok == 0);
  }
}

TEST_CASE("curve command writes the requested grid") {
  CliFixture fx;
  const int code = fx.run("curve --data " + fx.path("data.csv") +
                              " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y"
                              " --estimator poly:3 --grid -3:3:1000 --out " + fx.path("c1"),
                          "c1");
  CHECK(code == 0);
  const std::string curve = fx.slurp("c1_curve.csv");
  CHECK(count_lines(curve) == 1001);
  CHECK(curve.rfind("a,theta_hat,lower,upper", 0) == 0);
  // no bootstrap: band fields are empty
  const auto second_line_start = curve.find('\n') + 1;
  const auto second_line = curve.substr(second_line_start, curve.find('\n', second_line_start) -
                                                               second_line_start);
  CHECK(second_line.substr(second_line.size() - 2) == ",,");
}

TEST_CASE("curve with local estimator and defaults") {
  CliFixture fx;
  const int code = fx.run("curve --data " + fx.path("data.csv") +
                              " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y"
                              " --estimator local:2 --span 0.75 --grid -2:2:50 --out " +
                              fx.path("c2"),
                          "c2");
  CHECK(code == 0);
  CHECK(count_lines(fx.slurp("c2_curve.csv")) == 51);
}

TEST_CASE("curve with bootstrap bands populates lower and upper") {
  CliFixture fx;
  const int code = fx.run("curve --data " + fx.path("data.csv") +
                              " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y"
                              " --estimator poly:3 --grid -2:2:20 --bootstrap 8 --workers 2"
                              " --seed 3 --out " + fx.path("c3"),
                          "c3");
  CHECK(code == 0);
  const std::string curve = fx.slurp("c3_curve.csv");
  CHECK(count_lines(curve) == 21);
  CHECK(curve.find(",,") == std::string::npos);
  const std::string info = fx.slurp("c3_bootstrap.json");
  CHECK(info.find("\"B\": 8") != std::string::npos);
  CHECK(info.find("\"retune\": false") != std::string::npos);
}

TEST_CASE("simulate smoke, determinism, and unknown scenario") {
  CliFixture fx;
  const std::string flags = "simulate --scenario linear --R 2 --n 60 --seed 5 --workers 2"
                            " --lambdas 0,1 --out ";
  CHECK(fx.run(flags + fx.path("s1.csv"), "s1") == 0);
  CHECK(fx.run(flags + fx.path("s2.csv"), "s2") == 0);
  const std::string csv = fx.slurp("s1.csv");
  CHECK(csv == fx.slurp("s2.csv"));
  CHECK(csv.rfind("scenario,method,lambda,estimator,iab,irmse,failures", 0) == 0);
  CHECK(count_lines(csv) == 9);  // header + 4 methods x 2 estimators

  CHECK(fx.run("simulate --scenario nope --R 1 --n 60 --out " + fx.path("s3.csv"), "s3") == 1);
}

TEST_CASE("config file supplies defaults and flags override it") {
  CliFixture fx;
  std::ofstream config(fx.path("config.json"));
  config << "{\"lambda\": 10.0, \"theta_x\": 2.0}\n";
  config.close();

  // config lambda applies when the flag is absent
  CHECK(fx.run("weights --data " + fx.path("data.csv") +
                   " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y --config " +
                   fx.path("config.json") + " --out " + fx.path("cfg1"),
               "cfg1") == 0);
  CHECK(fx.slurp("cfg1_solver.json").find("\"lambda\": 10.0") != std::string::npos);

  // explicit flag wins
  CHECK(fx.run("weights --data " + fx.path("data.csv") +
                   " --treatment a --confounders x1,x2,x3,x4,x5 --outcome y --config " +
                   fx.path("config.json") + " --lambda 2 --out " + fx.path("cfg2"),
               "cfg2") == 0);
  CHECK(fx.slurp("cfg2_solver.json").find("\"lambda\": 2.0") != std::string::npos);
}

TEST_CASE("gram dump flag writes both matrices") {
  CliFixture fx;
  const int code = fx.run("weights --data " + fx.path("data.csv") +
                              " --treatment a --confounders x1,x2 --outcome y --dump-grams"
                              " --out " + fx.path("g1"),
                          "g1");
  CHECK(code == 0);
  CHECK(fx.exists("g1_gram_x.csv"));
  CHECK(fx.exists("g1_gram_a.csv"));
  CHECK(count_lines(fx.slurp("g1_gram_x.csv")) == 50);
}

TEST_CASE("input files are never mutated") {
  CliFixture fx;
  const std::string before = fx.slurp("data.csv");
  fx.run("weights --data " + fx.path("data.csv") +
             " --treatment a --confounders x1,x2 --outcome y --out " + fx.path("mut"),
         "mut");
  CHECK(fx.slurp("data.csv") == before);
}
