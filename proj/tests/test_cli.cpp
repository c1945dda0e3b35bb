#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cli.hpp"

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = xtrace::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> cells(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("estimate prints one csv row") {
  const auto r = run({"estimate", "--spectrum", "flat", "--n", "100", "--m", "2", "--seed", "1"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == "spectrum,N,m,estimator,k,estimate,true_trace,rel_error,matvecs,seed");
  const auto c = cells(ls[1]);
  REQUIRE(c.size() == 10);
  CHECK(c[1] == "100");
  CHECK(c[2] == "2");
  CHECK(std::stod(c[6]) == doctest::Approx(200.0));
  CHECK(c[8] == "4");
  CHECK(c[9] == "1");
  CHECK(run({"estimate", "--spectrum", "flat", "--n", "100", "--m", "2", "--seed", "1"}).out == r.out);
}

TEST_CASE("estimate accepts family:N and the identity override") {
  const auto r = run({"estimate", "--spectrum", "exp:50", "--m", "3", "--identity-override",
                      "--estimator", "xtrace-full-resampled", "--k", "7"});
  REQUIRE(r.code == 0);
  const auto c = cells(lines(r.out)[1]);
  CHECK(std::stod(c[5]) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(std::stod(c[7]) <= 1e-10);
  CHECK(c[4] == "7");
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"estimate", "--spectrum", "step", "--n", "40", "--m", "2"}).code == 2);
  CHECK(run({"estimate", "--spectrum", "flat", "--m", "2", "--bogus"}).code == 2);
  CHECK(run({"estimate", "--spectrum", "flat", "--n", "10", "--m", "6", "--estimator", "xtrace-full"}).code == 2);
  CHECK(run({"bench", "--estimator", "nope"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
}

TEST_CASE("bench output is reproducible") {
  const std::vector<std::string> args = {"bench", "--spectrum", "poly,exp", "--n", "80", "--m", "2,4",
                                         "--trials", "20", "--k", "3", "--seed", "5"};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto ls = lines(a.out);
  CHECK(ls[0] == "spectrum,N,m,matvecs,estimator,k,trials,rms_rel_err,mean_estimate,std_error");
  CHECK(ls.size() == 1 + 2 * 2 * 5);
  CHECK_FALSE(a.err.empty());
}

TEST_CASE("bench default m list fits the dimension") {
  const auto r = run({"bench", "--spectrum", "flat", "--n", "20", "--trials", "3", "--estimator", "gh"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  // 2, 4, 8 satisfy 2m <= 20
  CHECK(ls.size() == 4);
}

TEST_CASE("bench recovers the step spectrum at m=60") {
  const auto r = run({"bench", "--spectrum", "step", "--n", "1000", "--m", "60", "--trials", "50",
                      "--estimator", "xtrace-full"});
  REQUIRE(r.code == 0);
  const auto c = cells(lines(r.out)[1]);
  CHECK(c[4] == "xtrace-full");
  CHECK(std::stod(c[7]) < 1e-8);
}

TEST_CASE("fig1 sweep") {
  const auto a = run({"fig1", "--points", "9"});
  REQUIRE(a.code == 0);
  const auto ls = lines(a.out);
  REQUIRE(ls.size() == 10);
  CHECK(ls[0] == "theta,xtrace,xtrace_full");
  const auto first = cells(ls[1]);
  CHECK(std::stod(first[1]) == doctest::Approx(115.0 / 6.0).epsilon(1e-10));
  CHECK(std::stod(first[2]) == doctest::Approx(17.5).epsilon(1e-10));
  CHECK(run({"fig1", "--points", "9", "--seed", "3"}).out == a.out);
}

TEST_CASE("check suites") {
  const auto ok = run({"check"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);

  const auto bug = run({"check", "--inject-coefficient-bug"});
  CHECK(bug.code == 1);
  CHECK(bug.out.find("FAIL") != std::string::npos);

  const auto mc = run({"check", "--mc", "--samples", "3000", "--seed", "4"});
  CHECK(mc.code == 0);
  CHECK(mc.out.find("conditional-gh") != std::string::npos);
  CHECK(mc.out.find("conditional-xtrace-full") != std::string::npos);

  const auto suites = xtrace::cli::run_checks({});
  CHECK(suites.size() == 4);
  for (const auto& s : suites) CHECK_MESSAGE(s.passed, s.name, ": ", s.detail);
}
