// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "oracle.hpp"
#include "xtrace/bench.hpp"
#include "xtrace/errors.hpp"

using namespace xtrace;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict identity_exactness() {
  const Index n = 1000;
  auto op = make_diagonal_operator(Vector::Ones(n));
  double worst = 0.0;
  for (const Index m : {2, 10, 50}) {
    Rng rng(derive_seed(1, static_cast<std::uint64_t>(m)));
    const Matrix omega = sample_gaussian(rng, n, m);
    worst = std::max(worst, rel(xtrace_naive(op, omega).estimate, n));
    worst = std::max(worst, rel(xtrace_full_naive(op, omega).estimate, n));
    for (const Index k : {1, 25}) {
      RotationStrategy strategy(RotationKind::IdentityFirstHaar, m);
      Rng rot(derive_seed(2, static_cast<std::uint64_t>(k)));
      XTraceFullOptions o;
      o.k = k;
      worst = std::max(worst, rel(xtrace_full(op, omega, strategy, rot, o).estimate, n));
    }
  }
  return {worst <= 1e-10, fmt("max relative error %.3e", worst)};
}

Verdict efficient_vs_naive() {
  Rng rng(derive_seed(2, 0));
  std::uniform_int_distribution<Index> pick_m(2, 20);
  double worst = 0.0;
  int fallbacks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index m = pick_m(rng);
    const Index n = std::uniform_int_distribution<Index>(2 * m, 200)(rng);
    auto op = make_dense_operator(oracle::random_symmetric(rng, n));
    const Matrix omega = sample_gaussian(rng, n, m);
    RotationStrategy strategy(RotationKind::IdentityFirstHaar, m);
    Rng rot(derive_seed(3, static_cast<std::uint64_t>(trial)));
    const auto eff = xtrace_full(op, omega, strategy, rot);
    if (eff.fell_back) ++fallbacks;
    worst = std::max(worst, rel(eff.estimate, xtrace_full_naive(op, omega).estimate));
  }
  return {worst <= 1e-8, fmt("max relative gap %.3e over 100 draws (%d fell back)", worst, fallbacks)};
}

Verdict lemma_suite() {
  Rng rng(derive_seed(3, 0));
  double worst_a = 0.0;
  double worst_c = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 20 + trial % 40;
    const Index m = 2 + trial % 7;
    auto op = make_dense_operator(oracle::random_symmetric(rng, n));
    const Matrix omega = sample_gaussian(rng, n, m);

    Matrix r = sample_gaussian(rng, m, m);
    r.bottomLeftCorner(1, m - 1).setZero();
    worst_a = std::max(worst_a, rel(leave_one_out_full(op, omega * r), leave_one_out_full(op, omega)));

    const Matrix u1 = sample_haar_orthogonal(rng, m);
    Matrix keep = Matrix::Identity(m, m);
    keep.topLeftCorner(m - 1, m - 1) = sample_haar_orthogonal(rng, m - 1);
    const Matrix u2 = u1 * keep;
    worst_c = std::max(worst_c, rel(leave_one_out_full(op, omega * u2), leave_one_out_full(op, omega * u1)));
  }

  auto fig = fig1_operator();
  const Matrix base = fig1_test_vectors();
  Eigen::Matrix2d mix;
  mix << 1, 1, 0, 1;
  Matrix swapped(5, 2);
  swapped << base.col(1), base.col(0);
  const double moved = std::max(std::abs(leave_one_out(fig, base * mix) - leave_one_out(fig, base)),
                                std::abs(leave_one_out(fig, swapped * mix) - leave_one_out(fig, swapped)));

  const bool pass = worst_a <= 1e-10 && moved > 1e-6 && worst_c <= 1e-10;
  return {pass, fmt("(a) max gap %.3e  (b) plain-variant shift %.3e  (c) max gap %.3e", worst_a, moved,
                    worst_c)};
}

const ConditionalMcReport& conditional_mc() {
  static const ConditionalMcReport report = [] {
    const Index n = 100;
    const Index m = 5;
    auto op = make_diagonal_operator(make_spectrum({SpectrumFamily::Poly, n}));
    Rng rng(derive_seed(4, 0));
    const Matrix q = economy_qr(sample_gaussian(rng, n, m)).Q;
    return conditional_mc_check(op, q, 100000, derive_seed(4, 1));
  }();
  return report;
}

Verdict conditional_gh() {
  const auto& r = conditional_mc();
  return {r.gh_z() <= 4.0, fmt("GH mean %.6f vs projected %.6f, z = %.2f", r.gh.mean, r.projected_gh, r.gh_z())};
}

Verdict conditional_xtrace_full() {
  const auto& r = conditional_mc();
  return {r.xtrace_full_z() <= 4.0, fmt("mean %.6f vs Haar-u mean %.6f, z = %.2f", r.xtrace_full.mean,
                                        r.loo_haar_u.mean, r.xtrace_full_z())};
}

Verdict fig1_reproduction() {
  std::ostringstream out, err;
  const int code = cli::run({"fig1"}, out, err);
  if (code != 0) return {false, "fig1 exited with " + std::to_string(code)};
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  double x0 = 0, f0 = 0;
  double lo = 1e300, hi = -1e300;
  bool first = true;
  while (std::getline(in, line)) {
    double t, x, f;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &f) != 3) return {false, "bad row: " + line};
    if (first) {
      x0 = x;
      f0 = f;
      first = false;
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double ex = rel(x0, 115.0 / 6.0);
  const double ef = rel(f0, 17.5);
  return {ex <= 1e-10 && ef <= 1e-10 && hi - lo > 0.5,
          fmt("theta=0: xtrace %.12f, xtrace_full %.12f; xtrace range %.4f", x0, f0, hi - lo)};
}

std::map<std::string, BenchRow> by_key(const std::vector<BenchRow>& rows) {
  std::map<std::string, BenchRow> out;
  for (const auto& r : rows) out[r.estimator + "/" + std::to_string(r.m)] = r;
  return out;
}

Verdict step_separation() {
  BenchConfig cfg;
  cfg.spectrum = {SpectrumFamily::Step, 1000};
  cfg.m_values = {60};
  cfg.trials = 200;
  cfg.estimators = {EstimatorKind::XTrace, EstimatorKind::XTraceFull};
  cfg.base_seed = 7;
  auto rows = by_key(run_benchmark(cfg));
  const auto& full = rows["xtrace-full/60"];
  const auto& plain = rows["xtrace/60"];
  const double ratio = plain.rms_rel_err / full.rms_rel_err;
  const bool pass = full.failures == 0 && full.rms_rel_err < 1e-8 && ratio >= 1e3;
  return {pass, fmt("xtrace-full %.3e, xtrace %.3e, ratio %.3e", full.rms_rel_err, plain.rms_rel_err, ratio)};
}

Verdict parity() {
  bool pass = true;
  double worst = 1.0;
  std::string worst_cell;
  for (auto family : {SpectrumFamily::Flat, SpectrumFamily::Poly, SpectrumFamily::Exp, SpectrumFamily::StepDecay}) {
    BenchConfig cfg;
    cfg.spectrum = {family, 1000};
    cfg.m_values = {8, 16, 32};
    cfg.trials = 200;
    cfg.estimators = {EstimatorKind::XTrace, EstimatorKind::XTraceFull};
    cfg.base_seed = 8;
    auto rows = by_key(run_benchmark(cfg));
    for (const Index m : cfg.m_values) {
      const auto& a = rows["xtrace/" + std::to_string(m)];
      const auto& b = rows["xtrace-full/" + std::to_string(m)];
      const double ratio = std::max(a.rms_rel_err / b.rms_rel_err, b.rms_rel_err / a.rms_rel_err);
      if (!(ratio <= 2.0)) pass = false;
      if (!(ratio <= worst)) {
        worst = ratio;
        worst_cell = std::string(to_string(family)) + " m=" + std::to_string(m);
      }
    }
  }
  return {pass, fmt("largest ratio %.3f (%s)", worst, worst_cell.c_str())};
}

Verdict resampling_never_hurts() {
  bool pass = true;
  double worst = 0.0;
  std::string worst_cell;
  for (auto family : {SpectrumFamily::Poly, SpectrumFamily::Exp}) {
    BenchConfig cfg;
    cfg.spectrum = {family, 1000};
    cfg.m_values = {4, 8};
    cfg.trials = 1000;
    cfg.resample_k = 25;
    cfg.estimators = {EstimatorKind::XTraceFull, EstimatorKind::XTraceFullResampled};
    cfg.base_seed = 9;
    auto rows = by_key(run_benchmark(cfg));
    for (const Index m : cfg.m_values) {
      const auto& one = rows["xtrace-full/" + std::to_string(m)];
      const auto& many = rows["xtrace-full-resampled/" + std::to_string(m)];
      const double bound = one.rms_rel_err * (1.0 + 3.0 * one.rms_rel_se);
      if (!(many.rms_rel_err <= bound)) pass = false;
      const double r = many.rms_rel_err / one.rms_rel_err;
      if (r >= worst) {
        worst = r;
        worst_cell = std::string(to_string(family)) + " m=" + std::to_string(m);
      }
    }
  }
  return {pass, fmt("largest k=25/k=1 rms ratio %.4f (%s)", worst, worst_cell.c_str())};
}

Verdict unbiasedness() {
  bool pass = true;
  double worst = 0.0;
  std::string worst_cell;
  Index failures = 0;
  for (auto family : kAllFamilies) {
    BenchConfig cfg;
    cfg.spectrum = {family, 100};
    cfg.m_values = {8};
    cfg.trials = 100000;
    cfg.base_seed = 10;
    for (const auto& r : run_benchmark(cfg)) {
      failures += r.failures;
      const double z = std::abs(r.mean_estimate - r.exact_trace) / r.std_error;
      if (!(z <= 4.0) || r.failures > 0) pass = false;
      if (z >= worst) {
        worst = z;
        worst_cell = r.spectrum + " " + r.estimator;
      }
    }
  }
  return {pass, fmt("largest |z| %.2f (%s), %lld failed trials", worst, worst_cell.c_str(),
                    static_cast<long long>(failures))};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"identity exactness", identity_exactness},
      {"efficient equals naive", efficient_vs_naive},
      {"invariance properties", lemma_suite},
      {"conditional expectation of GH", conditional_gh},
      {"basis invariance of xtrace-full", conditional_xtrace_full},
      {"five-dimensional rotation sweep", fig1_reproduction},
      {"step-spectrum separation", step_separation},
      {"xtrace / xtrace-full parity", parity},
      {"resampling never hurts", resampling_never_hurts},
      {"unbiasedness sweep", unbiasedness},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", index, name, v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
