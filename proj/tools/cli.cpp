#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>

#include "xtrace/bench.hpp"
#include "xtrace/errors.hpp"

namespace xtrace::cli {

namespace {

// Resolves "family" plus --n, or "family:N".
SpectrumSpec resolve_spectrum(const std::string& text, std::optional<long long> n) {
  if (text.find(':') != std::string::npos) {
    SpectrumSpec spec = SpectrumSpec::parse(text);
    if (n && *n != spec.dim) throw InvalidSpec("--n disagrees with " + text);
    return spec;
  }
  if (!n) throw InvalidSpec("--n is required with spectrum '" + text + "'");
  SpectrumSpec spec{parse_family(text), static_cast<Index>(*n)};
  spec.validate();
  return spec;
}

// Writes through `body` to --out, or to `out` when --out is "-".
template <typename Body>
void emit(const std::string& path, std::ostream& out, Body&& body) {
  if (path == "-") {
    body(out);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open " + path + " for writing");
  body(file);
  file.flush();
  if (!file) throw Error("failed writing " + path);
}

struct EstimateFlags {
  std::string spectrum;
  std::optional<long long> n;
  long long m = 0;
  long long k = 1;
  std::string estimator = "xtrace-full";
  std::string strategy = "identity-first-haar";
  bool identity_override = false;
  unsigned long long seed = 0;
  std::string out = "-";
};

int cmd_estimate(const EstimateFlags& f, std::ostream& out, std::ostream& err) {
  const SpectrumSpec spec = resolve_spectrum(f.spectrum, f.n);
  const EstimatorKind kind = parse_estimator(f.estimator);
  const RotationKind rotation = parse_rotation_kind(f.strategy);
  const Index n = spec.dim;
  const Index m = static_cast<Index>(f.m);
  const Vector lambda = f.identity_override ? Vector(Vector::Ones(n)) : make_spectrum(spec);
  const double truth = exact_trace(lambda);
  MatFreeOperator op = make_diagonal_operator(lambda);

  Rng rng(f.seed);
  const Matrix omega = sample_gaussian(rng, n, m);
  EstimateReport report;
  switch (kind) {
    case EstimatorKind::Gh: report = girard_hutchinson(op, omega); break;
    case EstimatorKind::ProjectedGh: report = projected_gh(op, omega); break;
    case EstimatorKind::XTrace: report = xtrace_naive(op, omega); break;
    case EstimatorKind::XTraceFull:
    case EstimatorKind::XTraceFullResampled: {
      RotationStrategy strategy(rotation, m);
      Rng rotation_rng(derive_seed(f.seed, 1));
      XTraceFullOptions options;
      options.k = static_cast<Index>(f.k);
      report = xtrace_full(op, omega, strategy, rotation_rng, options);
      break;
    }
  }
  report.seed = f.seed;
  const double rel = std::abs(report.estimate - truth) / std::abs(truth);

  emit(f.out, out, [&](std::ostream& os) {
    os << "spectrum,N,m,estimator,k,estimate,true_trace,rel_error,matvecs,seed\n";
    os << std::scientific << std::setprecision(std::numeric_limits<double>::max_digits10 - 1);
    os << (f.identity_override ? std::string("identity") : spec.name()) << ',' << n << ',' << m
       << ',' << to_string(kind) << ',' << f.k << ',' << report.estimate << ',' << truth << ','
       << rel << ',' << report.matvecs_used << ',' << report.seed << '\n';
  });
  if (report.fell_back) err << "note: rank-deficient Krylov block, used the naive path\n";
  return kOk;
}

struct BenchFlags {
  std::vector<std::string> spectra{"all"};
  long long n = 1000;
  std::vector<long long> m_values;
  long long trials = 1000;
  long long k = 25;
  std::vector<std::string> estimators{"all"};
  std::string strategy = "identity-first-haar";
  bool identity_override = false;
  unsigned long long seed = 0;
  std::string out = "-";
};

int cmd_bench(const BenchFlags& f, std::ostream& out, std::ostream& err) {
  std::vector<SpectrumSpec> specs;
  for (const auto& s : f.spectra) {
    if (s == "all") {
      for (auto family : kAllFamilies) specs.push_back(resolve_spectrum(std::string(to_string(family)), f.n));
    } else {
      specs.push_back(resolve_spectrum(s, f.n));
    }
  }
  std::vector<EstimatorKind> estimators;
  for (const auto& e : f.estimators) {
    if (e == "all") {
      estimators.assign(std::begin(kAllEstimators), std::end(kAllEstimators));
    } else {
      estimators.push_back(parse_estimator(e));
    }
  }

  std::vector<BenchRow> rows;
  for (const auto& spec : specs) {
    BenchConfig cfg;
    cfg.spectrum = spec;
    if (f.m_values.empty()) {
      for (const Index m : {2, 4, 8, 16, 32, 64}) {
        if (2 * m <= spec.dim) cfg.m_values.push_back(m);
      }
    } else {
      for (const auto m : f.m_values) cfg.m_values.push_back(static_cast<Index>(m));
    }
    cfg.trials = static_cast<Index>(f.trials);
    cfg.resample_k = static_cast<Index>(f.k);
    cfg.estimators = estimators;
    cfg.base_seed = f.seed;
    cfg.rotation = parse_rotation_kind(f.strategy);
    cfg.identity_override = f.identity_override;

    const auto spec_rows = run_benchmark(cfg);
    Index failures = 0;
    Index implausible = 0;
    Index fallbacks = 0;
    for (const auto& r : spec_rows) {
      failures += r.failures;
      fallbacks += r.fallbacks;
      if (!mean_is_plausible(r)) ++implausible;
    }
    err << spec.name() << " N=" << spec.dim << ": " << spec_rows.size() << " rows, " << failures
        << " failed trials, " << fallbacks << " naive fallbacks, " << implausible
        << " rows with mean beyond 5 SE\n";
    rows.insert(rows.end(), spec_rows.begin(), spec_rows.end());
  }
  emit(f.out, out, [&](std::ostream& os) { write_csv(rows, os); });
  return kOk;
}

int cmd_fig1(long long points, const std::string& path, std::ostream& out) {
  MatFreeOperator op = fig1_operator();
  const auto sweep = rotation_sweep(op, fig1_test_vectors(), fig1_theta_grid(static_cast<Index>(points)));
  emit(path, out, [&](std::ostream& os) { write_sweep_csv(sweep, os); });
  return kOk;
}

int cmd_check(const CheckOptions& options, const std::string& path, std::ostream& out,
              std::ostream& err) {
  const auto results = run_checks(options);
  bool all = true;
  emit(path, out, [&](std::ostream& os) {
    os << "suite\tresult\tdetail\n";
    for (const auto& r : results) {
      os << r.name << '\t' << (r.passed ? "pass" : "FAIL") << '\t' << r.detail << '\n';
      all = all && r.passed;
    }
  });
  for (const auto& r : results) {
    if (!r.passed) err << "failed: " << r.name << " (" << r.detail << ")\n";
  }
  return all ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Randomized trace estimation: XTrace, XTraceFull and benchmarks", "xtrace"};
  app.require_subcommand(1);

  EstimateFlags ef;
  auto* estimate = app.add_subcommand("estimate", "Estimate the trace of one synthetic matrix");
  estimate->add_option("--spectrum", ef.spectrum, "family or family:N")->required();
  estimate->add_option("--n", ef.n, "matrix dimension")->check(CLI::PositiveNumber);
  estimate->add_option("--m", ef.m, "number of test vectors")->required()->check(CLI::PositiveNumber);
  estimate->add_option("--k", ef.k, "number of rotations")->check(CLI::PositiveNumber);
  estimate->add_option("--estimator", ef.estimator, "gh, projected-gh, xtrace, xtrace-full, xtrace-full-resampled");
  estimate->add_option("--strategy", ef.strategy, "identity-first-haar, iid-unit-vectors, kac-walk");
  estimate->add_flag("--identity-override", ef.identity_override, "run on the identity instead");
  estimate->add_option("--seed", ef.seed, "random seed");
  estimate->add_option("--out", ef.out, "output path, - for stdout");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "RMS relative error over repeated trials, as CSV");
  bench->add_option("--spectrum", bf.spectra, "families (or family:N), or all")->delimiter(',');
  bench->add_option("--n", bf.n, "matrix dimension")->check(CLI::PositiveNumber);
  bench->add_option("--m", bf.m_values, "test-vector counts")->delimiter(',')->check(CLI::PositiveNumber);
  bench->add_option("--trials", bf.trials, "trials per cell")->check(CLI::PositiveNumber);
  bench->add_option("--k", bf.k, "rotations for xtrace-full-resampled")->check(CLI::PositiveNumber);
  bench->add_option("--estimator", bf.estimators, "estimators, or all")->delimiter(',');
  bench->add_option("--strategy", bf.strategy, "rotation strategy for resampling");
  bench->add_flag("--identity-override", bf.identity_override, "run on the identity instead");
  bench->add_option("--seed", bf.seed, "base seed");
  bench->add_option("--out", bf.out, "output path, - for stdout");

  long long points = 65;
  std::string fig_out = "-";
  unsigned long long fig_seed = 0;
  auto* fig1 = app.add_subcommand("fig1", "Rotation sweep of XTrace on the fixed 5x5 example");
  fig1->add_option("--points", points, "grid points on [0, pi/2]")->check(CLI::PositiveNumber);
  fig1->add_option("--out", fig_out, "output path, - for stdout");
  fig1->add_option("--seed", fig_seed, "unused; accepted for uniformity");

  CheckOptions co;
  std::string check_out = "-";
  auto* check = app.add_subcommand("check", "Run the invariance and equivalence suites");
  check->add_flag("--mc", co.monte_carlo, "include the conditional Monte-Carlo checks");
  check->add_option("--samples", co.samples, "Monte-Carlo samples")->check(CLI::PositiveNumber);
  check->add_option("--seed", co.seed, "random seed");
  check->add_option("--out", check_out, "output path, - for stdout");
  check->add_flag("--inject-coefficient-bug", co.inject_coefficient_bug,
                  "use N-2m-1 in the efficient path (the equivalence suite should fail)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*estimate) return cmd_estimate(ef, out, err);
    if (*bench) return cmd_bench(bf, out, err);
    if (*fig1) return cmd_fig1(points, fig_out, out);
    if (*check) return cmd_check(co, check_out, out, err);
  } catch (const InvalidSpec& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace xtrace::cli
