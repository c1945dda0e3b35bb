#include "xtrace/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <tuple>

#include "xtrace/errors.hpp"

namespace xtrace {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Gh: return "gh";
    case EstimatorKind::ProjectedGh: return "projected-gh";
    case EstimatorKind::XTrace: return "xtrace";
    case EstimatorKind::XTraceFull: return "xtrace-full";
    case EstimatorKind::XTraceFullResampled: return "xtrace-full-resampled";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  for (auto kind : kAllEstimators) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidSpec("unknown estimator '" + std::string(name) + "'");
}

void BenchConfig::validate() const {
  spectrum.validate();
  if (trials < 1) throw InvalidSpec("trials must be at least 1");
  if (resample_k < 1) throw InvalidSpec("resample k must be at least 1");
  if (m_values.empty()) throw InvalidSpec("no test-vector counts given");
  if (estimators.empty()) throw InvalidSpec("no estimators selected");
  for (const Index m : m_values) {
    if (m < 2) throw InvalidSpec("every m must be at least 2");
    if (2 * m > spectrum.dim) throw InvalidSpec("every m must satisfy 2m <= N");
  }
}

std::uint64_t trial_seed(std::uint64_t base_seed, Index index) noexcept {
  return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

std::vector<double> run_trial(MatFreeOperator& op, Index m, const BenchConfig& cfg,
                              std::uint64_t seed, std::vector<bool>* fell_back) {
  Rng rng(seed);
  const Matrix omega = sample_gaussian(rng, op.dim(), m);
  std::vector<double> out(cfg.estimators.size(), std::numeric_limits<double>::quiet_NaN());
  if (fell_back) fell_back->assign(cfg.estimators.size(), false);

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    try {
      EstimateReport report;
      switch (cfg.estimators[e]) {
        case EstimatorKind::Gh: report = girard_hutchinson(op, omega); break;
        case EstimatorKind::ProjectedGh: report = projected_gh(op, omega); break;
        case EstimatorKind::XTrace: report = xtrace_naive(op, omega); break;
        case EstimatorKind::XTraceFull:
        case EstimatorKind::XTraceFullResampled: {
          const bool resampled = cfg.estimators[e] == EstimatorKind::XTraceFullResampled;
          RotationStrategy strategy(resampled ? cfg.rotation : RotationKind::IdentityFirstHaar, m);
          Rng rotation_rng(derive_seed(seed, 1));
          XTraceFullOptions options;
          options.k = resampled ? cfg.resample_k : 1;
          report = xtrace_full(op, omega, strategy, rotation_rng, options);
          break;
        }
      }
      out[e] = report.estimate;
      if (fell_back) (*fell_back)[e] = report.fell_back;
    } catch (const Error&) {
      // left as NaN; counted as a failure by the caller
    }
  }
  return out;
}

std::vector<BenchRow> run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  const Index n = cfg.spectrum.dim;
  const Vector lambda = cfg.identity_override ? Vector(Vector::Ones(n)) : make_spectrum(cfg.spectrum);
  const double truth = exact_trace(lambda);
  const MatFreeOperator base = make_diagonal_operator(lambda);
  const std::string spectrum_name = cfg.identity_override ? "identity" : cfg.spectrum.name();

  std::vector<BenchRow> rows;
  for (const Index m : cfg.m_values) {
    const std::size_t ne = cfg.estimators.size();
    std::vector<std::vector<double>> estimates(ne);
    std::vector<Index> failures(ne, 0);
    std::vector<Index> fallbacks(ne, 0);
    std::vector<bool> fell_back;
    for (Index t = 0; t < cfg.trials; ++t) {
      MatFreeOperator op = base.fork();
      const auto values = run_trial(op, m, cfg, trial_seed(cfg.base_seed, t), &fell_back);
      for (std::size_t e = 0; e < ne; ++e) {
        if (std::isfinite(values[e])) {
          estimates[e].push_back(values[e]);
        } else {
          ++failures[e];
        }
        if (fell_back[e]) ++fallbacks[e];
      }
    }

    for (std::size_t e = 0; e < ne; ++e) {
      const EstimatorKind kind = cfg.estimators[e];
      BenchRow row;
      row.spectrum = spectrum_name;
      row.n = n;
      row.m = m;
      const bool gh_like = kind == EstimatorKind::Gh || kind == EstimatorKind::ProjectedGh;
      row.matvecs = gh_like ? m : 2 * m;
      row.estimator = std::string(to_string(kind));
      row.k = kind == EstimatorKind::XTraceFullResampled ? cfg.resample_k : 1;
      row.exact_trace = truth;
      row.failures = failures[e];
      row.fallbacks = fallbacks[e];

      const auto& v = estimates[e];
      row.trials = static_cast<Index>(v.size());
      if (v.empty()) {
        row.rms_rel_err = row.mean_estimate = row.std_error = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
        continue;
      }
      const double count = static_cast<double>(v.size());
      double sum = 0.0;
      double sq_err = 0.0;
      for (const double x : v) {
        sum += x;
        sq_err += (x - truth) * (x - truth);
      }
      row.mean_estimate = sum / count;
      const double mse = sq_err / count;
      row.rms_rel_err = std::sqrt(mse) / std::abs(truth);

      double var = 0.0;
      double var_sq = 0.0;
      for (const double x : v) {
        var += (x - row.mean_estimate) * (x - row.mean_estimate);
        const double d = (x - truth) * (x - truth) - mse;
        var_sq += d * d;
      }
      const double dof = count > 1 ? count - 1 : 1.0;
      row.std_error = std::sqrt(var / dof / count);
      row.rms_rel_se = mse > 0 ? 0.5 * std::sqrt(var_sq / dof / count) / mse : 0.0;
      rows.push_back(row);
    }
  }

  std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.spectrum, a.estimator, a.m) < std::tie(b.spectrum, b.estimator, b.m);
  });
  return rows;
}

bool mean_is_plausible(const BenchRow& row) {
  const double gap = std::abs(row.mean_estimate - row.exact_trace);
  const double slack = 1e-10 * std::abs(row.exact_trace);
  return gap <= 5.0 * row.std_error + slack;
}

void write_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  out << std::scientific << std::setprecision(std::numeric_limits<double>::max_digits10 - 1);
  for (const auto& r : rows) {
    out << r.spectrum << ',' << r.n << ',' << r.m << ',' << r.matvecs << ',' << r.estimator << ','
        << r.k << ',' << r.trials << ',' << r.rms_rel_err << ',' << r.mean_estimate << ','
        << r.std_error << '\n';
  }
}

void write_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open " + path.string() + " for writing");
  write_csv(rows, file);
  file.flush();
  if (!file) throw Error("failed writing " + path.string());
}

MatFreeOperator fig1_operator() {
  Vector lambda(5);
  lambda << 5, 4, 3, 2, 1;
  return make_diagonal_operator(lambda);
}

Matrix fig1_test_vectors() {
  Matrix omega = Matrix::Zero(5, 2);
  omega(0, 0) = 1.0;
  omega.col(1).tail(4).setConstant(0.5);
  return omega;
}

std::vector<double> fig1_theta_grid(Index points) {
  if (points < 1) throw InvalidInput("theta grid needs at least one point");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (Index i = 0; i < points; ++i) {
    grid[i] = points == 1 ? 0.0
                          : (std::numbers::pi / 2.0) * static_cast<double>(i) /
                                static_cast<double>(points - 1);
  }
  return grid;
}

std::vector<SweepPoint> rotation_sweep(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                                       const std::vector<double>& thetas) {
  if (omega.cols() != 2) throw InvalidInput("rotation_sweep expects two test vectors");
  if (thetas.empty()) throw InvalidInput("rotation_sweep needs a nonempty grid");
  std::vector<SweepPoint> out;
  out.reserve(thetas.size());
  for (const double t : thetas) {
    Eigen::Matrix2d u;
    u << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    const Matrix rotated = omega * u;
    out.push_back({t, xtrace_naive(op, rotated).estimate, xtrace_full_naive(op, rotated).estimate});
  }
  return out;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out) {
  out << "theta,xtrace,xtrace_full\n";
  out << std::scientific << std::setprecision(std::numeric_limits<double>::max_digits10 - 1);
  for (const auto& p : points) out << p.theta << ',' << p.xtrace << ',' << p.xtrace_full << '\n';
}

namespace {

class RunningMean {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  MeanWithError result() const {
    const double var = n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    return {mean_, std::sqrt(var / static_cast<double>(std::max<Index>(n_, 1)))};
  }

 private:
  Index n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double z_score(double a, double b, double se) {
  const double gap = std::abs(a - b);
  if (se > 0.0) return gap / se;
  return gap <= 1e-10 * std::max(std::abs(a), std::abs(b)) ? 0.0
                                                           : std::numeric_limits<double>::infinity();
}

}  // namespace

double ConditionalMcReport::gh_z() const { return z_score(gh.mean, projected_gh, gh.std_error); }

double ConditionalMcReport::xtrace_full_z() const {
  return z_score(xtrace_full.mean, loo_haar_u.mean,
                 std::hypot(xtrace_full.std_error, loo_haar_u.std_error));
}

ConditionalMcReport conditional_mc_check(MatFreeOperator& op, const Eigen::Ref<const Matrix>& q,
                                         Index samples, std::uint64_t seed) {
  if (q.rows() != op.dim()) throw InvalidInput("conditional_mc_check: Q has wrong row count");
  if (samples < 2) throw InvalidInput("conditional_mc_check: need at least two samples");
  const Index n = q.rows();
  const Index m = q.cols();

  ConditionalMcReport report;
  report.samples = samples;
  report.projected_gh = projected_gh(op, q).estimate;

  std::optional<KrylovFactors> factors;
  try {
    factors = build_krylov_factors(op, q);
  } catch (const RankDeficient&) {
    // Krylov block collapses (e.g. A = I); evaluate the held-out estimate directly.
  }

  Rng rng(seed);
  RunningMean gh;
  RunningMean xf;
  RunningMean loo;
  for (Index s = 0; s < samples; ++s) {
    const Matrix u = sample_haar_orthogonal(rng, m);
    const Matrix r = sample_gaussian_r_factor(rng, n, m);
    const Matrix omega = q * u * r;
    gh.add(girard_hutchinson(op, omega).estimate);
    xf.add(xtrace_full_naive(op, omega).estimate);

    if (factors) {
      loo.add(loo_full_from_factors(*factors, sample_unit_vector(rng, m)));
    } else {
      loo.add(leave_one_out_full(op, q * sample_haar_orthogonal(rng, m)));
    }
  }
  report.gh = gh.result();
  report.xtrace_full = xf.result();
  report.loo_haar_u = loo.result();
  return report;
}

CorrelationReport resampling_correlation(MatFreeOperator& op, Index m, Index k, Index trials,
                                         std::uint64_t seed) {
  if (k < 2) throw InvalidInput("resampling_correlation needs k >= 2");
  if (m < 2) throw InvalidInput("resampling_correlation needs m >= 2");
  if (trials < 1) throw InvalidInput("resampling_correlation needs at least one trial");

  RunningMean within;
  RunningMean across;
  CorrelationReport report;
  Matrix d(m, k);
  for (Index t = 0; t < trials; ++t) {
    const std::uint64_t ts = trial_seed(seed, t);
    Rng rng(ts);
    const Matrix omega = sample_gaussian(rng, op.dim(), m);
    KrylovFactors f;
    try {
      f = build_krylov_factors(op, omega);
    } catch (const RankDeficient&) {
      continue;
    }
    Rng rotation_rng(derive_seed(ts, 1));
    for (Index j = 0; j < k; ++j) {
      const Matrix u = sample_haar_orthogonal(rotation_rng, m);
      for (Index i = 0; i < m; ++i) d(i, j) = loo_full_from_factors(f, u.col(i));
    }
    const double center = d.mean();
    d.array() -= center;
    const double var = d.squaredNorm() / static_cast<double>(m * k);
    if (!(var > 1e-20 * (center * center + 1e-300))) continue;

    const Eigen::RowVectorXd col_sums = d.colwise().sum();
    const double within_cov = (col_sums.squaredNorm() - d.squaredNorm()) /
                              static_cast<double>(k * m * (m - 1));
    const double across_cov = -col_sums.squaredNorm() / static_cast<double>(m * m * k * (k - 1));
    within.add(within_cov / var);
    across.add(across_cov / var);
    ++report.trials_used;
  }
  if (report.trials_used < 2) return report;
  report.applicable = true;
  const auto w = within.result();
  const auto a = across.result();
  report.within = w.mean;
  report.within_half_width = 1.96 * w.std_error;
  report.across = a.mean;
  report.across_half_width = 1.96 * a.std_error;
  return report;
}

}  // namespace xtrace
