#include "xtrace/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "xtrace/errors.hpp"

namespace xtrace {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_block(const MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega, Index min_cols,
                   const char* who) {
  if (omega.rows() != op.dim()) {
    throw InvalidInput(std::string(who) + ": omega has " + std::to_string(omega.rows()) +
                       " rows, operator dimension is " + std::to_string(op.dim()));
  }
  if (omega.cols() < min_cols) {
    throw InvalidInput(std::string(who) + ": needs at least " + std::to_string(min_cols) +
                       " test vectors");
  }
}

Matrix drop_column(const Eigen::Ref<const Matrix>& x, Index i) {
  Matrix out(x.rows(), x.cols() - 1);
  out.leftCols(i) = x.leftCols(i);
  out.rightCols(x.cols() - 1 - i) = x.rightCols(x.cols() - 1 - i);
  return out;
}

Matrix hcat(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Projects w off range(q) twice; returns the residual.
Vector project_out(const Eigen::Ref<const Matrix>& q, const Eigen::Ref<const Vector>& w) {
  Vector mu = w;
  if (q.cols() > 0) {
    mu -= q * (q.transpose() * mu);
    mu -= q * (q.transpose() * mu);
  }
  return mu;
}

// Coordinates of omega and A*omega in an orthonormal basis B of
// range([omega, A omega]), together with B^T A B. Every vector the naive
// algorithms touch lies in range(B), so they can run in these r <= 2m
// coordinates without losing anything; N only enters through the
// normalization coefficient.
struct KrylovFrame {
  Matrix omega;
  Matrix y;
  Matrix h;
  Index n = 0;
};

KrylovFrame make_frame(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                       const Eigen::Ref<const Matrix>& y) {
  const QRFactors qr0 = economy_qr(omega);
  const Matrix aq0 = qr0.R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(y);
  const double tol = kRankTolerance * std::max(max_column_norm(omega), max_column_norm(y));
  const Matrix q1 = extend_orthonormal_basis(qr0.Q, y, tol);
  const Matrix aq1 = q1.cols() > 0 ? op.apply(q1) : Matrix(op.dim(), 0);

  const Matrix basis = hcat(qr0.Q, q1);
  KrylovFrame frame;
  frame.h = basis.transpose() * hcat(aq0, aq1);
  frame.omega = basis.transpose() * omega;
  frame.y = basis.transpose() * y;
  frame.n = op.dim();
  return frame;
}

// tr(Q^T A Q) + nu^T A nu for Q = orth(deflate), nu the normalized residual
// of w. Zero residual term once the deflation basis fills the whole space.
double held_out_estimate(const KrylovFrame& frame, const Eigen::Ref<const Matrix>& deflate,
                         const Eigen::Ref<const Vector>& w) {
  const Matrix q = orthonormal_basis(deflate);
  double est = (q.transpose() * frame.h * q).trace();
  const Index free_dims = frame.n - q.cols();
  if (free_dims <= 0) return est;

  const Vector mu = project_out(q, w);
  const double norm = mu.norm();
  if (norm <= kRankTolerance * w.norm() || norm == 0.0) {
    throw DegenerateResidual("held-out test vector lies in the deflation space");
  }
  est += static_cast<double>(free_dims) * mu.dot(frame.h * mu) / (norm * norm);
  return est;
}

double literal_leave_one_out(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega, bool full) {
  const Index n = op.dim();
  const Index m = omega.cols();
  const Matrix y = op.apply(omega);
  const Matrix deflate =
      full ? hcat(omega.leftCols(m - 1), y.leftCols(m - 1)) : Matrix(y.leftCols(m - 1));
  const Matrix q = orthonormal_basis(deflate);
  const Index free_dims = n - q.cols();

  Matrix probe = q;
  if (free_dims > 0) {
    const Vector w = omega.col(m - 1);
    const Vector mu = project_out(q, w);
    const double norm = mu.norm();
    if (norm <= kRankTolerance * w.norm() || norm == 0.0) {
      throw DegenerateResidual("held-out test vector lies in the deflation space");
    }
    probe = hcat(q, std::sqrt(static_cast<double>(free_dims)) * mu / norm);
  }
  const Matrix ap = op.apply(probe);
  return probe.cwiseProduct(ap).sum();
}

KrylovFactors factors_from(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                           const Eigen::Ref<const Matrix>& y) {
  const Index n = omega.rows();
  const Index m = omega.cols();
  const QRFactors qr = economy_qr(hcat(omega, y));

  KrylovFactors f;
  f.n = n;
  f.m = m;
  f.Q = qr.Q;
  f.omega_r = qr.R.topLeftCorner(m, m);
  f.R = Matrix::Zero(2 * m, 2 * m);
  f.R.topLeftCorner(m, m).setIdentity();
  f.R.rightCols(m) =
      f.omega_r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(qr.R.rightCols(m));

  const Matrix aq1 = op.apply(qr.Q.rightCols(m));
  f.H.resize(2 * m, 2 * m);
  f.H.leftCols(m) = f.R.rightCols(m);
  f.H.rightCols(m) = qr.Q.transpose() * aq1;
  f.trace_h = f.H.trace();
  return f;
}

double default_coefficient(const KrylovFactors& f) {
  return static_cast<double>(f.n - 2 * f.m + 1);
}

}  // namespace

EstimateReport girard_hutchinson(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 1, "girard_hutchinson");
  const auto before = op.matvec_count();
  const Matrix y = op.apply(omega);
  EstimateReport report;
  report.samples.resize(omega.cols());
  for (Index i = 0; i < omega.cols(); ++i) report.samples[i] = omega.col(i).dot(y.col(i));
  report.estimate = mean_of(report.samples);
  report.matvecs_used = op.matvec_count() - before;
  return report;
}

EstimateReport projected_gh(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 1, "projected_gh");
  const auto before = op.matvec_count();
  const Matrix q = economy_qr(omega).Q;
  const Matrix aq = op.apply(q);
  const double n = static_cast<double>(op.dim());
  EstimateReport report;
  report.samples.resize(q.cols());
  for (Index i = 0; i < q.cols(); ++i) report.samples[i] = n * q.col(i).dot(aq.col(i));
  report.estimate = mean_of(report.samples);
  report.matvecs_used = op.matvec_count() - before;
  return report;
}

double leave_one_out(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 2, "leave_one_out");
  return literal_leave_one_out(op, omega, false);
}

double leave_one_out_full(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 2, "leave_one_out_full");
  if (2 * (omega.cols() - 1) >= op.dim()) {
    throw BasisSaturation("leave_one_out_full: 2(m-1) must be below N");
  }
  return literal_leave_one_out(op, omega, true);
}

namespace {

EstimateReport naive_from(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                          const Eigen::Ref<const Matrix>& y, bool full) {
  const Index m = omega.cols();
  const KrylovFrame frame = make_frame(op, omega, y);
  EstimateReport report;
  report.samples.resize(m);
  for (Index i = 0; i < m; ++i) {
    const Matrix y_rest = drop_column(frame.y, i);
    // Test vectors first: they are well conditioned, so the Y columns that
    // add nothing new come out as clean zeros instead of amplified noise.
    const Matrix deflate = full ? hcat(drop_column(frame.omega, i), y_rest) : y_rest;
    report.samples[i] = held_out_estimate(frame, deflate, frame.omega.col(i));
  }
  report.estimate = mean_of(report.samples);
  return report;
}

}  // namespace

EstimateReport xtrace_naive(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 2, "xtrace_naive");
  const auto before = op.matvec_count();
  const Matrix y = op.apply(omega);
  EstimateReport report = naive_from(op, omega, y, false);
  report.matvecs_used = op.matvec_count() - before;
  return report;
}

EstimateReport xtrace_full_naive(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 2, "xtrace_full_naive");
  if (2 * (omega.cols() - 1) >= op.dim()) {
    throw BasisSaturation("xtrace_full_naive: 2(m-1) must be below N");
  }
  const auto before = op.matvec_count();
  const Matrix y = op.apply(omega);
  EstimateReport report = naive_from(op, omega, y, true);
  report.matvecs_used = op.matvec_count() - before;
  return report;
}

KrylovFactors build_krylov_factors(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega) {
  require_block(op, omega, 1, "build_krylov_factors");
  if (2 * omega.cols() > op.dim()) throw InvalidInput("build_krylov_factors: needs 2m <= N");
  const Matrix y = op.apply(omega);
  return factors_from(op, omega, y);
}

double loo_full_from_factors(const KrylovFactors& f, const Eigen::Ref<const Vector>& u,
                             double residual_coefficient) {
  const Index m = f.m;
  if (u.size() != m) throw InvalidInput("loo_full_from_factors: u has wrong length");
  if (std::abs(u.norm() - 1.0) > 1e-8) throw InvalidInput("loo_full_from_factors: u must be a unit vector");

  Matrix rhs = Matrix::Zero(2 * m, 2);
  rhs.col(0).head(m) = u;
  rhs.col(1).tail(m) = u;
  const QLPair ql = ql_orthonormalize_pair(solve_transposed_upper(f.R, rhs));
  const auto kept = ql.S.col(0);     // direction of the normalized residual
  const auto removed = ql.S.col(1);  // direction dropped with A Q0 u
  return f.trace_h - removed.dot(f.H * removed) + residual_coefficient * kept.dot(f.H * kept);
}

double loo_full_from_factors(const KrylovFactors& f, const Eigen::Ref<const Vector>& u) {
  return loo_full_from_factors(f, u, default_coefficient(f));
}

Vector omega_column_direction(const KrylovFactors& f, Index i) {
  // range(omega minus column i) = Q0 * range(R0 minus column i), whose
  // orthogonal complement in R^m is spanned by R0^-T e_i.
  const Vector d = solve_transposed_upper(f.omega_r, Vector::Unit(f.m, i));
  return d / d.norm();
}

EstimateReport xtrace_full(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                           RotationStrategy& strategy, Rng& rng, const XTraceFullOptions& options) {
  require_block(op, omega, 2, "xtrace_full");
  const Index m = omega.cols();
  if (options.k < 1) throw InvalidInput("xtrace_full: k must be at least 1");
  if (2 * m > op.dim()) throw InvalidInput("xtrace_full: needs 2m <= N");
  if (strategy.dim() != m) throw InvalidInput("xtrace_full: rotation dimension differs from m");

  const auto before = op.matvec_count();
  const Matrix y = op.apply(omega);

  KrylovFactors f;
  try {
    f = factors_from(op, omega, y);
  } catch (const RankDeficient&) {
    EstimateReport report = naive_from(op, omega, y, true);
    report.fell_back = true;
    report.matvecs_used = op.matvec_count() - before;
    return report;
  }

  const double coefficient =
      options.override_coefficient ? options.residual_coefficient : default_coefficient(f);
  EstimateReport report;
  report.samples.reserve(static_cast<std::size_t>(m * options.k));
  for (Index j = 0; j < options.k; ++j) {
    if (strategy.kind() == RotationKind::IidUnitVectors) {
      for (Index i = 0; i < m; ++i) {
        report.samples.push_back(loo_full_from_factors(f, strategy.next_rotation(rng).col(0), coefficient));
      }
      continue;
    }
    const bool unrotated =
        strategy.kind() == RotationKind::IdentityFirstHaar && strategy.calls() == 0;
    const Matrix rotation = strategy.next_rotation(rng);
    for (Index i = 0; i < m; ++i) {
      const Vector u = unrotated ? omega_column_direction(f, i) : Vector(rotation.col(i));
      report.samples.push_back(loo_full_from_factors(f, u, coefficient));
    }
  }
  report.estimate = mean_of(report.samples);
  report.matvecs_used = op.matvec_count() - before;
  return report;
}

EstimateReport xtrace_full(MatFreeOperator& op, Index m, Index k, RotationKind strategy,
                           std::uint64_t seed) {
  Rng rng(seed);
  const Matrix omega = sample_gaussian(rng, op.dim(), m);
  RotationStrategy rotations(strategy, m);
  Rng rotation_rng(derive_seed(seed, 1));
  XTraceFullOptions options;
  options.k = k;
  EstimateReport report = xtrace_full(op, omega, rotations, rotation_rng, options);
  report.seed = seed;
  return report;
}

bool check_last_column_dependence(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                                  const Eigen::Ref<const Matrix>& u1,
                                  const Eigen::Ref<const Matrix>& u2) {
  const Index m = omega.cols();
  if (u1.rows() != m || u1.cols() != m || u2.rows() != m || u2.cols() != m) {
    throw InvalidInput("check_last_column_dependence: rotations must be m x m");
  }
  const auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-10 * std::max(std::abs(a), std::abs(b));
  };
  const Matrix a = omega * u1;
  const Matrix b = omega * u2;
  return close(leave_one_out(op, a), leave_one_out(op, b)) &&
         close(leave_one_out_full(op, a), leave_one_out_full(op, b));
}

}  // namespace xtrace
