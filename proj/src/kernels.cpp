#include "xtrace/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "xtrace/errors.hpp"

namespace xtrace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(parent) ^ splitmix64(~index));
}

double max_column_norm(const Eigen::Ref<const Matrix>& m) {
  if (m.cols() == 0) return 0.0;
  return m.colwise().norm().maxCoeff();
}

QRFactors economy_qr(const Eigen::Ref<const Matrix>& m) {
  const Index n = m.rows();
  const Index p = m.cols();
  if (p == 0 || n < p) {
    throw InvalidInput("economy_qr needs N >= p >= 1, got " + std::to_string(n) + "x" +
                       std::to_string(p));
  }
  const Eigen::HouseholderQR<Matrix> qr(m);
  QRFactors f;
  f.R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  f.Q = qr.householderQ() * Matrix::Identity(n, p);

  const double tol = kRankTolerance * max_column_norm(m);
  for (Index i = 0; i < p; ++i) {
    if (std::abs(f.R(i, i)) <= tol) {
      throw RankDeficient(static_cast<std::size_t>(i), "economy_qr: numerically rank deficient");
    }
    if (f.R(i, i) < 0.0) {
      f.R.row(i) *= -1.0;
      f.Q.col(i) *= -1.0;
    }
  }
  return f;
}

Matrix solve_transposed_upper(const Eigen::Ref<const Matrix>& r, const Eigen::Ref<const Matrix>& b) {
  if (r.rows() != r.cols() || b.rows() != r.rows()) {
    throw InvalidInput("solve_transposed_upper: shape mismatch");
  }
  for (Index i = 0; i < r.rows(); ++i) {
    if (r(i, i) == 0.0 || !std::isfinite(r(i, i))) {
      throw SingularFactor("solve_transposed_upper: zero pivot at " + std::to_string(i));
    }
  }
  return r.triangularView<Eigen::Upper>().transpose().solve(b);
}

QLPair ql_orthonormalize_pair(const Eigen::Ref<const Matrix>& s) {
  if (s.cols() != 2) throw InvalidInput("ql_orthonormalize_pair expects two columns");
  const double tol = kRankTolerance * s.norm();

  QLPair out;
  out.S.resize(s.rows(), 2);
  out.L.setZero();

  const double n2 = s.col(1).norm();
  if (n2 <= tol || n2 == 0.0) throw DegeneratePair("ql_orthonormalize_pair: second column vanishes");
  out.S.col(1) = s.col(1) / n2;
  out.L(1, 1) = n2;

  Vector r = s.col(0);
  double c = out.S.col(1).dot(r);
  r -= c * out.S.col(1);
  const double c2 = out.S.col(1).dot(r);
  r -= c2 * out.S.col(1);
  c += c2;

  const double n1 = r.norm();
  if (n1 <= tol || n1 == 0.0) throw DegeneratePair("ql_orthonormalize_pair: columns are parallel");
  out.S.col(0) = r / n1;
  out.L(0, 0) = n1;
  out.L(1, 0) = c;
  return out;
}

Matrix extend_orthonormal_basis(const Eigen::Ref<const Matrix>& q,
                                const Eigen::Ref<const Matrix>& m, double abs_tol) {
  const Index n = m.rows();
  if (q.cols() > 0 && q.rows() != n) throw InvalidInput("extend_orthonormal_basis: row mismatch");
  Matrix basis(n, m.cols());
  Index kept = 0;
  Vector v(n);
  for (Index j = 0; j < m.cols(); ++j) {
    v = m.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      if (q.cols() > 0) v -= q * (q.transpose() * v);
      if (kept > 0) {
        const auto b = basis.leftCols(kept);
        v -= b * (b.transpose() * v);
      }
    }
    const double norm = v.norm();
    if (norm > abs_tol && norm > 0.0) basis.col(kept++) = v / norm;
  }
  return basis.leftCols(kept);
}

// Thin SVD rather than Gram-Schmidt: when a block is exactly rank deficient,
// Gram-Schmidt can amplify roundoff in the dependent columns past any fixed
// threshold, while the singular values keep a clean gap.
Matrix orthonormal_basis(const Eigen::Ref<const Matrix>& m) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  const Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const double tol = kRankTolerance * sv[0];
  Index rank = 0;
  while (rank < sv.size() && sv[rank] > tol && sv[rank] > 0.0) ++rank;
  return svd.matrixU().leftCols(rank);
}

Matrix sample_gaussian(Rng& rng, Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw InvalidInput("sample_gaussian needs positive dimensions");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // Column-major fill so a wider block extends a narrower one.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

Vector sample_unit_vector(Rng& rng, Index m) {
  for (;;) {
    Vector v = sample_gaussian(rng, m, 1).col(0);
    const double norm = v.norm();
    if (norm > 0.0) return v / norm;
  }
}

Matrix sample_haar_orthogonal(Rng& rng, Index m) {
  for (;;) {
    try {
      return economy_qr(sample_gaussian(rng, m, m)).Q;
    } catch (const RankDeficient&) {
      // measure-zero event; draw again
    }
  }
}

Matrix sample_gaussian_r_factor(Rng& rng, Index n, Index m) {
  if (m < 1 || n < m) throw InvalidInput("sample_gaussian_r_factor needs N >= m >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix r = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    std::chi_squared_distribution<double> chi2(static_cast<double>(n - i));
    r(i, i) = std::sqrt(chi2(rng));
    for (Index j = i + 1; j < m; ++j) r(i, j) = normal(rng);
  }
  return r;
}

std::string_view to_string(RotationKind kind) {
  switch (kind) {
    case RotationKind::IdentityFirstHaar: return "identity-first-haar";
    case RotationKind::IidUnitVectors: return "iid-unit-vectors";
    case RotationKind::KacWalk: return "kac-walk";
  }
  return "unknown";
}

RotationKind parse_rotation_kind(std::string_view name) {
  for (auto kind : {RotationKind::IdentityFirstHaar, RotationKind::IidUnitVectors,
                    RotationKind::KacWalk}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidSpec("unknown rotation strategy '" + std::string(name) + "'");
}

RotationStrategy::RotationStrategy(RotationKind kind, Index m, Index kac_steps)
    : kind_(kind), m_(m), kac_steps_(kac_steps < 0 ? m * m : kac_steps) {
  if (m_ < 1) throw InvalidInput("rotation dimension must be positive");
  if (kind_ == RotationKind::KacWalk) state_ = Matrix::Identity(m_, m_);
}

Matrix RotationStrategy::next_rotation(Rng& rng) {
  const auto call = calls_++;
  switch (kind_) {
    case RotationKind::IdentityFirstHaar:
      if (call == 0) return Matrix::Identity(m_, m_);
      return sample_haar_orthogonal(rng, m_);
    case RotationKind::IidUnitVectors:
      return sample_unit_vector(rng, m_);
    case RotationKind::KacWalk: {
      if (m_ == 1) return state_;
      std::uniform_int_distribution<Index> pick(0, m_ - 1);
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      for (Index step = 0; step < kac_steps_; ++step) {
        const Index p = pick(rng);
        Index q = pick(rng);
        while (q == p) q = pick(rng);
        const double t = angle(rng);
        const double c = std::cos(t);
        const double s = std::sin(t);
        const Eigen::RowVectorXd rp = state_.row(p);
        const Eigen::RowVectorXd rq = state_.row(q);
        state_.row(p) = c * rp - s * rq;
        state_.row(q) = s * rp + c * rq;
      }
      return state_;
    }
  }
  return Matrix::Identity(m_, m_);
}

}  // namespace xtrace
