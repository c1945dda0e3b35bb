#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "xtrace/matfree.hpp"

namespace xtrace {

using Rng = std::mt19937_64;

/// Relative rank tolerance shared by every rank decision in the library:
/// a direction is dropped (or a factor declared deficient) when its norm
/// falls below this fraction of the largest input column norm.
inline constexpr double kRankTolerance = 1e-12;

/// SplitMix64-style mix of a parent seed and a stream index. Used to give
/// every trial and every sub-task its own reproducible generator.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;

struct QRFactors {
  Matrix Q;  // N x p, orthonormal columns
  Matrix R;  // p x p, upper triangular, positive diagonal
};

/// Householder economy QR with the R-diagonal made positive.
/// Throws RankDeficient when some |R_ii| <= kRankTolerance * max column norm.
QRFactors economy_qr(const Eigen::Ref<const Matrix>& m);

/// Solves R^T X = B for upper-triangular R.
Matrix solve_transposed_upper(const Eigen::Ref<const Matrix>& r, const Eigen::Ref<const Matrix>& b);

struct QLPair {
  Matrix S;           // p x 2, orthonormal columns
  Eigen::Matrix2d L;  // lower triangular, S_in = S * L
};

/// Orthonormalizes a pair of columns starting from the second one, so the
/// triangular factor comes out lower triangular.
QLPair ql_orthonormalize_pair(const Eigen::Ref<const Matrix>& s);

/// Orthonormal basis for the part of range(m) orthogonal to range(q), built
/// by Gram-Schmidt with one reorthogonalization pass. Columns whose residual
/// norm is at most abs_tol are dropped, so the result may have fewer columns.
Matrix extend_orthonormal_basis(const Eigen::Ref<const Matrix>& q,
                                const Eigen::Ref<const Matrix>& m, double abs_tol);

/// Rank-revealing orthonormal basis of range(m): left singular vectors whose
/// singular value exceeds kRankTolerance times the largest.
Matrix orthonormal_basis(const Eigen::Ref<const Matrix>& m);

double max_column_norm(const Eigen::Ref<const Matrix>& m);

Matrix sample_gaussian(Rng& rng, Index rows, Index cols);
Vector sample_unit_vector(Rng& rng, Index m);
Matrix sample_haar_orthogonal(Rng& rng, Index m);

/// Upper-triangular factor of a Gaussian N x m block: R_ii^2 ~ chi^2(N-i+1)
/// and standard normal entries above the diagonal.
Matrix sample_gaussian_r_factor(Rng& rng, Index n, Index m);

enum class RotationKind { IdentityFirstHaar, IidUnitVectors, KacWalk };

std::string_view to_string(RotationKind kind);
RotationKind parse_rotation_kind(std::string_view name);

/// Source of rotations for resampling. Matrix kinds emit m x m orthogonal
/// blocks; IidUnitVectors emits a single m x 1 unit vector per call.
class RotationStrategy {
 public:
  explicit RotationStrategy(RotationKind kind, Index m, Index kac_steps = -1);

  RotationKind kind() const noexcept { return kind_; }
  Index dim() const noexcept { return m_; }
  Index kac_steps() const noexcept { return kac_steps_; }
  std::int64_t calls() const noexcept { return calls_; }

  Matrix next_rotation(Rng& rng);

 private:
  RotationKind kind_;
  Index m_;
  Index kac_steps_;  // Givens rotations per emitted Kac state, m^2 by default
  std::int64_t calls_ = 0;
  Matrix state_;
};

}  // namespace xtrace
