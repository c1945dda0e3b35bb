#pragma once

#include <cstdint>
#include <vector>

#include "xtrace/kernels.hpp"
#include "xtrace/matfree.hpp"

namespace xtrace {

struct EstimateReport {
  double estimate = 0.0;
  std::vector<double> samples;  // per leave-one-out (or per column) values
  std::int64_t matvecs_used = 0;
  std::uint64_t seed = 0;
  bool fell_back = false;  // efficient path hit a rank-deficient Krylov block
};

/// (1/m) sum_i w_i^T A w_i. Uses m matvecs.
EstimateReport girard_hutchinson(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// (N/m) tr(Q^T A Q) with Q an orthonormal basis of range(omega). Uses m matvecs.
EstimateReport projected_gh(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// Deflates with an orthonormal basis of A*omega minus its last column and
/// estimates the remainder with the normalized last column.
double leave_one_out(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// Same as leave_one_out but the deflation basis also contains the first
/// m-1 test vectors themselves. Requires 2(m-1) < N.
double leave_one_out_full(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// XTrace: average of leave_one_out over every choice of held-out column.
/// All products are taken from A applied to an orthonormal basis of
/// [omega, A omega], so at most 2m matvecs are used.
EstimateReport xtrace_naive(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// XTraceFull: average of leave_one_out_full over every held-out column.
EstimateReport xtrace_full_naive(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// Cached factorization of the degree-two Krylov block.
///
/// With [omega, A omega] = [Q0 Q1] [[R0, M], [0, R1]], the stored R is the
/// factor of [Q0, A Q0], i.e. [[I, M R0^-1], [0, R1 R0^-1]], and H = Q^T A Q.
/// The first m columns of H are read off R; the rest cost m matvecs.
struct KrylovFactors {
  Matrix Q;        // N x 2m
  Matrix R;        // 2m x 2m
  Matrix H;        // 2m x 2m
  Matrix omega_r;  // R0, the triangular factor of omega itself
  Index n = 0;
  Index m = 0;
  double trace_h = 0.0;
};

KrylovFactors build_krylov_factors(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega);

/// leave_one_out_full(op, Q0 [U_perp, u]) in closed form from the cached
/// factors; u is a unit m-vector in the coordinates of Q0. No matvecs.
double loo_full_from_factors(const KrylovFactors& f, const Eigen::Ref<const Vector>& u);

/// As above with an explicit coefficient on the held-out quadratic form in
/// place of N - 2m + 1.
double loo_full_from_factors(const KrylovFactors& f, const Eigen::Ref<const Vector>& u,
                             double residual_coefficient);

/// Held-out direction (in Q0 coordinates) that reproduces leaving out
/// column i of the original omega rather than of Q0.
Vector omega_column_direction(const KrylovFactors& f, Index i);

struct XTraceFullOptions {
  Index k = 1;
  // Replaces N - 2m + 1 when set; only used to exercise the checks.
  bool override_coefficient = false;
  double residual_coefficient = 0.0;
};

/// Efficient XTraceFull with resampling over k rotations.
///
/// Rotation j contributes m held-out directions. For IdentityFirstHaar the
/// first rotation is omega itself (so k = 1 reproduces xtrace_full_naive),
/// and later ones are Haar rotations of the orthonormal basis Q0. The other
/// strategies rotate Q0 from the start. The matvec cost does not depend on k.
///
/// If the Krylov block is rank deficient the naive algorithm is run on the
/// same omega instead and fell_back is set.
EstimateReport xtrace_full(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                           RotationStrategy& strategy, Rng& rng,
                           const XTraceFullOptions& options = {});

/// Draws omega from `seed` and runs the efficient estimator on it.
EstimateReport xtrace_full(MatFreeOperator& op, Index m, Index k, RotationKind strategy,
                           std::uint64_t seed);

/// True iff both leave-one-out variants agree (to 1e-10 relative) on
/// omega*U1 and omega*U2.
bool check_last_column_dependence(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                                  const Eigen::Ref<const Matrix>& u1,
                                  const Eigen::Ref<const Matrix>& u2);

}  // namespace xtrace
