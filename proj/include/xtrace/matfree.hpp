#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace xtrace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// A square linear map that is only reachable through block products.
///
/// Every column pushed through apply() costs one matvec. Copies share the
/// underlying map but own their counter, so concurrent trials should each
/// work on a fork() of a common operator and add up the counts afterwards.
class MatFreeOperator {
 public:
  using ApplyFn = std::function<Matrix(const Eigen::Ref<const Matrix>&)>;

  MatFreeOperator(Index dim, ApplyFn apply);

  Index dim() const noexcept { return dim_; }

  Matrix apply(const Eigen::Ref<const Matrix>& block);

  std::int64_t matvec_count() const noexcept { return count_; }
  void reset_count() noexcept { count_ = 0; }

  MatFreeOperator fork() const;

 private:
  Index dim_;
  std::shared_ptr<const ApplyFn> apply_;
  std::int64_t count_ = 0;
};

enum class SpectrumFamily { Flat, Poly, InvPoly, Exp, Step, StepDecay };

inline constexpr Index kStepPlateau = 50;
inline constexpr double kStepLevel = 1e-3;

std::string_view to_string(SpectrumFamily family);
SpectrumFamily parse_family(std::string_view name);

struct SpectrumSpec {
  SpectrumFamily family = SpectrumFamily::Flat;
  Index dim = 0;

  // Accepts "family:N", e.g. "step:1000".
  static SpectrumSpec parse(std::string_view text);

  void validate() const;
  std::string name() const { return std::string(to_string(family)); }
};

inline constexpr SpectrumFamily kAllFamilies[] = {
    SpectrumFamily::Flat, SpectrumFamily::Poly, SpectrumFamily::InvPoly,
    SpectrumFamily::Exp,  SpectrumFamily::Step, SpectrumFamily::StepDecay};

/// Eigenvalues of the synthetic test family, largest first.
///
///   flat        3 - 2(i-1)/(N-1)
///   poly        i^-2
///   inv-poly    2 - i^-2
///   exp         0.7^(i-1)
///   step        1 (50 times), then 1e-3
///   step-decay  1 (50 times), then i^-2 for i = 51..N
Vector make_spectrum(const SpectrumSpec& spec);

/// Compensated (Neumaier) sum of the eigenvalues.
double exact_trace(const Eigen::Ref<const Vector>& eigenvalues);

MatFreeOperator make_diagonal_operator(Vector eigenvalues);
MatFreeOperator make_dense_operator(Matrix m);

}  // namespace xtrace
