#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "xtrace/estimators.hpp"

namespace xtrace {

enum class EstimatorKind { Gh, ProjectedGh, XTrace, XTraceFull, XTraceFullResampled };

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator(std::string_view name);

inline constexpr EstimatorKind kAllEstimators[] = {
    EstimatorKind::Gh, EstimatorKind::ProjectedGh, EstimatorKind::XTrace, EstimatorKind::XTraceFull,
    EstimatorKind::XTraceFullResampled};

struct BenchConfig {
  SpectrumSpec spectrum;
  std::vector<Index> m_values;
  Index trials = 1000;
  Index resample_k = 25;
  std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
  std::uint64_t base_seed = 0;
  RotationKind rotation = RotationKind::IdentityFirstHaar;
  // Diagnostic: keep the spectrum's name and N but run on the identity.
  bool identity_override = false;

  void validate() const;
};

struct BenchRow {
  std::string spectrum;
  Index n = 0;
  Index m = 0;
  Index matvecs = 0;
  std::string estimator;
  Index k = 1;
  Index trials = 0;
  double rms_rel_err = 0.0;
  double mean_estimate = 0.0;
  double std_error = 0.0;

  // Not written to CSV.
  double exact_trace = 0.0;
  Index failures = 0;
  double rms_rel_se = 0.0;  // relative standard error of rms_rel_err (delta method)
  Index fallbacks = 0;      // trials where xtrace-full took the naive path
};

/// Seed of trial `index`; a trial can be replayed on its own from it.
std::uint64_t trial_seed(std::uint64_t base_seed, Index index) noexcept;

/// One trial: every requested estimator on the same omega drawn from `seed`.
/// Failed estimators are reported as NaN.
std::vector<double> run_trial(MatFreeOperator& op, Index m, const BenchConfig& cfg,
                              std::uint64_t seed, std::vector<bool>* fell_back = nullptr);

/// Runs every (m, estimator) cell of the configuration. Rows come back
/// sorted by (spectrum, estimator, m).
std::vector<BenchRow> run_benchmark(const BenchConfig& cfg);

/// Loggable sanity gate: mean estimate within 5 standard errors of the truth.
bool mean_is_plausible(const BenchRow& row);

inline constexpr std::string_view kCsvHeader =
    "spectrum,N,m,matvecs,estimator,k,trials,rms_rel_err,mean_estimate,std_error";

void write_csv(const std::vector<BenchRow>& rows, std::ostream& out);
void write_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

struct SweepPoint {
  double theta = 0.0;
  double xtrace = 0.0;
  double xtrace_full = 0.0;
};

/// diag(5, 4, 3, 2, 1)
MatFreeOperator fig1_operator();
/// Columns e_1 and (0, 1/2, 1/2, 1/2, 1/2).
Matrix fig1_test_vectors();
/// `points` equispaced angles covering [0, pi/2].
std::vector<double> fig1_theta_grid(Index points = 65);

/// Both naive estimators on omega * [[cos t, -sin t], [sin t, cos t]].
std::vector<SweepPoint> rotation_sweep(MatFreeOperator& op, const Eigen::Ref<const Matrix>& omega,
                                       const std::vector<double>& thetas);

void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out);

struct MeanWithError {
  double mean = 0.0;
  double std_error = 0.0;
};

struct ConditionalMcReport {
  Index samples = 0;
  MeanWithError gh;           // girard_hutchinson(Q U R)
  double projected_gh = 0.0;  // (N/m) tr(Q^T A Q)
  MeanWithError xtrace_full;  // xtrace_full_naive(Q U R)
  MeanWithError loo_haar_u;   // loo_full_from_factors over Haar u

  // |difference| / standard error of the difference
  double gh_z() const;
  double xtrace_full_z() const;
};

/// Monte-Carlo comparison for a fixed orthonormal Q: omega = Q U R with U
/// Haar and R distributed as the triangular factor of a Gaussian block.
ConditionalMcReport conditional_mc_check(MatFreeOperator& op, const Eigen::Ref<const Matrix>& q,
                                         Index samples, std::uint64_t seed);

struct CorrelationReport {
  bool applicable = false;
  Index trials_used = 0;
  double within = 0.0;  // mean per-trial correlation of samples sharing a rotation
  double within_half_width = 0.0;
  double across = 0.0;  // same for samples from different rotations
  double across_half_width = 0.0;
};

/// Correlation of the per-direction estimates of xtrace_full around their
/// trial mean, within one Haar rotation versus across rotations. Half widths
/// are 95% normal intervals over trials. Diagnostic only.
CorrelationReport resampling_correlation(MatFreeOperator& op, Index m, Index k, Index trials,
                                         std::uint64_t seed);

}  // namespace xtrace
