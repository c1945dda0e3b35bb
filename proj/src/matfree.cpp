#include "xtrace/matfree.hpp"

#include <cmath>
#include <utility>

#include "xtrace/errors.hpp"

namespace xtrace {

MatFreeOperator::MatFreeOperator(Index dim, ApplyFn apply)
    : dim_(dim), apply_(std::make_shared<const ApplyFn>(std::move(apply))) {
  if (dim_ <= 0) throw InvalidInput("operator dimension must be positive");
}

Matrix MatFreeOperator::apply(const Eigen::Ref<const Matrix>& block) {
  if (block.rows() != dim_) {
    throw InvalidInput("block has " + std::to_string(block.rows()) +
                       " rows, operator dimension is " + std::to_string(dim_));
  }
  count_ += block.cols();
  return (*apply_)(block);
}

MatFreeOperator MatFreeOperator::fork() const {
  MatFreeOperator copy = *this;
  copy.count_ = 0;
  return copy;
}

std::string_view to_string(SpectrumFamily family) {
  switch (family) {
    case SpectrumFamily::Flat: return "flat";
    case SpectrumFamily::Poly: return "poly";
    case SpectrumFamily::InvPoly: return "inv-poly";
    case SpectrumFamily::Exp: return "exp";
    case SpectrumFamily::Step: return "step";
    case SpectrumFamily::StepDecay: return "step-decay";
  }
  return "unknown";
}

SpectrumFamily parse_family(std::string_view name) {
  for (auto family : kAllFamilies) {
    if (to_string(family) == name) return family;
  }
  throw InvalidSpec("unknown spectrum family '" + std::string(name) + "'");
}

SpectrumSpec SpectrumSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw InvalidSpec("spectrum must look like family:N, got '" + std::string(text) + "'");
  }
  SpectrumSpec spec;
  spec.family = parse_family(text.substr(0, colon));
  const std::string digits(text.substr(colon + 1));
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(digits, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != digits.size()) {
    throw InvalidSpec("bad dimension in spectrum '" + std::string(text) + "'");
  }
  spec.dim = static_cast<Index>(n);
  spec.validate();
  return spec;
}

void SpectrumSpec::validate() const {
  if (dim <= 0) throw InvalidSpec("spectrum dimension must be positive");
  const bool stepped = family == SpectrumFamily::Step || family == SpectrumFamily::StepDecay;
  if (stepped && dim <= kStepPlateau) {
    throw InvalidSpec(name() + " requires N > " + std::to_string(kStepPlateau) + ", got " +
                      std::to_string(dim));
  }
}

Vector make_spectrum(const SpectrumSpec& spec) {
  spec.validate();
  const Index n = spec.dim;
  Vector lambda(n);
  for (Index k = 0; k < n; ++k) {
    const double i = static_cast<double>(k + 1);
    switch (spec.family) {
      case SpectrumFamily::Flat:
        lambda[k] = n == 1 ? 3.0 : 3.0 - 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
        break;
      case SpectrumFamily::Poly: lambda[k] = 1.0 / (i * i); break;
      case SpectrumFamily::InvPoly: lambda[k] = 2.0 - 1.0 / (i * i); break;
      case SpectrumFamily::Exp: lambda[k] = std::pow(0.7, static_cast<double>(k)); break;
      case SpectrumFamily::Step: lambda[k] = k < kStepPlateau ? 1.0 : kStepLevel; break;
      case SpectrumFamily::StepDecay: lambda[k] = k < kStepPlateau ? 1.0 : 1.0 / (i * i); break;
    }
  }
  return lambda;
}

double exact_trace(const Eigen::Ref<const Vector>& eigenvalues) {
  double sum = 0.0;
  double carry = 0.0;
  for (Index k = 0; k < eigenvalues.size(); ++k) {
    const double x = eigenvalues[k];
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

MatFreeOperator make_diagonal_operator(Vector eigenvalues) {
  if (eigenvalues.size() == 0) throw InvalidInput("diagonal operator needs eigenvalues");
  const Index n = eigenvalues.size();
  return MatFreeOperator(n, [d = std::move(eigenvalues)](const Eigen::Ref<const Matrix>& x) {
    return Matrix(d.asDiagonal() * x);
  });
}

MatFreeOperator make_dense_operator(Matrix m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidInput("dense operator must be square and nonempty");
  }
  const Index n = m.rows();
  return MatFreeOperator(n, [a = std::move(m)](const Eigen::Ref<const Matrix>& x) {
    return Matrix(a * x);
  });
}

}  // namespace xtrace
