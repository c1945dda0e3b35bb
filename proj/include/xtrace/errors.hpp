#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xtrace {

// Base for every failure raised by the library. The CLI maps InvalidSpec and
// InvalidInput to usage errors and everything else to numerical failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  RankDeficient(std::size_t index, const std::string& what)
      : Error(what + " (column " + std::to_string(index) + ")"), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class SingularFactor : public Error {
 public:
  using Error::Error;
};

class DegeneratePair : public Error {
 public:
  using Error::Error;
};

class DegenerateResidual : public Error {
 public:
  using Error::Error;
};

class BasisSaturation : public Error {
 public:
  using Error::Error;
};

}  // namespace xtrace
