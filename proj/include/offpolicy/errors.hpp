#pragma once

#include <stdexcept>
#include <string>

namespace offpolicy {

class InvalidParameter : public std::invalid_argument {
 public:
  explicit InvalidParameter(const std::string& what) : std::invalid_argument(what) {}
};

// Base for failures of the numerics rather than of the inputs.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

class SingularSystem : public NumericalFailure {
 public:
  explicit SingularSystem(const std::string& what) : NumericalFailure(what) {}
};

class NonConvergent : public NumericalFailure {
 public:
  explicit NonConvergent(const std::string& what) : NumericalFailure(what) {}
};

class DegenerateTable : public NumericalFailure {
 public:
  explicit DegenerateTable(const std::string& what) : NumericalFailure(what) {}
};

class CoverageViolation : public InvalidParameter {
 public:
  explicit CoverageViolation(const std::string& what) : InvalidParameter(what) {}
};

}  // namespace offpolicy
