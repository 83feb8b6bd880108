#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dylab {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A rotation number turned out to be rational (its quotient stream ended).
class RationalityError : public Error {
 public:
  explicit RationalityError(std::size_t terminated_at)
      : Error("rotation number is rational: quotient stream terminates after index " +
              std::to_string(terminated_at)),
        terminated_at_(terminated_at) {}
  std::size_t terminated_at() const { return terminated_at_; }

 private:
  std::size_t terminated_at_;
};

/// The requested precision cannot be certified past `last_trusted`.
class PrecisionError : public Error {
 public:
  PrecisionError(const std::string& what, std::size_t last_trusted)
      : Error(what + " (last trustworthy index " + std::to_string(last_trusted) + ")"),
        last_trusted_(last_trusted) {}
  std::size_t last_trusted() const { return last_trusted_; }

 private:
  std::size_t last_trusted_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, double lo, double hi)
      : Error(what + " [best bracket " + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
        lo_(lo),
        hi_(hi) {}
  double lower() const { return lo_; }
  double upper() const { return hi_; }

 private:
  double lo_, hi_;
};

/// m_n changed sign on a sample grid: the lift's rotation number is not the
/// one it was paired with.
class RotationMismatchError : public Error {
 public:
  using Error::Error;
};

class RefinementError : public Error {
 public:
  RefinementError(const std::string& what, double previous, double last)
      : Error(what + " (last estimates " + std::to_string(previous) + ", " +
              std::to_string(last) + ")"),
        previous_(previous),
        last_(last) {}
  double previous() const { return previous_; }
  double last() const { return last_; }

 private:
  double previous_, last_;
};

class CombinatoricsError : public Error {
 public:
  using Error::Error;
};

/// log Dg is not univalued on the band (Re Dg <= 0 somewhere).
class BranchError : public Error {
 public:
  using Error::Error;
};

class BandEscapeError : public Error {
 public:
  BandEscapeError(const std::string& what, std::size_t index)
      : Error(what + " at iterate " + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// A measured premise of an asymptotic statement does not hold.
class GateError : public Error {
 public:
  using Error::Error;
};

class InverseError : public Error {
 public:
  using Error::Error;
};

class LeafEscapeError : public Error {
 public:
  LeafEscapeError(const std::string& what, double theta)
      : Error(what + " at theta=" + std::to_string(theta)), theta_(theta) {}
  double theta() const { return theta_; }

 private:
  double theta_;
};

class StiffnessError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace dylab
