#pragma once

#include <stdexcept>
#include <string>

namespace scalefisher {

/// Raised when an argument lies outside the domain of an operation
/// (Hurst index outside (0,1), frequency outside (0, pi], K <= alpha, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Raised when a numerical procedure fails: Cholesky breakdown, an
/// eigenvalue that is too negative, quadrature that does not converge.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The total information of the whitened sample is too small to split it
/// into a preliminary part and an estimation part.
class InsufficientInformation : public NumericalError {
 public:
  InsufficientInformation(const std::string& what, double information)
      : NumericalError(what), information_(information) {}
  double information() const noexcept { return information_; }

 private:
  double information_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace detail
}  // namespace scalefisher
