#pragma once

#include <stdexcept>
#include <string>

namespace athero {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or configuration value is invalid.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A pointwise evaluation left its valid domain (near-zero denominator,
/// occluded vessel).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be solved reliably.
class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, double rcond)
      : Error(what + " (reciprocal condition estimate " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

/// An iterative method hit its iteration cap.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, int iterations, double last_delta)
      : Error(what + " after " + std::to_string(iterations) + " iterations (last delta " +
              std::to_string(last_delta) + ")"),
        iterations_(iterations),
        last_delta_(last_delta) {}
  int iterations() const { return iterations_; }
  double last_delta() const { return last_delta_; }

 private:
  int iterations_;
  double last_delta_;
};

/// Time integration produced a non-finite or exploding state.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, double t)
      : Error(what + " at t=" + std::to_string(t)), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

}  // namespace athero
