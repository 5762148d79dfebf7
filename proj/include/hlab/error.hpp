#pragma once

#include <stdexcept>
#include <string>

namespace hlab {

/// Broad failure classes. The CLI maps each class onto a process exit code.
enum class ErrorClass {
  validation,    // malformed input, bad configuration, unresolved modes
  precondition,  // mathematically meaningless request (non-exact field, fixed points, ...)
  tolerance,     // a verification ran but missed its tolerance
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorClass::validation, what) {}
};

/// A Fourier mode does not fit below the grid's Nyquist margin.
struct ResolutionError : ValidationError {
  using ValidationError::ValidationError;
};

/// Two fields live on different grids.
struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};

/// Point outside the surface domain a Hamiltonian lives on.
struct DomainError : ValidationError {
  using ValidationError::ValidationError;
};

/// Plug geometry incompatible with the field it is inserted into.
struct StructuralError : ValidationError {
  using ValidationError::ValidationError;
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error(ErrorClass::precondition, what) {}
};

struct NotHamiltonianError : PreconditionError {
  using PreconditionError::PreconditionError;
};

struct NonExactError : PreconditionError {
  NonExactError(const std::string& what, double p1, double p2, double p3)
      : PreconditionError(what), periods{p1, p2, p3} {}
  double periods[3];
};

struct FixedPointError : PreconditionError {
  using PreconditionError::PreconditionError;
};

struct LiftAmbiguityError : PreconditionError {
  using PreconditionError::PreconditionError;
};

struct CurvesTooCloseError : PreconditionError {
  using PreconditionError::PreconditionError;
};

struct ToleranceError : Error {
  explicit ToleranceError(const std::string& what) : Error(ErrorClass::tolerance, what) {}
};

}  // namespace hlab
