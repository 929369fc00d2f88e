// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace chirpid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or grid sizes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Wrong number of components, samples or arguments.
class ArityError : public Error {
 public:
  using Error::Error;
};

/// Input matrix lacks the structure an operation requires (e.g. Hermitian).
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Least-squares basis too ill-conditioned to trust the solution.
class DegenerateBasisError : public Error {
 public:
  using Error::Error;
};

/// Division by a zero sample in a closed-form inversion.
class DivisionError : public Error {
 public:
  using Error::Error;
};

/// The convex subproblem has no feasible point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// The conic solver stalled or hit its iteration limit.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Numerical rank of a matrix is below the requested model order.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Shift-invariance pairing failed or powers came out negative.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Extracted parameters do not explain the samples.
class ExtractionInconsistency : public Error {
 public:
  using Error::Error;
};

/// Malformed or unexpected JSON/CSV content.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace chirpid
