#pragma once

#include <stdexcept>
#include <string>

namespace gasc {

// Bad or missing input: unreadable files, malformed records, inconsistent
// dimensions. Maps to CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values appeared in the sampler state or log joint. Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation could not produce any score (e.g. every expert sense is NA).
// Exit code 3.
class DegenerateEvaluation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gasc
