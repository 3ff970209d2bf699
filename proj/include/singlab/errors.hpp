#pragma once

#include <stdexcept>
#include <string>

namespace singlab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error {
  using Error::Error;
};

struct NonConvergence : Error {
  using Error::Error;
};

struct NonFinite : Error {
  using Error::Error;
};

struct DivergentIntegrand : Error {
  using Error::Error;
};

struct Inconclusive : Error {
  using Error::Error;
};

struct SingularSystem : Error {
  using Error::Error;
};

struct RecipeUnavailable : Error {
  using Error::Error;
};

struct WindowTooSmall : Error {
  using Error::Error;
};

struct MonotonicityViolation : Error {
  MonotonicityViolation(const std::string& what, int iteration, int nodes)
      : Error(what), iteration(iteration), nodes(nodes) {}
  int iteration;
  int nodes;
};

}  // namespace singlab
