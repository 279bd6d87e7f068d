#pragma once

#include <functional>
#include <vector>

namespace stereotrap {

struct NelderMeadOptions {
  double initial_step = 0.1;
  double tolerance = 1e-9;
  int max_iterations = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Derivative-free simplex minimisation with the standard reflection (1),
// expansion (2), contraction (0.5) and shrink (0.5) coefficients. Converged
// once both the spread of function values and the simplex extent fall below
// tolerance * (1 + scale).
NelderMeadResult NelderMead(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace stereotrap
