#pragma once

// Finite-difference gradient suites on tiny configurations: the field
// parameters, the decoder parameters, and the encoder parameters through a
// two-step inner loop with second-order terms.

#include <cstdint>
#include <string>
#include <vector>

#include "enf/autodiff.hpp"

namespace enf {

struct GradSuite {
    std::string name;
    double tol = 0.0;
    ad::FdReport report;
};

std::vector<GradSuite> run_gradient_suites(std::uint64_t seed);

}  // namespace enf
