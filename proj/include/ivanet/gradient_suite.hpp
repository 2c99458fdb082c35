#pragma once

#include <string>
#include <vector>

#include "ivanet/grad_check.hpp"
#include "ivanet/rng.hpp"

namespace ivanet {

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0;
};

/// Finite-difference checks (eps 1e-5) over every differentiable primitive and
/// every composite stage of the network, on small random problems.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed = 7);

Tensor random_tensor(const Shape& shape, SplitMix64& rng, double scale = 1.0);

}  // namespace ivanet
