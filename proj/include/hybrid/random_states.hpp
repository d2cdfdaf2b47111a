#pragma once

#include <cstdint>
#include <random>

#include "hybrid/grid.hpp"

namespace hybrid {

/// Correlated Gaussian density with smooth bounded distortions of ln P and a
/// random quadratic-plus-wave action. Widths and means are chosen so the
/// density has decayed by at least 7 standard deviations at every edge.
HybridState random_smooth_state(const GridSpec& g, std::mt19937_64& rng);

/// Product of independent random q and x factors, each with its own phase.
HybridState random_product_state(const GridSpec& g, std::mt19937_64& rng);

/// Default grid for randomised identity sweeps.
GridSpec sweep_grid(int n = 128);

}  // namespace hybrid
