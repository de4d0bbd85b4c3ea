#pragma once

#include <cstdint>
#include <vector>

#include "glu_ntk/core.hpp"

namespace glu_ntk {


// Two-sample energy statistic (V-statistic over all ordered pairs):
// 2 mean|a-b| - mean|a-a'| - mean|b-b'|.
double energy_distance(const std::vector<Point2>& a, const std::vector<Point2>& b);

// Permutation test on the energy statistic. Labels are reshuffled with a
// Fisher-Yates pass driven by Rng(seed); p = (1 + #{perm >= observed}) / (num_perms + 1).
double permutation_test(const std::vector<Point2>& a, const std::vector<Point2>& b, int num_perms,
                        std::uint64_t seed);

}  // namespace glu_ntk
