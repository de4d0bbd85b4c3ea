#pragma once

#include <cstdint>
#include <random>

namespace glu_ntk {

// Seeded stream used for every random draw in the project.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Uniforms take the top 53 bits of one engine output. Normals use
// the Marsaglia polar method: draw u, v uniform on (-1, 1) until
// 0 < s = u^2 + v^2 < 1, return u*f and cache v*f with f = sqrt(-2 ln s / s).
// Nothing here goes through std::*_distribution, so streams are identical
// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal();

    // Uniform integer in [0, bound) by rejection, bound >= 1.
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace glu_ntk
