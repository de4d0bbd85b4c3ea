#include "glu_ntk/stats.hpp"

#include <cmath>
#include <numeric>

#include "glu_ntk/errors.hpp"
#include "glu_ntk/rng.hpp"

namespace glu_ntk {

namespace {

double dist(const Point2& p, const Point2& q) {
    const double dx = p[0] - q[0], dy = p[1] - q[1];
    return std::sqrt(dx * dx + dy * dy);
}

void require_nonempty(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (a.empty() || b.empty()) throw ArgumentError("energy distance needs two nonempty samples");
}

// Energy statistic over a pooled distance matrix, group a = idx[0..na), b = rest.
double pooled_energy(const std::vector<double>& dm, std::size_t total, const std::vector<std::size_t>& idx,
                     std::size_t na) {
    const std::size_t nb = total - na;
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        const double* row = dm.data() + idx[i] * total;
        for (std::size_t j = 0; j < total; ++j) {
            const double v = row[idx[j]];
            if (i < na && j < na) {
                aa += v;
            } else if (i >= na && j >= na) {
                bb += v;
            } else if (i < na) {
                ab += v;
            }
        }
    }
    const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
    return 2.0 * ab / (fa * fb) - aa / (fa * fa) - bb / (fb * fb);
}

}  // namespace

double energy_distance(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    require_nonempty(a, b);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (const auto& p : a)
        for (const auto& q : b) ab += dist(p, q);
    for (const auto& p : a)
        for (const auto& q : a) aa += dist(p, q);
    for (const auto& p : b)
        for (const auto& q : b) bb += dist(p, q);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    return 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
}

double permutation_test(const std::vector<Point2>& a, const std::vector<Point2>& b, int num_perms,
                        std::uint64_t seed) {
    require_nonempty(a, b);
    if (num_perms < 100) throw ArgumentError("permutation_test: num_perms must be >= 100");
    std::vector<Point2> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t total = pooled.size();
    std::vector<double> dm(total * total);
    for (std::size_t i = 0; i < total; ++i)
        for (std::size_t j = 0; j < total; ++j) dm[i * total + j] = dist(pooled[i], pooled[j]);

    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const double observed = pooled_energy(dm, total, idx, a.size());
    // Equal statistics can differ in the last bits depending on summation
    // order, so compare with a relative slack.
    const double slack = 1e-12 * std::abs(observed);
    Rng rng(seed);
    int exceed = 0;
    for (int r = 0; r < num_perms; ++r) {
        for (std::size_t i = total - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
        if (pooled_energy(dm, total, idx, a.size()) >= observed - slack) ++exceed;
    }
    return (1.0 + exceed) / (num_perms + 1.0);
}

}  // namespace glu_ntk
