#include "glu_ntk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

namespace glu_ntk {

using std::numbers::pi;

SpectralSummary eig_sym(const SymMatrix& a, bool with_vectors) {
    if (!a.dense().allFinite()) throw NumericError("eig_sym: matrix has non-finite entries");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(
        a.dense(), with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("eig_sym: eigensolver did not converge");
    SpectralSummary s;
    s.eigenvalues = solver.eigenvalues();
    s.lambda_min = s.eigenvalues[0];
    s.lambda_max = s.eigenvalues[s.eigenvalues.size() - 1];
    if (with_vectors) s.eigenvectors = solver.eigenvectors();
    s.kappa = condition_number(s);
    return s;
}

std::optional<double> condition_number(const SpectralSummary& s) {
    if (s.lambda_min <= s.solver_tol * std::abs(s.lambda_max)) return std::nullopt;
    return s.lambda_max / s.lambda_min;
}

MpParams mp_edges(double c) {
    if (!(c > 0.0)) throw ArgumentError("mp_edges: c must be positive");
    const double r = std::sqrt(c);
    return {c, (1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

double mp_density(double x, double c) {
    const MpParams e = mp_edges(c);
    if (x <= e.lower || x >= e.upper || x <= 0.0) return 0.0;
    return std::sqrt((e.upper - x) * (x - e.lower)) / (2.0 * pi * c * x);
}

double bbp_lambda_max(double c, double theta) {
    if (!(c > 0.0) || !(theta > 0.0)) throw ArgumentError("bbp_lambda_max: c and theta must be positive");
    const double y = 1.0 / theta;
    const double g_edge = 1.0 / (c + std::sqrt(c));
    if (y < g_edge) return ((c - 1.0) * y - 1.0) / (y * (c * y - 1.0));
    return mp_edges(c).upper;
}

std::pair<double, double> karoui_hadamard_prediction(int n, int d) {
    if (n < 1 || d < 1) throw ArgumentError("karoui_hadamard_prediction: n and d must be >= 1");
    return {1.0 + static_cast<double>(n) / d, 1.0};
}

std::pair<double, double> hadamard_lsd_edges(int n, int d) {
    if (n < 1 || d < 1) throw ArgumentError("hadamard_lsd_edges: n and d must be >= 1");
    const double r = std::sqrt(2.0 * n) / d;
    const double lo = std::max(0.0, 1.0 - r);
    return {lo * lo, (1.0 + r) * (1.0 + r)};
}

TheoryEstimate theory_estimates(int m, int d, int n) {
    if (m < 1 || d < 1 || n < 1) throw ArgumentError("theory_estimates: m, d, n must be >= 1");
    const double M = m, D = d, N = n;
    TheoryEstimate t;
    t.m = m;
    t.d = d;
    t.n = n;
    t.s = std::max(0.0, 1.0 - std::sqrt(N / D));
    t.s_t = std::max(0.0, 1.0 - std::sqrt(2.0 * N) / D);
    t.lambda_max_plain = M / (2.0 * pi) * N + D / 2.0 + (pi - 1.0) * M / (2.0 * pi);
    t.lambda_max_glu_lower = (M / (4.0 * D) + 0.5) * N + M / 2.0 - M / (2.0 * pi) + D - D / (2.0 * pi);
    t.lambda_max_glu_upper = (M / (4.0 * D) + M / (2.0 * pi * D) + 0.5 + 1.0 / (2.0 * pi)) * N + M / 2.0 + D;
    t.lambda_min_plain = (M + D) / 4.0 * (t.s * t.s + 1.0) - M / (2.0 * pi);
    t.lambda_min_glu = (M + 2.0 * D) / 4.0 * (t.s_t * t.s_t + 1.0) + (M + D) / (2.0 * pi) * (t.s * t.s - 1.0);
    t.kappa_plain = t.lambda_max_plain / t.lambda_min_plain;
    t.kappa_glu = t.lambda_max_glu_lower / t.lambda_min_glu;
    return t;
}

bool weyl_check(const SymMatrix& a, const SymMatrix& b, Eigen::Index k) {
    if (a.order() != b.order()) throw DimensionError("weyl_check: order mismatch");
    if (k < 0 || k >= a.order()) throw ArgumentError("weyl_check: index out of range");
    const SpectralSummary sa = eig_sym(a);
    const SpectralSummary sb = eig_sym(b);
    const SpectralSummary sab = eig_sym(add(a, b));
    const double tol = 1e-9 * (frobenius_norm(a) + frobenius_norm(b));
    const double diff = sab.eigenvalues[k] - sa.eigenvalues[k];
    return diff >= sb.lambda_min - tol && diff <= sb.lambda_max + tol;
}

std::pair<double, double> row_sum_bounds(const SymMatrix& a) {
    double lo = 0.0, hi = 0.0;
    for (Eigen::Index i = 0; i < a.order(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < a.order(); ++j) {
            if (a(i, j) < 0.0) {
                throw ArgumentError("row_sum_bounds: negative entry at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
            }
            s += a(i, j);
        }
        if (i == 0 || s < lo) lo = s;
        if (i == 0 || s > hi) hi = s;
    }
    return {lo, hi};
}

}  // namespace glu_ntk
