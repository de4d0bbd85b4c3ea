#pragma once

#include <optional>
#include <utility>

#include "glu_ntk/core.hpp"

namespace glu_ntk {

struct SpectralSummary {
    Vector eigenvalues;  // ascending
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::optional<double> kappa;
    double solver_tol = 1e-10;
    std::optional<Matrix> eigenvectors;  // column i pairs with eigenvalues[i]
};

SpectralSummary eig_sym(const SymMatrix& a, bool with_vectors = false);

// lambda_max / lambda_min, or nullopt when lambda_min <= solver_tol * |lambda_max|.
std::optional<double> condition_number(const SpectralSummary& s);

struct MpParams {
    double c = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

MpParams mp_edges(double c);
// Absolutely continuous part of the MP law; 0 outside [lower, upper]. For c > 1
// the law also has an atom of mass 1 - 1/c at zero, not included here.
double mp_density(double x, double c);

// Top eigenvalue of a rank-one spiked Wishart matrix with spike strength theta.
double bbp_lambda_max(double c, double theta);

// (lambda_max, lambda_min) of W o W under the linearization (1/d) 1 1^T + I.
std::pair<double, double> karoui_hadamard_prediction(int n, int d);

// (lambda_min, lambda_max) of (1/d^2) (XX^T) o (XX^T): MP edges with shape 2n/d^2.
std::pair<double, double> hadamard_lsd_edges(int n, int d);

struct TheoryEstimate {
    int m = 0;
    int d = 0;
    int n = 0;
    double s = 0.0;
    double s_t = 0.0;
    double lambda_max_plain = 0.0;
    double lambda_max_glu_lower = 0.0;
    double lambda_max_glu_upper = 0.0;
    double lambda_min_plain = 0.0;
    double lambda_min_glu = 0.0;
    double kappa_plain = 0.0;
    double kappa_glu = 0.0;  // uses lambda_max_glu_lower
};

TheoryEstimate theory_estimates(int m, int d, int n);

// lambda_k(A + B) - lambda_k(A) lies in [lambda_min(B) - tol, lambda_max(B) + tol],
// tol = 1e-9 * (||A||_F + ||B||_F).
bool weyl_check(const SymMatrix& a, const SymMatrix& b, Eigen::Index k);

// (min_i sum_j a_ij, max_i sum_j a_ij). Entries must be nonnegative.
std::pair<double, double> row_sum_bounds(const SymMatrix& a);

}  // namespace glu_ntk
