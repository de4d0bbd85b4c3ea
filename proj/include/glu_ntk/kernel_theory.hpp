#pragma once

#include "glu_ntk/core.hpp"
#include "glu_ntk/datagen.hpp"

namespace glu_ntk {

enum class KernelMethod { ExpectedClosedForm, StructuredApprox, EmpiricalMC, GatedFromPlain };

std::string_view to_string(KernelMethod method);

struct ConfigSnapshot {
    int n = 0;
    int d = 0;
    int m = 0;
    Arch arch = Arch::Plain;
    Activation activation = Activation::ReLU;
};

struct KernelMatrix {
    SymMatrix mat;
    KernelMethod method = KernelMethod::ExpectedClosedForm;
    int num_inits = 0;  // only meaningful for EmpiricalMC
    ConfigSnapshot config;
};

// Which terms of the structured coefficients to keep. Finite keeps the full
// expressions; Infinite keeps only the terms proportional to the width m
// (the m -> infinity leading order, under which K_ii = (m/2d)||x_i||^2 and
// K~_ii = (m/2d^2)||x_i||^4).
enum class WidthRegime { Finite, Infinite };

struct StructuredCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double alpha_t = 0.0;
    double beta_t = 0.0;
    double gamma_t = 0.0;
};

// E_w[relu(w.x_i) relu(w.x_j)] for w ~ N(0, sigma_w2 I): the order-1
// arc-cosine kernel. rho is clamped to [-1, 1].
double arccos_kernel_order1(double rho, double norm_i, double norm_j, double sigma_w2);

// E_w[relu'(w.x_i) relu'(w.x_j)] = (pi - arccos rho) / (2 pi).
double arccos_kernel_deriv(double rho);

// Cosine similarity of two samples given their inner product and norms.
// Zero when either norm is zero.
double cosine(double inner, double norm_i, double norm_j);

// Infinite-width expected NTKs of the two-layer ReLU networks, using the
// variances in cfg. Both throw UnsupportedError for non-ReLU activations
// (no closed form; use empirical_ntk) and ArgumentError on an arch mismatch.
KernelMatrix expected_ntk_plain(const DataMatrix& x, const ExperimentConfig& cfg);
KernelMatrix expected_ntk_glu(const DataMatrix& x, const ExperimentConfig& cfg);

StructuredCoefficients coefficients(int m, int d, WidthRegime regime = WidthRegime::Finite);

// K = alpha X X^T + beta r r^T + gamma D (LeCun initialization).
KernelMatrix structured_ntk_plain(const DataMatrix& x, int m, WidthRegime regime = WidthRegime::Finite);
// K~ = alpha~ (XX^T)o(XX^T) + beta~ (r r^T)o(XX^T) + gamma~ D^2.
KernelMatrix structured_ntk_glu(const DataMatrix& x, int m, WidthRegime regime = WidthRegime::Finite);

// K o (X X^T / d).
KernelMatrix hadamard_gate(const KernelMatrix& k, const DataMatrix& x);

// cos(phi_ij) = K_ij / sqrt(K_ii K_jj); diagonal set to exactly 1.
SymMatrix gradient_angle_matrix(const KernelMatrix& k);

// cos(alpha_ij) between samples, diagonal exactly 1 for nonzero rows.
SymMatrix data_cosine_matrix(const DataMatrix& x);

}  // namespace glu_ntk
