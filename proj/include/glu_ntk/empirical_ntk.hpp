#pragma once

#include <cstdint>
#include <optional>

#include "glu_ntk/core.hpp"
#include "glu_ntk/datagen.hpp"
#include "glu_ntk/kernel_theory.hpp"

namespace glu_ntk {

// z(x) = v . phi(W x)             (plain)
// z(x) = v . ((P x) o phi(W x))   (gated)
struct Params {
    Matrix w;                // m x d
    std::optional<Matrix> p; // m x d, gated only
    Vector v;                // the 1 x m output row, stored as a length-m vector

    Eigen::Index width() const { return w.rows(); }
    Eigen::Index input_dim() const { return w.cols(); }
    Arch arch() const { return p ? Arch::Gated : Arch::Plain; }
    Eigen::Index num_params() const;
};

struct ActivationValue {
    double value;
    double deriv;
};

// ReLU uses phi'(0) = 0. GELU is the exact erf form.
ActivationValue activation_eval(Activation kind, double x);

// Draw order from Rng(seed): W row-major, then P row-major (gated only), then v.
Params init_params(const ExperimentConfig& cfg, std::uint64_t seed);

double forward(const Params& params, const Vector& x_row, Arch arch, Activation kind);

// Flat gradient laid out as [v_0..v_{m-1}, P_00..P_{m-1,d-1}, W_00..W_{m-1,d-1}],
// matrices k-major (index k*d + s). The P block is absent for the plain model.
Vector param_gradient(const Params& params, const Vector& x_row, Arch arch, Activation kind);

// Outputs z(x_i) for every row of x.
Vector model_outputs(const Params& params, const Matrix& x, Activation kind);

// Gradient of L = (1/2n) ||z(X) - y||^2 with respect to every parameter,
// returned with the same shapes as `params`. Also reports the loss at params.
struct LossGradient {
    double loss = 0.0;
    Params grad;
};
LossGradient mse_gradient(const Params& params, const Matrix& x, const Vector& y, Activation kind);

// Per-init NTK <grad z(x_i), grad z(x_j)> of a single parameter draw.
// When n * num_params <= kJacobianLimit it is the Gram matrix of the stacked
// gradients; otherwise each entry is assembled from per-unit factors.
constexpr double kJacobianLimit = 2e7;
SymMatrix ntk_single(const Params& params, const DataMatrix& x, Activation kind);
SymMatrix ntk_single_jacobian(const Params& params, const DataMatrix& x, Activation kind);
SymMatrix ntk_single_factored(const Params& params, const DataMatrix& x, Activation kind);

// Average of ntk_single over num_inits draws. Init i uses
// derive_stream_seed(cfg.master_seed, "ntk-init-<i>"); contributions are summed
// in init order.
KernelMatrix empirical_ntk(const ExperimentConfig& cfg, const DataMatrix& x, int num_inits);

}  // namespace glu_ntk
