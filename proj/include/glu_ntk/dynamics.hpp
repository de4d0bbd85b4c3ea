#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "glu_ntk/core.hpp"
#include "glu_ntk/datagen.hpp"
#include "glu_ntk/empirical_ntk.hpp"
#include "glu_ntk/kernel_theory.hpp"

namespace glu_ntk {

enum class TrajectorySource { ExpectedClosedForm, FiniteWidthGD, LinearizedMC };

std::string_view to_string(TrajectorySource source);

struct LossTrajectory {
    std::vector<double> losses_plain;  // index 0 is the loss before any step
    std::vector<double> losses_gated;
    double eta = 0.0;
    std::optional<std::size_t> crossing_index;
    TrajectorySource source = TrajectorySource::ExpectedClosedForm;
};

// Eigenbasis of K with the target and initial residual expressed in it.
struct ModeDecomposition {
    Vector eigenvalues;  // ascending
    Matrix eigenvectors;
    Vector beta;         // beta_i = y^T v_i
    Vector e0_coeffs;    // <e0, v_i>; empty when no e0 was given
};

ModeDecomposition decompose(const SymMatrix& k, const Vector& y, const Vector* e0 = nullptr);

// e_t = (I - eta K)^t e0 for t = 0..steps, evaluated in the eigenbasis.
std::vector<Vector> evolve_residual(const KernelMatrix& k, const Vector& e0, double eta, int steps);

// (1 - eta lambda_i)^t <e0, v_i>
Vector eigenmode_decay(const ModeDecomposition& decomp, const Vector& e0_coeffs, double eta, int t);

// E[L_t] = (1/2n) sum_i (sigma_v2 lambda_i + beta_i^2) (1 - eta lambda_i)^{2t}, t = 0..steps.
std::vector<double> expected_loss_curve(const ModeDecomposition& decomp, double sigma_v2, double eta, int steps);
std::vector<double> expected_loss_curve(const KernelMatrix& k, const Vector& y, double sigma_v2, double eta,
                                        int steps);

// First-order expected one-step decrease:
// (eta/n) sum_i (sigma_v2 lambda_i + beta_i^2) lambda_i (1 - eta lambda_i)^{2t}.
double expected_loss_decrement(const ModeDecomposition& decomp, double sigma_v2, double eta, int t);
double expected_loss_decrement(const KernelMatrix& k, const Vector& y, double sigma_v2, double eta, int t);

struct EarlyStageGaps {
    double trace_gap;     // E Tr(K - K~)
    double trace_sq_gap;  // E Tr(K^2 - K~^2)
};

// Expectations over x ~ N(0, I_d) at leading order in the width.
EarlyStageGaps early_stage_discriminant(int m, int d, int n);

// E ||x||^k for x ~ N(0, I_d), k even: d (d+2) ... (d+k-2).
double gaussian_norm_moment(int d, int k);

// Step count beyond which the smallest gated mode's loss stays below the
// smallest plain mode's. Requires 0 < eta*lam_n < eta*lam_n_t < 1.
double crossing_step_estimate(double lam_n, double lam_n_t, double beta_n, double beta_n_t, double sigma_v2,
                              double eta);

// First k >= 1 where sign(plain - gated) differs from the first nonzero sign.
// Differences within 1e-12 of max(|plain|, |gated|) count as ties and are skipped.
std::optional<std::size_t> detect_crossing(const std::vector<double>& plain, const std::vector<double>& gated);
std::optional<std::size_t> detect_crossing(const LossTrajectory& traj);


struct EllipseAxes {
    std::array<Point2, 2> directions;  // unit eigenvectors, ascending eigenvalue
    std::array<double, 2> lengths;     // proportional to 1 / lambda_i
};

struct Toy2Result {
    std::vector<Point2> plain;
    std::vector<Point2> gated;
    EllipseAxes axes_plain;
    EllipseAxes axes_gated;
};

// z_{t+1} = z_t - eta K (z_t - y) for both 2x2 kernels, t = 0..steps.
Toy2Result toy2_trajectories(const SymMatrix& k_plain, const SymMatrix& k_gated, const Point2& y, const Point2& z0,
                             double eta, int steps);

// Mean over num_inits draws of the linearized loss (1/2n) ||(I - eta K)^t (z0(X) - y)||^2,
// with z0 from init_params(cfg, derive_stream_seed(cfg.master_seed, "lin-init-<i>")).
std::vector<double> linearized_mc_loss(const ExperimentConfig& cfg, const DataMatrix& x, const Vector& y,
                                       const KernelMatrix& k, double eta, int steps, int num_inits);

// Called after every step (and once at step 0) with the current parameters and
// training loss. Return false to stop early.
using TrainObserver = std::function<bool(int step, const Params& params, double loss)>;

// Full-batch gradient descent on (1/2n) ||z(X) - y||^2 for cfg.arch starting
// from init_params(cfg, init_seed). Returns losses for steps 0..cfg.steps.
// Throws DivergenceError when the loss exceeds 1e12 or is not finite.
std::vector<double> train_single(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t init_seed,
                                 const TrainObserver& observer = {});

// Trains the plain and gated models on the same data with eta and steps
// overriding cfg. Init seeds: derive_stream_seed(cfg.master_seed, "init-plain"/"init-gated").
LossTrajectory train_finite_width(const ExperimentConfig& cfg, const Dataset& data, double eta, int steps);

}  // namespace glu_ntk
