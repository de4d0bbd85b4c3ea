#include "glu_ntk/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "glu_ntk/spectral.hpp"

namespace glu_ntk {

std::string_view to_string(TrajectorySource source) {
    switch (source) {
        case TrajectorySource::ExpectedClosedForm: return "expected-closed-form";
        case TrajectorySource::FiniteWidthGD: return "finite-width-gd";
        case TrajectorySource::LinearizedMC: return "linearized-mc";
    }
    return "?";
}

namespace {

void require_eta(double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ArgumentError("eta must be a positive finite number");
}

void require_steps(int steps) {
    if (steps < 0) throw ArgumentError("steps must be >= 0");
}

}  // namespace

ModeDecomposition decompose(const SymMatrix& k, const Vector& y, const Vector* e0) {
    if (y.size() != k.order()) throw DimensionError("decompose: target length does not match kernel order");
    if (e0 && e0->size() != k.order()) throw DimensionError("decompose: residual length does not match kernel order");
    SpectralSummary s = eig_sym(k, true);
    ModeDecomposition out;
    out.eigenvalues = std::move(s.eigenvalues);
    out.eigenvectors = std::move(*s.eigenvectors);
    out.beta = out.eigenvectors.transpose() * y;
    if (e0) out.e0_coeffs = out.eigenvectors.transpose() * *e0;
    return out;
}

Vector eigenmode_decay(const ModeDecomposition& decomp, const Vector& e0_coeffs, double eta, int t) {
    require_eta(eta);
    require_steps(t);
    if (e0_coeffs.size() != decomp.eigenvalues.size()) throw DimensionError("eigenmode_decay: coefficient length");
    Vector out(e0_coeffs.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out[i] = std::pow(1.0 - eta * decomp.eigenvalues[i], t) * e0_coeffs[i];
    }
    return out;
}

std::vector<Vector> evolve_residual(const KernelMatrix& k, const Vector& e0, double eta, int steps) {
    require_eta(eta);
    require_steps(steps);
    if (e0.size() != k.mat.order()) throw DimensionError("evolve_residual: residual length does not match kernel");
    const ModeDecomposition decomp = decompose(k.mat, Vector::Zero(e0.size()), &e0);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(e0);
    for (int t = 1; t <= steps; ++t) {
        out.push_back(decomp.eigenvectors * eigenmode_decay(decomp, decomp.e0_coeffs, eta, t));
    }
    return out;
}

std::vector<double> expected_loss_curve(const ModeDecomposition& decomp, double sigma_v2, double eta, int steps) {
    require_eta(eta);
    require_steps(steps);
    const Eigen::Index n = decomp.eigenvalues.size();
    Vector mass(n), q2(n), power = Vector::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = decomp.eigenvalues[i];
        mass[i] = sigma_v2 * lam + decomp.beta[i] * decomp.beta[i];
        const double q = 1.0 - eta * lam;
        q2[i] = q * q;
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    for (int t = 0; t <= steps; ++t) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += mass[i] * power[i];
        out.push_back(s / (2.0 * static_cast<double>(n)));
        power.array() *= q2.array();
    }
    return out;
}

std::vector<double> expected_loss_curve(const KernelMatrix& k, const Vector& y, double sigma_v2, double eta,
                                        int steps) {
    return expected_loss_curve(decompose(k.mat, y), sigma_v2, eta, steps);
}

double expected_loss_decrement(const ModeDecomposition& decomp, double sigma_v2, double eta, int t) {
    require_eta(eta);
    require_steps(t);
    const Eigen::Index n = decomp.eigenvalues.size();
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = decomp.eigenvalues[i];
        const double mass = sigma_v2 * lam + decomp.beta[i] * decomp.beta[i];
        s += mass * lam * std::pow(1.0 - eta * lam, 2 * t);
    }
    return eta * s / static_cast<double>(n);
}

double expected_loss_decrement(const KernelMatrix& k, const Vector& y, double sigma_v2, double eta, int t) {
    return expected_loss_decrement(decompose(k.mat, y), sigma_v2, eta, t);
}

EarlyStageGaps early_stage_discriminant(int m, int d, int n) {
    if (m < 1 || d < 1 || n < 1) throw ArgumentError("early_stage_discriminant: m, d, n must be >= 1");
    const double M = m, D = d, N = n;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double bracket = (N - 1.0) * ((D * D - 3.0 * D - 6.0) / (4.0 * D) + (D * D * D - D * D - 4.0 * D - 4.0) / (pi2 * D)) -
                           10.0 * D * D - 44.0 * D - 48.0;
    return {-N * M / D, N * M * M / (4.0 * D * D * D) * bracket};
}

double gaussian_norm_moment(int d, int k) {
    if (d < 1) throw ArgumentError("gaussian_norm_moment: d must be >= 1");
    if (k < 0) throw ArgumentError("gaussian_norm_moment: k must be >= 0");
    if (k % 2 != 0) throw UnsupportedError("gaussian_norm_moment: odd moments are not supported");
    double out = 1.0;
    for (int j = 0; j < k; j += 2) out *= static_cast<double>(d + j);
    return out;
}

double crossing_step_estimate(double lam_n, double lam_n_t, double beta_n, double beta_n_t, double sigma_v2,
                              double eta) {
    const double a = eta * lam_n;
    const double b = eta * lam_n_t;
    if (!(0.0 < a && a < b && b < 1.0)) {
        throw RegimeError("crossing_step_estimate: needs 0 < eta*lam_n < eta*lam_n_t < 1 (got " + std::to_string(a) +
                          ", " + std::to_string(b) + ")");
    }
    const double mass = sigma_v2 * lam_n + beta_n * beta_n;
    const double mass_t = sigma_v2 * lam_n_t + beta_n_t * beta_n_t;
    if (!(mass > 0.0) || !(mass_t > 0.0)) throw RegimeError("crossing_step_estimate: mode masses must be positive");
    return std::log(mass_t / mass) / (2.0 * std::log((1.0 - a) / (1.0 - b)));
}

std::optional<std::size_t> detect_crossing(const std::vector<double>& plain, const std::vector<double>& gated) {
    if (plain.size() != gated.size()) throw DimensionError("detect_crossing: trajectories differ in length");
    int ref = 0;
    for (std::size_t k = 0; k < plain.size(); ++k) {
        const double diff = plain[k] - gated[k];
        const double scale = std::max(std::abs(plain[k]), std::abs(gated[k]));
        if (std::abs(diff) <= 1e-12 * scale) continue;
        const int sign = diff > 0.0 ? 1 : -1;
        if (ref == 0) {
            ref = sign;
        } else if (sign != ref) {
            return k;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> detect_crossing(const LossTrajectory& traj) {
    return detect_crossing(traj.losses_plain, traj.losses_gated);
}

namespace {

EllipseAxes axes_of(const SymMatrix& k) {
    const SpectralSummary s = eig_sym(k, true);
    EllipseAxes out;
    for (int i = 0; i < 2; ++i) {
        out.directions[i] = {(*s.eigenvectors)(0, i), (*s.eigenvectors)(1, i)};
        const double lam = s.eigenvalues[i];
        out.lengths[i] = lam > 0.0 ? 1.0 / lam : std::numeric_limits<double>::infinity();
    }
    return out;
}

std::vector<Point2> toy2_run(const SymMatrix& k, const Point2& y, const Point2& z0, double eta, int steps) {
    std::vector<Point2> out{z0};
    Point2 z = z0;
    for (int t = 0; t < steps; ++t) {
        const double e0 = z[0] - y[0], e1 = z[1] - y[1];
        z = {z[0] - eta * (k(0, 0) * e0 + k(0, 1) * e1), z[1] - eta * (k(1, 0) * e0 + k(1, 1) * e1)};
        out.push_back(z);
    }
    return out;
}

}  // namespace

Toy2Result toy2_trajectories(const SymMatrix& k_plain, const SymMatrix& k_gated, const Point2& y, const Point2& z0,
                             double eta, int steps) {
    require_eta(eta);
    require_steps(steps);
    if (k_plain.order() != 2 || k_gated.order() != 2) throw DimensionError("toy2_trajectories: kernels must be 2x2");
    return {toy2_run(k_plain, y, z0, eta, steps), toy2_run(k_gated, y, z0, eta, steps), axes_of(k_plain),
            axes_of(k_gated)};
}

std::vector<double> linearized_mc_loss(const ExperimentConfig& cfg, const DataMatrix& x, const Vector& y,
                                       const KernelMatrix& k, double eta, int steps, int num_inits) {
    require_eta(eta);
    require_steps(steps);
    if (num_inits < 1) throw ArgumentError("linearized_mc_loss: num_inits must be >= 1");
    const ModeDecomposition decomp = decompose(k.mat, y);
    const Eigen::Index n = x.n();
    Vector q2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double q = 1.0 - eta * decomp.eigenvalues[i];
        q2[i] = q * q;
    }
    // Average squared mode coefficients over inits; the loss is linear in them.
    Vector mean_c2 = Vector::Zero(n);
    for (int r = 0; r < num_inits; ++r) {
        const Params params = init_params(cfg, derive_stream_seed(cfg.master_seed, "lin-init-" + std::to_string(r)));
        const Vector c = decomp.eigenvectors.transpose() * (model_outputs(params, x.x(), cfg.activation) - y);
        mean_c2 += c.cwiseAbs2();
    }
    mean_c2 /= static_cast<double>(num_inits);
    std::vector<double> out;
    Vector power = Vector::Ones(n);
    for (int t = 0; t <= steps; ++t) {
        out.push_back(mean_c2.dot(power) / (2.0 * static_cast<double>(n)));
        power.array() *= q2.array();
    }
    return out;
}

std::vector<double> train_single(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t init_seed,
                                 const TrainObserver& observer) {
    cfg.validate();
    if (data.data.d() != cfg.d) throw DimensionError("train_single: data dimension does not match cfg.d");
    Params params = init_params(cfg, init_seed);
    const Matrix& x = data.data.x();
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(cfg.steps) + 1);
    for (int step = 0;; ++step) {
        LossGradient lg = mse_gradient(params, x, data.targets, cfg.activation);
        if (!std::isfinite(lg.loss) || lg.loss > 1e12) throw DivergenceError(static_cast<std::size_t>(step), lg.loss);
        losses.push_back(lg.loss);
        if (observer && !observer(step, params, lg.loss)) break;
        if (step == cfg.steps) break;
        params.w -= cfg.eta * lg.grad.w;
        if (params.p) *params.p -= cfg.eta * *lg.grad.p;
        params.v -= cfg.eta * lg.grad.v;
    }
    return losses;
}

LossTrajectory train_finite_width(const ExperimentConfig& cfg, const Dataset& data, double eta, int steps) {
    ExperimentConfig c = cfg;
    c.eta = eta;
    c.steps = steps;
    c.validate();
    LossTrajectory out;
    out.eta = eta;
    out.source = TrajectorySource::FiniteWidthGD;
    c.arch = Arch::Plain;
    out.losses_plain = train_single(c, data, derive_stream_seed(cfg.master_seed, "init-plain"));
    c.arch = Arch::Gated;
    out.losses_gated = train_single(c, data, derive_stream_seed(cfg.master_seed, "init-gated"));
    out.crossing_index = detect_crossing(out);
    return out;
}

}  // namespace glu_ntk
