#include "glu_ntk/kernel_theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace glu_ntk {

using std::numbers::pi;

std::string_view to_string(KernelMethod method) {
    switch (method) {
        case KernelMethod::ExpectedClosedForm: return "expected-closed-form";
        case KernelMethod::StructuredApprox: return "structured-approx";
        case KernelMethod::EmpiricalMC: return "empirical-mc";
        case KernelMethod::GatedFromPlain: return "gated-from-plain";
    }
    return "?";
}

double arccos_kernel_order1(double rho, double norm_i, double norm_j, double sigma_w2) {
    rho = std::clamp(rho, -1.0, 1.0);
    const double sin_theta = std::sqrt((1.0 - rho) * (1.0 + rho));
    return sigma_w2 * norm_i * norm_j / (2.0 * pi) * (sin_theta + (pi - std::acos(rho)) * rho);
}

double arccos_kernel_deriv(double rho) {
    rho = std::clamp(rho, -1.0, 1.0);
    return (pi - std::acos(rho)) / (2.0 * pi);
}

double cosine(double inner, double norm_i, double norm_j) {
    if (norm_i == 0.0 || norm_j == 0.0) return 0.0;
    return inner / (norm_i * norm_j);
}

namespace {

void require_relu(const ExperimentConfig& cfg, Arch want, const char* who) {
    if (cfg.activation != Activation::ReLU) {
        throw UnsupportedError(std::string(who) + ": no closed form for activation '" +
                               std::string(to_string(cfg.activation)) + "'; use empirical_ntk");
    }
    if (cfg.arch != want) {
        throw ArgumentError(std::string(who) + ": config architecture is '" + std::string(to_string(cfg.arch)) + "'");
    }
}

ConfigSnapshot snapshot(const DataMatrix& x, int m, Arch arch, Activation act) {
    return {static_cast<int>(x.n()), static_cast<int>(x.d()), m, arch, act};
}

template <typename Entry>
SymMatrix assemble(Eigen::Index n, Entry&& entry) {
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) k(i, j) = entry(i, j);
    return SymMatrix(std::move(k));
}

}  // namespace

KernelMatrix expected_ntk_plain(const DataMatrix& x, const ExperimentConfig& cfg) {
    require_relu(cfg, Arch::Plain, "expected_ntk_plain");
    const SymMatrix& g = x.gram();
    const Vector& r = x.r();
    const double m = cfg.m;
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        const double inner = g(i, j);
        const double rho = cosine(inner, r[i], r[j]);
        return m * (arccos_kernel_order1(rho, r[i], r[j], cfg.sigma_w2) +
                    cfg.sigma_v2 * arccos_kernel_deriv(rho) * inner);
    };
    return {assemble(x.n(), entry), KernelMethod::ExpectedClosedForm, 0,
            snapshot(x, cfg.m, Arch::Plain, Activation::ReLU)};
}

KernelMatrix expected_ntk_glu(const DataMatrix& x, const ExperimentConfig& cfg) {
    require_relu(cfg, Arch::Gated, "expected_ntk_glu");
    const SymMatrix& g = x.gram();
    const Vector& r = x.r();
    const double m = cfg.m;
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        const double inner = g(i, j);
        const double rho = cosine(inner, r[i], r[j]);
        return m * ((cfg.sigma_v2 + cfg.sigma_p2) * arccos_kernel_order1(rho, r[i], r[j], cfg.sigma_w2) * inner +
                    cfg.sigma_v2 * cfg.sigma_p2 * arccos_kernel_deriv(rho) * inner * inner);
    };
    return {assemble(x.n(), entry), KernelMethod::ExpectedClosedForm, 0,
            snapshot(x, cfg.m, Arch::Gated, Activation::ReLU)};
}

StructuredCoefficients coefficients(int m, int d, WidthRegime regime) {
    if (m < 1 || d < 1) throw ArgumentError("coefficients: need m >= 1 and d >= 1");
    const double md = static_cast<double>(m) / d;
    const double dd = d;
    StructuredCoefficients c;
    if (regime == WidthRegime::Finite) {
        c.alpha = 0.25 + md / 4.0;
        c.beta = md / (2.0 * pi);
        c.gamma = 0.25 + md / 4.0 - md / (2.0 * pi);
        c.alpha_t = md / (4.0 * dd) + 1.0 / (2.0 * dd);
        c.beta_t = 1.0 / (2.0 * pi * dd) + md / (2.0 * pi * dd);
        c.gamma_t = 1.0 / (2.0 * dd) - 1.0 / (2.0 * pi * dd) + md / (4.0 * dd) - md / (2.0 * pi * dd);
    } else {
        c.alpha = md / 4.0;
        c.beta = md / (2.0 * pi);
        c.gamma = md / 4.0 - md / (2.0 * pi);
        c.alpha_t = md / (4.0 * dd);
        c.beta_t = md / (2.0 * pi * dd);
        c.gamma_t = md / (4.0 * dd) - md / (2.0 * pi * dd);
    }
    return c;
}

KernelMatrix structured_ntk_plain(const DataMatrix& x, int m, WidthRegime regime) {
    const auto c = coefficients(m, static_cast<int>(x.d()), regime);
    const SymMatrix& g = x.gram();
    const Vector& r = x.r();
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        double v = c.alpha * g(i, j) + c.beta * r[i] * r[j];
        if (i == j) v += c.gamma * g(i, i);
        return v;
    };
    return {assemble(x.n(), entry), KernelMethod::StructuredApprox, 0,
            snapshot(x, m, Arch::Plain, Activation::ReLU)};
}

KernelMatrix structured_ntk_glu(const DataMatrix& x, int m, WidthRegime regime) {
    const auto c = coefficients(m, static_cast<int>(x.d()), regime);
    const SymMatrix& g = x.gram();
    const Vector& r = x.r();
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        const double gij = g(i, j);
        double v = c.alpha_t * gij * gij + c.beta_t * r[i] * r[j] * gij;
        if (i == j) v += c.gamma_t * g(i, i) * g(i, i);
        return v;
    };
    return {assemble(x.n(), entry), KernelMethod::StructuredApprox, 0,
            snapshot(x, m, Arch::Gated, Activation::ReLU)};
}

KernelMatrix hadamard_gate(const KernelMatrix& k, const DataMatrix& x) {
    if (k.mat.order() != x.n()) {
        throw DimensionError("hadamard_gate: kernel order " + std::to_string(k.mat.order()) + " vs " +
                             std::to_string(x.n()) + " samples");
    }
    const double inv_d = 1.0 / static_cast<double>(x.d());
    const SymMatrix& g = x.gram();
    auto entry = [&](Eigen::Index i, Eigen::Index j) { return k.mat(i, j) * (g(i, j) * inv_d); };
    ConfigSnapshot cfg = k.config;
    cfg.arch = Arch::Gated;
    return {assemble(x.n(), entry), KernelMethod::GatedFromPlain, k.num_inits, cfg};
}

SymMatrix gradient_angle_matrix(const KernelMatrix& k) {
    const Eigen::Index n = k.mat.order();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(k.mat(i, i) > 0.0)) {
            throw DegenerateKernelError("gradient_angle_matrix: diagonal entry " + std::to_string(i) +
                                        " is not positive");
        }
    }
    return assemble(n, [&](Eigen::Index i, Eigen::Index j) {
        if (i == j) return 1.0;
        return k.mat(i, j) / std::sqrt(k.mat(i, i) * k.mat(j, j));
    });
}

SymMatrix data_cosine_matrix(const DataMatrix& x) {
    const SymMatrix& g = x.gram();
    const Vector& r = x.r();
    return assemble(x.n(), [&](Eigen::Index i, Eigen::Index j) {
        if (i == j) return r[i] > 0.0 ? 1.0 : 0.0;
        return cosine(g(i, j), r[i], r[j]);
    });
}

}  // namespace glu_ntk
