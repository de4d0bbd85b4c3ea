#include "glu_ntk/empirical_ntk.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "glu_ntk/rng.hpp"

namespace glu_ntk {

Eigen::Index Params::num_params() const {
    return v.size() + w.size() + (p ? p->size() : 0);
}

ActivationValue activation_eval(Activation kind, double x) {
    switch (kind) {
        case Activation::ReLU:
            return x > 0.0 ? ActivationValue{x, 1.0} : ActivationValue{0.0, 0.0};
        case Activation::GELU: {
            const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return {x * cdf, cdf + x * pdf};
        }
        case Activation::SiLU: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return {x * s, s + x * s * (1.0 - s)};
        }
    }
    return {0.0, 0.0};
}

Params init_params(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto fill = [&](Eigen::Index rows, Eigen::Index cols, double var) {
        const double sd = std::sqrt(var);
        Matrix a(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = sd * rng.normal();
        return a;
    };
    Params out;
    out.w = fill(cfg.m, cfg.d, cfg.sigma_w2);
    if (cfg.arch == Arch::Gated) out.p = fill(cfg.m, cfg.d, cfg.sigma_p2);
    out.v = fill(cfg.m, 1, cfg.sigma_v2).col(0);
    return out;
}

namespace {

void check_shapes(const Params& params, Eigen::Index d, Arch arch, const char* who) {
    if (params.arch() != arch) {
        throw DimensionError(std::string(who) + ": params are " + std::string(to_string(params.arch())) +
                             " but arch is " + std::string(to_string(arch)));
    }
    if (params.input_dim() != d) {
        throw DimensionError(std::string(who) + ": input has " + std::to_string(d) + " features, W has " +
                             std::to_string(params.input_dim()));
    }
    if (params.v.size() != params.width() || (params.p && (params.p->rows() != params.width() ||
                                                           params.p->cols() != params.input_dim()))) {
        throw DimensionError(std::string(who) + ": inconsistent parameter shapes");
    }
}

Matrix apply(const Matrix& h, Activation kind, Matrix* deriv) {
    Matrix a(h.rows(), h.cols());
    if (deriv) deriv->resize(h.rows(), h.cols());
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            const auto [val, der] = activation_eval(kind, h(i, j));
            a(i, j) = val;
            if (deriv) (*deriv)(i, j) = der;
        }
    }
    return a;
}

}  // namespace

double forward(const Params& params, const Vector& x_row, Arch arch, Activation kind) {
    check_shapes(params, x_row.size(), arch, "forward");
    double z = 0.0;
    for (Eigen::Index k = 0; k < params.width(); ++k) {
        double unit = activation_eval(kind, params.w.row(k).dot(x_row)).value;
        if (params.p) unit *= params.p->row(k).dot(x_row);
        z += params.v[k] * unit;
    }
    return z;
}

Vector param_gradient(const Params& params, const Vector& x_row, Arch arch, Activation kind) {
    check_shapes(params, x_row.size(), arch, "param_gradient");
    const Eigen::Index m = params.width();
    const Eigen::Index d = params.input_dim();
    Vector g(params.num_params());
    const Eigen::Index p_off = m;
    const Eigen::Index w_off = params.p ? m + m * d : m;
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto [a, da] = activation_eval(kind, params.w.row(k).dot(x_row));
        const double q = params.p ? params.p->row(k).dot(x_row) : 1.0;
        g[k] = q * a;
        for (Eigen::Index s = 0; s < d; ++s) {
            if (params.p) g[p_off + k * d + s] = params.v[k] * a * x_row[s];
            g[w_off + k * d + s] = params.v[k] * q * da * x_row[s];
        }
    }
    return g;
}

Vector model_outputs(const Params& params, const Matrix& x, Activation kind) {
    check_shapes(params, x.cols(), params.arch(), "model_outputs");
    Matrix a = apply(x * params.w.transpose(), kind, nullptr);
    if (params.p) a.array() *= (x * params.p->transpose()).array();
    return a * params.v;
}

LossGradient mse_gradient(const Params& params, const Matrix& x, const Vector& y, Activation kind) {
    check_shapes(params, x.cols(), params.arch(), "mse_gradient");
    if (y.size() != x.rows()) throw DimensionError("mse_gradient: target length does not match sample count");
    const double n = static_cast<double>(x.rows());
    Matrix da;
    const Matrix a = apply(x * params.w.transpose(), kind, &da);
    Matrix q;
    if (params.p) q = x * params.p->transpose();
    const Matrix unit = params.p ? Matrix(a.cwiseProduct(q)) : a;
    const Vector resid = unit * params.v - y;

    LossGradient out;
    out.loss = resid.squaredNorm() / (2.0 * n);
    const Vector e = resid / n;
    // ev(i,k) = e_i v_k
    const Matrix ev = e * params.v.transpose();
    out.grad.v = unit.transpose() * e;
    if (params.p) {
        out.grad.p = a.cwiseProduct(ev).transpose() * x;
        out.grad.w = q.cwiseProduct(da).cwiseProduct(ev).transpose() * x;
    } else {
        out.grad.w = da.cwiseProduct(ev).transpose() * x;
    }
    return out;
}

SymMatrix ntk_single_jacobian(const Params& params, const DataMatrix& x, Activation kind) {
    const Eigen::Index n = x.n();
    // Column i holds grad z(x_i), so every dot product reads contiguous memory.
    Matrix jt(params.num_params(), n);
    for (Eigen::Index i = 0; i < n; ++i) jt.col(i) = param_gradient(params, x.x().row(i).transpose(), params.arch(), kind);
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) k(i, j) = dot(jt.col(i).data(), jt.col(j).data(), jt.rows());
    return SymMatrix(std::move(k));
}

SymMatrix ntk_single_factored(const Params& params, const DataMatrix& x, Activation kind) {
    check_shapes(params, x.d(), params.arch(), "ntk_single");
    const Eigen::Index n = x.n();
    const Eigen::Index m = params.width();
    Matrix da;
    const Matrix a = apply(x.x() * params.w.transpose(), kind, &da);
    Matrix q = params.p ? Matrix(x.x() * params.p->transpose()) : Matrix::Ones(n, m);
    const Vector v2 = params.v.cwiseAbs2();
    // Transposed copies so unit k of sample i sits in column i.
    const Matrix f_v = a.cwiseProduct(q).transpose();                       // dz/dv_k
    const Matrix f_p = params.p ? Matrix(a.transpose()) : Matrix();          // dz/dP_k. = v_k a_k x
    const Matrix f_w = da.cwiseProduct(q).transpose();                      // dz/dW_k. = v_k q_k a'_k x
    const SymMatrix& g = x.gram();
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            double sv = 0.0, sp = 0.0, sw = 0.0;
            for (Eigen::Index u = 0; u < m; ++u) {
                sv += f_v(u, i) * f_v(u, j);
                sw += v2[u] * f_w(u, i) * f_w(u, j);
                if (params.p) sp += v2[u] * f_p(u, i) * f_p(u, j);
            }
            k(i, j) = sv + (sp + sw) * g(i, j);
        }
    }
    return SymMatrix(std::move(k));
}

SymMatrix ntk_single(const Params& params, const DataMatrix& x, Activation kind) {
    const double size = static_cast<double>(x.n()) * static_cast<double>(params.num_params());
    return size <= kJacobianLimit ? ntk_single_jacobian(params, x, kind) : ntk_single_factored(params, x, kind);
}

KernelMatrix empirical_ntk(const ExperimentConfig& cfg, const DataMatrix& x, int num_inits) {
    if (num_inits < 1) throw ArgumentError("empirical_ntk: num_inits must be >= 1");
    if (x.d() != cfg.d) throw DimensionError("empirical_ntk: data dimension does not match cfg.d");
    Matrix acc = Matrix::Zero(x.n(), x.n());
    for (int i = 0; i < num_inits; ++i) {
        const Params params = init_params(cfg, derive_stream_seed(cfg.master_seed, "ntk-init-" + std::to_string(i)));
        acc += ntk_single(params, x, cfg.activation).dense();
    }
    acc /= static_cast<double>(num_inits);
    return {SymMatrix(std::move(acc)), KernelMethod::EmpiricalMC, num_inits,
            {static_cast<int>(x.n()), static_cast<int>(x.d()), cfg.m, cfg.arch, cfg.activation}};
}

}  // namespace glu_ntk
