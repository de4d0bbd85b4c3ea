#include "glu_ntk/core.hpp"

#include <cmath>
#include <utility>

#include "glu_ntk/rng.hpp"

namespace glu_ntk {

std::string_view to_string(Arch arch) {
    return arch == Arch::Plain ? "plain" : "gated";
}

std::string_view to_string(Activation act) {
    switch (act) {
        case Activation::ReLU: return "relu";
        case Activation::GELU: return "gelu";
        case Activation::SiLU: return "silu";
    }
    return "?";
}

Arch parse_arch(std::string_view s) {
    if (s == "plain") return Arch::Plain;
    if (s == "gated") return Arch::Gated;
    throw ArgumentError("unknown architecture '" + std::string(s) + "' (expected plain|gated)");
}

Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "gelu") return Activation::GELU;
    if (s == "silu") return Activation::SiLU;
    throw ArgumentError("unknown activation '" + std::string(s) + "' (expected relu|gelu|silu)");
}

ExperimentConfig ExperimentConfig::lecun(int n, int d, int m, Arch arch, Activation act) {
    ExperimentConfig cfg;
    cfg.n = n;
    cfg.d = d;
    cfg.m = m;
    cfg.arch = arch;
    cfg.activation = act;
    cfg.validate();
    cfg.sigma_w2 = 1.0 / d;
    cfg.sigma_p2 = 1.0 / d;
    cfg.sigma_v2 = 1.0 / m;
    return cfg;
}

bool ExperimentConfig::is_lecun() const {
    return sigma_w2 == 1.0 / d && sigma_p2 == 1.0 / d && sigma_v2 == 1.0 / m;
}

void ExperimentConfig::validate() const {
    if (n < 2) throw ArgumentError("n must be >= 2 (got " + std::to_string(n) + ")");
    if (d < 1) throw ArgumentError("d must be >= 1 (got " + std::to_string(d) + ")");
    if (m < 1) throw ArgumentError("m must be >= 1 (got " + std::to_string(m) + ")");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ArgumentError("eta must be a positive finite number");
    if (steps < 0) throw ArgumentError("steps must be >= 0");
    for (double s : {sigma_w2, sigma_p2, sigma_v2}) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("init variances must be finite and >= 0");
    }
}

SymMatrix::SymMatrix(Eigen::Index order) : a_(Matrix::Zero(order, order)) {
    if (order < 1) throw DimensionError("SymMatrix order must be >= 1");
}

SymMatrix::SymMatrix(Matrix dense) : a_(std::move(dense)) {
    if (a_.rows() != a_.cols()) {
        throw DimensionError("SymMatrix needs a square matrix, got " + std::to_string(a_.rows()) + "x" +
                             std::to_string(a_.cols()));
    }
    if (a_.rows() < 1) throw DimensionError("SymMatrix order must be >= 1");
    const Eigen::Index n = a_.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            const double v = a_(i, j);
            if (!std::isfinite(v)) throw NumericError("SymMatrix entry is not finite");
            a_(j, i) = v;
        }
    }
}

SymMatrix SymMatrix::identity(Eigen::Index order) {
    return SymMatrix(Matrix::Identity(order, order));
}

SymMatrix SymMatrix::ones(Eigen::Index order) {
    return SymMatrix(Matrix::Ones(order, order));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
    return SymMatrix(Matrix(diag.asDiagonal()));
}

SymMatrix SymMatrix::outer(const Vector& v) {
    return SymMatrix(Matrix(v * v.transpose()));
}

namespace {

void require_same_order(const SymMatrix& a, const SymMatrix& b, const char* what) {
    if (a.order() != b.order()) {
        throw DimensionError(std::string(what) + ": order mismatch (" + std::to_string(a.order()) + " vs " +
                             std::to_string(b.order()) + ")");
    }
}

}  // namespace

SymMatrix hadamard(const SymMatrix& a, const SymMatrix& b) {
    require_same_order(a, b, "hadamard");
    return SymMatrix(Matrix(a.dense().cwiseProduct(b.dense())));
}

SymMatrix add(const SymMatrix& a, const SymMatrix& b) {
    require_same_order(a, b, "add");
    return SymMatrix(Matrix(a.dense() + b.dense()));
}

SymMatrix scale(const SymMatrix& a, double s) {
    return SymMatrix(Matrix(a.dense() * s));
}

SymMatrix axpy(const SymMatrix& a, double s, const SymMatrix& b) {
    require_same_order(a, b, "axpy");
    return SymMatrix(Matrix(a.dense() + s * b.dense()));
}

SymMatrix shift(const SymMatrix& a, double c) {
    Matrix out = a.dense();
    out.diagonal().array() += c;
    return SymMatrix(std::move(out));
}

double mat_trace(const SymMatrix& a) {
    double t = 0.0;
    for (Eigen::Index i = 0; i < a.order(); ++i) t += a(i, i);
    return t;
}

double quadratic_form(const SymMatrix& a, const Vector& y) {
    if (y.size() != a.order()) {
        throw DimensionError("quadratic_form: vector length " + std::to_string(y.size()) + " vs order " +
                             std::to_string(a.order()));
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.order(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < a.order(); ++j) row += a(i, j) * y[j];
        total += y[i] * row;
    }
    return total;
}

double frobenius_norm(const SymMatrix& a) {
    double s = 0.0;
    const Matrix& m = a.dense();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

double relative_frobenius(const SymMatrix& approx, const SymMatrix& reference) {
    require_same_order(approx, reference, "relative_frobenius");
    const double ref = frobenius_norm(reference);
    const double diff = frobenius_norm(SymMatrix(Matrix(approx.dense() - reference.dense())));
    return ref > 0.0 ? diff / ref : diff;
}

double dot(const double* a, const double* b, Eigen::Index len) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    Eigen::Index k = 0;
    for (; k + 4 <= len; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    double tail = 0.0;
    for (; k < len; ++k) tail += a[k] * b[k];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view label) {
    if (label.empty()) throw ArgumentError("derive_stream_seed: label must be nonempty");
    if (label.size() > 64) throw ArgumentError("derive_stream_seed: label longer than 64 bytes");
    std::uint64_t h = mix64(master_seed);
    for (unsigned char c : label) h = mix64(h ^ c);
    return mix64(h ^ static_cast<std::uint64_t>(label.size()));
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw ArgumentError("Rng::below: bound must be >= 1");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

}  // namespace glu_ntk
