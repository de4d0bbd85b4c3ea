#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "glu_ntk/errors.hpp"

namespace glu_ntk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point2 = std::array<double, 2>;

enum class Arch { Plain, Gated };
enum class Activation { ReLU, GELU, SiLU };

std::string_view to_string(Arch arch);
std::string_view to_string(Activation act);
Arch parse_arch(std::string_view s);
Activation parse_activation(std::string_view s);

struct ExperimentConfig {
    int n = 2;
    int d = 1;
    int m = 1;
    Arch arch = Arch::Plain;
    Activation activation = Activation::ReLU;
    double sigma_w2 = 1.0;
    double sigma_p2 = 1.0;
    double sigma_v2 = 1.0;
    double eta = 1e-3;
    int steps = 0;
    std::uint64_t master_seed = 0;

    // sigma_w2 = sigma_p2 = 1/d, sigma_v2 = 1/m.
    static ExperimentConfig lecun(int n, int d, int m, Arch arch = Arch::Plain,
                                  Activation act = Activation::ReLU);

    bool is_lecun() const;

    // Throws ArgumentError naming the first violated invariant.
    void validate() const;
};

// Dense symmetric matrix. The lower triangle is authoritative: every
// constructor mirrors it into the upper triangle, so (i,j) and (j,i) read the
// same stored double.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Eigen::Index order);
    // Mirrors the lower triangle of `dense`; throws NumericError on non-finite
    // entries and DimensionError if `dense` is not square.
    explicit SymMatrix(Matrix dense);

    static SymMatrix identity(Eigen::Index order);
    static SymMatrix ones(Eigen::Index order);
    static SymMatrix diagonal(const Vector& diag);
    static SymMatrix outer(const Vector& v);

    Eigen::Index order() const { return a_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }
    const Matrix& dense() const { return a_; }
    Vector diag() const { return a_.diagonal(); }

private:
    Matrix a_;
};

SymMatrix hadamard(const SymMatrix& a, const SymMatrix& b);
SymMatrix add(const SymMatrix& a, const SymMatrix& b);
SymMatrix scale(const SymMatrix& a, double s);
// a + s*b
SymMatrix axpy(const SymMatrix& a, double s, const SymMatrix& b);
SymMatrix shift(const SymMatrix& a, double c);

// Sum of a(i,i) for i = 0..n-1 in index order.
double mat_trace(const SymMatrix& a);
// y^T a y, accumulated row by row (i outer, j inner) in index order.
double quadratic_form(const SymMatrix& a, const Vector& y);
double frobenius_norm(const SymMatrix& a);
double relative_frobenius(const SymMatrix& approx, const SymMatrix& reference);

// Dot product with four interleaved partial sums combined as
// ((s0 + s1) + (s2 + s3)) + tail. Fixed order, so bit-reproducible.
double dot(const double* a, const double* b, Eigen::Index len);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// h = mix64(master); h = mix64(h ^ byte) for every label byte;
// result = mix64(h ^ label_length). Label must be 1..64 bytes.
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view label);

}  // namespace glu_ntk
