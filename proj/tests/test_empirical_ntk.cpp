#include <doctest.h>

#include "glu_ntk/empirical_ntk.hpp"
#include "glu_ntk/kernel_theory.hpp"
#include "test_support.hpp"

using namespace glu_ntk;

namespace {

Params scalar_params(double w, double v, std::optional<double> p) {
    Params params;
    params.w = Matrix::Constant(1, 1, w);
    params.v = Vector::Constant(1, v);
    if (p) params.p = Matrix::Constant(1, 1, *p);
    return params;
}

// Pointers to every parameter in gradient layout order.
std::vector<double*> flat_view(Params& params) {
    std::vector<double*> out;
    for (Eigen::Index k = 0; k < params.v.size(); ++k) out.push_back(&params.v[k]);
    const Eigen::Index m = params.width(), d = params.input_dim();
    if (params.p)
        for (Eigen::Index k = 0; k < m; ++k)
            for (Eigen::Index s = 0; s < d; ++s) out.push_back(&(*params.p)(k, s));
    for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index s = 0; s < d; ++s) out.push_back(&params.w(k, s));
    return out;
}

}  // namespace

TEST_CASE("activations") {
    auto gelu0 = activation_eval(Activation::GELU, 0.0);
    CHECK(gelu0.value == 0.0);
    CHECK(gelu0.deriv == doctest::Approx(0.5).epsilon(1e-15));
    auto silu0 = activation_eval(Activation::SiLU, 0.0);
    CHECK(silu0.value == 0.0);
    CHECK(silu0.deriv == 0.5);
    auto relu = activation_eval(Activation::ReLU, -3.0);
    CHECK(relu.value == 0.0);
    CHECK(relu.deriv == 0.0);
    CHECK(activation_eval(Activation::ReLU, 0.0).deriv == 0.0);
    CHECK(activation_eval(Activation::ReLU, 2.5).value == 2.5);

    for (auto kind : {Activation::GELU, Activation::SiLU}) {
        for (double x : {-3.0, -0.7, 0.2, 1.9}) {
            const double h = 1e-6;
            const double fd = (activation_eval(kind, x + h).value - activation_eval(kind, x - h).value) / (2 * h);
            CHECK(activation_eval(kind, x).deriv == doctest::Approx(fd).epsilon(1e-8));
        }
    }
}

TEST_CASE("initialization") {
    auto cfg = ExperimentConfig::lecun(2, 1000, 1000);
    Params params = init_params(cfg, 3);
    CHECK_FALSE(params.p.has_value());
    CHECK(params.arch() == Arch::Plain);
    const double var_w = params.w.array().square().mean();
    CHECK(var_w == doctest::Approx(cfg.sigma_w2).epsilon(0.01));
    CHECK(params.num_params() == 1000 + 1000 * 1000);

    auto gated = ExperimentConfig::lecun(2, 5, 7, Arch::Gated);
    Params a = init_params(gated, 11), b = init_params(gated, 11);
    REQUIRE(a.p.has_value());
    CHECK(a.w == b.w);
    CHECK(*a.p == *b.p);
    CHECK(a.v == b.v);
    CHECK(a.num_params() == 7 + 2 * 35);
    CHECK(init_params(gated, 12).w != a.w);
}

TEST_CASE("forward and hand gradients") {
    Vector x = Vector::Constant(1, 2.0);
    CHECK(forward(scalar_params(1, 1, std::nullopt), x, Arch::Plain, Activation::ReLU) == 2.0);
    CHECK(forward(scalar_params(1, 1, 1.0), x, Arch::Gated, Activation::ReLU) == 4.0);

    auto gated = ExperimentConfig::lecun(2, 4, 6, Arch::Gated);
    CHECK(forward(init_params(gated, 5), Vector::Zero(4), Arch::Gated, Activation::GELU) == 0.0);

    Vector g = param_gradient(scalar_params(1, 3, std::nullopt), x, Arch::Plain, Activation::ReLU);
    CHECK(g == Eigen::Vector2d(2.0, 6.0));
    Vector gg = param_gradient(scalar_params(1, 1, 1.0), x, Arch::Gated, Activation::ReLU);
    CHECK(gg == Eigen::Vector3d(4.0, 4.0, 4.0));
}

TEST_CASE("gradients match central differences") {
    for (auto arch : {Arch::Plain, Arch::Gated}) {
        for (auto act : {Activation::GELU, Activation::SiLU}) {
            auto cfg = ExperimentConfig::lecun(2, 5, 6, arch, act);
            Params params = init_params(cfg, 21);
            Vector x = test_support::random_matrix(5, 1, 22).col(0);
            Vector g = param_gradient(params, x, arch, act);
            auto coords = flat_view(params);
            REQUIRE(static_cast<Eigen::Index>(coords.size()) == g.size());
            for (std::size_t c = 0; c < coords.size(); ++c) {
                const double h = 1e-5, saved = *coords[c];
                *coords[c] = saved + h;
                const double up = forward(params, x, arch, act);
                *coords[c] = saved - h;
                const double down = forward(params, x, arch, act);
                *coords[c] = saved;
                const double fd = (up - down) / (2 * h);
                CHECK(std::abs(fd - g[c]) <= 1e-6 * std::max(1.0, std::abs(g[c])));
            }
        }
    }
}

TEST_CASE("batched loss gradient equals the sum of per-sample gradients") {
    for (auto arch : {Arch::Plain, Arch::Gated}) {
        auto cfg = ExperimentConfig::lecun(9, 4, 5, arch, Activation::GELU);
        Params params = init_params(cfg, 31);
        Matrix x = test_support::random_matrix(9, 4, 32);
        Vector y = test_support::random_matrix(9, 1, 33).col(0);
        auto lg = mse_gradient(params, x, y, Activation::GELU);

        Vector z = model_outputs(params, x, Activation::GELU);
        CHECK(lg.loss == doctest::Approx((z - y).squaredNorm() / 18.0).epsilon(1e-14));

        Vector expected = Vector::Zero(params.num_params());
        for (int i = 0; i < 9; ++i) {
            CHECK(z[i] == doctest::Approx(forward(params, x.row(i).transpose(), arch, Activation::GELU)).epsilon(1e-14));
            expected += (z[i] - y[i]) / 9.0 * param_gradient(params, x.row(i).transpose(), arch, Activation::GELU);
        }
        auto coords = flat_view(lg.grad);
        for (std::size_t c = 0; c < coords.size(); ++c) CHECK(*coords[c] == doctest::Approx(expected[c]).epsilon(1e-12));
    }
}

TEST_CASE("single-draw NTK paths agree") {
    for (auto arch : {Arch::Plain, Arch::Gated}) {
        for (auto act : {Activation::ReLU, Activation::GELU, Activation::SiLU}) {
            auto cfg = ExperimentConfig::lecun(12, 7, 20, arch, act);
            Params params = init_params(cfg, 41);
            DataMatrix x(test_support::random_matrix(12, 7, 42));
            auto jac = ntk_single_jacobian(params, x, act);
            auto fac = ntk_single_factored(params, x, act);
            CHECK(relative_frobenius(fac, jac) <= 1e-12);
            for (int i = 0; i < 12; ++i) {
                Vector gi = param_gradient(params, x.x().row(i).transpose(), arch, act);
                CHECK(jac(i, i) == doctest::Approx(gi.squaredNorm()).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("averaged empirical NTK") {
    Matrix one = Matrix::Ones(1, 1);
    auto single = ExperimentConfig::lecun(2, 1, 8);
    auto k1 = empirical_ntk(single, DataMatrix(one), 1);
    Params p0 = init_params(single, derive_stream_seed(single.master_seed, "ntk-init-0"));
    CHECK(k1.mat(0, 0) == doctest::Approx(param_gradient(p0, Vector::Ones(1), Arch::Plain, Activation::ReLU).squaredNorm()));
    CHECK(k1.mat(0, 0) >= 0.0);
    CHECK(k1.method == KernelMethod::EmpiricalMC);
    CHECK(k1.num_inits == 1);

    // d = 1, x = [1]: mean of 10^4 draws against m/2 + 1/2.
    auto cfg = ExperimentConfig::lecun(2, 1, 256);
    cfg.master_seed = 5;
    const int inits = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < inits; ++i) {
        Params p = init_params(cfg, derive_stream_seed(cfg.master_seed, "ntk-init-" + std::to_string(i)));
        const double v = param_gradient(p, Vector::Ones(1), Arch::Plain, Activation::ReLU).squaredNorm();
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / inits;
    const double se = std::sqrt((sum_sq / inits - mean * mean) / inits);
    auto avg = empirical_ntk(cfg, DataMatrix(one), inits);
    CHECK(avg.mat(0, 0) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::abs(avg.mat(0, 0) - (256 / 2.0 + 0.5)) <= 3.0 * se);

    auto wide = ExperimentConfig::lecun(32, 16, 4096);
    wide.master_seed = 6;
    DataMatrix x = sample_gaussian_data(32, 16, 7);
    auto emp = empirical_ntk(wide, x, 20);
    CHECK(relative_frobenius(emp.mat, expected_ntk_plain(x, wide).mat) <= 0.10);
    CHECK(empirical_ntk(wide, x, 2).mat.dense() == empirical_ntk(wide, x, 2).mat.dense());
    CHECK_THROWS_AS(empirical_ntk(wide, x, 0), ArgumentError);
}
