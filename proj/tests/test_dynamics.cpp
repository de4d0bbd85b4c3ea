#include <doctest.h>

#include <numbers>

#include "glu_ntk/dynamics.hpp"
#include "glu_ntk/experiments.hpp"
#include "glu_ntk/spectral.hpp"
#include "test_support.hpp"

using namespace glu_ntk;

namespace {

KernelMatrix wrap(SymMatrix k) { return {std::move(k), KernelMethod::StructuredApprox, 0, {}}; }

Vector flat(const Params& p) {
    Vector out(p.num_params());
    Eigen::Index at = 0;
    out.segment(at, p.v.size()) = p.v;
    at += p.v.size();
    auto push = [&](const Matrix& a) {
        for (Eigen::Index k = 0; k < a.rows(); ++k)
            for (Eigen::Index s = 0; s < a.cols(); ++s) out[at++] = a(k, s);
    };
    if (p.p) push(*p.p);
    push(p.w);
    return out;
}

}  // namespace

TEST_CASE("residual evolution") {
    auto id = wrap(SymMatrix::identity(3));
    auto e = evolve_residual(id, Vector::Ones(3), 1.0, 2);
    REQUIRE(e.size() == 3);
    CHECK(e[1].norm() <= 1e-15);

    auto diag = wrap(SymMatrix::diagonal(Eigen::Vector2d(2.0, 1.0)));
    auto e2 = evolve_residual(diag, Eigen::Vector2d(1.0, 1.0), 0.5, 1);
    CHECK(std::abs(e2[1][0]) <= 1e-15);
    CHECK(e2[1][1] == doctest::Approx(0.5).epsilon(1e-14));

    SymMatrix k = test_support::random_psd(20, 5);
    const double eta = 0.9 / eig_sym(k).lambda_max;
    Vector e0 = test_support::random_matrix(20, 1, 6).col(0);
    auto traj = evolve_residual(wrap(k), e0, eta, 100);
    Matrix step = Matrix::Identity(20, 20) - eta * k.dense();
    Vector dense = e0;
    for (int t = 0; t <= 100; ++t) {
        CHECK((traj[t] - dense).norm() <= 1e-8 * std::max(1.0, e0.norm()));
        if (t > 0) CHECK(traj[t].norm() < traj[t - 1].norm());
        dense = step * dense;
    }

    // Long horizons against binary powering of the dense update.
    const int horizon = 10000;
    Matrix power = Matrix::Identity(20, 20), base = step;
    for (int bits = horizon; bits > 0; bits >>= 1) {
        if (bits & 1) power = power * base;
        base = base * base;
    }
    auto long_traj = evolve_residual(wrap(k), e0, eta, horizon);
    CHECK((long_traj.back() - power * e0).norm() <= 1e-8 * std::max(1.0, e0.norm()));
}

TEST_CASE("mode decomposition and decay") {
    SymMatrix k = test_support::random_psd(10, 7);
    Vector y = test_support::random_matrix(10, 1, 8).col(0);
    Vector e0 = test_support::random_matrix(10, 1, 9).col(0);
    auto dec = decompose(k, y, &e0);
    CHECK(dec.beta.squaredNorm() == doctest::Approx(y.squaredNorm()).epsilon(1e-12));
    CHECK(eigenmode_decay(dec, dec.e0_coeffs, 0.1, 0) == dec.e0_coeffs);

    const double eta = 0.5 / dec.eigenvalues.maxCoeff();
    auto traj = evolve_residual(wrap(k), e0, eta, 30);
    Vector rebuilt = dec.eigenvectors * eigenmode_decay(dec, dec.e0_coeffs, eta, 30);
    CHECK((rebuilt - traj[30]).norm() <= 1e-10 * e0.norm());

    auto unit = decompose(SymMatrix::diagonal(Eigen::Vector2d(1.0, 4.0)), Eigen::Vector2d(1.0, 1.0));
    Vector after = eigenmode_decay(unit, Eigen::Vector2d(3.0, 3.0), 1.0, 5);
    CHECK(after[0] == 0.0);
    CHECK_THROWS_AS(decompose(k, Vector::Zero(3)), DimensionError);
}

TEST_CASE("expected loss curves") {
    const int n = 6;
    Vector y = test_support::random_matrix(n, 1, 10).col(0);
    auto curve = expected_loss_curve(wrap(SymMatrix::identity(n)), y, 1.0, 0.5, 5);
    REQUIRE(curve.size() == 6);
    for (int t = 0; t <= 5; ++t)
        CHECK(curve[t] == doctest::Approx(std::pow(0.25, t) * (n + y.squaredNorm()) / (2.0 * n)).epsilon(1e-13));

    SymMatrix k = test_support::random_psd(n, 11);
    auto c0 = expected_loss_curve(wrap(k), y, 0.3, 0.01, 0);
    REQUIRE(c0.size() == 1);
    CHECK(c0[0] == doctest::Approx((0.3 * mat_trace(k) + y.squaredNorm()) / (2.0 * n)).epsilon(1e-12));

    const double eta = 1.0 / eig_sym(k).lambda_max;
    auto mono = expected_loss_curve(wrap(k), y, 0.3, eta, 200);
    for (std::size_t t = 1; t < mono.size(); ++t) CHECK(mono[t] <= mono[t - 1]);
}

TEST_CASE("first-order decrement") {
    auto id = wrap(SymMatrix::identity(4));
    Vector y = Vector::Ones(4);
    CHECK(expected_loss_decrement(id, y, 1.0, 1.0, 0) == doctest::Approx((4.0 + 4.0) / 4.0));
    CHECK(expected_loss_decrement(id, y, 1.0, 1.0, 1) == 0.0);

    SymMatrix k = test_support::random_psd(12, 12);
    const double lmax = eig_sym(k).lambda_max;
    for (int t : {0, 1, 10, 100}) CHECK(expected_loss_decrement(wrap(k), Vector::Zero(12), 1.0, 1.0 / lmax, t) >= 0.0);

    // Relative gap between the first-order drop and the exact drop stays O(eta).
    SymMatrix small = scale(k, 5.0 / lmax);
    Vector yy = test_support::random_matrix(12, 1, 13).col(0);
    const double eta = 1e-3;
    auto curve = expected_loss_curve(wrap(small), yy, 0.5, eta, 50);
    for (int t = 0; t < 50; ++t) {
        const double exact = curve[t] - curve[t + 1];
        const double approx = expected_loss_decrement(wrap(small), yy, 0.5, eta, t);
        CHECK(std::abs(approx - exact) <= 10.0 * eta * exact);
    }
}

TEST_CASE("early-stage discriminant and Gaussian moments") {
    CHECK(early_stage_discriminant(200, 50, 100).trace_gap == doctest::Approx(-400.0));
    for (int m : {1, 10, 100}) CHECK(early_stage_discriminant(m, 5, 300).trace_sq_gap > 0.0);

    CHECK(gaussian_norm_moment(7, 2) == 7.0);
    CHECK(gaussian_norm_moment(7, 4) == 63.0);
    CHECK(gaussian_norm_moment(3, 8) == 945.0);
    CHECK(gaussian_norm_moment(3, 0) == 1.0);
    CHECK_THROWS_AS(gaussian_norm_moment(3, 3), UnsupportedError);

    DataMatrix x = sample_gaussian_data(200000, 4, 14);
    const double fourth = x.sq_norms().array().square().mean();
    CHECK(fourth == doctest::Approx(gaussian_norm_moment(4, 4)).epsilon(0.02));

    // Trace gap against sampled structured kernels at leading order in m.
    const int m = 200, d = 50, n = 100, draws = 20;
    double sum = 0.0;
    for (int s = 0; s < draws; ++s) {
        DataMatrix z = sample_gaussian_data(n, d, 300 + s);
        sum += mat_trace(structured_ntk_plain(z, m, WidthRegime::Infinite).mat) -
               mat_trace(structured_ntk_glu(z, m, WidthRegime::Infinite).mat);
    }
    CHECK(sum / draws == doctest::Approx(-400.0).epsilon(0.05));
}

TEST_CASE("late-stage crossing estimate") {
    const double expect = std::log(2.0) / (2.0 * std::log(0.9 / 0.8));
    CHECK(crossing_step_estimate(1.0, 2.0, 0.0, 0.0, 1.0, 0.1) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(expect == doctest::Approx(2.94).epsilon(1e-3));
    CHECK_THROWS_AS(crossing_step_estimate(1.0, 1.0, 0.0, 0.0, 1.0, 0.1), RegimeError);
    CHECK_THROWS_AS(crossing_step_estimate(2.0, 1.0, 0.0, 0.0, 1.0, 0.1), RegimeError);
    CHECK_THROWS_AS(crossing_step_estimate(1.0, 20.0, 0.0, 0.0, 1.0, 0.1), RegimeError);

    // Beyond the estimate the single-mode gated loss stays below the plain one.
    const double t_star = crossing_step_estimate(1.0, 2.0, 0.3, 0.1, 1.0, 0.1);
    auto plain = [](double t) { return (1.0 + 0.09) * std::pow(0.9, 2 * t); };
    auto gated = [](double t) { return (2.0 + 0.01) * std::pow(0.8, 2 * t); };
    CHECK(gated(t_star + 0.5) < plain(t_star + 0.5));
    CHECK(gated(t_star - 0.5) > plain(t_star - 0.5));
}

TEST_CASE("crossing detection") {
    std::vector<double> a{1.0, 0.5, 0.2}, p(8), g(8);
    CHECK_FALSE(detect_crossing(a, a).has_value());
    for (int t = 0; t < 8; ++t) {
        p[t] = std::pow(2.0, -t);
        g[t] = 3.0 * std::pow(4.0, -t);
    }
    CHECK(detect_crossing(p, g) == std::optional<std::size_t>(2));

    // Ties at the start are skipped when picking the reference sign.
    std::vector<double> tp{1.0, 1.0, 0.8, 0.5}, tg{1.0, 1.0, 0.7, 0.6};
    CHECK(detect_crossing(tp, tg) == std::optional<std::size_t>(3));
    LossTrajectory traj;
    traj.losses_plain = p;
    traj.losses_gated = g;
    CHECK(detect_crossing(traj) == std::optional<std::size_t>(2));
    CHECK_THROWS_AS(detect_crossing(a, std::vector<double>{1.0}), DimensionError);

    // Structured kernels at d = 8, n = 400 with a small relative step.
    DataMatrix x = sample_gaussian_data(400, 8, 15);
    auto kp = structured_ntk_plain(x, 64), kg = structured_ntk_glu(x, 64);
    auto [y, redraws] = crossing_targets(kp.mat, kg.mat, 16);
    (void)redraws;
    const double lmax = std::max(eig_sym(kp.mat).lambda_max, eig_sym(kg.mat).lambda_max);
    const double eta = 1e-3 / lmax;
    auto cp = expected_loss_curve(kp, y, 1.0 / 64, eta, 100000);
    auto cg = expected_loss_curve(kg, y, 1.0 / 64, eta, 100000);
    CHECK(detect_crossing(cp, cg).has_value());
}

TEST_CASE("two-sample toy trajectories") {
    SymMatrix k = SymMatrix::diagonal(Eigen::Vector2d(2.0, 1.0));
    auto still = toy2_trajectories(k, k, {0.3, -0.2}, {0.3, -0.2}, 0.1, 20);
    for (const auto& z : still.plain) {
        CHECK(z[0] == 0.3);
        CHECK(z[1] == -0.2);
    }
    auto one = toy2_trajectories(k, k, {0.0, 0.0}, {1.0, 1.0}, 0.1, 1);
    CHECK(one.plain[1][0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(one.plain[1][1] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(one.axes_plain.lengths[0] > one.axes_plain.lengths[1]);

    // Steeper top mode for the plain kernel, larger bottom mode for the gated one.
    SymMatrix kp = toy2_kernel({4.0, 0.2}, 0.0), kg = toy2_kernel({2.0, 0.5}, 0.0);
    auto run = toy2_trajectories(kp, kg, {1.0, -1.0}, {0.0, 0.0}, 0.1, 1000);
    auto top_gap = [](const Point2& z) { return std::abs(z[0] - 1.0); };
    auto dist = [](const Point2& z) { return std::hypot(z[0] - 1.0, z[1] + 1.0); };
    CHECK(top_gap(run.plain[30]) < top_gap(run.gated[30]));
    CHECK(dist(run.gated[1000]) < dist(run.plain[1000]));

    SymMatrix rotated = toy2_kernel({3.0, 1.0}, 0.4);
    auto s = eig_sym(rotated);
    CHECK(s.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(s.eigenvalues[1] == doctest::Approx(3.0));
}

TEST_CASE("linearized Monte-Carlo loss") {
    const int n = 10, d = 4, m = 8, inits = 5, steps = 20;
    auto cfg = ExperimentConfig::lecun(n, d, m);
    cfg.master_seed = 17;
    DataMatrix x = sample_gaussian_data(n, d, 18);
    Vector y = make_targets(TargetKind::RandomSign, n, 19);
    auto k = structured_ntk_plain(x, m);
    const double eta = 0.5 / eig_sym(k.mat).lambda_max;
    auto mc = linearized_mc_loss(cfg, x, y, k, eta, steps, inits);
    REQUIRE(mc.size() == steps + 1);

    Matrix step = Matrix::Identity(n, n) - eta * k.mat.dense();
    std::vector<double> oracle(steps + 1, 0.0);
    for (int i = 0; i < inits; ++i) {
        Params p = init_params(cfg, derive_stream_seed(cfg.master_seed, "lin-init-" + std::to_string(i)));
        Vector e = model_outputs(p, x.x(), cfg.activation) - y;
        for (int t = 0; t <= steps; ++t) {
            oracle[t] += e.squaredNorm() / (2.0 * n) / inits;
            e = step * e;
        }
    }
    for (int t = 0; t <= steps; ++t) CHECK(mc[t] == doctest::Approx(oracle[t]).epsilon(1e-10));
}

TEST_CASE("gradient-descent trainer") {
    auto cfg = ExperimentConfig::lecun(12, 5, 16, Arch::Gated, Activation::GELU);
    cfg.steps = 15;
    cfg.eta = 0.05;
    DataMatrix x = sample_gaussian_data(12, 5, 20);
    Params p0 = init_params(cfg, 21);
    Dataset fit(x, model_outputs(p0, x.x(), cfg.activation), Custom{});
    for (double loss : train_single(cfg, fit, 21)) CHECK(loss == 0.0);

    Dataset data(x, make_targets(TargetKind::RandomSign, 12, 22), GaussianSynthetic{});
    int calls = 0;
    auto losses = train_single(cfg, data, 23, [&](int step, const Params&, double) {
        CHECK(step == calls);
        ++calls;
        return true;
    });
    CHECK(losses.size() == 16);
    CHECK(calls == 16);
    CHECK(losses == train_single(cfg, data, 23));
    CHECK(losses.back() < losses.front());

    auto tiny = cfg;
    tiny.eta = 1e-8;
    tiny.steps = 1;
    auto lg = mse_gradient(init_params(tiny, 24), x.x(), data.targets, tiny.activation);
    auto two = train_single(tiny, data, 24);
    CHECK(std::abs(two[1] - two[0]) <= tiny.eta * 2.0 * flat(lg.grad).squaredNorm());

    auto wild = cfg;
    wild.eta = 1e4;
    wild.steps = 50;
    try {
        (void)train_single(wild, data, 25);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.step() >= 1);
        CHECK(e.step() <= 50);
    }

    auto traj = train_finite_width(ExperimentConfig::lecun(12, 5, 16), data, 0.05, 10);
    CHECK(traj.source == TrajectorySource::FiniteWidthGD);
    CHECK(traj.losses_plain.size() == 11);
    CHECK(traj.losses_gated.size() == 11);
    CHECK(traj.crossing_index == detect_crossing(traj.losses_plain, traj.losses_gated));
}
