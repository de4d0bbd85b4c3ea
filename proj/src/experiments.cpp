#include "glu_ntk/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "glu_ntk/empirical_ntk.hpp"
#include "glu_ntk/rng.hpp"
#include "glu_ntk/stats.hpp"

namespace glu_ntk {

RunContext::RunContext(std::filesystem::path out_dir, std::vector<std::string> command_line, int threads,
                       TableFormat format)
    : out_dir_(std::move(out_dir)),
      threads_(std::max(1, threads)),
      format_(format),
      start_(std::chrono::steady_clock::now()) {
    manifest_.command_line = std::move(command_line);
    manifest_.version = library_version();
    if (writes()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir_, ec);
        if (ec) throw IoError("cannot create " + out_dir_.string() + ": " + ec.message());
    }
}

std::uint64_t RunContext::seed(const std::string& name, std::uint64_t value) {
    manifest_.seeds[name] = value;
    return value;
}

void RunContext::csv(const std::string& file, const CsvTable& table) {
    if (format_ == TableFormat::Csv) {
        manifest_.schemas[file] = table.schema;
        if (!writes()) return;
        write_csv(out_dir_ / file, table);
        manifest_.outputs.push_back(file);
        return;
    }
    const std::string name = std::filesystem::path(file).replace_extension(".json").string();
    manifest_.schemas[name] = table.schema;
    if (!writes()) return;
    nlohmann::json j{{"schema", table.schema}, {"columns", table.header}, {"rows", table.rows}};
    std::ofstream out(out_dir_ / name);
    if (!out) throw IoError("cannot write " + (out_dir_ / name).string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + (out_dir_ / name).string());
    manifest_.outputs.push_back(name);
}

void RunContext::svg_lines(const std::string& file, const PlotLabels& labels, const std::vector<Series>& series) {
    if (!writes()) return;
    write_svg_lines(out_dir_ / file, labels, series);
    manifest_.outputs.push_back(file);
}

void RunContext::svg_scatter(const std::string& file, const PlotLabels& labels, const std::vector<Series>& groups) {
    if (!writes()) return;
    write_svg_scatter(out_dir_ / file, labels, groups);
    manifest_.outputs.push_back(file);
}

std::optional<std::filesystem::path> RunContext::finish() {
    manifest_.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!writes()) return std::nullopt;
    manifest_.outputs.push_back("manifest.json");
    const auto path = out_dir_ / "manifest.json";
    write_manifest(path, manifest_);
    return path;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double relative_error(double observed, double predicted) {
    return std::abs(observed - predicted) / std::abs(predicted);
}

namespace {

std::string fmt(double v) { return format_double(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
std::string fmt_opt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

std::string label(const std::string& stem, long i) { return stem + std::to_string(i); }

}  // namespace

// ---- spectrum -----------------------------------------------------------

SpectrumResult run_spectrum(int n, int d, int m, std::uint64_t seed, KernelSource source, RunContext& ctx) {
    ExperimentConfig::lecun(n, d, m).validate();
    const DataMatrix x = sample_gaussian_data(n, d, ctx.seed("data", derive_stream_seed(seed, "spectrum-data")));
    KernelMatrix kp, kg;
    if (source == KernelSource::Structured) {
        kp = structured_ntk_plain(x, m);
        kg = structured_ntk_glu(x, m);
    } else {
        kp = expected_ntk_plain(x, ExperimentConfig::lecun(n, d, m, Arch::Plain));
        kg = expected_ntk_glu(x, ExperimentConfig::lecun(n, d, m, Arch::Gated));
    }
    SpectrumResult r{eig_sym(kp.mat), eig_sym(kg.mat), theory_estimates(m, d, n)};
    ctx.manifest().config = {{"n", n}, {"d", d}, {"m", m}, {"seed", seed},
                             {"kernel", source == KernelSource::Structured ? "structured" : "expected"}};

    CsvTable eig{"spectrum.v1", {"index", "lambda_plain", "lambda_gated"}, {}};
    for (Eigen::Index i = 0; i < r.plain.eigenvalues.size(); ++i) {
        eig.add({std::to_string(i), fmt(r.plain.eigenvalues[i]), fmt(r.gated.eigenvalues[i])});
    }
    ctx.csv("spectrum.csv", eig);

    const TheoryEstimate& t = r.theory;
    CsvTable thy{"theory.v1", {"quantity", "numeric", "theory", "theory_upper"}, {}};
    thy.add({"lambda_max_plain", fmt(r.plain.lambda_max), fmt(t.lambda_max_plain), fmt(t.lambda_max_plain)});
    thy.add({"lambda_max_gated", fmt(r.gated.lambda_max), fmt(t.lambda_max_glu_lower), fmt(t.lambda_max_glu_upper)});
    thy.add({"lambda_min_plain", fmt(r.plain.lambda_min), fmt(t.lambda_min_plain), fmt(t.lambda_min_plain)});
    thy.add({"lambda_min_gated", fmt(r.gated.lambda_min), fmt(t.lambda_min_glu), fmt(t.lambda_min_glu)});
    thy.add({"kappa_plain", fmt_opt(r.plain.kappa), fmt(t.kappa_plain), fmt(t.kappa_plain)});
    thy.add({"kappa_gated", fmt_opt(r.gated.kappa), fmt(t.kappa_glu), fmt(t.kappa_glu)});
    ctx.csv("theory.csv", thy);

    std::vector<double> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    ctx.svg_lines("spectrum.svg", {"NTK spectrum", "index", "eigenvalue", false, true},
                  {{"plain", idx, vec(r.plain.eigenvalues)}, {"gated", idx, vec(r.gated.eigenvalues)}});
    return r;
}

// ---- condition-number sweep ---------------------------------------------

std::vector<SweepRow> run_condition_sweep(const SweepSpec& spec, RunContext& ctx) {
    if (spec.d_list.empty()) throw ArgumentError("sweep: the list of dimensions is empty");
    if (spec.seeds < 1) throw ArgumentError("sweep: seeds must be >= 1");
    for (int d : spec.d_list) {
        if (d < 2) throw ArgumentError("sweep: every d must be >= 2");
    }
    struct Job {
        int d, n, m, seed;
        std::uint64_t data_seed;
    };
    std::vector<Job> jobs;
    for (int d : spec.d_list) {
        const int n = static_cast<int>(std::lround(spec.n_ratio * d));
        const int m = static_cast<int>(std::lround(spec.m_ratio * d));
        ExperimentConfig::lecun(n, d, m).validate();
        for (int s = 0; s < spec.seeds; ++s) {
            const std::string name = "sweep-d" + std::to_string(d) + "-s" + std::to_string(s);
            jobs.push_back({d, n, m, s, ctx.seed(name, derive_stream_seed(spec.master_seed, name))});
        }
    }
    std::vector<SweepRow> rows(2 * jobs.size());
    parallel_for(jobs.size(), ctx.threads(), [&](std::size_t j) {
        const Job& job = jobs[j];
        const DataMatrix x = sample_gaussian_data(job.n, job.d, job.data_seed);
        const TheoryEstimate t = theory_estimates(job.m, job.d, job.n);
        const SpectralSummary sp = eig_sym(structured_ntk_plain(x, job.m).mat);
        const SpectralSummary sg = eig_sym(structured_ntk_glu(x, job.m).mat);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        rows[2 * j] = {job.d, job.n, job.m, job.seed, Arch::Plain, sp.lambda_max, t.lambda_max_plain,
                       t.lambda_max_plain, sp.lambda_min, t.lambda_min_plain, sp.kappa.value_or(nan), t.kappa_plain};
        rows[2 * j + 1] = {job.d, job.n, job.m, job.seed, Arch::Gated, sg.lambda_max, t.lambda_max_glu_lower,
                           t.lambda_max_glu_upper, sg.lambda_min, t.lambda_min_glu, sg.kappa.value_or(nan),
                           t.kappa_glu};
    });

    ctx.manifest().config = {{"d_list", spec.d_list}, {"n_ratio", spec.n_ratio}, {"m_ratio", spec.m_ratio},
                             {"seeds", spec.seeds}, {"master_seed", spec.master_seed}};
    CsvTable csv{"sweep.v1",
                 {"d", "n", "m", "seed", "arch", "lambda_max_num", "lambda_max_thy", "lambda_max_thy_upper",
                  "lambda_min_num", "lambda_min_thy", "kappa_num", "kappa_thy"},
                 {}};
    for (const auto& r : rows) {
        csv.add({fmt(r.d), fmt(r.n), fmt(r.m), fmt(r.seed), std::string(to_string(r.arch)), fmt(r.lambda_max_num),
                 fmt(r.lambda_max_thy), fmt(r.lambda_max_thy_upper), fmt(r.lambda_min_num), fmt(r.lambda_min_thy),
                 fmt(r.kappa_num), fmt(r.kappa_thy)});
    }
    ctx.csv("sweep.csv", csv);

    // Seed-averaged curves against d.
    auto curve = [&](Arch arch, double SweepRow::*field) {
        Series s;
        for (int d : spec.d_list) {
            double acc = 0.0;
            int cnt = 0;
            for (const auto& r : rows) {
                if (r.d == d && r.arch == arch) acc += r.*field, ++cnt;
            }
            s.x.push_back(d);
            s.y.push_back(acc / cnt);
        }
        return s;
    };
    auto named = [](Series s, std::string name) {
        s.name = std::move(name);
        return s;
    };
    for (auto [file, num, thy, title] :
         {std::tuple{"sweep_lambda_max.svg", &SweepRow::lambda_max_num, &SweepRow::lambda_max_thy, "largest eigenvalue"},
          std::tuple{"sweep_lambda_min.svg", &SweepRow::lambda_min_num, &SweepRow::lambda_min_thy, "smallest eigenvalue"},
          std::tuple{"sweep_kappa.svg", &SweepRow::kappa_num, &SweepRow::kappa_thy, "condition number"}}) {
        ctx.svg_lines(file, {title, "d", title, true, true},
                      {named(curve(Arch::Plain, num), "plain numeric"), named(curve(Arch::Plain, thy), "plain theory"),
                       named(curve(Arch::Gated, num), "gated numeric"), named(curve(Arch::Gated, thy), "gated theory")});
    }
    return rows;
}

// ---- loss crossing ------------------------------------------------------

std::pair<Vector, int> crossing_targets(const SymMatrix& k_plain, const SymMatrix& k_gated, std::uint64_t seed,
                                        int max_tries) {
    const SymMatrix diff = axpy(k_plain, -1.0, k_gated);
    const int n = static_cast<int>(k_plain.order());
    for (int tries = 0; tries < max_tries; ++tries) {
        Vector y = make_targets(TargetKind::RandomSign, n, derive_stream_seed(seed, label("y-", tries)));
        if (quadratic_form(diff, y) >= 0.0) return {std::move(y), tries};
    }
    throw StatisticsError("no random-sign target with y^T (K - K~) y >= 0 in " + std::to_string(max_tries) +
                          " draws");
}

std::vector<CrossingRun> run_loss_crossing(const CrossingSpec& spec, RunContext& ctx) {
    if (spec.seeds < 1) throw ArgumentError("crossing: seeds must be >= 1");
    if (spec.steps < 0) throw ArgumentError("crossing: steps must be >= 0");
    if (!(spec.eta > 0.0)) throw ArgumentError("crossing: eta must be positive");
    const bool idx = !spec.data.images.empty();
    std::optional<Dataset> idx_data;
    if (idx) {
        IdxLoadOptions opts;
        opts.limit = static_cast<std::size_t>(spec.n);
        opts.normalize = true;
        idx_data.emplace(load_idx(spec.data.images, spec.data.labels, opts));
    }
    const int d = idx ? static_cast<int>(idx_data->data.d()) : spec.d;
    const int n = idx ? static_cast<int>(idx_data->data.n()) : spec.n;
    const ExperimentConfig base = ExperimentConfig::lecun(n, d, spec.m, Arch::Plain, spec.activation);
    if (spec.source == CrossingSource::Expected && spec.activation != Activation::ReLU) {
        throw UnsupportedError("crossing: the expected-loss source needs the ReLU closed form");
    }

    std::vector<std::uint64_t> data_seeds, y_seeds, init_seeds;
    for (int s = 0; s < spec.seeds; ++s) {
        data_seeds.push_back(ctx.seed(label("cross-data-s", s), derive_stream_seed(spec.master_seed, label("cross-data-s", s))));
        y_seeds.push_back(ctx.seed(label("cross-y-s", s), derive_stream_seed(spec.master_seed, label("cross-y-s", s))));
        init_seeds.push_back(ctx.seed(label("cross-init-s", s), derive_stream_seed(spec.master_seed, label("cross-init-s", s))));
    }

    std::vector<CrossingRun> runs(static_cast<std::size_t>(spec.seeds));
    parallel_for(runs.size(), ctx.threads(), [&](std::size_t s) {
        CrossingRun& run = runs[s];
        run.seed = static_cast<int>(s);
        const DataMatrix x = idx ? idx_data->data : sample_gaussian_data(n, d, data_seeds[s]);
        if (spec.source == CrossingSource::Expected) {
            const KernelMatrix kp = structured_ntk_plain(x, spec.m);
            const KernelMatrix kg = structured_ntk_glu(x, spec.m);
            Vector y;
            if (idx) {
                y = idx_data->targets;
            } else {
                std::tie(y, run.target_resamples) = crossing_targets(kp.mat, kg.mat, y_seeds[s]);
            }
            const ModeDecomposition mp = decompose(kp.mat, y);
            const ModeDecomposition mg = decompose(kg.mat, y);
            run.lambda_max = std::max(mp.eigenvalues[n - 1], mg.eigenvalues[n - 1]);
            // The trainer minimises (1/2n)||e||^2, so its residual step is (I - (eta/n) K).
            const double eta = spec.eta_relative ? spec.eta / run.lambda_max : spec.eta / n;
            LossTrajectory& tr = run.trajectory;
            tr.eta = eta;
            tr.source = TrajectorySource::ExpectedClosedForm;
            tr.losses_plain = expected_loss_curve(mp, base.sigma_v2, eta, spec.steps);
            tr.losses_gated = expected_loss_curve(mg, base.sigma_v2, eta, spec.steps);
            tr.crossing_index = detect_crossing(tr);
            try {
                run.estimate = crossing_step_estimate(mp.eigenvalues[0], mg.eigenvalues[0], mp.beta[0], mg.beta[0],
                                                      base.sigma_v2, eta);
            } catch (const RegimeError&) {
                run.estimate.reset();
            }
        } else {
            const Vector y = idx ? idx_data->targets : make_targets(TargetKind::RandomSign, n, y_seeds[s]);
            ExperimentConfig cfg = base;
            cfg.master_seed = init_seeds[s];
            run.trajectory = train_finite_width(cfg, Dataset(x, y, Custom{}), spec.eta, spec.steps);
        }
    });

    for (const CrossingRun& run : runs) {
        const auto s = static_cast<std::size_t>(run.seed);
        if (spec.source == CrossingSource::Expected && !idx) {
            ctx.seed(label("cross-y-s", run.seed) + "-accepted",
                     derive_stream_seed(y_seeds[s], label("y-", run.target_resamples)));
        } else if (spec.source == CrossingSource::FiniteWidth) {
            ctx.seed(label("cross-init-s", run.seed) + "-plain", derive_stream_seed(init_seeds[s], "init-plain"));
            ctx.seed(label("cross-init-s", run.seed) + "-gated", derive_stream_seed(init_seeds[s], "init-gated"));
        }
    }

    ctx.manifest().config = {{"source", spec.source == CrossingSource::Expected ? "expected" : "finite-width"},
                             {"data", idx ? "idx" : "gaussian"},
                             {"n", n},
                             {"d", d},
                             {"m", spec.m},
                             {"activation", std::string(to_string(spec.activation))},
                             {"eta", spec.eta},
                             {"eta_relative", spec.eta_relative},
                             {"steps", spec.steps},
                             {"seeds", spec.seeds},
                             {"master_seed", spec.master_seed}};
    if (idx) ctx.manifest().config["idx"] = {spec.data.images.string(), spec.data.labels.string()};

    CsvTable curves{"crossing_curves.v1", {"seed", "step", "loss_plain", "loss_gated"}, {}};
    CsvTable summary{"crossing_summary.v1",
                     {"seed", "eta", "eta_kernel", "crossing_index", "estimate", "target_resamples"},
                     {}};
    for (const auto& run : runs) {
        const auto& tr = run.trajectory;
        for (std::size_t k = 0; k < tr.losses_plain.size(); ++k) {
            curves.add({fmt(run.seed), std::to_string(k), fmt(tr.losses_plain[k]), fmt(tr.losses_gated[k])});
        }
        const double eta_kernel = spec.source == CrossingSource::Expected ? tr.eta : tr.eta / n;
        summary.add({fmt(run.seed), fmt(spec.eta), fmt(eta_kernel), fmt_opt(tr.crossing_index), fmt_opt(run.estimate),
                     fmt(run.target_resamples)});
    }
    ctx.csv("crossing_curves.csv", curves);
    ctx.csv("crossing_summary.csv", summary);

    const auto& tr = runs.front().trajectory;
    std::vector<double> steps(tr.losses_plain.size());
    for (std::size_t k = 0; k < steps.size(); ++k) steps[k] = static_cast<double>(k);
    ctx.svg_lines("crossing.svg", {"training loss (seed 0)", "step", "loss", false, true},
                  {{"plain", steps, tr.losses_plain}, {"gated", steps, tr.losses_gated}});
    return runs;
}

// ---- generalization gap -------------------------------------------------

GapResult run_gap_scatter(const GapSpec& spec, RunContext& ctx) {
    if (spec.seeds < 1) throw ArgumentError("gap: seeds must be >= 1");
    if (spec.snapshot_every < 1) throw ArgumentError("gap: snapshot interval must be >= 1");
    const int per_run = spec.steps / spec.snapshot_every;
    if (per_run * spec.seeds < 5) {
        throw StatisticsError("gap: the grid yields " + std::to_string(per_run * spec.seeds) +
                              " points per group; the permutation test needs at least 5");
    }
    struct Job {
        int seed;
        Arch arch;
        bool second_group;
        std::uint64_t init_seed;
    };
    std::vector<std::uint64_t> train_seeds, eval_seeds, teacher_seeds;
    std::vector<Job> jobs;
    for (int s = 0; s < spec.seeds; ++s) {
        train_seeds.push_back(ctx.seed(label("gap-train-s", s), derive_stream_seed(spec.master_seed, label("gap-train-s", s))));
        eval_seeds.push_back(ctx.seed(label("gap-eval-s", s), derive_stream_seed(spec.master_seed, label("gap-eval-s", s))));
        teacher_seeds.push_back(ctx.seed(label("gap-teacher-s", s), derive_stream_seed(spec.master_seed, label("gap-teacher-s", s))));
        const std::string a = label("gap-init-a-s", s), b = label("gap-init-b-s", s);
        jobs.push_back({s, Arch::Plain, false, ctx.seed(a, derive_stream_seed(spec.master_seed, a))});
        jobs.push_back({s, spec.control ? Arch::Plain : Arch::Gated, true,
                        ctx.seed(b, derive_stream_seed(spec.master_seed, b))});
    }

    std::vector<std::vector<GapPoint>> per_job(jobs.size());
    parallel_for(jobs.size(), ctx.threads(), [&](std::size_t j) {
        const Job& job = jobs[j];
        const auto s = static_cast<std::size_t>(job.seed);
        const DataMatrix xtr = sample_gaussian_data(spec.n, spec.d, train_seeds[s]);
        const DataMatrix xev = sample_gaussian_data(spec.n, spec.d, eval_seeds[s]);
        const Dataset train(xtr, teacher_targets(xtr, teacher_seeds[s]), GaussianSynthetic{});
        const Vector yev = teacher_targets(xev, teacher_seeds[s]);
        ExperimentConfig cfg = ExperimentConfig::lecun(spec.n, spec.d, spec.m, job.arch, spec.activation);
        cfg.eta = spec.eta;
        cfg.steps = spec.steps;
        train_single(cfg, train, job.init_seed, [&](int step, const Params& p, double loss) {
            if (step > 0 && step % spec.snapshot_every == 0) {
                const double eval = (model_outputs(p, xev.x(), spec.activation) - yev).squaredNorm() / (2.0 * spec.n);
                per_job[j].push_back({loss, eval - loss, job.arch, job.seed, step});
            }
            return true;
        });
    });

    GapResult out;
    std::vector<Point2> ga, gb;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        for (const auto& p : per_job[j]) {
            out.points.push_back(p);
            (jobs[j].second_group ? gb : ga).push_back({p.train_loss, p.gap});
        }
    }
    const std::uint64_t perm_seed = ctx.seed("gap-perm", derive_stream_seed(spec.master_seed, "gap-perm"));
    out.energy = energy_distance(ga, gb);
    out.p_value = permutation_test(ga, gb, spec.num_perms, perm_seed);

    ctx.manifest().config = {{"n", spec.n}, {"d", spec.d}, {"m", spec.m},
                             {"activation", std::string(to_string(spec.activation))},
                             {"eta", spec.eta}, {"steps", spec.steps}, {"snapshot_every", spec.snapshot_every},
                             {"seeds", spec.seeds}, {"num_perms", spec.num_perms}, {"control", spec.control},
                             {"eval_split", "held-out draw, same size as training"},
                             {"targets", "sign of a Gaussian teacher direction"},
                             {"master_seed", spec.master_seed}};
    ctx.manifest().results = {{"energy_distance", out.energy}, {"p_value", out.p_value}};
    CsvTable csv{"gap.v1", {"seed", "group", "arch", "step", "train_loss", "gap"}, {}};
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        for (const auto& p : per_job[j]) {
            csv.add({fmt(p.seed), jobs[j].second_group ? "b" : "a", std::string(to_string(p.arch)), fmt(p.step),
                     fmt(p.train_loss), fmt(p.gap)});
        }
    }
    ctx.csv("gap.csv", csv);
    CsvTable test{"gap_test.v1", {"energy_distance", "p_value", "num_perms"}, {}};
    test.add({fmt(out.energy), fmt(out.p_value), fmt(spec.num_perms)});
    ctx.csv("gap_test.csv", test);
    auto series = [](const std::string& name, const std::vector<Point2>& pts) {
        Series s{name, {}, {}};
        for (const auto& p : pts) s.x.push_back(p[0]), s.y.push_back(p[1]);
        return s;
    };
    ctx.svg_scatter("gap.svg", {"generalization gap vs training loss", "training loss", "gap", false, false},
                    {series(spec.control ? "plain (a)" : "plain", ga), series(spec.control ? "plain (b)" : "gated", gb)});
    return out;
}

// ---- two-sample toy -----------------------------------------------------

SymMatrix toy2_kernel(const Point2& lam, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Matrix r(2, 2);
    r << c, -s, s, c;
    return SymMatrix(Matrix(r * Eigen::Vector2d(lam[0], lam[1]).asDiagonal() * r.transpose()));
}

Toy2Result run_toy2(const Toy2Spec& spec, RunContext& ctx) {
    const Toy2Result r = toy2_trajectories(toy2_kernel(spec.lam_plain, spec.angle), toy2_kernel(spec.lam_gated, spec.angle),
                                           spec.y, spec.z0, spec.eta, spec.steps);
    ctx.manifest().config = {{"lam_plain", spec.lam_plain}, {"lam_gated", spec.lam_gated}, {"angle", spec.angle},
                             {"y", spec.y}, {"z0", spec.z0}, {"eta", spec.eta}, {"steps", spec.steps}};
    CsvTable csv{"toy2.v1", {"step", "plain_z1", "plain_z2", "gated_z1", "gated_z2"}, {}};
    for (std::size_t t = 0; t < r.plain.size(); ++t) {
        csv.add({std::to_string(t), fmt(r.plain[t][0]), fmt(r.plain[t][1]), fmt(r.gated[t][0]), fmt(r.gated[t][1])});
    }
    ctx.csv("toy2.csv", csv);
    CsvTable axes{"toy2_axes.v1", {"model", "axis", "dir1", "dir2", "length"}, {}};
    for (auto [name, ax] : {std::pair{"plain", &r.axes_plain}, std::pair{"gated", &r.axes_gated}}) {
        for (int i = 0; i < 2; ++i) {
            axes.add({name, std::to_string(i), fmt(ax->directions[i][0]), fmt(ax->directions[i][1]),
                      fmt(ax->lengths[i])});
        }
    }
    ctx.csv("toy2_axes.csv", axes);
    auto path = [](const std::string& name, const std::vector<Point2>& pts) {
        Series s{name, {}, {}};
        for (const auto& p : pts) s.x.push_back(p[0]), s.y.push_back(p[1]);
        return s;
    };
    ctx.svg_lines("toy2.svg", {"two-sample trajectories", "z1", "z2", false, false},
                  {path("plain", r.plain), path("gated", r.gated), Series{"target", {spec.y[0]}, {spec.y[1]}}});
    return r;
}

// ---- empirical NTK ------------------------------------------------------

EmpiricalNtkResult run_empirical_ntk(const ExperimentConfig& cfg, int num_inits, std::uint64_t data_seed,
                                     RunContext& ctx) {
    cfg.validate();
    const DataMatrix x = sample_gaussian_data(cfg.n, cfg.d, ctx.seed("data", data_seed));
    for (int i = 0; i < num_inits; ++i) {
        const std::string name = label("ntk-init-", i);
        ctx.seed(name, derive_stream_seed(cfg.master_seed, name));
    }
    EmpiricalNtkResult r{empirical_ntk(cfg, x, num_inits), std::nullopt};
    std::optional<KernelMatrix> closed;
    if (cfg.activation == Activation::ReLU) {
        closed = cfg.arch == Arch::Plain ? expected_ntk_plain(x, cfg) : expected_ntk_glu(x, cfg);
        r.rel_error_vs_closed_form = relative_frobenius(r.kernel.mat, closed->mat);
    }
    ctx.manifest().config = {{"n", cfg.n}, {"d", cfg.d}, {"m", cfg.m}, {"arch", std::string(to_string(cfg.arch))},
                             {"activation", std::string(to_string(cfg.activation))}, {"sigma_w2", cfg.sigma_w2},
                             {"sigma_p2", cfg.sigma_p2}, {"sigma_v2", cfg.sigma_v2}, {"num_inits", num_inits},
                             {"master_seed", cfg.master_seed}};
    if (r.rel_error_vs_closed_form) ctx.manifest().results = {{"rel_frobenius_error", *r.rel_error_vs_closed_form}};
    CsvTable csv{"empirical_ntk.v1", {"i", "j", "empirical", "closed_form"}, {}};
    for (Eigen::Index j = 0; j < x.n(); ++j) {
        for (Eigen::Index i = j; i < x.n(); ++i) {
            csv.add({std::to_string(i), std::to_string(j), fmt(r.kernel.mat(i, j)),
                     closed ? fmt(closed->mat(i, j)) : std::string()});
        }
    }
    ctx.csv("empirical_ntk.csv", csv);
    return r;
}

// ---- random-matrix checks -----------------------------------------------

namespace {

Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) x(i, j) = rng.normal();
    return x;
}

}  // namespace

SymMatrix sample_wishart(int n, int d, std::uint64_t seed) {
    if (n < 1 || d < 1) throw ArgumentError("sample_wishart: n and d must be >= 1");
    const Matrix x = gaussian_matrix(n, d, seed);
    Matrix w(n, n);
    w.triangularView<Eigen::Lower>() = (x * x.transpose()) / static_cast<double>(d);
    return SymMatrix(std::move(w));
}

SymMatrix sample_spiked_wishart(int n, int d, double theta, std::uint64_t seed) {
    const SymMatrix w = sample_wishart(n, d, derive_stream_seed(seed, "bulk"));
    Vector u = gaussian_matrix(n, 1, derive_stream_seed(seed, "spike")).col(0);
    u.normalize();
    return axpy(w, theta, SymMatrix::outer(u));
}

SymMatrix sample_hadamard_wishart(int n, int d, std::uint64_t seed) {
    const SymMatrix w = sample_wishart(n, d, seed);
    return hadamard(w, w);
}

std::vector<RmtCheck> run_rmt_check(std::uint64_t seed, RunContext& ctx) {
    std::vector<RmtCheck> out;
    auto add = [&](std::string name, double predicted, double observed, double tol) {
        out.push_back({std::move(name), predicted, observed, relative_error(observed, predicted), tol});
        ctx.tolerance(out.back().name, tol);
    };
    {
        const MpParams e = mp_edges(500.0 / 2000.0);
        const SpectralSummary s = eig_sym(sample_wishart(500, 2000, ctx.seed("mp", derive_stream_seed(seed, "mp"))));
        add("mp_lambda_max", e.upper, s.lambda_max, 0.03);
        add("mp_lambda_min", e.lower, s.lambda_min, 0.10);
    }
    {
        const auto [hi, lo] = karoui_hadamard_prediction(1000, 500);
        const SpectralSummary s =
            eig_sym(sample_hadamard_wishart(1000, 500, ctx.seed("karoui", derive_stream_seed(seed, "karoui"))));
        add("karoui_lambda_max", hi, s.lambda_max, 0.10);
        add("karoui_lambda_min", lo, s.lambda_min, 0.10);
    }
    {
        const auto [lo, hi] = hadamard_lsd_edges(1000, 200);
        const SpectralSummary s =
            eig_sym(sample_hadamard_wishart(1000, 200, ctx.seed("hadamard-lsd", derive_stream_seed(seed, "hadamard-lsd"))));
        add("hadamard_lsd_lambda_min", lo, s.lambda_min, 0.10);
        (void)hi;
    }
    {
        const double predicted = bbp_lambda_max(0.5, 3.0);
        const SpectralSummary s =
            eig_sym(sample_spiked_wishart(500, 1000, 3.0, ctx.seed("bbp", derive_stream_seed(seed, "bbp"))));
        add("bbp_lambda_max", predicted, s.lambda_max, 0.05);
    }
    ctx.manifest().config = {{"seed", seed}};
    CsvTable csv{"rmt_check.v1", {"check", "predicted", "observed", "rel_error", "tolerance", "pass"}, {}};
    for (const auto& c : out) {
        csv.add({c.name, fmt(c.predicted), fmt(c.observed), fmt(c.rel_error), fmt(c.tolerance), c.pass() ? "1" : "0"});
    }
    ctx.csv("rmt_check.csv", csv);
    return out;
}

}  // namespace glu_ntk
