#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glu_ntk/datagen.hpp"
#include "glu_ntk/experiments.hpp"

using namespace glu_ntk;

namespace {

struct Common {
    int n = 256;
    int d = 64;
    int m = 512;
    std::string arch = "plain";
    std::string act = "relu";
    double eta = 0.005;
    int steps = 200;
    std::uint64_t seed = 0;
    int seeds = 1;
    std::string out;
    int threads = 1;
    std::string format = "csv";
    std::string preset = "lecun";
};

void add_common(CLI::App* app, Common& c, bool model_flags) {
    if (model_flags) {
        app->add_option("-n", c.n, "number of samples (>= 2)")->capture_default_str();
        app->add_option("-d", c.d, "input dimension")->capture_default_str();
        app->add_option("-m", c.m, "hidden width")->capture_default_str();
    }
    app->add_option("--seed", c.seed, "master seed")->capture_default_str();
    app->add_option("--out", c.out, "output directory (default $GLU_NTK_OUT, else out/<command>)");
    app->add_option("--threads", c.threads, "worker threads for independent runs")->capture_default_str();
    app->add_option("--format", c.format, "table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app->add_option("--preset", c.preset, "initialization preset")->check(CLI::IsMember({"lecun"}))->capture_default_str();
}

std::filesystem::path out_dir(const Common& c, const std::string& command) {
    if (!c.out.empty()) return c.out;
    if (const char* env = std::getenv("GLU_NTK_OUT"); env && *env) return std::filesystem::path(env) / command;
    return std::filesystem::path("out") / command;
}

RunContext context(const Common& c, const std::string& command, const std::vector<std::string>& argv) {
    if (c.threads < 1) throw ArgumentError("--threads must be >= 1");
    return RunContext(out_dir(c, command), argv, c.threads, c.format == "json" ? TableFormat::Json : TableFormat::Csv);
}

Point2 pair_of(const std::vector<double>& v, const char* flag) {
    if (v.size() != 2) throw ArgumentError(std::string(flag) + " takes exactly two comma-separated values");
    return {v[0], v[1]};
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

void finish(RunContext& ctx) {
    if (auto path = ctx.finish()) std::printf("wrote %s\n", path->string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Spectral and training-dynamics experiments for two-layer plain and gated (GLU) networks."};
    app.require_subcommand(1);
    app.set_version_flag("--version", library_version());

    Common c;
    std::string kernel = "structured";
    std::vector<int> d_list{64, 128, 256};
    double n_ratio = 4.0, m_ratio = 8.0;
    std::string source = "expected", images, labels;
    bool eta_relative = false;
    std::vector<double> lam_plain{4.0, 0.2}, lam_gated{2.0, 0.5}, toy_y{1.0, -1.0}, toy_z0{0.0, 0.0};
    double angle = 0.5;
    int inits = 20, snapshot_every = 50, perms = 999, gap_seeds = 5;
    bool control = false;
    std::size_t limit = 0;

    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of the structured (or expected) NTKs of both models\n"
                                                    "  spectrum.csv: index, lambda_plain, lambda_gated\n"
                                                    "  theory.csv: quantity, numeric, theory, theory_upper");
    add_common(spectrum, c, true);
    spectrum->add_option("--kernel", kernel, "kernel construction")
        ->check(CLI::IsMember({"structured", "expected"}))
        ->capture_default_str();

    auto* sweep = app.add_subcommand("sweep-cond", "theory vs numeric extreme eigenvalues and condition numbers over d\n"
                                                   "  sweep.csv: d, n, m, seed, arch, lambda_max_num, lambda_max_thy,\n"
                                                   "             lambda_max_thy_upper, lambda_min_num, lambda_min_thy,\n"
                                                   "             kappa_num, kappa_thy");
    add_common(sweep, c, false);
    sweep->add_option("--d-list", d_list, "comma-separated input dimensions")->delimiter(',')->capture_default_str();
    sweep->add_option("--n-ratio", n_ratio, "n / d")->capture_default_str();
    sweep->add_option("--m-ratio", m_ratio, "m / d")->capture_default_str();
    sweep->add_option("--seeds", c.seeds, "replications per d")->capture_default_str();

    auto* crossing = app.add_subcommand("crossing", "paired plain/gated loss curves and their crossing step\n"
                                                    "  crossing_curves.csv: seed, step, loss_plain, loss_gated\n"
                                                    "  crossing_summary.csv: seed, eta, eta_kernel, crossing_index,\n"
                                                    "                        estimate, target_resamples\n"
                                                    "  eta is in gradient-descent units; expected curves step with\n"
                                                    "  (I - eta_kernel K), eta_kernel = eta/n (or eta/lambda_max)");
    add_common(crossing, c, true);
    crossing->add_option("--source", source, "expected closed form or finite-width training")
        ->check(CLI::IsMember({"expected", "finite-width"}))
        ->capture_default_str();
    crossing->add_option("--act", c.act, "activation")->check(CLI::IsMember({"relu", "gelu", "silu"}))->capture_default_str();
    crossing->add_option("--eta", c.eta, "learning rate")->capture_default_str();
    crossing->add_flag("--eta-relative", eta_relative, "expected source: use eta / lambda_max");
    crossing->add_option("--steps", c.steps, "gradient steps")->capture_default_str();
    crossing->add_option("--seeds", c.seeds, "replications")->capture_default_str();
    crossing->add_option("--images", images, "IDX image file (uses -n as a sample limit)");
    crossing->add_option("--labels", labels, "IDX label file");

    auto* toy2 = app.add_subcommand("toy2", "two-sample gradient-descent trajectories in output space\n"
                                            "  toy2.csv: step, plain_z1, plain_z2, gated_z1, gated_z2\n"
                                            "  toy2_axes.csv: model, axis, dir1, dir2, length");
    add_common(toy2, c, false);
    toy2->add_option("--lam-plain", lam_plain, "plain kernel eigenvalues")->delimiter(',')->capture_default_str();
    toy2->add_option("--lam-gated", lam_gated, "gated kernel eigenvalues")->delimiter(',')->capture_default_str();
    toy2->add_option("--angle", angle, "rotation of the shared eigenbasis (radians)")->capture_default_str();
    toy2->add_option("--y", toy_y, "targets")->delimiter(',')->capture_default_str();
    toy2->add_option("--z0", toy_z0, "initial outputs")->delimiter(',')->capture_default_str();
    toy2->add_option("--eta", c.eta, "learning rate")->capture_default_str();
    toy2->add_option("--steps", c.steps, "steps")->capture_default_str();

    auto* emp = app.add_subcommand("empirical-ntk", "Monte-Carlo NTK of finite-width networks vs the ReLU closed form\n"
                                                    "  empirical_ntk.csv: i, j, empirical, closed_form");
    add_common(emp, c, true);
    emp->add_option("--arch", c.arch, "architecture")->check(CLI::IsMember({"plain", "gated"}))->capture_default_str();
    emp->add_option("--act", c.act, "activation")->check(CLI::IsMember({"relu", "gelu", "silu"}))->capture_default_str();
    emp->add_option("--inits", inits, "parameter draws to average")->capture_default_str();

    auto* gap = app.add_subcommand("gap", "generalization gap vs training loss, with an energy-distance permutation test\n"
                                          "  gap.csv: seed, group, arch, step, train_loss, gap\n"
                                          "  gap_test.csv: energy_distance, p_value, num_perms");
    add_common(gap, c, true);
    gap->add_option("--act", c.act, "activation")->check(CLI::IsMember({"relu", "gelu", "silu"}))->capture_default_str();
    gap->add_option("--eta", c.eta, "learning rate")->capture_default_str();
    gap->add_option("--steps", c.steps, "gradient steps")->capture_default_str();
    gap->add_option("--snapshot-every", snapshot_every, "steps between recorded points")->capture_default_str();
    gap->add_option("--seeds", gap_seeds, "training runs per architecture")->capture_default_str();
    gap->add_option("--perms", perms, "permutations (>= 100)")->capture_default_str();
    gap->add_flag("--control", control, "train the plain model in both groups");

    auto* rmt = app.add_subcommand("rmt-check", "sampled random matrices against their predicted extreme eigenvalues\n"
                                                "  rmt_check.csv: check, predicted, observed, rel_error, tolerance, pass");
    add_common(rmt, c, false);

    auto* idx = app.add_subcommand("idx-info", "header and label counts of an IDX image/label pair");
    idx->add_option("--images", images, "IDX image file")->required();
    idx->add_option("--labels", labels, "IDX label file")->required();
    idx->add_option("--limit", limit, "only inspect the first N samples (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*spectrum) {
            ExperimentConfig::lecun(c.n, c.d, c.m).validate();
            RunContext ctx = context(c, "spectrum", args);
            const auto r = run_spectrum(c.n, c.d, c.m, c.seed,
                                        kernel == "structured" ? KernelSource::Structured : KernelSource::Expected, ctx);
            std::printf("spectrum n=%d d=%d m=%d: lambda_max %s / %s, lambda_min %s / %s, kappa %s / %s (plain / gated)\n",
                        c.n, c.d, c.m, format_double(r.plain.lambda_max).c_str(),
                        format_double(r.gated.lambda_max).c_str(), format_double(r.plain.lambda_min).c_str(),
                        format_double(r.gated.lambda_min).c_str(), opt(r.plain.kappa).c_str(), opt(r.gated.kappa).c_str());
            finish(ctx);
        } else if (*sweep) {
            RunContext ctx = context(c, "sweep-cond", args);
            SweepSpec spec{d_list, n_ratio, m_ratio, c.seeds, c.seed};
            const auto rows = run_condition_sweep(spec, ctx);
            int ordered = 0;
            for (std::size_t i = 0; i + 1 < rows.size(); i += 2) ordered += rows[i + 1].kappa_num < rows[i].kappa_num;
            std::printf("sweep: %zu runs, kappa(gated) < kappa(plain) in %d\n", rows.size() / 2, ordered);
            finish(ctx);
        } else if (*crossing) {
            if (images.empty() != labels.empty()) throw ArgumentError("--images and --labels go together");
            RunContext ctx = context(c, "crossing", args);
            CrossingSpec spec;
            spec.source = source == "expected" ? CrossingSource::Expected : CrossingSource::FiniteWidth;
            spec.data = {images, labels};
            spec.n = c.n;
            spec.d = c.d;
            spec.m = c.m;
            spec.activation = parse_activation(c.act);
            spec.eta = c.eta;
            spec.eta_relative = eta_relative;
            spec.steps = c.steps;
            spec.seeds = c.seeds;
            spec.master_seed = c.seed;
            if (!images.empty() && c.n < 2) throw ArgumentError("n must be >= 2");
            if (images.empty()) ExperimentConfig::lecun(c.n, c.d, c.m).validate();
            const auto runs = run_loss_crossing(spec, ctx);
            int found = 0;
            for (const auto& r : runs) found += r.trajectory.crossing_index.has_value();
            std::printf("crossing: %d of %zu runs cross\n", found, runs.size());
            finish(ctx);
        } else if (*toy2) {
            RunContext ctx = context(c, "toy2", args);
            Toy2Spec spec{pair_of(lam_plain, "--lam-plain"), pair_of(lam_gated, "--lam-gated"), angle,
                          pair_of(toy_y, "--y"), pair_of(toy_z0, "--z0"), c.eta, c.steps};
            const auto r = run_toy2(spec, ctx);
            std::printf("toy2: %d steps, final plain (%s, %s), gated (%s, %s)\n", c.steps,
                        format_double(r.plain.back()[0]).c_str(), format_double(r.plain.back()[1]).c_str(),
                        format_double(r.gated.back()[0]).c_str(), format_double(r.gated.back()[1]).c_str());
            finish(ctx);
        } else if (*emp) {
            ExperimentConfig cfg = ExperimentConfig::lecun(c.n, c.d, c.m, parse_arch(c.arch), parse_activation(c.act));
            cfg.master_seed = c.seed;
            RunContext ctx = context(c, "empirical-ntk", args);
            const auto r = run_empirical_ntk(cfg, inits, derive_stream_seed(c.seed, "ntk-data"), ctx);
            std::printf("empirical-ntk: %d inits, relative Frobenius error vs closed form %s\n", inits,
                        opt(r.rel_error_vs_closed_form).c_str());
            finish(ctx);
        } else if (*gap) {
            ExperimentConfig::lecun(c.n, c.d, c.m).validate();
            RunContext ctx = context(c, "gap", args);
            GapSpec spec;
            spec.n = c.n;
            spec.d = c.d;
            spec.m = c.m;
            spec.activation = parse_activation(c.act);
            spec.eta = c.eta;
            spec.steps = c.steps;
            spec.snapshot_every = snapshot_every;
            spec.seeds = gap_seeds;
            spec.num_perms = perms;
            spec.master_seed = c.seed;
            spec.control = control;
            const auto r = run_gap_scatter(spec, ctx);
            std::printf("gap: %zu points, energy distance %s, p = %s\n", r.points.size(),
                        format_double(r.energy).c_str(), format_double(r.p_value).c_str());
            finish(ctx);
        } else if (*rmt) {
            RunContext ctx = context(c, "rmt-check", args);
            const auto checks = run_rmt_check(c.seed, ctx);
            for (const auto& k : checks) {
                std::printf("%-26s predicted %-10.5g observed %-10.5g rel.err %-8.3g %s\n", k.name.c_str(), k.predicted,
                            k.observed, k.rel_error, k.pass() ? "ok" : "outside tolerance");
            }
            finish(ctx);
        } else if (*idx) {
            const IdxImages img = read_idx_images(images);
            const IdxLabels lab = read_idx_labels(labels);
            if (img.count != lab.labels.size()) {
                throw ConsistencyError("image count " + std::to_string(img.count) + " != label count " +
                                       std::to_string(lab.labels.size()));
            }
            const std::size_t count = limit ? std::min<std::size_t>(limit, img.count) : img.count;
            std::map<int, std::size_t> hist;
            for (std::size_t i = 0; i < count; ++i) ++hist[lab.labels[i]];
            std::printf("%u images of %ux%u, %zu labels\n", img.count, img.rows, img.cols, lab.labels.size());
            for (const auto& [label, n] : hist) std::printf("  label %d: %zu\n", label, n);
        }
    } catch (const ArgumentError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
