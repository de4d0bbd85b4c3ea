#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glu_ntk/core.hpp"
#include "glu_ntk/datagen.hpp"
#include "glu_ntk/dynamics.hpp"
#include "glu_ntk/io.hpp"
#include "glu_ntk/kernel_theory.hpp"
#include "glu_ntk/spectral.hpp"

namespace glu_ntk {

// Output directory plus the manifest being accumulated for one run. When
// out_dir is empty nothing is written and runners only return their results.
enum class TableFormat { Csv, Json };

class RunContext {
public:
    RunContext(std::filesystem::path out_dir, std::vector<std::string> command_line, int threads = 1,
               TableFormat format = TableFormat::Csv);

    bool writes() const { return !out_dir_.empty(); }
    int threads() const { return threads_; }
    RunManifest& manifest() { return manifest_; }

    std::uint64_t seed(const std::string& name, std::uint64_t value);
    void tolerance(const std::string& name, double value) { manifest_.tolerances[name] = value; }
    // Writes `file` as CSV, or as JSON with the extension swapped to .json.
    void csv(const std::string& file, const CsvTable& table);
    void svg_lines(const std::string& file, const PlotLabels& labels, const std::vector<Series>& series);
    void svg_scatter(const std::string& file, const PlotLabels& labels, const std::vector<Series>& groups);
    // Writes manifest.json (last) and returns its path, or nothing when not writing.
    std::optional<std::filesystem::path> finish();

private:
    std::filesystem::path out_dir_;
    int threads_;
    TableFormat format_;
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// handled by exactly one call; callers write results into slot i, so output
// order never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

// ---- spectrum -----------------------------------------------------------

enum class KernelSource { Structured, Expected };

struct SpectrumResult {
    SpectralSummary plain;
    SpectralSummary gated;
    TheoryEstimate theory;
};

SpectrumResult run_spectrum(int n, int d, int m, std::uint64_t seed, KernelSource source, RunContext& ctx);

// ---- condition-number sweep ---------------------------------------------

struct SweepRow {
    int d = 0;
    int n = 0;
    int m = 0;
    int seed = 0;
    Arch arch = Arch::Plain;
    double lambda_max_num = 0.0;
    double lambda_max_thy = 0.0;        // plain estimate, or the gated lower bound
    double lambda_max_thy_upper = 0.0;  // gated upper bound (equals the estimate for plain)
    double lambda_min_num = 0.0;
    double lambda_min_thy = 0.0;
    double kappa_num = 0.0;             // NaN when undefined
    double kappa_thy = 0.0;
};

struct SweepSpec {
    std::vector<int> d_list;
    double n_ratio = 4.0;  // n = round(n_ratio * d)
    double m_ratio = 8.0;  // m = round(m_ratio * d)
    int seeds = 5;
    std::uint64_t master_seed = 0;
};

std::vector<SweepRow> run_condition_sweep(const SweepSpec& spec, RunContext& ctx);

// ---- loss crossing ------------------------------------------------------

enum class CrossingSource { Expected, FiniteWidth };

struct DataSpec {
    // Gaussian when images is empty; otherwise IDX files.
    std::filesystem::path images;
    std::filesystem::path labels;
};

struct CrossingRun {
    int seed = 0;
    LossTrajectory trajectory;
    int target_resamples = 0;                // Expected source only
    std::optional<double> estimate;          // single-mode late-stage estimate, Expected source only
    double lambda_max = 0.0;                 // largest eigenvalue over both kernels, Expected source only
};

struct CrossingSpec {
    CrossingSource source = CrossingSource::Expected;
    DataSpec data;
    int n = 400;
    int d = 8;
    int m = 64;
    Activation activation = Activation::ReLU;
    double eta = 0.005;
    int steps = 200;
    int seeds = 1;
    std::uint64_t master_seed = 0;
    // Learning rate in trainer units: the expected curves step with
    // (I - (eta/n) K), matching gradient descent on (1/2n)||e||^2. With
    // eta_relative the expected curves step with (I - (eta/lambda_max) K).
    bool eta_relative = false;
};

// Expected source: structured kernels (LeCun), random-sign targets redrawn
// until y^T (K - K~) y >= 0, closed-form curves with sigma_v2 = 1/m.
// FiniteWidth source: the gradient-descent trainer with the same targets
// (IDX data uses its +/-1 labels).
std::vector<CrossingRun> run_loss_crossing(const CrossingSpec& spec, RunContext& ctx);

// Draws random-sign targets from successive streams until y^T (K - K~) y >= 0.
// Returns the targets and the number of rejected draws.
std::pair<Vector, int> crossing_targets(const SymMatrix& k_plain, const SymMatrix& k_gated, std::uint64_t seed,
                                        int max_tries = 10000);

// ---- generalization gap -------------------------------------------------

struct GapPoint {
    double train_loss = 0.0;
    double gap = 0.0;  // eval loss minus train loss
    Arch arch = Arch::Plain;
    int seed = 0;
    int step = 0;
};

struct GapSpec {
    int n = 200;  // training and eval set size
    int d = 16;
    int m = 512;
    Activation activation = Activation::ReLU;
    double eta = 0.005;
    int steps = 200;
    int snapshot_every = 50;
    int seeds = 5;
    int num_perms = 999;
    std::uint64_t master_seed = 0;
    // Both groups train the plain model (a null-by-construction control).
    bool control = false;
};

struct GapResult {
    std::vector<GapPoint> points;
    double energy = 0.0;
    double p_value = 1.0;
};

GapResult run_gap_scatter(const GapSpec& spec, RunContext& ctx);

// ---- two-sample toy -----------------------------------------------------

struct Toy2Spec {
    Point2 lam_plain{4.0, 0.2};
    Point2 lam_gated{2.0, 0.5};
    double angle = 0.5;  // rotation of the shared eigenbasis, radians
    Point2 y{1.0, -1.0};
    Point2 z0{0.0, 0.0};
    double eta = 0.1;
    int steps = 1000;
};

// K = R diag(lam) R^T with R the rotation by `angle`.
SymMatrix toy2_kernel(const Point2& lam, double angle);
Toy2Result run_toy2(const Toy2Spec& spec, RunContext& ctx);

// ---- empirical NTK ------------------------------------------------------

struct EmpiricalNtkResult {
    KernelMatrix kernel;
    std::optional<double> rel_error_vs_closed_form;  // ReLU only
};

EmpiricalNtkResult run_empirical_ntk(const ExperimentConfig& cfg, int num_inits, std::uint64_t data_seed,
                                     RunContext& ctx);

// ---- random-matrix checks -----------------------------------------------

// (1/d) X X^T for X an n x d standard Gaussian matrix.
SymMatrix sample_wishart(int n, int d, std::uint64_t seed);
// sample_wishart(n, d) + theta u u^T with u a uniformly random unit vector.
SymMatrix sample_spiked_wishart(int n, int d, double theta, std::uint64_t seed);
// W o W with W = (1/d) X X^T, i.e. (1/d^2) (XX^T) o (XX^T).
SymMatrix sample_hadamard_wishart(int n, int d, std::uint64_t seed);

struct RmtCheck {
    std::string name;
    double predicted = 0.0;
    double observed = 0.0;
    double rel_error = 0.0;
    double tolerance = 0.0;
    bool pass() const { return rel_error <= tolerance; }
};

std::vector<RmtCheck> run_rmt_check(std::uint64_t seed, RunContext& ctx);

double relative_error(double observed, double predicted);

}  // namespace glu_ntk
