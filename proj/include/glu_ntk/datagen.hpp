#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "glu_ntk/core.hpp"

namespace glu_ntk {

// n x d sample matrix (row i is x_i) with its norm caches. The Gram matrix is
// built on first use and shared between copies.
class DataMatrix {
public:
    explicit DataMatrix(Matrix x);

    Eigen::Index n() const { return x_.rows(); }
    Eigen::Index d() const { return x_.cols(); }
    const Matrix& x() const { return x_; }

    // X X^T. Entry (i,j) is dot(x_i, x_j) computed independently of every
    // other entry; row norms squared use the same routine, so gram(i,i) and
    // sq_norms()[i] are the same double.
    const SymMatrix& gram() const;
    // r_i = ||x_i||
    const Vector& r() const { return r_; }
    // D_ii = ||x_i||^2
    const Vector& sq_norms() const { return sq_norms_; }
    SymMatrix dd() const { return SymMatrix::diagonal(sq_norms_); }

private:
    struct GramCache {
        std::once_flag once;
        std::optional<SymMatrix> gram;
    };

    Matrix x_;
    Vector r_;
    Vector sq_norms_;
    std::shared_ptr<GramCache> cache_;
};

struct GramAndNorms {
    SymMatrix gram;
    Vector r;
    SymMatrix dd;
};

GramAndNorms gram_and_norms(const DataMatrix& x);

// Row-major fill (sample 0 features 0..d-1, then sample 1, ...), one normal
// draw per entry from Rng(seed).
DataMatrix sample_gaussian_data(int n, int d, std::uint64_t seed);

enum class TargetKind { RandomSign, Gaussian, Zero };

Vector make_targets(TargetKind kind, int n, std::uint64_t seed);

// y_i = sign(u^T x_i) for a unit-free teacher direction u ~ N(0, I_d) drawn
// from Rng(seed). Zero projections map to +1.
Vector teacher_targets(const DataMatrix& x, std::uint64_t seed);

struct GaussianSynthetic {};
struct IdxFile {
    std::string images;
    std::string labels;
};
struct Custom {};
using Provenance = std::variant<GaussianSynthetic, IdxFile, Custom>;

struct Dataset {
    DataMatrix data;
    Vector targets;
    Provenance provenance;

    Dataset(DataMatrix data, Vector targets, Provenance provenance);
};

// ---- IDX files ----------------------------------------------------------
//
// Layout: 4-byte big-endian magic (0x00000803 images, 0x00000801 labels),
// one 4-byte big-endian size per dimension, then unsigned bytes.

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
};

struct IdxLabels {
    std::vector<std::uint8_t> labels;
};

IdxImages read_idx_images(const std::filesystem::path& path);
IdxLabels read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, const IdxLabels& labels);

struct IdxLoadOptions {
    std::optional<std::size_t> limit;
    bool normalize = false;
    // First class maps to -1, second to +1; other samples are dropped.
    // nullopt keeps every sample and uses the raw label value as target.
    std::optional<std::pair<std::uint8_t, std::uint8_t>> binary_classes = std::pair<std::uint8_t, std::uint8_t>{0, 1};
};

// With normalize, pixels are divided by 255 and then each feature is centered
// by its mean over the retained samples.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxLoadOptions& options = {});

}  // namespace glu_ntk
