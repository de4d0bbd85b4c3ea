#include "glu_ntk/datagen.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "glu_ntk/rng.hpp"

namespace glu_ntk {

namespace {

double row_dot(const Matrix& rowmajor_t, Eigen::Index i, Eigen::Index j) {
    // rowmajor_t is X^T stored column-major, so column i is sample i contiguous.
    return dot(rowmajor_t.col(i).data(), rowmajor_t.col(j).data(), rowmajor_t.rows());
}

}  // namespace

DataMatrix::DataMatrix(Matrix x) : x_(std::move(x)), cache_(std::make_shared<GramCache>()) {
    if (x_.rows() < 1 || x_.cols() < 1) throw DimensionError("DataMatrix needs n >= 1 and d >= 1");
    if (!x_.allFinite()) throw NumericError("DataMatrix has non-finite entries");
    const Matrix xt = x_.transpose();
    sq_norms_.resize(x_.rows());
    r_.resize(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
        sq_norms_[i] = row_dot(xt, i, i);
        r_[i] = std::sqrt(sq_norms_[i]);
    }
}

const SymMatrix& DataMatrix::gram() const {
    std::call_once(cache_->once, [this] {
        const Matrix xt = x_.transpose();
        const Eigen::Index n = x_.rows();
        Matrix g(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            g(j, j) = sq_norms_[j];
            for (Eigen::Index i = j + 1; i < n; ++i) g(i, j) = row_dot(xt, i, j);
        }
        cache_->gram.emplace(std::move(g));
    });
    return *cache_->gram;
}

GramAndNorms gram_and_norms(const DataMatrix& x) {
    return {x.gram(), x.r(), x.dd()};
}

DataMatrix sample_gaussian_data(int n, int d, std::uint64_t seed) {
    if (n < 2) throw ArgumentError("sample_gaussian_data: n must be >= 2");
    if (d < 1) throw ArgumentError("sample_gaussian_data: d must be >= 1");
    Rng rng(seed);
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    return DataMatrix(std::move(x));
}

Vector make_targets(TargetKind kind, int n, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("make_targets: n must be >= 1");
    Vector y = Vector::Zero(n);
    if (kind == TargetKind::Zero) return y;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        if (kind == TargetKind::RandomSign) {
            y[i] = (rng.raw() >> 63) ? 1.0 : -1.0;
        } else {
            y[i] = rng.normal();
        }
    }
    return y;
}

Vector teacher_targets(const DataMatrix& x, std::uint64_t seed) {
    Rng rng(seed);
    Vector u(x.d());
    for (Eigen::Index k = 0; k < x.d(); ++k) u[k] = rng.normal();
    Vector y(x.n());
    for (Eigen::Index i = 0; i < x.n(); ++i) y[i] = x.x().row(i).dot(u) >= 0.0 ? 1.0 : -1.0;
    return y;
}

Dataset::Dataset(DataMatrix data_, Vector targets_, Provenance provenance_)
    : data(std::move(data_)), targets(std::move(targets_)), provenance(std::move(provenance_)) {
    if (targets.size() != data.n()) {
        throw ConsistencyError("Dataset: " + std::to_string(targets.size()) + " targets for " +
                               std::to_string(data.n()) + " samples");
    }
    if (!targets.allFinite()) throw NumericError("Dataset: non-finite target");
}

// ---- IDX ------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset, const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) {
        throw FormatError(path.string() + ": truncated header at offset " + std::to_string(offset));
    }
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex;
    os.width(8);
    os.fill('0');
    os << v;
    return os.str();
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
    if (got != want) {
        throw FormatError(path.string() + ": bad magic " + hex32(got) + " at offset 0 (expected " + hex32(want) + ")");
    }
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
    const auto buf = slurp(path);
    check_magic(read_be32(buf, 0, path), kIdxImagesMagic, path);
    IdxImages img;
    img.count = read_be32(buf, 4, path);
    img.rows = read_be32(buf, 8, path);
    img.cols = read_be32(buf, 12, path);
    const std::size_t payload = std::size_t{img.count} * img.rows * img.cols;
    if (buf.size() - 16 < payload) {
        throw FormatError(path.string() + ": truncated payload at offset " + std::to_string(buf.size()) +
                          " (need " + std::to_string(16 + payload) + " bytes)");
    }
    img.pixels.assign(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
    return img;
}

IdxLabels read_idx_labels(const std::filesystem::path& path) {
    const auto buf = slurp(path);
    check_magic(read_be32(buf, 0, path), kIdxLabelsMagic, path);
    const std::uint32_t count = read_be32(buf, 4, path);
    if (buf.size() - 8 < count) {
        throw FormatError(path.string() + ": truncated payload at offset " + std::to_string(buf.size()) +
                          " (need " + std::to_string(8 + std::size_t{count}) + " bytes)");
    }
    IdxLabels lab;
    lab.labels.assign(buf.begin() + 8, buf.begin() + 8 + count);
    return lab;
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
    if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols) {
        throw ConsistencyError("write_idx_images: pixel buffer does not match count*rows*cols");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    put_be32(out, kIdxImagesMagic);
    put_be32(out, images.count);
    put_be32(out, images.rows);
    put_be32(out, images.cols);
    out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, const IdxLabels& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    put_be32(out, kIdxLabelsMagic);
    put_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
    out.write(reinterpret_cast<const char*>(labels.labels.data()), static_cast<std::streamsize>(labels.labels.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxLoadOptions& options) {
    const IdxImages img = read_idx_images(images);
    const IdxLabels lab = read_idx_labels(labels);
    if (img.count != lab.labels.size()) {
        throw ConsistencyError("image count " + std::to_string(img.count) + " != label count " +
                               std::to_string(lab.labels.size()));
    }
    const std::size_t d = std::size_t{img.rows} * img.cols;
    if (d == 0) throw FormatError(images.string() + ": zero-sized images");

    std::vector<std::size_t> keep;
    std::vector<double> y;
    for (std::size_t i = 0; i < img.count; ++i) {
        if (options.limit && keep.size() >= *options.limit) break;
        const std::uint8_t label = lab.labels[i];
        if (options.binary_classes) {
            const auto [neg, pos] = *options.binary_classes;
            if (label == neg) {
                y.push_back(-1.0);
            } else if (label == pos) {
                y.push_back(1.0);
            } else {
                continue;
            }
        } else {
            y.push_back(static_cast<double>(label));
        }
        keep.push_back(i);
    }
    if (keep.empty()) throw ConsistencyError("load_idx: no samples left after class filtering");

    Matrix x(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const std::uint8_t* px = img.pixels.data() + keep[r] * d;
        for (std::size_t c = 0; c < d; ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                options.normalize ? px[c] / 255.0 : static_cast<double>(px[c]);
        }
    }
    if (options.normalize) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            double mean = 0.0;
            for (Eigen::Index r = 0; r < x.rows(); ++r) mean += x(r, c);
            mean /= static_cast<double>(x.rows());
            for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) -= mean;
        }
    }
    return Dataset(DataMatrix(std::move(x)), Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size())),
                   IdxFile{images.string(), labels.string()});
}

}  // namespace glu_ntk
