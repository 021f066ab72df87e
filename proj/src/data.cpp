/* Copyright 2026 The CorEx-VAE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include "corex/data.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "corex/infotheory.hpp"

namespace corex {

void Dataset::validate() const {
    if (values.rank() != 2) throw ShapeError("dataset values must be a matrix");
    if (!labels.empty() && labels.size() != n())
        throw ShapeError("dataset has " + std::to_string(labels.size()) + " labels for " + std::to_string(n()) +
                         " rows");
    if (binary)
        for (double v : values.values())
            if (v != 0.0 && v != 1.0) throw FormatError("binary dataset contains a value other than 0 or 1");
    if (per_dim_entropy) {
        if (per_dim_entropy->size() != d()) throw ShapeError("per_dim_entropy length differs from d");
        if (binary)
            for (double h : *per_dim_entropy)
                if (h < 0.0 || h > std::log(2.0) + 1e-15)
                    throw NumericError("binary per-dimension entropy outside [0, ln 2]");
    }
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
    const std::size_t c = t.cols();
    std::vector<double> out;
    out.reserve(rows.size() * c);
    const double* p = t.data();
    for (std::size_t r : rows) {
        if (r >= t.rows()) throw std::out_of_range("gather_rows: row " + std::to_string(r) + " out of range");
        out.insert(out.end(), p + r * c, p + (r + 1) * c);
    }
    return Tensor::matrix(rows.size(), c, std::move(out));
}

std::string to_string(SyntheticKind k) { return k == SyntheticKind::linear_gaussian ? "linear-gaussian" : "bars"; }

SyntheticKind synthetic_kind_from_string(std::string_view s) {
    if (s == "linear-gaussian") return SyntheticKind::linear_gaussian;
    if (s == "bars") return SyntheticKind::bars;
    throw ConfigError("unknown synthetic dataset kind '" + std::string(s) + "'");
}

namespace {

std::size_t image_side(std::size_t d) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    if (side * side != d) throw ConfigError("bars: observed_dim " + std::to_string(d) + " is not a perfect square");
    return side;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n == 0) throw ConfigError("synthetic dataset: n must be positive");
    if (observed_dim == 0) throw ConfigError("synthetic dataset: observed_dim must be positive");
    if (kind == SyntheticKind::linear_gaussian) {
        if (latent_dim > observed_dim) throw ConfigError("linear-gaussian: latent_dim must not exceed observed_dim");
        if (!(noise_scale > 0.0)) throw ConfigError("linear-gaussian: noise_scale must be positive");
        return;
    }
    const std::size_t side = image_side(observed_dim);
    if (!(bar_prob >= 0.0 && bar_prob <= 1.0)) throw ConfigError("bars: bar_prob must lie in [0, 1]");
    if (classes > 0) {
        if ((2 * side) % classes != 0)
            throw ConfigError("bars: " + std::to_string(classes) + " classes do not divide " +
                              std::to_string(2 * side) + " bars");
        if (!(bar_prob > 0.0)) throw ConfigError("bars: class mixture needs bar_prob > 0");
    }
}

Dataset gen_linear_gaussian(const Tensor& mixing, double noise_scale, std::size_t n, Rng& rng) {
    if (mixing.rank() != 2) throw ShapeError("gen_linear_gaussian: mixing must be [d x k]");
    if (!(noise_scale > 0.0)) throw ConfigError("linear-gaussian: noise_scale must be positive");
    const std::size_t d = mixing.rows(), k = mixing.cols();
    std::vector<double> x(n * d);
    std::vector<double> s(k);
    for (std::size_t r = 0; r < n; ++r) {
        for (auto& v : s) v = rng.normal();
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += mixing.at(i, j) * s[j];
            x[r * d + i] = acc + noise_scale * rng.normal();
        }
    }
    GroundTruth gt;
    gt.factors = mixing;
    gt.covariance.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < k; ++c) acc += mixing.at(i, c) * mixing.at(j, c);
            gt.covariance[i * d + j] = acc + (i == j ? noise_scale * noise_scale : 0.0);
        }
    const GaussianJoint g = GaussianJoint::from_covariance(d, gt.covariance);
    gt.tc_x = gaussian_tc(g);

    Dataset ds;
    ds.values = Tensor::matrix(n, d, std::move(x));
    ds.per_dim_entropy = gaussian_marginal_entropies(g);
    ds.ground_truth = std::move(gt);
    return ds;
}

Dataset gen_linear_gaussian(const SyntheticSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.kind != SyntheticKind::linear_gaussian) throw ConfigError("gen_linear_gaussian: wrong dataset kind");
    Rng mix(spec.mixing_seed, streams::kInit);
    return gen_linear_gaussian(standard_normal(mix, {spec.observed_dim, spec.latent_dim}), spec.noise_scale, spec.n,
                               rng);
}

Dataset gen_bars(const SyntheticSpec& spec, Rng& rng) {
    if (spec.kind != SyntheticKind::bars) throw ConfigError("gen_bars: wrong dataset kind");
    spec.validate();
    const std::size_t d = spec.observed_dim, side = image_side(d), nbars = 2 * side;

    std::vector<double> factors(nbars * d, 0.0);
    for (std::size_t b = 0; b < nbars; ++b)
        for (std::size_t t = 0; t < side; ++t) {
            const std::size_t pix = b < side ? b * side + t : t * side + (b - side);
            factors[b * d + pix] = 1.0;
        }

    std::vector<double> x(spec.n * d, 0.0);
    std::vector<std::int64_t> labels(spec.n);
    std::vector<char> on(nbars);
    const std::size_t group = spec.classes > 0 ? nbars / spec.classes : nbars;
    for (std::size_t r = 0; r < spec.n; ++r) {
        std::fill(on.begin(), on.end(), 0);
        if (spec.classes == 0) {
            std::int64_t mask = 0;
            for (std::size_t b = 0; b < nbars; ++b)
                if (rng.uniform() < spec.bar_prob) {
                    on[b] = 1;
                    mask |= std::int64_t{1} << b;
                }
            labels[r] = mask;
        } else {
            const std::size_t c = rng.below(spec.classes);
            bool any = false;
            while (!any)
                for (std::size_t b = c * group; b < (c + 1) * group; ++b) {
                    on[b] = rng.uniform() < spec.bar_prob;
                    any = any || on[b];
                }
            labels[r] = static_cast<std::int64_t>(c);
        }
        for (std::size_t b = 0; b < nbars; ++b)
            if (on[b])
                for (std::size_t p = 0; p < d; ++p)
                    if (factors[b * d + p] != 0.0) x[r * d + p] = 1.0;
    }

    Dataset ds;
    ds.values = Tensor::matrix(spec.n, d, std::move(x));
    ds.labels = std::move(labels);
    ds.binary = true;
    ds.per_dim_entropy = plugin_binary_entropy(ds.values);
    GroundTruth gt;
    gt.factors = Tensor::matrix(nbars, d, std::move(factors));
    if (spec.classes == 0 && (spec.bar_prob == 0.0 || spec.bar_prob == 1.0)) gt.tc_x = 0.0;
    ds.ground_truth = std::move(gt);
    return ds;
}

Dataset generate(const SyntheticSpec& spec, Rng& rng) {
    return spec.kind == SyntheticKind::linear_gaussian ? gen_linear_gaussian(spec, rng) : gen_bars(spec, rng);
}

std::vector<double> plugin_binary_entropy(const Tensor& values) {
    const std::size_t n = values.rows(), d = values.cols();
    if (n == 0) throw std::invalid_argument("plugin_binary_entropy: empty dataset");
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) mean[i] += values.at(r, i);
    std::vector<double> h(d);
    for (std::size_t i = 0; i < d; ++i) h[i] = bernoulli_entropy(mean[i] / static_cast<double>(n));
    return h;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t pos, const std::string& what) {
    if (pos + 4 > b.size()) throw FormatError(what + ": truncated payload");
    return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) | (std::uint32_t{b[pos + 2]} << 8) |
           std::uint32_t{b[pos + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int k = 3; k >= 0; --k) b.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex;
    os.width(8);
    os.fill('0');
    os << v;
    return os.str();
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::string& what) {
    if (got != want) throw FormatError(what + ": bad magic, expected " + hex32(want) + ", got " + hex32(got));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& b) {
    io::ByteWriter w;
    w.raw(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
    w.write_file(path);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                 std::optional<double> binarize_threshold) {
    const std::string what = "IDX images " + images.string();
    const auto b = io::read_file(images);
    check_magic(read_be32(b, 0, what), kIdxImages, what);
    const std::size_t n = read_be32(b, 4, what), rows = read_be32(b, 8, what), cols = read_be32(b, 12, what);
    const std::size_t d = rows * cols;
    if (b.size() < 16 + n * d) throw FormatError(what + ": truncated payload");
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n * d; ++i) {
        const double v = b[16 + i] / 255.0;
        x[i] = binarize_threshold ? (v >= *binarize_threshold ? 1.0 : 0.0) : v;
    }
    Dataset ds;
    ds.values = Tensor::matrix(n, d, std::move(x));
    ds.binary = binarize_threshold.has_value();
    if (labels) {
        const std::string lw = "IDX labels " + labels->string();
        const auto l = io::read_file(*labels);
        check_magic(read_be32(l, 0, lw), kIdxLabels, lw);
        const std::size_t ln = read_be32(l, 4, lw);
        if (ln != n)
            throw FormatError("IDX count mismatch: " + std::to_string(n) + " images but " + std::to_string(ln) +
                              " labels");
        if (l.size() < 8 + ln) throw FormatError(lw + ": truncated payload");
        ds.labels.assign(l.begin() + 8, l.begin() + 8 + static_cast<std::ptrdiff_t>(ln));
    }
    if (ds.binary && n > 0) ds.per_dim_entropy = plugin_binary_entropy(ds.values);
    return ds;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
    const std::size_t d = rows * cols;
    if (d == 0 || pixels.size() % d != 0) throw ShapeError("write_idx_images: pixel count is not a multiple of rows*cols");
    std::vector<std::uint8_t> b;
    put_be32(b, kIdxImages);
    put_be32(b, static_cast<std::uint32_t>(pixels.size() / d));
    put_be32(b, static_cast<std::uint32_t>(rows));
    put_be32(b, static_cast<std::uint32_t>(cols));
    b.insert(b.end(), pixels.begin(), pixels.end());
    write_bytes(path, b);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> b;
    put_be32(b, kIdxLabels);
    put_be32(b, static_cast<std::uint32_t>(labels.size()));
    b.insert(b.end(), labels.begin(), labels.end());
    write_bytes(path, b);
}

// ---------------------------------------------------------------------------

namespace {
enum : std::uint32_t {
    kHasLabels = 1,
    kHasEntropy = 2,
    kHasTc = 4,
    kHasFactors = 8,
    kHasCovariance = 16,
    kBinary = 32,
};
}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::uint32_t flags = 0;
    if (ds.has_labels()) flags |= kHasLabels;
    if (ds.per_dim_entropy) flags |= kHasEntropy;
    if (ds.ground_truth && ds.ground_truth->tc_x) flags |= kHasTc;
    if (ds.ground_truth && ds.ground_truth->factors.rank() == 2) flags |= kHasFactors;
    if (ds.ground_truth && !ds.ground_truth->covariance.empty()) flags |= kHasCovariance;
    if (ds.binary) flags |= kBinary;

    io::ByteWriter w;
    w.raw("CXDS");
    w.u32(kDatasetVersion);
    w.u64(ds.n());
    w.u64(ds.d());
    w.u32(flags);
    for (double v : ds.values.values()) w.f64(v);
    if (flags & kHasLabels)
        for (auto l : ds.labels) w.u64(static_cast<std::uint64_t>(l));
    if (flags & kHasEntropy)
        for (double h : *ds.per_dim_entropy) w.f64(h);
    if (flags & kHasTc) w.f64(*ds.ground_truth->tc_x);
    if (flags & kHasFactors) {
        const Tensor& f = ds.ground_truth->factors;
        w.u64(f.rows());
        w.u64(f.cols());
        for (double v : f.values()) w.f64(v);
    }
    if (flags & kHasCovariance)
        for (double v : ds.ground_truth->covariance) w.f64(v);
    w.seal();
    w.write_file(path);
}

Dataset load_dataset(const std::filesystem::path& path) {
    const std::string what = "dataset " + path.string();
    const auto bytes = io::read_file(path);
    io::ByteReader r(io::verify_sealed(bytes, "CXDS", what), what);
    r.raw(4);
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion)
        throw FormatError(what + ": unsupported version " + std::to_string(version));
    const std::size_t n = r.u64(), d = r.u64();
    const std::uint32_t flags = r.u32();
    if (n * d > r.remaining() / 8) throw FormatError(what + ": truncated payload");
    std::vector<double> x(n * d);
    for (auto& v : x) v = r.f64();
    Dataset ds;
    ds.values = Tensor::matrix(n, d, std::move(x));
    ds.binary = (flags & kBinary) != 0;
    if (flags & kHasLabels) {
        ds.labels.resize(n);
        for (auto& l : ds.labels) l = static_cast<std::int64_t>(r.u64());
    }
    if (flags & kHasEntropy) {
        std::vector<double> h(d);
        for (auto& v : h) v = r.f64();
        ds.per_dim_entropy = std::move(h);
    }
    if (flags & (kHasTc | kHasFactors | kHasCovariance)) {
        GroundTruth gt;
        if (flags & kHasTc) gt.tc_x = r.f64();
        if (flags & kHasFactors) {
            const std::size_t fr = r.u64(), fc = r.u64();
            if (fr * fc > r.remaining() / 8) throw FormatError(what + ": truncated payload");
            std::vector<double> f(fr * fc);
            for (auto& v : f) v = r.f64();
            gt.factors = Tensor::matrix(fr, fc, std::move(f));
        }
        if (flags & kHasCovariance) {
            gt.covariance.resize(d * d);
            for (auto& v : gt.covariance) v = r.f64();
        }
        ds.ground_truth = std::move(gt);
    }
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------

BatchIterator::BatchIterator(std::size_t n, std::size_t batch_size, Rng rng)
    : n_(n), batch_size_(batch_size), rng_(rng) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
}

std::vector<std::vector<std::size_t>> BatchIterator::next_epoch() {
    std::vector<std::size_t> perm(n_);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n_; i > 1; --i) std::swap(perm[i - 1], perm[rng_.below(i)]);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t b = 0; b < n_; b += batch_size_)
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(b),
                         perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_, b + batch_size_)));
    return out;
}

}  // namespace corex
