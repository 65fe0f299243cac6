#include "ufp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>

#include "ufp/rng.hpp"

namespace ufp {

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "blobs") return SyntheticKind::blobs;
    if (s == "moons") return SyntheticKind::moons;
    throw InvalidConfig("unknown synthetic dataset kind: " + s);
}

namespace {

void shuffle_samples(std::vector<Sample>& samples, Rng& rng) {
    for (std::size_t i = samples.size(); i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(samples[i - 1], samples[j]);
    }
}

Dataset finish(std::vector<Sample> samples, int classes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xD5u));
    shuffle_samples(samples, rng);
    Dataset d;
    d.samples = std::move(samples);
    d.num_classes = classes;
    return d;
}

} // namespace

Dataset make_synthetic_blobs(std::size_t n, int classes, double noise, std::uint64_t seed,
                             const Shape& image_shape) {
    if (classes < 1) throw InvalidConfig("make_synthetic: classes must be >= 1");
    if (n < static_cast<std::size_t>(classes)) {
        throw InvalidConfig("make_synthetic: n must be >= classes");
    }
    const std::size_t dim = shape_numel(image_shape);
    if (dim == 0) throw InvalidConfig("make_synthetic: empty blob shape");

    // Per-class centers; re-drawn until pairwise distances clear the noise.
    // Overlap between two isotropic clusters is governed by the projection
    // onto the center line, so the scale is the per-axis noise, not
    // noise*sqrt(dim).
    Rng center_rng(derive_seed(seed, 0xC0u));
    std::vector<std::vector<float>> centers;
    const double min_dist = std::max(0.5, 6.0 * noise);
    for (int c = 0; c < classes; ++c) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::vector<float> cand(dim);
            for (auto& v : cand) v = static_cast<float>(center_rng.next_uniform(0.2, 0.8));
            bool ok = true;
            for (const auto& prev : centers) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double d = static_cast<double>(cand[i]) - prev[i];
                    d2 += d * d;
                }
                if (std::sqrt(d2) < min_dist) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                centers.push_back(std::move(cand));
                break;
            }
        }
        if (centers.size() != static_cast<std::size_t>(c) + 1) {
            throw InvalidConfig("make_synthetic: could not place separated blob centers");
        }
    }

    Rng rng(derive_seed(seed, 0xB1u));
    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % classes);
        std::vector<float> v(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            v[j] = centers[label][j] + static_cast<float>(noise * rng.next_gaussian());
        }
        samples.push_back({DenseTensor(image_shape, std::move(v)), label});
    }
    return finish(std::move(samples), classes, seed);
}

Dataset make_synthetic(SyntheticKind kind, std::size_t n, int classes, double noise,
                       std::uint64_t seed) {
    if (kind == SyntheticKind::blobs) {
        return make_synthetic_blobs(n, classes, noise, seed, {1, 16, 16});
    }

    if (classes != 2) throw InvalidConfig("make_synthetic: moons is a 2-class dataset");
    if (n < 2) throw InvalidConfig("make_synthetic: n must be >= classes");
    Rng rng(derive_seed(seed, 0xB2u));
    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double t = rng.next_unit() * std::numbers::pi;
        double x, y;
        if (label == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
        }
        x += noise * rng.next_gaussian();
        y += noise * rng.next_gaussian();
        samples.push_back({DenseTensor({2}, {static_cast<float>(x), static_cast<float>(y)}),
                           label});
    }
    return finish(std::move(samples), 2, seed);
}

std::pair<Dataset, Dataset> partition_dataset(const Dataset& data, std::size_t n_first) {
    if (n_first > data.size()) {
        throw InvalidConfig("partition_dataset: first part larger than the dataset");
    }
    Dataset a, b;
    a.num_classes = b.num_classes = data.num_classes;
    a.samples.assign(data.samples.begin(), data.samples.begin() + n_first);
    b.samples.assign(data.samples.begin() + n_first, data.samples.end());
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& name) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError(name + ": truncated IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

} // namespace

IdxArray parse_idx(std::istream& in, const std::string& name) {
    unsigned char magic[4];
    in.read(reinterpret_cast<char*>(magic), 4);
    if (!in) throw FormatError(name + ": truncated IDX magic");
    if (magic[0] != 0 || magic[1] != 0) {
        throw FormatError(name + ": bad IDX magic bytes");
    }
    const unsigned type_code = magic[2];
    if (type_code != 0x08) {
        throw FormatError(name + ": unsupported IDX type code " + std::to_string(type_code) +
                          " (only unsigned byte, 0x08)");
    }
    const unsigned ndims = magic[3];
    if (ndims == 0) throw FormatError(name + ": zero-dimensional IDX");

    IdxArray arr;
    std::size_t numel = 1;
    for (unsigned i = 0; i < ndims; ++i) {
        const std::uint32_t extent = read_be_u32(in, name);
        arr.dims.push_back(extent);
        numel *= extent;
    }

    std::vector<unsigned char> payload(numel);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(numel));
    if (static_cast<std::size_t>(in.gcount()) != numel) {
        throw FormatError(name + ": truncated IDX payload");
    }
    arr.data.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) arr.data[i] = static_cast<float>(payload[i]);
    return arr;
}

IdxArray parse_idx_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open IDX file");
    return parse_idx(in, path);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    IdxArray images = parse_idx_file(images_path);
    IdxArray labels = parse_idx_file(labels_path);
    if (images.dims.size() != 3) {
        throw FormatError(images_path + ": expected rank-3 image IDX [N,H,W]");
    }
    if (labels.dims.size() != 1 || labels.dims[0] != images.dims[0]) {
        throw FormatError(labels_path + ": label count does not match image count");
    }
    const std::size_t n = images.dims[0], h = images.dims[1], w = images.dims[2];

    Dataset d;
    d.samples.reserve(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> pix(h * w);
        for (std::size_t j = 0; j < h * w; ++j) {
            pix[j] = images.data[i * h * w + j] / 255.0f;
        }
        const int label = static_cast<int>(labels.data[i]);
        max_label = std::max(max_label, label);
        d.samples.push_back({DenseTensor({1, h, w}, std::move(pix)), label});
    }
    d.num_classes = max_label + 1;
    return d;
}

} // namespace ufp
