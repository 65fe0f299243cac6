#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ufp/tensor.hpp"

namespace ufp {

struct Sample {
    DenseTensor features;
    int label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    Shape feature_shape() const {
        return samples.empty() ? Shape{} : samples.front().features.shape();
    }
};

enum class SyntheticKind { blobs, moons };

SyntheticKind synthetic_kind_from_string(const std::string& s);

// Deterministic generators, class-balanced within +-1.
//  blobs: Gaussian clusters around per-class centers, emitted as [1,H,W]
//         images (default 16x16) so convolutional topologies can train on
//         them directly.
//  moons: the classic two interleaved half-circles in R^2 (classes must be 2).
Dataset make_synthetic(SyntheticKind kind, std::size_t n, int classes, double noise,
                       std::uint64_t seed);
Dataset make_synthetic_blobs(std::size_t n, int classes, double noise, std::uint64_t seed,
                             const Shape& image_shape);

// Slices an (already shuffled) dataset into its first n_first samples and the
// remainder; train/validation sets drawn from one distribution come from one
// generator call partitioned here.
std::pair<Dataset, Dataset> partition_dataset(const Dataset& data, std::size_t n_first);

// Raw IDX payload: big-endian extents, unsigned-byte values kept as 0..255.
struct IdxArray {
    std::vector<std::size_t> dims;
    std::vector<float> data;
};

IdxArray parse_idx(std::istream& in, const std::string& name);
IdxArray parse_idx_file(const std::string& path);

// Images (rank-3 IDX, pixels scaled to [0,1], samples shaped [1,H,W]) paired
// with a rank-1 label file.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

} // namespace ufp
