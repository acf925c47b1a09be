#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sponge/tensor.hpp"

namespace sponge {

// Images in [0, 1] as [N x C x H x W] plus class indices.
struct Dataset {
    Tensor images;
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;
    std::string split;  // "train", "val", ...

    std::size_t size() const { return labels.size(); }
    std::vector<std::size_t> sample_shape() const;

    void validate() const;
};

// Standard CIFAR-10 binary layout: 3073-byte records, one label byte then
// 3072 channel-major pixel bytes (3 x 32 x 32). Pixels scale by 1/255.
Dataset load_cifar10(const std::filesystem::path& path);
void write_cifar10(const Dataset& dataset, const std::filesystem::path& path);

// IDX pair: images magic 0x00000803 with big-endian dims [N, H, W], labels
// magic 0x00000801 with [N]. Loaded single-channel, scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Deterministic Gaussian class blobs in pixel space: one mean image per
// class, round-robin labels, noise clipped back to [0, 1]. Separable enough
// for the toy models to clear 80% validation accuracy.
Dataset synth_dataset(std::size_t num_samples, std::size_t num_classes,
                      const std::vector<std::size_t>& input_shape, std::uint64_t seed);

// Index split into a leading "train" part and trailing "val" part. The
// class means of a synthetic dataset are seed-bound, so held-out data must
// come from the same generation call.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset,
                                          std::size_t train_count);

// Copies the selected samples into a contiguous batch.
std::pair<Tensor, std::vector<std::size_t>> gather_batch(
    const Dataset& dataset, std::span<const std::size_t> indices);

}  // namespace sponge
