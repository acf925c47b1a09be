#include "sponge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sponge/rng.hpp"

namespace sponge {

std::vector<std::size_t> Dataset::sample_shape() const {
    if (images.rank() != 4) {
        throw std::logic_error("dataset images must be [N x C x H x W]");
    }
    return {images.shape[1], images.shape[2], images.shape[3]};
}

void Dataset::validate() const {
    if (images.rank() != 4) {
        throw std::invalid_argument("dataset images must be [N x C x H x W], got " +
                                    shape_string(images.shape));
    }
    if (images.shape[0] != labels.size()) {
        throw std::invalid_argument("dataset has " + std::to_string(images.shape[0]) +
                                    " images but " + std::to_string(labels.size()) +
                                    " labels");
    }
    for (double v : images.data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("dataset pixel out of [0, 1]");
        }
    }
    for (std::size_t label : labels) {
        if (label >= num_classes) {
            throw std::invalid_argument("dataset label " + std::to_string(label) +
                                        " out of range [0, " +
                                        std::to_string(num_classes) + ")");
        }
    }
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary

namespace {
constexpr std::size_t kCifarPixels = 3 * 32 * 32;
constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

unsigned char pixel_byte(double v) {
    const double scaled = v * 255.0;
    const long long b = std::llround(scaled);
    if (b < 0 || b > 255) {
        throw std::invalid_argument("pixel value out of byte range");
    }
    return static_cast<unsigned char>(b);
}
}  // namespace

Dataset load_cifar10(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_all(path);
    if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
        throw std::runtime_error("truncated CIFAR-10 file " + path.string() + " (" +
                                 std::to_string(bytes.size()) + " bytes)");
    }
    const std::size_t n = bytes.size() / kCifarRecord;

    Dataset ds;
    ds.num_classes = 10;
    ds.images = Tensor({n, 3, 32, 32});
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* record = &bytes[i * kCifarRecord];
        if (record[0] >= 10) {
            throw std::runtime_error("CIFAR-10 label " + std::to_string(record[0]) +
                                     " out of range in record " + std::to_string(i));
        }
        ds.labels[i] = record[0];
        double* out = &ds.images.data[i * kCifarPixels];
        for (std::size_t p = 0; p < kCifarPixels; ++p) {
            out[p] = static_cast<double>(record[1 + p]) / 255.0;
        }
    }
    return ds;
}

void write_cifar10(const Dataset& dataset, const std::filesystem::path& path) {
    if (dataset.images.rank() != 4 || dataset.images.shape[1] != 3 ||
        dataset.images.shape[2] != 32 || dataset.images.shape[3] != 32) {
        throw std::invalid_argument("write_cifar10 expects [N x 3 x 32 x 32] images");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.labels[i] >= 10) {
            throw std::invalid_argument("CIFAR-10 label out of range");
        }
        os.put(static_cast<char>(dataset.labels[i]));
        const double* pixels = &dataset.images.data[i * kCifarPixels];
        for (std::size_t p = 0; p < kCifarPixels; ++p) {
            os.put(static_cast<char>(pixel_byte(pixels[p])));
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// IDX

namespace {
constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) |
           (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_be32(std::ostream& os, std::uint32_t v) {
    os.put(static_cast<char>(v >> 24));
    os.put(static_cast<char>(v >> 16));
    os.put(static_cast<char>(v >> 8));
    os.put(static_cast<char>(v));
}
}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    const std::vector<unsigned char> img = read_all(images_path);
    const std::vector<unsigned char> lbl = read_all(labels_path);

    if (img.size() < 16 || be32(&img[0]) != kIdxImagesMagic) {
        throw std::runtime_error("bad IDX image magic in " + images_path.string());
    }
    if (lbl.size() < 8 || be32(&lbl[0]) != kIdxLabelsMagic) {
        throw std::runtime_error("bad IDX label magic in " + labels_path.string());
    }
    const std::size_t n = be32(&img[4]);
    const std::size_t h = be32(&img[8]);
    const std::size_t w = be32(&img[12]);
    const std::size_t n_labels = be32(&lbl[4]);
    if (n != n_labels) {
        throw std::runtime_error("IDX pair mismatch: " + std::to_string(n) +
                                 " images vs " + std::to_string(n_labels) + " labels");
    }
    if (img.size() != 16 + n * h * w || lbl.size() != 8 + n) {
        throw std::runtime_error("truncated IDX pair");
    }

    Dataset ds;
    ds.images = Tensor({n, 1, h, w});
    ds.labels.resize(n);
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = lbl[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
        const unsigned char* pixels = &img[16 + i * h * w];
        double* out = &ds.images.data[i * h * w];
        for (std::size_t p = 0; p < h * w; ++p) {
            out[p] = static_cast<double>(pixels[p]) / 255.0;
        }
    }
    ds.num_classes = max_label + 1;
    return ds;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    if (dataset.images.rank() != 4 || dataset.images.shape[1] != 1) {
        throw std::invalid_argument("write_idx expects single-channel [N x 1 x H x W]");
    }
    const std::size_t n = dataset.size();
    const std::size_t h = dataset.images.shape[2];
    const std::size_t w = dataset.images.shape[3];

    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open " + images_path.string());
    put_be32(img, kIdxImagesMagic);
    put_be32(img, static_cast<std::uint32_t>(n));
    put_be32(img, static_cast<std::uint32_t>(h));
    put_be32(img, static_cast<std::uint32_t>(w));
    for (std::size_t i = 0; i < n * h * w; ++i) {
        img.put(static_cast<char>(pixel_byte(dataset.images.data[i])));
    }
    if (!img) throw std::runtime_error("write failed: " + images_path.string());

    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw std::runtime_error("cannot open " + labels_path.string());
    put_be32(lbl, kIdxLabelsMagic);
    put_be32(lbl, static_cast<std::uint32_t>(n));
    for (std::size_t label : dataset.labels) {
        if (label > 255) throw std::invalid_argument("IDX label out of byte range");
        lbl.put(static_cast<char>(label));
    }
    if (!lbl) throw std::runtime_error("write failed: " + labels_path.string());
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

Dataset synth_dataset(std::size_t num_samples, std::size_t num_classes,
                      const std::vector<std::size_t>& input_shape, std::uint64_t seed) {
    if (num_classes < 2) {
        throw std::invalid_argument("synth_dataset: need at least 2 classes");
    }
    if (input_shape.size() != 3) {
        throw std::invalid_argument("synth_dataset: input shape must be {C, H, W}");
    }
    const std::size_t pixels = shape_size(input_shape);

    Rng rng(mix_seed(seed, 0x5D47));
    std::vector<std::vector<double>> means(num_classes, std::vector<double>(pixels));
    for (auto& mean : means) {
        for (double& v : mean) v = rng.uniform(0.15, 0.85);
    }

    Dataset ds;
    ds.num_classes = num_classes;
    ds.images = Tensor({num_samples, input_shape[0], input_shape[1], input_shape[2]});
    ds.labels.resize(num_samples);
    for (std::size_t i = 0; i < num_samples; ++i) {
        const std::size_t cls = i % num_classes;
        ds.labels[i] = cls;
        double* out = &ds.images.data[i * pixels];
        for (std::size_t p = 0; p < pixels; ++p) {
            out[p] = std::clamp(means[cls][p] + 0.08 * rng.normal(), 0.0, 1.0);
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset,
                                          std::size_t train_count) {
    if (train_count == 0 || train_count >= dataset.size()) {
        throw std::invalid_argument("split_dataset: train count must leave both splits "
                                    "non-empty");
    }
    const std::size_t per_sample = shape_size(dataset.sample_shape());
    auto take = [&](std::size_t begin, std::size_t end, const char* tag) {
        Dataset part;
        part.num_classes = dataset.num_classes;
        part.split = tag;
        std::vector<std::size_t> shape = dataset.images.shape;
        shape[0] = end - begin;
        part.images = Tensor(shape);
        std::copy_n(&dataset.images.data[begin * per_sample], (end - begin) * per_sample,
                    part.images.data.begin());
        part.labels.assign(dataset.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                           dataset.labels.begin() + static_cast<std::ptrdiff_t>(end));
        return part;
    };
    return {take(0, train_count, "train"), take(train_count, dataset.size(), "val")};
}

std::pair<Tensor, std::vector<std::size_t>> gather_batch(
    const Dataset& dataset, std::span<const std::size_t> indices) {
    const std::size_t per_sample = shape_size(dataset.sample_shape());
    std::vector<std::size_t> shape = dataset.images.shape;
    shape[0] = indices.size();

    Tensor batch(shape);
    std::vector<std::size_t> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= dataset.size()) {
            throw std::invalid_argument("batch index out of range");
        }
        std::copy_n(&dataset.images.data[src * per_sample], per_sample,
                    &batch.data[i * per_sample]);
        labels[i] = dataset.labels[src];
    }
    return {std::move(batch), std::move(labels)};
}

}  // namespace sponge
