#pragma once

#include "codenet/training.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace codenet {

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// IDX image/label pair: pixels scaled to [0,1], labels one-hot over 10
// classes.
inline std::vector<Sample> load_mnist(const std::string& images_path,
                                      const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

    if (detail::read_be32(img, "image magic") != 0x00000803u)
        throw std::runtime_error("idx: bad image magic in " + images_path);
    if (detail::read_be32(lab, "label magic") != 0x00000801u)
        throw std::runtime_error("idx: bad label magic in " + labels_path);

    std::uint32_t n_images = detail::read_be32(img, "image count");
    std::uint32_t rows = detail::read_be32(img, "image rows");
    std::uint32_t cols = detail::read_be32(img, "image cols");
    std::uint32_t n_labels = detail::read_be32(lab, "label count");
    if (n_images != n_labels)
        throw std::runtime_error("idx: image/label count mismatch");

    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<Sample> out;
    out.reserve(n_images);
    std::vector<unsigned char> pixels(dim);
    for (std::uint32_t k = 0; k < n_images; ++k) {
        img.read(reinterpret_cast<char*>(pixels.data()), std::streamsize(dim));
        if (!img) throw std::runtime_error("idx: truncated image data");
        int label = lab.get();
        if (label == EOF) throw std::runtime_error("idx: truncated label data");
        if (label > 9) throw std::runtime_error("idx: label out of range");
        Sample s;
        s.x.resize(Eigen::Index(dim));
        for (std::size_t i = 0; i < dim; ++i) s.x(Eigen::Index(i)) = pixels[i] / 255.0;
        s.y = Eigen::VectorXd::Zero(10);
        s.y(label) = 1.0;
        out.push_back(std::move(s));
    }
    return out;
}

// Seeded Gaussian clusters standing in for MNIST when no IDX files are
// given: one center per class drawn uniformly, samples are the center plus
// isotropic noise, clamped to [0,1] like pixel data. Classes cycle so the
// set is balanced, and the whole set is a pure function of (seed, count).
inline std::vector<Sample> synthetic_dataset(std::uint64_t seed, long count, int dim,
                                             int classes, double sigma = 0.1) {
    if (count < 1 || dim < 1 || classes < 1)
        throw std::invalid_argument("synthetic_dataset: bad shape");
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> center_dist(0.1, 0.9);
    std::normal_distribution<double> noise(0.0, sigma);

    std::vector<Eigen::VectorXd> centers(classes);
    for (int c = 0; c < classes; ++c) {
        centers[c].resize(dim);
        for (int i = 0; i < dim; ++i) centers[c](i) = center_dist(eng);
    }
    std::vector<Sample> out;
    out.reserve(count);
    for (long k = 0; k < count; ++k) {
        int c = int(k % classes);
        Sample s;
        s.x.resize(dim);
        for (int i = 0; i < dim; ++i)
            s.x(i) = std::clamp(centers[c](i) + noise(eng), 0.0, 1.0);
        s.y = Eigen::VectorXd::Zero(classes);
        s.y(c) = 1.0;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace codenet
