#pragma once

#include <Eigen/Dense>
#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace codenet {

enum class StrategyKind : std::uint8_t { CodeNet = 0, Replication = 1, Uncoded = 2 };

// On-disk snapshot. Blocks are listed per layer in grid scan order (row-major
// over node positions; for CodeNet the empty corner is skipped, for
// Replication grid 0 precedes grid 1). The RNG cursor is the fault injector's
// epoch, padded to 128 bits.
//
// Byte layout (all integers little-endian):
//   magic "CDNT" | version u16 | strategy u8 | iteration u64 | layer count u16
//   per layer: N_l u32, N_{l-1} u32, m u16, n u16, t u16
//   all blocks, row-major f64
//   rng cursor u128
//   crc32 (IEEE) over everything after the magic
struct Checkpoint {
    static constexpr std::uint16_t kFormatVersion = 1;

    StrategyKind strategy = StrategyKind::CodeNet;
    std::uint64_t iteration = 0;
    struct LayerMeta {
        std::uint32_t n_l = 0;
        std::uint32_t n_lm1 = 0;
        std::uint16_t m = 1;
        std::uint16_t n = 1;
        std::uint16_t t = 0;
    };
    std::vector<LayerMeta> layers;
    std::vector<std::vector<Eigen::MatrixXd>> blocks;  // [layer][scan index]
    std::uint64_t rng_cursor_lo = 0;
    std::uint64_t rng_cursor_hi = 0;
};

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint: truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(in[pos + i]) << (8 * i);
    pos += sizeof(T);
    return v;
}

inline void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_le(out, bits);
}

inline double get_f64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    std::uint64_t bits = get_le<std::uint64_t>(in, pos);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'C', 'D', 'N', 'T'});
    detail::put_le<std::uint16_t>(out, Checkpoint::kFormatVersion);
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.strategy));
    detail::put_le<std::uint64_t>(out, ckpt.iteration);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ckpt.layers.size()));
    for (const auto& meta : ckpt.layers) {
        detail::put_le<std::uint32_t>(out, meta.n_l);
        detail::put_le<std::uint32_t>(out, meta.n_lm1);
        detail::put_le<std::uint16_t>(out, meta.m);
        detail::put_le<std::uint16_t>(out, meta.n);
        detail::put_le<std::uint16_t>(out, meta.t);
    }
    for (const auto& layer_blocks : ckpt.blocks)
        for (const auto& block : layer_blocks)
            for (Eigen::Index i = 0; i < block.rows(); ++i)
                for (Eigen::Index j = 0; j < block.cols(); ++j)
                    detail::put_f64(out, block(i, j));
    detail::put_le<std::uint64_t>(out, ckpt.rng_cursor_lo);
    detail::put_le<std::uint64_t>(out, ckpt.rng_cursor_hi);
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0, out.data() + 4, static_cast<uInt>(out.size() - 4)));
    detail::put_le<std::uint32_t>(out, crc);
    return out;
}

// Parses and validates a serialized checkpoint. block_shape must return the
// (rows, cols) of the scan-order block at (layer, index) and the number of
// blocks per layer is supplied by blocks_per_layer; both are derived from the
// strategy by the caller.
template <typename BlocksPerLayer, typename BlockShape>
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, BlocksPerLayer blocks_per_layer,
                       BlockShape block_shape) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "CDNT", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    if (bytes.size() < 8) throw std::runtime_error("checkpoint: truncated");
    std::uint32_t stored_crc;
    {
        std::size_t crc_pos = bytes.size() - 4;
        std::size_t p = crc_pos;
        stored_crc = detail::get_le<std::uint32_t>(bytes, p);
        std::uint32_t actual = static_cast<std::uint32_t>(
            ::crc32(0, bytes.data() + 4, static_cast<uInt>(crc_pos - 4)));
        if (stored_crc != actual) throw std::runtime_error("checkpoint: crc mismatch");
    }
    std::size_t pos = 4;
    Checkpoint ckpt;
    std::uint16_t version = detail::get_le<std::uint16_t>(bytes, pos);
    if (version != Checkpoint::kFormatVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    ckpt.strategy = static_cast<StrategyKind>(detail::get_le<std::uint8_t>(bytes, pos));
    ckpt.iteration = detail::get_le<std::uint64_t>(bytes, pos);
    std::uint16_t layer_count = detail::get_le<std::uint16_t>(bytes, pos);
    ckpt.layers.resize(layer_count);
    for (auto& meta : ckpt.layers) {
        meta.n_l = detail::get_le<std::uint32_t>(bytes, pos);
        meta.n_lm1 = detail::get_le<std::uint32_t>(bytes, pos);
        meta.m = detail::get_le<std::uint16_t>(bytes, pos);
        meta.n = detail::get_le<std::uint16_t>(bytes, pos);
        meta.t = detail::get_le<std::uint16_t>(bytes, pos);
    }
    ckpt.blocks.resize(layer_count);
    for (int l = 0; l < layer_count; ++l) {
        int count = blocks_per_layer(l, ckpt);
        ckpt.blocks[l].resize(count);
        for (int b = 0; b < count; ++b) {
            auto [rows, cols] = block_shape(l, b, ckpt);
            Eigen::MatrixXd blk(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) blk(i, j) = detail::get_f64(bytes, pos);
            ckpt.blocks[l][b] = std::move(blk);
        }
    }
    ckpt.rng_cursor_lo = detail::get_le<std::uint64_t>(bytes, pos);
    ckpt.rng_cursor_hi = detail::get_le<std::uint64_t>(bytes, pos);
    if (pos != bytes.size() - 4) throw std::runtime_error("checkpoint: trailing bytes");
    return ckpt;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace codenet
