#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace codenet {

// Detection fires when the syndrome exceeds tol_detect relative to the word
// magnitude; a candidate error support is accepted when its least-squares
// residual stays below tol_decode on the same scale. Both are far above f64
// rounding at the block sizes this library targets and far below any
// injected-noise magnitude of interest.
inline constexpr double kTolDetect = 1e-8;
inline constexpr double kTolDecode = 1e-6;

// Systematic MDS code over the reals. generator = [I_k | A] (k x (k+r)),
// parity_check = [A^T | -I_r] (r x (k+r)), so parity_check * generator^T = 0.
struct MdsCode {
    int k = 0;  // message block count
    int r = 0;  // parity block count, r = 2t
    Eigen::MatrixXd generator;
    Eigen::MatrixXd parity_check;

    int t() const { return r / 2; }

    // Cauchy parity: A(i,j) = 1 / (x_i - y_j) with x_i = i+1, y_j = -(j+1).
    // Every square submatrix of a Cauchy matrix is nonsingular, so any k
    // columns of [I | A] are linearly independent.
    static MdsCode cauchy(int k, int t) {
        if (k < 1) throw std::invalid_argument("MdsCode: k must be >= 1");
        if (t < 0) throw std::invalid_argument("MdsCode: t must be >= 0");
        Eigen::MatrixXd parity(k, 2 * t);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < 2 * t; ++j)
                parity(i, j) = 1.0 / (double(i + 1) + double(j + 1));
        return with_parity(k, parity);
    }

    // Explicit parity columns, for reproducing known small codes exactly.
    // Caller is responsible for the MDS property of [I | A].
    static MdsCode with_parity(int k, const Eigen::MatrixXd& parity) {
        if (k < 1) throw std::invalid_argument("MdsCode: k must be >= 1");
        if (parity.rows() != k) throw std::invalid_argument("MdsCode: parity must have k rows");
        MdsCode code;
        code.k = k;
        code.r = static_cast<int>(parity.cols());
        code.generator.resize(k, k + code.r);
        code.generator << Eigen::MatrixXd::Identity(k, k), parity;
        code.parity_check.resize(code.r, k + code.r);
        if (code.r > 0)
            code.parity_check << parity.transpose(), -Eigen::MatrixXd::Identity(code.r, code.r);
        return code;
    }
};

// A codeword (or corrupted codeword) of k+r equal-length blocks, stored one
// block per row.
struct BlockVector {
    Eigen::MatrixXd data;  // (k+r) x block_len

    Eigen::Index block_count() const { return data.rows(); }
    Eigen::Index block_len() const { return data.cols(); }
    auto block(Eigen::Index i) { return data.row(i); }
    auto block(Eigen::Index i) const { return data.row(i); }
};

enum class DecodeStatus { Clean, Corrected, Uncorrectable };

struct DecodeOutcome {
    DecodeStatus status = DecodeStatus::Uncorrectable;
    Eigen::MatrixXd message;           // k x block_len, valid unless Uncorrectable
    std::vector<int> error_locations;  // flagged block indices, empty when Clean
};

// Codeword block i = sum_j generator(j, i) * message block j. Systematic, so
// the first k blocks are the message verbatim.
inline BlockVector encode_block_vector(const MdsCode& code, const Eigen::MatrixXd& message) {
    if (message.rows() != code.k)
        throw std::invalid_argument("encode_block_vector: message must have k blocks");
    BlockVector out;
    out.data = code.generator.transpose() * message;
    out.data.topRows(code.k) = message;  // keep systematic blocks bit-identical
    return out;
}

// The r syndrome blocks, (H o I) applied blockwise: S = H * word.
inline Eigen::MatrixXd syndrome(const MdsCode& code, const BlockVector& word) {
    if (word.block_count() != code.k + code.r)
        throw std::invalid_argument("syndrome: word must have k+r blocks");
    if (code.r == 0) return Eigen::MatrixXd(0, word.block_len());
    return code.parity_check * word.data;
}

inline double word_scale(const BlockVector& word) {
    return 1.0 + (word.data.size() > 0 ? word.data.cwiseAbs().maxCoeff() : 0.0);
}

// Detection predicate: any syndrome entry above tol_detect relative to the
// word magnitude.
inline bool syndrome_fires(const BlockVector& word, const Eigen::MatrixXd& synd,
                           double tol = kTolDetect) {
    if (synd.size() == 0) return false;
    return synd.cwiseAbs().maxCoeff() > tol * word_scale(word);
}

namespace detail {

// Enumerate size-s subsets of {0..n-1} in lexicographic order.
inline bool next_subset(std::vector<int>& idx, int n) {
    int s = static_cast<int>(idx.size());
    for (int i = s - 1; i >= 0; --i) {
        if (idx[i] < n - (s - i)) {
            ++idx[i];
            for (int j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace detail

// Exhaustive sparse-support decoder. Syndrome clean -> Clean. Otherwise, for
// support size s = 1..t, solve least-squares H_S * E_S = S for every s-subset
// of block indices; a support is consistent when the residual is below
// tol_decode on the word scale. Exactly one consistent support at the minimal
// size -> Corrected (subtract the error, re-take the systematic blocks).
// Zero or several -> Uncorrectable; the caller must roll back. Any 2t columns
// of H are linearly independent, which makes a unique <=t support identify
// the true error.
inline DecodeOutcome decode(const MdsCode& code, const BlockVector& word,
                            double tol_detect = kTolDetect, double tol_decode = kTolDecode) {
    if (word.block_count() != code.k + code.r)
        throw std::invalid_argument("decode: word must have k+r blocks");
    DecodeOutcome out;
    const Eigen::MatrixXd synd = syndrome(code, word);
    if (!syndrome_fires(word, synd, tol_detect)) {
        out.status = DecodeStatus::Clean;
        out.message = word.data.topRows(code.k);
        return out;
    }

    const int n = code.k + code.r;
    const double scale = word_scale(word);
    for (int s = 1; s <= code.t(); ++s) {
        int consistent = 0;
        std::vector<int> best_support;
        Eigen::MatrixXd best_error;
        std::vector<int> idx(s);
        for (int i = 0; i < s; ++i) idx[i] = i;
        do {
            Eigen::MatrixXd hs(code.r, s);
            for (int c = 0; c < s; ++c) hs.col(c) = code.parity_check.col(idx[c]);
            Eigen::MatrixXd err = hs.colPivHouseholderQr().solve(synd);
            double residual = (hs * err - synd).cwiseAbs().maxCoeff();
            if (residual <= tol_decode * scale) {
                ++consistent;
                best_support = idx;
                best_error = err;
            }
        } while (detail::next_subset(idx, n));

        if (consistent == 1) {
            BlockVector fixed = word;
            for (int c = 0; c < s; ++c) fixed.data.row(best_support[c]) -= best_error.row(c);
            out.status = DecodeStatus::Corrected;
            out.message = fixed.data.topRows(code.k);
            out.error_locations = best_support;
            return out;
        }
        if (consistent > 1) {
            out.status = DecodeStatus::Uncorrectable;
            return out;
        }
    }
    out.status = DecodeStatus::Uncorrectable;
    return out;
}

}  // namespace codenet
