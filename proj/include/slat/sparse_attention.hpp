#pragma once

#include "slat/common.hpp"

#include <string>
#include <vector>

namespace slat {

/// Binary query/key connectivity: band |i - j| <= w plus global tokens that
/// attend to and are attended by everything. Symmetric, diagonal always set.
class SparseMask {
public:
    /// Throws InvalidArgument when L < 1, w < 0 or a global index is outside
    /// [0, L).
    static SparseMask build(Index length, Index band_width, std::vector<Index> globals);

    /// Band of width w with the first `global_count` tokens global.
    static SparseMask leading_globals(Index length, Index band_width, Index global_count);

    static SparseMask dense(Index length) { return build(length, length, {}); }

    Index length() const { return length_; }
    Index band_width() const { return band_width_; }
    const std::vector<Index>& globals() const { return globals_; }

    bool allowed(Index query, Index key) const {
        return bits_[static_cast<std::size_t>(query * length_ + key)] != 0;
    }

    Index nnz() const { return nnz_; }
    bool is_dense() const { return nnz_ == length_ * length_; }

    /// Rows of 0/1 characters, one line per query.
    std::string to_string() const;

private:
    Index length_ = 0;
    Index band_width_ = 0;
    std::vector<Index> globals_;
    std::vector<unsigned char> bits_;
    Index nnz_ = 0;
};

/// How disallowed logits enter the softmax.
enum class MaskMode {
    /// Disallowed logits are -inf: weights there are exactly zero.
    Exclude,
    /// Literal elementwise product M * (QK^T): disallowed logits become 0 and
    /// still receive softmax weight.
    Hadamard,
};

/// Q/K/V projection weight. Low-rank form stores W = U * V with U of shape
/// d_model x r and V of shape r x d_head; dense form stores W in `u` and
/// leaves `v` empty.
struct Projection {
    Matrix u;
    Matrix v;

    bool low_rank() const { return v.size() > 0; }
    Index input_dim() const { return u.rows(); }
    Index output_dim() const { return low_rank() ? v.cols() : u.cols(); }
    Index rank() const { return low_rank() ? u.cols() : std::min(u.rows(), u.cols()); }
    Index param_count() const { return u.size() + v.size(); }
    Matrix effective() const { return low_rank() ? Matrix(u * v) : u; }
};

Index projection_param_count(Index d_model, Index d_head, Index rank, bool low_rank);

/// X * U * V evaluated as (X * U) * V.
Matrix lowrank_project(const Matrix& x, const Projection& p);

/// Accumulates parameter gradients into `grad` (same shapes as `p`) and
/// returns dL/dX.
Matrix lowrank_project_backward(const Matrix& x, const Projection& p, const Matrix& d_out,
                                Projection& grad);

struct AttentionOutput {
    Matrix values;   // L_q x d_head
    Matrix weights;  // L_q x L_k
};

/// softmax(mask(Q K^T) * scale) V. A null mask means every key is visible,
/// which is also how rectangular (cross) attention is expressed.
AttentionOutput masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                 const SparseMask* mask, double scale,
                                 MaskMode mode = MaskMode::Exclude);

struct AttentionGrads {
    Matrix dq;
    Matrix dk;
    Matrix dv;
};

AttentionGrads masked_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                         const AttentionOutput& forward, const SparseMask* mask,
                                         double scale, MaskMode mode, const Matrix& d_out);

struct HeadProjections {
    Projection query;
    Projection key;
    Projection value;
};

struct MultiHeadWeights {
    std::vector<HeadProjections> heads;
    Matrix output;  // d_model x d_model

    Index d_model() const { return output.rows(); }
    Index param_count() const;
};

struct MultiHeadCache {
    Matrix query_input;
    Matrix memory_input;
    std::vector<Matrix> q, k, v;
    std::vector<AttentionOutput> attention;
    Matrix concat;
};

/// Cross-attention form: queries from `query_input`, keys/values from
/// `memory_input`. Each head's output is concatenated along features and
/// passed through the output projection.
Matrix multi_head_attention(const Matrix& query_input, const Matrix& memory_input,
                            const MultiHeadWeights& weights, const SparseMask* mask,
                            MaskMode mode = MaskMode::Exclude, MultiHeadCache* cache = nullptr);

/// Self-attention form.
inline Matrix multi_head_attention(const Matrix& x, const MultiHeadWeights& weights,
                                   const SparseMask* mask, MaskMode mode = MaskMode::Exclude,
                                   MultiHeadCache* cache = nullptr) {
    return multi_head_attention(x, x, weights, mask, mode, cache);
}

struct MultiHeadInputGrads {
    Matrix d_query_input;
    Matrix d_memory_input;
};

MultiHeadInputGrads multi_head_attention_backward(const MultiHeadCache& cache,
                                                  const MultiHeadWeights& weights,
                                                  const SparseMask* mask, MaskMode mode,
                                                  const Matrix& d_out, MultiHeadWeights& grads);

/// Score multiply-adds at allowed query/key pairs: nnz(M) * d_head, with the
/// first `global_count` tokens global.
std::int64_t attention_flops(Index length, Index band_width, Index global_count, Index d_head);
std::int64_t dense_attention_flops(Index length, Index d_head);

}  // namespace slat
