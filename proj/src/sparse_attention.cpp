#include "slat/sparse_attention.hpp"

#include <algorithm>
#include <limits>

namespace slat {

SparseMask SparseMask::build(Index length, Index band_width, std::vector<Index> globals) {
    require(length >= 1, ErrorCode::InvalidArgument, "mask length must be >= 1");
    require(band_width >= 0, ErrorCode::InvalidArgument, "band width must be >= 0");
    std::sort(globals.begin(), globals.end());
    globals.erase(std::unique(globals.begin(), globals.end()), globals.end());
    for (Index g : globals) {
        require(g >= 0 && g < length, ErrorCode::InvalidArgument,
                "global token index " + std::to_string(g) + " outside [0, " +
                    std::to_string(length) + ")");
    }

    SparseMask mask;
    mask.length_ = length;
    mask.band_width_ = band_width;
    mask.globals_ = std::move(globals);
    mask.bits_.assign(static_cast<std::size_t>(length * length), 0);

    std::vector<bool> is_global(static_cast<std::size_t>(length), false);
    for (Index g : mask.globals_) is_global[static_cast<std::size_t>(g)] = true;

    for (Index i = 0; i < length; ++i) {
        for (Index j = 0; j < length; ++j) {
            const bool on = std::abs(i - j) <= band_width ||
                            is_global[static_cast<std::size_t>(i)] ||
                            is_global[static_cast<std::size_t>(j)];
            if (on) {
                mask.bits_[static_cast<std::size_t>(i * length + j)] = 1;
                ++mask.nnz_;
            }
        }
    }
    return mask;
}

SparseMask SparseMask::leading_globals(Index length, Index band_width, Index global_count) {
    require(global_count >= 0 && global_count <= length, ErrorCode::InvalidArgument,
            "global token count must lie in [0, L]");
    std::vector<Index> globals(static_cast<std::size_t>(global_count));
    for (Index g = 0; g < global_count; ++g) globals[static_cast<std::size_t>(g)] = g;
    return build(length, band_width, std::move(globals));
}

std::string SparseMask::to_string() const {
    std::string out;
    out.reserve(static_cast<std::size_t>(length_ * (length_ + 1)));
    for (Index i = 0; i < length_; ++i) {
        for (Index j = 0; j < length_; ++j) out.push_back(allowed(i, j) ? '1' : '0');
        out.push_back('\n');
    }
    return out;
}

Index projection_param_count(Index d_model, Index d_head, Index rank, bool low_rank) {
    return low_rank ? d_model * rank + rank * d_head : d_model * d_head;
}

Matrix lowrank_project(const Matrix& x, const Projection& p) {
    require(x.cols() == p.u.rows(), ErrorCode::InvalidArgument,
            "projection input width " + std::to_string(x.cols()) + " != " +
                std::to_string(p.u.rows()));
    if (!p.low_rank()) return x * p.u;
    require(p.u.cols() == p.v.rows(), ErrorCode::InvalidArgument,
            "low-rank factors disagree on rank");
    const Matrix inner = x * p.u;
    return inner * p.v;
}

Matrix lowrank_project_backward(const Matrix& x, const Projection& p, const Matrix& d_out,
                                Projection& grad) {
    if (!p.low_rank()) {
        grad.u.noalias() += x.transpose() * d_out;
        return d_out * p.u.transpose();
    }
    const Matrix inner = x * p.u;
    grad.v.noalias() += inner.transpose() * d_out;
    const Matrix d_inner = d_out * p.v.transpose();
    grad.u.noalias() += x.transpose() * d_inner;
    return d_inner * p.u.transpose();
}

AttentionOutput masked_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                 const SparseMask* mask, double scale, MaskMode mode) {
    require(q.cols() == k.cols(), ErrorCode::InvalidArgument, "Q and K widths differ");
    require(k.rows() == v.rows(), ErrorCode::InvalidArgument, "K and V lengths differ");
    require(all_finite(q) && all_finite(k) && all_finite(v), ErrorCode::InvalidInput,
            "attention inputs contain non-finite values");
    if (mask != nullptr) {
        require(mask->length() == q.rows() && mask->length() == k.rows(),
                ErrorCode::InvalidArgument, "mask length does not match token count");
    }

    const Index lq = q.rows();
    const Index lk = k.rows();
    Matrix logits = (q * k.transpose()) * scale;
    AttentionOutput out;
    out.weights.resize(lq, lk);

    for (Index i = 0; i < lq; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < lk; ++j) {
            const bool on = mask == nullptr || mask->allowed(i, j);
            if (!on && mode == MaskMode::Hadamard) logits(i, j) = 0.0;
            if (on || mode == MaskMode::Hadamard) row_max = std::max(row_max, logits(i, j));
        }
        double total = 0.0;
        for (Index j = 0; j < lk; ++j) {
            const bool on = mask == nullptr || mask->allowed(i, j);
            const double w = (on || mode == MaskMode::Hadamard) ? std::exp(logits(i, j) - row_max)
                                                                : 0.0;
            out.weights(i, j) = w;
            total += w;
        }
        out.weights.row(i) /= total;
    }
    out.values = out.weights * v;
    return out;
}

AttentionGrads masked_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                         const AttentionOutput& forward, const SparseMask* mask,
                                         double scale, MaskMode mode, const Matrix& d_out) {
    const Matrix& a = forward.weights;
    AttentionGrads grads;
    grads.dv = a.transpose() * d_out;
    const Matrix d_weights = d_out * v.transpose();

    // Softmax Jacobian per row: dS = A * (dA - <A, dA>).
    Matrix d_scores = a.cwiseProduct(d_weights);
    const Vector row_dot = d_scores.rowwise().sum();
    d_scores -= a.cwiseProduct(row_dot.replicate(1, a.cols()));
    d_scores *= scale;
    if (mask != nullptr && mode == MaskMode::Hadamard) {
        for (Index i = 0; i < d_scores.rows(); ++i) {
            for (Index j = 0; j < d_scores.cols(); ++j) {
                if (!mask->allowed(i, j)) d_scores(i, j) = 0.0;
            }
        }
    }
    grads.dq = d_scores * k;
    grads.dk = d_scores.transpose() * q;
    return grads;
}

Index MultiHeadWeights::param_count() const {
    Index total = output.size();
    for (const auto& h : heads) {
        total += h.query.param_count() + h.key.param_count() + h.value.param_count();
    }
    return total;
}

Matrix multi_head_attention(const Matrix& query_input, const Matrix& memory_input,
                            const MultiHeadWeights& weights, const SparseMask* mask,
                            MaskMode mode, MultiHeadCache* cache) {
    const Index d_model = weights.d_model();
    const Index n_heads = static_cast<Index>(weights.heads.size());
    require(n_heads >= 1, ErrorCode::InvalidArgument, "attention needs at least one head");
    require(weights.output.cols() == d_model, ErrorCode::InvalidArgument,
            "output projection must be square");
    require(query_input.cols() == d_model && memory_input.cols() == d_model,
            ErrorCode::InvalidArgument, "token width does not match d_model");
    const Index d_head = weights.heads.front().query.output_dim();
    require(n_heads * d_head == d_model, ErrorCode::InvalidArgument,
            "heads * d_head must equal d_model");

    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));
    Matrix concat(query_input.rows(), d_model);

    MultiHeadCache local;
    MultiHeadCache& c = cache != nullptr ? *cache : local;
    c.q.resize(static_cast<std::size_t>(n_heads));
    c.k.resize(static_cast<std::size_t>(n_heads));
    c.v.resize(static_cast<std::size_t>(n_heads));
    c.attention.resize(static_cast<std::size_t>(n_heads));

    for (Index h = 0; h < n_heads; ++h) {
        const auto& proj = weights.heads[static_cast<std::size_t>(h)];
        require(proj.query.output_dim() == d_head && proj.key.output_dim() == d_head &&
                    proj.value.output_dim() == d_head,
                ErrorCode::InvalidArgument, "heads disagree on d_head");
        const auto hi = static_cast<std::size_t>(h);
        c.q[hi] = lowrank_project(query_input, proj.query);
        c.k[hi] = lowrank_project(memory_input, proj.key);
        c.v[hi] = lowrank_project(memory_input, proj.value);
        c.attention[hi] = masked_attention(c.q[hi], c.k[hi], c.v[hi], mask, scale, mode);
        concat.middleCols(h * d_head, d_head) = c.attention[hi].values;
    }
    if (cache != nullptr) {
        c.query_input = query_input;
        c.memory_input = memory_input;
        c.concat = concat;
    }
    return concat * weights.output;
}

MultiHeadInputGrads multi_head_attention_backward(const MultiHeadCache& cache,
                                                  const MultiHeadWeights& weights,
                                                  const SparseMask* mask, MaskMode mode,
                                                  const Matrix& d_out, MultiHeadWeights& grads) {
    const Index n_heads = static_cast<Index>(weights.heads.size());
    const Index d_head = weights.heads.front().query.output_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    grads.output.noalias() += cache.concat.transpose() * d_out;
    const Matrix d_concat = d_out * weights.output.transpose();

    MultiHeadInputGrads in;
    in.d_query_input = Matrix::Zero(cache.query_input.rows(), cache.query_input.cols());
    in.d_memory_input = Matrix::Zero(cache.memory_input.rows(), cache.memory_input.cols());
    for (Index h = 0; h < n_heads; ++h) {
        const auto hi = static_cast<std::size_t>(h);
        const auto& proj = weights.heads[hi];
        auto& g = grads.heads[hi];
        const Matrix d_head_out = d_concat.middleCols(h * d_head, d_head);
        const AttentionGrads ag = masked_attention_backward(
            cache.q[hi], cache.k[hi], cache.v[hi], cache.attention[hi], mask, scale, mode,
            d_head_out);
        in.d_query_input += lowrank_project_backward(cache.query_input, proj.query, ag.dq, g.query);
        in.d_memory_input += lowrank_project_backward(cache.memory_input, proj.key, ag.dk, g.key);
        in.d_memory_input +=
            lowrank_project_backward(cache.memory_input, proj.value, ag.dv, g.value);
    }
    return in;
}

std::int64_t attention_flops(Index length, Index band_width, Index global_count, Index d_head) {
    const SparseMask mask = SparseMask::leading_globals(length, band_width, global_count);
    return static_cast<std::int64_t>(mask.nnz()) * d_head;
}

std::int64_t dense_attention_flops(Index length, Index d_head) {
    return static_cast<std::int64_t>(length) * length * d_head;
}

}  // namespace slat
