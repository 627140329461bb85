#pragma once

#include "slat/sparse_attention.hpp"
#include "slat/windowing.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace slat {

struct SlatConfig {
    Index d_model = 64;
    Index time_blocks = 4;
    Index sensor_blocks = 4;
    Index decoder_blocks = 2;
    Index heads = 8;
    Index ffn_mult = 4;
    Index rank = 4;  // low-rank inner dimension of every Q/K/V projection
    bool low_rank = true;
    Index band = 2;  // time-encoder band half-width
    Index globals = 2;
    Index sensor_band = 2;
    Index sensor_globals = 2;
    MaskMode mask_mode = MaskMode::Exclude;
    Index n_stw = 30;
    Index n_channels = 9;
    double dropout = 0.1;
    double rul_cap = 125.0;
    double layer_norm_eps = 1e-5;

    Index d_head() const { return d_model / heads; }
    Index ffn_hidden() const { return ffn_mult * d_model; }
};

/// Throws InvalidArgument on any inconsistent field.
void validate_config(const SlatConfig& cfg);

struct LayerNormParams {
    Matrix gain;  // 1 x d
    Matrix bias;  // 1 x d
};

struct FeedForwardParams {
    Matrix w1;  // d x hidden
    Matrix b1;  // 1 x hidden
    Matrix w2;  // hidden x d
    Matrix b2;  // 1 x d
};

struct EncoderBlockParams {
    LayerNormParams attn_norm;
    MultiHeadWeights attn;
    LayerNormParams ffn_norm;
    FeedForwardParams ffn;
};

/// The decoder query is a single token, so self-attention over it is the
/// identity and each block is cross-attention followed by the FFN.
struct DecoderBlockParams {
    LayerNormParams query_norm;
    MultiHeadWeights cross;
    LayerNormParams ffn_norm;
    FeedForwardParams ffn;
};

struct NamedTensor {
    std::string name;
    Matrix* tensor;
};

struct ConstNamedTensor {
    std::string name;
    const Matrix* tensor;
};

/// Every learnable tensor of the dual-encoder/decoder network. The same
/// layout doubles as gradient and optimizer-moment storage.
struct SlatParams {
    Matrix time_embed_w;      // 3S x d: [values(t), means, slopes]
    Matrix time_embed_b;      // 1 x d
    Matrix sensor_embed_w;    // (n_stw + 2) x d: [values(:, c), mean_c, slope_c]
    Matrix sensor_embed_b;    // 1 x d
    Matrix channel_identity;  // S x d
    std::vector<EncoderBlockParams> time_blocks;
    std::vector<EncoderBlockParams> sensor_blocks;
    LayerNormParams time_final_norm;
    LayerNormParams sensor_final_norm;
    Matrix decoder_query;  // 1 x d
    std::vector<DecoderBlockParams> decoder_blocks;
    LayerNormParams output_norm;
    Matrix head_w;  // d x 1
    Matrix head_b;  // 1 x 1

    /// Stable, unique names in a fixed order; used by the optimizer,
    /// checkpoints and gradient checks.
    std::vector<NamedTensor> tensors();
    std::vector<ConstNamedTensor> tensors() const;

    Index size() const;
    void set_zero();
};

/// Parameters with every tensor shaped for `cfg` and filled with zeros.
SlatParams zero_params(const SlatConfig& cfg);

/// Fan-in uniform initialization; the second low-rank factor is scaled by
/// 1/sqrt(r). LayerNorm gains start at 1, the output bias at 0.5 (half the
/// RUL cap).
SlatParams init_params(const SlatConfig& cfg, std::uint64_t seed);

/// Exact number of scalars in `zero_params(cfg)`.
Index param_count(const SlatConfig& cfg);

/// Sinusoidal positional encoding, n x d.
Matrix positional_encoding(Index n, Index d);

struct LayerNormCache {
    Matrix normalized;  // x_hat
    Vector inv_std;
};

struct FeedForwardCache {
    Matrix input;
    Matrix pre_activation;
    Matrix activation;
};

struct EncoderBlockCache {
    Matrix input;
    LayerNormCache attn_norm;
    Matrix attn_norm_out;
    MultiHeadCache attn;
    Matrix attn_dropout;  // empty when dropout is off
    Matrix mid;
    LayerNormCache ffn_norm;
    Matrix ffn_norm_out;
    FeedForwardCache ffn;
    Matrix ffn_dropout;
};

struct DecoderBlockCache {
    Matrix input;
    LayerNormCache query_norm;
    Matrix query_norm_out;
    MultiHeadCache cross;
    Matrix cross_dropout;
    Matrix mid;
    LayerNormCache ffn_norm;
    Matrix ffn_norm_out;
    FeedForwardCache ffn;
    Matrix ffn_dropout;
};

/// Activations retained by a training forward pass.
struct ForwardTrace {
    Matrix time_input;    // n_stw x 3S
    Matrix sensor_input;  // S x (n_stw + 2)
    std::vector<EncoderBlockCache> time_blocks;
    std::vector<EncoderBlockCache> sensor_blocks;
    Matrix time_encoded;
    LayerNormCache time_final_norm;
    Matrix sensor_encoded;
    LayerNormCache sensor_final_norm;
    Matrix fused;
    std::vector<DecoderBlockCache> decoder_blocks;
    Matrix decoder_state;
    LayerNormCache output_norm;
    Matrix output_norm_out;
    double prediction = 0.0;  // unclamped
};

/// Dual-encoder sparse low-rank transformer regressing RUL from one window.
class SlatModel {
public:
    explicit SlatModel(SlatConfig cfg);
    SlatModel(SlatConfig cfg, SlatParams params);

    const SlatConfig& config() const { return config_; }
    const SlatParams& params() const { return params_; }
    SlatParams& params() { return params_; }
    const SparseMask& time_mask() const { return time_mask_; }
    const SparseMask& sensor_mask() const { return sensor_mask_; }

    Matrix embed_time_tokens(const WindowSample& sample) const;
    Matrix embed_sensor_tokens(const WindowSample& sample) const;

    /// One pre-norm block: x + MHA(LN(x)), then x + FFN(LN(x)).
    Matrix encoder_forward(const Matrix& tokens, const EncoderBlockParams& block,
                           const SparseMask& mask) const;

    /// Time tokens first, then sensor tokens.
    static Matrix fuse(const Matrix& time_out, const Matrix& sensor_out);

    /// Learned query cross-attending to the fused tokens, then the scalar
    /// head. Unclamped.
    double decoder_forward(const Matrix& fused) const;

    /// Unclamped network output. With `trace` set, activations are kept for
    /// `backward`. Dropout is applied only when `dropout_rng` is given.
    double forward(const WindowSample& sample, ForwardTrace* trace = nullptr,
                   Rng* dropout_rng = nullptr) const;

    /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
    void backward(const ForwardTrace& trace, double d_output, SlatParams& grads) const;

    /// Inference prediction clamped to [0, rul_cap].
    double predict_rul(const WindowSample& sample) const;
    std::vector<double> predict_batch(std::span<const WindowSample> samples) const;

private:
    void check_sample(const WindowSample& sample) const;
    Matrix time_input(const WindowSample& sample) const;
    Matrix sensor_input(const WindowSample& sample) const;

    SlatConfig config_;
    SlatParams params_;
    SparseMask time_mask_;
    SparseMask sensor_mask_;
    Matrix time_positions_;
};

}  // namespace slat
