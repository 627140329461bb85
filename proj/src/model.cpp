#include "slat/model.hpp"

#include <algorithm>
#include <utility>

namespace slat {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// ---- parameter walking -------------------------------------------------

template <typename Params, typename Visit>
void visit_layer_norm(Params& p, const std::string& prefix, Visit&& visit) {
    visit(prefix + ".gain", p.gain);
    visit(prefix + ".bias", p.bias);
}

template <typename Params, typename Visit>
void visit_ffn(Params& p, const std::string& prefix, Visit&& visit) {
    visit(prefix + ".w1", p.w1);
    visit(prefix + ".b1", p.b1);
    visit(prefix + ".w2", p.w2);
    visit(prefix + ".b2", p.b2);
}

template <typename Proj, typename Visit>
void visit_projection(Proj& p, const std::string& prefix, Visit&& visit) {
    if (p.v.size() > 0) {
        visit(prefix + ".u", p.u);
        visit(prefix + ".v", p.v);
    } else {
        visit(prefix + ".w", p.u);
    }
}

template <typename Weights, typename Visit>
void visit_mha(Weights& w, const std::string& prefix, Visit&& visit) {
    for (std::size_t h = 0; h < w.heads.size(); ++h) {
        const std::string head = prefix + ".head" + std::to_string(h);
        visit_projection(w.heads[h].query, head + ".query", visit);
        visit_projection(w.heads[h].key, head + ".key", visit);
        visit_projection(w.heads[h].value, head + ".value", visit);
    }
    visit(prefix + ".output", w.output);
}

template <typename Params, typename Visit>
void visit_params(Params& p, Visit&& visit) {
    visit("time_embed.w", p.time_embed_w);
    visit("time_embed.b", p.time_embed_b);
    visit("sensor_embed.w", p.sensor_embed_w);
    visit("sensor_embed.b", p.sensor_embed_b);
    visit("channel_identity", p.channel_identity);
    auto encoder = [&](auto& blocks, const std::string& path) {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string prefix = path + "." + std::to_string(i);
            visit_layer_norm(blocks[i].attn_norm, prefix + ".attn_norm", visit);
            visit_mha(blocks[i].attn, prefix + ".attn", visit);
            visit_layer_norm(blocks[i].ffn_norm, prefix + ".ffn_norm", visit);
            visit_ffn(blocks[i].ffn, prefix + ".ffn", visit);
        }
    };
    encoder(p.time_blocks, "time_encoder");
    encoder(p.sensor_blocks, "sensor_encoder");
    visit_layer_norm(p.time_final_norm, "time_final_norm", visit);
    visit_layer_norm(p.sensor_final_norm, "sensor_final_norm", visit);
    visit("decoder_query", p.decoder_query);
    for (std::size_t i = 0; i < p.decoder_blocks.size(); ++i) {
        const std::string prefix = "decoder." + std::to_string(i);
        visit_layer_norm(p.decoder_blocks[i].query_norm, prefix + ".query_norm", visit);
        visit_mha(p.decoder_blocks[i].cross, prefix + ".cross", visit);
        visit_layer_norm(p.decoder_blocks[i].ffn_norm, prefix + ".ffn_norm", visit);
        visit_ffn(p.decoder_blocks[i].ffn, prefix + ".ffn", visit);
    }
    visit_layer_norm(p.output_norm, "output_norm", visit);
    visit("head.w", p.head_w);
    visit("head.b", p.head_b);
}

// ---- layers ------------------------------------------------------------

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& p, double eps, LayerNormCache* cache) {
    const Index d = x.cols();
    Matrix xhat(x.rows(), d);
    Vector inv_std(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().sum() / static_cast<double>(d);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (x.row(i).array() - mean) * inv_std[i];
    }
    Matrix y = (xhat.array().rowwise() * p.gain.row(0).array()).rowwise() + p.bias.row(0).array();
    if (cache != nullptr) {
        cache->normalized = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix layer_norm_backward(const LayerNormCache& cache, const LayerNormParams& p,
                           const Matrix& dy, LayerNormParams& grad) {
    const Matrix& xhat = cache.normalized;
    grad.gain += dy.cwiseProduct(xhat).colwise().sum();
    grad.bias += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * p.gain.row(0).array();
    Matrix dx(dy.rows(), dy.cols());
    for (Index i = 0; i < dy.rows(); ++i) {
        const double mean_d = dxhat.row(i).mean();
        const double mean_dx = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
        dx.row(i) =
            (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx) * cache.inv_std[i];
    }
    return dx;
}

Matrix feed_forward(const Matrix& x, const FeedForwardParams& p, FeedForwardCache* cache) {
    Matrix pre = (x * p.w1).rowwise() + p.b1.row(0);
    Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
    Matrix y = (act * p.w2).rowwise() + p.b2.row(0);
    if (cache != nullptr) {
        cache->input = x;
        cache->pre_activation = std::move(pre);
        cache->activation = std::move(act);
    }
    return y;
}

Matrix feed_forward_backward(const FeedForwardCache& cache, const FeedForwardParams& p,
                             const Matrix& dy, FeedForwardParams& grad) {
    grad.w2.noalias() += cache.activation.transpose() * dy;
    grad.b2 += dy.colwise().sum();
    const Matrix d_act = dy * p.w2.transpose();
    const Matrix d_pre =
        d_act.cwiseProduct(cache.pre_activation.unaryExpr([](double v) { return gelu_grad(v); }));
    grad.w1.noalias() += cache.input.transpose() * d_pre;
    grad.b1 += d_pre.colwise().sum();
    return d_pre * p.w1.transpose();
}

/// Inverted dropout mask, or an empty matrix when dropout is inactive.
Matrix dropout_mask(Index rows, Index cols, double rate, Rng* rng) {
    if (rng == nullptr || rate <= 0.0) return {};
    Matrix mask(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) mask(i, j) = rng->uniform() < rate ? 0.0 : keep;
    }
    return mask;
}

void apply_mask(Matrix& x, const Matrix& mask) {
    if (mask.size() > 0) x.array() *= mask.array();
}

Matrix encoder_block(const Matrix& x, const EncoderBlockParams& p, const SparseMask& mask,
                     const SlatConfig& cfg, Rng* rng, EncoderBlockCache* cache) {
    EncoderBlockCache local;
    EncoderBlockCache& c = cache != nullptr ? *cache : local;
    const bool keep = cache != nullptr;

    Matrix h = layer_norm(x, p.attn_norm, cfg.layer_norm_eps, keep ? &c.attn_norm : nullptr);
    Matrix attn =
        multi_head_attention(h, p.attn, &mask, cfg.mask_mode, keep ? &c.attn : nullptr);
    Matrix attn_drop = dropout_mask(attn.rows(), attn.cols(), cfg.dropout, rng);
    apply_mask(attn, attn_drop);
    Matrix mid = x + attn;

    Matrix h2 = layer_norm(mid, p.ffn_norm, cfg.layer_norm_eps, keep ? &c.ffn_norm : nullptr);
    Matrix ffn = feed_forward(h2, p.ffn, keep ? &c.ffn : nullptr);
    Matrix ffn_drop = dropout_mask(ffn.rows(), ffn.cols(), cfg.dropout, rng);
    apply_mask(ffn, ffn_drop);
    Matrix out = mid + ffn;

    if (keep) {
        c.input = x;
        c.attn_norm_out = std::move(h);
        c.attn_dropout = std::move(attn_drop);
        c.mid = std::move(mid);
        c.ffn_norm_out = std::move(h2);
        c.ffn_dropout = std::move(ffn_drop);
    }
    return out;
}

Matrix encoder_block_backward(const EncoderBlockCache& c, const EncoderBlockParams& p,
                              const SparseMask& mask, const SlatConfig& cfg, const Matrix& dy,
                              EncoderBlockParams& g) {
    Matrix d_ffn = dy;
    apply_mask(d_ffn, c.ffn_dropout);
    const Matrix d_h2 = feed_forward_backward(c.ffn, p.ffn, d_ffn, g.ffn);
    Matrix d_mid = dy + layer_norm_backward(c.ffn_norm, p.ffn_norm, d_h2, g.ffn_norm);

    Matrix d_attn = d_mid;
    apply_mask(d_attn, c.attn_dropout);
    const MultiHeadInputGrads dh =
        multi_head_attention_backward(c.attn, p.attn, &mask, cfg.mask_mode, d_attn, g.attn);
    const Matrix d_h = dh.d_query_input + dh.d_memory_input;
    return d_mid + layer_norm_backward(c.attn_norm, p.attn_norm, d_h, g.attn_norm);
}

Matrix decoder_block(const Matrix& query, const Matrix& memory, const DecoderBlockParams& p,
                     const SlatConfig& cfg, Rng* rng, DecoderBlockCache* cache) {
    DecoderBlockCache local;
    DecoderBlockCache& c = cache != nullptr ? *cache : local;
    const bool keep = cache != nullptr;

    Matrix h = layer_norm(query, p.query_norm, cfg.layer_norm_eps, keep ? &c.query_norm : nullptr);
    Matrix cross = multi_head_attention(h, memory, p.cross, nullptr, cfg.mask_mode,
                                        keep ? &c.cross : nullptr);
    Matrix cross_drop = dropout_mask(cross.rows(), cross.cols(), cfg.dropout, rng);
    apply_mask(cross, cross_drop);
    Matrix mid = query + cross;

    Matrix h2 = layer_norm(mid, p.ffn_norm, cfg.layer_norm_eps, keep ? &c.ffn_norm : nullptr);
    Matrix ffn = feed_forward(h2, p.ffn, keep ? &c.ffn : nullptr);
    Matrix ffn_drop = dropout_mask(ffn.rows(), ffn.cols(), cfg.dropout, rng);
    apply_mask(ffn, ffn_drop);
    Matrix out = mid + ffn;

    if (keep) {
        c.input = query;
        c.query_norm_out = std::move(h);
        c.cross_dropout = std::move(cross_drop);
        c.mid = std::move(mid);
        c.ffn_norm_out = std::move(h2);
        c.ffn_dropout = std::move(ffn_drop);
    }
    return out;
}

Matrix decoder_block_backward(const DecoderBlockCache& c, const DecoderBlockParams& p,
                              const SlatConfig& cfg, const Matrix& dy, DecoderBlockParams& g,
                              Matrix& d_memory) {
    Matrix d_ffn = dy;
    apply_mask(d_ffn, c.ffn_dropout);
    const Matrix d_h2 = feed_forward_backward(c.ffn, p.ffn, d_ffn, g.ffn);
    Matrix d_mid = dy + layer_norm_backward(c.ffn_norm, p.ffn_norm, d_h2, g.ffn_norm);

    Matrix d_cross = d_mid;
    apply_mask(d_cross, c.cross_dropout);
    const MultiHeadInputGrads dh =
        multi_head_attention_backward(c.cross, p.cross, nullptr, cfg.mask_mode, d_cross, g.cross);
    d_memory += dh.d_memory_input;
    return d_mid + layer_norm_backward(c.query_norm, p.query_norm, dh.d_query_input, g.query_norm);
}

// ---- shapes and initialization -----------------------------------------

LayerNormParams layer_norm_shape(Index d) { return {Matrix::Zero(1, d), Matrix::Zero(1, d)}; }

FeedForwardParams ffn_shape(Index d, Index hidden) {
    return {Matrix::Zero(d, hidden), Matrix::Zero(1, hidden), Matrix::Zero(hidden, d),
            Matrix::Zero(1, d)};
}

Projection projection_shape(const SlatConfig& cfg) {
    if (cfg.low_rank) {
        return {Matrix::Zero(cfg.d_model, cfg.rank), Matrix::Zero(cfg.rank, cfg.d_head())};
    }
    return {Matrix::Zero(cfg.d_model, cfg.d_head()), Matrix()};
}

MultiHeadWeights mha_shape(const SlatConfig& cfg) {
    MultiHeadWeights w;
    for (Index h = 0; h < cfg.heads; ++h) {
        w.heads.push_back({projection_shape(cfg), projection_shape(cfg), projection_shape(cfg)});
    }
    w.output = Matrix::Zero(cfg.d_model, cfg.d_model);
    return w;
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    }
}

double fan_in_bound(Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

void init_projection(Projection& p, Rng& rng) {
    fill_uniform(p.u, fan_in_bound(p.u.rows()), rng);
    if (p.low_rank()) {
        // Var(UV) = r Var(U) Var(V); the sqrt(3/r) bound makes it match the
        // dense fan-in initialization.
        fill_uniform(p.v, std::sqrt(3.0 / static_cast<double>(p.v.rows())), rng);
    }
}

void init_mha(MultiHeadWeights& w, Rng& rng) {
    for (auto& h : w.heads) {
        init_projection(h.query, rng);
        init_projection(h.key, rng);
        init_projection(h.value, rng);
    }
    fill_uniform(w.output, fan_in_bound(w.output.rows()), rng);
}

void init_ffn(FeedForwardParams& f, Rng& rng) {
    fill_uniform(f.w1, fan_in_bound(f.w1.rows()), rng);
    fill_uniform(f.w2, fan_in_bound(f.w2.rows()), rng);
}

void init_layer_norm(LayerNormParams& ln) { ln.gain.setOnes(); }

}  // namespace

void validate_config(const SlatConfig& cfg) {
    auto positive = [](Index v, const char* name) {
        require(v >= 1, ErrorCode::InvalidArgument, std::string(name) + " must be >= 1");
    };
    positive(cfg.d_model, "d_model");
    positive(cfg.heads, "heads");
    positive(cfg.time_blocks, "time_blocks");
    positive(cfg.sensor_blocks, "sensor_blocks");
    positive(cfg.decoder_blocks, "decoder_blocks");
    positive(cfg.ffn_mult, "ffn_mult");
    positive(cfg.n_channels, "n_channels");
    require(cfg.n_stw >= 2, ErrorCode::InvalidArgument, "n_stw must be >= 2");
    require(cfg.d_model % cfg.heads == 0, ErrorCode::InvalidArgument,
            "d_model must be divisible by heads");
    if (cfg.low_rank) {
        require(cfg.rank >= 1 && cfg.rank <= std::min(cfg.d_model, cfg.d_head()),
                ErrorCode::InvalidArgument, "rank must lie in [1, min(d_model, d_head)]");
    }
    require(cfg.band >= 0 && cfg.sensor_band >= 0, ErrorCode::InvalidArgument,
            "band widths must be >= 0");
    require(cfg.globals >= 0 && cfg.globals <= cfg.n_stw, ErrorCode::InvalidArgument,
            "time global count must lie in [0, n_stw]");
    require(cfg.sensor_globals >= 0 && cfg.sensor_globals <= cfg.n_channels,
            ErrorCode::InvalidArgument, "sensor global count must lie in [0, n_channels]");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, ErrorCode::InvalidArgument,
            "dropout must lie in [0, 1)");
    require(std::isfinite(cfg.rul_cap) && cfg.rul_cap > 0.0, ErrorCode::InvalidArgument,
            "rul_cap must be finite and positive");
    require(cfg.layer_norm_eps > 0.0, ErrorCode::InvalidArgument, "layer_norm_eps must be > 0");
}

std::vector<NamedTensor> SlatParams::tensors() {
    std::vector<NamedTensor> out;
    visit_params(*this, [&](std::string name, Matrix& m) { out.push_back({std::move(name), &m}); });
    return out;
}

std::vector<ConstNamedTensor> SlatParams::tensors() const {
    std::vector<ConstNamedTensor> out;
    visit_params(*this,
                 [&](std::string name, const Matrix& m) { out.push_back({std::move(name), &m}); });
    return out;
}

Index SlatParams::size() const {
    Index total = 0;
    for (const auto& t : tensors()) total += t.tensor->size();
    return total;
}

void SlatParams::set_zero() {
    for (auto& t : tensors()) t.tensor->setZero();
}

SlatParams zero_params(const SlatConfig& cfg) {
    validate_config(cfg);
    const Index d = cfg.d_model;
    const Index s = cfg.n_channels;
    SlatParams p;
    p.time_embed_w = Matrix::Zero(3 * s, d);
    p.time_embed_b = Matrix::Zero(1, d);
    p.sensor_embed_w = Matrix::Zero(cfg.n_stw + 2, d);
    p.sensor_embed_b = Matrix::Zero(1, d);
    p.channel_identity = Matrix::Zero(s, d);
    auto encoder_block_shape = [&] {
        return EncoderBlockParams{layer_norm_shape(d), mha_shape(cfg), layer_norm_shape(d),
                                  ffn_shape(d, cfg.ffn_hidden())};
    };
    for (Index i = 0; i < cfg.time_blocks; ++i) p.time_blocks.push_back(encoder_block_shape());
    for (Index i = 0; i < cfg.sensor_blocks; ++i) p.sensor_blocks.push_back(encoder_block_shape());
    p.time_final_norm = layer_norm_shape(d);
    p.sensor_final_norm = layer_norm_shape(d);
    p.decoder_query = Matrix::Zero(1, d);
    for (Index i = 0; i < cfg.decoder_blocks; ++i) {
        p.decoder_blocks.push_back(DecoderBlockParams{layer_norm_shape(d), mha_shape(cfg),
                                                      layer_norm_shape(d),
                                                      ffn_shape(d, cfg.ffn_hidden())});
    }
    p.output_norm = layer_norm_shape(d);
    p.head_w = Matrix::Zero(d, 1);
    p.head_b = Matrix::Zero(1, 1);
    return p;
}

SlatParams init_params(const SlatConfig& cfg, std::uint64_t seed) {
    SlatParams p = zero_params(cfg);
    Rng rng(derive_seed(seed, "slat-init"));
    const double token_bound = fan_in_bound(cfg.d_model);

    fill_uniform(p.time_embed_w, fan_in_bound(p.time_embed_w.rows()), rng);
    fill_uniform(p.sensor_embed_w, fan_in_bound(p.sensor_embed_w.rows()), rng);
    fill_uniform(p.channel_identity, token_bound, rng);
    for (auto* blocks : {&p.time_blocks, &p.sensor_blocks}) {
        for (auto& b : *blocks) {
            init_layer_norm(b.attn_norm);
            init_mha(b.attn, rng);
            init_layer_norm(b.ffn_norm);
            init_ffn(b.ffn, rng);
        }
    }
    init_layer_norm(p.time_final_norm);
    init_layer_norm(p.sensor_final_norm);
    fill_uniform(p.decoder_query, token_bound, rng);
    for (auto& b : p.decoder_blocks) {
        init_layer_norm(b.query_norm);
        init_mha(b.cross, rng);
        init_layer_norm(b.ffn_norm);
        init_ffn(b.ffn, rng);
    }
    init_layer_norm(p.output_norm);
    // The head output is multiplied by rul_cap, so keep its initial spread
    // small relative to the target range.
    fill_uniform(p.head_w, 0.1 * token_bound, rng);
    p.head_b(0, 0) = 0.5;
    return p;
}

Index param_count(const SlatConfig& cfg) {
    validate_config(cfg);
    const Index d = cfg.d_model;
    const Index s = cfg.n_channels;
    const Index hidden = cfg.ffn_hidden();
    const Index ln = 2 * d;
    const Index proj = projection_param_count(d, cfg.d_head(), cfg.rank, cfg.low_rank);
    const Index mha = cfg.heads * 3 * proj + d * d;
    const Index ffn = d * hidden + hidden + hidden * d + d;
    const Index block = 2 * ln + mha + ffn;

    Index total = 3 * s * d + d;          // time embedding
    total += (cfg.n_stw + 2) * d + d;     // sensor embedding
    total += s * d;                       // channel identity
    total += (cfg.time_blocks + cfg.sensor_blocks) * block;
    total += 2 * ln;                      // encoder final norms
    total += d;                           // decoder query
    total += cfg.decoder_blocks * block;
    total += ln + d + 1;                  // output norm + head
    return total;
}

Matrix positional_encoding(Index n, Index d) {
    Matrix pe(n, d);
    for (Index t = 0; t < n; ++t) {
        for (Index i = 0; i < d; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
            const double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
            pe(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

SlatModel::SlatModel(SlatConfig cfg) : SlatModel(cfg, zero_params(cfg)) {}

SlatModel::SlatModel(SlatConfig cfg, SlatParams params)
    : config_(cfg),
      params_(std::move(params)),
      time_mask_(SparseMask::leading_globals(cfg.n_stw, cfg.band, cfg.globals)),
      sensor_mask_(SparseMask::leading_globals(cfg.n_channels, cfg.sensor_band,
                                               cfg.sensor_globals)),
      time_positions_(positional_encoding(cfg.n_stw, cfg.d_model)) {
    validate_config(config_);
    const SlatParams expected = zero_params(config_);
    const auto want = expected.tensors();
    const auto have = std::as_const(params_).tensors();
    require(want.size() == have.size(), ErrorCode::InvalidArgument,
            "parameter layout does not match configuration");
    for (std::size_t i = 0; i < want.size(); ++i) {
        require(want[i].name == have[i].name &&
                    want[i].tensor->rows() == have[i].tensor->rows() &&
                    want[i].tensor->cols() == have[i].tensor->cols(),
                ErrorCode::InvalidArgument, "tensor '" + have[i].name + "' has the wrong shape");
    }
}

void SlatModel::check_sample(const WindowSample& sample) const {
    require(sample.values.rows() == config_.n_stw && sample.values.cols() == config_.n_channels,
            ErrorCode::InvalidArgument,
            "sample window is " + std::to_string(sample.values.rows()) + "x" +
                std::to_string(sample.values.cols()) + ", model expects " +
                std::to_string(config_.n_stw) + "x" + std::to_string(config_.n_channels));
    require(sample.descriptors.size() == 2 * config_.n_channels, ErrorCode::InvalidArgument,
            "descriptor length must be 2 * n_channels");
}

Matrix SlatModel::time_input(const WindowSample& sample) const {
    const Index s = config_.n_channels;
    Matrix in(config_.n_stw, 3 * s);
    in.leftCols(s) = sample.values;
    in.rightCols(2 * s) = sample.descriptors.transpose().replicate(config_.n_stw, 1);
    return in;
}

Matrix SlatModel::sensor_input(const WindowSample& sample) const {
    const Index s = config_.n_channels;
    const Index n = config_.n_stw;
    Matrix in(s, n + 2);
    in.leftCols(n) = sample.values.transpose();
    in.col(n) = sample.descriptors.head(s);
    in.col(n + 1) = sample.descriptors.tail(s);
    return in;
}

Matrix SlatModel::embed_time_tokens(const WindowSample& sample) const {
    check_sample(sample);
    Matrix tokens = (time_input(sample) * params_.time_embed_w).rowwise() +
                    params_.time_embed_b.row(0);
    return tokens + time_positions_;
}

Matrix SlatModel::embed_sensor_tokens(const WindowSample& sample) const {
    check_sample(sample);
    Matrix tokens = (sensor_input(sample) * params_.sensor_embed_w).rowwise() +
                    params_.sensor_embed_b.row(0);
    return tokens + params_.channel_identity;
}

Matrix SlatModel::encoder_forward(const Matrix& tokens, const EncoderBlockParams& block,
                                  const SparseMask& mask) const {
    require(tokens.rows() == mask.length(), ErrorCode::InvalidArgument,
            "token count does not match mask length");
    return encoder_block(tokens, block, mask, config_, nullptr, nullptr);
}

Matrix SlatModel::fuse(const Matrix& time_out, const Matrix& sensor_out) {
    require(time_out.cols() == sensor_out.cols(), ErrorCode::InvalidArgument,
            "fused paths disagree on d_model");
    Matrix fused(time_out.rows() + sensor_out.rows(), time_out.cols());
    fused.topRows(time_out.rows()) = time_out;
    fused.bottomRows(sensor_out.rows()) = sensor_out;
    return fused;
}

double SlatModel::decoder_forward(const Matrix& fused) const {
    require(fused.cols() == config_.d_model, ErrorCode::InvalidArgument,
            "fused tokens do not match d_model");
    Matrix query = params_.decoder_query;
    for (const auto& block : params_.decoder_blocks) {
        query = decoder_block(query, fused, block, config_, nullptr, nullptr);
    }
    const Matrix normed = layer_norm(query, params_.output_norm, config_.layer_norm_eps, nullptr);
    return config_.rul_cap * ((normed * params_.head_w)(0, 0) + params_.head_b(0, 0));
}

double SlatModel::forward(const WindowSample& sample, ForwardTrace* trace, Rng* dropout_rng) const {
    check_sample(sample);
    ForwardTrace local;
    ForwardTrace& tr = trace != nullptr ? *trace : local;
    const bool keep = trace != nullptr;
    const double eps = config_.layer_norm_eps;

    tr.time_input = time_input(sample);
    tr.sensor_input = sensor_input(sample);

    Matrix time = (tr.time_input * params_.time_embed_w).rowwise() + params_.time_embed_b.row(0);
    time += time_positions_;
    Matrix sensor =
        (tr.sensor_input * params_.sensor_embed_w).rowwise() + params_.sensor_embed_b.row(0);
    sensor += params_.channel_identity;

    tr.time_blocks.resize(params_.time_blocks.size());
    for (std::size_t i = 0; i < params_.time_blocks.size(); ++i) {
        time = encoder_block(time, params_.time_blocks[i], time_mask_, config_, dropout_rng,
                             keep ? &tr.time_blocks[i] : nullptr);
    }
    tr.sensor_blocks.resize(params_.sensor_blocks.size());
    for (std::size_t i = 0; i < params_.sensor_blocks.size(); ++i) {
        sensor = encoder_block(sensor, params_.sensor_blocks[i], sensor_mask_, config_,
                               dropout_rng, keep ? &tr.sensor_blocks[i] : nullptr);
    }
    tr.time_encoded = layer_norm(time, params_.time_final_norm, eps, &tr.time_final_norm);
    tr.sensor_encoded = layer_norm(sensor, params_.sensor_final_norm, eps, &tr.sensor_final_norm);
    tr.fused = fuse(tr.time_encoded, tr.sensor_encoded);

    Matrix query = params_.decoder_query;
    tr.decoder_blocks.resize(params_.decoder_blocks.size());
    for (std::size_t i = 0; i < params_.decoder_blocks.size(); ++i) {
        query = decoder_block(query, tr.fused, params_.decoder_blocks[i], config_, dropout_rng,
                              keep ? &tr.decoder_blocks[i] : nullptr);
    }
    tr.decoder_state = query;
    tr.output_norm_out = layer_norm(query, params_.output_norm, eps, &tr.output_norm);
    tr.prediction =
        config_.rul_cap * ((tr.output_norm_out * params_.head_w)(0, 0) + params_.head_b(0, 0));
    return tr.prediction;
}

void SlatModel::backward(const ForwardTrace& tr, double d_output, SlatParams& g) const {
    const double d_raw = d_output * config_.rul_cap;
    g.head_w += tr.output_norm_out.transpose() * d_raw;
    g.head_b(0, 0) += d_raw;
    const Matrix d_normed = params_.head_w.transpose() * d_raw;
    Matrix d_query = layer_norm_backward(tr.output_norm, params_.output_norm, d_normed,
                                         g.output_norm);

    Matrix d_fused = Matrix::Zero(tr.fused.rows(), tr.fused.cols());
    for (std::size_t i = params_.decoder_blocks.size(); i-- > 0;) {
        d_query = decoder_block_backward(tr.decoder_blocks[i], params_.decoder_blocks[i], config_,
                                         d_query, g.decoder_blocks[i], d_fused);
    }
    g.decoder_query += d_query;

    const Index n = config_.n_stw;
    Matrix d_time = layer_norm_backward(tr.time_final_norm, params_.time_final_norm,
                                        d_fused.topRows(n), g.time_final_norm);
    Matrix d_sensor =
        layer_norm_backward(tr.sensor_final_norm, params_.sensor_final_norm,
                            d_fused.bottomRows(config_.n_channels), g.sensor_final_norm);

    for (std::size_t i = params_.time_blocks.size(); i-- > 0;) {
        d_time = encoder_block_backward(tr.time_blocks[i], params_.time_blocks[i], time_mask_,
                                        config_, d_time, g.time_blocks[i]);
    }
    for (std::size_t i = params_.sensor_blocks.size(); i-- > 0;) {
        d_sensor = encoder_block_backward(tr.sensor_blocks[i], params_.sensor_blocks[i],
                                          sensor_mask_, config_, d_sensor, g.sensor_blocks[i]);
    }

    g.time_embed_w.noalias() += tr.time_input.transpose() * d_time;
    g.time_embed_b += d_time.colwise().sum();
    g.sensor_embed_w.noalias() += tr.sensor_input.transpose() * d_sensor;
    g.sensor_embed_b += d_sensor.colwise().sum();
    g.channel_identity += d_sensor;
}

double SlatModel::predict_rul(const WindowSample& sample) const {
    return std::clamp(forward(sample), 0.0, config_.rul_cap);
}

std::vector<double> SlatModel::predict_batch(std::span<const WindowSample> samples) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(predict_rul(s));
    return out;
}

}  // namespace slat
