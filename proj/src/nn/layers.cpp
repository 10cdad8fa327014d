#include "redmotion/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace redmotion::nn {

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Init weight_init, bool bias)
    : weight_(store.add(name + "/weight", in, out, weight_init)), in_(in), out_(out)
{
    if (bias) bias_ = store.add(name + "/bias", 1, out, Init::zeros);
}

Var Linear::operator()(Tape& tape, Var x) const
{
    if (x.cols() != in_) {
        throw std::invalid_argument("linear: expected " + std::to_string(in_) + " input features, got " +
                                    x.value().shape_string());
    }
    Var y = matmul(x, tape.param(weight_));
    if (bias_) y = add_row(y, tape.param(*bias_));
    return y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t features)
    : gamma_(store.add(name + "/gamma", 1, features, Init::ones)), beta_(store.add(name + "/beta", 1, features, Init::zeros))
{
}

Var LayerNorm::operator()(Tape& tape, Var x) const { return layer_norm(x, tape.param(gamma_), tape.param(beta_)); }

Mlp::Mlp(ParameterStore& store, const std::string& name, std::span<const std::size_t> widths, Activation activation,
         Init last_init)
    : activation_(activation)
{
    if (widths.size() < 2) throw std::invalid_argument("mlp: need at least input and output width");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        layers_.emplace_back(store, name + "/fc" + std::to_string(i), widths[i], widths[i + 1],
                             last ? last_init : Init::variance_scaled);
    }
}

Var Mlp::operator()(Tape& tape, Var x) const
{
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i](tape, x);
        if (i + 1 == layers_.size()) break;
        if (activation_ == Activation::gelu) x = gelu(x);
        else if (activation_ == Activation::relu) x = relu(x);
    }
    return x;
}

void AttentionConfig::validate() const
{
    if (model_dim == 0 || heads == 0 || model_dim % heads != 0) {
        throw std::invalid_argument("attention config: model_dim " + std::to_string(model_dim) +
                                    " must be a positive multiple of heads " + std::to_string(heads));
    }
    if (window < 2 || window % 2 != 0) {
        throw std::invalid_argument("attention config: window must be even and >= 2, got " + std::to_string(window));
    }
}

AttentionMask AttentionMask::full(std::size_t rows, std::size_t cols) { return {rows, cols, std::vector<std::uint8_t>(rows * cols, 1)}; }

AttentionMask AttentionMask::band(std::size_t n, std::size_t window)
{
    AttentionMask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
    const std::size_t half = window / 2;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m.allow[i * n + j] = (i > j ? i - j : j - i) <= half;
    return m;
}

AttentionMask AttentionMask::key_padding(std::size_t rows, std::span<const std::uint8_t> key_valid)
{
    AttentionMask m{rows, key_valid.size(), std::vector<std::uint8_t>(rows * key_valid.size(), 0)};
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < key_valid.size(); ++j) m.allow[i * key_valid.size() + j] = key_valid[j] != 0;
    return m;
}

AttentionMask AttentionMask::identity(std::size_t n)
{
    AttentionMask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
    for (std::size_t i = 0; i < n; ++i) m.allow[i * n + i] = 1;
    return m;
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, const AttentionConfig& config,
                                       bool zero_output)
    : config_(config)
{
    config_.validate();
    const std::size_t d = config.model_dim;
    q_ = Linear(store, name + "/query", d, d);
    k_ = Linear(store, name + "/key", d, d);
    v_ = Linear(store, name + "/value", d, d);
    o_ = Linear(store, name + "/output", d, d, zero_output ? Init::zeros : Init::variance_scaled);
}

Var MultiHeadAttention::attend(Tape& tape, Var q, Var k, Var v, const AttentionMask* mask, AttentionProbe* probe) const
{
    const std::size_t m = q.rows();
    const std::size_t n = k.rows();
    if (n == 0) throw std::invalid_argument("attention: empty key/value set");
    if (mask != nullptr && (mask->rows != m || mask->cols != n)) {
        throw std::invalid_argument("attention: mask [" + std::to_string(mask->rows) + ", " + std::to_string(mask->cols) +
                                    "] does not match scores [" + std::to_string(m) + ", " + std::to_string(n) + "]");
    }
    const std::size_t dh = config_.head_dim();
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    std::span<const std::uint8_t> allow = mask ? std::span<const std::uint8_t>(mask->allow) : std::span<const std::uint8_t>{};

    std::vector<Var> heads;
    heads.reserve(config_.heads);
    if (probe != nullptr) {
        probe->logits_computed = m * n;
        probe->weights = Tensor(config_.heads * m, n);
    }
    for (std::size_t h = 0; h < config_.heads; ++h) {
        Var qh = config_.heads == 1 ? q : slice_cols(q, h * dh, dh);
        Var kh = config_.heads == 1 ? k : slice_cols(k, h * dh, dh);
        Var vh = config_.heads == 1 ? v : slice_cols(v, h * dh, dh);
        Var p = softmax_rows(scale(matmul(qh, kh, false, true), s), allow);
        if (probe != nullptr) {
            std::copy(p.value().data.begin(), p.value().data.end(),
                      probe->weights.data.begin() + static_cast<std::ptrdiff_t>(h * m * n));
        }
        heads.push_back(matmul(p, vh));
    }
    Var joined = heads.size() == 1 ? heads.front() : concat_cols(heads);
    return o_(tape, joined);
}

Var MultiHeadAttention::self_attention(Tape& tape, Var x, const AttentionMask* mask, AttentionProbe* probe) const
{
    return attend(tape, q_(tape, x), k_(tape, x), v_(tape, x), mask, probe);
}

Var MultiHeadAttention::local_self_attention(Tape& tape, Var x, std::size_t window) const
{
    if (window < 2 || window % 2 != 0) throw std::invalid_argument("local attention: window must be even and >= 2");
    if (x.rows() == 0) throw std::invalid_argument("local attention: empty sequence");
    Var core = banded_attention(q_(tape, x), k_(tape, x), v_(tape, x), config_.heads, window / 2);
    return o_(tape, core);
}

Var MultiHeadAttention::cross_attention(Tape& tape, Var queries, Var context, const AttentionMask* mask,
                                        AttentionProbe* probe) const
{
    if (context.rows() == 0) throw std::invalid_argument("cross attention: empty context");
    return attend(tape, q_(tape, queries), k_(tape, context), v_(tape, context), mask, probe);
}

TransformerBlock::TransformerBlock(ParameterStore& store, const std::string& name, const AttentionConfig& config,
                                   BlockKind kind, std::size_t mlp_ratio, bool identity_init)
    : kind_(kind)
{
    const std::size_t d = config.model_dim;
    ln_attn_ = LayerNorm(store, name + "/ln_attn", d);
    if (kind == BlockKind::cross) ln_context_ = LayerNorm(store, name + "/ln_context", d);
    ln_mlp_ = LayerNorm(store, name + "/ln_mlp", d);
    attn_ = MultiHeadAttention(store, name + "/attn", config, identity_init);
    const std::size_t widths[] = {d, d * mlp_ratio, d};
    mlp_ = Mlp(store, name + "/mlp", widths, Activation::gelu, identity_init ? Init::zeros : Init::variance_scaled);
}

Var TransformerBlock::feed_forward(Tape& tape, Var x) const { return add(x, mlp_(tape, ln_mlp_(tape, x))); }

Var TransformerBlock::forward(Tape& tape, Var x, const AttentionMask* mask) const
{
    if (kind_ == BlockKind::cross) throw std::logic_error("transformer block: cross block needs a context");
    Var h = ln_attn_(tape, x);
    Var a = kind_ == BlockKind::local ? attn_.local_self_attention(tape, h, attn_.config().window)
                                      : attn_.self_attention(tape, h, mask);
    return feed_forward(tape, add(x, a));
}

Var TransformerBlock::forward_cross(Tape& tape, Var x, Var context, const AttentionMask* mask, AttentionProbe* probe) const
{
    if (kind_ != BlockKind::cross) throw std::logic_error("transformer block: forward_cross on a self-attention block");
    Var a = attn_.cross_attention(tape, ln_attn_(tape, x), ln_context_(tape, context), mask, probe);
    return feed_forward(tape, add(x, a));
}

}  // namespace redmotion::nn
