#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redmotion/nn/autograd.hpp"
#include "redmotion/nn/ops.hpp"
#include "redmotion/nn/parameters.hpp"

namespace redmotion::nn {

// x W + b, W is [in, out].
class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
           Init weight_init = Init::variance_scaled, bool bias = true);

    Var operator()(Tape& tape, Var x) const;

    [[nodiscard]] std::size_t in_features() const noexcept { return in_; }
    [[nodiscard]] std::size_t out_features() const noexcept { return out_; }
    [[nodiscard]] ParamId weight() const noexcept { return weight_; }
    [[nodiscard]] std::optional<ParamId> bias() const noexcept { return bias_; }

private:
    ParamId weight_;
    std::optional<ParamId> bias_;
    std::size_t in_ = 0;
    std::size_t out_ = 0;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParameterStore& store, const std::string& name, std::size_t features);
    Var operator()(Tape& tape, Var x) const;

private:
    ParamId gamma_;
    ParamId beta_;
};

enum class Activation { gelu, relu, none };

/// Stack of linear layers with an activation between consecutive layers and
/// a linear output. `widths` includes the input width, so {in, h, out} is two
/// layers.
class Mlp {
public:
    Mlp() = default;
    Mlp(ParameterStore& store, const std::string& name, std::span<const std::size_t> widths,
        Activation activation = Activation::gelu, Init last_init = Init::variance_scaled);

    Var operator()(Tape& tape, Var x) const;
    [[nodiscard]] const std::vector<Linear>& layers() const noexcept { return layers_; }
    [[nodiscard]] std::size_t out_features() const { return layers_.back().out_features(); }

private:
    std::vector<Linear> layers_;
    Activation activation_ = Activation::gelu;
};

struct AttentionConfig {
    std::size_t model_dim = 64;
    std::size_t heads = 4;
    std::size_t window = 16;  // local attention only

    void validate() const;
    [[nodiscard]] std::size_t head_dim() const { return model_dim / heads; }
};

// Row-major [queries, keys] boolean matrix, true = may attend.
struct AttentionMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> allow;

    static AttentionMask full(std::size_t rows, std::size_t cols);
    // |i - j| <= window / 2, self inclusive.
    static AttentionMask band(std::size_t n, std::size_t window);
    // Every query may attend to keys flagged valid.
    static AttentionMask key_padding(std::size_t rows, std::span<const std::uint8_t> key_valid);
    static AttentionMask identity(std::size_t n);
};

// Instrumentation for tests: counts computed attention logits and keeps the
// last attention weights ([heads * queries, keys], head-major).
struct AttentionProbe {
    std::size_t logits_computed = 0;
    Tensor weights;
};

/// Multi-head scaled dot-product attention, scale 1/sqrt(d/h).
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    // With `zero_output`, the output projection starts at zero so a residual
    // branch using it is the identity at initialization.
    MultiHeadAttention(ParameterStore& store, const std::string& name, const AttentionConfig& config,
                       bool zero_output = true);

    // Global attention over x with an optional [n, n] mask.
    Var self_attention(Tape& tape, Var x, const AttentionMask* mask = nullptr, AttentionProbe* probe = nullptr) const;
    // Band-restricted attention, computed without materializing the n x n scores.
    Var local_self_attention(Tape& tape, Var x, std::size_t window) const;
    // queries [m, d] attend over context [n, d].
    Var cross_attention(Tape& tape, Var queries, Var context, const AttentionMask* mask = nullptr,
                        AttentionProbe* probe = nullptr) const;

    [[nodiscard]] const AttentionConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Linear& query() const noexcept { return q_; }
    [[nodiscard]] const Linear& key() const noexcept { return k_; }
    [[nodiscard]] const Linear& value() const noexcept { return v_; }
    [[nodiscard]] const Linear& output() const noexcept { return o_; }

private:
    Var attend(Tape& tape, Var q, Var k, Var v, const AttentionMask* mask, AttentionProbe* probe) const;

    AttentionConfig config_;
    Linear q_, k_, v_, o_;
};

enum class BlockKind { local, global, cross };

/// Pre-norm residual block: x + Attn(LN(x)), then x + MLP(LN(x)).
/// The cross variant normalizes the context with its own LayerNorm. With
/// `identity_init` both residual branches start at zero.
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(ParameterStore& store, const std::string& name, const AttentionConfig& config, BlockKind kind,
                     std::size_t mlp_ratio = 2, bool identity_init = true);

    Var forward(Tape& tape, Var x, const AttentionMask* mask = nullptr) const;
    Var forward_cross(Tape& tape, Var x, Var context, const AttentionMask* mask = nullptr,
                      AttentionProbe* probe = nullptr) const;

    [[nodiscard]] BlockKind kind() const noexcept { return kind_; }
    [[nodiscard]] const MultiHeadAttention& attention() const noexcept { return attn_; }

private:
    Var feed_forward(Tape& tape, Var x) const;

    BlockKind kind_ = BlockKind::global;
    LayerNorm ln_attn_, ln_context_, ln_mlp_;
    MultiHeadAttention attn_;
    Mlp mlp_;
};

}  // namespace redmotion::nn
