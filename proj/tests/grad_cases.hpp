#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "redmotion/losses.hpp"
#include "redmotion/nn/ops.hpp"
#include "support.hpp"

namespace rmtest {

struct GradCase {
    std::string name;
    ScalarFn fn;
    std::vector<Tensor> inputs;
};

// One case per differentiable primitive and loss, on small random shapes.
inline std::vector<GradCase> gradient_cases(std::uint64_t seed)
{
    namespace nn = redmotion::nn;
    std::mt19937_64 rng(seed);
    auto r = [&](std::size_t m, std::size_t n) { return random_tensor(rng, m, n); };
    std::vector<GradCase> cases;
    auto add_case = [&](std::string name, std::vector<Tensor> inputs, auto body) {
        cases.push_back({std::move(name),
                         [body](Tape& t, std::span<const Var> x) { return weighted_sum(t, body(t, x), 7); },
                         std::move(inputs)});
    };

    add_case("matmul", {r(3, 4), r(4, 2)}, [](Tape&, std::span<const Var> x) { return nn::matmul(x[0], x[1]); });
    add_case("matmul_ta", {r(4, 3), r(4, 2)}, [](Tape&, std::span<const Var> x) { return nn::matmul(x[0], x[1], true); });
    add_case("matmul_tb", {r(3, 4), r(2, 4)},
             [](Tape&, std::span<const Var> x) { return nn::matmul(x[0], x[1], false, true); });
    add_case("matmul_tab", {r(4, 3), r(2, 4)},
             [](Tape&, std::span<const Var> x) { return nn::matmul(x[0], x[1], true, true); });
    add_case("matmul_shared", {r(3, 3)}, [](Tape&, std::span<const Var> x) { return nn::matmul(x[0], x[0]); });
    add_case("add", {r(2, 3), r(2, 3)}, [](Tape&, std::span<const Var> x) { return nn::add(x[0], x[1]); });
    add_case("sub", {r(2, 3), r(2, 3)}, [](Tape&, std::span<const Var> x) { return nn::sub(x[0], x[1]); });
    add_case("mul", {r(2, 3), r(2, 3)}, [](Tape&, std::span<const Var> x) { return nn::mul(x[0], x[1]); });
    add_case("scale", {r(2, 3)}, [](Tape&, std::span<const Var> x) { return nn::scale(x[0], -1.7); });
    add_case("add_row", {r(3, 4), r(1, 4)}, [](Tape&, std::span<const Var> x) { return nn::add_row(x[0], x[1]); });
    add_case("gelu", {r(3, 4)}, [](Tape&, std::span<const Var> x) { return nn::gelu(nn::scale(x[0], 3.0)); });
    // Offset keeps every entry away from the kink.
    {
        Tensor a = r(3, 4);
        for (double& v : a.data) v += v > 0 ? 0.1 : -0.1;
        add_case("relu", {a}, [](Tape&, std::span<const Var> x) { return nn::relu(x[0]); });
    }
    add_case("layer_norm", {r(3, 5), r(1, 5), r(1, 5)},
             [](Tape&, std::span<const Var> x) { return nn::layer_norm(x[0], x[1], x[2]); });
    add_case("softmax_rows", {r(3, 4)}, [](Tape&, std::span<const Var> x) { return nn::softmax_rows(nn::scale(x[0], 2.0)); });
    add_case("softmax_rows_masked", {r(3, 4)}, [](Tape&, std::span<const Var> x) {
        static const std::vector<std::uint8_t> allow{1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 1};
        return nn::softmax_rows(x[0], allow);
    });
    add_case("transpose", {r(2, 3)}, [](Tape&, std::span<const Var> x) { return nn::transpose(x[0]); });
    add_case("reshape", {r(2, 6)}, [](Tape&, std::span<const Var> x) { return nn::reshape(x[0], 4, 3); });
    add_case("slice_cols", {r(3, 5)}, [](Tape&, std::span<const Var> x) { return nn::slice_cols(x[0], 1, 3); });
    add_case("slice_rows", {r(5, 3)}, [](Tape&, std::span<const Var> x) { return nn::slice_rows(x[0], 2, 2); });
    add_case("concat_cols", {r(3, 2), r(3, 4)}, [](Tape&, std::span<const Var> x) {
        const std::array<Var, 3> parts{x[0], x[1], x[0]};
        return nn::concat_cols(parts);
    });
    add_case("concat_rows", {r(2, 3), r(1, 3)}, [](Tape&, std::span<const Var> x) {
        const std::array<Var, 2> parts{x[0], x[1]};
        return nn::concat_rows(parts);
    });
    add_case("mean_rows", {r(4, 3)}, [](Tape&, std::span<const Var> x) { return nn::mean_rows(x[0]); });
    add_case("mean_rows_masked", {r(4, 3)}, [](Tape&, std::span<const Var> x) {
        static const std::vector<std::uint8_t> mask{1, 0, 1, 1};
        return nn::mean_rows(x[0], mask);
    });
    add_case("mean_cols", {r(4, 3)}, [](Tape&, std::span<const Var> x) { return nn::mean_cols(x[0]); });
    add_case("sum", {r(2, 3)}, [](Tape&, std::span<const Var> x) { return nn::sum(x[0]); });
    add_case("gather_rows", {r(4, 3)}, [](Tape&, std::span<const Var> x) {
        static const std::vector<std::size_t> idx{2, 0, 2, 3};
        return nn::gather_rows(x[0], idx);
    });
    add_case("banded_attention", {r(7, 4), r(7, 4), r(7, 4)},
             [](Tape&, std::span<const Var> x) { return nn::banded_attention(x[0], x[1], x[2], 2, 2); });

    cases.push_back({"barlow_twins_loss", [](Tape&, std::span<const Var> x) { return redmotion::barlow_twins_loss(x[0], x[1], 5e-3); },
                     {r(5, 4), r(5, 4)}});
    cases.push_back({"info_nce_loss", [](Tape&, std::span<const Var> x) { return redmotion::info_nce_loss(x[0], x[1], 0.5); },
                     {r(4, 3), r(4, 3)}});
    {
        std::vector<redmotion::Vec2> truth{{0.3, -0.2}, {0.5, 0.1}, {0.9, 0.4}};
        cases.push_back({"nll_mixture_loss",
                         [truth](Tape&, std::span<const Var> x) {
                             static const std::vector<std::uint8_t> valid{1, 0, 1};
                             return redmotion::nll_mixture_loss(x[0], x[1], truth, valid);
                         },
                         {r(4, 6), r(1, 4)}});
    }
    return cases;
}

}  // namespace rmtest
