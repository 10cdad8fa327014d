#include "redmotion/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace redmotion::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) { return ConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
MutMap view(Tensor& t) { return MutMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }

Tape& same_tape(Var a, Var b, const char* op)
{
    if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
    return *a.tape;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b)
{
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var matmul(Var a, Var b, bool ta, bool tb)
{
    Tape& tape = same_tape(a, b, "matmul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = ta ? av.cols : av.rows;
    const std::size_t ka = ta ? av.rows : av.cols;
    const std::size_t kb = tb ? bv.cols : bv.rows;
    const std::size_t n = tb ? bv.rows : bv.cols;
    if (ka != kb) shape_error("matmul", av, bv);

    Tensor out(m, n);
    {
        auto o = view(out);
        if (!ta && !tb) o.noalias() = view(av) * view(bv);
        else if (ta && !tb) o.noalias() = view(av).transpose() * view(bv);
        else if (!ta && tb) o.noalias() = view(av) * view(bv).transpose();
        else o.noalias() = view(av).transpose() * view(bv).transpose();
    }
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.record(std::move(out), rg, [a, b, ta, tb](Tape& t, const Tensor& g) {
        const auto gm = view(g);
        const auto A = view(t.value(a));
        const auto B = view(t.value(b));
        if (t.requires_grad(a)) {
            auto ga = view(t.grad_ref(a));
            // out = op(A) op(B)
            if (!ta && !tb) ga.noalias() += gm * B.transpose();
            else if (!ta && tb) ga.noalias() += gm * B;
            else if (ta && !tb) ga.noalias() += B * gm.transpose();
            else ga.noalias() += B.transpose() * gm.transpose();
        }
        if (t.requires_grad(b)) {
            auto gb = view(t.grad_ref(b));
            if (!ta && !tb) gb.noalias() += A.transpose() * gm;
            else if (ta && !tb) gb.noalias() += A * gm;
            else if (!ta && tb) gb.noalias() += gm.transpose() * A;
            else gb.noalias() += gm.transpose() * A.transpose();
        }
    });
}

Var add(Var a, Var b)
{
    Tape& tape = same_tape(a, b, "add");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("add", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.record(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        for (Var p : {a, b}) {
            if (!t.requires_grad(p)) continue;
            Tensor& gp = t.grad_ref(p);
            for (std::size_t i = 0; i < g.size(); ++i) gp.data[i] += g.data[i];
        }
    });
}

Var sub(Var a, Var b)
{
    Tape& tape = same_tape(a, b, "sub");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("sub", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.record(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_ref(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_ref(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
        }
    });
}

Var mul(Var a, Var b)
{
    Tape& tape = same_tape(a, b, "mul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) shape_error("mul", av, bv);
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.record(std::move(out), rg, [a, b](Tape& t, const Tensor& g) {
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_ref(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv.data[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_ref(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av.data[i];
        }
    });
}

Var scale(Var a, double factor)
{
    Tape& tape = *a.tape;
    Tensor out = a.value();
    for (double& v : out.data) v *= factor;
    return tape.record(std::move(out), tape.requires_grad(a), [a, factor](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * factor;
    });
}

Var add_row(Var a, Var row)
{
    Tape& tape = same_tape(a, row, "add_row");
    const Tensor& av = a.value();
    const Tensor& rv = row.value();
    if (rv.rows != 1 || rv.cols != av.cols) shape_error("add_row", av, rv);
    Tensor out = av;
    for (std::size_t r = 0; r < out.rows; ++r) {
        for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += rv.data[c];
    }
    const bool rg = tape.requires_grad(a) || tape.requires_grad(row);
    return tape.record(std::move(out), rg, [a, row](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_ref(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (t.requires_grad(row)) {
            Tensor& gr = t.grad_ref(row);
            for (std::size_t r = 0; r < g.rows; ++r) {
                for (std::size_t c = 0; c < g.cols; ++c) gr.data[c] += g(r, c);
            }
        }
    });
}

Var gelu(Var a)
{
    Tape& tape = *a.tape;
    Tensor out = a.value();
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    return tape.record(std::move(out), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        Tensor& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = x.data[i];
            const double d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
            ga.data[i] += g.data[i] * d;
        }
    });
}

Var relu(Var a)
{
    Tape& tape = *a.tape;
    Tensor out = a.value();
    for (double& v : out.data) v = std::max(v, 0.0);
    return tape.record(std::move(out), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(a);
        Tensor& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x.data[i] > 0.0) ga.data[i] += g.data[i];
        }
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps)
{
    Tape& tape = same_tape(x, gamma, "layer_norm");
    const Tensor& xv = x.value();
    const std::size_t n = xv.cols;
    if (gamma.value().rows != 1 || gamma.value().cols != n) shape_error("layer_norm", xv, gamma.value());
    if (!beta.value().same_shape(gamma.value())) shape_error("layer_norm", xv, beta.value());

    Tensor normed(xv.rows, n);
    std::vector<double> inv_std(xv.rows);
    Tensor out(xv.rows, n);
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (std::size_t r = 0; r < xv.rows; ++r) {
        auto row = xv.row_span(r);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < n; ++c) {
            const double h = (row[c] - mean) * is;
            normed(r, c) = h;
            out(r, c) = gv.data[c] * h + bv.data[c];
        }
    }
    const bool rg = tape.requires_grad(x) || tape.requires_grad(gamma) || tape.requires_grad(beta);
    return tape.record(std::move(out), rg,
                       [x, gamma, beta, normed = std::move(normed), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
                           const std::size_t n = g.cols;
                           const Tensor& gv = t.value(gamma);
                           if (t.requires_grad(gamma)) {
                               Tensor& gg = t.grad_ref(gamma);
                               for (std::size_t r = 0; r < g.rows; ++r)
                                   for (std::size_t c = 0; c < n; ++c) gg.data[c] += g(r, c) * normed(r, c);
                           }
                           if (t.requires_grad(beta)) {
                               Tensor& gb = t.grad_ref(beta);
                               for (std::size_t r = 0; r < g.rows; ++r)
                                   for (std::size_t c = 0; c < n; ++c) gb.data[c] += g(r, c);
                           }
                           if (t.requires_grad(x)) {
                               Tensor& gx = t.grad_ref(x);
                               std::vector<double> dh(n);
                               for (std::size_t r = 0; r < g.rows; ++r) {
                                   double mean_dh = 0.0;
                                   double mean_dh_h = 0.0;
                                   for (std::size_t c = 0; c < n; ++c) {
                                       dh[c] = g(r, c) * gv.data[c];
                                       mean_dh += dh[c];
                                       mean_dh_h += dh[c] * normed(r, c);
                                   }
                                   mean_dh /= static_cast<double>(n);
                                   mean_dh_h /= static_cast<double>(n);
                                   for (std::size_t c = 0; c < n; ++c) {
                                       gx(r, c) += inv_std[r] * (dh[c] - mean_dh - normed(r, c) * mean_dh_h);
                                   }
                               }
                           }
                       });
}

Var softmax_rows(Var x, std::span<const std::uint8_t> allow)
{
    Tape& tape = *x.tape;
    const Tensor& xv = x.value();
    if (!allow.empty() && allow.size() != xv.size()) {
        throw std::invalid_argument("softmax_rows: mask has " + std::to_string(allow.size()) + " entries for " +
                                    xv.shape_string());
    }
    Tensor out(xv.rows, xv.cols);
    for (std::size_t r = 0; r < xv.rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t c = 0; c < xv.cols; ++c) {
            if (!allow.empty() && allow[r * xv.cols + c] == 0) continue;
            mx = std::max(mx, xv(r, c));
            any = true;
        }
        if (!any) throw std::invalid_argument("softmax_rows: row " + std::to_string(r) + " is fully masked");
        double total = 0.0;
        for (std::size_t c = 0; c < xv.cols; ++c) {
            if (!allow.empty() && allow[r * xv.cols + c] == 0) continue;
            const double e = std::exp(xv(r, c) - mx);
            out(r, c) = e;
            total += e;
        }
        for (std::size_t c = 0; c < xv.cols; ++c) out(r, c) /= total;
    }
    Tensor probs = out;
    return tape.record(std::move(out), tape.requires_grad(x), [x, probs = std::move(probs)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_ref(x);
        for (std::size_t r = 0; r < g.rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < g.cols; ++c) dot += g(r, c) * probs(r, c);
            for (std::size_t c = 0; c < g.cols; ++c) gx(r, c) += probs(r, c) * (g(r, c) - dot);
        }
    });
}

Var transpose(Var a)
{
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    Tensor out(av.cols, av.rows);
    view(out) = view(av).transpose();
    return tape.record(std::move(out), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
        view(t.grad_ref(a)) += view(g).transpose();
    });
}

Var reshape(Var a, std::size_t rows, std::size_t cols)
{
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    if (rows * cols != av.size()) {
        throw std::invalid_argument("reshape: cannot view " + av.shape_string() + " as [" + std::to_string(rows) + ", " +
                                    std::to_string(cols) + "]");
    }
    Tensor out(rows, cols, av.data);
    return tape.record(std::move(out), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count)
{
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    if (start + count > av.cols) throw std::invalid_argument("slice_cols: range exceeds " + av.shape_string());
    Tensor out(av.rows, count);
    for (std::size_t r = 0; r < av.rows; ++r) {
        std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(r * av.cols + start), count,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * count));
    }
    return tape.record(std::move(out), tape.requires_grad(a), [a, start](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < g.cols; ++c) ga(r, start + c) += g(r, c);
    });
}

Var slice_rows(Var a, std::size_t start, std::size_t count)
{
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    if (start + count > av.rows) throw std::invalid_argument("slice_rows: range exceeds " + av.shape_string());
    Tensor out(count, av.cols);
    std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(start * av.cols), count * av.cols, out.data.begin());
    return tape.record(std::move(out), tape.requires_grad(a), [a, start](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        const std::size_t offset = start * g.cols;
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[offset + i] += g.data[i];
    });
}

Var concat_cols(std::span<const Var> parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    Tape& tape = *parts.front().tape;
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    bool rg = false;
    for (Var p : parts) {
        if (p.tape != &tape) throw std::invalid_argument("concat_cols: operands live on different tapes");
        if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
        cols += p.cols();
        rg = rg || tape.requires_grad(p);
    }
    Tensor out(rows, cols);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Tensor& pv = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pv.cols; ++c) out(r, offset + c) = pv(r, c);
        offset += pv.cols;
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(std::move(out), rg, [inputs = std::move(inputs)](Tape& t, const Tensor& g) {
        std::size_t offset = 0;
        for (Var p : inputs) {
            const std::size_t w = t.value(p).cols;
            if (t.requires_grad(p)) {
                Tensor& gp = t.grad_ref(p);
                for (std::size_t r = 0; r < g.rows; ++r)
                    for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, offset + c);
            }
            offset += w;
        }
    });
}

Var concat_rows(std::span<const Var> parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Tape& tape = *parts.front().tape;
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    bool rg = false;
    for (Var p : parts) {
        if (p.tape != &tape) throw std::invalid_argument("concat_rows: operands live on different tapes");
        if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
        rows += p.rows();
        rg = rg || tape.requires_grad(p);
    }
    Tensor out(rows, cols);
    auto dst = out.data.begin();
    for (Var p : parts) dst = std::copy(p.value().data.begin(), p.value().data.end(), dst);
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape.record(std::move(out), rg, [inputs = std::move(inputs)](Tape& t, const Tensor& g) {
        std::size_t offset = 0;
        for (Var p : inputs) {
            const std::size_t n = t.value(p).size();
            if (t.requires_grad(p)) {
                Tensor& gp = t.grad_ref(p);
                for (std::size_t i = 0; i < n; ++i) gp.data[i] += g.data[offset + i];
            }
            offset += n;
        }
    });
}

Var mean_rows(Var a, std::span<const std::uint8_t> row_mask)
{
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    if (!row_mask.empty() && row_mask.size() != av.rows) throw std::invalid_argument("mean_rows: mask length mismatch");
    std::vector<std::uint8_t> mask(row_mask.begin(), row_mask.end());
    if (mask.empty()) mask.assign(av.rows, 1);
    std::size_t count = 0;
    for (auto m : mask) count += m != 0;
    if (count == 0) throw std::invalid_argument("mean_rows: no rows selected");
    Tensor out(1, av.cols);
    for (std::size_t r = 0; r < av.rows; ++r) {
        if (mask[r] == 0) continue;
        for (std::size_t c = 0; c < av.cols; ++c) out.data[c] += av(r, c);
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : out.data) v *= inv;
    return tape.record(std::move(out), tape.requires_grad(a), [a, mask = std::move(mask), inv](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        for (std::size_t r = 0; r < ga.rows; ++r) {
            if (mask[r] == 0) continue;
            for (std::size_t c = 0; c < ga.cols; ++c) ga(r, c) += g.data[c] * inv;
        }
    });
}

Var mean_cols(Var a)
{
    Tape& tape = *a.tape;
    const Tensor& av = a.value();
    Tensor out(av.rows, 1);
    const double inv = 1.0 / static_cast<double>(av.cols);
    for (std::size_t r = 0; r < av.rows; ++r) {
        double s = 0.0;
        for (double v : av.row_span(r)) s += v;
        out.data[r] = s * inv;
    }
    return tape.record(std::move(out), tape.requires_grad(a), [a, inv](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        for (std::size_t r = 0; r < ga.rows; ++r)
            for (std::size_t c = 0; c < ga.cols; ++c) ga(r, c) += g.data[r] * inv;
    });
}

Var sum(Var a)
{
    Tape& tape = *a.tape;
    double s = 0.0;
    for (double v : a.value().data) s += v;
    return tape.record(Tensor(1, 1, {s}), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(a);
        for (double& v : ga.data) v += g.data[0];
    });
}

Var gather_rows(Var table, std::span<const std::size_t> indices)
{
    Tape& tape = *table.tape;
    const Tensor& tv = table.value();
    Tensor out(indices.size(), tv.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= tv.rows) {
            throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]) + " outside table of " +
                                    std::to_string(tv.rows) + " rows");
        }
        std::copy_n(tv.data.begin() + static_cast<std::ptrdiff_t>(indices[i] * tv.cols), tv.cols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * tv.cols));
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return tape.record(std::move(out), tape.requires_grad(table), [table, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor& gt = t.grad_ref(table);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t c = 0; c < g.cols; ++c) gt(idx[i], c) += g(i, c);
    });
}

Var banded_attention(Var q, Var k, Var v, std::size_t heads, std::size_t half_window)
{
    Tape& tape = same_tape(q, k, "banded_attention");
    same_tape(q, v, "banded_attention");
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    if (!qv.same_shape(kv)) shape_error("banded_attention", qv, kv);
    if (!qv.same_shape(vv)) shape_error("banded_attention", qv, vv);
    if (heads == 0 || qv.cols % heads != 0) {
        throw std::invalid_argument("banded_attention: width " + std::to_string(qv.cols) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    }
    const std::size_t n = qv.rows;
    const std::size_t d = qv.cols;
    const std::size_t dh = d / heads;
    const std::size_t band = 2 * half_window + 1;
    const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));

    // probs[(h * n + i) * band + (j - i + half_window)]
    std::vector<double> probs(heads * n * band, 0.0);
    Tensor out(n, d);
    std::vector<double> logits(band);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i >= half_window ? i - half_window : 0;
            const std::size_t hi = std::min(n - 1, i + half_window);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = lo; j <= hi; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += qv(i, off + c) * kv(j, off + c);
                s *= scale_factor;
                logits[j - lo] = s;
                mx = std::max(mx, s);
            }
            double total = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                logits[j - lo] = std::exp(logits[j - lo] - mx);
                total += logits[j - lo];
            }
            double* p = probs.data() + (h * n + i) * band;
            for (std::size_t j = lo; j <= hi; ++j) {
                const double w = logits[j - lo] / total;
                p[j + half_window - i] = w;
                for (std::size_t c = 0; c < dh; ++c) out(i, off + c) += w * vv(j, off + c);
            }
        }
    }

    const bool rg = tape.requires_grad(q) || tape.requires_grad(k) || tape.requires_grad(v);
    return tape.record(std::move(out), rg,
                       [q, k, v, heads, half_window, band, dh, scale_factor, probs = std::move(probs)](Tape& t,
                                                                                                  const Tensor& g) {
                           const Tensor& qv = t.value(q);
                           const Tensor& kv = t.value(k);
                           const Tensor& vv = t.value(v);
                           const std::size_t n = qv.rows;
                           Tensor gq(n, qv.cols);
                           Tensor gk(n, qv.cols);
                           Tensor gv(n, qv.cols);
                           std::vector<double> dp(band);
                           for (std::size_t h = 0; h < heads; ++h) {
                               const std::size_t off = h * dh;
                               for (std::size_t i = 0; i < n; ++i) {
                                   const std::size_t lo = i >= half_window ? i - half_window : 0;
                                   const std::size_t hi = std::min(n - 1, i + half_window);
                                   const double* p = probs.data() + (h * n + i) * band;
                                   double dot = 0.0;
                                   for (std::size_t j = lo; j <= hi; ++j) {
                                       const double w = p[j + half_window - i];
                                       double s = 0.0;
                                       for (std::size_t c = 0; c < dh; ++c) {
                                           s += g(i, off + c) * vv(j, off + c);
                                           gv(j, off + c) += w * g(i, off + c);
                                       }
                                       dp[j - lo] = s;
                                       dot += w * s;
                                   }
                                   for (std::size_t j = lo; j <= hi; ++j) {
                                       const double ds = p[j + half_window - i] * (dp[j - lo] - dot) * scale_factor;
                                       for (std::size_t c = 0; c < dh; ++c) {
                                           gq(i, off + c) += ds * kv(j, off + c);
                                           gk(j, off + c) += ds * qv(i, off + c);
                                       }
                                   }
                               }
                           }
                           const std::pair<Var, Tensor*> targets[] = {{q, &gq}, {k, &gk}, {v, &gv}};
                           for (const auto& [var, grad] : targets) {
                               if (!t.requires_grad(var)) continue;
                               Tensor& dst = t.grad_ref(var);
                               for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += grad->data[i];
                           }
                       });
}

}  // namespace redmotion::nn
