#pragma once

#include <functional>
#include <vector>

#include "tvts/tape.hpp"
#include "tvts/tensor.hpp"

namespace tvts::ops {

// Differentiable tensor operations. Every op records itself on `tape` when a
// tracked tensor flows in; pass nullptr for a plain forward evaluation.
//
// Reductions that run across the token axis of attention use a
// permutation-invariant fixed-point accumulator, so reordering tokens reorders
// outputs bit-exactly (see exact_sum.hpp). All other reductions use a fixed
// serial order, which makes every op deterministic for identical inputs.

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double alpha, Tape* tape = nullptr);
// a + alpha * b
Tensor add_scaled(const Tensor& a, const Tensor& b, double alpha, Tape* tape = nullptr);
Tensor gelu(const Tensor& x, Tape* tape = nullptr);  // tanh approximation

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose2d(const Tensor& x, Tape* tape = nullptr);
Tensor reshape(const Tensor& x, std::vector<int64_t> shape, Tape* tape = nullptr);
// x(..., Din) * w(Din, Dout) + bias(Dout); bias may be null
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias, Tape* tape = nullptr);
Tensor add_bias(const Tensor& x, const Tensor& b, Tape* tape = nullptr);

Tensor softmax(const Tensor& x, int axis, Tape* tape = nullptr);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps, Tape* tape = nullptr);

// q(B,Tq,D), k/v(B,Tk,D). key_mask(B,Tk) optional: entries > 0.5 are allowed
// keys; disallowed keys get -1e9 added to their logits pre-softmax, which
// underflows to an exactly zero attention weight.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                            const Tensor* key_mask, Tape* tape = nullptr);

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids, Tape* tape = nullptr);
// out[b, t, :] = x[b, idx[b][t], :]
Tensor index_select_tokens(const Tensor& x, const std::vector<std::vector<int>>& idx, Tape* tape = nullptr);
// x(B,S,D) + p(S,D), p broadcast over batch
Tensor add_bcast0(const Tensor& x, const Tensor& p, Tape* tape = nullptr);
// row(D) or row(S,D) replicated to (B,1,D) / (B,S,D)
Tensor broadcast_rows(const Tensor& row, int64_t batch, Tape* tape = nullptr);
Tensor concat_axis1(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor slice_axis1(const Tensor& x, int64_t start, int64_t len, Tape* tape = nullptr);
Tensor concat_last(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mean_axis1(const Tensor& x, Tape* tape = nullptr);  // (B,K,D) -> (B,D)
Tensor l2_normalize_rows(const Tensor& x, Tape* tape = nullptr);

// Mean over rows of -log softmax(row)[label]; the mean uses the
// permutation-invariant accumulator so row order never matters.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels, Tape* tape = nullptr);
Tensor sum_all(const Tensor& x, Tape* tape = nullptr);

// frames(B, M, H, W, 3) -> (B, S, tubelet*P*P*3) with S = M/tubelet * H/P * W/P.
// Grid traversal is (temporal slice, patch row, patch col); cube interior is
// (frame-in-tubelet, y, x, channel).
Tensor cube_extract(const Tensor& frames, int p, int tubelet, Tape* tape = nullptr);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per element.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

bool all_finite(const Tensor& x);
std::vector<int> argmax_rows(const Tensor& x);  // over last axis

}  // namespace tvts::ops
