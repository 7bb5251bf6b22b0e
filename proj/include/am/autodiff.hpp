#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "am/tensor.hpp"

namespace am::ad {

struct Node;
using Var = std::shared_ptr<Node>;

// One record of the reverse-mode graph. `backprop` reads this node's
// gradient accumulator and adds into the parents'; it is empty for leaves.
struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;
};

Var leaf(Tensor v);
inline Var constant(Tensor v) { return leaf(std::move(v)); }
Var scalar(double v);

// Runs the reverse pass from a single-element root: zeroes the gradient
// accumulators of every reachable node, seeds the root with 1 and applies
// the chain rule in reverse topological order. Throws if root is not a
// single element.
void backward(const Var& root);

// --- elementwise / linear algebra ---
Var add(const Var& a, const Var& b);              // same shape
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);              // Hadamard
Var scale(const Var& a, double c);
Var add_rowvec(const Var& x, const Var& v);       // [m,n] + [n] broadcast over rows
Var sub_colvec(const Var& x, const Var& c);       // [m,n] - [m,1] broadcast over cols
Var matmul(const Var& a, const Var& b);           // [m,k] x [k,n]
Var exp_(const Var& a);
Var log_(const Var& a);
Var gelu(const Var& a);                            // tanh approximation

// --- row-wise reductions / normalizations (last dim) ---
Var softmax_rows(const Var& x);
Var logsumexp_rows(const Var& x);                  // [m,n] -> [m,1]
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);

// --- shape ops ---
Var reshape(const Var& x, std::vector<std::int64_t> shape);
Var slice_rows(const Var& x, std::int64_t r0, std::int64_t len);
Var slice_cols(const Var& x, std::int64_t c0, std::int64_t len);
Var concat_rows(const Var& a, const Var& b);
Var concat_cols(const Var& a, const Var& b);
Var gather_rows(const Var& table, std::vector<std::int64_t> idx);

// --- reductions ---
Var sum_all(const Var& x);                         // -> scalar []
Var mean_all(const Var& x);
Var sumsq_diff(const Var& a, const Var& b);        // sum (a-b)^2 -> scalar

// Squared Euclidean distances between rows: [n,d],[k,d] -> [n,k].
Var pairwise_sqdist(const Var& x, const Var& m);

// Multi-head scaled-dot attention of each query row over a span of cached
// prefix rows plus the row's own key/value. With kpre == k and vpre == v and
// span r = {seq_base, r - seq_base} this is exactly causal self-attention.
struct AttnSpan {
    std::int64_t pre_base = 0;
    std::int64_t pre_len = 0;
};
Var prefix_attention(const Var& q, const Var& k, const Var& v,
                     const Var& kpre, const Var& vpre,
                     std::vector<AttnSpan> spans, int n_heads);

}  // namespace am::ad
