#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dppn/autodiff.hpp"

namespace dppn {

// Plain tensor kernels, shared by the differentiable ops and test oracles.
namespace kernel {
Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ·b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a·bᵀ without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_cols(const Tensor& a);
}  // namespace kernel

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// Softmax down each column, stabilized by subtracting the column max.
Var softmax_cols(const Var& a);

/// Stacks [d x 1] parts vertically in list order.
Var concat_cols(std::span<const Var> parts);
/// Column `index` of a matrix as [rows x 1].
Var column(const Var& a, std::size_t index);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

/// a[m x n] + b[m x 1] broadcast over columns.
Var add_cols(const Var& a, const Var& b);
/// a[m x n] ⊙ g[m x 1] broadcast over columns.
Var mul_cols(const Var& a, const Var& g);
/// Row-wise reductions over columns, each [m x n] -> [m x 1].
Var mean_cols(const Var& a);
Var sum_cols(const Var& a);
Var max_cols(const Var& a);

/// Sum of scalar nodes.
Var sum(std::span<const Var> scalars);

/// Σ(a−b)².
Var sq_l2(const Var& a, const Var& b);

/// −log softmax(logits)[target] for logits [n x 1].
Var cross_entropy_logits(const Var& logits, std::size_t target);

}  // namespace dppn
