#pragma once

#include <functional>
#include <string>

#include "ragtts/tensor.hpp"

namespace ragtts {

// Dense forward/backward kernels for the dual-encoder model. Convention is
// row vectors throughout: y = x * W + b with x of shape n x d_in and W of
// shape d_in x d_out. Backward functions accumulate (+=) into gradient
// buffers; pass nullptr for grad_x when the input needs no gradient.

Tensor matmul(const Tensor& a, const Tensor& b);        // (n x k) * (k x m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);     // a * b^T, (n x k) * (m x k)
Tensor matmul_tn(const Tensor& a, const Tensor& b);     // a^T * b, (k x n) * (k x m)

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y,
                     Tensor* grad_x, Tensor& grad_w, Tensor& grad_b);

// Row-wise softmax, stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& x);
void softmax_rows_backward(const Tensor& y, const Tensor& grad_y, Tensor& grad_x);

Tensor tanh_map(const Tensor& x);
void tanh_backward(const Tensor& y, const Tensor& grad_y, Tensor& grad_x);

// Single-head cross-attention: Softmax(Q K^T / sqrt(d)) V with
// Q = e_cur Wq, K = e_con Wk, V = e_con Wv.
struct AttentionCache {
  Tensor q, k, v;
  Tensor weights;  // row-stochastic n_cur x n_con
};

Tensor cross_attention(const Tensor& e_cur, const Tensor& e_con, const Tensor& wq,
                       const Tensor& wk, const Tensor& wv, AttentionCache* cache = nullptr);
void cross_attention_backward(const Tensor& e_cur, const Tensor& e_con, const Tensor& wq,
                              const Tensor& wk, const Tensor& wv, const AttentionCache& cache,
                              const Tensor& grad_out, Tensor* grad_e_cur, Tensor* grad_e_con,
                              Tensor& grad_wq, Tensor& grad_wk, Tensor& grad_wv);

Tensor mean_pool(const Tensor& x);  // n x d -> d
void mean_pool_backward(size_t n_rows, const Tensor& grad_y, Tensor& grad_x);

Tensor l2_normalize(const Tensor& v);  // throws NumericError when ||v|| <= 1e-12
void l2_normalize_backward(const Tensor& v, const Tensor& grad_y, Tensor& grad_x);

double dot(const Tensor& a, const Tensor& b);

// Compares the analytic gradients stored in `params` against central finite
// differences of the loss. eval(true) must recompute the loss and accumulate
// analytic gradients into params (grads are zeroed first); eval(false) must
// return the loss only. Relative error uses denominator max(|a|,|b|,1e-8).
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_entry = 0;
};

GradCheckReport grad_check(ParamSet& params, const std::function<double(bool)>& eval,
                           double eps = 1e-4);

}  // namespace ragtts
