#include "ragtts/nn.hpp"

#include <algorithm>
#include <cmath>

#include "ragtts/errors.hpp"

namespace ragtts {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

void require_matrix(const Tensor& t, const std::string& name) {
  require(t.rank() == 2, name + " must be rank 2");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  require(a.dim(1) == b.dim(0), "matmul inner dimensions disagree");
  const size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor y({n, m});
  for (size_t i = 0; i < n; ++i) {
    for (size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      for (size_t j = 0; j < m; ++j) {
        y[i * m + j] += aip * b[p * m + j];
      }
    }
  }
  return y;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt lhs");
  require_matrix(b, "matmul_nt rhs");
  require(a.dim(1) == b.dim(1), "matmul_nt inner dimensions disagree");
  const size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  Tensor y({n, m});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      y[i * m + j] = s;
    }
  }
  return y;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn lhs");
  require_matrix(b, "matmul_tn rhs");
  require(a.dim(0) == b.dim(0), "matmul_tn inner dimensions disagree");
  const size_t n = a.dim(1), k = a.dim(0), m = b.dim(1);
  Tensor y({n, m});
  for (size_t p = 0; p < k; ++p) {
    for (size_t i = 0; i < n; ++i) {
      const double api = a[p * n + i];
      for (size_t j = 0; j < m; ++j) {
        y[i * m + j] += api * b[p * m + j];
      }
    }
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_matrix(x, "linear input");
  require_matrix(w, "linear weight");
  require(b.rank() == 1, "linear bias must be rank 1");
  require(x.dim(1) == w.dim(0), "linear input width does not match weight");
  require(b.dim(0) == w.dim(1), "linear bias width does not match weight");
  Tensor y = matmul(x, w);
  const size_t n = y.dim(0), m = y.dim(1);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) y[i * m + j] += b[j];
  }
  return y;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y,
                     Tensor* grad_x, Tensor& grad_w, Tensor& grad_b) {
  require(grad_y.rank() == 2 && grad_y.dim(0) == x.dim(0) && grad_y.dim(1) == w.dim(1),
          "linear_backward gradient shape mismatch");
  require(grad_w.same_shape(w), "linear_backward grad_w shape mismatch");
  require(grad_b.rank() == 1 && grad_b.dim(0) == w.dim(1),
          "linear_backward grad_b shape mismatch");
  const size_t n = x.dim(0), k = x.dim(1), m = w.dim(1);
  // dW += x^T g, db += column sums of g, dx += g W^T
  for (size_t p = 0; p < n; ++p) {
    for (size_t i = 0; i < k; ++i) {
      const double xpi = x[p * k + i];
      for (size_t j = 0; j < m; ++j) grad_w[i * m + j] += xpi * grad_y[p * m + j];
    }
  }
  for (size_t p = 0; p < n; ++p) {
    for (size_t j = 0; j < m; ++j) grad_b[j] += grad_y[p * m + j];
  }
  if (grad_x) {
    require(grad_x->same_shape(x), "linear_backward grad_x shape mismatch");
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < m; ++j) {
        const double g = grad_y[i * m + j];
        for (size_t p = 0; p < k; ++p) (*grad_x)[i * k + p] += g * w[p * m + j];
      }
    }
  }
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax input");
  x.validate("softmax input");
  const size_t n = x.dim(0), m = x.dim(1);
  Tensor y({n, m});
  for (size_t i = 0; i < n; ++i) {
    double mx = x[i * m];
    for (size_t j = 1; j < m; ++j) mx = std::max(mx, x[i * m + j]);
    double sum = 0.0;
    for (size_t j = 0; j < m; ++j) {
      y[i * m + j] = std::exp(x[i * m + j] - mx);
      sum += y[i * m + j];
    }
    for (size_t j = 0; j < m; ++j) y[i * m + j] /= sum;
  }
  return y;
}

void softmax_rows_backward(const Tensor& y, const Tensor& grad_y, Tensor& grad_x) {
  require(y.same_shape(grad_y) && y.same_shape(grad_x),
          "softmax_backward shape mismatch");
  const size_t n = y.dim(0), m = y.dim(1);
  for (size_t i = 0; i < n; ++i) {
    double dotv = 0.0;
    for (size_t j = 0; j < m; ++j) dotv += grad_y[i * m + j] * y[i * m + j];
    for (size_t j = 0; j < m; ++j) {
      grad_x[i * m + j] += y[i * m + j] * (grad_y[i * m + j] - dotv);
    }
  }
}

Tensor tanh_map(const Tensor& x) {
  Tensor y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

void tanh_backward(const Tensor& y, const Tensor& grad_y, Tensor& grad_x) {
  require(y.same_shape(grad_y) && y.same_shape(grad_x), "tanh_backward shape mismatch");
  for (size_t i = 0; i < y.size(); ++i) {
    grad_x[i] += grad_y[i] * (1.0 - y[i] * y[i]);
  }
}

Tensor cross_attention(const Tensor& e_cur, const Tensor& e_con, const Tensor& wq,
                       const Tensor& wk, const Tensor& wv, AttentionCache* cache) {
  require_matrix(e_cur, "attention query input");
  require_matrix(e_con, "attention context input");
  require(e_cur.dim(1) == e_con.dim(1), "attention feature widths disagree");
  if (e_con.dim(0) < 1) throw ShapeError("attention requires a non-empty context");
  const size_t d = wq.dim(1);
  Tensor q = matmul(e_cur, wq);
  Tensor k = matmul(e_con, wk);
  Tensor v = matmul(e_con, wv);
  Tensor scores = matmul_nt(q, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (size_t i = 0; i < scores.size(); ++i) scores[i] *= scale;
  Tensor weights = softmax_rows(scores);
  Tensor out = matmul(weights, v);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->weights = std::move(weights);
  }
  return out;
}

void cross_attention_backward(const Tensor& e_cur, const Tensor& e_con, const Tensor& wq,
                              const Tensor& wk, const Tensor& wv, const AttentionCache& cache,
                              const Tensor& grad_out, Tensor* grad_e_cur, Tensor* grad_e_con,
                              Tensor& grad_wq, Tensor& grad_wk, Tensor& grad_wv) {
  const size_t d = wq.dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  // out = A V  =>  dA = g V^T, dV = A^T g
  Tensor grad_weights = matmul_nt(grad_out, cache.v);
  Tensor grad_v = matmul_tn(cache.weights, grad_out);

  // A = softmax(S), S = scale * Q K^T
  Tensor grad_scores(cache.weights.shape());
  softmax_rows_backward(cache.weights, grad_weights, grad_scores);
  for (size_t i = 0; i < grad_scores.size(); ++i) grad_scores[i] *= scale;

  Tensor grad_q = matmul(grad_scores, cache.k);     // dQ = dS K
  Tensor grad_k = matmul_tn(grad_scores, cache.q);  // dK = dS^T Q

  // Q = e_cur Wq, K = e_con Wk, V = e_con Wv; the projections have no bias,
  // so column sums fall into a sink.
  Tensor grad_bias_sink({wq.dim(1)});
  linear_backward(e_cur, wq, grad_q, grad_e_cur, grad_wq, grad_bias_sink);
  grad_bias_sink.fill(0.0);
  linear_backward(e_con, wk, grad_k, grad_e_con, grad_wk, grad_bias_sink);
  grad_bias_sink.fill(0.0);
  linear_backward(e_con, wv, grad_v, grad_e_con, grad_wv, grad_bias_sink);
}

Tensor mean_pool(const Tensor& x) {
  require_matrix(x, "mean_pool input");
  const size_t n = x.dim(0), d = x.dim(1);
  if (n < 1) throw ShapeError("mean_pool requires at least one row");
  Tensor y({d});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) y[j] += x[i * d + j];
  }
  for (size_t j = 0; j < d; ++j) y[j] /= static_cast<double>(n);
  return y;
}

void mean_pool_backward(size_t n_rows, const Tensor& grad_y, Tensor& grad_x) {
  require(grad_y.rank() == 1 && grad_x.rank() == 2 && grad_x.dim(0) == n_rows &&
              grad_x.dim(1) == grad_y.dim(0),
          "mean_pool_backward shape mismatch");
  const size_t d = grad_y.dim(0);
  const double inv = 1.0 / static_cast<double>(n_rows);
  for (size_t i = 0; i < n_rows; ++i) {
    for (size_t j = 0; j < d; ++j) grad_x[i * d + j] += grad_y[j] * inv;
  }
}

Tensor l2_normalize(const Tensor& v) {
  require(v.rank() == 1, "l2_normalize expects a vector");
  double norm2 = 0.0;
  for (size_t i = 0; i < v.size(); ++i) norm2 += v[i] * v[i];
  const double norm = std::sqrt(norm2);
  if (!(norm > 1e-12)) throw NumericError("degenerate embedding: norm below 1e-12");
  Tensor y(v.shape());
  for (size_t i = 0; i < v.size(); ++i) y[i] = v[i] / norm;
  return y;
}

void l2_normalize_backward(const Tensor& v, const Tensor& grad_y, Tensor& grad_x) {
  require(v.same_shape(grad_y) && v.same_shape(grad_x), "l2_normalize_backward shape mismatch");
  double norm2 = 0.0;
  for (size_t i = 0; i < v.size(); ++i) norm2 += v[i] * v[i];
  const double norm = std::sqrt(norm2);
  if (!(norm > 1e-12)) throw NumericError("degenerate embedding: norm below 1e-12");
  double proj = 0.0;  // (v . g) / norm^2
  for (size_t i = 0; i < v.size(); ++i) proj += v[i] * grad_y[i];
  proj /= norm2;
  for (size_t i = 0; i < v.size(); ++i) {
    grad_x[i] += (grad_y[i] - v[i] * proj) / norm;
  }
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0)) {
    throw ShapeError("dot expects vectors of equal length");
  }
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

GradCheckReport grad_check(ParamSet& params, const std::function<double(bool)>& eval,
                           double eps) {
  params.zero_grads();
  const double base = eval(true);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

  // Snapshot analytic gradients before the finite-difference sweep clobbers them.
  std::vector<Tensor> analytic;
  analytic.reserve(params.count());
  for (size_t i = 0; i < params.count(); ++i) analytic.push_back(params.grad_at(i));

  GradCheckReport report;
  for (size_t i = 0; i < params.count(); ++i) {
    Tensor& theta = params.value_at(i);
    for (size_t e = 0; e < theta.size(); ++e) {
      const double saved = theta[e];
      theta[e] = saved + eps;
      const double lp = eval(false);
      theta[e] = saved - eps;
      const double lm = eval(false);
      theta[e] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw NumericError("grad_check: non-finite loss during perturbation");
      }
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = analytic[i][e];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
      const double rel = std::fabs(fd - an) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params.names()[i];
        report.worst_entry = e;
      }
    }
  }
  return report;
}

}  // namespace ragtts
