#include "ragtts/model.hpp"

#include <algorithm>
#include <cmath>

#include "ragtts/errors.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

namespace {

constexpr uint64_t kInitTag = 0x1217;

Tensor uniform_init(Rng& rng, std::vector<size_t> shape, size_t fan_in) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor as_row(const Tensor& v) {
  return Tensor({1, v.dim(0)}, v.values());
}

Tensor embed_tokens(const Tensor& table, const std::vector<int>& tokens, int vocab_size) {
  if (tokens.empty()) throw ShapeError("text encoder requires non-empty token sequences");
  const size_t d = table.dim(1);
  Tensor out({tokens.size(), d});
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= vocab_size) {
      throw VocabError("token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab_size));
    }
    for (size_t j = 0; j < d; ++j) out[i * d + j] = table[static_cast<size_t>(t) * d + j];
  }
  return out;
}

void scatter_token_grads(Tensor& table_grad, const std::vector<int>& tokens,
                         const Tensor& grad_rows) {
  const size_t d = table_grad.dim(1);
  for (size_t i = 0; i < tokens.size(); ++i) {
    const size_t t = static_cast<size_t>(tokens[i]);
    for (size_t j = 0; j < d; ++j) table_grad[t * d + j] += grad_rows[i * d + j];
  }
}

Tensor audio_to_tensor(const AudioFeatures& audio) {
  if (audio.frames < 1) throw ShapeError("audio encoder requires at least one frame");
  return Tensor({audio.frames, audio.channels}, audio.data);
}

}  // namespace

void CaClapConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (channels < 3) throw ConfigError("channels must be at least 3");
  if (embed_dim < 1 || audio_hidden < 1) throw ConfigError("encoder widths must be positive");
  if (proj_dim < 2) throw ConfigError("proj_dim must be at least 2");
  if (!(tau_init > 0.0)) throw ConfigError("tau_init must be positive");
  if (learning_rate < 0.0) throw ConfigError("learning rate must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 2) throw ConfigError("contrastive batches need at least 2 items");
  if (context_len < 0) throw ConfigError("context length must be non-negative");
  if (holdout_per_book < 0) throw ConfigError("holdout must be non-negative");
}

Checkpoint init_checkpoint(const CaClapConfig& config) {
  config.validate();
  const size_t v = static_cast<size_t>(config.vocab_size);
  const size_t d = static_cast<size_t>(config.embed_dim);
  const size_t h = static_cast<size_t>(config.audio_hidden);
  const size_t p = static_cast<size_t>(config.proj_dim);
  const size_t c = static_cast<size_t>(config.channels);

  Rng rng(mix_seed(config.seed, kInitTag));
  Checkpoint ckpt;
  ckpt.config = config;
  ParamSet& ps = ckpt.params;
  ps.add("tok_emb", uniform_init(rng, {v, d}, v));
  ps.add("txt_w", uniform_init(rng, {d, d}, d));
  ps.add("txt_b", Tensor({d}));
  ps.add("attn_wq", uniform_init(rng, {d, d}, d));
  ps.add("attn_wk", uniform_init(rng, {d, d}, d));
  ps.add("attn_wv", uniform_init(rng, {d, d}, d));
  ps.add("txt_proj_w", uniform_init(rng, {d, p}, d));
  ps.add("txt_proj_b", Tensor({p}));
  ps.add("aud_w", uniform_init(rng, {c, h}, c));
  ps.add("aud_b", Tensor({h}));
  ps.add("aud_proj_w", uniform_init(rng, {h, p}, h));
  ps.add("aud_proj_b", Tensor({p}));
  ps.add("log_tau", Tensor::scalar(std::log(config.tau_init)));
  return ckpt;
}

TextTrace text_forward(const CaClapConfig& config, const ParamSet& params,
                       const std::vector<int>& current_tokens,
                       const std::vector<int>& context_tokens, bool fuse_context) {
  TextTrace t;
  t.cur_tokens = current_tokens;
  t.con_tokens = context_tokens;
  t.fused_context = fuse_context;

  const Tensor& table = params.value("tok_emb");
  t.emb_cur = embed_tokens(table, current_tokens, config.vocab_size);
  t.e_cur = tanh_map(linear(t.emb_cur, params.value("txt_w"), params.value("txt_b")));

  if (fuse_context) {
    t.emb_con = embed_tokens(table, context_tokens, config.vocab_size);
    t.e_con = tanh_map(linear(t.emb_con, params.value("txt_w"), params.value("txt_b")));
    t.fused = cross_attention(t.e_cur, t.e_con, params.value("attn_wq"),
                              params.value("attn_wk"), params.value("attn_wv"), &t.attn);
  } else {
    t.fused = t.e_cur;
  }
  t.pooled = mean_pool(t.fused);
  Tensor proj = linear(as_row(t.pooled), params.value("txt_proj_w"), params.value("txt_proj_b"));
  t.projected = Tensor({proj.dim(1)}, proj.values());
  t.embedding = l2_normalize(t.projected);
  return t;
}

void text_backward(const CaClapConfig& config, ParamSet& params, const TextTrace& t,
                   const Tensor& grad_embedding) {
  (void)config;
  Tensor grad_projected(t.projected.shape());
  l2_normalize_backward(t.projected, grad_embedding, grad_projected);

  Tensor grad_pooled_row({1, t.pooled.dim(0)});
  linear_backward(as_row(t.pooled), params.value("txt_proj_w"),
                  Tensor({1, grad_projected.dim(0)}, grad_projected.values()), &grad_pooled_row,
                  params.grad("txt_proj_w"), params.grad("txt_proj_b"));
  Tensor grad_pooled({t.pooled.dim(0)}, grad_pooled_row.values());

  Tensor grad_fused(t.fused.shape());
  mean_pool_backward(t.fused.dim(0), grad_pooled, grad_fused);

  Tensor grad_e_cur(t.e_cur.shape());
  if (t.fused_context) {
    Tensor grad_e_con(t.e_con.shape());
    cross_attention_backward(t.e_cur, t.e_con, params.value("attn_wq"), params.value("attn_wk"),
                             params.value("attn_wv"), t.attn, grad_fused, &grad_e_cur,
                             &grad_e_con, params.grad("attn_wq"), params.grad("attn_wk"),
                             params.grad("attn_wv"));
    Tensor grad_h_con(t.e_con.shape());
    tanh_backward(t.e_con, grad_e_con, grad_h_con);
    Tensor grad_emb_con(t.emb_con.shape());
    linear_backward(t.emb_con, params.value("txt_w"), grad_h_con, &grad_emb_con,
                    params.grad("txt_w"), params.grad("txt_b"));
    scatter_token_grads(params.grad("tok_emb"), t.con_tokens, grad_emb_con);
  } else {
    for (size_t i = 0; i < grad_fused.size(); ++i) grad_e_cur[i] = grad_fused[i];
  }

  Tensor grad_h_cur(t.e_cur.shape());
  tanh_backward(t.e_cur, grad_e_cur, grad_h_cur);
  Tensor grad_emb_cur(t.emb_cur.shape());
  linear_backward(t.emb_cur, params.value("txt_w"), grad_h_cur, &grad_emb_cur,
                  params.grad("txt_w"), params.grad("txt_b"));
  scatter_token_grads(params.grad("tok_emb"), t.cur_tokens, grad_emb_cur);
}

AudioTrace audio_forward(const CaClapConfig& config, const ParamSet& params,
                         const AudioFeatures& audio) {
  if (audio.channels != static_cast<size_t>(config.channels)) {
    throw ShapeError("audio channel count does not match the model");
  }
  AudioTrace a;
  a.frames = audio_to_tensor(audio);
  a.hidden = tanh_map(linear(a.frames, params.value("aud_w"), params.value("aud_b")));
  a.pooled = mean_pool(a.hidden);
  Tensor proj = linear(as_row(a.pooled), params.value("aud_proj_w"), params.value("aud_proj_b"));
  a.projected = Tensor({proj.dim(1)}, proj.values());
  a.embedding = l2_normalize(a.projected);
  return a;
}

void audio_backward(const CaClapConfig& config, ParamSet& params, const AudioTrace& a,
                    const Tensor& grad_embedding) {
  (void)config;
  Tensor grad_projected(a.projected.shape());
  l2_normalize_backward(a.projected, grad_embedding, grad_projected);

  Tensor grad_pooled_row({1, a.pooled.dim(0)});
  linear_backward(as_row(a.pooled), params.value("aud_proj_w"),
                  Tensor({1, grad_projected.dim(0)}, grad_projected.values()), &grad_pooled_row,
                  params.grad("aud_proj_w"), params.grad("aud_proj_b"));
  Tensor grad_pooled({a.pooled.dim(0)}, grad_pooled_row.values());

  Tensor grad_hidden(a.hidden.shape());
  mean_pool_backward(a.hidden.dim(0), grad_pooled, grad_hidden);

  Tensor grad_pre(a.hidden.shape());
  tanh_backward(a.hidden, grad_hidden, grad_pre);
  linear_backward(a.frames, params.value("aud_w"), grad_pre, nullptr, params.grad("aud_w"),
                  params.grad("aud_b"));
}

Tensor encode_text(const Checkpoint& ckpt, const std::vector<int>& current_tokens,
                   const std::vector<int>& context_tokens, bool fuse_context) {
  return text_forward(ckpt.config, ckpt.params, current_tokens, context_tokens, fuse_context)
      .embedding;
}

Tensor encode_audio(const Checkpoint& ckpt, const AudioFeatures& audio) {
  return audio_forward(ckpt.config, ckpt.params, audio).embedding;
}

Tensor similarity_matrix(const std::vector<Tensor>& texts, const std::vector<Tensor>& audios) {
  if (texts.size() != audios.size()) {
    throw ShapeError("similarity matrix needs equal text and audio counts");
  }
  if (texts.empty()) throw ShapeError("similarity matrix needs at least one pair");
  const size_t n = texts.size();
  const size_t p = texts[0].dim(0);
  for (const Tensor& t : texts) {
    if (t.rank() != 1 || t.dim(0) != p) throw ShapeError("embedding dimensions disagree");
  }
  for (const Tensor& a : audios) {
    if (a.rank() != 1 || a.dim(0) != p) throw ShapeError("embedding dimensions disagree");
  }
  Tensor m({n, n});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) m[i * n + j] = dot(texts[i], audios[j]);
  }
  return m;
}

void similarity_backward(const std::vector<Tensor>& texts, const std::vector<Tensor>& audios,
                         const Tensor& grad_m, std::vector<Tensor>& grad_texts,
                         std::vector<Tensor>& grad_audios) {
  const size_t n = texts.size();
  const size_t p = texts[0].dim(0);
  grad_texts.assign(n, Tensor({p}));
  grad_audios.assign(n, Tensor({p}));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const double g = grad_m[i * n + j];
      for (size_t k = 0; k < p; ++k) {
        grad_texts[i][k] += g * audios[j][k];
        grad_audios[j][k] += g * texts[i][k];
      }
    }
  }
}

LossResult contrastive_loss(const Tensor& similarity, double log_tau) {
  if (similarity.rank() != 2 || similarity.dim(0) != similarity.dim(1)) {
    throw ShapeError("contrastive loss expects a square similarity matrix");
  }
  similarity.validate("similarity matrix");
  if (!std::isfinite(log_tau)) throw NumericError("log temperature is non-finite");

  const size_t n = similarity.dim(0);
  const double tau = std::exp(log_tau);
  Tensor logits(similarity.shape());
  for (size_t i = 0; i < logits.size(); ++i) logits[i] = similarity[i] / tau;
  logits.validate("contrastive logits");

  LossResult result;
  result.grad_similarity = Tensor(similarity.shape());
  Tensor grad_logits(similarity.shape());
  double total = 0.0;
  const double inv = 1.0 / (2.0 * static_cast<double>(n));

  // audio->text rows and text->audio columns, diagonal as the positive pair
  for (size_t i = 0; i < n; ++i) {
    double mx = logits[i * n];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, logits[i * n + j]);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(logits[i * n + j] - mx);
    total += (logits[i * n + i] - mx) - std::log(sum);
    for (size_t j = 0; j < n; ++j) {
      const double pj = std::exp(logits[i * n + j] - mx) / sum;
      grad_logits[i * n + j] += inv * (pj - (i == j ? 1.0 : 0.0));
    }
  }
  for (size_t j = 0; j < n; ++j) {
    double mx = logits[j];
    for (size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i * n + j]);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += std::exp(logits[i * n + j] - mx);
    total += (logits[j * n + j] - mx) - std::log(sum);
    for (size_t i = 0; i < n; ++i) {
      const double pi = std::exp(logits[i * n + j] - mx) / sum;
      grad_logits[i * n + j] += inv * (pi - (i == j ? 1.0 : 0.0));
    }
  }

  result.value = -inv * total;
  for (size_t i = 0; i < logits.size(); ++i) {
    result.grad_similarity[i] = grad_logits[i] / tau;
    result.grad_log_tau -= grad_logits[i] * logits[i];
  }
  return result;
}

}  // namespace ragtts
