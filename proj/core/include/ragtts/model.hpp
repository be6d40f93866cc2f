#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ragtts/corpus.hpp"
#include "ragtts/nn.hpp"
#include "ragtts/tensor.hpp"

namespace ragtts {

struct CaClapConfig {
  int vocab_size = 64;       // V, must match the corpus
  int channels = 16;         // C, audio feature width, must match the corpus
  int embed_dim = 32;        // d, shared feature width of both encoders
  int audio_hidden = 32;     // audio per-frame transform width
  int proj_dim = 16;         // p, shared embedding dimension
  double tau_init = 0.07;
  double learning_rate = 0.05;
  int epochs = 30;
  int batch_size = 32;       // N, contrastive batch
  uint64_t seed = 1;
  int context_len = 5;       // l
  int holdout_per_book = 8;  // per-book tail excluded from training (the test split)
  bool same_book_batches = false;

  void validate() const;  // throws ConfigError
};

// Trained model state. Parameters include the temperature as "log_tau".
struct Checkpoint {
  CaClapConfig config;
  ParamSet params;
  uint64_t train_steps = 0;

  double log_tau() const { return params.value("log_tau")[0]; }
  double tau() const { return std::exp(log_tau()); }
};

Checkpoint init_checkpoint(const CaClapConfig& config);

// Forward activations kept for the backward pass.
struct TextTrace {
  Tensor emb_cur, emb_con;  // token embedding rows
  Tensor e_cur, e_con;      // shared per-token transform outputs (post-tanh)
  AttentionCache attn;
  Tensor fused;      // attention output, or e_cur when fusion is bypassed
  Tensor pooled;     // d
  Tensor projected;  // p, pre-normalization
  Tensor embedding;  // p, unit norm
  std::vector<int> cur_tokens, con_tokens;
  bool fused_context = true;
};

struct AudioTrace {
  Tensor frames;     // T x C input
  Tensor hidden;     // T x H (post-tanh)
  Tensor pooled;     // H
  Tensor projected;  // p
  Tensor embedding;  // p, unit norm
};

TextTrace text_forward(const CaClapConfig& config, const ParamSet& params,
                       const std::vector<int>& current_tokens,
                       const std::vector<int>& context_tokens, bool fuse_context);
void text_backward(const CaClapConfig& config, ParamSet& params, const TextTrace& trace,
                   const Tensor& grad_embedding);

AudioTrace audio_forward(const CaClapConfig& config, const ParamSet& params,
                         const AudioFeatures& audio);
void audio_backward(const CaClapConfig& config, ParamSet& params, const AudioTrace& trace,
                    const Tensor& grad_embedding);

// Inference entry points; deterministic given the checkpoint.
Tensor encode_text(const Checkpoint& ckpt, const std::vector<int>& current_tokens,
                   const std::vector<int>& context_tokens, bool fuse_context = true);
Tensor encode_audio(const Checkpoint& ckpt, const AudioFeatures& audio);

// M[i][j] = texts[i] . audios[j]; unit inputs make this the cosine matrix.
Tensor similarity_matrix(const std::vector<Tensor>& texts, const std::vector<Tensor>& audios);
void similarity_backward(const std::vector<Tensor>& texts, const std::vector<Tensor>& audios,
                         const Tensor& grad_m, std::vector<Tensor>& grad_texts,
                         std::vector<Tensor>& grad_audios);

// Symmetric InfoNCE over the similarity matrix with learnable temperature,
// returned as a quantity to minimize (>= 0, equals ln N on uniform input).
struct LossResult {
  double value = 0.0;
  Tensor grad_similarity;   // dL/dM
  double grad_log_tau = 0.0;
};

LossResult contrastive_loss(const Tensor& similarity, double log_tau);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_mean_loss;
};

// Mini-batch SGD on the contrastive objective over the retrieval pool
// (the per-book holdout tail is never seen in training).
TrainResult train(const Corpus& corpus, const CaClapConfig& config);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const Checkpoint& ckpt);

}  // namespace ragtts
