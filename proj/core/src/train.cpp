#include <algorithm>
#include <cmath>
#include <map>

#include "ragtts/errors.hpp"
#include "ragtts/model.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

namespace {

constexpr uint64_t kEpochTag = 0xE90C;

void check_corpus_compat(const Corpus& corpus, const CaClapConfig& cfg) {
  const CorpusManifest& m = corpus.manifest();
  if (m.vocab_size != cfg.vocab_size) {
    throw DataError("corpus vocabulary (" + std::to_string(m.vocab_size) +
                    ") does not match model vocab_size (" + std::to_string(cfg.vocab_size) + ")");
  }
  if (m.channels != cfg.channels) {
    throw DataError("corpus channels (" + std::to_string(m.channels) +
                    ") do not match model channels (" + std::to_string(cfg.channels) + ")");
  }
}

// Mixed-book shuffle by default; with same_book_batches the pool is shuffled
// within books and books shuffled as blocks, so batches stay mostly same-book.
std::vector<size_t> epoch_order(const Corpus& corpus, const std::vector<size_t>& pool,
                                const CaClapConfig& cfg, int epoch) {
  Rng rng(mix_seed(cfg.seed, kEpochTag, static_cast<uint64_t>(epoch)));
  std::vector<size_t> order = pool;
  if (!cfg.same_book_batches) {
    rng.shuffle(order);
    return order;
  }
  std::map<std::string, std::vector<size_t>> by_book;
  for (size_t idx : order) by_book[corpus.at_index(idx).book_id].push_back(idx);
  std::vector<std::vector<size_t>> blocks;
  for (auto& [book, idxs] : by_book) {
    rng.shuffle(idxs);
    blocks.push_back(std::move(idxs));
  }
  rng.shuffle(blocks);
  order.clear();
  for (const auto& block : blocks) order.insert(order.end(), block.begin(), block.end());
  return order;
}

}  // namespace

TrainResult train(const Corpus& corpus, const CaClapConfig& cfg) {
  cfg.validate();
  check_corpus_compat(corpus, cfg);

  const CorpusSplit split = split_corpus(corpus, static_cast<size_t>(cfg.holdout_per_book));
  if (split.pool.empty()) throw ConfigError("training split is empty");
  const size_t n = static_cast<size_t>(cfg.batch_size);
  if (n > split.pool.size()) {
    throw ConfigError("batch size exceeds the training split");
  }

  TrainResult result;
  result.checkpoint = init_checkpoint(cfg);
  Checkpoint& ckpt = result.checkpoint;

  uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<size_t> order = epoch_order(corpus, split.pool, cfg, epoch);
    double loss_sum = 0.0;
    size_t batches = 0;

    for (size_t start = 0; start + n <= order.size(); start += n) {
      ++step;
      std::vector<TextTrace> texts;
      std::vector<AudioTrace> audios;
      texts.reserve(n);
      audios.reserve(n);
      std::vector<Tensor> text_embs, audio_embs;

      double loss_value;
      Tensor grad_m;
      double grad_log_tau;
      try {
        for (size_t b = 0; b < n; ++b) {
          const Utterance& u = corpus.at_index(order[start + b]);
          const ContextWindow w = context_window(corpus, u.book_id, u.position,
                                                 static_cast<size_t>(cfg.context_len));
          texts.push_back(text_forward(cfg, ckpt.params, u.tokens, w.context_tokens, true));
          audios.push_back(audio_forward(cfg, ckpt.params, u.audio));
          text_embs.push_back(texts.back().embedding);
          audio_embs.push_back(audios.back().embedding);
        }
        const Tensor m = similarity_matrix(text_embs, audio_embs);
        LossResult loss = contrastive_loss(m, ckpt.log_tau());
        loss_value = loss.value;
        grad_m = std::move(loss.grad_similarity);
        grad_log_tau = loss.grad_log_tau;
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at step " + std::to_string(step) + ": " +
                            e.what());
      }
      if (!std::isfinite(loss_value)) {
        throw TrainingError("training diverged at step " + std::to_string(step) +
                            ": non-finite loss");
      }

      ckpt.params.zero_grads();
      std::vector<Tensor> grad_texts, grad_audios;
      similarity_backward(text_embs, audio_embs, grad_m, grad_texts, grad_audios);
      for (size_t b = 0; b < n; ++b) {
        text_backward(cfg, ckpt.params, texts[b], grad_texts[b]);
        audio_backward(cfg, ckpt.params, audios[b], grad_audios[b]);
      }
      ckpt.params.grad("log_tau")[0] += grad_log_tau;

      for (size_t pi = 0; pi < ckpt.params.count(); ++pi) {
        Tensor& theta = ckpt.params.value_at(pi);
        const Tensor& g = ckpt.params.grad_at(pi);
        for (size_t e = 0; e < theta.size(); ++e) theta[e] -= cfg.learning_rate * g[e];
      }

      loss_sum += loss_value;
      ++batches;
    }

    result.epoch_mean_loss.push_back(batches > 0 ? loss_sum / static_cast<double>(batches)
                                                 : 0.0);
  }

  ckpt.train_steps = step;
  return result;
}

}  // namespace ragtts
