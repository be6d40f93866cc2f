#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragtts/corpus.hpp"
#include "ragtts/model.hpp"

namespace ragtts {

// Monotone alignment path from (0,0) to (Ta-1, Tb-1), steps (1,1)/(1,0)/(0,1).
struct AlignmentPath {
  std::vector<std::pair<size_t, size_t>> steps;
  double cost = 0.0;  // sum of local distances over every node on the path
};

// Local distance is the Euclidean norm over the selected channel range.
// Ties prefer the diagonal step, then (1,0), then (0,1).
AlignmentPath dtw_align(const AudioFeatures& a, const AudioFeatures& b);
AlignmentPath dtw_align_channels(const AudioFeatures& a, const AudioFeatures& b,
                                 size_t channel_begin, size_t channel_end);

// Mel-cepstral distortion: (10/ln10)*sqrt(2) * mean cepstral frame distance
// over a DTW path computed on the cepstral channels (2..C-1) only.
double mcd(const AudioFeatures& a, const AudioFeatures& b);

// RMSE of one channel over a DTW path computed on that channel alone.
// Channel 0 serves the F0 metric, channel 1 the energy metric.
double channel_rmse(const AudioFeatures& a, const AudioFeatures& b, size_t channel);

// Speaker-encoder cosine similarity with a fixed toy speaker encoder:
// per-channel means and stds projected by a seeded random matrix to 16 dims.
inline constexpr uint64_t kSecsProjectionSeed = 0x5EC5;
inline constexpr size_t kSecsEmbedDim = 16;

std::vector<double> speaker_embedding(const AudioFeatures& x);
double secs(const AudioFeatures& x, const AudioFeatures& y);

struct TtsItemMetrics {
  std::string key;
  double energy_rmse = 0.0;
  double f0_rmse = 0.0;
  double mcd = 0.0;
  double secs = 0.0;
};

struct TtsReport {
  std::vector<TtsItemMetrics> items;
  double mean_energy_rmse = 0.0;
  double mean_f0_rmse = 0.0;
  double mean_mcd = 0.0;
  double mean_secs = 0.0;
};

TtsReport tts_eval(const std::vector<std::string>& keys,
                   const std::vector<AudioFeatures>& outputs,
                   const std::vector<AudioFeatures>& ground_truths);

struct RetrievalItemResult {
  std::string key;
  size_t rank = 0;   // 1-based rank of the item's own paired audio
  double sim = 0.0;  // cosine(text embedding, own audio embedding)
};

struct RetrievalReport {
  double sim = 0.0;
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double r_at_10 = 0.0;
  double map_at_10 = 0.0;
  std::vector<RetrievalItemResult> items;
};

// One relevant item per query: the query's own paired audio.
struct RetrievalQueryItem {
  std::string own_key;
  std::vector<double> query;                 // text embedding
  std::vector<double> own_audio;             // paired audio embedding
  std::vector<std::pair<std::string, std::vector<double>>> pool;  // audio candidates
};

RetrievalReport eval_retrieval_items(const std::vector<RetrievalQueryItem>& items);

enum class ContextMode { kTrue, kShuffled };

struct RetrievalEvalOptions {
  size_t context_len = 5;
  bool same_book_pool = true;           // restrict candidates to the query's book
  ContextMode context_mode = ContextMode::kTrue;
  uint64_t shuffle_seed = 0;            // used by ContextMode::kShuffled
};

// Queries each test item's text+context embedding against the audio
// embeddings of pool-union-own; the single relevant item is the own audio.
RetrievalReport retrieval_eval(const Checkpoint& ckpt, const Corpus& corpus,
                               const CorpusSplit& split, const RetrievalEvalOptions& options);

}  // namespace ragtts
