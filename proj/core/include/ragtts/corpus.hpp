#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ragtts {

// Feature-matrix stand-in for audio. Channel semantics are fixed:
//   channel 0 = F0 contour, channel 1 = frame energy (>= 0),
//   channels 2..C-1 = cepstral-like style coefficients.
struct AudioFeatures {
  size_t frames = 0;
  size_t channels = 0;
  std::vector<double> data;  // row-major frames x channels

  double& at(size_t t, size_t c) { return data[t * channels + c]; }
  double at(size_t t, size_t c) const { return data[t * channels + c]; }

  double channel_mean(size_t c) const;
  // population standard deviation (1/T normalization)
  double channel_std(size_t c) const;

  void validate() const;  // frames >= 4, energy >= 0, finite values

  bool operator==(const AudioFeatures& o) const {
    return frames == o.frames && channels == o.channels && data == o.data;
  }
};

struct Utterance {
  std::string book_id;
  size_t position = 0;
  std::vector<int> tokens;  // ids in [0, vocab_size)
  AudioFeatures audio;
  int style_id = 0;  // synthetic ground truth; hidden from the model
};

struct CorpusManifest {
  uint32_t version = 1;
  int vocab_size = 0;   // V; separator token reserved at V-1
  int style_count = 0;  // S
  int channels = 0;     // C
  uint64_t seed = 0;
  std::vector<std::pair<std::string, size_t>> books;  // (book_id, utterance count)
};

struct CorpusConfig {
  size_t books = 32;
  size_t utterances_per_book = 64;
  int vocab_size = 64;
  int style_count = 8;
  int channels = 16;
  uint64_t seed = 1;
};

// Concatenated neighbor texts for a center utterance, clamped at book bounds.
struct ContextWindow {
  std::string center_key;
  size_t l = 0;
  std::vector<int> context_tokens;  // neighbor tokens joined by the separator token
};

std::string make_key(const std::string& book_id, size_t position);
std::pair<std::string, size_t> parse_key(const std::string& key);

class Corpus {
 public:
  Corpus(CorpusManifest manifest, std::vector<Utterance> utterances);

  const CorpusManifest& manifest() const { return manifest_; }
  const std::vector<Utterance>& utterances() const { return utterances_; }
  size_t size() const { return utterances_.size(); }

  bool contains(const std::string& book_id, size_t position) const;
  const Utterance& at(const std::string& book_id, size_t position) const;
  const Utterance& at_index(size_t i) const { return utterances_[i]; }
  size_t index_of(const std::string& book_id, size_t position) const;
  size_t book_size(const std::string& book_id) const;

  int separator_token() const { return manifest_.vocab_size - 1; }

 private:
  CorpusManifest manifest_;
  std::vector<Utterance> utterances_;  // book-major, position order
  std::map<std::string, std::pair<size_t, size_t>> book_spans_;  // book -> (first, count)
};

// Deterministic style rule shared by the generator and its oracles: tokens
// below 2*style_count are style-bearing, family s owns ids {2s, 2s+1}, and
// the style of a window is the family with the most occurrences (ties go to
// the smaller family id).
int style_token_limit(int style_count);
int style_from_tokens(const std::vector<int>& window_tokens, int style_count);

Corpus generate_corpus(const CorpusConfig& config);

ContextWindow context_window(const Corpus& corpus, const std::string& book_id, size_t position,
                             size_t l);

// Ablation control: keeps the center text but replaces the 2l neighbors with
// utterances sampled uniformly from the same book.
ContextWindow shuffled_context_window(const Corpus& corpus, const std::string& book_id,
                                      size_t position, size_t l, uint64_t seed);

struct CorpusSplit {
  std::vector<size_t> pool;  // indexes into corpus.utterances()
  std::vector<size_t> test;
};

CorpusSplit split_corpus(const Corpus& corpus, size_t n_test_per_book);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Serialized form (same bytes as save_corpus writes), for determinism checks.
std::string corpus_to_string(const Corpus& corpus);
std::string manifest_to_string(const CorpusManifest& manifest);

}  // namespace ragtts
