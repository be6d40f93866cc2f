#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ragtts/corpus.hpp"
#include "ragtts/index.hpp"
#include "ragtts/model.hpp"

namespace ragtts {

// Top-K retrieval result plus the first-P prefix used as the speech prompt.
struct PromptSelection {
  RankedResult ranked;
  std::vector<std::string> chosen;  // length-P prefix of ranked
};

PromptSelection select_prompts(const RankedResult& ranked, size_t p);

AudioFeatures concat_prompts(const PromptSelection& selection, const Corpus& corpus);

// Seam for the speech synthesizer backend: deterministic map from
// (prompt audio, target tokens) to output features with the corpus channel
// layout. A real prompt-based TTS model would plug in here.
class Synthesizer {
 public:
  virtual ~Synthesizer() = default;
  virtual std::string name() const = 0;
  virtual AudioFeatures synthesize(const AudioFeatures& prompt,
                                   const std::vector<int>& target_tokens) const = 0;
};

// Deterministic stand-in: token-seeded contours re-centered to the prompt's
// channel statistics, so outputs inherit the prompt's speaker/style profile.
class StubSynthesizer final : public Synthesizer {
 public:
  std::string name() const override { return "stub"; }
  AudioFeatures synthesize(const AudioFeatures& prompt,
                           const std::vector<int>& target_tokens) const override;
};

// Echoes the prompt unchanged; useful as the perfect-copy reference backend.
class IdentitySynthesizer final : public Synthesizer {
 public:
  std::string name() const override { return "identity"; }
  AudioFeatures synthesize(const AudioFeatures& prompt,
                           const std::vector<int>& target_tokens) const override;
};

std::unique_ptr<Synthesizer> make_synthesizer(const std::string& name);

enum class Strategy { kCaClap, kTextOnly, kRandom, kSelf };

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

struct RagTtsOptions {
  size_t context_len = 5;
  size_t k = 10;
  size_t p = 1;
  Strategy strategy = Strategy::kCaClap;
  uint64_t random_seed = 0;  // seeds the Random strategy's choice
};

struct RagTtsResult {
  PromptSelection selection;
  AudioFeatures output;
};

// Ranked candidates for one test utterance under a retrieval strategy
// (caclap, textonly, or random; self has no ranking). Shared by the
// generation pass and the prompt-count ablation.
RankedResult rank_prompts(const Corpus& corpus, const Checkpoint& ckpt,
                          const EmbeddingIndex& index, const Utterance& test_utterance,
                          Strategy strategy, size_t k, size_t context_len, uint64_t random_seed);

// Full generation pass for one test utterance: embed the text+context query,
// retrieve top-K prompts, concatenate the first P, and synthesize. The test
// utterance must not be present in the index (leakage is a hard failure).
RagTtsResult run_rag_tts(const Corpus& corpus, const Checkpoint& ckpt,
                         const EmbeddingIndex& index, const Utterance& test_utterance,
                         const Synthesizer& synth, const RagTtsOptions& options);

}  // namespace ragtts
