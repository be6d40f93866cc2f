#include "ragtts/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ragtts/errors.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr size_t kFramesPerToken = 4;
constexpr uint64_t kStubTag = 0x57AB;
constexpr uint64_t kRandomPickTag = 0x9A2D;

uint64_t token_hash(const std::vector<int>& tokens) {
  uint64_t h = kFnvOffset;
  for (int t : tokens) h = fnv1a64(static_cast<uint64_t>(t), h);
  return h;
}

}  // namespace

PromptSelection select_prompts(const RankedResult& ranked, size_t p) {
  if (p < 1 || p > ranked.items.size()) {
    throw ConfigError("prompt count " + std::to_string(p) + " outside ranked list of " +
                      std::to_string(ranked.items.size()));
  }
  PromptSelection sel;
  sel.ranked = ranked;
  sel.chosen.reserve(p);
  for (size_t i = 0; i < p; ++i) sel.chosen.push_back(ranked.items[i].key);
  return sel;
}

AudioFeatures concat_prompts(const PromptSelection& selection, const Corpus& corpus) {
  if (selection.chosen.empty()) throw ConfigError("empty prompt selection");
  AudioFeatures out;
  for (const std::string& key : selection.chosen) {
    const auto [book, pos] = parse_key(key);
    const Utterance& u = corpus.at(book, pos);  // NotFoundError on missing keys
    if (out.channels == 0) {
      out.channels = u.audio.channels;
    } else if (out.channels != u.audio.channels) {
      throw DataError("prompt channel counts disagree");
    }
    out.data.insert(out.data.end(), u.audio.data.begin(), u.audio.data.end());
    out.frames += u.audio.frames;
  }
  return out;
}

AudioFeatures StubSynthesizer::synthesize(const AudioFeatures& prompt,
                                          const std::vector<int>& target_tokens) const {
  prompt.validate();
  if (target_tokens.empty()) throw ConfigError("synthesizer needs non-empty target tokens");

  const size_t t_out = kFramesPerToken * target_tokens.size();
  const size_t c = prompt.channels;
  Rng rng(mix_seed(kStubTag, token_hash(target_tokens)));

  AudioFeatures out;
  out.frames = t_out;
  out.channels = c;
  out.data.resize(out.frames * c);

  // Token-seeded F0 contour, additively re-centered to the prompt's mean.
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  std::vector<double> f0(out.frames);
  double f0_sum = 0.0;
  for (size_t t = 0; t < out.frames; ++t) {
    f0[t] = 0.3 * std::sin(2.0 * kPi * static_cast<double>(t) / out.frames + phase) +
            0.05 * rng.normal();
    f0_sum += f0[t];
  }
  const double f0_shift = prompt.channel_mean(0) - f0_sum / static_cast<double>(out.frames);
  for (size_t t = 0; t < out.frames; ++t) out.at(t, 0) = f0[t] + f0_shift;

  // Non-negative energy envelope, multiplicatively scaled to the prompt's
  // mean so the energy channel stays >= 0.
  std::vector<double> energy(out.frames);
  double energy_sum = 0.0;
  for (size_t t = 0; t < out.frames; ++t) {
    energy[t] = 0.6 + 0.4 * std::sin(kPi * (static_cast<double>(t) + 0.5) / out.frames) +
                std::fabs(0.02 * rng.normal());
    energy_sum += energy[t];
  }
  const double energy_mean = energy_sum / static_cast<double>(out.frames);
  const double energy_scale =
      energy_mean > 0.0 ? prompt.channel_mean(1) / energy_mean : 0.0;
  for (size_t t = 0; t < out.frames; ++t) out.at(t, 1) = energy[t] * energy_scale;

  // Cepstral channels: prompt means plus a small token-dependent wobble.
  for (size_t ch = 2; ch < c; ++ch) {
    const double mean = prompt.channel_mean(ch);
    for (size_t t = 0; t < out.frames; ++t) {
      out.at(t, ch) = mean + 0.01 * rng.normal();
    }
  }
  out.validate();
  return out;
}

AudioFeatures IdentitySynthesizer::synthesize(const AudioFeatures& prompt,
                                              const std::vector<int>& target_tokens) const {
  prompt.validate();
  if (target_tokens.empty()) throw ConfigError("synthesizer needs non-empty target tokens");
  return prompt;
}

std::unique_ptr<Synthesizer> make_synthesizer(const std::string& name) {
  if (name == "stub") return std::make_unique<StubSynthesizer>();
  if (name == "identity") return std::make_unique<IdentitySynthesizer>();
  throw ConfigError("unknown synthesizer: " + name);
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "caclap") return Strategy::kCaClap;
  if (name == "textonly") return Strategy::kTextOnly;
  if (name == "random") return Strategy::kRandom;
  if (name == "self") return Strategy::kSelf;
  throw ConfigError("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kCaClap: return "caclap";
    case Strategy::kTextOnly: return "textonly";
    case Strategy::kRandom: return "random";
    case Strategy::kSelf: return "self";
  }
  throw ConfigError("unknown strategy value");
}

RankedResult rank_prompts(const Corpus& corpus, const Checkpoint& ckpt,
                          const EmbeddingIndex& index, const Utterance& test_utterance,
                          Strategy strategy, size_t k, size_t context_len,
                          uint64_t random_seed) {
  switch (strategy) {
    case Strategy::kSelf:
      throw ConfigError("the self strategy does not rank prompts");
    case Strategy::kRandom: {
      // Baseline: seeded uniform choice from the index, encoder bypassed.
      const std::string own_key = make_key(test_utterance.book_id, test_utterance.position);
      Rng rng(mix_seed(random_seed, kRandomPickTag,
                       fnv1a64(own_key.data(), own_key.size())));
      std::vector<size_t> order(index.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      RankedResult ranked;
      const size_t take = std::min(k, index.size());
      for (size_t i = 0; i < take; ++i) {
        ranked.items.push_back({index.entries()[order[i]].key, 0.0});
      }
      return ranked;
    }
    case Strategy::kCaClap: {
      const ContextWindow w = context_window(corpus, test_utterance.book_id,
                                             test_utterance.position, context_len);
      const Tensor query = encode_text(ckpt, test_utterance.tokens, w.context_tokens, true);
      return query_index(index, query, k);
    }
    case Strategy::kTextOnly: {
      // Text-only mode: context length 0 and the fusion stage bypassed.
      const Tensor query =
          encode_text(ckpt, test_utterance.tokens, test_utterance.tokens, false);
      return query_index(index, query, k);
    }
  }
  throw ConfigError("unknown strategy value");
}

RagTtsResult run_rag_tts(const Corpus& corpus, const Checkpoint& ckpt,
                         const EmbeddingIndex& index, const Utterance& test_utterance,
                         const Synthesizer& synth, const RagTtsOptions& options) {
  const std::string own_key = make_key(test_utterance.book_id, test_utterance.position);
  if (index.contains(own_key)) {
    throw LeakageError("test utterance " + own_key + " present in the retrieval index");
  }

  RagTtsResult result;
  if (options.strategy == Strategy::kSelf) {
    // Upper-bound reference: the prompt is the item's own ground-truth audio.
    result.selection.ranked.items = {{own_key, 1.0}};
    result.selection.chosen = {own_key};
    result.output = synth.synthesize(test_utterance.audio, test_utterance.tokens);
    return result;
  }

  const RankedResult ranked = rank_prompts(corpus, ckpt, index, test_utterance,
                                           options.strategy, options.k, options.context_len,
                                           options.random_seed);
  result.selection = select_prompts(ranked, options.p);
  const AudioFeatures prompt = concat_prompts(result.selection, corpus);
  result.output = synth.synthesize(prompt, test_utterance.tokens);
  return result;
}

}  // namespace ragtts
