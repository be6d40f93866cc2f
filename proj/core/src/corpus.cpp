#include "ragtts/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragtts/errors.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

namespace {

using ordered_json = nlohmann::ordered_json;

// Generation constants. Together with the manifest fields these pin the
// corpus bit-exactly, so they are part of format version 1 and must not
// change without a version bump.
constexpr size_t kMaxTokenCap = 32;   // hard invariant on utterance length
constexpr size_t kMinTokens = 6;
constexpr size_t kMaxTokens = 12;
constexpr size_t kMinStyleTokens = 1;
constexpr size_t kMaxStyleTokens = 3;
constexpr size_t kMinRunLength = 4;   // consecutive utterances sharing a style family
constexpr size_t kMaxRunLength = 8;
constexpr size_t kMinFrames = 8;
constexpr size_t kMaxFrames = 24;
constexpr size_t kStyleWindow = 2;    // style depends on utterances i-2..i+2

constexpr double kF0Base = 4.0;
constexpr double kF0StyleGain = 2.0;
constexpr double kF0BookSpread = 0.3;
constexpr double kF0ContourAmp = 0.3;
constexpr double kF0FrameNoise = 0.05;
constexpr double kEnergyBase = 1.2;
constexpr double kEnergyStyleGain = 0.8;
constexpr double kEnergyBookSpread = 0.1;
constexpr double kEnergyFrameNoise = 0.02;
constexpr double kCepBookSpread = 0.15;
constexpr double kCepFrameNoise = 0.05;
// Odd cepstral channels carry a per-utterance offset the text cannot predict;
// it is what separates "the right prompt" from "a prompt with the right style".
constexpr double kCepPersonalSpread = 0.6;

constexpr uint64_t kPaletteTag = 0x70A1;
constexpr uint64_t kBookTag = 0xB00C;
constexpr uint64_t kAudioTag = 0xA0D1;
constexpr uint64_t kShuffleTag = 0x5F1E;

constexpr double kPi = 3.14159265358979323846;

struct StylePalette {
  std::vector<double> f0_weights;             // 2S
  std::vector<double> energy_weights;         // 2S
  std::vector<std::vector<double>> cepstral;  // one 2S row per cepstral channel
};

StylePalette make_palette(uint64_t seed, int style_count, int channels) {
  const int m = style_token_limit(style_count);
  Rng rng(mix_seed(seed, kPaletteTag));
  StylePalette p;
  p.f0_weights.resize(m);
  p.energy_weights.resize(m);
  for (int j = 0; j < m; ++j) p.f0_weights[j] = rng.uniform();
  for (int j = 0; j < m; ++j) p.energy_weights[j] = rng.uniform();
  p.cepstral.resize(channels >= 2 ? channels - 2 : 0);
  for (auto& row : p.cepstral) {
    row.resize(m);
    for (int j = 0; j < m; ++j) row[j] = rng.uniform(-1.0, 1.0);
  }
  return p;
}

std::vector<double> style_histogram(const std::vector<int>& window_tokens, int style_count) {
  const int m = style_token_limit(style_count);
  std::vector<double> h(m, 0.0);
  double total = 0.0;
  for (int t : window_tokens) {
    if (t >= 0 && t < m) {
      h[t] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& x : h) x /= total;
  }
  return h;
}

double weighted(const std::vector<double>& w, const std::vector<double>& h) {
  return std::inner_product(w.begin(), w.end(), h.begin(), 0.0);
}

std::string format_book_id(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "b%04zu", i);
  return buf;
}

void append_with_separator(std::vector<int>& out, const std::vector<int>& tokens, int separator,
                           bool first) {
  if (!first) out.push_back(separator);
  out.insert(out.end(), tokens.begin(), tokens.end());
}

}  // namespace

double AudioFeatures::channel_mean(size_t c) const {
  double s = 0.0;
  for (size_t t = 0; t < frames; ++t) s += at(t, c);
  return s / static_cast<double>(frames);
}

double AudioFeatures::channel_std(size_t c) const {
  const double mu = channel_mean(c);
  double s = 0.0;
  for (size_t t = 0; t < frames; ++t) {
    const double d = at(t, c) - mu;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(frames));
}

void AudioFeatures::validate() const {
  if (frames < 4) throw DataError("audio must have at least 4 frames");
  if (channels < 3) throw DataError("audio must have at least 3 channels");
  if (data.size() != frames * channels) throw DataError("audio data length mismatch");
  for (size_t t = 0; t < frames; ++t) {
    for (size_t c = 0; c < channels; ++c) {
      const double v = at(t, c);
      if (!std::isfinite(v)) throw DataError("audio contains a non-finite value");
      if (c == 1 && v < 0.0) throw DataError("energy channel must be non-negative");
    }
  }
}

std::string make_key(const std::string& book_id, size_t position) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%06zu", position);
  return book_id + buf;
}

std::pair<std::string, size_t> parse_key(const std::string& key) {
  const size_t hash = key.rfind('#');
  if (hash == std::string::npos || hash + 1 >= key.size()) {
    throw NotFoundError("malformed utterance key: " + key);
  }
  return {key.substr(0, hash), static_cast<size_t>(std::stoull(key.substr(hash + 1)))};
}

Corpus::Corpus(CorpusManifest manifest, std::vector<Utterance> utterances)
    : manifest_(std::move(manifest)), utterances_(std::move(utterances)) {
  size_t i = 0;
  for (const auto& [book_id, count] : manifest_.books) {
    if (book_spans_.count(book_id)) throw DataError("duplicate book id: " + book_id);
    book_spans_[book_id] = {i, count};
    for (size_t p = 0; p < count; ++p, ++i) {
      if (i >= utterances_.size()) throw DataError("manifest book counts exceed utterances");
      const Utterance& u = utterances_[i];
      if (u.book_id != book_id || u.position != p) {
        throw DataError("utterance order does not match manifest: expected " +
                        make_key(book_id, p) + ", got " + make_key(u.book_id, u.position));
      }
    }
  }
  if (i != utterances_.size()) throw DataError("utterances not covered by manifest books");
}

bool Corpus::contains(const std::string& book_id, size_t position) const {
  auto it = book_spans_.find(book_id);
  return it != book_spans_.end() && position < it->second.second;
}

size_t Corpus::index_of(const std::string& book_id, size_t position) const {
  auto it = book_spans_.find(book_id);
  if (it == book_spans_.end() || position >= it->second.second) {
    throw NotFoundError("unknown utterance: " + make_key(book_id, position));
  }
  return it->second.first + position;
}

const Utterance& Corpus::at(const std::string& book_id, size_t position) const {
  return utterances_[index_of(book_id, position)];
}

size_t Corpus::book_size(const std::string& book_id) const {
  auto it = book_spans_.find(book_id);
  if (it == book_spans_.end()) throw NotFoundError("unknown book: " + book_id);
  return it->second.second;
}

int style_token_limit(int style_count) { return 2 * style_count; }

int style_from_tokens(const std::vector<int>& window_tokens, int style_count) {
  const std::vector<double> h = style_histogram(window_tokens, style_count);
  int best = 0;
  double best_count = -1.0;
  for (int s = 0; s < style_count; ++s) {
    const double c = h[2 * s] + h[2 * s + 1];
    if (c > best_count) {
      best_count = c;
      best = s;
    }
  }
  return best;
}

Corpus generate_corpus(const CorpusConfig& config) {
  if (config.books < 1) throw ConfigError("corpus needs at least one book");
  if (config.utterances_per_book < 3) throw ConfigError("books need at least 3 utterances");
  if (config.style_count < 2) throw ConfigError("style count must be at least 2");
  if (config.channels < 3) throw ConfigError("audio needs at least 3 channels");
  const int m = style_token_limit(config.style_count);
  if (config.vocab_size < m + 2) {
    throw ConfigError("vocab must hold style tokens, a filler token, and the separator");
  }

  const StylePalette palette =
      make_palette(config.seed, config.style_count, config.channels);
  const int filler_lo = m;
  const int filler_hi = config.vocab_size - 1;  // exclusive; V-1 is the separator

  CorpusManifest manifest;
  manifest.version = 1;
  manifest.vocab_size = config.vocab_size;
  manifest.style_count = config.style_count;
  manifest.channels = config.channels;
  manifest.seed = config.seed;

  std::vector<Utterance> all;
  all.reserve(config.books * config.utterances_per_book);

  for (size_t bi = 0; bi < config.books; ++bi) {
    const std::string book_id = format_book_id(bi);
    manifest.books.emplace_back(book_id, config.utterances_per_book);
    Rng book_rng(mix_seed(config.seed, kBookTag, bi));

    const double f0_offset = book_rng.uniform(-kF0BookSpread, kF0BookSpread);
    const double energy_offset = book_rng.uniform(-kEnergyBookSpread, kEnergyBookSpread);
    std::vector<double> cep_offsets(palette.cepstral.size());
    for (double& o : cep_offsets) o = book_rng.uniform(-kCepBookSpread, kCepBookSpread);

    // Style runs: consecutive utterances share a family, adjacent runs differ.
    std::vector<int> family_of(config.utterances_per_book);
    {
      size_t filled = 0;
      int prev = -1;
      while (filled < config.utterances_per_book) {
        int fam = static_cast<int>(book_rng.below(config.style_count));
        while (fam == prev) fam = static_cast<int>(book_rng.below(config.style_count));
        const size_t len = static_cast<size_t>(
            book_rng.range(static_cast<int64_t>(kMinRunLength), static_cast<int64_t>(kMaxRunLength)));
        for (size_t j = 0; j < len && filled < config.utterances_per_book; ++j) {
          family_of[filled++] = fam;
        }
        prev = fam;
      }
    }

    // Pass 1: tokens. Every utterance plants 1..3 style tokens of its run's
    // family; the rest are fillers.
    std::vector<std::vector<int>> tokens(config.utterances_per_book);
    for (size_t i = 0; i < config.utterances_per_book; ++i) {
      const size_t len = static_cast<size_t>(
          book_rng.range(static_cast<int64_t>(kMinTokens), static_cast<int64_t>(kMaxTokens)));
      const size_t n_style = static_cast<size_t>(book_rng.range(
          static_cast<int64_t>(kMinStyleTokens), static_cast<int64_t>(kMaxStyleTokens)));
      std::vector<size_t> slots(len);
      std::iota(slots.begin(), slots.end(), 0);
      book_rng.shuffle(slots);

      std::vector<int> toks(len);
      for (size_t p = 0; p < len; ++p) {
        toks[p] = filler_lo + static_cast<int>(book_rng.below(filler_hi - filler_lo));
      }
      for (size_t p = 0; p < n_style; ++p) {
        toks[slots[p]] = 2 * family_of[i] + static_cast<int>(book_rng.below(2));
      }
      tokens[i] = std::move(toks);
    }

    // Pass 2: style label and audio from the +-2 window.
    for (size_t i = 0; i < config.utterances_per_book; ++i) {
      std::vector<int> window;
      const size_t lo = i >= kStyleWindow ? i - kStyleWindow : 0;
      const size_t hi = std::min(i + kStyleWindow, config.utterances_per_book - 1);
      for (size_t j = lo; j <= hi; ++j) {
        window.insert(window.end(), tokens[j].begin(), tokens[j].end());
      }

      Utterance u;
      u.book_id = book_id;
      u.position = i;
      u.tokens = tokens[i];
      u.style_id = style_from_tokens(window, config.style_count);

      const std::vector<double> h = style_histogram(window, config.style_count);
      const double f0_mean = kF0Base + kF0StyleGain * weighted(palette.f0_weights, h) + f0_offset;
      const double energy_amp =
          kEnergyBase + kEnergyStyleGain * weighted(palette.energy_weights, h) + energy_offset;

      Rng audio_rng(mix_seed(config.seed, kAudioTag, (bi << 24) | i));
      const size_t T = static_cast<size_t>(
          audio_rng.range(static_cast<int64_t>(kMinFrames), static_cast<int64_t>(kMaxFrames)));
      const double phase = audio_rng.uniform(0.0, 2.0 * kPi);

      std::vector<double> cep_means(palette.cepstral.size());
      for (size_t c = 0; c < cep_means.size(); ++c) {
        if (c % 2 == 0) {
          cep_means[c] = weighted(palette.cepstral[c], h) + cep_offsets[c];
        } else {
          cep_means[c] =
              audio_rng.uniform(-kCepPersonalSpread, kCepPersonalSpread) + cep_offsets[c];
        }
      }

      AudioFeatures audio;
      audio.frames = T;
      audio.channels = static_cast<size_t>(config.channels);
      audio.data.resize(T * audio.channels);
      for (size_t t = 0; t < T; ++t) {
        const double tt = static_cast<double>(t);
        audio.at(t, 0) = f0_mean + kF0ContourAmp * std::sin(2.0 * kPi * tt / T + phase) +
                         kF0FrameNoise * audio_rng.normal();
        const double envelope = 0.6 + 0.4 * std::sin(kPi * (tt + 0.5) / T);
        audio.at(t, 1) =
            std::max(0.0, energy_amp * envelope + kEnergyFrameNoise * audio_rng.normal());
        for (size_t c = 0; c < cep_means.size(); ++c) {
          audio.at(t, c + 2) = cep_means[c] + kCepFrameNoise * audio_rng.normal();
        }
      }
      u.audio = std::move(audio);
      all.push_back(std::move(u));
    }
  }

  return Corpus(std::move(manifest), std::move(all));
}

ContextWindow context_window(const Corpus& corpus, const std::string& book_id, size_t position,
                             size_t l) {
  corpus.index_of(book_id, position);  // throws NotFoundError if absent
  const size_t count = corpus.book_size(book_id);
  const size_t lo = position >= l ? position - l : 0;
  const size_t hi = std::min(position + l, count - 1);

  ContextWindow w;
  w.center_key = make_key(book_id, position);
  w.l = l;
  for (size_t j = lo; j <= hi; ++j) {
    append_with_separator(w.context_tokens, corpus.at(book_id, j).tokens,
                          corpus.separator_token(), j == lo);
  }
  return w;
}

ContextWindow shuffled_context_window(const Corpus& corpus, const std::string& book_id,
                                      size_t position, size_t l, uint64_t seed) {
  const size_t center = corpus.index_of(book_id, position) - corpus.index_of(book_id, 0);
  const size_t count = corpus.book_size(book_id);

  Rng rng(mix_seed(seed, kShuffleTag,
                   fnv1a64(book_id.data(), book_id.size(), fnv1a64(position))));
  const size_t wanted = 2 * l;
  std::vector<size_t> picks;
  picks.reserve(wanted);
  if (count - 1 >= wanted) {
    std::vector<size_t> others;
    others.reserve(count - 1);
    for (size_t j = 0; j < count; ++j) {
      if (j != center) others.push_back(j);
    }
    rng.shuffle(others);
    picks.assign(others.begin(), others.begin() + wanted);
  } else {
    for (size_t j = 0; j < wanted; ++j) {
      size_t pick = static_cast<size_t>(rng.below(count - 1));
      if (pick >= center) ++pick;
      picks.push_back(pick);
    }
  }

  ContextWindow w;
  w.center_key = make_key(book_id, position);
  w.l = l;
  bool first = true;
  for (size_t j = 0; j < l; ++j, first = false) {
    append_with_separator(w.context_tokens, corpus.at(book_id, picks[j]).tokens,
                          corpus.separator_token(), first);
  }
  append_with_separator(w.context_tokens, corpus.at(book_id, position).tokens,
                        corpus.separator_token(), first);
  for (size_t j = l; j < wanted; ++j) {
    append_with_separator(w.context_tokens, corpus.at(book_id, picks[j]).tokens,
                          corpus.separator_token(), false);
  }
  return w;
}

CorpusSplit split_corpus(const Corpus& corpus, size_t n_test_per_book) {
  CorpusSplit split;
  size_t base = 0;
  for (const auto& [book_id, count] : corpus.manifest().books) {
    if (n_test_per_book >= count) {
      throw ConfigError("test split of " + std::to_string(n_test_per_book) +
                        " does not leave a retrieval pool in book " + book_id);
    }
    const size_t pool_count = count - n_test_per_book;
    for (size_t p = 0; p < count; ++p) {
      (p < pool_count ? split.pool : split.test).push_back(base + p);
    }
    base += count;
  }
  return split;
}

namespace {

ordered_json manifest_json(const CorpusManifest& m) {
  ordered_json j;
  j["record"] = "manifest";
  j["version"] = m.version;
  j["vocab_size"] = m.vocab_size;
  j["style_count"] = m.style_count;
  j["channels"] = m.channels;
  j["seed"] = m.seed;
  ordered_json books = ordered_json::array();
  for (const auto& [id, count] : m.books) {
    books.push_back(ordered_json::array({id, count}));
  }
  j["books"] = std::move(books);
  return j;
}

ordered_json utterance_json(const Utterance& u) {
  ordered_json j;
  j["record"] = "utterance";
  j["book_id"] = u.book_id;
  j["position"] = u.position;
  j["tokens"] = u.tokens;
  j["style_id"] = u.style_id;
  j["frames"] = u.audio.frames;
  j["channels"] = u.audio.channels;
  j["audio"] = u.audio.data;
  return j;
}

}  // namespace

std::string manifest_to_string(const CorpusManifest& manifest) {
  return manifest_json(manifest).dump();
}

std::string corpus_to_string(const Corpus& corpus) {
  std::string out = manifest_to_string(corpus.manifest());
  out.push_back('\n');
  for (const Utterance& u : corpus.utterances()) {
    out += utterance_json(u).dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open corpus file for writing: " + path);
  f << corpus_to_string(corpus);
  if (!f) throw DataError("failed writing corpus file: " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open corpus file: " + path);

  std::string line;
  size_t line_no = 0;
  CorpusManifest manifest;
  std::vector<Utterance> utterances;
  bool saw_manifest = false;

  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw FormatError("corpus line " + std::to_string(line_no) + " is not valid JSON");
    }
    try {
      const std::string record = j.at("record").get<std::string>();
      if (record == "manifest") {
        if (saw_manifest) throw FormatError("duplicate manifest line");
        manifest.version = j.at("version").get<uint32_t>();
        if (manifest.version != 1) {
          throw FormatError("unsupported corpus version " + std::to_string(manifest.version));
        }
        manifest.vocab_size = j.at("vocab_size").get<int>();
        manifest.style_count = j.at("style_count").get<int>();
        manifest.channels = j.at("channels").get<int>();
        manifest.seed = j.at("seed").get<uint64_t>();
        for (const auto& b : j.at("books")) {
          manifest.books.emplace_back(b.at(0).get<std::string>(), b.at(1).get<size_t>());
        }
        saw_manifest = true;
      } else if (record == "utterance") {
        if (!saw_manifest) throw FormatError("utterance record before manifest");
        Utterance u;
        u.book_id = j.at("book_id").get<std::string>();
        u.position = j.at("position").get<size_t>();
        u.tokens = j.at("tokens").get<std::vector<int>>();
        u.style_id = j.at("style_id").get<int>();
        u.audio.frames = j.at("frames").get<size_t>();
        u.audio.channels = j.at("channels").get<size_t>();
        u.audio.data = j.at("audio").get<std::vector<double>>();

        if (u.tokens.empty() || u.tokens.size() > kMaxTokenCap) {
          throw FormatError("utterance token count out of range");
        }
        for (int t : u.tokens) {
          if (t < 0 || t >= manifest.vocab_size) throw FormatError("token id out of vocabulary");
        }
        if (u.style_id < 0 || u.style_id >= manifest.style_count) {
          throw FormatError("style id out of range");
        }
        if (u.audio.channels != static_cast<size_t>(manifest.channels)) {
          throw FormatError("utterance channel count differs from manifest");
        }
        u.audio.validate();
        utterances.push_back(std::move(u));
      } else {
        throw FormatError("unknown record type: " + record);
      }
    } catch (const ordered_json::exception& e) {
      throw FormatError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw FormatError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!saw_manifest) throw FormatError("corpus file has no manifest line");

  try {
    return Corpus(std::move(manifest), std::move(utterances));
  } catch (const DataError& e) {
    throw FormatError(std::string("corpus structure invalid: ") + e.what());
  }
}

}  // namespace ragtts
