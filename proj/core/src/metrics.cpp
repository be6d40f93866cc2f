#include "ragtts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ragtts/errors.hpp"
#include "ragtts/nn.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

namespace {

constexpr double kMcdScale = 4.342944819032518 * 1.4142135623730951;  // (10/ln10)*sqrt(2)

double frame_distance(const AudioFeatures& a, size_t i, const AudioFeatures& b, size_t j,
                      size_t c0, size_t c1) {
  double s = 0.0;
  for (size_t c = c0; c < c1; ++c) {
    const double d = a.at(i, c) - b.at(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

void check_pair(const AudioFeatures& a, const AudioFeatures& b) {
  if (a.frames == 0 || b.frames == 0) throw DataError("alignment requires non-empty inputs");
  if (a.channels != b.channels) throw DataError("alignment requires equal channel counts");
}

}  // namespace

AlignmentPath dtw_align_channels(const AudioFeatures& a, const AudioFeatures& b,
                                 size_t channel_begin, size_t channel_end) {
  check_pair(a, b);
  if (channel_begin >= channel_end || channel_end > a.channels) {
    throw DataError("invalid channel range for alignment");
  }
  const size_t ta = a.frames, tb = b.frames;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> cost(ta * tb, inf);
  auto at = [&](size_t i, size_t j) -> double& { return cost[i * tb + j]; };

  at(0, 0) = frame_distance(a, 0, b, 0, channel_begin, channel_end);
  for (size_t j = 1; j < tb; ++j) {
    at(0, j) = frame_distance(a, 0, b, j, channel_begin, channel_end) + at(0, j - 1);
  }
  for (size_t i = 1; i < ta; ++i) {
    at(i, 0) = frame_distance(a, i, b, 0, channel_begin, channel_end) + at(i - 1, 0);
    for (size_t j = 1; j < tb; ++j) {
      const double best = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
      at(i, j) = frame_distance(a, i, b, j, channel_begin, channel_end) + best;
    }
  }

  // Backtrack; ties prefer diagonal, then (1,0), then (0,1).
  AlignmentPath path;
  path.cost = at(ta - 1, tb - 1);
  size_t i = ta - 1, j = tb - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double d = frame_distance(a, i, b, j, channel_begin, channel_end);
      const double want = at(i, j) - d;
      if (at(i - 1, j - 1) == want) {
        --i;
        --j;
      } else if (at(i - 1, j) == want) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

AlignmentPath dtw_align(const AudioFeatures& a, const AudioFeatures& b) {
  return dtw_align_channels(a, b, 0, a.channels);
}

double mcd(const AudioFeatures& a, const AudioFeatures& b) {
  check_pair(a, b);
  if (a.channels < 3) throw DataError("mcd requires cepstral channels (C >= 3)");
  const AlignmentPath path = dtw_align_channels(a, b, 2, a.channels);
  double sum = 0.0;
  for (const auto& [i, j] : path.steps) {
    sum += frame_distance(a, i, b, j, 2, a.channels);
  }
  return kMcdScale * sum / static_cast<double>(path.steps.size());
}

double channel_rmse(const AudioFeatures& a, const AudioFeatures& b, size_t channel) {
  check_pair(a, b);
  if (channel >= a.channels) throw DataError("channel index out of range");
  const AlignmentPath path = dtw_align_channels(a, b, channel, channel + 1);
  double sum = 0.0;
  for (const auto& [i, j] : path.steps) {
    const double d = a.at(i, channel) - b.at(j, channel);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(path.steps.size()));
}

std::vector<double> speaker_embedding(const AudioFeatures& x) {
  x.validate();
  const size_t c = x.channels;
  std::vector<double> stats(2 * c);
  for (size_t ch = 0; ch < c; ++ch) {
    stats[ch] = x.channel_mean(ch);
    stats[c + ch] = x.channel_std(ch);
  }

  // Fixed seeded Gaussian projection; the published seed keeps SECS values
  // comparable across runs and implementations.
  Rng rng(mix_seed(kSecsProjectionSeed, 2 * c));
  std::vector<double> emb(kSecsEmbedDim, 0.0);
  for (size_t r = 0; r < kSecsEmbedDim; ++r) {
    for (size_t s = 0; s < stats.size(); ++s) {
      emb[r] += rng.normal() * stats[s];
    }
  }
  double norm2 = 0.0;
  for (double v : emb) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  if (norm > 1e-12) {
    for (double& v : emb) v /= norm;
  } else {
    std::fill(emb.begin(), emb.end(), 0.0);
  }
  return emb;
}

double secs(const AudioFeatures& x, const AudioFeatures& y) {
  const std::vector<double> ex = speaker_embedding(x);
  const std::vector<double> ey = speaker_embedding(y);
  double s = 0.0;
  for (size_t i = 0; i < ex.size(); ++i) s += ex[i] * ey[i];
  return std::clamp(s, -1.0, 1.0);
}

TtsReport tts_eval(const std::vector<std::string>& keys,
                   const std::vector<AudioFeatures>& outputs,
                   const std::vector<AudioFeatures>& ground_truths) {
  if (outputs.size() != ground_truths.size() || outputs.size() != keys.size()) {
    throw DataError("tts_eval requires matched outputs and ground truths");
  }
  if (outputs.empty()) throw DataError("tts_eval requires at least one item");

  TtsReport report;
  for (size_t i = 0; i < outputs.size(); ++i) {
    TtsItemMetrics m;
    m.key = keys[i];
    m.energy_rmse = channel_rmse(outputs[i], ground_truths[i], 1);
    m.f0_rmse = channel_rmse(outputs[i], ground_truths[i], 0);
    m.mcd = mcd(outputs[i], ground_truths[i]);
    m.secs = secs(outputs[i], ground_truths[i]);
    report.items.push_back(std::move(m));
  }
  for (const TtsItemMetrics& m : report.items) {
    report.mean_energy_rmse += m.energy_rmse;
    report.mean_f0_rmse += m.f0_rmse;
    report.mean_mcd += m.mcd;
    report.mean_secs += m.secs;
  }
  const double n = static_cast<double>(report.items.size());
  report.mean_energy_rmse /= n;
  report.mean_f0_rmse /= n;
  report.mean_mcd /= n;
  report.mean_secs /= n;
  return report;
}

RetrievalReport eval_retrieval_items(const std::vector<RetrievalQueryItem>& items) {
  if (items.empty()) throw DataError("retrieval evaluation requires at least one query");

  RetrievalReport report;
  for (const RetrievalQueryItem& item : items) {
    const size_t p = item.query.size();
    if (item.own_audio.size() != p) throw DataError("query/audio dimension mismatch");

    auto cosine = [&](const std::vector<double>& v) {
      double s = 0.0;
      for (size_t i = 0; i < p; ++i) s += item.query[i] * v[i];
      return s;
    };

    const double own_score = cosine(item.own_audio);
    // Rank among pool-union-own with the lexicographic tie-break.
    size_t rank = 1;
    for (const auto& [key, vec] : item.pool) {
      if (vec.size() != p) throw DataError("pool vector dimension mismatch");
      const double s = cosine(vec);
      if (s > own_score || (s == own_score && key < item.own_key)) ++rank;
    }

    RetrievalItemResult r;
    r.key = item.own_key;
    r.rank = rank;
    r.sim = own_score;
    report.items.push_back(std::move(r));
  }

  const double n = static_cast<double>(report.items.size());
  for (const RetrievalItemResult& r : report.items) {
    report.sim += r.sim;
    if (r.rank <= 1) report.r_at_1 += 1.0;
    if (r.rank <= 5) report.r_at_5 += 1.0;
    if (r.rank <= 10) report.r_at_10 += 1.0;
    if (r.rank <= 10) report.map_at_10 += 1.0 / static_cast<double>(r.rank);
  }
  report.sim /= n;
  report.r_at_1 /= n;
  report.r_at_5 /= n;
  report.r_at_10 /= n;
  report.map_at_10 /= n;
  return report;
}

RetrievalReport retrieval_eval(const Checkpoint& ckpt, const Corpus& corpus,
                               const CorpusSplit& split, const RetrievalEvalOptions& options) {
  if (split.test.empty()) throw DataError("retrieval evaluation requires a test split");
  if (split.pool.empty()) throw DataError("retrieval evaluation requires a pool");

  // Audio embeddings of the pool, computed once and grouped by book.
  std::map<std::string, std::vector<std::pair<std::string, std::vector<double>>>> pool_by_book;
  std::vector<std::pair<std::string, std::vector<double>>> pool_all;
  for (size_t idx : split.pool) {
    const Utterance& u = corpus.at_index(idx);
    const Tensor emb = encode_audio(ckpt, u.audio);
    std::pair<std::string, std::vector<double>> entry{make_key(u.book_id, u.position),
                                                      emb.values()};
    pool_by_book[u.book_id].push_back(entry);
    if (!options.same_book_pool) pool_all.push_back(std::move(entry));
  }

  std::vector<RetrievalQueryItem> items;
  items.reserve(split.test.size());
  for (size_t idx : split.test) {
    const Utterance& u = corpus.at_index(idx);
    const ContextWindow w =
        options.context_mode == ContextMode::kTrue
            ? context_window(corpus, u.book_id, u.position, options.context_len)
            : shuffled_context_window(corpus, u.book_id, u.position, options.context_len,
                                      options.shuffle_seed);

    RetrievalQueryItem item;
    item.own_key = make_key(u.book_id, u.position);
    item.query = encode_text(ckpt, u.tokens, w.context_tokens).values();
    item.own_audio = encode_audio(ckpt, u.audio).values();
    item.pool = options.same_book_pool ? pool_by_book.at(u.book_id) : pool_all;
    items.push_back(std::move(item));
  }
  return eval_retrieval_items(items);
}

}  // namespace ragtts
