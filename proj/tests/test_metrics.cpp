#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ragtts/errors.hpp"
#include "ragtts/metrics.hpp"
#include "ragtts/rng.hpp"

using namespace ragtts;

namespace {

AudioFeatures from_rows(const std::vector<std::vector<double>>& rows) {
  AudioFeatures a;
  a.frames = rows.size();
  a.channels = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) a.data.insert(a.data.end(), r.begin(), r.end());
  return a;
}

AudioFeatures random_features(Rng& rng, size_t frames, size_t channels) {
  AudioFeatures a;
  a.frames = frames;
  a.channels = channels;
  a.data.resize(frames * channels);
  for (size_t t = 0; t < frames; ++t) {
    for (size_t c = 0; c < channels; ++c) {
      a.at(t, c) = c == 1 ? rng.uniform(0.0, 2.0) : rng.uniform(-2.0, 2.0);
    }
  }
  return a;
}

double local_dist(const AudioFeatures& a, size_t i, const AudioFeatures& b, size_t j,
                  size_t c0, size_t c1) {
  double s = 0.0;
  for (size_t c = c0; c < c1; ++c) {
    const double d = a.at(i, c) - b.at(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

// Exhaustive best-prefix cost by path enumeration (no dynamic programming):
// minimum over all monotone step sequences reaching (i, j), summing costs
// from the start so float association matches a front-to-back walk.
double enum_best_cost(const AudioFeatures& a, const AudioFeatures& b, size_t i, size_t j,
                      size_t c0, size_t c1) {
  const double d = local_dist(a, i, b, j, c0, c1);
  if (i == 0 && j == 0) return d;
  double best = std::numeric_limits<double>::infinity();
  if (i > 0 && j > 0) best = std::min(best, enum_best_cost(a, b, i - 1, j - 1, c0, c1));
  if (i > 0) best = std::min(best, enum_best_cost(a, b, i - 1, j, c0, c1));
  if (j > 0) best = std::min(best, enum_best_cost(a, b, i, j - 1, c0, c1));
  return d + best;
}

// Canonical optimal path from enumeration costs, applying the pinned
// tie-break (diagonal, then (1,0), then (0,1)) while walking backwards.
AlignmentPath enum_path(const AudioFeatures& a, const AudioFeatures& b, size_t c0, size_t c1) {
  AlignmentPath p;
  size_t i = a.frames - 1, j = b.frames - 1;
  p.cost = enum_best_cost(a, b, i, j, c0, c1);
  p.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const double here = local_dist(a, i, b, j, c0, c1);
    const double target = enum_best_cost(a, b, i, j, c0, c1) - here;
    if (i > 0 && j > 0 && enum_best_cost(a, b, i - 1, j - 1, c0, c1) == target) {
      --i;
      --j;
    } else if (i > 0 && enum_best_cost(a, b, i - 1, j, c0, c1) == target) {
      --i;
    } else {
      --j;
    }
    p.steps.emplace_back(i, j);
  }
  std::reverse(p.steps.begin(), p.steps.end());
  return p;
}

bool valid_path(const AlignmentPath& p, size_t ta, size_t tb) {
  if (p.steps.empty()) return false;
  if (p.steps.front() != std::make_pair<size_t, size_t>(0, 0)) return false;
  if (p.steps.back() != std::make_pair(ta - 1, tb - 1)) return false;
  for (size_t s = 1; s < p.steps.size(); ++s) {
    const size_t di = p.steps[s].first - p.steps[s - 1].first;
    const size_t dj = p.steps[s].second - p.steps[s - 1].second;
    if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("dtw of identical sequences is the zero-cost diagonal") {
  Rng rng(1);
  AudioFeatures a = random_features(rng, 6, 4);
  AlignmentPath p = dtw_align(a, a);
  CHECK(p.cost == 0.0);
  REQUIRE(p.steps.size() == 6);
  for (size_t t = 0; t < 6; ++t) {
    CHECK(p.steps[t].first == t);
    CHECK(p.steps[t].second == t);
  }
}

TEST_CASE("dtw matches exhaustive enumeration on the 1-d example") {
  AudioFeatures a = from_rows({{1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  AudioFeatures b = from_rows({{1, 0, 0}, {3, 0, 0}});
  // distance on channel 0 alone
  AlignmentPath got = dtw_align_channels(a, b, 0, 1);
  AlignmentPath want = enum_path(a, b, 0, 1);
  CHECK(got.cost == want.cost);
  CHECK(got.steps == want.steps);
  CHECK(got.cost == 1.0);  // (1,1),(2,?),(3,3): best warp costs |2-1| or |2-3|
}

TEST_CASE("single-frame input forces a degenerate path") {
  Rng rng(2);
  AudioFeatures a = random_features(rng, 1, 3);
  AudioFeatures b = random_features(rng, 5, 3);
  AlignmentPath p = dtw_align(a, b);
  REQUIRE(p.steps.size() == 5);
  for (size_t j = 0; j < 5; ++j) {
    CHECK(p.steps[j].first == 0);
    CHECK(p.steps[j].second == j);
  }

  AudioFeatures empty;
  empty.channels = 3;
  CHECK_THROWS_AS(dtw_align(empty, b), DataError);
}

TEST_CASE("dtw equals enumeration for 100 random short pairs, exactly") {
  Rng rng(314);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t ta = 1 + rng.below(5), tb = 1 + rng.below(5);
    const size_t channels = 1 + rng.below(3);
    AudioFeatures a = random_features(rng, ta, channels);
    AudioFeatures b = random_features(rng, tb, channels);
    // quantize so equal-cost alternatives genuinely occur and exercise ties
    if (trial % 3 == 0) {
      for (double& v : a.data) v = std::round(v);
      for (double& v : b.data) v = std::round(v);
    }

    AlignmentPath got = dtw_align_channels(a, b, 0, channels);
    AlignmentPath want = enum_path(a, b, 0, channels);
    CHECK(valid_path(got, ta, tb));
    CHECK(got.cost == want.cost);
    CHECK(got.steps == want.steps);
  }
}

TEST_CASE("mcd: zero on identity, closed form on a constant cepstral offset") {
  Rng rng(3);
  AudioFeatures a = random_features(rng, 7, 6);
  CHECK(mcd(a, a) == 0.0);

  // constant frames, one cepstral channel offset by delta
  const double delta = 0.35;
  AudioFeatures c = from_rows({{1, 1, 0.2, 0.4}, {1, 1, 0.2, 0.4}, {1, 1, 0.2, 0.4}});
  AudioFeatures d = c;
  for (size_t t = 0; t < d.frames; ++t) d.at(t, 3) += delta;
  const double expect = (10.0 / std::log(10.0)) * std::sqrt(2.0) * delta;
  CHECK(mcd(c, d) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(mcd(d, c) == doctest::Approx(expect).epsilon(1e-12));

  AudioFeatures two_ch = from_rows({{1, 1}, {1, 1}});
  CHECK_THROWS_AS(mcd(two_ch, two_ch), DataError);
}

TEST_CASE("mcd matches an independent composed oracle on random pairs") {
  Rng rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    AudioFeatures a = random_features(rng, 5, 16);
    AudioFeatures b = random_features(rng, 4, 16);
    AlignmentPath path = enum_path(a, b, 2, 16);
    double sum = 0.0;
    for (const auto& [i, j] : path.steps) sum += local_dist(a, i, b, j, 2, 16);
    const double expect =
        (10.0 / std::log(10.0)) * std::sqrt(2.0) * sum / static_cast<double>(path.steps.size());
    CHECK(mcd(a, b) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("channel rmse: identity, constant offset, and naive oracle") {
  Rng rng(5);
  AudioFeatures a = random_features(rng, 6, 4);
  CHECK(channel_rmse(a, a, 0) == 0.0);

  // constant channel, constant offset: rmse equals the offset
  AudioFeatures c = from_rows({{2, 1, 0}, {2, 1, 0}, {2, 1, 0}, {2, 1, 0}});
  AudioFeatures d = c;
  for (size_t t = 0; t < d.frames; ++t) d.at(t, 0) += 0.75;
  CHECK(channel_rmse(c, d, 0) == doctest::Approx(0.75).epsilon(1e-12));

  // random pair against an independent recomputation over the oracle path
  AudioFeatures x = random_features(rng, 5, 3);
  AudioFeatures y = random_features(rng, 4, 3);
  for (size_t ch = 0; ch < 3; ++ch) {
    AlignmentPath path = enum_path(x, y, ch, ch + 1);
    double sum = 0.0;
    for (const auto& [i, j] : path.steps) {
      const double diff = x.at(i, ch) - y.at(j, ch);
      sum += diff * diff;
    }
    const double expect = std::sqrt(sum / static_cast<double>(path.steps.size()));
    CHECK(channel_rmse(x, y, ch) == doctest::Approx(expect).epsilon(1e-12));
  }

  CHECK_THROWS_AS(channel_rmse(a, a, 9), DataError);
}

TEST_CASE("metrics are symmetric for equal-length inputs") {
  Rng rng(6);
  AudioFeatures a = random_features(rng, 6, 8);
  AudioFeatures b = random_features(rng, 6, 8);
  CHECK(mcd(a, b) == doctest::Approx(mcd(b, a)).epsilon(1e-12));
  CHECK(channel_rmse(a, b, 0) == doctest::Approx(channel_rmse(b, a, 0)).epsilon(1e-12));
  CHECK(secs(a, b) == doctest::Approx(secs(b, a)).epsilon(1e-12));
}

TEST_CASE("secs: self similarity, repetition invariance, orthogonal construction") {
  Rng rng(7);
  AudioFeatures a = random_features(rng, 8, 6);
  CHECK(secs(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  AudioFeatures doubled;
  doubled.frames = 16;
  doubled.channels = 6;
  doubled.data.resize(16 * 6);
  for (size_t t = 0; t < 8; ++t) {
    for (size_t c = 0; c < 6; ++c) {
      doubled.at(2 * t, c) = a.at(t, c);
      doubled.at(2 * t + 1, c) = a.at(t, c);
    }
  }
  CHECK(secs(a, doubled) == doctest::Approx(1.0).epsilon(1e-6));

  // Null-space search: walk from stats s1 toward another valid stats vector
  // until the projected embeddings are orthogonal, then realize the stats as
  // 4-frame features [mu-sigma, mu-sigma, mu+sigma, mu+sigma].
  const size_t channels = 6;
  auto realize = [&](const std::vector<double>& mu, const std::vector<double>& sigma) {
    AudioFeatures f;
    f.frames = 4;
    f.channels = channels;
    f.data.resize(4 * channels);
    for (size_t c = 0; c < channels; ++c) {
      f.at(0, c) = mu[c] - sigma[c];
      f.at(1, c) = mu[c] - sigma[c];
      f.at(2, c) = mu[c] + sigma[c];
      f.at(3, c) = mu[c] + sigma[c];
    }
    return f;
  };
  std::vector<double> mu1(channels), sg1(channels), mu2(channels), sg2(channels);
  for (size_t c = 0; c < channels; ++c) {
    mu1[c] = rng.uniform(0.5, 2.0);
    sg1[c] = rng.uniform(0.1, 0.4);
  }
  AudioFeatures x1 = realize(mu1, sg1);
  const std::vector<double> e1 = speaker_embedding(x1);

  auto dot16 = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
  };

  // find a valid endpoint whose embedding flips the sign of the dot product
  bool found = false;
  for (int attempt = 0; attempt < 200 && !found; ++attempt) {
    for (size_t c = 0; c < channels; ++c) {
      mu2[c] = rng.uniform(0.5, 2.0);
      sg2[c] = rng.uniform(0.1, 0.4);
    }
    if (dot16(speaker_embedding(realize(mu2, sg2)), e1) < 0.0) found = true;
  }
  REQUIRE(found);

  // bisect the (convex) segment between the two valid stat vectors
  double lo = 0.0, hi = 1.0;
  std::vector<double> mu(channels), sg(channels);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    for (size_t c = 0; c < channels; ++c) {
      mu[c] = mu1[c] + mid * (mu2[c] - mu1[c]);
      sg[c] = sg1[c] + mid * (sg2[c] - sg1[c]);
    }
    if (dot16(speaker_embedding(realize(mu, sg)), e1) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  AudioFeatures x2 = realize(mu, sg);
  CHECK(secs(x1, x2) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("tts_eval: identity outputs, single item mean, hand-averaged means") {
  Rng rng(8);
  std::vector<std::string> keys = {"a", "b", "c"};
  std::vector<AudioFeatures> truths;
  for (int i = 0; i < 3; ++i) truths.push_back(random_features(rng, 5 + i, 6));

  TtsReport same = tts_eval(keys, truths, truths);
  for (const TtsItemMetrics& m : same.items) {
    CHECK(m.mcd == 0.0);
    CHECK(m.energy_rmse == 0.0);
    CHECK(m.f0_rmse == 0.0);
    CHECK(m.secs == doctest::Approx(1.0).epsilon(1e-12));
  }

  TtsReport one = tts_eval({"a"}, {truths[0]}, {truths[1]});
  CHECK(one.mean_mcd == one.items[0].mcd);
  CHECK(one.mean_secs == one.items[0].secs);

  std::vector<AudioFeatures> outs;
  for (int i = 0; i < 3; ++i) outs.push_back(random_features(rng, 6, 6));
  TtsReport three = tts_eval(keys, outs, truths);
  double mcd_sum = 0.0;
  for (const TtsItemMetrics& m : three.items) mcd_sum += m.mcd;
  CHECK(three.mean_mcd == doctest::Approx(mcd_sum / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(tts_eval(keys, outs, {truths[0]}), DataError);
}

TEST_CASE("retrieval metrics: perfect limit and the forced-rank hand case") {
  // orthogonal per-item embeddings, text == audio: everything resolves to 1
  std::vector<RetrievalQueryItem> perfect;
  for (int i = 0; i < 3; ++i) {
    RetrievalQueryItem item;
    item.own_key = "q" + std::to_string(i);
    item.query.assign(4, 0.0);
    item.query[i] = 1.0;
    item.own_audio = item.query;
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      std::vector<double> v(4, 0.0);
      v[j] = 1.0;
      item.pool.emplace_back("p" + std::to_string(j), v);
    }
    perfect.push_back(std::move(item));
  }
  RetrievalReport p = eval_retrieval_items(perfect);
  CHECK(p.r_at_1 == 1.0);
  CHECK(p.map_at_10 == 1.0);
  CHECK(p.sim == 1.0);

  // forced ranks (2, 1, 11, 3) -> mAP@10 = (0.5 + 1 + 0 + 1/3)/4
  auto forced_rank_item = [](const std::string& key, size_t rank) {
    RetrievalQueryItem item;
    item.own_key = key;
    item.query = {1.0, 0.0};
    item.own_audio = {0.5, std::sqrt(0.75)};  // own score 0.5
    for (size_t b = 0; b + 1 < rank; ++b) {
      // beat the own item with higher-scoring pool entries
      item.pool.emplace_back(key + "_beat" + std::to_string(b),
                             std::vector<double>{0.9, std::sqrt(1.0 - 0.81)});
    }
    for (size_t w = 0; w < 12; ++w) {
      item.pool.emplace_back(key + "_tail" + std::to_string(w),
                             std::vector<double>{-0.5, std::sqrt(0.75)});
    }
    return item;
  };
  std::vector<RetrievalQueryItem> forced;
  forced.push_back(forced_rank_item("q0", 2));
  forced.push_back(forced_rank_item("q1", 1));
  forced.push_back(forced_rank_item("q2", 11));
  forced.push_back(forced_rank_item("q3", 3));
  RetrievalReport f = eval_retrieval_items(forced);
  CHECK(f.items[0].rank == 2);
  CHECK(f.items[1].rank == 1);
  CHECK(f.items[2].rank == 11);
  CHECK(f.items[3].rank == 3);
  CHECK(f.map_at_10 == doctest::Approx((0.5 + 1.0 + 0.0 + 1.0 / 3.0) / 4.0).epsilon(1e-9));
  CHECK(f.r_at_1 == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(f.r_at_5 == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(f.r_at_10 == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("retrieval metrics are bounded, monotone in k, and dominated by r@10") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RetrievalQueryItem> items;
    const size_t n_items = 2 + rng.below(6);
    for (size_t i = 0; i < n_items; ++i) {
      RetrievalQueryItem item;
      item.own_key = "q" + std::to_string(i);
      Tensor q({3}, {rng.normal(), rng.normal(), rng.normal()});
      item.query = {q[0], q[1], q[2]};
      item.own_audio = {rng.normal(), rng.normal(), rng.normal()};
      const size_t pool = rng.below(15);
      for (size_t b = 0; b < pool; ++b) {
        item.pool.emplace_back("p" + std::to_string(b),
                               std::vector<double>{rng.normal(), rng.normal(), rng.normal()});
      }
      items.push_back(std::move(item));
    }
    RetrievalReport r = eval_retrieval_items(items);
    CHECK(r.r_at_1 >= 0.0);
    CHECK(r.r_at_1 <= r.r_at_5);
    CHECK(r.r_at_5 <= r.r_at_10);
    CHECK(r.r_at_10 <= 1.0);
    CHECK(r.map_at_10 <= r.r_at_10);
    CHECK(r.map_at_10 >= 0.0);
  }
}

TEST_CASE("retrieval_eval matches a naive full re-implementation exactly") {
  CorpusConfig cc;
  cc.books = 2;
  cc.utterances_per_book = 12;  // pool of 10 per book, below the 20-item bound
  cc.vocab_size = 24;
  cc.style_count = 3;
  cc.channels = 6;
  cc.seed = 77;
  Corpus corpus = generate_corpus(cc);

  CaClapConfig mc;
  mc.vocab_size = cc.vocab_size;
  mc.channels = cc.channels;
  mc.embed_dim = 8;
  mc.audio_hidden = 8;
  mc.proj_dim = 4;
  mc.seed = 5;
  Checkpoint ckpt = init_checkpoint(mc);
  CorpusSplit split = split_corpus(corpus, 2);

  RetrievalEvalOptions options;
  options.context_len = 2;
  RetrievalReport got = retrieval_eval(ckpt, corpus, split, options);

  // naive: recompute embeddings, full sort per query, same tie-break
  double sim = 0.0, r1 = 0.0, r5 = 0.0, r10 = 0.0, map10 = 0.0;
  for (size_t qi = 0; qi < split.test.size(); ++qi) {
    const Utterance& u = corpus.at_index(split.test[qi]);
    const ContextWindow w = context_window(corpus, u.book_id, u.position, 2);
    const Tensor query = encode_text(ckpt, u.tokens, w.context_tokens);
    const std::string own_key = make_key(u.book_id, u.position);

    std::vector<std::pair<double, std::string>> scored;
    scored.emplace_back(dot(query, encode_audio(ckpt, u.audio)), own_key);
    for (size_t idx : split.pool) {
      const Utterance& cand = corpus.at_index(idx);
      if (cand.book_id != u.book_id) continue;
      scored.emplace_back(dot(query, encode_audio(ckpt, cand.audio)),
                          make_key(cand.book_id, cand.position));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    size_t rank = 0;
    for (size_t i = 0; i < scored.size(); ++i) {
      if (scored[i].second == own_key) rank = i + 1;
    }
    CHECK(got.items[qi].rank == rank);
    sim += dot(query, encode_audio(ckpt, u.audio));
    if (rank <= 1) r1 += 1;
    if (rank <= 5) r5 += 1;
    if (rank <= 10) r10 += 1;
    if (rank <= 10) map10 += 1.0 / static_cast<double>(rank);
  }
  const double n = static_cast<double>(split.test.size());
  CHECK(got.sim == sim / n);
  CHECK(got.r_at_1 == r1 / n);
  CHECK(got.r_at_5 == r5 / n);
  CHECK(got.r_at_10 == r10 / n);
  CHECK(got.map_at_10 == map10 / n);
}
