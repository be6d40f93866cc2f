#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "ragtts/errors.hpp"
#include "ragtts/index.hpp"
#include "ragtts/report.hpp"
#include "ragtts/rng.hpp"

using namespace ragtts;

namespace {

Tensor unit2(double x, double y) {
  const double n = std::sqrt(x * x + y * y);
  return Tensor({2}, {x / n, y / n});
}

Tensor random_unit(Rng& rng, size_t dim) {
  Tensor v({dim});
  double n2 = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    v[i] = rng.normal();
    n2 += v[i] * v[i];
  }
  const double n = std::sqrt(n2);
  for (size_t i = 0; i < dim; ++i) v[i] /= n;
  return v;
}

// Full-sort reference used by the exactness property, float storage included.
std::vector<ScoredKey> naive_topk(const EmbeddingIndex& index, const Tensor& q, size_t k) {
  std::vector<ScoredKey> all;
  for (const IndexEntry& e : index.entries()) {
    double s = 0.0;
    for (size_t i = 0; i < index.dim(); ++i) s += q[i] * static_cast<double>(e.vec[i]);
    all.push_back({e.key, std::clamp(s, -1.0, 1.0)});
  }
  std::stable_sort(all.begin(), all.end(), [](const ScoredKey& a, const ScoredKey& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

struct TinyWorld {
  Corpus corpus;
  Checkpoint ckpt;
  CorpusSplit split;
};

TinyWorld tiny_world(uint64_t seed = 1) {
  CorpusConfig cc;
  cc.books = 2;
  cc.utterances_per_book = 10;
  cc.vocab_size = 24;
  cc.style_count = 3;
  cc.channels = 6;
  cc.seed = seed;
  Corpus corpus = generate_corpus(cc);

  CaClapConfig mc;
  mc.vocab_size = cc.vocab_size;
  mc.channels = cc.channels;
  mc.embed_dim = 8;
  mc.audio_hidden = 8;
  mc.proj_dim = 4;
  mc.seed = seed + 7;
  Checkpoint ckpt = init_checkpoint(mc);
  CorpusSplit split = split_corpus(corpus, 2);
  return {std::move(corpus), std::move(ckpt), std::move(split)};
}

}  // namespace

TEST_CASE("build_index embeds the pool in corpus order") {
  TinyWorld w = tiny_world();
  EmbeddingIndex index = build_index(w.corpus, w.split.pool, w.ckpt);
  CHECK(index.size() == w.split.pool.size());
  CHECK(index.dim() == 4);

  // rebuilding yields identical bytes
  EmbeddingIndex again = build_index(w.corpus, w.split.pool, w.ckpt);
  CHECK(index_to_string(index) == index_to_string(again));

  // each stored vector equals encode_audio of its utterance, cast to f32
  for (size_t i = 0; i < w.split.pool.size(); ++i) {
    const Utterance& u = w.corpus.at_index(w.split.pool[i]);
    CHECK(index.entries()[i].key == make_key(u.book_id, u.position));
    const Tensor direct = encode_audio(w.ckpt, u.audio);
    for (size_t d = 0; d < 4; ++d) {
      CHECK(index.entries()[i].vec[d] == static_cast<float>(direct[d]));
    }
  }

  CHECK_THROWS_AS(build_index(w.corpus, {}, w.ckpt), DataError);
  std::vector<size_t> dup = {w.split.pool[0], w.split.pool[0]};
  CHECK_THROWS_AS(build_index(w.corpus, dup, w.ckpt), DataError);
}

TEST_CASE("query finds an exact stored vector among orthogonal entries") {
  EmbeddingIndex index(3);
  index.add("match", Tensor({3}, {1.0, 0.0, 0.0}));
  index.add("other1", Tensor({3}, {0.0, 1.0, 0.0}));
  index.add("other2", Tensor({3}, {0.0, 0.0, 1.0}));

  RankedResult r = query_index(index, Tensor({3}, {1.0, 0.0, 0.0}), 2);
  REQUIRE(r.items.size() == 2);
  CHECK(r.items[0].key == "match");
  CHECK(r.items[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.items[0].score <= 1.0);
}

TEST_CASE("query with k >= size returns the full ranking") {
  Rng rng(4);
  EmbeddingIndex index(5);
  for (int i = 0; i < 7; ++i) index.add("k" + std::to_string(i), random_unit(rng, 5));
  const Tensor q = random_unit(rng, 5);

  RankedResult all = query_index(index, q, 7);
  CHECK(all.items.size() == 7);
  RankedResult more = query_index(index, q, 99);
  CHECK(more.items.size() == 7);

  std::set<std::string> keys;
  for (const ScoredKey& s : all.items) keys.insert(s.key);
  CHECK(keys.size() == 7);
}

TEST_CASE("query matches a hand-computed ranking of 2-d vectors") {
  EmbeddingIndex index(2);
  index.add("a", unit2(1.0, 0.0));    // cos = 1.0
  index.add("b", unit2(1.0, 1.0));    // cos ~ 0.7071
  index.add("c", unit2(0.0, 1.0));    // cos = 0.0
  index.add("d", unit2(-1.0, 1.0));   // cos ~ -0.7071
  index.add("e", unit2(1.0, -0.5));   // cos ~ 0.8944

  RankedResult r = query_index(index, Tensor({2}, {1.0, 0.0}), 3);
  REQUIRE(r.items.size() == 3);
  CHECK(r.items[0].key == "a");
  CHECK(r.items[1].key == "e");
  CHECK(r.items[2].key == "b");
  CHECK(r.items[1].score == doctest::Approx(std::sqrt(0.8)).epsilon(1e-6));
}

TEST_CASE("query validates inputs") {
  EmbeddingIndex empty(4);
  CHECK_THROWS_AS(query_index(empty, Tensor({4}, {1, 0, 0, 0}), 1), DataError);

  EmbeddingIndex index(4);
  index.add("x", Tensor({4}, {1.0, 0.0, 0.0, 0.0}));
  CHECK_THROWS_AS(query_index(index, Tensor({3}, {1, 0, 0}), 1), ShapeError);
  CHECK_THROWS_AS(query_index(index, Tensor({4}, {1, 0, 0, 0}), 0), ConfigError);
}

TEST_CASE("query equals a naive full sort on random indexes, ties included") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t dim = 2 + rng.below(7);
    const size_t count = 1 + rng.below(20);
    EmbeddingIndex index(dim);
    Tensor shared = random_unit(rng, dim);
    for (size_t i = 0; i < count; ++i) {
      // every third entry duplicates a shared vector to force score ties
      Tensor v = (i % 3 == 0) ? shared : random_unit(rng, dim);
      index.add("key" + std::to_string(100 + i), v);
    }
    const Tensor q = random_unit(rng, dim);
    const size_t k = 1 + rng.below(count + 3);

    const RankedResult got = query_index(index, q, k);
    const std::vector<ScoredKey> want = naive_topk(index, q, k);
    REQUIRE(got.items.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
      CHECK(got.items[i].key == want[i].key);
      CHECK(got.items[i].score == want[i].score);
      CHECK(got.items[i].score >= -1.0);
      CHECK(got.items[i].score <= 1.0);
    }

    // scores never increase down the ranking
    for (size_t i = 1; i < got.items.size(); ++i) {
      CHECK(got.items[i - 1].score >= got.items[i].score);
    }

    // the k ranking is a prefix of the k+1 ranking
    const RankedResult longer = query_index(index, q, k + 1);
    for (size_t i = 0; i < got.items.size(); ++i) {
      CHECK(longer.items[i].key == got.items[i].key);
    }
  }
}

TEST_CASE("index persistence round trips bit-exactly and validates format") {
  TinyWorld w = tiny_world(3);
  EmbeddingIndex index = build_index(w.corpus, w.split.pool, w.ckpt);
  const std::string tmp =
      (std::filesystem::temp_directory_path() / "ragtts_index_test.caei").string();

  save_index(index, tmp);
  EmbeddingIndex loaded = load_index(tmp);
  CHECK(index_to_string(loaded) == index_to_string(index));
  CHECK(loaded.size() == index.size());
  for (size_t i = 0; i < index.size(); ++i) {
    CHECK(loaded.entries()[i].key == index.entries()[i].key);
    CHECK(loaded.entries()[i].vec == index.entries()[i].vec);
  }

  // save -> load -> save produces the same file bytes
  save_index(loaded, tmp);
  CHECK(read_text_file(tmp) == index_to_string(index));

  std::string bytes = index_to_string(index);
  bytes[1] = 'X';
  write_text_file(tmp, bytes);
  CHECK_THROWS_AS(load_index(tmp), FormatError);

  write_text_file(tmp, index_to_string(index).substr(0, 30));
  CHECK_THROWS_AS(load_index(tmp), FormatError);

  // an index file declaring zero entries is rejected
  EmbeddingIndex tiny(2);
  tiny.add("only", Tensor({2}, {1.0, 0.0}));
  std::string empty_bytes = index_to_string(tiny);
  // count field lives after magic(4) + version(4) + dim(4)
  for (int b = 0; b < 8; ++b) empty_bytes[12 + b] = 0;
  empty_bytes.resize(12 + 8);
  write_text_file(tmp, empty_bytes);
  CHECK_THROWS_AS(load_index(tmp), FormatError);

  std::filesystem::remove(tmp);
}

TEST_CASE("a seeded index has a stable content hash") {
  Rng rng(12);
  EmbeddingIndex index(6);
  for (int i = 0; i < 100; ++i) index.add("key" + std::to_string(i), random_unit(rng, 6));

  Rng rng2(12);
  EmbeddingIndex again(6);
  for (int i = 0; i < 100; ++i) again.add("key" + std::to_string(i), random_unit(rng2, 6));

  CHECK(bytes_hash_hex(index_to_string(index)) == bytes_hash_hex(index_to_string(again)));
}
