#pragma once

#include <set>
#include <string>
#include <vector>

#include "ragtts/corpus.hpp"
#include "ragtts/model.hpp"

namespace ragtts {

// Persistent speech-embedding database. Entries keep corpus order, keys are
// unique, vectors are unit-norm and stored single precision.
struct IndexEntry {
  std::string key;
  std::vector<float> vec;
};

class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(size_t dim) : dim_(dim) {}

  size_t dim() const { return dim_; }
  size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  bool contains(const std::string& key) const;

  void add(const std::string& key, const Tensor& unit_vec);  // throws DataError on duplicates

 private:
  size_t dim_;
  std::vector<IndexEntry> entries_;
  std::set<std::string> keys_;
};

struct ScoredKey {
  std::string key;
  double score;  // cosine, clamped to [-1, 1]
};

// Descending score, ties broken by ascending key; length min(k, index size).
struct RankedResult {
  std::vector<ScoredKey> items;
};

EmbeddingIndex build_index(const Corpus& corpus, const std::vector<size_t>& pool,
                           const Checkpoint& ckpt);

// Exact brute-force cosine top-k. k > size returns the full ranking.
RankedResult query_index(const EmbeddingIndex& index, const Tensor& query, size_t k);

void save_index(const EmbeddingIndex& index, const std::string& path);
EmbeddingIndex load_index(const std::string& path);
std::string index_to_string(const EmbeddingIndex& index);

}  // namespace ragtts
