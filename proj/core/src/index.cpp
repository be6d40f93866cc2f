#include "ragtts/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "ragtts/errors.hpp"

namespace ragtts {

// Index file: magic "CAEI", u32 version, u32 dim, u64 count, then per entry
// u16 key length, UTF-8 key, dim little-endian f32 values.

namespace {

constexpr char kMagic[5] = "CAEI";
constexpr uint32_t kVersion = 1;
constexpr double kNormTolerance = 1e-5;
constexpr size_t kMaxDim = 1u << 16;

}  // namespace

bool EmbeddingIndex::contains(const std::string& key) const { return keys_.count(key) != 0; }

void EmbeddingIndex::add(const std::string& key, const Tensor& unit_vec) {
  if (unit_vec.rank() != 1 || unit_vec.dim(0) != dim_) {
    throw ShapeError("index entry dimension mismatch");
  }
  if (!keys_.insert(key).second) throw DataError("duplicate index key: " + key);
  IndexEntry e;
  e.key = key;
  e.vec.resize(dim_);
  for (size_t i = 0; i < dim_; ++i) e.vec[i] = static_cast<float>(unit_vec[i]);
  entries_.push_back(std::move(e));
}

EmbeddingIndex build_index(const Corpus& corpus, const std::vector<size_t>& pool,
                           const Checkpoint& ckpt) {
  if (pool.empty()) throw DataError("cannot build an index from an empty pool");
  EmbeddingIndex index(static_cast<size_t>(ckpt.config.proj_dim));
  for (size_t idx : pool) {
    const Utterance& u = corpus.at_index(idx);
    index.add(make_key(u.book_id, u.position), encode_audio(ckpt, u.audio));
  }
  return index;
}

RankedResult query_index(const EmbeddingIndex& index, const Tensor& query, size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (index.size() == 0) throw DataError("query against an empty index");
  if (query.rank() != 1 || query.dim(0) != index.dim()) {
    throw ShapeError("query dimension does not match index");
  }

  RankedResult result;
  result.items.reserve(index.size());
  for (const IndexEntry& e : index.entries()) {
    double s = 0.0;
    for (size_t i = 0; i < index.dim(); ++i) s += query[i] * static_cast<double>(e.vec[i]);
    s = std::clamp(s, -1.0, 1.0);
    result.items.push_back({e.key, s});
  }
  std::sort(result.items.begin(), result.items.end(), [](const ScoredKey& a, const ScoredKey& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
  });
  if (result.items.size() > k) result.items.resize(k);
  return result;
}

namespace {

void write_index_stream(std::ostream& os, const EmbeddingIndex& index) {
  io::write_bytes(os, kMagic, 4);
  io::write_le<uint32_t>(os, kVersion);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(index.dim()));
  io::write_le<uint64_t>(os, index.size());
  for (const IndexEntry& e : index.entries()) {
    io::write_le<uint16_t>(os, static_cast<uint16_t>(e.key.size()));
    io::write_bytes(os, e.key.data(), e.key.size());
    for (float v : e.vec) io::write_f32(os, v);
  }
}

EmbeddingIndex read_index_stream(std::istream& is) {
  io::expect_magic(is, kMagic, "index");
  const uint32_t version = io::read_le<uint32_t>(is, "index version");
  if (version != kVersion) {
    throw FormatError("unsupported index version " + std::to_string(version));
  }
  const uint32_t dim = io::read_le<uint32_t>(is, "index dim");
  if (dim == 0 || dim > kMaxDim) throw FormatError("index dimension out of range");
  const uint64_t count = io::read_le<uint64_t>(is, "index count");
  if (count == 0) throw FormatError("index file has no entries");

  EmbeddingIndex index(dim);
  std::set<std::string> seen;
  for (uint64_t i = 0; i < count; ++i) {
    const uint16_t key_len = io::read_le<uint16_t>(is, "entry key length");
    std::string key(key_len, '\0');
    io::read_bytes(is, key.data(), key_len, "entry key");
    if (!seen.insert(key).second) throw FormatError("duplicate key in index file: " + key);

    Tensor v({dim});
    double norm2 = 0.0;
    for (uint32_t d = 0; d < dim; ++d) {
      const float f = io::read_f32(is, "entry vector");
      if (!std::isfinite(f)) throw FormatError("non-finite value in index entry " + key);
      v[d] = static_cast<double>(f);
      norm2 += v[d] * v[d];
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > 1e-3)) throw FormatError("near-zero vector in index entry " + key);
    // Repair drifted norms; healthy files (|norm-1| <= 1e-5) round-trip bit-exactly.
    if (std::fabs(norm - 1.0) > kNormTolerance) {
      for (uint32_t d = 0; d < dim; ++d) v[d] /= norm;
    }
    index.add(key, v);
  }
  io::expect_eof(is, "index");
  return index;
}

}  // namespace

void save_index(const EmbeddingIndex& index, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open index for writing: " + path);
  write_index_stream(f, index);
  if (!f) throw DataError("failed writing index: " + path);
}

EmbeddingIndex load_index(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open index: " + path);
  return read_index_stream(f);
}

std::string index_to_string(const EmbeddingIndex& index) {
  std::ostringstream os(std::ios::binary);
  write_index_stream(os, index);
  return os.str();
}

}  // namespace ragtts
