#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "ragtts/errors.hpp"
#include "ragtts/model.hpp"

namespace ragtts {

// Checkpoint file: magic "CACK", u32 version, config block, u64 step count,
// then per tensor: u16 name length, name, u8 rank, u32 dims, f64 payload.
// All integers and floats little-endian. The temperature is stored inside
// the tensor list as "log_tau".

namespace {

constexpr char kMagic[5] = "CACK";
constexpr uint32_t kVersion = 1;
constexpr size_t kMaxTensorElems = 1u << 28;

void write_config(std::ostream& os, const CaClapConfig& c) {
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.vocab_size));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.channels));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.embed_dim));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.audio_hidden));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.proj_dim));
  io::write_f64(os, c.tau_init);
  io::write_f64(os, c.learning_rate);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.epochs));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.batch_size));
  io::write_le<uint64_t>(os, c.seed);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.context_len));
  io::write_le<uint32_t>(os, static_cast<uint32_t>(c.holdout_per_book));
  io::write_le<uint8_t>(os, c.same_book_batches ? 1 : 0);
}

CaClapConfig read_config(std::istream& is) {
  CaClapConfig c;
  c.vocab_size = static_cast<int>(io::read_le<uint32_t>(is, "config vocab_size"));
  c.channels = static_cast<int>(io::read_le<uint32_t>(is, "config channels"));
  c.embed_dim = static_cast<int>(io::read_le<uint32_t>(is, "config embed_dim"));
  c.audio_hidden = static_cast<int>(io::read_le<uint32_t>(is, "config audio_hidden"));
  c.proj_dim = static_cast<int>(io::read_le<uint32_t>(is, "config proj_dim"));
  c.tau_init = io::read_f64(is, "config tau_init");
  c.learning_rate = io::read_f64(is, "config learning_rate");
  c.epochs = static_cast<int>(io::read_le<uint32_t>(is, "config epochs"));
  c.batch_size = static_cast<int>(io::read_le<uint32_t>(is, "config batch_size"));
  c.seed = io::read_le<uint64_t>(is, "config seed");
  c.context_len = static_cast<int>(io::read_le<uint32_t>(is, "config context_len"));
  c.holdout_per_book = static_cast<int>(io::read_le<uint32_t>(is, "config holdout"));
  c.same_book_batches = io::read_le<uint8_t>(is, "config batching flag") != 0;
  return c;
}

void write_checkpoint_stream(std::ostream& os, const Checkpoint& ckpt) {
  io::write_bytes(os, kMagic, 4);
  io::write_le<uint32_t>(os, kVersion);
  write_config(os, ckpt.config);
  io::write_le<uint64_t>(os, ckpt.train_steps);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(ckpt.params.count()));
  for (size_t i = 0; i < ckpt.params.count(); ++i) {
    const std::string& name = ckpt.params.names()[i];
    const Tensor& t = ckpt.params.value_at(i);
    io::write_le<uint16_t>(os, static_cast<uint16_t>(name.size()));
    io::write_bytes(os, name.data(), name.size());
    io::write_le<uint8_t>(os, static_cast<uint8_t>(t.rank()));
    for (size_t d = 0; d < t.rank(); ++d) {
      io::write_le<uint32_t>(os, static_cast<uint32_t>(t.dim(d)));
    }
    for (size_t e = 0; e < t.size(); ++e) io::write_f64(os, t[e]);
  }
}

Checkpoint read_checkpoint_stream(std::istream& is) {
  io::expect_magic(is, kMagic, "checkpoint");
  const uint32_t version = io::read_le<uint32_t>(is, "checkpoint version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config = read_config(is);
  ckpt.train_steps = io::read_le<uint64_t>(is, "train steps");
  const uint32_t count = io::read_le<uint32_t>(is, "tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = io::read_le<uint16_t>(is, "tensor name length");
    std::string name(name_len, '\0');
    io::read_bytes(is, name.data(), name_len, "tensor name");
    const uint8_t rank = io::read_le<uint8_t>(is, "tensor rank");
    if (rank < 1 || rank > 3) throw FormatError("tensor rank out of range in " + name);
    std::vector<size_t> shape(rank);
    size_t total = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      shape[d] = io::read_le<uint32_t>(is, "tensor dim");
      if (shape[d] == 0) throw FormatError("zero tensor dimension in " + name);
      total *= shape[d];
      if (total > kMaxTensorElems) throw FormatError("tensor too large in " + name);
    }
    std::vector<double> data(total);
    for (size_t e = 0; e < total; ++e) {
      data[e] = io::read_f64(is, "tensor payload");
      if (!std::isfinite(data[e])) throw FormatError("non-finite value in tensor " + name);
    }
    ckpt.params.add(name, Tensor(std::move(shape), std::move(data)));
  }
  io::expect_eof(is, "checkpoint");
  if (!ckpt.params.has("log_tau")) throw FormatError("checkpoint is missing log_tau");
  return ckpt;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  write_checkpoint_stream(f, ckpt);
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  return read_checkpoint_stream(f);
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint_stream(os, ckpt);
  return os.str();
}

}  // namespace ragtts
