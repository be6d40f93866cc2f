#include "ragtts/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ragtts/corpus.hpp"
#include "ragtts/errors.hpp"
#include "ragtts/index.hpp"
#include "ragtts/metrics.hpp"
#include "ragtts/model.hpp"
#include "ragtts/pipeline.hpp"
#include "ragtts/report.hpp"
#include "ragtts/rng.hpp"

namespace ragtts {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Per-run artifact bookkeeping: every command echoes its effective config and
// a content-hash listing into the output directory, so a run can be replayed
// and compared byte-for-byte.
class RunDir {
 public:
  explicit RunDir(std::string out) : out_(std::move(out)) {
    fs::create_directories(out_);
  }

  const std::string& path() const { return out_; }

  std::string file(const std::string& name) const { return out_ + "/" + name; }

  void write(const std::string& name, const std::string& content) {
    write_text_file(file(name), content);
    names_.push_back(name);
  }

  void note(const std::string& name) { names_.push_back(name); }

  void finish(const CLI::App& app) {
    std::string cfg = app.config_to_str(true, false);
    write("effective.cfg", cfg);
    std::string hashes;
    for (const std::string& name : names_) {
      hashes += file_hash_hex(file(name)) + "  " + name + "\n";
    }
    write_text_file(file("hashes.txt"), hashes);
  }

 private:
  std::string out_;
  std::vector<std::string> names_;
};

struct CommonArgs {
  uint64_t seed = 1;
  std::string out = "run";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--seed", args.seed, "global random seed")->capture_default_str();
  cmd->add_option("--out", args.out, "output directory")
      ->capture_default_str()
      ->configurable(false);
}

// Defaults are the desk-scale operating point: smaller contrastive batches
// trade negatives for step count, which plain SGD needs here.
struct TrainArgs {
  int embed_dim = 32;
  int audio_hidden = 32;
  int proj_dim = 16;
  double tau_init = 0.3;
  double lr = 0.1;
  int epochs = 100;
  int batch = 16;
  int l = 5;
  int holdout = 8;
  bool same_book_batches = false;
};

void add_train_options(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--embed-dim", args.embed_dim, "shared feature width d")
      ->capture_default_str();
  cmd->add_option("--audio-hidden", args.audio_hidden, "audio encoder width")
      ->capture_default_str();
  cmd->add_option("--proj-dim", args.proj_dim, "embedding dimension p")->capture_default_str();
  cmd->add_option("--tau-init", args.tau_init, "initial temperature")->capture_default_str();
  cmd->add_option("--lr", args.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--epochs", args.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--batch", args.batch, "contrastive batch size N")->capture_default_str();
  cmd->add_option("--l", args.l, "context length")->capture_default_str();
  cmd->add_option("--holdout", args.holdout, "test utterances per book")->capture_default_str();
  cmd->add_flag("--same-book-batches", args.same_book_batches,
                "keep training batches within books");
}

CaClapConfig to_model_config(const Corpus& corpus, const TrainArgs& t, uint64_t seed) {
  CaClapConfig cfg;
  cfg.vocab_size = corpus.manifest().vocab_size;
  cfg.channels = corpus.manifest().channels;
  cfg.embed_dim = t.embed_dim;
  cfg.audio_hidden = t.audio_hidden;
  cfg.proj_dim = t.proj_dim;
  cfg.tau_init = t.tau_init;
  cfg.learning_rate = t.lr;
  cfg.epochs = t.epochs;
  cfg.batch_size = t.batch;
  cfg.seed = seed;
  cfg.context_len = t.l;
  cfg.holdout_per_book = t.holdout;
  cfg.same_book_batches = t.same_book_batches;
  return cfg;
}

std::vector<size_t> book_pool(const Corpus& corpus, const CorpusSplit& split,
                              const std::string& book_id) {
  std::vector<size_t> pool;
  for (size_t idx : split.pool) {
    if (corpus.at_index(idx).book_id == book_id) pool.push_back(idx);
  }
  return pool;
}

// Indexes for generation-phase evaluation: one per book by default, or one
// global pool when cross-book retrieval is requested.
std::map<std::string, EmbeddingIndex> build_eval_indexes(const Corpus& corpus,
                                                         const CorpusSplit& split,
                                                         const Checkpoint& ckpt,
                                                         bool global_pool) {
  std::map<std::string, EmbeddingIndex> indexes;
  if (global_pool) {
    indexes.emplace("", build_index(corpus, split.pool, ckpt));
    return indexes;
  }
  for (const auto& [book_id, count] : corpus.manifest().books) {
    std::vector<size_t> pool = book_pool(corpus, split, book_id);
    if (!pool.empty()) indexes.emplace(book_id, build_index(corpus, pool, ckpt));
  }
  return indexes;
}

const EmbeddingIndex& eval_index_for(const std::map<std::string, EmbeddingIndex>& indexes,
                                     const std::string& book_id) {
  auto it = indexes.find(indexes.count("") ? "" : book_id);
  if (it == indexes.end()) {
    throw DataError("no retrieval pool available for book " + book_id);
  }
  return it->second;
}

std::string retrieval_summary_line(const RetrievalReport& r) {
  std::ostringstream os;
  os << "SIM=" << fmt6(r.sim) << " R@1=" << fmt6(r.r_at_1) << " R@5=" << fmt6(r.r_at_5)
     << " R@10=" << fmt6(r.r_at_10) << " mAP@10=" << fmt6(r.map_at_10);
  return os.str();
}

ordered_json retrieval_summary_json(const RetrievalReport& r) {
  ordered_json j;
  j["record"] = "retrieval_summary";
  j["sim"] = r.sim;
  j["r_at_1"] = r.r_at_1;
  j["r_at_5"] = r.r_at_5;
  j["r_at_10"] = r.r_at_10;
  j["map_at_10"] = r.map_at_10;
  return j;
}

std::string retrieval_report_jsonl(const RetrievalReport& r) {
  std::string out = retrieval_summary_json(r).dump() + "\n";
  for (const RetrievalItemResult& item : r.items) {
    ordered_json j;
    j["record"] = "item";
    j["key"] = item.key;
    j["rank"] = item.rank;
    j["sim"] = item.sim;
    out += j.dump() + "\n";
  }
  return out;
}

struct TtsRunOutput {
  TtsReport report;
  std::vector<PromptSelection> selections;
};

TtsRunOutput run_tts_over_split(const Corpus& corpus, const Checkpoint& ckpt,
                                const CorpusSplit& split,
                                const std::map<std::string, EmbeddingIndex>& indexes,
                                const Synthesizer& synth, const RagTtsOptions& base_options) {
  std::vector<std::string> keys;
  std::vector<AudioFeatures> outputs, truths;
  TtsRunOutput run;
  for (size_t idx : split.test) {
    const Utterance& u = corpus.at_index(idx);
    const EmbeddingIndex& index = eval_index_for(indexes, u.book_id);
    RagTtsResult item = run_rag_tts(corpus, ckpt, index, u, synth, base_options);
    keys.push_back(make_key(u.book_id, u.position));
    outputs.push_back(std::move(item.output));
    truths.push_back(u.audio);
    run.selections.push_back(std::move(item.selection));
  }
  run.report = tts_eval(keys, outputs, truths);
  return run;
}

std::string tts_report_jsonl(const TtsRunOutput& run, const std::string& strategy,
                             const std::string& synth_name) {
  ordered_json summary;
  summary["record"] = "tts_summary";
  summary["strategy"] = strategy;
  summary["synthesizer"] = synth_name;
  summary["energy_rmse"] = run.report.mean_energy_rmse;
  summary["f0_rmse"] = run.report.mean_f0_rmse;
  summary["mcd"] = run.report.mean_mcd;
  summary["secs"] = run.report.mean_secs;
  std::string out = summary.dump() + "\n";
  for (size_t i = 0; i < run.report.items.size(); ++i) {
    const TtsItemMetrics& m = run.report.items[i];
    const PromptSelection& sel = run.selections[i];
    ordered_json j;
    j["record"] = "item";
    j["key"] = m.key;
    ordered_json chosen = ordered_json::array();
    ordered_json scores = ordered_json::array();
    for (const std::string& k : sel.chosen) chosen.push_back(k);
    for (const ScoredKey& sk : sel.ranked.items) scores.push_back(sk.score);
    j["chosen"] = std::move(chosen);
    j["scores"] = std::move(scores);
    j["energy_rmse"] = m.energy_rmse;
    j["f0_rmse"] = m.f0_rmse;
    j["mcd"] = m.mcd;
    j["secs"] = m.secs;
    out += j.dump() + "\n";
  }
  return out;
}

std::string tts_summary_line(const TtsReport& r) {
  std::ostringstream os;
  os << "Energy=" << fmt6(r.mean_energy_rmse) << " F0=" << fmt6(r.mean_f0_rmse)
     << " MCD=" << fmt6(r.mean_mcd) << " SECS=" << fmt6(r.mean_secs);
  return os.str();
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
  std::vector<int> values;
  std::stringstream ss(csv);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      values.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ConfigError("bad " + what + " entry: " + part);
    }
  }
  if (values.empty()) throw ConfigError(what + " must not be empty");
  return values;
}

// ---- subcommand bodies -------------------------------------------------

int cmd_corpus_gen(const CommonArgs& common, const CorpusConfig& cc, const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = generate_corpus(cc);
  save_corpus(corpus, run.file("corpus.jsonl"));
  run.note("corpus.jsonl");
  run.finish(app);
  std::cout << "wrote " << run.file("corpus.jsonl") << ": " << corpus.manifest().books.size()
            << " books, " << corpus.size() << " utterances\n";
  return kExitOk;
}

int cmd_train(const CommonArgs& common, const std::string& corpus_path, const TrainArgs& targs,
              const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  CaClapConfig cfg = to_model_config(corpus, targs, common.seed);
  TrainResult result = train(corpus, cfg);
  save_checkpoint(result.checkpoint, run.file("checkpoint.cack"));
  run.note("checkpoint.cack");

  ordered_json summary;
  summary["record"] = "train_summary";
  summary["epochs"] = cfg.epochs;
  summary["steps"] = result.checkpoint.train_steps;
  summary["final_tau"] = result.checkpoint.tau();
  std::string report = summary.dump() + "\n";
  for (size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
    ordered_json j;
    j["record"] = "epoch";
    j["epoch"] = e;
    j["mean_loss"] = result.epoch_mean_loss[e];
    report += j.dump() + "\n";
  }
  run.write("train_report.jsonl", report);
  run.finish(app);

  if (!result.epoch_mean_loss.empty()) {
    std::cout << "trained " << cfg.epochs << " epochs, first-epoch loss "
              << fmt6(result.epoch_mean_loss.front()) << ", final-epoch loss "
              << fmt6(result.epoch_mean_loss.back()) << "\n";
  }
  std::cout << "wrote " << run.file("checkpoint.cack") << "\n";
  return kExitOk;
}

int cmd_index_build(const CommonArgs& common, const std::string& corpus_path,
                    const std::string& ckpt_path, const std::string& book, int holdout,
                    const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  CorpusSplit split = split_corpus(corpus, static_cast<size_t>(holdout));
  std::vector<size_t> pool = split.pool;
  if (!book.empty()) {
    corpus.book_size(book);  // NotFoundError for unknown books
    pool = book_pool(corpus, split, book);
  }
  EmbeddingIndex index = build_index(corpus, pool, ckpt);
  save_index(index, run.file("index.caei"));
  run.note("index.caei");
  run.finish(app);
  std::cout << "wrote " << run.file("index.caei") << ": " << index.size() << " entries, dim "
            << index.dim() << "\n";
  return kExitOk;
}

int cmd_retrieve(const CommonArgs& common, const std::string& corpus_path,
                 const std::string& ckpt_path, const std::string& index_path,
                 const std::string& book, size_t position, const std::string& strategy_name_arg,
                 size_t k, size_t l, const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  EmbeddingIndex index = load_index(index_path);
  const Strategy strategy = strategy_from_string(strategy_name_arg);
  if (strategy == Strategy::kSelf) {
    throw ConfigError("retrieve supports caclap, textonly, and random strategies");
  }
  const Utterance& u = corpus.at(book, position);
  RankedResult ranked = rank_prompts(corpus, ckpt, index, u, strategy, k, l, common.seed);

  std::string report;
  for (const ScoredKey& item : ranked.items) {
    ordered_json j;
    j["record"] = "candidate";
    j["key"] = item.key;
    j["score"] = item.score;
    report += j.dump() + "\n";
    std::cout << item.key << "\t" << fmt6(item.score) << "\n";
  }
  run.write("retrieve.jsonl", report);
  run.finish(app);
  return kExitOk;
}

int cmd_eval_retrieval(const CommonArgs& common, const std::string& corpus_path,
                       const std::string& ckpt_path, size_t l, int holdout, bool global_pool,
                       bool shuffled_context, const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  CorpusSplit split = split_corpus(corpus, static_cast<size_t>(holdout));

  RetrievalEvalOptions options;
  options.context_len = l;
  options.same_book_pool = !global_pool;
  options.context_mode = shuffled_context ? ContextMode::kShuffled : ContextMode::kTrue;
  options.shuffle_seed = common.seed;
  RetrievalReport report = retrieval_eval(ckpt, corpus, split, options);

  run.write("retrieval_report.jsonl", retrieval_report_jsonl(report));
  run.write("summary.txt", retrieval_summary_line(report) + "\n");
  run.finish(app);
  std::cout << retrieval_summary_line(report) << "\n";
  return kExitOk;
}

int cmd_eval_tts(const CommonArgs& common, const std::string& corpus_path,
                 const std::string& ckpt_path, const std::string& strategy_arg,
                 const std::string& synth_arg, size_t k, size_t p, size_t l, int holdout,
                 bool global_pool, const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  CorpusSplit split = split_corpus(corpus, static_cast<size_t>(holdout));
  const Strategy strategy = strategy_from_string(strategy_arg);
  std::unique_ptr<Synthesizer> synth = make_synthesizer(synth_arg);
  auto indexes = build_eval_indexes(corpus, split, ckpt, global_pool);

  RagTtsOptions options;
  options.context_len = l;
  options.k = k;
  options.p = p;
  options.strategy = strategy;
  options.random_seed = common.seed;
  TtsRunOutput out = run_tts_over_split(corpus, ckpt, split, indexes, *synth, options);

  run.write("tts_report.jsonl", tts_report_jsonl(out, strategy_arg, synth->name()));
  run.write("summary.txt", tts_summary_line(out.report) + "\n");
  run.finish(app);
  std::cout << strategy_arg << ": " << tts_summary_line(out.report) << "\n";
  return kExitOk;
}

int cmd_ablate_context(const CommonArgs& common, const std::string& corpus_path,
                       const std::string& l_values_csv, int control_l, const TrainArgs& targs,
                       const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  const std::vector<int> l_values = parse_int_list(l_values_csv, "l-values");
  for (int l : l_values) {
    if (l < 0) throw ConfigError("context lengths must be non-negative");
  }
  if (control_l < 0) throw ConfigError("control context length must be non-negative");

  // One model per context length, shared seed; the shuffled-context control
  // reuses the model trained at control_l and corrupts context at eval time.
  std::map<int, Checkpoint> models;
  std::vector<int> to_train = l_values;
  if (!std::count(to_train.begin(), to_train.end(), control_l)) to_train.push_back(control_l);
  for (int l : to_train) {
    TrainArgs t = targs;
    t.l = l;
    CaClapConfig cfg = to_model_config(corpus, t, common.seed);
    models.emplace(l, train(corpus, cfg).checkpoint);
  }

  CorpusSplit split = split_corpus(corpus, static_cast<size_t>(targs.holdout));
  std::string jsonl;
  std::string table = "l\tSIM\tR@1\tR@5\tR@10\tmAP@10\n";
  ChartSeries r1{"R@1", {}}, r5{"R@5", {}}, map10{"mAP@10", {}};
  auto eval_one = [&](int l, bool shuffled) {
    RetrievalEvalOptions options;
    options.context_len = static_cast<size_t>(l);
    options.context_mode = shuffled ? ContextMode::kShuffled : ContextMode::kTrue;
    options.shuffle_seed = common.seed;
    RetrievalReport r = retrieval_eval(models.at(l), corpus, split, options);
    ordered_json j = retrieval_summary_json(r);
    j["record"] = "row";
    j["l"] = l;
    j["control"] = shuffled;
    jsonl += j.dump() + "\n";
    table += (shuffled ? "random@" + std::to_string(l) : std::to_string(l)) + "\t" +
             fmt6(r.sim) + "\t" + fmt6(r.r_at_1) + "\t" + fmt6(r.r_at_5) + "\t" +
             fmt6(r.r_at_10) + "\t" + fmt6(r.map_at_10) + "\n";
    return r;
  };

  for (int l : l_values) {
    RetrievalReport r = eval_one(l, false);
    r1.points.emplace_back(l, r.r_at_1);
    r5.points.emplace_back(l, r.r_at_5);
    map10.points.emplace_back(l, r.map_at_10);
  }
  eval_one(control_l, true);

  run.write("context_table.jsonl", jsonl);
  run.write("context_table.txt", table);
  run.write("context_plot.svg",
            line_chart_svg("retrieval vs context length", "context length l", "score",
                           {r1, r5, map10}));
  run.finish(app);
  std::cout << table;
  return kExitOk;
}

int cmd_ablate_prompt_count(const CommonArgs& common, const std::string& corpus_path,
                            const std::string& ckpt_path, const std::string& p_values_csv,
                            size_t k, size_t l, int holdout, const std::string& synth_arg,
                            const CLI::App& app) {
  RunDir run(common.out);
  Corpus corpus = load_corpus(corpus_path);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::vector<int> p_values = parse_int_list(p_values_csv, "p-values");
  for (int p : p_values) {
    if (p < 1 || static_cast<size_t>(p) > k) {
      throw ConfigError("prompt counts must lie in 1..k");
    }
  }
  CorpusSplit split = split_corpus(corpus, static_cast<size_t>(holdout));
  std::unique_ptr<Synthesizer> synth = make_synthesizer(synth_arg);
  auto indexes = build_eval_indexes(corpus, split, ckpt, false);

  const std::vector<Strategy> strategies = {Strategy::kRandom, Strategy::kTextOnly,
                                            Strategy::kCaClap};

  // Shared retrieval: rank once per (item, strategy), then slice prefixes.
  std::map<std::string, std::vector<RankedResult>> rankings;
  for (const Strategy s : strategies) {
    std::vector<RankedResult> per_item;
    for (size_t idx : split.test) {
      const Utterance& u = corpus.at_index(idx);
      per_item.push_back(rank_prompts(corpus, ckpt, eval_index_for(indexes, u.book_id), u, s,
                                      k, l, common.seed));
    }
    rankings.emplace(strategy_name(s), std::move(per_item));
  }

  std::string jsonl;
  std::string table = "P\tstrategy\tEnergy\tMCD\tSECS\n";
  std::map<std::string, ChartSeries> secs_series;
  for (const Strategy s : strategies) secs_series[strategy_name(s)] = {strategy_name(s), {}};

  for (int p : p_values) {
    for (const Strategy s : strategies) {
      const std::string sname = strategy_name(s);
      std::vector<std::string> keys;
      std::vector<AudioFeatures> outputs, truths;
      for (size_t i = 0; i < split.test.size(); ++i) {
        const Utterance& u = corpus.at_index(split.test[i]);
        PromptSelection sel = select_prompts(rankings.at(sname)[i], static_cast<size_t>(p));
        AudioFeatures prompt = concat_prompts(sel, corpus);
        outputs.push_back(synth->synthesize(prompt, u.tokens));
        truths.push_back(u.audio);
        keys.push_back(make_key(u.book_id, u.position));
      }
      TtsReport r = tts_eval(keys, outputs, truths);
      ordered_json j;
      j["record"] = "row";
      j["p"] = p;
      j["strategy"] = sname;
      j["energy_rmse"] = r.mean_energy_rmse;
      j["f0_rmse"] = r.mean_f0_rmse;
      j["mcd"] = r.mean_mcd;
      j["secs"] = r.mean_secs;
      jsonl += j.dump() + "\n";
      table += std::to_string(p) + "\t" + sname + "\t" + fmt6(r.mean_energy_rmse) + "\t" +
               fmt6(r.mean_mcd) + "\t" + fmt6(r.mean_secs) + "\n";
      secs_series[sname].points.emplace_back(p, r.mean_secs);
    }
  }

  std::vector<ChartSeries> series;
  for (const Strategy s : strategies) series.push_back(secs_series[strategy_name(s)]);
  run.write("prompt_table.jsonl", jsonl);
  run.write("prompt_table.txt", table);
  run.write("prompt_plot.svg",
            line_chart_svg("SECS vs prompt count", "prompt count P", "SECS", series));
  run.finish(app);
  std::cout << table;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"retrieval-augmented speech-prompt selection testbed"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags override")
      ->configurable(false);

  CommonArgs common;

  // corpus-gen
  auto* gen = app.add_subcommand("corpus-gen", "generate a synthetic audiobook corpus");
  CorpusConfig cc;
  add_common(gen, common);
  gen->add_option("--books", cc.books, "number of books")->capture_default_str();
  gen->add_option("--utterances-per-book", cc.utterances_per_book, "utterances per book")
      ->capture_default_str();
  gen->add_option("--vocab", cc.vocab_size, "vocabulary size")->capture_default_str();
  gen->add_option("--styles", cc.style_count, "latent style count")->capture_default_str();
  gen->add_option("--channels", cc.channels, "audio feature channels")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train the dual encoder on a corpus");
  std::string train_corpus;
  TrainArgs targs;
  add_common(tr, common);
  tr->add_option("--corpus", train_corpus, "corpus file")->required();
  add_train_options(tr, targs);

  // index-build
  auto* ib = app.add_subcommand("index-build", "embed a retrieval pool into an index");
  std::string ib_corpus, ib_ckpt, ib_book;
  int ib_holdout = 8;
  add_common(ib, common);
  ib->add_option("--corpus", ib_corpus, "corpus file")->required();
  ib->add_option("--checkpoint", ib_ckpt, "model checkpoint")->required();
  ib->add_option("--book", ib_book, "restrict the pool to one book");
  ib->add_option("--holdout", ib_holdout, "test utterances per book")->capture_default_str();

  // retrieve
  auto* rt = app.add_subcommand("retrieve", "query an index for one utterance");
  std::string rt_corpus, rt_ckpt, rt_index, rt_book, rt_strategy = "caclap";
  size_t rt_position = 0, rt_k = 10, rt_l = 5;
  add_common(rt, common);
  rt->add_option("--corpus", rt_corpus, "corpus file")->required();
  rt->add_option("--checkpoint", rt_ckpt, "model checkpoint")->required();
  rt->add_option("--index", rt_index, "index file")->required();
  rt->add_option("--book", rt_book, "book id of the query utterance")->required();
  rt->add_option("--position", rt_position, "position of the query utterance")->required();
  rt->add_option("--strategy", rt_strategy, "caclap | textonly | random")
      ->capture_default_str();
  rt->add_option("--k", rt_k, "candidates to retrieve")->capture_default_str();
  rt->add_option("--l", rt_l, "context length")->capture_default_str();

  // eval-retrieval
  auto* er = app.add_subcommand("eval-retrieval", "retrieval metrics over the test split");
  std::string er_corpus, er_ckpt;
  size_t er_l = 5;
  int er_holdout = 8;
  bool er_global = false, er_shuffled = false;
  add_common(er, common);
  er->add_option("--corpus", er_corpus, "corpus file")->required();
  er->add_option("--checkpoint", er_ckpt, "model checkpoint")->required();
  er->add_option("--l", er_l, "context length")->capture_default_str();
  er->add_option("--holdout", er_holdout, "test utterances per book")->capture_default_str();
  er->add_flag("--global-pool", er_global, "rank against all books, not just the query's");
  er->add_flag("--shuffled-context", er_shuffled,
               "replace true neighbors with random same-book utterances");

  // eval-tts
  auto* et = app.add_subcommand("eval-tts", "end-to-end generation metrics");
  std::string et_corpus, et_ckpt, et_strategy = "caclap", et_synth = "stub";
  size_t et_k = 10, et_p = 1, et_l = 5;
  int et_holdout = 8;
  bool et_global = false;
  add_common(et, common);
  et->add_option("--corpus", et_corpus, "corpus file")->required();
  et->add_option("--checkpoint", et_ckpt, "model checkpoint")->required();
  et->add_option("--strategy", et_strategy, "caclap | textonly | random | self")
      ->capture_default_str();
  et->add_option("--synthesizer", et_synth, "stub | identity")->capture_default_str();
  et->add_option("--k", et_k, "candidates to retrieve")->capture_default_str();
  et->add_option("--p", et_p, "prompts to concatenate")->capture_default_str();
  et->add_option("--l", et_l, "context length")->capture_default_str();
  et->add_option("--holdout", et_holdout, "test utterances per book")->capture_default_str();
  et->add_flag("--global-pool", et_global, "retrieve across all books");

  // ablate-context
  auto* ac = app.add_subcommand("ablate-context", "retrieval vs context length sweep");
  std::string ac_corpus, ac_l_values = "0,1,3,5,7,10";
  int ac_control_l = 5;
  TrainArgs ac_targs;
  add_common(ac, common);
  ac->add_option("--corpus", ac_corpus, "corpus file")->required();
  ac->add_option("--l-values", ac_l_values, "comma-separated context lengths")
      ->capture_default_str();
  ac->add_option("--control-l", ac_control_l, "context length of the shuffled control row")
      ->capture_default_str();
  add_train_options(ac, ac_targs);

  // ablate-prompt-count
  auto* ap = app.add_subcommand("ablate-prompt-count", "TTS metrics vs prompt count sweep");
  std::string ap_corpus, ap_ckpt, ap_p_values = "1,2,3,4", ap_synth = "stub";
  size_t ap_k = 10, ap_l = 5;
  int ap_holdout = 8;
  add_common(ap, common);
  ap->add_option("--corpus", ap_corpus, "corpus file")->required();
  ap->add_option("--checkpoint", ap_ckpt, "model checkpoint")->required();
  ap->add_option("--p-values", ap_p_values, "comma-separated prompt counts")
      ->capture_default_str();
  ap->add_option("--k", ap_k, "candidates to retrieve")->capture_default_str();
  ap->add_option("--l", ap_l, "context length")->capture_default_str();
  ap->add_option("--holdout", ap_holdout, "test utterances per book")->capture_default_str();
  ap->add_option("--synthesizer", ap_synth, "stub | identity")->capture_default_str();

  try {
    app.parse(argc, argv);
    cc.seed = common.seed;
    if (gen->parsed()) return cmd_corpus_gen(common, cc, app);
    if (tr->parsed()) return cmd_train(common, train_corpus, targs, app);
    if (ib->parsed()) {
      return cmd_index_build(common, ib_corpus, ib_ckpt, ib_book, ib_holdout, app);
    }
    if (rt->parsed()) {
      return cmd_retrieve(common, rt_corpus, rt_ckpt, rt_index, rt_book, rt_position,
                          rt_strategy, rt_k, rt_l, app);
    }
    if (er->parsed()) {
      return cmd_eval_retrieval(common, er_corpus, er_ckpt, er_l, er_holdout, er_global,
                                er_shuffled, app);
    }
    if (et->parsed()) {
      return cmd_eval_tts(common, et_corpus, et_ckpt, et_strategy, et_synth, et_k, et_p, et_l,
                          et_holdout, et_global, app);
    }
    if (ac->parsed()) {
      return cmd_ablate_context(common, ac_corpus, ac_l_values, ac_control_l, ac_targs, app);
    }
    if (ap->parsed()) {
      return cmd_ablate_prompt_count(common, ap_corpus, ap_ckpt, ap_p_values, ap_k, ap_l,
                                     ap_holdout, ap_synth, app);
    }
    throw ConfigError("no subcommand selected");
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    std::cerr << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return kExitData;
  } catch (const ModelError& e) {
    std::cerr << "error: model: " << e.what() << "\n";
    return kExitModel;
  } catch (const Error& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return kExitUsage;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("ragtts");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ragtts
