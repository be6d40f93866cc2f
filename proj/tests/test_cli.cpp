#include <doctest.h>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "ragtts/cli.hpp"
#include "ragtts/report.hpp"

using namespace ragtts;
namespace fs = std::filesystem;

namespace {

struct CaptureOut {
  CaptureOut() : old(std::cout.rdbuf(buffer.rdbuf())) {}
  ~CaptureOut() { std::cout.rdbuf(old); }
  std::string str() const { return buffer.str(); }
  std::ostringstream buffer;
  std::streambuf* old;
};

struct TempTree {
  TempTree() : root(fs::temp_directory_path() / ("ragtts_cli_" + std::to_string(counter++))) {
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }
  std::string path(const std::string& sub) const { return (root / sub).string(); }
  fs::path root;
  static inline int counter = 0;
};

int cli(std::initializer_list<std::string> args) {
  return run_cli(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("corpus-gen writes artifacts, config echo, and hashes") {
  TempTree tmp;
  CaptureOut quiet;
  const int rc = cli({"corpus-gen", "--books", "2", "--utterances-per-book", "8", "--vocab",
                      "32", "--styles", "3", "--channels", "6", "--seed", "3", "--out",
                      tmp.path("c")});
  CHECK(rc == 0);
  CHECK(fs::exists(tmp.path("c") + "/corpus.jsonl"));
  CHECK(fs::exists(tmp.path("c") + "/effective.cfg"));
  CHECK(fs::exists(tmp.path("c") + "/hashes.txt"));

  // the config echo carries flag values but never the output path
  const std::string cfg = read_text_file(tmp.path("c") + "/effective.cfg");
  CHECK(cfg.find("books=2") != std::string::npos);
  CHECK(cfg.find("seed=3") != std::string::npos);
  CHECK(cfg.find(tmp.path("c")) == std::string::npos);

  // rerunning into another directory reproduces the corpus bytes
  CaptureOut quiet2;
  cli({"corpus-gen", "--books", "2", "--utterances-per-book", "8", "--vocab", "32", "--styles",
       "3", "--channels", "6", "--seed", "3", "--out", tmp.path("c2")});
  CHECK(read_text_file(tmp.path("c") + "/corpus.jsonl") ==
        read_text_file(tmp.path("c2") + "/corpus.jsonl"));
  CHECK(read_text_file(tmp.path("c") + "/hashes.txt") ==
        read_text_file(tmp.path("c2") + "/hashes.txt"));
}

TEST_CASE("exit codes distinguish usage, data, and model failures") {
  TempTree tmp;
  CaptureOut quiet;

  // unknown flag -> usage
  CHECK(cli({"corpus-gen", "--bogus-flag", "1", "--out", tmp.path("x")}) == 1);
  // invalid config value -> usage
  CHECK(cli({"corpus-gen", "--books", "0", "--out", tmp.path("x")}) == 1);
  // missing corpus file -> data
  CHECK(cli({"train", "--corpus", tmp.path("missing.jsonl"), "--out", tmp.path("t")}) == 2);
  // no subcommand -> usage
  CHECK(cli({}) == 1);
}

TEST_CASE("the full recipe runs, retrieves, and evaluates deterministically") {
  TempTree tmp;
  CaptureOut quiet;

  REQUIRE(cli({"corpus-gen", "--books", "3", "--utterances-per-book", "16", "--vocab", "32",
               "--styles", "3", "--channels", "6", "--seed", "5", "--out",
               tmp.path("c")}) == 0);
  const std::string corpus = tmp.path("c") + "/corpus.jsonl";

  REQUIRE(cli({"train", "--corpus", corpus, "--l", "1", "--epochs", "4", "--batch", "8",
               "--embed-dim", "12", "--audio-hidden", "12", "--proj-dim", "6", "--holdout",
               "4", "--seed", "5", "--out", tmp.path("t")}) == 0);
  const std::string ckpt = tmp.path("t") + "/checkpoint.cack";

  REQUIRE(cli({"index-build", "--corpus", corpus, "--checkpoint", ckpt, "--book", "b0000",
               "--holdout", "4", "--out", tmp.path("i")}) == 0);
  CHECK(fs::exists(tmp.path("i") + "/index.caei"));

  // retrieve prints k ranked lines "key<TAB>score"
  std::string retrieve_out;
  {
    CaptureOut capture;
    REQUIRE(cli({"retrieve", "--corpus", corpus, "--checkpoint", ckpt, "--index",
                 tmp.path("i") + "/index.caei", "--book", "b0000", "--position", "13", "--k",
                 "5", "--l", "1", "--out", tmp.path("r")}) == 0);
    retrieve_out = capture.str();
  }
  size_t lines = 0;
  std::istringstream is(retrieve_out);
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) {
      ++lines;
      CHECK(line.find('\t') != std::string::npos);
    }
  }
  CHECK(lines == 5);

  REQUIRE(cli({"eval-retrieval", "--corpus", corpus, "--checkpoint", ckpt, "--l", "1",
               "--holdout", "4", "--out", tmp.path("er")}) == 0);
  CHECK(fs::exists(tmp.path("er") + "/retrieval_report.jsonl"));
  CHECK(fs::exists(tmp.path("er") + "/summary.txt"));

  REQUIRE(cli({"eval-tts", "--corpus", corpus, "--checkpoint", ckpt, "--strategy", "caclap",
               "--k", "5", "--p", "2", "--l", "1", "--holdout", "4", "--seed", "5", "--out",
               tmp.path("et")}) == 0);
  CHECK(fs::exists(tmp.path("et") + "/tts_report.jsonl"));

  // identical seeds and inputs give byte-identical reports
  REQUIRE(cli({"eval-tts", "--corpus", corpus, "--checkpoint", ckpt, "--strategy", "caclap",
               "--k", "5", "--p", "2", "--l", "1", "--holdout", "4", "--seed", "5", "--out",
               tmp.path("et2")}) == 0);
  CHECK(read_text_file(tmp.path("et") + "/tts_report.jsonl") ==
        read_text_file(tmp.path("et2") + "/tts_report.jsonl"));
  CHECK(read_text_file(tmp.path("et") + "/hashes.txt") ==
        read_text_file(tmp.path("et2") + "/hashes.txt"));
}

TEST_CASE("eval-tts with the self strategy and identity synthesizer is a fixed point") {
  TempTree tmp;
  CaptureOut quiet;

  REQUIRE(cli({"corpus-gen", "--books", "2", "--utterances-per-book", "12", "--vocab", "32",
               "--styles", "3", "--channels", "6", "--seed", "8", "--out",
               tmp.path("c")}) == 0);
  const std::string corpus = tmp.path("c") + "/corpus.jsonl";
  REQUIRE(cli({"train", "--corpus", corpus, "--l", "1", "--epochs", "1", "--batch", "4",
               "--embed-dim", "8", "--audio-hidden", "8", "--proj-dim", "4", "--holdout", "3",
               "--seed", "8", "--out", tmp.path("t")}) == 0);

  REQUIRE(cli({"eval-tts", "--corpus", corpus, "--checkpoint",
               tmp.path("t") + "/checkpoint.cack", "--strategy", "self", "--synthesizer",
               "identity", "--holdout", "3", "--l", "1", "--out", tmp.path("e")}) == 0);

  // every item reports mcd = 0 and secs = 1 under the identity backend
  const std::string report = read_text_file(tmp.path("e") + "/tts_report.jsonl");
  std::istringstream is(report);
  size_t items = 0;
  for (std::string line; std::getline(is, line);) {
    if (line.find("\"record\":\"item\"") == std::string::npos) continue;
    ++items;
    CHECK(line.find("\"mcd\":0.0") != std::string::npos);
    CHECK(line.find("\"secs\":1.0") != std::string::npos);
  }
  CHECK(items == 6);
}

TEST_CASE("ablation commands emit tables, plots, and row-complete results") {
  TempTree tmp;
  CaptureOut quiet;

  REQUIRE(cli({"corpus-gen", "--books", "2", "--utterances-per-book", "16", "--vocab", "32",
               "--styles", "3", "--channels", "6", "--seed", "4", "--out",
               tmp.path("c")}) == 0);
  const std::string corpus = tmp.path("c") + "/corpus.jsonl";

  REQUIRE(cli({"ablate-context", "--corpus", corpus, "--l-values", "0,1", "--control-l", "1",
               "--epochs", "2", "--batch", "8", "--embed-dim", "8", "--audio-hidden", "8",
               "--proj-dim", "4", "--holdout", "4", "--seed", "4", "--out",
               tmp.path("ac")}) == 0);
  CHECK(fs::exists(tmp.path("ac") + "/context_table.txt"));
  CHECK(fs::exists(tmp.path("ac") + "/context_table.jsonl"));
  CHECK(fs::exists(tmp.path("ac") + "/context_plot.svg"));
  const std::string table = read_text_file(tmp.path("ac") + "/context_table.txt");
  CHECK(table.find("random@1") != std::string::npos);  // the shuffled control row

  REQUIRE(cli({"train", "--corpus", corpus, "--l", "1", "--epochs", "2", "--batch", "8",
               "--embed-dim", "8", "--audio-hidden", "8", "--proj-dim", "4", "--holdout", "4",
               "--seed", "4", "--out", tmp.path("t")}) == 0);
  REQUIRE(cli({"ablate-prompt-count", "--corpus", corpus, "--checkpoint",
               tmp.path("t") + "/checkpoint.cack", "--p-values", "1,2", "--k", "4", "--l", "1",
               "--holdout", "4", "--seed", "4", "--out", tmp.path("ap")}) == 0);
  const std::string ptable = read_text_file(tmp.path("ap") + "/prompt_table.jsonl");
  for (const char* strategy : {"random", "textonly", "caclap"}) {
    for (const char* p : {"\"p\":1", "\"p\":2"}) {
      // every (P, strategy) row is present
      bool found = false;
      std::istringstream rows(ptable);
      for (std::string line; std::getline(rows, line);) {
        if (line.find(p) != std::string::npos && line.find(strategy) != std::string::npos) {
          found = true;
        }
      }
      CHECK(found);
    }
  }
  CHECK(fs::exists(tmp.path("ap") + "/prompt_plot.svg"));
}

TEST_CASE("a run is replayable from its effective config alone") {
  TempTree tmp;
  CaptureOut quiet;
  REQUIRE(cli({"corpus-gen", "--books", "2", "--utterances-per-book", "8", "--vocab", "32",
               "--styles", "3", "--channels", "6", "--seed", "12", "--out",
               tmp.path("c")}) == 0);
  // replay with the echoed config; only the output directory is new
  REQUIRE(cli({"corpus-gen", "--config", tmp.path("c") + "/effective.cfg", "--out",
               tmp.path("c2")}) == 0);
  CHECK(read_text_file(tmp.path("c") + "/corpus.jsonl") ==
        read_text_file(tmp.path("c2") + "/corpus.jsonl"));
  CHECK(read_text_file(tmp.path("c") + "/effective.cfg") ==
        read_text_file(tmp.path("c2") + "/effective.cfg"));
}
