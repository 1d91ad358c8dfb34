#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gasc/config.hpp"

namespace gasc {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNumerical = 2, kExitDegenerate = 3 };

// Options shared by every command. Flags override config-file values.
struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::string> variant;
  std::optional<std::string> preset;
  std::optional<int> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> target;
};

// Loads the config file (if any) and applies flag overrides.
RunConfig resolve_config(const CommonArgs& args);

struct FitArgs {
  CommonArgs common;
  std::string corpus;
};

// Writes checkpoint.json, trace.csv and manifest.json to common.out.
void cmd_fit(const FitArgs& args);

struct SimulateArgs {
  CommonArgs common;
  int T = 5;
  int G = 2;
  int V = 50;
  int snippets_per_cell = 200;
  int snippet_length = 0;  // 0 selects 2W
};

// Writes corpus.jsonl, truth.json, annotations.csv and manifest.json. The
// target lemma sits between the two halves of every synthetic context and
// every snippet becomes one collocates annotation labelled by its true sense.
void cmd_simulate(const SimulateArgs& args);

struct SweepArgs {
  CommonArgs common;
  std::string corpus;
  std::vector<int> k_values;
  int folds = 5;
  std::vector<std::string> variants = {"gasc", "scan"};
};

// Writes sweep_folds.csv, sweep_summary.csv and manifest.json.
void cmd_sweep_k(const SweepArgs& args);

struct EvalTruthArgs {
  CommonArgs common;
  std::string checkpoint;
  std::string annotations;
  std::string stopwords;
  std::string corpus;  // optional, enables sense_evolution.csv
};

// Writes eval_report.json, eval_pairs.csv, conf_matrix.csv, top_words.csv,
// expert_evolution.csv and, with a corpus, sense_evolution.csv. Throws
// DegenerateEvaluation after writing when no expert sense is matched.
void cmd_eval_truth(const EvalTruthArgs& args);

struct CorrelateArgs {
  CommonArgs common;
  std::string annotations;
  bool collocates_only = false;
};

// Writes correlations.csv and manifest.json.
void cmd_correlate(const CorrelateArgs& args);

struct ValidateArgs {
  CommonArgs common;
  int T = 3;
  int G = 2;
  int V = 5;
  int K = 2;  // used unless --k is given
  int n_forward = 10000;
  int n_gibbs = 10000;
  bool corrupt = false;
};

// Writes geweke.csv and manifest.json.
void cmd_validate(const ValidateArgs& args);

std::string sha256_file(const std::string& path);

// Parses argv, runs one command and maps exceptions to exit codes.
int run_cli(int argc, char** argv);

}  // namespace gasc
