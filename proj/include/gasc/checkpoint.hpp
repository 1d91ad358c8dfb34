#pragma once

#include <string>
#include <vector>

#include "gasc/corpus.hpp"
#include "gasc/inference.hpp"
#include "gasc/model.hpp"

namespace gasc {

// JSON checkpoints. Doubles are written in shortest round-trip form, so a
// reloaded checkpoint reproduces every array bit for bit. Malformed or
// unsupported files raise InputError.
constexpr int kCheckpointVersion = 1;

// Corpus settings stored alongside a fit so that annotations and held-out
// corpora can be mapped onto the same axes later.
struct CorpusMeta {
  std::string target;
  int window = 5;
  std::string genre_map;
};

struct FitCheckpoint {
  FitResult fit;
  CorpusMeta meta;
};

// A single state, used for ground truth and periodic sampler checkpoints.
struct StateCheckpoint {
  ModelConfig config;
  ModelState state;
  Vocabulary vocab;
  std::vector<std::string> time_labels;
  std::vector<std::string> genre_labels;
  std::vector<std::vector<int>> cell_counts;
  CorpusMeta meta;
  int part = 0;
  int iteration = 0;
};

std::string serialize_fit(const FitCheckpoint& checkpoint);
FitCheckpoint parse_fit(const std::string& text);

std::string serialize_state(const StateCheckpoint& checkpoint);
StateCheckpoint parse_state(const std::string& text);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// Reads either kind. A state checkpoint becomes a gasc fit with one part
// holding one sample.
FitCheckpoint read_checkpoint(const std::string& path);

}  // namespace gasc
