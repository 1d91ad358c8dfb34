#pragma once

#include <map>
#include <string>
#include <vector>

#include "gasc/corpus.hpp"
#include "gasc/model.hpp"

namespace gasc {

// Effective settings of a run. Built from a flat key = value file; '#' and
// ';' start comments and [section] lines are ignored.
struct RunConfig {
  ModelConfig model;
  Variant variant = Variant::gasc;

  // Comma-separated in the file; several targets give one sweep fold each.
  std::vector<std::string> targets;
  std::string genre_map;
  std::vector<std::string> time_order;
  int min_count = 1;
  bool respect_sentences = false;

  double test_fraction = 0.2;
  int top_n = 20;
  bool raw_count_precision = false;
  bool collocates_only = true;
  std::string stopwords;
  int checkpoint_every = 0;

  // Every effective value as text, in key order.
  std::map<std::string, std::string> effective() const;
};

// Applies one setting. "preset" resets a, b and k_psi to the preset values;
// a later explicit a, b or k_psi that differs from the preset marks the
// preset custom. Throws InputError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Presets are expanded before explicit a, b and k_psi, whatever the line
// order in the file.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace gasc
