#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gasc/array.hpp"
#include "gasc/corpus.hpp"
#include "gasc/rng.hpp"

namespace gasc {

// Hyperparameter presets for (a, b, K_psi).
//   setting1: a = 7, b = 3, K_psi = 10
//   setting2: a = 7, b = 3, K_psi = 100 (stable word distributions)
//   setting3: a = 1, b = 1, K_psi = 100 (stable words, loosely smoothed sense probabilities)
enum class Preset { setting1, setting2, setting3, custom };

enum class Variant { gasc, scan, gasc_independent };

std::string to_string(Preset p);
std::string to_string(Variant v);
Preset parse_preset(const std::string& s);
Variant parse_variant(const std::string& s);

struct ModelConfig {
  int K = 10;
  int W = 5;
  // Gamma(a, b) prior on the sense-chain precision K_phi (rate parameterization).
  double a = 1.0;
  double b = 1.0;
  // Fixed precision of the word chains.
  double k_psi = 100.0;
  int T = 0;
  int G = 0;
  int V = 0;
  int n_iterations = 1000;
  int n_retain = 10;
  std::uint64_t seed = 1;
  Preset preset = Preset::setting3;

  // Precision of the N(0, .) anchor on the first time slice of each chain.
  double phi_anchor_precision = 1.0;
  double psi_anchor_precision = 1.0;

  // Metropolis step-size adaptation, frozen after adapt_sweeps sweeps.
  int adapt_sweeps = 200;
  double initial_step = 0.1;
  double target_acceptance = 0.44;
  // Metropolis moves that swap two senses on every slice from t onwards.
  bool label_swap_moves = true;

  static ModelConfig from_preset(Preset p);
  // Overwrites a, b and k_psi with the preset's values.
  void apply_preset(Preset p);
  // Throws InputError on violated invariants. K >= 1 is accepted here; the
  // CLI requires K >= 2.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Unconstrained chain parameters. phi(t, g, k) are sense logits and
// psi(t, k, v) word logits; probabilities come from softmax over the last axis.
struct ModelState {
  Array3<double> phi;
  Array3<double> psi;
  std::vector<int> z;
  double k_phi = 1.0;

  int T() const { return static_cast<int>(phi.dim0()); }
  int G() const { return static_cast<int>(phi.dim1()); }
  int K() const { return static_cast<int>(phi.dim2()); }
  int V() const { return static_cast<int>(psi.dim2()); }
  bool all_finite() const;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct SampleSet {
  ModelConfig config;
  Variant variant = Variant::gasc;
  std::vector<ModelState> samples;
  // Training snippet counts indexed [t][g].
  std::vector<std::vector<int>> cell_counts;
};

double log_sum_exp(std::span<const double> v);
// Max-subtracted softmax; output entries are strictly positive for finite input.
std::vector<double> softmax(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> v);

// Log density of one first-order Gaussian random walk x[0..T) with
// N(0, anchor) on x[0] and N(x[t-1], precision) increments.
double random_walk_log_density(std::span<const double> x, double anchor_precision, double precision);

// Joint log prior of all phi and psi chains given the state's k_phi.
double chain_log_prior(const ModelState& state, const ModelConfig& config);

// log sum_k softmax(phi[t][g])_k prod_i softmax(psi[t][k])_{w_i}
double snippet_log_likelihood(const ModelState& state, const Snippet& snippet);

// p(z = k | phi, psi, w) for one snippet.
std::vector<double> sense_posterior(const ModelState& state, const Snippet& snippet);

// Draws K_phi, phi and psi from the prior. z is left empty.
ModelState draw_prior_state(const ModelConfig& config, Rng& rng);

// Draws z and the words of every snippet given the chain parameters.
// counts[t][g] snippets are produced per cell, each with `snippet_length`
// words. Fills state.z.
Corpus generate_corpus(ModelState& state, const std::vector<std::vector<int>>& counts, int snippet_length,
                       Rng& rng);

struct Simulation {
  Corpus corpus;
  ModelState truth;
};

// Forward simulation of the full generative process. snippet_length <= 0
// selects 2W. Deterministic given config.seed.
Simulation simulate(const ModelConfig& config, const std::vector<std::vector<int>>& snippets_per_cell,
                    int snippet_length = 0);

// Vocabulary w000, w001, ... used by simulated corpora.
Vocabulary synthetic_vocabulary(int V);

}  // namespace gasc
