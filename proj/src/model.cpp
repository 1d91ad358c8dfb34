#include "gasc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gasc/errors.hpp"

namespace gasc {

std::string to_string(Preset p) {
  switch (p) {
    case Preset::setting1: return "setting1";
    case Preset::setting2: return "setting2";
    case Preset::setting3: return "setting3";
    case Preset::custom: return "custom";
  }
  return "custom";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gasc: return "gasc";
    case Variant::scan: return "scan";
    case Variant::gasc_independent: return "gasc-independent";
  }
  return "gasc";
}

Preset parse_preset(const std::string& s) {
  if (s == "1" || s == "setting1") return Preset::setting1;
  if (s == "2" || s == "setting2") return Preset::setting2;
  if (s == "3" || s == "setting3") return Preset::setting3;
  if (s == "custom") return Preset::custom;
  throw InputError("unknown preset: " + s);
}

Variant parse_variant(const std::string& s) {
  if (s == "gasc") return Variant::gasc;
  if (s == "scan") return Variant::scan;
  if (s == "gasc-independent" || s == "gasc_independent") return Variant::gasc_independent;
  throw InputError("unknown variant: " + s);
}

ModelConfig ModelConfig::from_preset(Preset p) {
  ModelConfig c;
  c.apply_preset(p);
  return c;
}

void ModelConfig::apply_preset(Preset p) {
  preset = p;
  switch (p) {
    case Preset::setting1:
      a = 7.0, b = 3.0, k_psi = 10.0;
      break;
    case Preset::setting2:
      a = 7.0, b = 3.0, k_psi = 100.0;
      break;
    case Preset::setting3:
      a = 1.0, b = 1.0, k_psi = 100.0;
      break;
    case Preset::custom:
      break;
  }
}

void ModelConfig::validate() const {
  if (K < 1) throw InputError("K must be >= 1");
  if (W < 1) throw InputError("W must be >= 1");
  if (!(a > 0 && b > 0 && k_psi > 0)) throw InputError("a, b and k_psi must be positive");
  if (!(phi_anchor_precision > 0 && psi_anchor_precision > 0)) throw InputError("anchor precisions must be positive");
  if (n_iterations < 1) throw InputError("n_iterations must be >= 1");
  if (n_retain < 1 || n_retain > n_iterations) throw InputError("n_retain must lie in [1, n_iterations]");
  if (T < 0 || G < 0 || V < 0) throw InputError("negative dimension");
  if (!(initial_step > 0) || !(target_acceptance > 0 && target_acceptance < 1) || adapt_sweeps < 0) {
    throw InputError("invalid step-size adaptation settings");
  }
}

bool ModelState::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(phi.flat().begin(), phi.flat().end(), finite) &&
         std::all_of(psi.flat().begin(), psi.flat().end(), finite) && std::isfinite(k_phi) && k_phi > 0;
}

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

std::vector<double> softmax(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  std::vector<double> out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
  const double lse = log_sum_exp(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

double random_walk_log_density(std::span<const double> x, double anchor_precision, double precision) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  if (x.empty()) return 0.0;
  double lp = 0.5 * std::log(anchor_precision) - kHalfLog2Pi - 0.5 * anchor_precision * x[0] * x[0];
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double d = x[t] - x[t - 1];
    lp += 0.5 * std::log(precision) - kHalfLog2Pi - 0.5 * precision * d * d;
  }
  return lp;
}

double chain_log_prior(const ModelState& state, const ModelConfig& config) {
  const int T = state.T(), G = state.G(), K = state.K(), V = state.V();
  std::vector<double> chain(static_cast<std::size_t>(T));
  double lp = 0.0;
  for (int g = 0; g < G; ++g) {
    for (int k = 0; k < K; ++k) {
      for (int t = 0; t < T; ++t) chain[static_cast<std::size_t>(t)] = state.phi(t, g, k);
      lp += random_walk_log_density(chain, config.phi_anchor_precision, state.k_phi);
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int v = 0; v < V; ++v) {
      for (int t = 0; t < T; ++t) chain[static_cast<std::size_t>(t)] = state.psi(t, k, v);
      lp += random_walk_log_density(chain, config.psi_anchor_precision, config.k_psi);
    }
  }
  return lp;
}

namespace {

std::vector<double> sense_log_joint(const ModelState& state, const Snippet& snippet) {
  const auto t = static_cast<std::size_t>(snippet.time_slice);
  const auto g = static_cast<std::size_t>(snippet.genre_id);
  const int K = state.K();
  std::vector<double> lw = log_softmax(state.phi.row(t, g));
  for (int k = 0; k < K; ++k) {
    auto psi = state.psi.row(t, static_cast<std::size_t>(k));
    const double lse = log_sum_exp(psi);
    double ll = 0.0;
    for (WordId w : snippet.context_ids) ll += psi[static_cast<std::size_t>(w)] - lse;
    lw[static_cast<std::size_t>(k)] += ll;
  }
  return lw;
}

}  // namespace

double snippet_log_likelihood(const ModelState& state, const Snippet& snippet) {
  return log_sum_exp(sense_log_joint(state, snippet));
}

std::vector<double> sense_posterior(const ModelState& state, const Snippet& snippet) {
  return softmax(sense_log_joint(state, snippet));
}

ModelState draw_prior_state(const ModelConfig& config, Rng& rng) {
  ModelState s;
  const auto T = static_cast<std::size_t>(config.T), G = static_cast<std::size_t>(config.G),
             K = static_cast<std::size_t>(config.K), V = static_cast<std::size_t>(config.V);
  s.k_phi = rng.gamma(config.a, config.b);
  s.phi = Array3<double>(T, G, K);
  s.psi = Array3<double>(T, K, V);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t t = 0; t < T; ++t) {
        s.phi(t, g, k) = t == 0 ? rng.normal(0.0, config.phi_anchor_precision)
                                : rng.normal(s.phi(t - 1, g, k), s.k_phi);
      }
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t t = 0; t < T; ++t) {
        s.psi(t, k, v) = t == 0 ? rng.normal(0.0, config.psi_anchor_precision)
                                : rng.normal(s.psi(t - 1, k, v), config.k_psi);
      }
    }
  }
  return s;
}

Vocabulary synthetic_vocabulary(int V) {
  const int width = std::max(3, static_cast<int>(std::to_string(std::max(V - 1, 0)).size()));
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(V));
  for (int v = 0; v < V; ++v) words.push_back(fmt::format("w{:0{}}", v, width));
  return Vocabulary(std::move(words));
}

Corpus generate_corpus(ModelState& state, const std::vector<std::vector<int>>& counts, int snippet_length,
                       Rng& rng) {
  const int T = state.T(), G = state.G(), K = state.K();
  if (static_cast<int>(counts.size()) != T) throw InputError("cell count rows must equal T");
  Corpus corpus;
  corpus.T = T;
  corpus.G = G;
  corpus.vocab = synthetic_vocabulary(state.V());
  for (int t = 0; t < T; ++t) corpus.time_labels.push_back(std::to_string(t));
  for (int g = 0; g < G; ++g) corpus.genre_labels.push_back(fmt::format("g{}", g));
  state.z.clear();

  std::vector<std::vector<double>> word_probs(static_cast<std::size_t>(K));
  for (int t = 0; t < T; ++t) {
    if (static_cast<int>(counts[static_cast<std::size_t>(t)].size()) != G) throw InputError("cell count columns must equal G");
    for (int k = 0; k < K; ++k) word_probs[static_cast<std::size_t>(k)] = softmax(state.psi.row(static_cast<std::size_t>(t), static_cast<std::size_t>(k)));
    for (int g = 0; g < G; ++g) {
      const auto sense_probs = softmax(state.phi.row(static_cast<std::size_t>(t), static_cast<std::size_t>(g)));
      for (int d = 0; d < counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(g)]; ++d) {
        Snippet s;
        s.snippet_id = static_cast<int>(corpus.snippets.size());
        s.time_slice = t;
        s.genre_id = g;
        s.source_ref = fmt::format("sim-{}", s.snippet_id);
        const auto z = rng.categorical(sense_probs);
        for (int i = 0; i < snippet_length; ++i) {
          s.context_ids.push_back(static_cast<WordId>(rng.categorical(word_probs[z])));
        }
        state.z.push_back(static_cast<int>(z));
        corpus.snippets.push_back(std::move(s));
      }
    }
  }
  return corpus;
}

Simulation simulate(const ModelConfig& config, const std::vector<std::vector<int>>& snippets_per_cell,
                    int snippet_length) {
  config.validate();
  if (config.T < 1 || config.G < 1 || config.V < 1) throw InputError("simulate needs T, G, V >= 1");
  if (snippet_length <= 0) snippet_length = 2 * config.W;
  if (snippet_length > 2 * config.W) throw InputError("snippet_length exceeds 2W");
  long total = 0;
  for (const auto& row : snippets_per_cell) {
    for (int c : row) {
      if (c < 0) throw InputError("negative snippet count");
      total += c;
    }
  }
  if (total == 0) throw InputError("simulate: zero snippets in every cell");

  Rng rng(config.seed, 0x51a1ULL);
  Simulation sim;
  sim.truth = draw_prior_state(config, rng);
  sim.corpus = generate_corpus(sim.truth, snippets_per_cell, snippet_length, rng);
  return sim;
}

}  // namespace gasc
