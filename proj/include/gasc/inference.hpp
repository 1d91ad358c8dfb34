#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gasc/array.hpp"
#include "gasc/corpus.hpp"
#include "gasc/model.hpp"
#include "gasc/rng.hpp"

namespace gasc {

struct SufficientStats {
  Array3<int> sense_counts;  // [T][G][K]
  Array3<int> word_counts;   // [T][K][V]
  Array3<int> word_totals;   // [T][K][1]

  static SufficientStats compute(const Corpus& corpus, const std::vector<int>& z, int K);
  friend bool operator==(const SufficientStats&, const SufficientStats&) = default;
};

// Per-coordinate random-walk proposal scales for the chain kernels.
struct StepSizes {
  Array3<double> phi;  // [T][G][K]
  Array3<double> psi;  // [T][K][V]

  static StepSizes uniform(const ModelState& shape, double step);
};

struct KernelOptions {
  // Multiplies every prior precision used by the chain kernels. Anything
  // other than 1 gives a wrong stationary distribution; the sampler
  // validation uses it as a negative control.
  double prior_precision_scale = 1.0;
};

struct AcceptanceCounter {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

enum class ChainKind { phi, psi };

// phi(t, g) when kind == phi, psi(t, k) when kind == psi.
struct ChainRef {
  ChainKind kind;
  int t;
  int index;
};

// phi = psi = 0, z uniform at random, k_phi = a / b.
ModelState init_state(const Corpus& corpus, const ModelConfig& config, Rng& rng);
ModelState init_state(const Corpus& corpus, const ModelConfig& config, std::uint64_t seed);

// Exact Gibbs update of every z^d given phi and psi. `stats` must match
// state.z on entry and is maintained incrementally.
void sample_z(ModelState& state, const Corpus& corpus, SufficientStats& stats, Rng& rng);

// One Metropolis-within-Gibbs pass over the coordinates of a chain vector.
// The target is the exact full conditional: random-walk prior conditional
// times the multinomial likelihood of the associated counts under softmax.
// When adapt_rate > 0 the per-coordinate step sizes move towards the target
// acceptance rate (log step += adapt_rate * (accepted - target)).
void sample_chain_vector(ChainRef which, ModelState& state, const SufficientStats& stats,
                         const ModelConfig& config, StepSizes& steps, Rng& rng, AcceptanceCounter& counter,
                         double adapt_rate = 0.0, const KernelOptions& kernel = {});

struct GammaParams {
  double shape;
  double rate;
};

// Conjugate posterior of K_phi:
// Gamma(a + G K (T - 1) / 2, b + 1/2 sum (phi[t] - phi[t-1])^2).
GammaParams k_phi_posterior(const ModelState& state, const ModelConfig& config);
double sample_k_phi(const ModelState& state, const ModelConfig& config, Rng& rng);

// Metropolis move exchanging senses k1 and k2 on slices [t, T) for phi,
// psi and z. The likelihood is invariant, so acceptance depends only on the
// random-walk increments between t - 1 and t. Requires 1 <= t < T. Returns
// whether the swap was accepted.
bool propose_label_swap(ModelState& state, SufficientStats& stats, const Corpus& corpus,
                        const ModelConfig& config, int t, int k1, int k2, Rng& rng,
                        const KernelOptions& kernel = {});

// log p(K_phi, phi, psi, z, w).
double log_joint(const ModelState& state, const SufficientStats& stats, const ModelConfig& config);

struct TraceRow {
  int part = 0;
  int iteration = 0;
  double log_joint = 0.0;
  double k_phi = 0.0;
  double phi_acceptance = 0.0;
  double psi_acceptance = 0.0;
  double swap_acceptance = 0.0;
};

// Sequential-scan sampler over one corpus. Per sweep: z, every phi(t, g)
// (t then g ascending), every psi(t, k) (t then k ascending), K_phi, then
// label-swap moves for every (t, k1 < k2) when enabled.
class GibbsSampler {
 public:
  GibbsSampler(const Corpus& corpus, ModelConfig config, Rng rng, KernelOptions kernel = {});
  // Starts from a given state instead of init_state. z must be sized to the corpus.
  GibbsSampler(const Corpus& corpus, ModelConfig config, Rng rng, ModelState initial, KernelOptions kernel = {});

  // One full sweep; adapts step sizes while sweeps_done() < config.adapt_sweeps.
  void sweep();
  // As sweep(), with adaptation forced on or off.
  void sweep(bool adapt);

  // Must be called after the corpus words change under the sampler.
  void refresh_stats();

  const ModelState& state() const { return state_; }
  ModelState& mutable_state() { return state_; }
  const SufficientStats& stats() const { return stats_; }
  const StepSizes& steps() const { return steps_; }
  void set_steps(StepSizes steps) { steps_ = std::move(steps); }
  int sweeps_done() const { return sweeps_; }
  TraceRow trace() const;
  Rng& rng() { return rng_; }

 private:
  const Corpus* corpus_;
  ModelConfig config_;
  Rng rng_;
  KernelOptions kernel_;
  ModelState state_;
  SufficientStats stats_;
  StepSizes steps_;
  AcceptanceCounter phi_acc_, psi_acc_, swap_acc_;
  int sweeps_ = 0;
};

struct RunOptions {
  KernelOptions kernel;
  // Called with the current state every checkpoint_every sweeps (0 disables).
  int checkpoint_every = 0;
  std::function<void(const ModelState&, int part, int iteration)> on_checkpoint;
};

struct FitPart {
  std::string genre_label;
  SampleSet samples;
  std::vector<TraceRow> trace;
};

struct FitResult {
  Variant variant = Variant::gasc;
  Vocabulary vocab;
  std::vector<std::string> time_labels;
  // Genre labels of the corpus the fit was requested on (before any collapse).
  std::vector<std::string> genre_labels;
  // One part for gasc and scan, one per input genre for gasc-independent.
  std::vector<FitPart> parts;
};

// Runs n_iterations sweeps and keeps the final n_retain states.
// scan collapses the corpus to G = 1 first; gasc-independent fits one model
// per genre partition. Throws NumericalError on a non-finite state.
FitResult run_gibbs(const Corpus& corpus, const ModelConfig& config, Variant variant,
                    const RunOptions& options = {});

// --- Sampler validation (joint-distribution test) ---------------------------

struct GewekeOptions {
  int snippets_per_cell = 3;
  int snippet_length = 4;
  // Sweeps between recorded Gibbs samples.
  int thin = 10;
  // Successive-conditional sweeps discarded before recording; step sizes
  // adapt during the first half and are frozen afterwards.
  int warmup = 1000;
  int batches = 50;
  bool corrupt_chain_precision = false;
};

struct GewekeStatistic {
  std::string name;
  double forward_mean = 0.0;
  double forward_se = 0.0;
  double gibbs_mean = 0.0;
  double gibbs_se = 0.0;
  double z = 0.0;
};

struct GewekeReport {
  std::vector<GewekeStatistic> statistics;
  double max_abs_z() const;
};

// Compares moments of monitored scalars between independent forward draws
// of (K_phi, phi, psi, z, w) and a successive-conditional chain that
// alternates one Gibbs sweep with re-simulation of w given (z, psi).
// Gibbs standard errors use batch means.
GewekeReport validate_sampler(const ModelConfig& config, int n_forward, int n_gibbs,
                              const GewekeOptions& options = {});

}  // namespace gasc
