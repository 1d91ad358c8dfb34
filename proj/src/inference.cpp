#include "gasc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <mutex>

#include <fmt/format.h>

#include "gasc/errors.hpp"

namespace gasc {
namespace {

constexpr double kMinStep = 1e-4;
constexpr double kMaxStep = 5.0;

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

// Prior conditional of one coordinate of a random-walk chain at slice t
// given its neighbours, as (mean, precision).
struct Conditional {
  double mean;
  double precision;
};

Conditional chain_conditional(double prev, double next, bool has_prev, bool has_next, double anchor,
                              double precision) {
  double p = 0.0, m = 0.0;
  if (!has_prev) p += anchor;  // N(0, anchor) on the first slice
  if (has_prev) {
    p += precision;
    m += precision * prev;
  }
  if (has_next) {
    p += precision;
    m += precision * next;
  }
  return {m / p, p};
}

// Metropolis pass over x with target
//   sum_j [-P_j/2 (x_j - m_j)^2 + counts_j x_j] - total * log sum_j exp(x_j).
void metropolis_pass(std::span<double> x, std::span<const Conditional> prior, std::span<const int> counts,
                     long total, std::span<double> steps, Rng& rng, AcceptanceCounter& counter,
                     double adapt_rate, double target_acceptance) {
  const std::size_t n = x.size();
  double c = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - c);

  for (std::size_t j = 0; j < n; ++j) {
    const double old = x[j];
    const double prop = old + steps[j] * rng.normal();
    const double e_old = std::exp(old - c);
    double rest = sum - e_old;
    if (e_old > 0.5 * sum) {
      // Cancellation guard: this coordinate dominates, so sum the others directly.
      rest = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != j) rest += std::exp(x[i] - c);
      }
    }
    const double sum_new = rest + std::exp(prop - c);
    const auto& cond = prior[j];
    const double d_old = old - cond.mean, d_new = prop - cond.mean;
    const double log_ratio = -0.5 * cond.precision * (d_new * d_new - d_old * d_old) +
                             static_cast<double>(counts[j]) * (prop - old) -
                             static_cast<double>(total) * (std::log(sum_new) - std::log(sum));
    ++counter.proposed;
    const bool accept = log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio;
    if (accept) {
      ++counter.accepted;
      x[j] = prop;
      sum = sum_new;
      if (prop - c > 30.0) {
        c = *std::max_element(x.begin(), x.end());
        sum = 0.0;
        for (double v : x) sum += std::exp(v - c);
      }
    }
    if (adapt_rate > 0.0) {
      const double s = steps[j] * std::exp(adapt_rate * ((accept ? 1.0 : 0.0) - target_acceptance));
      steps[j] = std::clamp(s, kMinStep, kMaxStep);
    }
  }
}

}  // namespace

SufficientStats SufficientStats::compute(const Corpus& corpus, const std::vector<int>& z, int K) {
  SufficientStats s;
  const auto T = uz(corpus.T), G = uz(corpus.G), V = corpus.V(), k = uz(K);
  s.sense_counts = Array3<int>(T, G, k, 0);
  s.word_counts = Array3<int>(T, k, V, 0);
  s.word_totals = Array3<int>(T, k, 1, 0);
  for (std::size_t d = 0; d < corpus.snippets.size(); ++d) {
    const auto& sn = corpus.snippets[d];
    const auto t = uz(sn.time_slice), zd = uz(z[d]);
    ++s.sense_counts(t, uz(sn.genre_id), zd);
    for (WordId w : sn.context_ids) ++s.word_counts(t, zd, uz(w));
    s.word_totals(t, zd, 0) += static_cast<int>(sn.context_ids.size());
  }
  return s;
}

StepSizes StepSizes::uniform(const ModelState& shape, double step) {
  StepSizes s;
  s.phi = Array3<double>(shape.phi.dim0(), shape.phi.dim1(), shape.phi.dim2(), step);
  s.psi = Array3<double>(shape.psi.dim0(), shape.psi.dim1(), shape.psi.dim2(), step);
  return s;
}

ModelState init_state(const Corpus& corpus, const ModelConfig& config, Rng& rng) {
  ModelState s;
  s.phi = Array3<double>(uz(corpus.T), uz(corpus.G), uz(config.K), 0.0);
  s.psi = Array3<double>(uz(corpus.T), uz(config.K), corpus.V(), 0.0);
  s.k_phi = config.a / config.b;
  s.z.resize(corpus.snippets.size());
  for (int& z : s.z) z = static_cast<int>(rng.uniform_index(uz(config.K)));
  return s;
}

ModelState init_state(const Corpus& corpus, const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed, 0x1a17ULL);
  return init_state(corpus, config, rng);
}

void sample_z(ModelState& state, const Corpus& corpus, SufficientStats& stats, Rng& rng) {
  const int T = state.T(), G = state.G(), K = state.K();
  Array3<double> log_phi(uz(T), uz(G), uz(K));
  Array3<double> log_psi(uz(T), uz(K), uz(state.V()));
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < G; ++g) {
      auto ls = log_softmax(state.phi.row(uz(t), uz(g)));
      std::copy(ls.begin(), ls.end(), log_phi.row(uz(t), uz(g)).begin());
    }
    for (int k = 0; k < K; ++k) {
      auto ls = log_softmax(state.psi.row(uz(t), uz(k)));
      std::copy(ls.begin(), ls.end(), log_psi.row(uz(t), uz(k)).begin());
    }
  }

  std::vector<double> lw(uz(K));
  for (std::size_t d = 0; d < corpus.snippets.size(); ++d) {
    const auto& sn = corpus.snippets[d];
    const auto t = uz(sn.time_slice), g = uz(sn.genre_id);
    const auto len = static_cast<int>(sn.context_ids.size());
    const auto old = uz(state.z[d]);
    --stats.sense_counts(t, g, old);
    for (WordId w : sn.context_ids) --stats.word_counts(t, old, uz(w));
    stats.word_totals(t, old, 0) -= len;

    for (std::size_t k = 0; k < uz(K); ++k) {
      double l = log_phi(t, g, k);
      auto row = log_psi.row(t, k);
      for (WordId w : sn.context_ids) l += row[uz(w)];
      lw[k] = l;
    }
    const auto k_new = rng.categorical_log(lw);
    state.z[d] = static_cast<int>(k_new);
    ++stats.sense_counts(t, g, k_new);
    for (WordId w : sn.context_ids) ++stats.word_counts(t, k_new, uz(w));
    stats.word_totals(t, k_new, 0) += len;
  }
}

void sample_chain_vector(ChainRef which, ModelState& state, const SufficientStats& stats,
                         const ModelConfig& config, StepSizes& steps, Rng& rng, AcceptanceCounter& counter,
                         double adapt_rate, const KernelOptions& kernel) {
  const int T = state.T();
  const auto t = uz(which.t), i = uz(which.index);
  const bool has_prev = which.t > 0, has_next = which.t + 1 < T;
  Array3<double>& chains = which.kind == ChainKind::phi ? state.phi : state.psi;
  const double anchor = kernel.prior_precision_scale *
                        (which.kind == ChainKind::phi ? config.phi_anchor_precision : config.psi_anchor_precision);
  const double precision = kernel.prior_precision_scale * (which.kind == ChainKind::phi ? state.k_phi : config.k_psi);

  auto x = chains.row(t, i);
  std::vector<Conditional> prior(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    prior[j] = chain_conditional(has_prev ? chains(t - 1, i, j) : 0.0, has_next ? chains(t + 1, i, j) : 0.0,
                                 has_prev, has_next, anchor, precision);
  }
  std::span<const int> counts;
  long total = 0;
  if (which.kind == ChainKind::phi) {
    counts = stats.sense_counts.row(t, i);
    for (int c : counts) total += c;
  } else {
    counts = stats.word_counts.row(t, i);
    total = stats.word_totals(t, i, 0);
  }
  auto step_row = which.kind == ChainKind::phi ? steps.phi.row(t, i) : steps.psi.row(t, i);
  metropolis_pass(x, prior, counts, total, step_row, rng, counter, adapt_rate, config.target_acceptance);
}

GammaParams k_phi_posterior(const ModelState& state, const ModelConfig& config) {
  const int T = state.T(), G = state.G(), K = state.K();
  double ss = 0.0;
  for (int t = 1; t < T; ++t) {
    for (int g = 0; g < G; ++g) {
      for (int k = 0; k < K; ++k) {
        const double d = state.phi(uz(t), uz(g), uz(k)) - state.phi(uz(t - 1), uz(g), uz(k));
        ss += d * d;
      }
    }
  }
  const double increments = static_cast<double>(G) * K * std::max(T - 1, 0);
  return {config.a + 0.5 * increments, config.b + 0.5 * ss};
}

double sample_k_phi(const ModelState& state, const ModelConfig& config, Rng& rng) {
  const auto p = k_phi_posterior(state, config);
  return rng.gamma(p.shape, p.rate);
}

bool propose_label_swap(ModelState& state, SufficientStats& stats, const Corpus& corpus,
                        const ModelConfig& config, int t, int k1, int k2, Rng& rng, const KernelOptions& kernel) {
  const int T = state.T(), G = state.G(), V = state.V();
  if (t < 1 || t >= T || k1 == k2) return false;
  const auto tp = uz(t - 1), tc = uz(t), a = uz(k1), b = uz(k2);
  auto delta = [](double prev_a, double prev_b, double cur_a, double cur_b) {
    // (after - before) of the summed squared increments
    const double before = (cur_a - prev_a) * (cur_a - prev_a) + (cur_b - prev_b) * (cur_b - prev_b);
    const double after = (cur_b - prev_a) * (cur_b - prev_a) + (cur_a - prev_b) * (cur_a - prev_b);
    return after - before;
  };
  double d_phi = 0.0, d_psi = 0.0;
  for (int g = 0; g < G; ++g) {
    const auto gg = uz(g);
    d_phi += delta(state.phi(tp, gg, a), state.phi(tp, gg, b), state.phi(tc, gg, a), state.phi(tc, gg, b));
  }
  for (int v = 0; v < V; ++v) {
    const auto vv = uz(v);
    d_psi += delta(state.psi(tp, a, vv), state.psi(tp, b, vv), state.psi(tc, a, vv), state.psi(tc, b, vv));
  }
  const double scale = kernel.prior_precision_scale;
  const double log_ratio = -0.5 * scale * (state.k_phi * d_phi + config.k_psi * d_psi);
  if (!(log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio)) return false;

  for (auto s = tc; s < uz(T); ++s) {
    for (int g = 0; g < G; ++g) {
      std::swap(state.phi(s, uz(g), a), state.phi(s, uz(g), b));
      std::swap(stats.sense_counts(s, uz(g), a), stats.sense_counts(s, uz(g), b));
    }
    auto pa = state.psi.row(s, a), pb = state.psi.row(s, b);
    std::swap_ranges(pa.begin(), pa.end(), pb.begin());
    auto ca = stats.word_counts.row(s, a), cb = stats.word_counts.row(s, b);
    std::swap_ranges(ca.begin(), ca.end(), cb.begin());
    std::swap(stats.word_totals(s, a, 0), stats.word_totals(s, b, 0));
  }
  for (std::size_t d = 0; d < corpus.snippets.size(); ++d) {
    if (corpus.snippets[d].time_slice < t) continue;
    int& z = state.z[d];
    if (z == k1) {
      z = k2;
    } else if (z == k2) {
      z = k1;
    }
  }
  return true;
}

double log_joint(const ModelState& state, const SufficientStats& stats, const ModelConfig& config) {
  const double k = state.k_phi;
  double lp = config.a * std::log(config.b) - std::lgamma(config.a) + (config.a - 1.0) * std::log(k) - config.b * k;
  lp += chain_log_prior(state, config);
  const int T = state.T(), G = state.G(), K = state.K();
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < G; ++g) {
      auto ls = log_softmax(state.phi.row(uz(t), uz(g)));
      auto n = stats.sense_counts.row(uz(t), uz(g));
      for (int kk = 0; kk < K; ++kk) {
        if (n[uz(kk)]) lp += n[uz(kk)] * ls[uz(kk)];
      }
    }
    for (int kk = 0; kk < K; ++kk) {
      auto ls = log_softmax(state.psi.row(uz(t), uz(kk)));
      auto c = stats.word_counts.row(uz(t), uz(kk));
      for (std::size_t v = 0; v < ls.size(); ++v) {
        if (c[v]) lp += c[v] * ls[v];
      }
    }
  }
  return lp;
}

GibbsSampler::GibbsSampler(const Corpus& corpus, ModelConfig config, Rng rng, KernelOptions kernel)
    : corpus_(&corpus), config_(std::move(config)), rng_(rng), kernel_(kernel) {
  state_ = init_state(corpus, config_, rng_);
  stats_ = SufficientStats::compute(corpus, state_.z, config_.K);
  steps_ = StepSizes::uniform(state_, config_.initial_step);
}

GibbsSampler::GibbsSampler(const Corpus& corpus, ModelConfig config, Rng rng, ModelState initial,
                           KernelOptions kernel)
    : corpus_(&corpus), config_(std::move(config)), rng_(rng), kernel_(kernel), state_(std::move(initial)) {
  if (state_.z.size() != corpus.snippets.size()) throw InputError("initial z does not match the corpus");
  stats_ = SufficientStats::compute(corpus, state_.z, config_.K);
  steps_ = StepSizes::uniform(state_, config_.initial_step);
}

void GibbsSampler::refresh_stats() { stats_ = SufficientStats::compute(*corpus_, state_.z, config_.K); }

void GibbsSampler::sweep() { sweep(sweeps_ < config_.adapt_sweeps); }

void GibbsSampler::sweep(bool adapt) {
  const double rate = adapt ? 1.0 / std::sqrt(static_cast<double>(sweeps_) + 1.0) : 0.0;
  phi_acc_ = {};
  psi_acc_ = {};
  sample_z(state_, *corpus_, stats_, rng_);
  const int T = state_.T(), G = state_.G(), K = state_.K();
  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < G; ++g) {
      sample_chain_vector({ChainKind::phi, t, g}, state_, stats_, config_, steps_, rng_, phi_acc_, rate, kernel_);
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      sample_chain_vector({ChainKind::psi, t, k}, state_, stats_, config_, steps_, rng_, psi_acc_, rate, kernel_);
    }
  }
  state_.k_phi = sample_k_phi(state_, config_, rng_);
  swap_acc_ = {};
  if (config_.label_swap_moves) {
    for (int t = 1; t < T; ++t) {
      for (int k1 = 0; k1 < K; ++k1) {
        for (int k2 = k1 + 1; k2 < K; ++k2) {
          ++swap_acc_.proposed;
          if (propose_label_swap(state_, stats_, *corpus_, config_, t, k1, k2, rng_, kernel_)) ++swap_acc_.accepted;
        }
      }
    }
  }
  ++sweeps_;
}

TraceRow GibbsSampler::trace() const {
  TraceRow row;
  row.iteration = sweeps_;
  row.log_joint = log_joint(state_, stats_, config_);
  row.k_phi = state_.k_phi;
  row.phi_acceptance = phi_acc_.rate();
  row.psi_acceptance = psi_acc_.rate();
  row.swap_acceptance = swap_acc_.rate();
  return row;
}

namespace {

FitPart run_chain(const Corpus& corpus, const ModelConfig& base, Variant variant, int part,
                  const std::string& genre_label, const RunOptions& options, std::mutex& callback_mutex) {
  ModelConfig config = base;
  config.T = corpus.T;
  config.G = corpus.G;
  config.V = static_cast<int>(corpus.V());
  config.validate();

  GibbsSampler sampler(corpus, config, Rng(config.seed, static_cast<std::uint64_t>(part) + 1), options.kernel);
  FitPart out;
  out.genre_label = genre_label;
  out.samples.config = config;
  out.samples.variant = variant;
  out.samples.cell_counts = corpus.cell_counts();
  out.trace.reserve(uz(config.n_iterations));

  for (int it = 1; it <= config.n_iterations; ++it) {
    sampler.sweep();
    TraceRow row = sampler.trace();
    row.part = part;
    if (!sampler.state().all_finite() || !std::isfinite(row.log_joint)) {
      throw NumericalError(fmt::format("non-finite sampler state at iteration {} (part {}, k_phi={}, log joint={})",
                                       it, part, sampler.state().k_phi, row.log_joint));
    }
    out.trace.push_back(row);
    if (options.checkpoint_every > 0 && it % options.checkpoint_every == 0 && options.on_checkpoint) {
      std::lock_guard lock(callback_mutex);
      options.on_checkpoint(sampler.state(), part, it);
    }
    if (it > config.n_iterations - config.n_retain) out.samples.samples.push_back(sampler.state());
  }
  return out;
}

}  // namespace

FitResult run_gibbs(const Corpus& corpus, const ModelConfig& config, Variant variant, const RunOptions& options) {
  if (corpus.snippets.empty()) throw InputError("run_gibbs: corpus has no snippets");
  corpus.check();
  FitResult result;
  result.variant = variant;
  result.vocab = corpus.vocab;
  result.time_labels = corpus.time_labels;
  result.genre_labels = corpus.genre_labels;
  std::mutex callback_mutex;

  switch (variant) {
    case Variant::gasc:
      result.parts.push_back(run_chain(corpus, config, variant, 0, "", options, callback_mutex));
      break;
    case Variant::scan:
      result.parts.push_back(run_chain(collapse_genres(corpus), config, variant, 0, "all", options, callback_mutex));
      break;
    case Variant::gasc_independent: {
      std::vector<Corpus> partitions;
      for (int g = 0; g < corpus.G; ++g) partitions.push_back(restrict_to_genre(corpus, g));
      std::vector<std::future<FitPart>> futures;
      for (int g = 0; g < corpus.G; ++g) {
        futures.push_back(std::async(std::launch::async, [&, g] {
          return run_chain(partitions[uz(g)], config, variant, g, corpus.genre_labels[uz(g)], options, callback_mutex);
        }));
      }
      for (auto& f : futures) result.parts.push_back(f.get());
      break;
    }
  }
  return result;
}

}  // namespace gasc
