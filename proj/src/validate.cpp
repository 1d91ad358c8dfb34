#include <algorithm>
#include <cmath>
#include <numeric>

#include "gasc/errors.hpp"
#include "gasc/inference.hpp"

namespace gasc {
namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

const std::vector<std::string>& statistic_names() {
  // Every statistic needs finite variance under the prior. With a <= 2 the
  // marginal of 1 / k_phi has no variance, so raw phi at t > 0 is only
  // monitored through bounded or k_phi-scaled transforms.
  static const std::vector<std::string> names = {
      "k_phi",
      "log k_phi",
      "phi[0,0,0]",
      "mean phi[0]^2",
      "mean k_phi * phi increment^2",
      "P(sense K-1 | t=T-1,g=G-1)",
      "psi[0,0,0]",
      "psi[T-1,K-1,V-1]",
      "mean psi^2",
      "mean (psi_0-psi_1)^2",
      "P(sense 0 | t=0,g=0)",
      "fraction z=0",
      "fraction w=0",
      "fraction w=V-1",
  };
  return names;
}

std::vector<double> monitor(const ModelState& s, const Corpus& corpus) {
  const int T = s.T(), G = s.G(), K = s.K(), V = s.V();
  double phi2 = 0.0, inc2 = 0.0, psi2 = 0.0, contrast = 0.0;
  for (int g = 0; g < G; ++g) {
    for (int k = 0; k < K; ++k) phi2 += s.phi(0, uz(g), uz(k)) * s.phi(0, uz(g), uz(k));
  }
  for (int t = 1; t < T; ++t) {
    for (int g = 0; g < G; ++g) {
      for (int k = 0; k < K; ++k) {
        const double d = s.phi(uz(t), uz(g), uz(k)) - s.phi(uz(t - 1), uz(g), uz(k));
        inc2 += d * d;
      }
    }
  }
  for (double x : s.psi.flat()) psi2 += x * x;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      const double d = s.psi(uz(t), uz(k), 0) - s.psi(uz(t), uz(k), V > 1 ? 1 : 0);
      contrast += d * d;
    }
  }
  long z0 = 0, words = 0, w0 = 0, wlast = 0;
  for (std::size_t d = 0; d < corpus.snippets.size(); ++d) {
    if (s.z[d] == 0) ++z0;
    for (WordId w : corpus.snippets[d].context_ids) {
      ++words;
      if (w == 0) ++w0;
      if (w == V - 1) ++wlast;
    }
  }
  const auto n_snip = static_cast<double>(std::max<std::size_t>(corpus.snippets.size(), 1));
  const auto n_words = static_cast<double>(std::max(words, 1L));
  return {
      s.k_phi,
      std::log(s.k_phi),
      s.phi(0, 0, 0),
      phi2 / (static_cast<double>(G) * K),
      T > 1 ? s.k_phi * inc2 / (static_cast<double>(G) * K * (T - 1)) : 0.0,
      softmax(s.phi.row(uz(T - 1), uz(G - 1)))[uz(K - 1)],
      s.psi(0, 0, 0),
      s.psi(uz(T - 1), uz(K - 1), uz(V - 1)),
      psi2 / static_cast<double>(s.psi.size()),
      contrast / (static_cast<double>(T) * K),
      softmax(s.phi.row(0, 0))[0],
      static_cast<double>(z0) / n_snip,
      static_cast<double>(w0) / n_words,
      static_cast<double>(wlast) / n_words,
  };
}

void resimulate_words(Corpus& corpus, const ModelState& s, Rng& rng) {
  const int T = s.T(), K = s.K();
  std::vector<std::vector<double>> probs(uz(T * K));
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) probs[uz(t * K + k)] = softmax(s.psi.row(uz(t), uz(k)));
  }
  for (std::size_t d = 0; d < corpus.snippets.size(); ++d) {
    auto& sn = corpus.snippets[d];
    const auto& p = probs[uz(sn.time_slice * K + s.z[d])];
    for (WordId& w : sn.context_ids) w = static_cast<WordId>(rng.categorical(p));
  }
}

}  // namespace

double GewekeReport::max_abs_z() const {
  double m = 0.0;
  for (const auto& s : statistics) m = std::max(m, std::abs(s.z));
  return m;
}

GewekeReport validate_sampler(const ModelConfig& base, int n_forward, int n_gibbs, const GewekeOptions& options) {
  if (n_forward < 2 || n_gibbs < 2) throw InputError("validate_sampler needs at least 2 forward and 2 Gibbs samples");
  if (options.batches < 2 || n_gibbs < options.batches) throw InputError("validate_sampler: invalid batch count");
  ModelConfig config = base;
  config.validate();
  if (config.T < 1 || config.G < 1 || config.V < 1) throw InputError("validate_sampler needs T, G, V >= 1");
  const std::vector<std::vector<int>> cells(uz(config.T), std::vector<int>(uz(config.G), options.snippets_per_cell));
  const std::size_t n_stats = statistic_names().size();

  // Marginal-conditional: independent forward draws.
  Rng forward_rng(config.seed, 0xf0f0ULL);
  std::vector<double> f_sum(n_stats, 0.0), f_sq(n_stats, 0.0);
  for (int i = 0; i < n_forward; ++i) {
    ModelState s = draw_prior_state(config, forward_rng);
    Corpus c = generate_corpus(s, cells, options.snippet_length, forward_rng);
    const auto m = monitor(s, c);
    for (std::size_t j = 0; j < n_stats; ++j) {
      f_sum[j] += m[j];
      f_sq[j] += m[j] * m[j];
    }
  }

  // Successive-conditional: Gibbs sweep, then w | z, psi.
  Rng init_rng(config.seed, 0x9e9eULL);
  ModelState start = draw_prior_state(config, init_rng);
  Corpus corpus = generate_corpus(start, cells, options.snippet_length, init_rng);
  KernelOptions kernel;
  if (options.corrupt_chain_precision) kernel.prior_precision_scale = 0.5;
  GibbsSampler sampler(corpus, config, Rng(config.seed, 0x6e6eULL), start, kernel);
  Rng data_rng(config.seed, 0xdadaULL);

  auto cycle = [&](bool adapt) {
    sampler.sweep(adapt);
    resimulate_words(corpus, sampler.state(), data_rng);
    sampler.refresh_stats();
  };
  for (int i = 0; i < options.warmup; ++i) cycle(i < options.warmup / 2);

  const int per_batch = n_gibbs / options.batches;
  const int used = per_batch * options.batches;
  std::vector<std::vector<double>> batch_means(n_stats, std::vector<double>(uz(options.batches), 0.0));
  std::vector<double> g_sum(n_stats, 0.0);
  for (int i = 0; i < used; ++i) {
    for (int r = 0; r < std::max(options.thin, 1); ++r) cycle(false);
    const auto m = monitor(sampler.state(), corpus);
    for (std::size_t j = 0; j < n_stats; ++j) {
      g_sum[j] += m[j];
      batch_means[j][uz(i / per_batch)] += m[j] / per_batch;
    }
  }

  GewekeReport report;
  for (std::size_t j = 0; j < n_stats; ++j) {
    GewekeStatistic st;
    st.name = statistic_names()[j];
    const double nf = n_forward;
    st.forward_mean = f_sum[j] / nf;
    const double f_var = std::max(0.0, (f_sq[j] - nf * st.forward_mean * st.forward_mean) / (nf - 1.0));
    st.forward_se = std::sqrt(f_var / nf);
    st.gibbs_mean = g_sum[j] / used;
    double bvar = 0.0;
    for (double b : batch_means[j]) bvar += (b - st.gibbs_mean) * (b - st.gibbs_mean);
    bvar /= static_cast<double>(options.batches - 1);
    st.gibbs_se = std::sqrt(bvar / options.batches);
    const double se = std::sqrt(st.forward_se * st.forward_se + st.gibbs_se * st.gibbs_se);
    st.z = se > 0.0 ? (st.forward_mean - st.gibbs_mean) / se : 0.0;
    report.statistics.push_back(st);
  }
  return report;
}

}  // namespace gasc
