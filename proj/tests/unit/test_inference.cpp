#include <cmath>
#include <vector>

#include "doctest.h"
#include "gasc/errors.hpp"
#include "gasc/inference.hpp"

using namespace gasc;

namespace {

Corpus tiny_corpus(int T, int G, int V, const std::vector<Snippet>& snippets) {
  Corpus c;
  c.vocab = synthetic_vocabulary(V);
  c.T = T;
  c.G = G;
  for (int t = 0; t < T; ++t) c.time_labels.push_back(std::to_string(t));
  for (int g = 0; g < G; ++g) c.genre_labels.push_back("g" + std::to_string(g));
  c.snippets = snippets;
  for (std::size_t i = 0; i < c.snippets.size(); ++i) c.snippets[i].snippet_id = static_cast<int>(i);
  return c;
}

Snippet snip(int t, int g, std::vector<WordId> ids) {
  Snippet s;
  s.time_slice = t;
  s.genre_id = g;
  s.context_ids = std::move(ids);
  return s;
}

ModelConfig dims(int T, int G, int K, int V) {
  ModelConfig c;
  c.T = T;
  c.G = G;
  c.K = K;
  c.V = V;
  return c;
}

// Batch-means standard error of the mean of an autocorrelated series.
double batch_se(const std::vector<double>& x, int batches = 50) {
  const std::size_t per = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches), 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < per; ++i) means[static_cast<std::size_t>(b)] += x[static_cast<std::size_t>(b) * per + i];
    means[static_cast<std::size_t>(b)] /= static_cast<double>(per);
  }
  double m = 0;
  for (double v : means) m += v / batches;
  double var = 0;
  for (double v : means) var += (v - m) * (v - m) / (batches - 1);
  return std::sqrt(var / batches);
}

double mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("init state") {
  const Corpus c = tiny_corpus(2, 2, 4, {snip(0, 0, {1}), snip(1, 1, {2, 3}), snip(1, 0, {0})});
  ModelConfig cfg = ModelConfig::from_preset(Preset::setting1);
  cfg.K = 3;
  const ModelState s = init_state(c, cfg, 5);
  CHECK(s.k_phi == doctest::Approx(7.0 / 3.0));
  CHECK(s.T() == 2);
  CHECK(s.G() == 2);
  CHECK(s.K() == 3);
  CHECK(s.V() == 4);
  for (double x : s.phi.flat()) CHECK(x == 0.0);
  for (double x : s.psi.flat()) CHECK(x == 0.0);
  for (double p : softmax(s.phi.row(1, 1))) CHECK(p == doctest::Approx(1.0 / 3.0));
  for (int z : s.z) {
    CHECK(z >= 0);
    CHECK(z < 3);
  }
  CHECK(init_state(c, cfg, 5) == s);
}

TEST_CASE("z kernel reproduces the enumerated conditional") {
  const Corpus c = tiny_corpus(2, 1, 5, {snip(1, 0, {0, 3, 3})});
  const ModelConfig cfg = dims(2, 1, 2, 5);
  ModelState s = init_state(c, cfg, 1);
  s.phi(1, 0, 0) = 0.3;
  s.phi(1, 0, 1) = -0.2;
  const double psi[2][5] = {{0.5, -0.1, 0.0, 0.9, -1.0}, {-0.4, 0.2, 0.6, 0.1, 0.3}};
  for (int k = 0; k < 2; ++k) {
    for (int v = 0; v < 5; ++v) s.psi(1, k, v) = psi[k][v];
  }
  // p(k) ~ softmax(phi)_k prod_w softmax(psi_k)_w, written out directly
  std::vector<double> expect(2);
  for (int k = 0; k < 2; ++k) {
    double zpsi = 0;
    for (double x : psi[k]) zpsi += std::exp(x);
    expect[k] = std::exp(s.phi(1, 0, k)) * std::exp(psi[k][0]) * std::pow(std::exp(psi[k][3]), 2) / std::pow(zpsi, 3);
  }
  const double norm = expect[0] + expect[1];
  for (double& e : expect) e /= norm;

  SufficientStats stats = SufficientStats::compute(c, s.z, 2);
  Rng rng(99);
  const int n = 100000;
  std::vector<double> freq(2, 0.0);
  for (int i = 0; i < n; ++i) {
    sample_z(s, c, stats, rng);
    freq[static_cast<std::size_t>(s.z[0])] += 1.0 / n;
  }
  CHECK(0.5 * (std::abs(freq[0] - expect[0]) + std::abs(freq[1] - expect[1])) < 0.01);
  CHECK(stats == SufficientStats::compute(c, s.z, 2));
}

TEST_CASE("z kernel follows softmax(phi) when senses share word distributions") {
  const Corpus c = tiny_corpus(1, 1, 3, {snip(0, 0, {0, 1, 2})});
  ModelState s = init_state(c, dims(1, 1, 2, 3), 1);
  s.phi(0, 0, 0) = 1.0;
  for (int v = 0; v < 3; ++v) s.psi(0, 0, v) = s.psi(0, 1, v) = 0.1 * v;
  const auto post = sense_posterior(s, c.snippets[0]);
  CHECK(post[0] == doctest::Approx(softmax(s.phi.row(0, 0))[0]).epsilon(1e-12));
}

TEST_CASE("chain kernel without counts samples the prior conditional") {
  const Corpus c = tiny_corpus(3, 1, 2, {});
  const ModelConfig cfg = dims(3, 1, 2, 2);
  ModelState s = init_state(c, cfg, 1);
  s.k_phi = 1.0;
  s.phi(0, 0, 0) = 1.0;
  s.phi(2, 0, 0) = 0.2;
  s.phi(0, 0, 1) = -2.0;
  s.phi(2, 0, 1) = 0.0;
  const SufficientStats stats = SufficientStats::compute(c, s.z, 2);
  StepSizes steps = StepSizes::uniform(s, 1.5);
  AcceptanceCounter acc;
  Rng rng(7);
  std::vector<double> x0, x1;
  for (int i = 0; i < 10000; ++i) {
    sample_chain_vector({ChainKind::phi, 1, 0}, s, stats, cfg, steps, rng, acc);
    x0.push_back(s.phi(1, 0, 0));
    x1.push_back(s.phi(1, 0, 1));
  }
  CHECK(std::abs(mean(x0) - 0.6) < 3 * batch_se(x0));
  CHECK(std::abs(mean(x1) + 1.0) < 3 * batch_se(x1));
  // interior conditional precision is 2 k_phi
  double var = 0;
  for (double v : x0) var += (v - 0.6) * (v - 0.6) / x0.size();
  CHECK(var == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("a single word count raises its coordinate") {
  auto run = [](bool with_count) {
    const Corpus c = with_count ? tiny_corpus(1, 1, 3, {snip(0, 0, {1})}) : tiny_corpus(1, 1, 3, {});
    const ModelConfig cfg = dims(1, 1, 1, 3);
    ModelState s = init_state(c, cfg, 1);
    const SufficientStats stats = SufficientStats::compute(c, s.z, 1);
    StepSizes steps = StepSizes::uniform(s, 1.5);
    AcceptanceCounter acc;
    Rng rng(8);
    std::vector<double> x;
    for (int i = 0; i < 10000; ++i) {
      sample_chain_vector({ChainKind::psi, 0, 0}, s, stats, cfg, steps, rng, acc);
      x.push_back(s.psi(0, 0, 1));
    }
    return std::pair{mean(x), batch_se(x)};
  };
  const auto [prior_mean, prior_se] = run(false);
  const auto [post_mean, post_se] = run(true);
  CHECK(post_mean - prior_mean > 3 * std::hypot(prior_se, post_se));
}

TEST_CASE("conjugate precision update") {
  Rng rng(31);
  const int n = 100000;
  SUBCASE("constant chain, Gamma(3, 1)") {
    ModelConfig cfg = dims(3, 1, 2, 1);
    ModelState s;
    s.phi = Array3<double>(3, 1, 2, 0.4);
    s.psi = Array3<double>(3, 2, 1, 0.0);
    const auto p = k_phi_posterior(s, cfg);
    CHECK(p.shape == 3.0);
    CHECK(p.rate == 1.0);
    double m = 0;
    for (int i = 0; i < n; ++i) m += sample_k_phi(s, cfg, rng) / n;
    CHECK(std::abs(m - 3.0) / 3.0 < 0.01);
  }
  SUBCASE("squared increments 2, Gamma(8, 4)") {
    ModelConfig cfg = dims(3, 1, 1, 1);
    cfg.a = 7;
    cfg.b = 3;
    ModelState s;
    s.phi = Array3<double>(3, 1, 1, 0.0);
    s.phi(1, 0, 0) = 1.0;
    s.psi = Array3<double>(3, 1, 1, 0.0);
    const auto p = k_phi_posterior(s, cfg);
    CHECK(p.shape == 8.0);
    CHECK(p.rate == 4.0);
    double m = 0;
    for (int i = 0; i < n; ++i) m += sample_k_phi(s, cfg, rng) / n;
    CHECK(std::abs(m - 2.0) / 2.0 < 0.01);
  }
  SUBCASE("one slice leaves the prior") {
    ModelConfig cfg = dims(1, 2, 3, 1);
    cfg.a = 2.5;
    cfg.b = 0.5;
    ModelState s;
    s.phi = Array3<double>(1, 2, 3, 1.7);
    const auto p = k_phi_posterior(s, cfg);
    CHECK(p.shape == 2.5);
    CHECK(p.rate == 0.5);
  }
}

namespace {

Simulation small_sim(std::uint64_t seed, int G = 2) {
  ModelConfig cfg = dims(3, G, 3, 12);
  cfg.seed = seed;
  cfg.phi_anchor_precision = 0.25;
  std::vector<std::vector<int>> cells(3, std::vector<int>(static_cast<std::size_t>(G), 15));
  return simulate(cfg, cells, 6);
}

}  // namespace

TEST_CASE("incremental statistics match recomputation after every sweep") {
  const auto sim = small_sim(4);
  ModelConfig cfg = dims(3, 2, 3, 12);
  cfg.adapt_sweeps = 5;
  GibbsSampler sampler(sim.corpus, cfg, Rng(1, 1));
  for (int i = 0; i < 20; ++i) {
    sampler.sweep();
    CHECK(sampler.stats() == SufficientStats::compute(sim.corpus, sampler.state().z, 3));
    CHECK(sampler.state().all_finite());
    CHECK(sampler.state().k_phi > 0.0);
  }
  const TraceRow row = sampler.trace();
  CHECK(row.iteration == 20);
  CHECK(row.phi_acceptance > 0.0);
  CHECK(row.psi_acceptance > 0.0);
  CHECK(row.log_joint == doctest::Approx(log_joint(sampler.state(), sampler.stats(), cfg)));
}

TEST_CASE("sense counts sum to cell sizes") {
  const auto sim = small_sim(6);
  GibbsSampler sampler(sim.corpus, dims(3, 2, 3, 12), Rng(2, 1));
  sampler.sweep();
  const auto cells = sim.corpus.cell_counts();
  for (int t = 0; t < 3; ++t) {
    for (int g = 0; g < 2; ++g) {
      int s = 0;
      for (int k = 0; k < 3; ++k) s += sampler.stats().sense_counts(t, g, k);
      CHECK(s == cells[t][g]);
    }
  }
}

TEST_CASE("label swap leaves the likelihood unchanged and keeps statistics exact") {
  const auto sim = small_sim(8);
  const ModelConfig cfg = dims(3, 2, 3, 12);
  GibbsSampler sampler(sim.corpus, cfg, Rng(3, 1));
  for (int i = 0; i < 10; ++i) sampler.sweep();
  const ModelState start = sampler.state();
  const SufficientStats start_stats = sampler.stats();

  // Manually swapped copy: the exact Metropolis ratio is the change in log joint.
  ModelState swapped = start;
  for (int t = 1; t < 3; ++t) {
    for (int g = 0; g < 2; ++g) std::swap(swapped.phi(t, g, 0), swapped.phi(t, g, 2));
    for (int v = 0; v < 12; ++v) std::swap(swapped.psi(t, 0, v), swapped.psi(t, 2, v));
  }
  for (std::size_t d = 0; d < swapped.z.size(); ++d) {
    if (sim.corpus.snippets[d].time_slice < 1) continue;
    if (swapped.z[d] == 0) swapped.z[d] = 2;
    else if (swapped.z[d] == 2) swapped.z[d] = 0;
  }
  double ll_a = 0, ll_b = 0;
  for (const auto& s : sim.corpus.snippets) {
    ll_a += snippet_log_likelihood(start, s);
    ll_b += snippet_log_likelihood(swapped, s);
  }
  CHECK(ll_b == doctest::Approx(ll_a).epsilon(1e-12));
  const double log_ratio = log_joint(swapped, SufficientStats::compute(sim.corpus, swapped.z, 3), cfg) -
                           log_joint(start, start_stats, cfg);
  const double alpha = std::min(1.0, std::exp(log_ratio));

  Rng rng(77);
  const int n = 20000;
  int accepted = 0;
  for (int i = 0; i < n; ++i) {
    ModelState s = start;
    SufficientStats st = start_stats;
    if (propose_label_swap(s, st, sim.corpus, cfg, 1, 0, 2, rng)) {
      ++accepted;
      CHECK(s == swapped);
    } else {
      CHECK(s == start);
    }
    CHECK(st == SufficientStats::compute(sim.corpus, s.z, 3));
  }
  const double rate = accepted / double(n);
  const double se = std::sqrt(std::max(alpha * (1 - alpha), 1e-4) / n);
  CHECK(std::abs(rate - alpha) < 4 * se);
}

TEST_CASE("scan collapses genres and equals gasc on a one-genre corpus") {
  const auto sim = small_sim(10, 3);
  ModelConfig cfg;
  cfg.K = 3;
  cfg.n_iterations = 15;
  cfg.n_retain = 3;
  const FitResult scan = run_gibbs(sim.corpus, cfg, Variant::scan);
  REQUIRE(scan.parts.size() == 1);
  CHECK(scan.parts[0].samples.samples.size() == 3);
  for (const auto& s : scan.parts[0].samples.samples) CHECK(s.G() == 1);
  CHECK(scan.genre_labels.size() == 3);

  const FitResult gasc = run_gibbs(collapse_genres(sim.corpus), cfg, Variant::gasc);
  REQUIRE(gasc.parts.size() == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(gasc.parts[0].samples.samples[i] == scan.parts[0].samples.samples[i]);

  const FitResult indep = run_gibbs(sim.corpus, cfg, Variant::gasc_independent);
  CHECK(indep.parts.size() == 3);
  for (const auto& p : indep.parts) CHECK(p.samples.samples.front().G() == 1);
}

TEST_CASE("run_gibbs is deterministic and rejects empty corpora") {
  const auto sim = small_sim(12);
  ModelConfig cfg;
  cfg.K = 3;
  cfg.n_iterations = 10;
  cfg.n_retain = 2;
  const auto a = run_gibbs(sim.corpus, cfg, Variant::gasc);
  const auto b = run_gibbs(sim.corpus, cfg, Variant::gasc);
  CHECK(a.parts[0].samples.samples == b.parts[0].samples.samples);
  CHECK(a.parts[0].trace.size() == 10);
  Corpus empty = sim.corpus;
  empty.snippets.clear();
  CHECK_THROWS_AS(run_gibbs(empty, cfg, Variant::gasc), InputError);
}

TEST_CASE("sampler validation needs samples") {
  const ModelConfig cfg = dims(3, 2, 2, 5);
  CHECK_THROWS_AS(validate_sampler(cfg, 0, 100), InputError);
  CHECK_THROWS_AS(validate_sampler(cfg, 100, 0), InputError);
}
