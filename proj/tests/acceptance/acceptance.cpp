// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gasc/checkpoint.hpp"
#include "gasc/cli.hpp"
#include "gasc/errors.hpp"
#include "gasc/eval.hpp"
#include "gasc/inference.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gasc;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << fmt::format("{} [{}] {}: {} ({:.1f} s)", o.pass ? "PASS" : "FAIL", id, name, o.detail, seconds_since(t0))
            << std::endl;
}

fs::path scratch_dir(const std::string& tag) {
  std::random_device rd;
  const fs::path p = fs::temp_directory_path() / fmt::format("gasc_acceptance_{}_{}", tag, rd());
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

// --- 1: z kernel -----------------------------------------------------------

Outcome z_kernel() {
  const auto t0 = Clock::now();
  Corpus c;
  c.vocab = synthetic_vocabulary(5);
  c.T = 2;
  c.G = 1;
  c.time_labels = {"0", "1"};
  c.genre_labels = {"g0"};
  Snippet s;
  s.time_slice = 1;
  s.context_ids = {0, 2, 2, 4};
  c.snippets = {s};

  ModelConfig cfg;
  cfg.T = 2;
  cfg.G = 1;
  cfg.K = 2;
  cfg.V = 5;
  ModelState st = init_state(c, cfg, 1);
  st.phi(1, 0, 0) = 0.4;
  st.phi(1, 0, 1) = -0.3;
  const double psi[2][5] = {{0.2, -0.5, 1.1, 0.0, -0.7}, {-0.1, 0.3, 0.4, 0.6, 0.2}};
  for (int k = 0; k < 2; ++k) {
    for (int v = 0; v < 5; ++v) st.psi(1, k, v) = psi[k][v];
  }
  // Enumerated conditional in probability space.
  double w[2];
  for (int k = 0; k < 2; ++k) {
    double z = 0;
    for (double x : psi[k]) z += std::exp(x);
    w[k] = std::exp(st.phi(1, 0, k));
    for (WordId id : s.context_ids) w[k] *= std::exp(psi[k][id]) / z;
  }
  const double p0 = w[0] / (w[0] + w[1]);

  SufficientStats stats = SufficientStats::compute(c, st.z, 2);
  Rng rng(2024);
  const int n = 100000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) {
    sample_z(st, c, stats, rng);
    zeros += st.z[0] == 0;
  }
  const double tv = std::abs(zeros / double(n) - p0);  // TV of a two-point distribution
  const double secs = seconds_since(t0);
  return {tv < 0.01 && secs < 10.0, fmt::format("TV {:.5f} (< 0.01) against enumerated p(z=0) = {:.4f}", tv, p0)};
}

// --- 2: Geweke -------------------------------------------------------------

Outcome geweke() {
  const auto t0 = Clock::now();
  ModelConfig cfg;
  cfg.T = 3;
  cfg.G = 2;
  cfg.K = 2;
  cfg.V = 5;
  cfg.seed = 1;
  const double ok = validate_sampler(cfg, 10000, 10000).max_abs_z();
  GewekeOptions broken;
  broken.corrupt_chain_precision = true;
  const double bad = validate_sampler(cfg, 10000, 10000, broken).max_abs_z();
  const double secs = seconds_since(t0);
  return {ok < 4.0 && bad > 6.0 && secs < 300.0,
          fmt::format("correct kernels max |z| {:.2f} (< 4); halved precision max |z| {:.2f} (> 6)", ok, bad)};
}

// --- 3: conjugate K_phi update --------------------------------------------

Outcome k_phi_update() {
  const auto t0 = Clock::now();
  Rng rng(77);
  const int n = 100000;
  auto empirical = [&](const ModelState& s, const ModelConfig& c) {
    double m = 0;
    for (int i = 0; i < n; ++i) m += sample_k_phi(s, c, rng);
    return m / n;
  };
  ModelConfig c1;
  c1.a = 1;
  c1.b = 1;
  ModelState s1;
  s1.phi = Array3<double>(3, 1, 2, 0.7);  // constant chain
  ModelConfig c2;
  c2.a = 7;
  c2.b = 3;
  ModelState s2;
  s2.phi = Array3<double>(3, 1, 1, 0.0);
  s2.phi(1, 0, 0) = 1.0;  // increments +1, -1
  const double m1 = empirical(s1, c1), m2 = empirical(s2, c2);
  const double e1 = std::abs(m1 - 3.0) / 3.0, e2 = std::abs(m2 - 2.0) / 2.0;
  const double secs = seconds_since(t0);
  return {e1 < 0.01 && e2 < 0.01 && secs < 10.0,
          fmt::format("Gamma(3,1) mean {:.4f} (rel err {:.4f}); Gamma(8,4) mean {:.4f} (rel err {:.4f})", m1, e1, m2,
                      e2)};
}

// --- synthetic family shared by criteria 4, 5 and 8 ------------------------

constexpr int kT = 5, kG = 2, kK = 3, kV = 50, kPerCell = 200;
constexpr double kCouplingAnchor = 0.25;

// Strong genre-sense coupling: a diffuse N(0, precision 0.25) start for the
// sense logits makes each genre's sense mixture far from uniform and far
// from the other genre's. The fit itself keeps the default anchor.
Simulation family_member(std::uint64_t seed) {
  ModelConfig c = ModelConfig::from_preset(Preset::setting3);
  c.T = kT;
  c.G = kG;
  c.K = kK;
  c.V = kV;
  c.seed = seed;
  c.phi_anchor_precision = kCouplingAnchor;
  return simulate(c, std::vector<std::vector<int>>(kT, std::vector<int>(kG, kPerCell)));
}

ModelConfig fit_config(int K, std::uint64_t seed) {
  ModelConfig c = ModelConfig::from_preset(Preset::setting3);
  c.K = K;
  c.seed = seed;
  return c;
}

std::vector<std::vector<double>> realized_proportions(const Simulation& sim) {
  std::vector<std::vector<double>> p(kT * kG, std::vector<double>(kK, 0.0));
  std::vector<int> n(kT * kG, 0);
  for (std::size_t d = 0; d < sim.corpus.snippets.size(); ++d) {
    const auto& s = sim.corpus.snippets[d];
    const int cell = s.time_slice * kG + s.genre_id;
    p[cell][sim.truth.z[d]] += 1.0;
    ++n[cell];
  }
  for (int cell = 0; cell < kT * kG; ++cell) {
    for (double& x : p[cell]) x /= n[cell];
  }
  return p;
}

std::vector<std::vector<double>> generating_proportions(const Simulation& sim) {
  std::vector<std::vector<double>> p;
  for (int t = 0; t < kT; ++t) {
    for (int g = 0; g < kG; ++g) p.push_back(softmax(sim.truth.phi.row(t, g)));
  }
  return p;
}

Outcome recovery() {
  const auto t0 = Clock::now();
  int ok = 0;
  std::string per_seed, diag;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Simulation sim = family_member(seed);
    const FitResult fit = run_gibbs(sim.corpus, fit_config(kK, seed), Variant::gasc);
    const EvolutionTable table = sense_evolution_table(fit.parts[0].samples, sim.corpus);
    std::vector<std::vector<double>> est;
    for (const auto& r : table.rows) est.push_back(r.proportions);
    const double tv = align_senses(est, realized_proportions(sim)).max_tv;
    const double tv_gen = align_senses(est, generating_proportions(sim)).max_tv;
    ok += tv < 0.1;
    per_seed += fmt::format("{}{:.3f}", seed > 1 ? " " : "", tv);
    diag += fmt::format("{}{:.3f}", seed > 1 ? " " : "", tv_gen);
  }
  const double secs = seconds_since(t0);
  return {ok >= 8 && secs < 900.0,
          fmt::format("{}/10 seeds within TV 0.1 of realized proportions (need 8); max TV per seed [{}]; "
                      "against generating softmax(phi) [{}]",
                      ok, per_seed, diag)};
}

// --- 5: genre advantage ------------------------------------------------------

Outcome genre_advantage() {
  std::string detail;
  bool pass = true;
  for (int K : {3, 5}) {
    int wins = 0;
    double mean_gap = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Simulation sim = family_member(seed);
      const auto [train, test] = split_train_test(sim.corpus, 0.2, seed);
      const double gasc = heldout_loglik(run_gibbs(train, fit_config(K, seed), Variant::gasc), test);
      const double scan = heldout_loglik(run_gibbs(train, fit_config(K, seed), Variant::scan), test);
      wins += gasc > scan;
      mean_gap += (gasc - scan) / 10.0;
    }
    pass = pass && wins >= 8;
    detail += fmt::format("{}K={}: gasc > scan on {}/10 (mean LL gap {:.1f})", K == 3 ? "" : "; ", K, wins, mean_gap);
  }
  return {pass, detail};
}

// --- 6: metric oracles -------------------------------------------------------

ExpertAnnotation ann(const std::string& sense, std::vector<WordId> ctx) {
  ExpertAnnotation a;
  a.sense_label = sense;
  a.context_ids = std::move(ctx);
  a.basis = AnnotationBasis::collocates;
  return a;
}

SenseWordList top_list(std::vector<std::pair<WordId, double>> entries) {
  SenseWordList l;
  for (auto [w, p] : entries) l.entries.push_back({w, p});
  return l;
}

Outcome metric_oracles() {
  std::vector<std::string> bad;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) bad.push_back(what);
  };
  // conf: P~ = (0.6, 0.4), m = (1, 0.5)
  const auto e1 = ExpertContexts::build({ann("s", {0, 1}), ann("t", {1})});
  expect(close(confidence(top_list({{0, 0.6}, {1, 0.4}}), 0, e1), 0.8), "conf 0.8");
  expect(close(confidence(top_list({{7, 1.0}}), 0, e1), 0.0), "conf disjoint 0");
  expect(close(confidence(top_list({{0, 1.0}}), 0, e1), 1.0), "conf single word 1");
  // match rule
  expect(match_senses({{0.6, 0, 0}, {0.2, 0, 0}, {0.1, 0, 0}}, 3).assignment[0] == 0, "match (0.6,0.2,0.1)");
  expect(!match_senses({{0.4, 0, 0}, {0.35, 0, 0}, {0.3, 0, 0}}, 3).assignment[0], "NA (0.4,0.35,0.3)");
  expect(!match_senses({{0.5, 0}}, 2).assignment[0], "NA K=1 (0.5), S=2");
  // precision/recall: u 0.5 and v 0.3 correct, x 0.2 wrong, weight 2
  const auto e2 = ExpertContexts::build({ann("s", {0, 1}), ann("other", {2})});
  const auto top = top_list({{0, 0.5}, {1, 0.3}, {2, 0.2}});
  const auto match = match_senses({{confidence(top, 0, e2), confidence(top, 1, e2)}}, e2.senses());
  const auto r = precision_recall(match, {top}, e2);
  expect(r.precision && close(*r.precision, 0.8), "P 0.8");
  expect(r.recall && close(*r.recall, 0.4), "R 0.4");
  expect(r.f1 && close(*r.f1, 8.0 / 15.0), "F1 8/15");
  expect(close(f1_score(0.8, 0.4), 8.0 / 15.0), "f1_score");
  // spearman
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const auto up = spearman(x, {0.1, 0.2, 0.3, 10, 11});
  const auto down = spearman(x, {5, 4, 3, 2, -7});
  expect(up.rho == 1.0, "rho = 1 exactly");
  expect(down.rho == -1.0, "rho = -1 exactly");
  expect(up.p_value && close(*up.p_value, 2.0 / 120.0), "exact p = 2/120");
  // hand-computed: ranks (1..5) vs (2,1,3,5,4): sum d^2 = 4, rho = 1 - 6*4/120 = 0.8
  const auto mid = spearman(x, {20, 10, 30, 50, 40});
  expect(mid.rho && close(*mid.rho, 0.8), "rho 0.8");
  std::string detail = bad.empty() ? "conf, match rule, P/R/F1 and spearman fixtures reproduced to 1e-9"
                                   : "mismatched:";
  for (const auto& b : bad) detail += " " + b + ";";
  return {bad.empty(), detail};
}

// --- CLI-driven criteria -----------------------------------------------------

CommonArgs common(const fs::path& out, const std::string& config = "") {
  CommonArgs c;
  c.out = out.string();
  c.config = config;
  return c;
}

fs::path simulate_to(const fs::path& dir, int snippets_per_cell, const std::string& config = "") {
  SimulateArgs s;
  s.common = common(dir, config);
  s.common.k = 3;
  s.common.seed = 5;
  s.T = 3;
  s.G = 2;
  s.V = 30;
  s.snippets_per_cell = snippets_per_cell;
  cmd_simulate(s);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Outcome preset_fidelity() {
  const fs::path dir = scratch_dir("presets");
  const fs::path sim = simulate_to(dir / "sim", 20);
  write_file(dir / "fit.cfg", "n_iterations = 5\nn_retain = 1\ntarget = target\nK = 3\n");
  const char* expected[3][3] = {{"7", "3", "10"}, {"7", "3", "100"}, {"1", "1", "100"}};
  std::string detail;
  bool pass = true;
  for (int p = 1; p <= 3; ++p) {
    FitArgs f;
    f.common = common(dir / fmt::format("p{}", p), (dir / "fit.cfg").string());
    f.common.preset = std::to_string(p);
    f.corpus = (sim / "corpus.jsonl").string();
    cmd_fit(f);
    const json m = json::parse(slurp(dir / fmt::format("p{}", p) / "manifest.json"));
    const auto& c = m["config"];
    const bool ok = c["a"] == expected[p - 1][0] && c["b"] == expected[p - 1][1] && c["k_psi"] == expected[p - 1][2] &&
                    c["preset"] == fmt::format("setting{}", p);
    pass = pass && ok;
    detail += fmt::format("{}setting{}: a={} b={} K_psi={}", p > 1 ? "; " : "", p, c["a"].get<std::string>(),
                          c["b"].get<std::string>(), c["k_psi"].get<std::string>());
  }
  fs::remove_all(dir);
  return {pass, detail + " (read back from manifest.json)"};
}

double mean_drift(const SampleSet& set) {
  double total = 0;
  for (const auto& s : set.samples) {
    for (int k = 0; k < s.K(); ++k) {
      for (int t = 0; t + 1 < s.T(); ++t) {
        const auto p = softmax(s.psi.row(t, k)), q = softmax(s.psi.row(t + 1, k));
        for (std::size_t v = 0; v < p.size(); ++v) total += std::abs(q[v] - p[v]);
      }
    }
  }
  return total / static_cast<double>(set.samples.size() * static_cast<std::size_t>(set.samples.front().K()));
}

Outcome smoothing() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Simulation sim = family_member(seed);
    ModelConfig strong = fit_config(kK, seed), weak = fit_config(kK, seed);
    weak.k_psi = 10.0;
    weak.preset = Preset::custom;
    const double d100 = mean_drift(run_gibbs(sim.corpus, strong, Variant::gasc).parts[0].samples);
    const double d10 = mean_drift(run_gibbs(sim.corpus, weak, Variant::gasc).parts[0].samples);
    ok += d100 < d10;
    if (seed == 1) detail = fmt::format("seed 1 drift {:.4f} (K_psi=100) vs {:.4f} (K_psi=10)", d100, d10);
  }
  return {ok == 10, fmt::format("{}; strictly smaller on {}/10 seeds of the synthetic family", detail, ok)};
}

Outcome determinism() {
  const fs::path dir = scratch_dir("determinism");
  const fs::path sim = simulate_to(dir / "sim", 60);
  write_file(dir / "fit.cfg", "target = target\nK = 3\ncheckpoint_every = 250\n");
  for (const char* run : {"a", "b"}) {
    FitArgs f;
    f.common = common(dir / run, (dir / "fit.cfg").string());
    f.corpus = (sim / "corpus.jsonl").string();
    cmd_fit(f);
  }
  int compared = 0;
  bool same = true;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const fs::path other = dir / "b" / fs::relative(entry.path(), dir / "a");
    same = same && fs::exists(other) && slurp(entry.path()) == slurp(other);
    ++compared;
  }
  const std::size_t bytes = fs::file_size(dir / "a" / "checkpoint.json");
  fs::remove_all(dir);
  return {same && compared >= 3,
          fmt::format("{} files (checkpoint.json, trace.csv, periodic states) byte-identical across two runs; "
                      "checkpoint {} bytes",
                      compared, bytes)};
}

// --- 10: end-to-end pipeline -------------------------------------------------

Outcome pipeline() {
  const fs::path dir = scratch_dir("pipeline");
  const char* corpus_env = std::getenv("GASC_CORPUS");
  const char* ann_env = std::getenv("GASC_ANNOTATIONS");
  const char* config_env = std::getenv("GASC_CONFIG");
  const bool external = corpus_env && ann_env && config_env;
  std::string corpus, annotations, config, fit_config_path;
  if (external) {
    corpus = corpus_env;
    annotations = ann_env;
    config = config_env;
    fit_config_path = config;
  } else {
    // Stand-in data: each sense concentrates on few words, as annotated
    // senses tend to.
    write_file(dir / "sim.cfg", "psi_anchor_precision = 0.0001\n");
    const fs::path sim = simulate_to(dir / "sim", 40, (dir / "sim.cfg").string());
    corpus = (sim / "corpus.jsonl").string();
    annotations = (sim / "annotations.csv").string();
    write_file(dir / "run.cfg", "target = target\nK = 3\ntime_order = 0,1,2\nn_iterations = 300\n");
    config = fit_config_path = (dir / "run.cfg").string();
  }

  FitArgs f;
  f.common = common(dir / "fit", fit_config_path);
  f.corpus = corpus;
  cmd_fit(f);

  EvalTruthArgs e;
  e.common = common(dir / "eval", config);
  e.checkpoint = (dir / "fit" / "checkpoint.json").string();
  e.annotations = annotations;
  e.corpus = corpus;
  std::string eval_note = "matched";
  try {
    cmd_eval_truth(e);
  } catch (const DegenerateEvaluation&) {
    eval_note = "no expert sense matched";
  }

  CorrelateArgs c;
  c.common = common(dir / "corr", config);
  c.annotations = annotations;
  c.collocates_only = true;
  cmd_correlate(c);

  std::vector<std::string> missing;
  for (const char* f : {"fit/checkpoint.json", "fit/trace.csv", "eval/eval_report.json", "eval/eval_pairs.csv",
                        "eval/conf_matrix.csv", "eval/sense_evolution.csv", "corr/correlations.csv"}) {
    if (!fs::exists(dir / f)) missing.push_back(f);
  }
  std::string f1 = "NA";
  if (fs::exists(dir / "eval/eval_report.json")) {
    const json r = json::parse(slurp(dir / "eval/eval_report.json"));
    if (!r["f1"].is_null()) f1 = fmt::format("{:.3f}", r["f1"].get<double>());
  }
  fs::remove_all(dir);
  const std::string source = external ? "supplied corpus and annotations"
                                      : "synthetic stand-in (corpus and expert annotations not supplied; "
                                        "paper-scale F1 and rho values are not checked)";
  return {missing.empty(), fmt::format("load -> fit -> eval-truth -> correlate ran on {}; tables emitted, {}, F1 {}",
                                       source, eval_note, f1)};
}

}  // namespace

int main() {
  report(1, "z kernel exactness", z_kernel);
  report(2, "chain and precision kernels (joint-distribution test)", geweke);
  report(3, "conjugate K_phi update", k_phi_update);
  report(4, "synthetic recovery", recovery);
  report(5, "genre advantage in held-out likelihood", genre_advantage);
  report(6, "metric oracles", metric_oracles);
  report(7, "preset fidelity", preset_fidelity);
  report(8, "smoothing monotonicity", smoothing);
  report(9, "determinism", determinism);
  report(10, "end-to-end pipeline", pipeline);
  std::cout << fmt::format("{} of 10 criteria failed", failures) << std::endl;
  return failures ? 1 : 0;
}
