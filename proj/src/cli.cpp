#include "gasc/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include <openssl/evp.h>
#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "gasc/checkpoint.hpp"
#include "gasc/errors.hpp"
#include "gasc/eval.hpp"
#include "gasc/inference.hpp"

namespace gasc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Shortest text that reads back to the same double.
std::string num(double x) { return fmt::format("{}", x); }

std::string opt_num(const std::optional<double>& x) { return x ? num(*x) : "NA"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + csv_field(fields[i]);
  return out + "\n";
}

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw InputError("--out is required");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

json manifest_base(const std::string& command, const RunConfig& cfg) {
  json m;
  m["command"] = command;
  m["tool_version"] = kToolVersion;
  m["rng_algorithm"] = Rng::kAlgorithm;
  m["seed"] = cfg.model.seed;
  m["variant"] = to_string(cfg.variant);
  json config = json::object();
  for (const auto& [k, v] : cfg.effective()) config[k] = v;
  m["config"] = config;
  return m;
}

void write_manifest(const fs::path& dir, json manifest, Clock::time_point start) {
  manifest["timings"]["total_seconds"] = seconds_since(start);
  write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

std::string single_target(const RunConfig& cfg) {
  if (cfg.targets.size() != 1) throw InputError("exactly one target lemma is required (config key 'target' or --target)");
  return cfg.targets.front();
}

LoadOptions load_options(const RunConfig& cfg, const std::string& target) {
  LoadOptions o;
  o.target = target;
  o.window = cfg.model.W;
  o.genre_map = GenreMap::parse(cfg.genre_map);
  o.time_order = cfg.time_order;
  o.min_count = cfg.min_count;
  o.respect_sentences = cfg.respect_sentences;
  return o;
}

json corpus_summary(const std::string& path, const Corpus& c) {
  return {{"path", path},
          {"sha256", sha256_file(path)},
          {"T", c.T},
          {"G", c.G},
          {"V", c.V()},
          {"snippets", c.snippets.size()},
          {"time_labels", c.time_labels},
          {"genre_labels", c.genre_labels}};
}

// Relabels genre ids into the label order of a fitted model.
void align_genres(Corpus& corpus, const std::vector<std::string>& labels) {
  std::vector<int> remap(uz(corpus.G), -1);
  for (int g = 0; g < corpus.G; ++g) {
    const auto it = std::find(labels.begin(), labels.end(), corpus.genre_labels[uz(g)]);
    if (it == labels.end()) throw InputError("genre '" + corpus.genre_labels[uz(g)] + "' is not in the checkpoint");
    remap[uz(g)] = static_cast<int>(it - labels.begin());
  }
  for (auto& sn : corpus.snippets) sn.genre_id = remap[uz(sn.genre_id)];
  corpus.G = static_cast<int>(labels.size());
  corpus.genre_labels = labels;
}

std::string trace_csv(const FitResult& fit) {
  std::string out = csv_row({"part", "iteration", "log_joint", "k_phi", "phi_acceptance", "psi_acceptance",
                             "swap_acceptance"});
  for (const auto& part : fit.parts) {
    for (const auto& r : part.trace) {
      out += csv_row({std::to_string(r.part), std::to_string(r.iteration), num(r.log_joint), num(r.k_phi),
                      num(r.phi_acceptance), num(r.psi_acceptance), num(r.swap_acceptance)});
    }
  }
  return out;
}

int effective_genres(const FitResult& fit) {
  return fit.parts.empty() || fit.parts.front().samples.samples.empty() ? 0
                                                                         : fit.parts.front().samples.samples.front().G();
}

std::unordered_set<WordId> stopword_ids(const std::string& path, const Vocabulary& vocab) {
  std::unordered_set<WordId> ids;
  if (path.empty()) {
    std::cerr << "warning: no stop-word list given; evaluating without stop-word removal\n";
    return ids;
  }
  for (const auto& w : load_stopwords(path)) {
    if (auto id = vocab.find(w)) ids.insert(*id);
  }
  return ids;
}

json report_json(const EvalReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"model_sense", p.model_sense},
                     {"expert_sense", p.expert_sense},
                     {"precision", p.precision},
                     {"recall", p.recall}});
  }
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return {{"top_n", r.top_n},
          {"raw_count_precision", r.raw_count_precision},
          {"pairs", pairs},
          {"precision", opt(r.precision)},
          {"recall", opt(r.recall)},
          {"f1", opt(r.f1)},
          {"diagnostics", r.diagnostics}};
}

}  // namespace

std::string sha256_file(const std::string& path) {
  const std::string data = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw InputError("SHA-256 computation failed for " + path);
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : load_config(args.config);
  if (args.preset) apply_setting(cfg, "preset", *args.preset);
  if (args.k) cfg.model.K = *args.k;
  if (args.seed) cfg.model.seed = *args.seed;
  if (args.variant) cfg.variant = parse_variant(*args.variant);
  if (args.target) apply_setting(cfg, "target", *args.target);
  return cfg;
}

void cmd_fit(const FitArgs& args) {
  const auto start = Clock::now();
  RunConfig cfg = resolve_config(args.common);
  if (cfg.model.K < 2) throw InputError("K must be >= 2");
  const fs::path dir = ensure_out_dir(args.common.out);
  const std::string target = single_target(cfg);

  CorpusLoadReport load_report;
  const Corpus corpus = load_corpus(args.corpus, load_options(cfg, target), &load_report);
  const double load_seconds = seconds_since(start);

  RunOptions run;
  run.checkpoint_every = cfg.checkpoint_every;
  const CorpusMeta meta{target, cfg.model.W, cfg.genre_map};
  if (cfg.checkpoint_every > 0) {
    const fs::path cdir = dir / "checkpoints";
    fs::create_directories(cdir);
    run.on_checkpoint = [&, cdir](const ModelState& s, int part, int it) {
      StateCheckpoint c;
      c.config = cfg.model;
      c.state = s;
      c.vocab = corpus.vocab;
      c.time_labels = corpus.time_labels;
      c.genre_labels = cfg.variant == Variant::scan ? std::vector<std::string>{"all"} : corpus.genre_labels;
      c.meta = meta;
      c.part = part;
      c.iteration = it;
      write_text((cdir / fmt::format("state_p{}_it{:06}.json", part, it)).string(), serialize_state(c));
    };
  }
  const auto fit_start = Clock::now();
  const FitResult fit = run_gibbs(corpus, cfg.model, cfg.variant, run);
  const double fit_seconds = seconds_since(fit_start);

  write_text((dir / "checkpoint.json").string(), serialize_fit({fit, meta}));
  write_text((dir / "trace.csv").string(), trace_csv(fit));

  json m = manifest_base("fit", cfg);
  m["corpus"] = corpus_summary(args.corpus, corpus);
  m["corpus"]["documents"] = load_report.documents;
  m["corpus"]["occurrences"] = load_report.occurrences;
  m["G_effective"] = effective_genres(fit);
  m["parts"] = fit.parts.size();
  m["outputs"] = {"checkpoint.json", "trace.csv"};
  m["timings"]["load_seconds"] = load_seconds;
  m["timings"]["fit_seconds"] = fit_seconds;
  write_manifest(dir, m, start);
}

void cmd_simulate(const SimulateArgs& args) {
  const auto start = Clock::now();
  RunConfig cfg = resolve_config(args.common);
  const fs::path dir = ensure_out_dir(args.common.out);
  const std::string target = cfg.targets.empty() ? "target" : single_target(cfg);
  ModelConfig model = cfg.model;
  model.T = args.T;
  model.G = args.G;
  model.V = args.V;
  if (args.snippets_per_cell < 0) throw InputError("snippets per cell must be >= 0");
  const std::vector<std::vector<int>> cells(uz(args.T), std::vector<int>(uz(args.G), args.snippets_per_cell));
  if (args.T < 1 || args.G < 1 || args.V < 1) throw InputError("T, G and V must be >= 1");
  Simulation sim = simulate(model, cells, args.snippet_length);
  const Corpus& c = sim.corpus;

  std::string jsonl;
  std::string csv = csv_row({"date", "genre", "author", "work", "target", "sense_id", "basis", "context"});
  for (std::size_t d = 0; d < c.snippets.size(); ++d) {
    const auto& sn = c.snippets[d];
    std::vector<std::string> lemmas;
    const std::size_t left = sn.context_ids.size() / 2;
    for (std::size_t i = 0; i < sn.context_ids.size(); ++i) {
      if (i == left) lemmas.push_back(target);
      lemmas.push_back(c.vocab.word(sn.context_ids[i]));
    }
    if (left == sn.context_ids.size()) lemmas.push_back(target);
    const json doc = {{"doc_id", sn.source_ref},
                      {"time_slice_label", c.time_labels[uz(sn.time_slice)]},
                      {"genre_label", c.genre_labels[uz(sn.genre_id)]},
                      {"lemmas", lemmas}};
    jsonl += doc.dump() + "\n";
    std::string context;
    for (std::size_t i = 0; i < lemmas.size(); ++i) context += (i ? " " : "") + lemmas[i];
    csv += csv_row({c.time_labels[uz(sn.time_slice)], c.genre_labels[uz(sn.genre_id)], "simulated", sn.source_ref,
                    target, fmt::format("sense{}", sim.truth.z[d]), "collocates", context});
  }
  write_text((dir / "corpus.jsonl").string(), jsonl);
  write_text((dir / "annotations.csv").string(), csv);

  StateCheckpoint truth;
  truth.config = model;
  truth.state = sim.truth;
  truth.vocab = c.vocab;
  truth.time_labels = c.time_labels;
  truth.genre_labels = c.genre_labels;
  truth.cell_counts = c.cell_counts();
  truth.meta = {target, model.W, ""};
  write_text((dir / "truth.json").string(), serialize_state(truth));

  json m = manifest_base("simulate", cfg);
  m["dimensions"] = {{"T", args.T}, {"G", args.G}, {"K", model.K}, {"V", args.V}};
  m["snippets_per_cell"] = args.snippets_per_cell;
  m["snippet_length"] = args.snippet_length > 0 ? args.snippet_length : 2 * model.W;
  m["target"] = target;
  m["truth_k_phi"] = sim.truth.k_phi;
  m["outputs"] = {"corpus.jsonl", "truth.json", "annotations.csv"};
  write_manifest(dir, m, start);
}

void cmd_sweep_k(const SweepArgs& args) {
  const auto start = Clock::now();
  RunConfig cfg = resolve_config(args.common);
  const fs::path dir = ensure_out_dir(args.common.out);
  if (args.k_values.empty()) throw InputError("--k-list is empty");
  for (int k : args.k_values) {
    if (k < 2) throw InputError("K values must be >= 2");
  }
  if (cfg.targets.empty()) throw InputError("at least one target lemma is required");
  std::vector<Variant> variants;
  for (const auto& v : args.variants) variants.push_back(parse_variant(v));

  // One fold per target word, or repeated seeded splits for a single target.
  struct Fold {
    int index;
    std::string target;
  };
  std::vector<Fold> folds;
  if (cfg.targets.size() > 1) {
    for (std::size_t i = 0; i < cfg.targets.size(); ++i) folds.push_back({static_cast<int>(i), cfg.targets[i]});
  } else {
    if (args.folds < 1) throw InputError("--folds must be >= 1");
    for (int i = 0; i < args.folds; ++i) folds.push_back({i, cfg.targets.front()});
  }

  struct Row {
    int K = 0;
    Variant variant = Variant::gasc;
    int fold = 0;
    std::string target;
    int train = 0;
    int test = 0;
    std::optional<double> ll;
    std::string status = "ok";
  };
  std::vector<Row> rows;
  std::map<std::string, json> corpora;
  for (const auto& fold : folds) {
    const std::uint64_t fold_seed = cfg.model.seed + static_cast<std::uint64_t>(fold.index);
    std::optional<std::pair<Corpus, Corpus>> split;
    std::string load_error;
    try {
      const Corpus corpus = load_corpus(args.corpus, load_options(cfg, fold.target));
      split = split_train_test(corpus, cfg.test_fraction, fold_seed);
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    for (int K : args.k_values) {
      for (Variant v : variants) {
        Row row;
        row.K = K;
        row.variant = v;
        row.fold = fold.index;
        row.target = fold.target;
        if (!split) {
          row.status = "error: " + load_error;
          rows.push_back(row);
          continue;
        }
        row.train = static_cast<int>(split->first.snippets.size());
        row.test = static_cast<int>(split->second.snippets.size());
        try {
          ModelConfig model = cfg.model;
          model.K = K;
          model.seed = fold_seed;
          const FitResult fit = run_gibbs(split->first, model, v);
          row.ll = heldout_loglik(fit, split->second);
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
        }
        std::cerr << fmt::format("sweep K={} variant={} fold={} status={}\n", K, to_string(v), fold.index, row.status);
        rows.push_back(row);
      }
    }
  }

  std::string folds_csv = csv_row({"K", "variant", "fold", "target", "train_snippets", "test_snippets", "heldout_ll",
                                   "ll_per_snippet", "status"});
  for (const auto& r : rows) {
    folds_csv += csv_row({std::to_string(r.K), to_string(r.variant), std::to_string(r.fold), r.target,
                          std::to_string(r.train), std::to_string(r.test), opt_num(r.ll),
                          r.ll && r.test > 0 ? num(*r.ll / r.test) : "NA", r.status});
  }
  write_text((dir / "sweep_folds.csv").string(), folds_csv);

  auto mean_se = [](const std::vector<double>& x) -> std::pair<std::string, std::string> {
    if (x.empty()) return {"NA", "NA"};
    const double n = static_cast<double>(x.size());
    double m = 0.0;
    for (double v : x) m += v;
    m /= n;
    if (x.size() < 2) return {num(m), "NA"};
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {num(m), num(std::sqrt(ss / (n - 1.0) / n))};
  };
  std::string summary = csv_row({"K", "variant", "folds_ok", "folds_failed", "mean_heldout_ll", "se_heldout_ll",
                                 "per_word_mean_ll_per_snippet", "per_word_se_ll_per_snippet",
                                 "pooled_ll_per_snippet"});
  for (int K : args.k_values) {
    for (Variant v : variants) {
      std::vector<double> lls, per;
      double pooled_ll = 0.0;
      long pooled_n = 0;
      int failed = 0;
      for (const auto& r : rows) {
        if (r.K != K || r.variant != v) continue;
        if (!r.ll) {
          ++failed;
          continue;
        }
        lls.push_back(*r.ll);
        if (r.test > 0) per.push_back(*r.ll / r.test);
        pooled_ll += *r.ll;
        pooled_n += r.test;
      }
      const auto [m, se] = mean_se(lls);
      const auto [pm, pse] = mean_se(per);
      summary += csv_row({std::to_string(K), to_string(v), std::to_string(lls.size()), std::to_string(failed), m, se,
                          pm, pse, pooled_n > 0 ? num(pooled_ll / static_cast<double>(pooled_n)) : "NA"});
    }
  }
  write_text((dir / "sweep_summary.csv").string(), summary);

  json m = manifest_base("sweep-k", cfg);
  m["corpus"] = {{"path", args.corpus}, {"sha256", sha256_file(args.corpus)}};
  m["k_values"] = args.k_values;
  m["folds"] = folds.size();
  m["fold_protocol"] = cfg.targets.size() > 1 ? "one fold per target word" : "repeated seeded splits";
  m["variants"] = args.variants;
  m["outputs"] = {"sweep_folds.csv", "sweep_summary.csv"};
  write_manifest(dir, m, start);
}

void cmd_eval_truth(const EvalTruthArgs& args) {
  const auto start = Clock::now();
  RunConfig cfg = resolve_config(args.common);
  const fs::path dir = ensure_out_dir(args.common.out);
  const FitCheckpoint ck = read_checkpoint(args.checkpoint);
  const FitResult& fit = ck.fit;
  const std::string target = cfg.targets.empty() ? ck.meta.target : single_target(cfg);

  AnnotationLoadOptions ao;
  ao.collocates_only = cfg.collocates_only;
  ao.window = ck.meta.window;
  ao.target = target;
  ao.time_axis = TimeAxis(fit.time_labels);
  ao.genre_labels = fit.genre_labels;
  ao.genre_map = GenreMap::parse(ck.meta.genre_map);
  AnnotationLoadReport arep;
  const auto annotations = load_annotations(args.annotations, fit.vocab, ao, &arep);
  if (annotations.empty()) throw InputError("no usable annotations in " + args.annotations);

  const std::string stop_path = args.stopwords.empty() ? cfg.stopwords : args.stopwords;
  const auto stop = stopword_ids(stop_path, fit.vocab);
  const EvalOptions eo{cfg.top_n, cfg.raw_count_precision};
  const FitEvaluation ev = evaluate_fit(fit, annotations, stop, eo);

  // conf matrix and word lists are written before any degenerate exit
  std::string conf_csv = csv_row({"group", "model_sense", "expert_sense", "conf", "matched"});
  std::string words_csv = csv_row({"group", "model_sense", "rank", "word", "probability", "normalized_probability"});
  std::string pairs_csv = csv_row({"group", "expert_sense", "model_sense", "precision", "recall"});
  json groups = json::array();
  for (const auto& g : ev.groups) {
    for (int k = 0; k < g.match.K(); ++k) {
      for (std::size_t s = 0; s < g.match.expert_senses.size(); ++s) {
        conf_csv += csv_row({g.group, std::to_string(k), g.match.expert_senses[s], num(g.match.conf[uz(k)][s]),
                             g.match.assignment[s] == k ? "1" : "0"});
      }
    }
    for (const auto& list : g.top_lists) {
      const auto p = normalized_probs(list);
      for (std::size_t i = 0; i < list.entries.size(); ++i) {
        words_csv += csv_row({g.group, std::to_string(list.sense), std::to_string(i + 1),
                              fit.vocab.word(list.entries[i].word), num(list.entries[i].prob), num(p[i])});
      }
    }
    for (const auto& p : g.report.pairs) {
      pairs_csv += csv_row({g.group, p.expert_sense, std::to_string(p.model_sense), num(p.precision), num(p.recall)});
    }
    json assignment = json::object();
    for (std::size_t s = 0; s < g.match.expert_senses.size(); ++s) {
      assignment[g.match.expert_senses[s]] = g.match.assignment[s] ? json(*g.match.assignment[s]) : json("NA");
    }
    groups.push_back({{"group", g.group}, {"assignment", assignment}, {"report", report_json(g.report)}});
  }
  write_text((dir / "conf_matrix.csv").string(), conf_csv);
  write_text((dir / "top_words.csv").string(), words_csv);
  write_text((dir / "eval_pairs.csv").string(), pairs_csv);

  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  const json report = {{"variant", to_string(fit.variant)},
                       {"top_n", cfg.top_n},
                       {"raw_count_precision", cfg.raw_count_precision},
                       {"collocates_only", cfg.collocates_only},
                       {"annotations", {{"records", arep.records},
                                        {"retained", arep.retained},
                                        {"dropped_basis", arep.dropped_basis},
                                        {"dropped_other_target", arep.dropped_other_target},
                                        {"context_words_dropped", arep.context_words_dropped}}},
                       {"groups", groups},
                       {"precision", opt(ev.precision)},
                       {"recall", opt(ev.recall)},
                       {"f1", opt(ev.f1)}};
  write_text((dir / "eval_report.json").string(), report.dump(2) + "\n");

  // expert sense proportions per (t, g)
  {
    std::map<std::pair<int, int>, std::map<std::string, int>> cells;
    for (const auto& a : annotations) {
      if (a.sense_label.empty() || a.genre_id < 0 || a.time_slice < 0) continue;
      ++cells[{a.time_slice, a.genre_id}][a.sense_label];
    }
    std::string csv = csv_row({"time", "genre", "sense", "proportion", "annotations"});
    for (const auto& [cell, senses] : cells) {
      int n = 0;
      for (const auto& kv : senses) n += kv.second;
      for (const auto& [sense, count] : senses) {
        csv += csv_row({fit.time_labels[uz(cell.first)], fit.genre_labels[uz(cell.second)], sense,
                        num(static_cast<double>(count) / n), std::to_string(n)});
      }
    }
    write_text((dir / "expert_evolution.csv").string(), csv);
  }

  json outputs = {"eval_report.json", "eval_pairs.csv", "conf_matrix.csv", "top_words.csv", "expert_evolution.csv"};
  json m = manifest_base("eval-truth", cfg);
  m["variant"] = to_string(fit.variant);
  m["checkpoint"] = {{"path", args.checkpoint}, {"sha256", sha256_file(args.checkpoint)}};
  m["annotations"] = {{"path", args.annotations}, {"sha256", sha256_file(args.annotations)}};
  m["stopwords"] = stop_path;

  if (!args.corpus.empty()) {
    LoadOptions lo = load_options(cfg, target);
    lo.window = ck.meta.window;
    lo.genre_map = GenreMap::parse(ck.meta.genre_map);
    lo.time_order = fit.time_labels;
    lo.fixed_vocab = fit.vocab;
    Corpus corpus = load_corpus(args.corpus, lo);
    align_genres(corpus, fit.genre_labels);
    std::string csv = csv_row({"time", "genre", "sense", "proportion", "snippets"});
    auto emit = [&](const EvolutionTable& table, const std::vector<int>& genre_of_row) {
      for (const auto& row : table.rows) {
        const int g = genre_of_row.empty() ? row.g : genre_of_row[uz(row.g)];
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
          csv += csv_row({fit.time_labels[uz(row.t)], fit.genre_labels[uz(g)], table.columns[c],
                          num(row.proportions[c]), std::to_string(row.snippets)});
        }
      }
    };
    std::vector<MatchResult> matches;
    for (const auto& g : ev.groups) matches.push_back(g.match);
    switch (fit.variant) {
      case Variant::gasc:
      case Variant::scan:
        emit(sense_evolution_table(fit.parts.front().samples, corpus, matches), {});
        break;
      case Variant::gasc_independent:
        for (int g = 0; g < corpus.G; ++g) {
          const Corpus part = restrict_to_genre(corpus, g);
          if (part.snippets.empty()) continue;
          emit(sense_evolution_table(fit.parts[uz(g)].samples, part, {matches[uz(g)]}), {g});
        }
        break;
    }
    write_text((dir / "sense_evolution.csv").string(), csv);
    outputs.push_back("sense_evolution.csv");
    m["corpus"] = corpus_summary(args.corpus, corpus);
  }
  m["outputs"] = outputs;
  write_manifest(dir, m, start);

  const bool degenerate =
      std::all_of(ev.groups.begin(), ev.groups.end(), [](const auto& g) { return g.match.all_na(); });
  if (degenerate) throw DegenerateEvaluation("no expert sense matched any model sense; see conf_matrix.csv");
}

void cmd_correlate(const CorrelateArgs& args) {
  const auto start = Clock::now();
  RunConfig cfg = resolve_config(args.common);
  const fs::path dir = ensure_out_dir(args.common.out);

  AnnotationLoadOptions ao;
  ao.collocates_only = args.collocates_only;
  ao.window = cfg.model.W;
  ao.genre_map = GenreMap::parse(cfg.genre_map);
  if (!cfg.targets.empty()) ao.target = single_target(cfg);
  AnnotationLoadReport arep;
  auto annotations = load_annotations(args.annotations, Vocabulary{}, ao, &arep);
  if (annotations.empty()) throw InputError("no usable annotations in " + args.annotations);

  std::vector<std::string> dates;
  std::set<std::string> genre_set;
  for (const auto& a : annotations) {
    dates.push_back(a.date);
    genre_set.insert(a.genre_label);
  }
  const TimeAxis axis = cfg.time_order.empty() ? TimeAxis::centuries(dates) : TimeAxis(cfg.time_order);
  const std::vector<std::string> genres(genre_set.begin(), genre_set.end());
  for (auto& a : annotations) {
    const auto t = axis.resolve(a.date);
    if (!t) throw InputError("annotation date '" + a.date + "' is outside the time axis");
    a.time_slice = *t;
    a.genre_id = static_cast<int>(std::find(genres.begin(), genres.end(), a.genre_label) - genres.begin());
  }
  const SenseFrequencies freq =
      sense_frequency_series(annotations, static_cast<int>(axis.size()), static_cast<int>(genres.size()));
  const auto rows = correlation_table(freq, genres);

  std::string csv = csv_row({"sense", "genre", "n_slices", "rho", "p_value", "significant"});
  for (const auto& r : rows) {
    csv += csv_row({r.sense, r.genre, std::to_string(r.n), opt_num(r.result.rho), opt_num(r.result.p_value),
                    r.result.rho ? (r.significant ? "1" : "0") : "NA"});
  }
  write_text((dir / "correlations.csv").string(), csv);

  json m = manifest_base("correlate", cfg);
  m["annotations"] = {{"path", args.annotations},
                      {"sha256", sha256_file(args.annotations)},
                      {"records", arep.records},
                      {"retained", arep.retained},
                      {"collocates_only", args.collocates_only}};
  m["T"] = axis.size();
  m["G"] = genres.size();
  m["time_labels"] = axis.labels();
  m["genre_labels"] = genres;
  m["outputs"] = {"correlations.csv"};
  write_manifest(dir, m, start);
}

void cmd_validate(const ValidateArgs& args) {
  const auto start = Clock::now();
  RunConfig cfg = resolve_config(args.common);
  const fs::path dir = ensure_out_dir(args.common.out);
  ModelConfig model = cfg.model;
  model.T = args.T;
  model.G = args.G;
  model.V = args.V;
  if (!args.common.k) model.K = args.K;
  GewekeOptions go;
  go.corrupt_chain_precision = args.corrupt;
  const GewekeReport rep = validate_sampler(model, args.n_forward, args.n_gibbs, go);

  std::string csv = csv_row({"statistic", "forward_mean", "forward_se", "gibbs_mean", "gibbs_se", "z"});
  for (const auto& s : rep.statistics) {
    csv += csv_row({s.name, num(s.forward_mean), num(s.forward_se), num(s.gibbs_mean), num(s.gibbs_se), num(s.z)});
  }
  write_text((dir / "geweke.csv").string(), csv);
  std::cout << fmt::format("max |z| = {:.3f}\n", rep.max_abs_z());

  json m = manifest_base("validate", cfg);
  m["dimensions"] = {{"T", model.T}, {"G", model.G}, {"K", model.K}, {"V", model.V}};
  m["n_forward"] = args.n_forward;
  m["n_gibbs"] = args.n_gibbs;
  m["corrupt_chain_precision"] = args.corrupt;
  m["max_abs_z"] = rep.max_abs_z();
  m["outputs"] = {"geweke.csv"};
  write_manifest(dir, m, start);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Genre-aware dynamic mixture model of word senses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto add_common = [](CLI::App* cmd, CommonArgs& c) {
    cmd->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory")->required();
    cmd->add_option("--variant", c.variant, "gasc, scan or gasc-independent");
    cmd->add_option("--preset", c.preset, "hyperparameter preset 1, 2 or 3");
    cmd->add_option("--k", c.k, "number of senses K");
    cmd->add_option("--seed", c.seed, "RNG seed");
    cmd->add_option("--target", c.target, "target lemma (comma-separated for sweep-k)");
  };

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and write checkpoint, trace and manifest");
  add_common(fit_cmd, fit.common);
  fit_cmd->add_option("--corpus", fit.corpus, "JSON Lines corpus")->required()->check(CLI::ExistingFile);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a synthetic corpus from the generative model");
  add_common(sim_cmd, sim.common);
  sim_cmd->add_option("--T", sim.T, "time slices");
  sim_cmd->add_option("--G", sim.G, "genres");
  sim_cmd->add_option("--V", sim.V, "vocabulary size");
  sim_cmd->add_option("--snippets-per-cell", sim.snippets_per_cell, "snippets per (time, genre) cell");
  sim_cmd->add_option("--snippet-length", sim.snippet_length, "context words per snippet (default 2W)");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-k", "held-out log-likelihood over a list of K values");
  add_common(sweep_cmd, sweep.common);
  sweep_cmd->add_option("--corpus", sweep.corpus, "JSON Lines corpus")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--k-list", sweep.k_values, "K values")->required()->delimiter(',');
  sweep_cmd->add_option("--folds", sweep.folds, "seeded splits when there is a single target");
  sweep_cmd->add_option("--variants", sweep.variants, "variants to compare")->delimiter(',');

  EvalTruthArgs eval;
  auto* eval_cmd = app.add_subcommand("eval-truth", "match model senses to expert senses and score them");
  add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "fit or state checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--annotations", eval.annotations, "annotation CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--stopwords", eval.stopwords, "stop-word list")->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", eval.corpus, "corpus for the sense-evolution table")->check(CLI::ExistingFile);

  CorrelateArgs corr;
  auto* corr_cmd = app.add_subcommand("correlate", "Spearman correlation of f(s) and f(s, g) over time");
  add_common(corr_cmd, corr.common);
  corr_cmd->add_option("--annotations", corr.annotations, "annotation CSV")->required()->check(CLI::ExistingFile);
  corr_cmd->add_flag("--collocates-only", corr.collocates_only, "keep only collocates-based annotations");

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "joint-distribution test of the sampler");
  add_common(val_cmd, val.common);
  val_cmd->add_option("--T", val.T);
  val_cmd->add_option("--G", val.G);
  val_cmd->add_option("--V", val.V);
  val_cmd->add_option("--n-forward", val.n_forward);
  val_cmd->add_option("--n-gibbs", val.n_gibbs);
  val_cmd->add_flag("--corrupt", val.corrupt, "halve the chain precision used by the kernels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*fit_cmd) cmd_fit(fit);
    if (*sim_cmd) cmd_simulate(sim);
    if (*sweep_cmd) cmd_sweep_k(sweep);
    if (*eval_cmd) cmd_eval_truth(eval);
    if (*corr_cmd) cmd_correlate(corr);
    if (*val_cmd) cmd_validate(val);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateEvaluation& e) {
    std::cerr << "degenerate evaluation: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace gasc
