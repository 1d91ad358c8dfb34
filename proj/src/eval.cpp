#include "gasc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "gasc/errors.hpp"

namespace gasc {
namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

void check_test_corpus(const SampleSet& samples, const Corpus& test) {
  if (samples.samples.empty()) throw InputError("sample set is empty");
  const ModelState& s = samples.samples.front();
  if (test.T != s.T()) throw InputError(fmt::format("test corpus has T={} but samples have T={}", test.T, s.T()));
  if (test.G != s.G()) throw InputError(fmt::format("test corpus has G={} but samples have G={}", test.G, s.G()));
  for (const auto& sn : test.snippets) {
    if (sn.time_slice < 0 || sn.time_slice >= s.T() || sn.genre_id < 0 || sn.genre_id >= s.G()) {
      throw InputError(fmt::format("test snippet {} has an invalid (t, g)", sn.snippet_id));
    }
    for (WordId w : sn.context_ids) {
      if (w < 0 || w >= s.V()) {
        throw InputError(fmt::format("test snippet {} has word id {} outside V={}; build the vocabulary before splitting",
                                     sn.snippet_id, w, s.V()));
      }
    }
  }
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

bool is_constant(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

}  // namespace

double heldout_loglik(const SampleSet& samples, const Corpus& test) {
  check_test_corpus(samples, test);
  double total = 0.0;
  for (const auto& s : samples.samples) {
    double ll = 0.0;
    for (const auto& sn : test.snippets) ll += snippet_log_likelihood(s, sn);
    total += ll;
  }
  return total / static_cast<double>(samples.samples.size());
}

double heldout_loglik(const FitResult& fit, const Corpus& test) {
  if (fit.parts.empty()) throw InputError("fit has no parts");
  switch (fit.variant) {
    case Variant::gasc:
      return heldout_loglik(fit.parts.front().samples, test);
    case Variant::scan:
      return heldout_loglik(fit.parts.front().samples, collapse_genres(test));
    case Variant::gasc_independent: {
      if (static_cast<int>(fit.parts.size()) != test.G) throw InputError("test genres do not match the fitted parts");
      double total = 0.0;
      for (int g = 0; g < test.G; ++g) {
        Corpus part = restrict_to_genre(test, g);
        if (!part.snippets.empty()) total += heldout_loglik(fit.parts[uz(g)].samples, part);
      }
      return total;
    }
  }
  return 0.0;
}

std::vector<double> slice_weights(const SampleSet& samples, int genre) {
  std::vector<double> w;
  for (const auto& row : samples.cell_counts) {
    if (genre >= 0 && genre < static_cast<int>(row.size())) {
      w.push_back(row[uz(genre)]);
    } else {
      w.push_back(std::accumulate(row.begin(), row.end(), 0.0));
    }
  }
  return w;
}

std::vector<double> sense_word_distribution(const SampleSet& samples, int t, int k,
                                            const std::vector<double>& weights) {
  if (samples.samples.empty()) throw InputError("sample set is empty");
  const ModelState& first = samples.samples.front();
  const int T = first.T();
  if (k < 0 || k >= first.K()) throw InputError(fmt::format("sense {} out of range", k));
  if (t != kAllSlices && (t < 0 || t >= T)) throw InputError(fmt::format("time slice {} out of range", t));

  auto slice_mean = [&](int tt) {
    std::vector<double> mean(uz(first.V()), 0.0);
    for (const auto& s : samples.samples) {
      const auto p = softmax(s.psi.row(uz(tt), uz(k)));
      for (std::size_t v = 0; v < p.size(); ++v) mean[v] += p[v];
    }
    for (double& x : mean) x /= static_cast<double>(samples.samples.size());
    return mean;
  };
  if (t != kAllSlices) return slice_mean(t);

  std::vector<double> w(uz(T), 1.0);
  if (static_cast<int>(weights.size()) == T && std::accumulate(weights.begin(), weights.end(), 0.0) > 0.0) w = weights;
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> out(uz(first.V()), 0.0);
  for (int tt = 0; tt < T; ++tt) {
    if (w[uz(tt)] == 0.0) continue;
    const auto m = slice_mean(tt);
    for (std::size_t v = 0; v < m.size(); ++v) out[v] += w[uz(tt)] / wsum * m[v];
  }
  return out;
}

SenseWordList top_words(const SampleSet& samples, int t, int k, int N, const std::unordered_set<WordId>& exclude,
                        int genre) {
  const auto dist = sense_word_distribution(samples, t, k, slice_weights(samples, genre));
  SenseWordList out;
  out.time_slice = t;
  out.sense = k;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (!exclude.contains(static_cast<WordId>(v))) out.entries.push_back({static_cast<WordId>(v), dist[v]});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const WordProb& a, const WordProb& b) { return a.prob > b.prob; });
  if (N >= 0 && out.entries.size() > uz(N)) out.entries.resize(uz(N));
  return out;
}

ExpertContexts ExpertContexts::build(const std::vector<ExpertAnnotation>& annotations,
                                     const std::unordered_set<WordId>& stopwords, int genre) {
  std::map<std::string, std::set<WordId>> by_sense;
  for (const auto& a : annotations) {
    if (a.sense_label.empty()) continue;
    if (genre >= 0 && a.genre_id != genre) continue;
    auto& words = by_sense[a.sense_label];
    for (WordId w : a.context_ids) {
      if (!stopwords.contains(w)) words.insert(w);
    }
  }
  ExpertContexts out;
  for (auto& [sense, words] : by_sense) {
    out.senses_.push_back(sense);
    out.words_.push_back(std::move(words));
  }
  return out;
}

bool ExpertContexts::contains(int s, WordId w) const { return words(s).contains(w); }

double ExpertContexts::score(WordId w, int s) const {
  if (!contains(s, w)) return 0.0;
  int n = 0;
  for (const auto& ws : words_) n += ws.contains(w) ? 1 : 0;
  return 1.0 / n;
}

double ExpertContexts::weight(int s) const {
  double total = 0.0;
  for (WordId w : words(s)) total += score(w, s);
  return total;
}

double expert_score(WordId w, int s, const ExpertContexts& experts) { return experts.score(w, s); }

std::vector<double> normalized_probs(const SenseWordList& top) {
  double sum = 0.0;
  for (const auto& e : top.entries) sum += e.prob;
  std::vector<double> out;
  out.reserve(top.entries.size());
  for (const auto& e : top.entries) out.push_back(sum > 0.0 ? e.prob / sum : 0.0);
  return out;
}

double confidence(const SenseWordList& top, int s, const ExpertContexts& experts) {
  const auto p = normalized_probs(top);
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) c += p[i] * experts.score(top.entries[i].word, s);
  return c;
}

bool MatchResult::all_na() const {
  return std::none_of(assignment.begin(), assignment.end(), [](const auto& a) { return a.has_value(); });
}

std::string MatchResult::label_of(int k) const {
  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < assignment.size(); ++s) {
    if (assignment[s] != k) continue;
    if (!best || conf[uz(k)][s] > conf[uz(k)][*best]) best = s;
  }
  return best ? expert_senses[*best] : "NA";
}

MatchResult match_senses(const std::vector<std::vector<double>>& conf, const std::vector<std::string>& expert_senses) {
  const std::size_t S = expert_senses.size();
  for (const auto& row : conf) {
    if (row.size() != S) throw InputError("confidence matrix does not match the expert senses");
  }
  MatchResult out;
  out.conf = conf;
  out.expert_senses = expert_senses;
  out.assignment.assign(S, std::nullopt);
  if (S == 0 || conf.empty()) return out;
  const double baseline = 1.0 / static_cast<double>(S);
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<std::pair<double, int>> column;
    for (std::size_t k = 0; k < conf.size(); ++k) column.emplace_back(conf[k][s], static_cast<int>(k));
    // Highest confidence first; ties keep the lower sense index first.
    std::stable_sort(column.begin(), column.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double rivals = 0.0;
    for (std::size_t i = 1; i < std::min<std::size_t>(column.size(), 3); ++i) rivals += column[i].first;
    const double best = column.front().first;
    if (best > baseline && best > rivals) out.assignment[s] = column.front().second;
  }
  return out;
}

MatchResult match_senses(const std::vector<std::vector<double>>& conf, int S_expert) {
  std::vector<std::string> labels;
  for (int s = 0; s < S_expert; ++s) labels.push_back(fmt::format("s{}", s));
  return match_senses(conf, labels);
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport precision_recall(const MatchResult& match, const std::vector<SenseWordList>& top_lists,
                            const ExpertContexts& experts, bool raw_count_precision) {
  EvalReport report;
  report.raw_count_precision = raw_count_precision;
  for (std::size_t s = 0; s < match.assignment.size(); ++s) {
    if (!match.assignment[s]) continue;
    const int k = *match.assignment[s];
    const auto it = std::find_if(top_lists.begin(), top_lists.end(), [&](const auto& l) { return l.sense == k; });
    if (it == top_lists.end()) throw InputError(fmt::format("no top-word list for model sense {}", k));
    const auto p = normalized_probs(*it);
    double correct = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      mass += p[i];
      if (experts.contains(static_cast<int>(s), it->entries[i].word)) correct += p[i];
    }
    PairScore pair;
    pair.model_sense = k;
    pair.expert_sense = match.expert_senses[s];
    const double denom = raw_count_precision ? static_cast<double>(p.size()) : mass;
    pair.precision = denom > 0.0 ? correct / denom : 0.0;
    const double w = experts.weight(static_cast<int>(s));
    pair.recall = w > 0.0 ? correct / w : 0.0;
    if (w <= 0.0) report.diagnostics.push_back(fmt::format("expert sense {} has no context words", pair.expert_sense));
    report.pairs.push_back(pair);
  }
  if (report.pairs.empty()) {
    report.diagnostics.push_back("no expert sense was matched to a model sense");
    return report;
  }
  double p = 0.0, r = 0.0;
  for (const auto& pair : report.pairs) {
    p += pair.precision;
    r += pair.recall;
  }
  const double n = static_cast<double>(report.pairs.size());
  report.precision = p / n;
  report.recall = r / n;
  report.f1 = f1_score(*report.precision, *report.recall);
  return report;
}

GroupEvaluation evaluate_group(const SampleSet& samples, const std::vector<ExpertAnnotation>& annotations,
                               const std::unordered_set<WordId>& stopwords, int genre, const std::string& group,
                               const EvalOptions& options) {
  if (samples.samples.empty()) throw InputError("sample set is empty");
  GroupEvaluation out;
  out.group = group;
  const ExpertContexts experts = ExpertContexts::build(annotations, stopwords, genre);
  const int K = samples.samples.front().K();
  std::vector<std::vector<double>> conf(uz(K), std::vector<double>(uz(experts.S()), 0.0));
  for (int k = 0; k < K; ++k) {
    out.top_lists.push_back(top_words(samples, kAllSlices, k, options.top_n, stopwords, genre));
    for (int s = 0; s < experts.S(); ++s) conf[uz(k)][uz(s)] = confidence(out.top_lists.back(), s, experts);
  }
  out.match = match_senses(conf, experts.senses());
  out.report = precision_recall(out.match, out.top_lists, experts, options.raw_count_precision);
  out.report.top_n = options.top_n;
  if (experts.S() == 0) out.report.diagnostics.push_back(fmt::format("no annotated senses for group {}", group));
  return out;
}

FitEvaluation evaluate_fit(const FitResult& fit, const std::vector<ExpertAnnotation>& annotations,
                           const std::unordered_set<WordId>& stopwords, const EvalOptions& options) {
  if (fit.parts.empty()) throw InputError("fit has no parts");
  FitEvaluation out;
  switch (fit.variant) {
    case Variant::gasc:
      for (std::size_t g = 0; g < fit.genre_labels.size(); ++g) {
        out.groups.push_back(evaluate_group(fit.parts.front().samples, annotations, stopwords, static_cast<int>(g),
                                            fit.genre_labels[g], options));
      }
      break;
    case Variant::scan:
      out.groups.push_back(evaluate_group(fit.parts.front().samples, annotations, stopwords, -1, "all", options));
      break;
    case Variant::gasc_independent:
      for (std::size_t g = 0; g < fit.parts.size(); ++g) {
        out.groups.push_back(evaluate_group(fit.parts[g].samples, annotations, stopwords, static_cast<int>(g),
                                            fit.parts[g].genre_label, options));
      }
      break;
  }
  double p = 0.0, r = 0.0, f = 0.0;
  int n = 0;
  for (const auto& g : out.groups) {
    if (!g.report.f1) continue;
    p += *g.report.precision;
    r += *g.report.recall;
    f += *g.report.f1;
    ++n;
  }
  if (n > 0) {
    out.precision = p / n;
    out.recall = r / n;
    out.f1 = f / n;
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("spearman: series lengths differ");
  if (x.size() < 3) throw InputError("spearman: at least 3 observations are required");
  SpearmanResult out;
  if (is_constant(x) || is_constant(y)) return out;
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double rho = std::clamp(pearson(rx, ry), -1.0, 1.0);
  out.rho = rho;
  const std::size_t n = x.size();
  if (n <= 9) {
    // Exact null distribution: every assignment of y's ranks to x's ranks.
    std::sort(ry.begin(), ry.end());
    long extreme = 0, total = 0;
    const double tol = 1e-12;
    do {
      ++total;
      if (std::abs(pearson(rx, ry)) >= std::abs(rho) - tol) ++extreme;
    } while (std::next_permutation(ry.begin(), ry.end()));
    // Repeated ranks make next_permutation skip duplicates, which leaves
    // every distinct arrangement equally weighted.
    out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  } else if (std::abs(rho) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double df = static_cast<double>(n) - 2.0;
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    boost::math::students_t dist(df);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

std::vector<CorrelationRow> correlation_table(const SenseFrequencies& freq, const std::vector<std::string>& genres,
                                              double alpha) {
  std::vector<std::size_t> slices;
  for (std::size_t t = 0; t < freq.totals.size(); ++t) {
    if (freq.totals[t] > 0) slices.push_back(t);
  }
  std::vector<CorrelationRow> rows;
  for (std::size_t s = 0; s < freq.senses.size(); ++s) {
    for (std::size_t g = 0; g < genres.size(); ++g) {
      CorrelationRow row;
      row.sense = freq.senses[s];
      row.genre = genres[g];
      row.n = static_cast<int>(slices.size());
      std::vector<double> x, y;
      for (std::size_t t : slices) {
        x.push_back(freq.overall[s][t]);
        y.push_back(freq.by_genre(s, g, t));
      }
      if (x.size() >= 3) row.result = spearman(x, y);
      row.significant = row.result.p_value && *row.result.p_value < alpha;
      rows.push_back(row);
    }
  }
  return rows;
}

EvolutionTable sense_evolution_table(const SampleSet& samples, const Corpus& corpus,
                                     const std::vector<MatchResult>& matches) {
  if (samples.samples.empty()) throw InputError("sample set is empty");
  const ModelState& first = samples.samples.front();
  const int K = first.K();
  if (corpus.T != first.T()) throw InputError("corpus and samples disagree on T");
  if (first.G() != 1 && first.G() != corpus.G) throw InputError("corpus and samples disagree on G");
  if (!matches.empty() && matches.size() != 1 && static_cast<int>(matches.size()) != corpus.G) {
    throw InputError("one match per genre is required");
  }
  for (const auto& m : matches) {
    if (m.K() != K) throw InputError("match does not cover every model sense");
  }

  EvolutionTable table;
  // column index of model sense k per genre
  std::vector<std::vector<std::size_t>> column_of(uz(corpus.G), std::vector<std::size_t>(uz(K)));
  if (matches.empty()) {
    for (int k = 0; k < K; ++k) table.columns.push_back(fmt::format("k{}", k));
    for (auto& c : column_of) std::iota(c.begin(), c.end(), 0);
  } else {
    std::vector<std::string> labels;
    bool has_na = false;
    for (const auto& m : matches) {
      for (int k = 0; k < K; ++k) {
        const auto label = m.label_of(k);
        if (label == "NA") {
          has_na = true;
        } else if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
          labels.push_back(label);
        }
      }
    }
    // Expert sense order of the first match, then anything else.
    std::vector<std::string> ordered;
    for (const auto& m : matches) {
      for (const auto& s : m.expert_senses) {
        if (std::find(labels.begin(), labels.end(), s) != labels.end() &&
            std::find(ordered.begin(), ordered.end(), s) == ordered.end()) {
          ordered.push_back(s);
        }
      }
    }
    table.columns = ordered;
    if (has_na) table.columns.push_back("NA");
    for (int g = 0; g < corpus.G; ++g) {
      const auto& m = matches.size() == 1 ? matches.front() : matches[uz(g)];
      for (int k = 0; k < K; ++k) {
        const auto label = m.label_of(k);
        column_of[uz(g)][uz(k)] =
            uz(static_cast<int>(std::find(table.columns.begin(), table.columns.end(), label) - table.columns.begin()));
      }
    }
  }

  const std::size_t C = table.columns.size();
  std::vector<std::vector<double>> sums(uz(corpus.T * corpus.G), std::vector<double>(C, 0.0));
  std::vector<int> counts(uz(corpus.T * corpus.G), 0);
  for (const auto& sn : corpus.snippets) {
    const auto cell = uz(sn.time_slice * corpus.G + sn.genre_id);
    ++counts[cell];
    Snippet view = sn;
    if (first.G() == 1) view.genre_id = 0;
    for (const auto& s : samples.samples) {
      const auto post = sense_posterior(s, view);
      for (int k = 0; k < K; ++k) sums[cell][column_of[uz(sn.genre_id)][uz(k)]] += post[uz(k)];
    }
  }
  const double n_samples = static_cast<double>(samples.samples.size());
  for (int t = 0; t < corpus.T; ++t) {
    for (int g = 0; g < corpus.G; ++g) {
      const auto cell = uz(t * corpus.G + g);
      if (counts[cell] == 0) continue;
      EvolutionRow row;
      row.t = t;
      row.g = g;
      row.snippets = counts[cell];
      row.proportions = sums[cell];
      for (double& p : row.proportions) p /= n_samples * counts[cell];
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw InputError("total_variation: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return 0.5 * d;
}

Alignment align_senses(const std::vector<std::vector<double>>& estimated,
                       const std::vector<std::vector<double>>& truth) {
  if (estimated.size() != truth.size() || estimated.empty()) throw InputError("align_senses: row count mismatch");
  const std::size_t K = truth.front().size();
  if (K > 8) throw InputError("align_senses enumerates permutations and supports K <= 8");
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  Alignment best;
  best.max_tv = std::numeric_limits<double>::infinity();
  std::vector<double> aligned(K);
  do {
    double worst = 0.0;
    for (std::size_t r = 0; r < truth.size(); ++r) {
      if (estimated[r].size() != K || truth[r].size() != K) throw InputError("align_senses: column count mismatch");
      for (std::size_t k = 0; k < K; ++k) aligned[k] = estimated[r][uz(perm[k])];
      worst = std::max(worst, total_variation(aligned, truth[r]));
    }
    if (worst < best.max_tv) {
      best.max_tv = worst;
      best.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace gasc
