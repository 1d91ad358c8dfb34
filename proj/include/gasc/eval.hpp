#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "gasc/corpus.hpp"
#include "gasc/inference.hpp"
#include "gasc/model.hpp"

namespace gasc {

// --- Held-out log-likelihood ------------------------------------------------

// Mean over retained samples of the summed snippet log-likelihoods of `test`.
// Throws InputError when test dimensions or word ids fall outside the samples.
double heldout_loglik(const SampleSet& samples, const Corpus& test);

// Routes test snippets the way the fit saw its training data: scan collapses
// genres, gasc-independent scores each genre under its own part.
double heldout_loglik(const FitResult& fit, const Corpus& test);

// --- Sense word lists -------------------------------------------------------

constexpr int kAllSlices = -1;

struct WordProb {
  WordId word = 0;
  double prob = 0.0;
};

struct SenseWordList {
  int time_slice = kAllSlices;
  int sense = 0;
  std::vector<WordProb> entries;  // descending by prob
};

// Posterior-mean softmax(psi[t][k]) over retained samples. With kAllSlices
// the per-slice means are averaged with weights `slice_weights` (snippet
// counts); all-zero weights fall back to a uniform average.
std::vector<double> sense_word_distribution(const SampleSet& samples, int t, int k,
                                            const std::vector<double>& slice_weights);

// Snippet counts per slice: D_t when genre < 0, D_{t,g} otherwise.
std::vector<double> slice_weights(const SampleSet& samples, int genre = -1);

// Top-N words of sense k. Words in `exclude` are removed before truncation.
SenseWordList top_words(const SampleSet& samples, int t, int k, int N,
                        const std::unordered_set<WordId>& exclude = {}, int genre = -1);

// --- Expert matching --------------------------------------------------------

// Context word sets per expert sense, used for m(w, s) and for deciding
// whether a model word is correct for a sense.
class ExpertContexts {
 public:
  ExpertContexts() = default;
  // Unassigned records are ignored. Stop words are removed from contexts.
  // genre >= 0 keeps only annotations of that genre id.
  static ExpertContexts build(const std::vector<ExpertAnnotation>& annotations,
                              const std::unordered_set<WordId>& stopwords = {}, int genre = -1);

  const std::vector<std::string>& senses() const { return senses_; }
  int S() const { return static_cast<int>(senses_.size()); }
  const std::set<WordId>& words(int s) const { return words_.at(static_cast<std::size_t>(s)); }
  bool contains(int s, WordId w) const;
  // m(w, s) = 1 / |{s' : w in contexts(s')}| when w in contexts(s), else 0.
  double score(WordId w, int s) const;
  // sum over w in contexts(s) of m(w, s)
  double weight(int s) const;

 private:
  std::vector<std::string> senses_;
  std::vector<std::set<WordId>> words_;
};

double expert_score(WordId w, int s, const ExpertContexts& experts);

// Top-list probabilities renormalized to sum to 1.
std::vector<double> normalized_probs(const SenseWordList& top);

// conf(k, s) = sum_i P~(w_i | k) m(w_i, s) over the entries of k's top list.
double confidence(const SenseWordList& top, int s, const ExpertContexts& experts);

struct MatchResult {
  // conf[k][s]
  std::vector<std::vector<double>> conf;
  std::vector<std::string> expert_senses;
  // Matched model sense per expert sense; nullopt is NA.
  std::vector<std::optional<int>> assignment;

  int K() const { return static_cast<int>(conf.size()); }
  bool all_na() const;
  // Expert label of model sense k, "NA" when unmatched. A model sense matched
  // by several expert senses takes the one with the highest confidence.
  std::string label_of(int k) const;
};

// For each expert sense the best model sense is selected when its confidence
// is strictly above 1 / S_expert and strictly above the sum of the 2nd and
// 3rd best (all remaining when fewer than three model senses).
MatchResult match_senses(const std::vector<std::vector<double>>& conf, int S_expert);
MatchResult match_senses(const std::vector<std::vector<double>>& conf,
                         const std::vector<std::string>& expert_senses);

// --- Precision and recall ---------------------------------------------------

struct PairScore {
  int model_sense = 0;
  std::string expert_sense;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  int top_n = 20;
  bool raw_count_precision = false;
  std::vector<PairScore> pairs;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::vector<std::string> diagnostics;
};

double f1_score(double precision, double recall);

// precision(k, s) = sum_{correct} P~(w | k) / sum_{all} P~(w | k)
// (the denominator is the list length when raw_count_precision is set);
// recall(k, s) = sum_{correct} P~(w | k) / weight(s). Scores average over the
// matched pairs; no matched pair leaves them empty with a diagnostic.
EvalReport precision_recall(const MatchResult& match, const std::vector<SenseWordList>& top_lists,
                            const ExpertContexts& experts, bool raw_count_precision = false);

struct EvalOptions {
  int top_n = 20;
  bool raw_count_precision = false;
};

struct GroupEvaluation {
  std::string group;  // genre label, or "all"
  MatchResult match;
  std::vector<SenseWordList> top_lists;
  EvalReport report;
};

// top_words -> confidence -> match_senses -> precision_recall for one
// sample set against annotations restricted to `genre` (< 0 for all).
GroupEvaluation evaluate_group(const SampleSet& samples, const std::vector<ExpertAnnotation>& annotations,
                               const std::unordered_set<WordId>& stopwords, int genre, const std::string& group,
                               const EvalOptions& options);

struct FitEvaluation {
  std::vector<GroupEvaluation> groups;
  // Means over groups with scores.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

// gasc evaluates per genre and averages; scan evaluates once against all
// annotations; gasc-independent evaluates each part against its genre.
FitEvaluation evaluate_fit(const FitResult& fit, const std::vector<ExpertAnnotation>& annotations,
                           const std::unordered_set<WordId>& stopwords, const EvalOptions& options);

// --- Spearman correlation ---------------------------------------------------

struct SpearmanResult {
  std::optional<double> rho;  // empty when either series is constant
  std::optional<double> p_value;
};

// Average ranks (ties share the mean rank).
std::vector<double> average_ranks(const std::vector<double>& x);

// Two-sided p-value by exact enumeration of permutations for n <= 9 and the
// Student t approximation otherwise. Throws InputError for n < 3 or
// mismatched lengths.
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationRow {
  std::string sense;
  std::string genre;
  SpearmanResult result;
  int n = 0;
  bool significant = false;
};

// rho(f(s), f(s, g)) over slices with at least one annotation.
std::vector<CorrelationRow> correlation_table(const SenseFrequencies& freq, const std::vector<std::string>& genres,
                                              double alpha = 0.05);

// --- Sense evolution --------------------------------------------------------

struct EvolutionRow {
  int t = 0;
  int g = 0;
  int snippets = 0;
  std::vector<double> proportions;  // one per column, sums to 1
};

struct EvolutionTable {
  std::vector<std::string> columns;
  std::vector<EvolutionRow> rows;
};

// Posterior-mean sense proportions per (t, g): p(z | phi, psi, w) averaged
// over the snippets of the cell and the retained samples. A sample set with
// a single genre row is applied to every genre of the corpus. `matches`
// relabels senses: empty keeps k0..k{K-1}, one entry applies to every genre,
// otherwise one entry per genre. Empty cells are omitted.
EvolutionTable sense_evolution_table(const SampleSet& samples, const Corpus& corpus,
                                     const std::vector<MatchResult>& matches = {});

// Permutation perm with estimated[:, perm[k]] aligned to truth[:, k] that
// minimizes the largest per-row total-variation distance.
struct Alignment {
  std::vector<int> perm;
  double max_tv = 0.0;
};
Alignment align_senses(const std::vector<std::vector<double>>& estimated,
                       const std::vector<std::vector<double>>& truth);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace gasc
