#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gasc/array.hpp"

namespace gasc {

using WordId = int;

class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws std::invalid_argument on duplicates.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(WordId id) const { return words_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }
  std::optional<WordId> find(const std::string& lemma) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

struct Snippet {
  int snippet_id = 0;
  int time_slice = 0;
  int genre_id = 0;
  std::vector<WordId> context_ids;
  std::string source_ref;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<Snippet> snippets;
  int T = 0;
  int G = 0;
  std::vector<std::string> genre_labels;
  std::vector<std::string> time_labels;

  std::size_t V() const { return vocab.size(); }
  // Snippet counts indexed [t][g].
  std::vector<std::vector<int>> cell_counts() const;
  // Throws InputError when a snippet falls outside T, G or V.
  void check() const;
};

// Maps a source genre label to a target label. A "*" key catches every
// label without an explicit entry; unmapped labels pass through unchanged.
class GenreMap {
 public:
  GenreMap() = default;
  explicit GenreMap(std::map<std::string, std::string> rules) : rules_(std::move(rules)) {}
  // Parses "Narrative:narr,*:other".
  static GenreMap parse(const std::string& spec);

  std::string apply(const std::string& label) const;
  bool empty() const { return rules_.empty(); }
  const std::map<std::string, std::string>& rules() const { return rules_; }
  std::string to_string() const;

 private:
  std::map<std::string, std::string> rules_;
};

// Ordered time slices. When every label parses as an integer the labels are
// also treated as lower bounds of year bins, so that a date such as -335
// resolves to the slice labelled -400 in {-500, -400, -300}.
class TimeAxis {
 public:
  TimeAxis() = default;
  explicit TimeAxis(std::vector<std::string> labels);
  // Distinct labels, sorted numerically when all are integers and
  // lexicographically otherwise.
  static TimeAxis from_observed(const std::vector<std::string>& labels);
  // Century bins (floor(year / 100) * 100) covering the given year strings.
  static TimeAxis centuries(const std::vector<std::string>& dates);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::optional<int> resolve(const std::string& label_or_date) const;

 private:
  std::vector<std::string> labels_;
  std::vector<long long> bounds_;  // empty unless every label is an integer
};

struct LoadOptions {
  std::string target;
  int window = 5;
  GenreMap genre_map;
  // Explicit slice order; empty means TimeAxis::from_observed.
  std::vector<std::string> time_order;
  int min_count = 1;
  // Windows stop at sentence boundaries when documents mark sentences as
  // nested lemma arrays.
  bool respect_sentences = false;
  // Map contexts into an existing vocabulary instead of building one.
  // Words outside it are dropped.
  std::optional<Vocabulary> fixed_vocab;
};

struct CorpusLoadReport {
  int documents = 0;
  int occurrences = 0;
  int snippets_dropped_empty = 0;
  int context_tokens_dropped = 0;
};

// JSON Lines, one document per line:
//   {"doc_id": ..., "time_slice_label": ..., "genre_label": ..., "lemmas": [...]}
// "lemmas" is a flat list of strings or a list of sentences (lists of strings).
Corpus load_corpus(const std::string& path, const LoadOptions& options,
                   CorpusLoadReport* report = nullptr);

// Deterministic uniform random partition; test gets round(n * test_fraction)
// snippets. Both halves keep the original snippet order.
std::pair<Corpus, Corpus> split_train_test(const Corpus& corpus, double test_fraction,
                                           std::uint64_t seed);

// Relabels every snippet into a single genre (the genre-free baseline).
Corpus collapse_genres(const Corpus& corpus, const std::string& label = "all");

// Snippets of genre g only, relabelled to genre 0 with G = 1.
Corpus restrict_to_genre(const Corpus& corpus, int g);

enum class AnnotationBasis { collocates, other };

struct ExpertAnnotation {
  int occurrence_id = 0;
  int time_slice = -1;  // -1 when no time axis was supplied
  std::string date;
  std::string genre_label;
  int genre_id = -1;  // -1 when the genre is outside the supplied label set
  std::string sense_label;  // empty when the expert assigned no sense
  AnnotationBasis basis = AnnotationBasis::other;
  std::vector<WordId> context_ids;
};

struct AnnotationLoadOptions {
  bool collocates_only = true;
  int window = 5;
  // Records for another target are skipped when non-empty.
  std::string target;
  TimeAxis time_axis;
  std::vector<std::string> genre_labels;
  GenreMap genre_map;
};

struct AnnotationLoadReport {
  int records = 0;
  int retained = 0;
  int dropped_basis = 0;
  int dropped_other_target = 0;
  int context_words_dropped = 0;
};

// CSV with header date,genre,author,work,target,sense_id,basis,context.
// "context" holds whitespace-separated lemmas; when it contains the target
// lemma only the window around its first occurrence is kept.
std::vector<ExpertAnnotation> load_annotations(const std::string& path, const Vocabulary& vocab,
                                               const AnnotationLoadOptions& options,
                                               AnnotationLoadReport* report = nullptr);

struct SenseFrequencies {
  std::vector<std::string> senses;
  // overall[s][t]
  std::vector<std::vector<double>> overall;
  // by_genre(s, g, t)
  Array3<double> by_genre;
  // Annotated occurrences per slice.
  std::vector<int> totals;
};

// f(s)[t] = n(s, t) / n(t); f(s, g)[t] = n(s, g, t) / n(t). Both are 0 at
// slices without annotations. Unassigned records are ignored.
SenseFrequencies sense_frequency_series(const std::vector<ExpertAnnotation>& annotations, int T,
                                        int G);

std::unordered_set<std::string> load_stopwords(const std::string& path);

// Splits one CSV record (RFC 4180 quoting).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gasc
