#include "gasc/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gasc/errors.hpp"
#include "gasc/rng.hpp"

namespace gasc {
namespace {

using nlohmann::json;

std::optional<long long> parse_integer(const std::string& s) {
  long long value = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) return std::nullopt;
  return value;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string scalar_to_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number()) return j.dump();
  throw std::invalid_argument("expected string or number");
}

struct RawDocument {
  std::string doc_id;
  std::string time_label;
  std::string genre_label;
  // One entry per sentence; a flat lemma list is a single sentence.
  std::vector<std::vector<std::string>> sentences;
};

RawDocument parse_document(const std::string& line, int line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("line {}: malformed JSON ({})", line_no, e.what()));
  }
  if (!j.is_object()) throw InputError(fmt::format("line {}: record is not an object", line_no));
  RawDocument doc;
  try {
    for (const char* key : {"doc_id", "time_slice_label", "genre_label", "lemmas"}) {
      if (!j.contains(key)) throw std::invalid_argument(fmt::format("missing field '{}'", key));
    }
    doc.doc_id = scalar_to_string(j.at("doc_id"));
    doc.time_label = scalar_to_string(j.at("time_slice_label"));
    doc.genre_label = j.at("genre_label").get<std::string>();
    const json& lemmas = j.at("lemmas");
    if (!lemmas.is_array()) throw std::invalid_argument("'lemmas' must be an array");
    std::vector<std::string> flat;
    for (const json& item : lemmas) {
      if (item.is_array()) {
        std::vector<std::string> sentence;
        for (const json& w : item) sentence.push_back(w.get<std::string>());
        doc.sentences.push_back(std::move(sentence));
      } else {
        flat.push_back(item.get<std::string>());
      }
    }
    if (!flat.empty()) {
      if (!doc.sentences.empty()) throw std::invalid_argument("'lemmas' mixes strings and sentence arrays");
      doc.sentences.push_back(std::move(flat));
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("line {}: {}", line_no, e.what()));
  } catch (const std::invalid_argument& e) {
    throw InputError(fmt::format("line {}: {}", line_no, e.what()));
  }
  return doc;
}

struct RawSnippet {
  int time_slice;
  int genre_id;
  std::vector<std::string> context;
  std::string source_ref;
};

// Windows of up to `window` lemmas on each side of every target occurrence.
void extract_windows(const std::vector<std::string>& tokens, const std::string& target, int window,
                     const std::function<void(std::vector<std::string>)>& emit) {
  const auto n = static_cast<long>(tokens.size());
  for (long i = 0; i < n; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != target) continue;
    std::vector<std::string> ctx;
    for (long j = std::max(0L, i - window); j < i; ++j) ctx.push_back(tokens[static_cast<std::size_t>(j)]);
    for (long j = i + 1; j <= std::min(n - 1, i + window); ++j) ctx.push_back(tokens[static_cast<std::size_t>(j)]);
    emit(std::move(ctx));
  }
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary entry: " + words_[i]);
    }
  }
}

std::optional<WordId> Vocabulary::find(const std::string& lemma) const {
  auto it = index_.find(lemma);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::vector<int>> Corpus::cell_counts() const {
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(G), 0));
  for (const auto& s : snippets) ++counts[static_cast<std::size_t>(s.time_slice)][static_cast<std::size_t>(s.genre_id)];
  return counts;
}

void Corpus::check() const {
  const auto v = static_cast<WordId>(V());
  for (const auto& s : snippets) {
    if (s.time_slice < 0 || s.time_slice >= T || s.genre_id < 0 || s.genre_id >= G) {
      throw InputError(fmt::format("snippet {} has (t={}, g={}) outside T={}, G={}", s.snippet_id,
                                   s.time_slice, s.genre_id, T, G));
    }
    for (WordId w : s.context_ids) {
      if (w < 0 || w >= v) {
        throw InputError(fmt::format("snippet {} has word id {} outside vocabulary of size {}", s.snippet_id, w, v));
      }
    }
  }
}

GenreMap GenreMap::parse(const std::string& spec) {
  std::map<std::string, std::string> rules;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InputError("genre map entry without ':': " + item);
    rules[trim(item.substr(0, colon))] = trim(item.substr(colon + 1));
  }
  return GenreMap(std::move(rules));
}

std::string GenreMap::apply(const std::string& label) const {
  if (auto it = rules_.find(label); it != rules_.end()) return it->second;
  if (auto it = rules_.find("*"); it != rules_.end()) return it->second;
  return label;
}

std::string GenreMap::to_string() const {
  std::string out;
  for (const auto& [from, to] : rules_) {
    if (!out.empty()) out += ',';
    out += from + ":" + to;
  }
  return out;
}

TimeAxis::TimeAxis(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw InputError("duplicate time label: " + l);
  }
  std::vector<long long> bounds;
  for (const auto& l : labels_) {
    auto v = parse_integer(l);
    if (!v) return;
    bounds.push_back(*v);
  }
  if (std::is_sorted(bounds.begin(), bounds.end())) bounds_ = std::move(bounds);
}

TimeAxis TimeAxis::from_observed(const std::vector<std::string>& labels) {
  std::vector<std::string> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const bool numeric = std::all_of(distinct.begin(), distinct.end(),
                                   [](const std::string& s) { return parse_integer(s).has_value(); });
  if (numeric) {
    std::sort(distinct.begin(), distinct.end(),
              [](const std::string& a, const std::string& b) { return *parse_integer(a) < *parse_integer(b); });
  }
  return TimeAxis(std::move(distinct));
}

TimeAxis TimeAxis::centuries(const std::vector<std::string>& dates) {
  std::set<long long> bins;
  for (const auto& d : dates) {
    auto year = parse_integer(trim(d));
    if (!year) throw InputError("date is not an integer year: " + d);
    const long long lo = static_cast<long long>(std::floor(static_cast<double>(*year) / 100.0)) * 100;
    bins.insert(lo);
  }
  std::vector<std::string> labels;
  for (long long b : bins) labels.push_back(std::to_string(b));
  return TimeAxis(std::move(labels));
}

std::optional<int> TimeAxis::resolve(const std::string& label_or_date) const {
  const std::string key = trim(label_or_date);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == key) return static_cast<int>(i);
  }
  if (bounds_.empty()) return std::nullopt;
  auto year = parse_integer(key);
  if (!year || *year < bounds_.front()) return std::nullopt;
  auto it = std::upper_bound(bounds_.begin(), bounds_.end(), *year);
  return static_cast<int>(std::distance(bounds_.begin(), it)) - 1;
}

Corpus load_corpus(const std::string& path, const LoadOptions& options, CorpusLoadReport* report) {
  if (options.window < 1) throw InputError("window half-width must be >= 1");
  if (options.target.empty()) throw InputError("target lemma is empty");
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path);

  std::vector<RawDocument> docs;
  std::vector<int> doc_lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    docs.push_back(parse_document(line, line_no));
    doc_lines.push_back(line_no);
  }

  CorpusLoadReport rep;
  rep.documents = static_cast<int>(docs.size());

  std::vector<std::string> observed_times;
  std::set<std::string> genre_set;
  for (const auto& d : docs) {
    observed_times.push_back(d.time_label);
    genre_set.insert(options.genre_map.apply(d.genre_label));
  }
  TimeAxis axis = options.time_order.empty() ? TimeAxis::from_observed(observed_times)
                                             : TimeAxis(options.time_order);
  std::vector<std::string> genres(genre_set.begin(), genre_set.end());

  std::vector<RawSnippet> raw;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    const auto& d = docs[di];
    int t = -1;
    for (std::size_t i = 0; i < axis.labels().size(); ++i) {
      if (axis.labels()[i] == d.time_label) t = static_cast<int>(i);
    }
    if (t < 0) {
      throw InputError(fmt::format("line {}: time slice label '{}' not in configured order", doc_lines[di], d.time_label));
    }
    const std::string genre = options.genre_map.apply(d.genre_label);
    const int g = static_cast<int>(std::lower_bound(genres.begin(), genres.end(), genre) - genres.begin());
    auto emit = [&](std::vector<std::string> ctx) {
      ++rep.occurrences;
      raw.push_back({t, g, std::move(ctx), d.doc_id});
    };
    if (options.respect_sentences) {
      for (const auto& sentence : d.sentences) extract_windows(sentence, options.target, options.window, emit);
    } else {
      std::vector<std::string> tokens;
      for (const auto& sentence : d.sentences) tokens.insert(tokens.end(), sentence.begin(), sentence.end());
      extract_windows(tokens, options.target, options.window, emit);
    }
  }
  if (rep.occurrences == 0) throw InputError("no occurrences of target '" + options.target + "' in " + path);

  Vocabulary vocab;
  if (options.fixed_vocab) {
    vocab = *options.fixed_vocab;
  } else {
    std::map<std::string, int> freq;
    for (const auto& r : raw) {
      for (const auto& w : r.context) ++freq[w];
    }
    std::vector<std::string> words;
    for (const auto& [w, c] : freq) {
      if (c >= options.min_count) words.push_back(w);
    }
    vocab = Vocabulary(std::move(words));
  }

  Corpus corpus;
  corpus.T = static_cast<int>(axis.size());
  corpus.G = static_cast<int>(genres.size());
  corpus.time_labels = axis.labels();
  corpus.genre_labels = genres;
  for (auto& r : raw) {
    Snippet s;
    s.time_slice = r.time_slice;
    s.genre_id = r.genre_id;
    s.source_ref = std::move(r.source_ref);
    for (const auto& w : r.context) {
      if (auto id = vocab.find(w)) {
        s.context_ids.push_back(*id);
      } else {
        ++rep.context_tokens_dropped;
      }
    }
    if (s.context_ids.empty()) {
      ++rep.snippets_dropped_empty;
      continue;
    }
    s.snippet_id = static_cast<int>(corpus.snippets.size());
    corpus.snippets.push_back(std::move(s));
  }
  corpus.vocab = std::move(vocab);
  if (corpus.V() == 0) throw InputError("vocabulary is empty after filtering");
  if (report) *report = rep;
  return corpus;
}

std::pair<Corpus, Corpus> split_train_test(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("test fraction must lie in (0, 1)");
  const std::size_t n = corpus.snippets.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test >= n) throw InputError("split leaves no training snippets");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0x5eedULL);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;

  Corpus train = corpus, test = corpus;
  train.snippets.clear();
  test.snippets.clear();
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).snippets.push_back(corpus.snippets[i]);
  return {std::move(train), std::move(test)};
}

Corpus collapse_genres(const Corpus& corpus, const std::string& label) {
  Corpus out = corpus;
  out.G = 1;
  out.genre_labels = {label};
  for (auto& s : out.snippets) s.genre_id = 0;
  return out;
}

Corpus restrict_to_genre(const Corpus& corpus, int g) {
  if (g < 0 || g >= corpus.G) throw InputError(fmt::format("genre {} outside [0, {})", g, corpus.G));
  Corpus out = corpus;
  out.G = 1;
  out.genre_labels = {corpus.genre_labels[static_cast<std::size_t>(g)]};
  out.snippets.clear();
  for (const auto& s : corpus.snippets) {
    if (s.genre_id != g) continue;
    out.snippets.push_back(s);
    out.snippets.back().genre_id = 0;
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

// Reads one logical CSV record, joining physical lines while a quoted field
// is still open.
bool read_csv_record(std::istream& in, std::string& record, int& line_no) {
  record.clear();
  std::string line;
  bool open = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!record.empty() || open) record += '\n';
    record += line;
    for (char c : line) {
      if (c == '"') open = !open;
    }
    if (!open) return true;
  }
  return !record.empty();
}

}  // namespace

std::vector<ExpertAnnotation> load_annotations(const std::string& path, const Vocabulary& vocab,
                                               const AnnotationLoadOptions& options,
                                               AnnotationLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotation file: " + path);
  AnnotationLoadReport rep;
  std::vector<ExpertAnnotation> out;

  std::string record;
  int line_no = 0;
  if (!read_csv_record(in, record, line_no) || trim(record).empty()) {
    if (report) *report = rep;
    return out;
  }
  const auto header = split_csv_line(record);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(trim(header[i]))] = i;
  for (const char* required : {"date", "genre", "target", "sense_id", "basis", "context"}) {
    if (!col.count(required)) throw InputError(fmt::format("annotation header lacks column '{}'", required));
  }

  while (read_csv_record(in, record, line_no)) {
    if (trim(record).empty()) continue;
    const auto fields = split_csv_line(record);
    auto field = [&](const char* name) -> std::string {
      const std::size_t i = col.at(name);
      if (i >= fields.size()) throw InputError(fmt::format("line {}: missing column '{}'", line_no, name));
      return trim(fields[i]);
    };
    ++rep.records;

    ExpertAnnotation a;
    a.occurrence_id = rep.records - 1;
    const std::string basis = lower(field("basis"));
    if (basis == "collocates") {
      a.basis = AnnotationBasis::collocates;
    } else if (basis == "other") {
      a.basis = AnnotationBasis::other;
    } else {
      throw InputError(fmt::format("line {}: unknown basis '{}'", line_no, basis));
    }
    const std::string target = field("target");
    if (!options.target.empty() && target != options.target) {
      ++rep.dropped_other_target;
      continue;
    }
    if (options.collocates_only && a.basis != AnnotationBasis::collocates) {
      ++rep.dropped_basis;
      continue;
    }
    a.sense_label = field("sense_id");
    a.date = field("date");
    a.genre_label = options.genre_map.apply(field("genre"));
    for (std::size_t g = 0; g < options.genre_labels.size(); ++g) {
      if (options.genre_labels[g] == a.genre_label) a.genre_id = static_cast<int>(g);
    }
    if (options.time_axis.size() > 0) {
      auto t = options.time_axis.resolve(field("date"));
      if (!t) throw InputError(fmt::format("line {}: date '{}' outside the time axis", line_no, field("date")));
      a.time_slice = *t;
    }

    std::vector<std::string> tokens;
    {
      std::istringstream ss(field("context"));
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
    }
    std::vector<std::string> window;
    auto hit = std::find(tokens.begin(), tokens.end(), target);
    if (hit != tokens.end() && !target.empty()) {
      extract_windows(std::vector<std::string>(tokens.begin(), tokens.end()), target, options.window,
                      [&](std::vector<std::string> ctx) {
                        if (window.empty()) window = std::move(ctx);
                      });
    } else {
      window = std::move(tokens);
    }
    for (const auto& w : window) {
      if (auto id = vocab.find(w)) {
        a.context_ids.push_back(*id);
      } else {
        ++rep.context_words_dropped;
      }
    }
    out.push_back(std::move(a));
  }
  rep.retained = static_cast<int>(out.size());
  if (report) *report = rep;
  return out;
}

SenseFrequencies sense_frequency_series(const std::vector<ExpertAnnotation>& annotations, int T, int G) {
  SenseFrequencies f;
  std::set<std::string> senses;
  for (const auto& a : annotations) {
    if (!a.sense_label.empty()) senses.insert(a.sense_label);
  }
  f.senses.assign(senses.begin(), senses.end());
  const std::size_t S = f.senses.size();
  const auto nt = static_cast<std::size_t>(T);
  f.overall.assign(S, std::vector<double>(nt, 0.0));
  f.by_genre = Array3<double>(S, static_cast<std::size_t>(G), nt, 0.0);
  f.totals.assign(nt, 0);

  for (const auto& a : annotations) {
    if (a.sense_label.empty() || a.time_slice < 0 || a.time_slice >= T) continue;
    const auto s = static_cast<std::size_t>(
        std::lower_bound(f.senses.begin(), f.senses.end(), a.sense_label) - f.senses.begin());
    const auto t = static_cast<std::size_t>(a.time_slice);
    ++f.totals[t];
    f.overall[s][t] += 1.0;
    if (a.genre_id >= 0 && a.genre_id < G) f.by_genre(s, static_cast<std::size_t>(a.genre_id), t) += 1.0;
  }
  for (std::size_t t = 0; t < nt; ++t) {
    if (f.totals[t] == 0) continue;
    const double n = f.totals[t];
    for (std::size_t s = 0; s < S; ++s) {
      f.overall[s][t] /= n;
      for (std::size_t g = 0; g < static_cast<std::size_t>(G); ++g) f.by_genre(s, g, t) /= n;
    }
  }
  return f;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stop-word file: " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty() && line[0] != '#') words.insert(line);
  }
  return words;
}

}  // namespace gasc
