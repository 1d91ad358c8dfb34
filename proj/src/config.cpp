#include "gasc/config.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "gasc/checkpoint.hpp"
#include "gasc/errors.hpp"

namespace gasc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw InputError(fmt::format("invalid value for {}: '{}'", key, value));
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw InputError(fmt::format("invalid boolean for {}: '{}'", key, value));
}

void mark_custom_if_changed(ModelConfig& m) {
  if (m.preset == Preset::custom) return;
  const ModelConfig p = ModelConfig::from_preset(m.preset);
  if (p.a != m.a || p.b != m.b || p.k_psi != m.k_psi) m.preset = Preset::custom;
}

std::string num(double x) { return fmt::format("{}", x); }

}  // namespace

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  ModelConfig& m = c.model;
  if (key == "preset") {
    m.apply_preset(parse_preset(value));
  } else if (key == "K") {
    m.K = parse_number<int>(key, value);
  } else if (key == "W") {
    m.W = parse_number<int>(key, value);
  } else if (key == "a") {
    m.a = parse_number<double>(key, value);
    mark_custom_if_changed(m);
  } else if (key == "b") {
    m.b = parse_number<double>(key, value);
    mark_custom_if_changed(m);
  } else if (key == "k_psi") {
    m.k_psi = parse_number<double>(key, value);
    mark_custom_if_changed(m);
  } else if (key == "n_iterations") {
    m.n_iterations = parse_number<int>(key, value);
  } else if (key == "n_retain") {
    m.n_retain = parse_number<int>(key, value);
  } else if (key == "seed") {
    m.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "phi_anchor_precision") {
    m.phi_anchor_precision = parse_number<double>(key, value);
  } else if (key == "psi_anchor_precision") {
    m.psi_anchor_precision = parse_number<double>(key, value);
  } else if (key == "adapt_sweeps") {
    m.adapt_sweeps = parse_number<int>(key, value);
  } else if (key == "initial_step") {
    m.initial_step = parse_number<double>(key, value);
  } else if (key == "target_acceptance") {
    m.target_acceptance = parse_number<double>(key, value);
  } else if (key == "label_swap_moves") {
    m.label_swap_moves = parse_bool(key, value);
  } else if (key == "variant") {
    c.variant = parse_variant(value);
  } else if (key == "target") {
    c.targets = split_list(value);
  } else if (key == "genre_map") {
    GenreMap::parse(value);  // validates
    c.genre_map = value;
  } else if (key == "time_order") {
    c.time_order = split_list(value);
  } else if (key == "min_count") {
    c.min_count = parse_number<int>(key, value);
  } else if (key == "respect_sentences") {
    c.respect_sentences = parse_bool(key, value);
  } else if (key == "test_fraction") {
    c.test_fraction = parse_number<double>(key, value);
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw InputError("test_fraction must lie in (0, 1)");
  } else if (key == "top_n") {
    c.top_n = parse_number<int>(key, value);
    if (c.top_n < 1) throw InputError("top_n must be >= 1");
  } else if (key == "raw_count_precision") {
    c.raw_count_precision = parse_bool(key, value);
  } else if (key == "collocates_only") {
    c.collocates_only = parse_bool(key, value);
  } else if (key == "stopwords") {
    c.stopwords = value;
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_number<int>(key, value);
  } else {
    throw InputError("unknown config key: " + key);
  }
}

RunConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty() || (line.front() == '[' && line.back() == ']')) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(fmt::format("config line {}: expected key = value", line_no));
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  RunConfig c;
  for (const auto& [k, v] : entries) {
    if (k == "preset") apply_setting(c, k, v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") {
      try {
        apply_setting(c, k, v);
      } catch (const InputError& e) {
        throw InputError(std::string("config: ") + e.what());
      }
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_text(path)); }

std::map<std::string, std::string> RunConfig::effective() const {
  const ModelConfig& m = model;
  return {
      {"K", std::to_string(m.K)},
      {"W", std::to_string(m.W)},
      {"a", num(m.a)},
      {"b", num(m.b)},
      {"k_psi", num(m.k_psi)},
      {"n_iterations", std::to_string(m.n_iterations)},
      {"n_retain", std::to_string(m.n_retain)},
      {"seed", std::to_string(m.seed)},
      {"preset", to_string(m.preset)},
      {"phi_anchor_precision", num(m.phi_anchor_precision)},
      {"psi_anchor_precision", num(m.psi_anchor_precision)},
      {"adapt_sweeps", std::to_string(m.adapt_sweeps)},
      {"initial_step", num(m.initial_step)},
      {"target_acceptance", num(m.target_acceptance)},
      {"label_swap_moves", m.label_swap_moves ? "true" : "false"},
      {"variant", to_string(variant)},
      {"target", join(targets)},
      {"genre_map", genre_map},
      {"time_order", join(time_order)},
      {"min_count", std::to_string(min_count)},
      {"respect_sentences", respect_sentences ? "true" : "false"},
      {"test_fraction", num(test_fraction)},
      {"top_n", std::to_string(top_n)},
      {"raw_count_precision", raw_count_precision ? "true" : "false"},
      {"collocates_only", collocates_only ? "true" : "false"},
      {"stopwords", stopwords},
      {"checkpoint_every", std::to_string(checkpoint_every)},
  };
}

}  // namespace gasc
