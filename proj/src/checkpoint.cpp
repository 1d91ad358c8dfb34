#include "gasc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gasc/errors.hpp"

namespace gasc {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "gasc-checkpoint";

json config_to_json(const ModelConfig& c) {
  return {
      {"K", c.K},
      {"W", c.W},
      {"a", c.a},
      {"b", c.b},
      {"k_psi", c.k_psi},
      {"T", c.T},
      {"G", c.G},
      {"V", c.V},
      {"n_iterations", c.n_iterations},
      {"n_retain", c.n_retain},
      {"seed", c.seed},
      {"preset", to_string(c.preset)},
      {"phi_anchor_precision", c.phi_anchor_precision},
      {"psi_anchor_precision", c.psi_anchor_precision},
      {"adapt_sweeps", c.adapt_sweeps},
      {"initial_step", c.initial_step},
      {"target_acceptance", c.target_acceptance},
      {"label_swap_moves", c.label_swap_moves},
  };
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.K = j.at("K").get<int>();
  c.W = j.at("W").get<int>();
  c.a = j.at("a").get<double>();
  c.b = j.at("b").get<double>();
  c.k_psi = j.at("k_psi").get<double>();
  c.T = j.at("T").get<int>();
  c.G = j.at("G").get<int>();
  c.V = j.at("V").get<int>();
  c.n_iterations = j.at("n_iterations").get<int>();
  c.n_retain = j.at("n_retain").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.preset = parse_preset(j.at("preset").get<std::string>());
  c.phi_anchor_precision = j.at("phi_anchor_precision").get<double>();
  c.psi_anchor_precision = j.at("psi_anchor_precision").get<double>();
  c.adapt_sweeps = j.at("adapt_sweeps").get<int>();
  c.initial_step = j.at("initial_step").get<double>();
  c.target_acceptance = j.at("target_acceptance").get<double>();
  c.label_swap_moves = j.at("label_swap_moves").get<bool>();
  return c;
}

json array_to_json(const Array3<double>& a) {
  return {{"shape", {a.dim0(), a.dim1(), a.dim2()}}, {"data", a.flat()}};
}

Array3<double> array_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3) throw InputError("checkpoint array shape must have 3 entries");
  Array3<double> a(shape[0], shape[1], shape[2]);
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != a.size()) throw InputError("checkpoint array data does not match its shape");
  std::copy(data.begin(), data.end(), a.flat().begin());
  return a;
}

json state_to_json(const ModelState& s) {
  return {{"k_phi", s.k_phi}, {"phi", array_to_json(s.phi)}, {"psi", array_to_json(s.psi)}, {"z", s.z}};
}

ModelState state_from_json(const json& j) {
  ModelState s;
  s.k_phi = j.at("k_phi").get<double>();
  s.phi = array_from_json(j.at("phi"));
  s.psi = array_from_json(j.at("psi"));
  s.z = j.at("z").get<std::vector<int>>();
  if (s.phi.dim0() != s.psi.dim0() || s.phi.dim2() != s.psi.dim1()) {
    throw InputError("checkpoint phi and psi dimensions disagree");
  }
  if (!s.all_finite()) throw InputError("checkpoint contains non-finite values");
  for (int z : s.z) {
    if (z < 0 || z >= s.K()) throw InputError("checkpoint z out of range");
  }
  return s;
}

json meta_to_json(const CorpusMeta& m) {
  return {{"target", m.target}, {"window", m.window}, {"genre_map", m.genre_map}};
}

CorpusMeta meta_from_json(const json& j) {
  CorpusMeta m;
  m.target = j.at("target").get<std::string>();
  m.window = j.at("window").get<int>();
  m.genre_map = j.at("genre_map").get<std::string>();
  return m;
}

json header(const std::string& kind) { return {{"format", kFormat}, {"version", kCheckpointVersion}, {"kind", kind}}; }

json parse_checked(const std::string& text, const std::string& kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormat) throw InputError("not a gasc checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  }
  if (!kind.empty() && j.value("kind", "") != kind) throw InputError("checkpoint is not of kind " + kind);
  return j;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
}

FitCheckpoint fit_from_json(const json& j) {
  FitCheckpoint c;
  c.meta = meta_from_json(j.at("corpus"));
  c.fit.variant = parse_variant(j.at("variant").get<std::string>());
  c.fit.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
  c.fit.time_labels = j.at("time_labels").get<std::vector<std::string>>();
  c.fit.genre_labels = j.at("genre_labels").get<std::vector<std::string>>();
  for (const auto& p : j.at("parts")) {
    FitPart part;
    part.genre_label = p.at("genre_label").get<std::string>();
    part.samples.config = config_from_json(p.at("config"));
    part.samples.variant = c.fit.variant;
    part.samples.cell_counts = p.at("cell_counts").get<std::vector<std::vector<int>>>();
    for (const auto& s : p.at("samples")) part.samples.samples.push_back(state_from_json(s));
    for (const auto& s : part.samples.samples) {
      if (s.V() != static_cast<int>(c.fit.vocab.size())) throw InputError("checkpoint state V does not match vocab");
      if (s.T() != static_cast<int>(c.fit.time_labels.size())) throw InputError("checkpoint state T does not match labels");
    }
    c.fit.parts.push_back(std::move(part));
  }
  return c;
}

StateCheckpoint state_checkpoint_from_json(const json& j) {
  StateCheckpoint c;
  c.config = config_from_json(j.at("config"));
  c.state = state_from_json(j.at("state"));
  c.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
  c.time_labels = j.at("time_labels").get<std::vector<std::string>>();
  c.genre_labels = j.at("genre_labels").get<std::vector<std::string>>();
  c.cell_counts = j.at("cell_counts").get<std::vector<std::vector<int>>>();
  c.meta = meta_from_json(j.at("corpus"));
  c.part = j.at("part").get<int>();
  c.iteration = j.at("iteration").get<int>();
  if (c.state.V() != static_cast<int>(c.vocab.size())) throw InputError("checkpoint state V does not match vocab");
  return c;
}

}  // namespace

std::string serialize_fit(const FitCheckpoint& c) {
  json j = header("fit");
  j["variant"] = to_string(c.fit.variant);
  j["corpus"] = meta_to_json(c.meta);
  j["vocab"] = c.fit.vocab.words();
  j["time_labels"] = c.fit.time_labels;
  j["genre_labels"] = c.fit.genre_labels;
  json parts = json::array();
  for (const auto& p : c.fit.parts) {
    json samples = json::array();
    for (const auto& s : p.samples.samples) samples.push_back(state_to_json(s));
    parts.push_back({{"genre_label", p.genre_label},
                     {"config", config_to_json(p.samples.config)},
                     {"cell_counts", p.samples.cell_counts},
                     {"samples", samples}});
  }
  j["parts"] = parts;
  return j.dump() + "\n";
}

FitCheckpoint parse_fit(const std::string& text) {
  const json j = parse_checked(text, "fit");
  return guarded([&] { return fit_from_json(j); });
}

std::string serialize_state(const StateCheckpoint& c) {
  json j = header("state");
  j["config"] = config_to_json(c.config);
  j["state"] = state_to_json(c.state);
  j["vocab"] = c.vocab.words();
  j["time_labels"] = c.time_labels;
  j["genre_labels"] = c.genre_labels;
  j["cell_counts"] = c.cell_counts;
  j["corpus"] = meta_to_json(c.meta);
  j["part"] = c.part;
  j["iteration"] = c.iteration;
  return j.dump() + "\n";
}

StateCheckpoint parse_state(const std::string& text) {
  const json j = parse_checked(text, "state");
  return guarded([&] { return state_checkpoint_from_json(j); });
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw InputError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FitCheckpoint read_checkpoint(const std::string& path) {
  const std::string text = read_text(path);
  const json j = parse_checked(text, "");
  const std::string kind = j.value("kind", "");
  if (kind == "fit") return guarded([&] { return fit_from_json(j); });
  if (kind != "state") throw InputError("unknown checkpoint kind: " + kind);
  StateCheckpoint s = guarded([&] { return state_checkpoint_from_json(j); });
  FitCheckpoint c;
  c.meta = s.meta;
  c.fit.variant = Variant::gasc;
  c.fit.vocab = s.vocab;
  c.fit.time_labels = s.time_labels;
  c.fit.genre_labels = s.genre_labels;
  FitPart part;
  part.samples.config = s.config;
  part.samples.config.n_retain = 1;
  part.samples.variant = Variant::gasc;
  part.samples.cell_counts = s.cell_counts;
  part.samples.samples.push_back(std::move(s.state));
  c.fit.parts.push_back(std::move(part));
  return c;
}

}  // namespace gasc
