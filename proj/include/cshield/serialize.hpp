#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cshield/benchmarks.hpp"
#include "cshield/constraints.hpp"
#include "cshield/safe_predictor.hpp"
#include "cshield/training.hpp"
#include "cshield/verifier.hpp"

namespace cshield {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// --- basic shapes ------------------------------------------------------------

inline json region_to_json(const InputRegion& region) {
  json boxes = json::array();
  for (const Box& b : region.boxes()) {
    json jb = json::array();
    for (const Interval& iv : b) jb.push_back({iv.lo, iv.hi});
    boxes.push_back(std::move(jb));
  }
  return json{{"boxes", std::move(boxes)}};
}

inline InputRegion region_from_json(const json& j) {
  std::vector<Box> boxes;
  for (const json& jb : j.at("boxes")) {
    Box b;
    for (const json& ji : jb) {
      if (!ji.is_array() || ji.size() != 2) throw IoError("region: interval must be [lo, hi]");
      b.push_back({ji[0].get<double>(), ji[1].get<double>()});
    }
    boxes.push_back(std::move(b));
  }
  return InputRegion(std::move(boxes));
}

inline json output_set_to_json(const ConvexOutputSet& s) {
  switch (s.kind()) {
    case OutputSetKind::kUnconstrained:
      return json{{"variant", "unconstrained"}};
    case OutputSetKind::kInterval:
      return json{{"variant", "interval"}, {"lo", s.lo()}, {"hi", s.hi()}};
    case OutputSetKind::kHalfLineAbove:
      return json{{"variant", "half_line_above"}, {"lo", s.lo()}};
    case OutputSetKind::kHalfLineBelow:
      return json{{"variant", "half_line_below"}, {"hi", s.hi()}};
    case OutputSetKind::kScoreNotHighest:
      return json{{"variant", "score_not_highest"},
                  {"unsafe_indices", s.unsafe_indices()},
                  {"epsilon", s.epsilon()}};
  }
  throw SpecError("output_set_to_json: unknown kind");
}

inline ConvexOutputSet output_set_from_json(const json& j) {
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "unconstrained") return ConvexOutputSet::unconstrained();
  if (variant == "interval") {
    return ConvexOutputSet::interval(j.at("lo").get<double>(), j.at("hi").get<double>());
  }
  if (variant == "half_line_above") return ConvexOutputSet::half_line_above(j.at("lo").get<double>());
  if (variant == "half_line_below") return ConvexOutputSet::half_line_below(j.at("hi").get<double>());
  if (variant == "score_not_highest") {
    return ConvexOutputSet::score_not_highest(j.at("unsafe_indices").get<std::vector<int>>(),
                                              j.at("epsilon").get<double>());
  }
  throw IoError("output set: unknown variant '" + variant + "'");
}

inline json spec_to_json(const DenseNetSpec& s) {
  return json{{"dims", s.dims}, {"final_relu", s.final_relu}};
}

inline DenseNetSpec spec_from_json(const json& j) {
  DenseNetSpec s{j.at("dims").get<std::vector<int>>(), j.at("final_relu").get<bool>()};
  s.validate();
  return s;
}

// --- constraint files --------------------------------------------------------

struct ConstraintFile {
  InputRegion domain;
  Vec distance_scale;
  std::vector<Vec> probe_axes;
  std::vector<ConstraintSpec> constraints;
};

inline ConstraintFile constraint_file_of(const BenchmarkBundle& b) {
  return ConstraintFile{b.domain, b.distance_scale, b.probe_axes, b.constraints};
}

inline json constraint_file_to_json(const ConstraintFile& f) {
  json j;
  j["format_version"] = kFormatVersion;
  j["domain"] = region_to_json(f.domain);
  j["distance_scale"] = f.distance_scale;
  if (!f.probe_axes.empty()) j["probe_axes"] = f.probe_axes;
  json cs = json::array();
  for (const ConstraintSpec& c : f.constraints) {
    cs.push_back(json{{"name", c.name},
                      {"region", region_to_json(c.region)},
                      {"output", output_set_to_json(c.output_set)}});
  }
  j["constraints"] = std::move(cs);
  return j;
}

inline ConstraintFile constraint_file_from_json(const json& j) {
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw IoError("constraint file: unsupported format_version");
  }
  ConstraintFile f;
  f.domain = region_from_json(j.at("domain"));
  f.distance_scale = j.at("distance_scale").get<Vec>();
  if (j.contains("probe_axes")) f.probe_axes = j.at("probe_axes").get<std::vector<Vec>>();
  for (const json& jc : j.at("constraints")) {
    f.constraints.push_back({jc.at("name").get<std::string>(), region_from_json(jc.at("region")),
                             output_set_from_json(jc.at("output"))});
  }
  return f;
}

// --- file helpers ------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed while writing " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

inline json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

// Content hash of the canonical (parsed, key-sorted) form, so formatting
// changes do not break the model/constraints binding.
inline std::string canonical_json_hash(const json& j) { return fnv1a64_hex(j.dump()); }

inline void save_json_file(const json& j, const std::string& path) {
  write_text_file(path, j.dump(2) + "\n");
}

// --- model files -------------------------------------------------------------

inline json model_to_json(const StandardModel& m) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "standard";
  j["constraint_spec_hash"] = m.constraint_hash;
  j["trunk_spec"] = spec_to_json(m.spec());
  j["params"] = m.params();
  return j;
}

inline json model_to_json(const SafePredictorModel& m) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "safe";
  j["constraint_spec_hash"] = m.constraint_hash;
  j["trunk_spec"] = spec_to_json(m.trunk_spec());
  j["head_spec"] = spec_to_json(m.head_spec());
  json heads = json::array();
  for (const ConstrainedPredictor& h : m.heads()) {
    heads.push_back(json{{"bits", h.key.to_string()}, {"codomain", output_set_to_json(h.codomain)}});
  }
  j["head_specs"] = std::move(heads);
  j["distance_scale"] = m.distance_scale();
  json prox = json::object();
  for (int i = 0; i < m.constraint_count(); ++i) {
    const ProximityParams p = m.proximity_of(i);
    prox[m.constraints()[static_cast<size_t>(i)].name] = json{{"a", p.a}, {"b", p.b}};
  }
  j["proximity_params"] = std::move(prox);
  Vec net(m.params().begin(), m.params().begin() + m.net_param_count());
  j["params"] = std::move(net);
  return j;
}

inline StandardModel standard_model_from_json(const json& j, DenseNetSpec expected = {}) {
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw IoError("model file: unsupported format_version");
  }
  if (j.at("kind").get<std::string>() != "standard") throw IoError("model file: kind is not standard");
  StandardModel m(spec_from_json(j.at("trunk_spec")), 0);
  if (!expected.dims.empty() && expected.dims != m.spec().dims) {
    throw IoError("model file: unexpected architecture");
  }
  const Vec params = j.at("params").get<Vec>();
  if (params.size() != m.params().size()) throw IoError("model file: params length mismatch");
  m.params() = params;
  m.constraint_hash = j.at("constraint_spec_hash").get<std::string>();
  return m;
}

// Rebuilds the model from the constraint file it was trained against, then
// restores parameters. The builder re-derives the overlap partition, and the
// stored head list must match it exactly.
inline SafePredictorModel safe_model_from_json(const json& j, const ConstraintFile& cf) {
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw IoError("model file: unsupported format_version");
  }
  if (j.at("kind").get<std::string>() != "safe") throw IoError("model file: kind is not safe");
  SafePredictorModel m =
      build_safe_predictor(cf.constraints, cf.domain, spec_from_json(j.at("trunk_spec")),
                           spec_from_json(j.at("head_spec")), 0, cf.distance_scale);
  const json& heads = j.at("head_specs");
  if (heads.size() != m.heads().size()) {
    throw IoError("model file: head count does not match the constraint file's overlap partition");
  }
  for (size_t b = 0; b < m.heads().size(); ++b) {
    if (heads[b].at("bits").get<std::string>() != m.heads()[b].key.to_string()) {
      throw IoError("model file: head keys do not match the constraint file");
    }
  }
  const Vec net = j.at("params").get<Vec>();
  if (static_cast<int>(net.size()) != m.net_param_count()) {
    throw IoError("model file: params length mismatch");
  }
  std::copy(net.begin(), net.end(), m.params().begin());
  const json& prox = j.at("proximity_params");
  for (int i = 0; i < m.constraint_count(); ++i) {
    const std::string& name = m.constraints()[static_cast<size_t>(i)].name;
    if (!prox.contains(name)) throw IoError("model file: missing proximity_params entry '" + name + "'");
    m.set_proximity(i, ProximityParams{prox.at(name).at("a").get<double>(),
                                       prox.at(name).at("b").get<double>()});
  }
  m.constraint_hash = j.at("constraint_spec_hash").get<std::string>();
  return m;
}

inline json describe_model(const SafePredictorModel& m) {
  json heads = json::array();
  for (const ConstrainedPredictor& h : m.heads()) {
    heads.push_back(json{{"bits", h.key.to_string()},
                         {"codomain", h.codomain.describe()},
                         {"param_count", m.head_spec().param_count()}});
  }
  json keys = json::array();
  for (const OverlapKey& k : m.partition().keys) keys.push_back(k.to_string());
  return json{{"constraint_count", m.constraint_count()},
              {"overlap_keys", std::move(keys)},
              {"head_count", static_cast<int>(m.heads().size())},
              {"heads", std::move(heads)},
              {"trunk_param_count", m.trunk_spec().param_count()},
              {"proximity_param_count", 2 * m.constraint_count()},
              {"total_param_count", m.param_count()},
              {"node_count",
               m.trunk_spec().node_count() +
                   static_cast<int>(m.heads().size()) * m.head_spec().node_count()}};
}

// --- reports & configs -------------------------------------------------------

inline json report_to_json(const ViolationReport& r) {
  json per = json::array();
  for (size_t i = 0; i < r.per_constraint.size(); ++i) {
    per.push_back(json{{"name", r.per_constraint[i].name},
                       {"applicable", r.per_constraint[i].applicable},
                       {"violations", r.per_constraint[i].violations},
                       {"percent", r.constraint_percent(i)}});
  }
  return json{{"total_probes", r.total_probes},
              {"probes_with_violation", r.probes_with_violation},
              {"total_violations", r.total_violations},
              {"violation_percent", r.violation_percent()},
              {"worst_margin", r.worst_margin},
              {"probe_spec", r.probe_spec},
              {"per_constraint", std::move(per)}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("loss")) {
    const std::string loss = j.at("loss").get<std::string>();
    if (loss == "mse") {
      c.loss = LossKind::kMse;
    } else if (loss == "asymmetric") {
      c.loss = LossKind::kAsymmetric;
    } else {
      throw IoError("train config: unknown loss '" + loss + "'");
    }
  }
  if (j.contains("asym_weight")) c.asym_weight = j.at("asym_weight").get<double>();
  if (j.contains("check_every")) c.check_every = j.at("check_every").get<int>();
  c.validate();
  return c;
}

inline json train_config_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"loss", c.loss == LossKind::kMse ? "mse" : "asymmetric"},
              {"asym_weight", c.asym_weight},
              {"check_every", c.check_every}};
}

}  // namespace cshield
