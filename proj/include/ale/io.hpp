#pragma once

// JSON documents: bundles, latent instances and datasets, explanations, oracle reports.

#include <ale/bounds.hpp>
#include <ale/error.hpp>
#include <ale/model.hpp>
#include <ale/oracle.hpp>
#include <ale/search.hpp>
#include <ale/verifier.hpp>

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ale::io {

using json = nlohmann::json;

/// Largest |stored - recomputed| accepted for a proto_dist shipped with a bundle.
inline constexpr double kProtoDistTolerance = 1e-6;

namespace detail {

inline const json& require(const json& doc, const char* key, const std::string& what)
{
  auto it = doc.find(key);
  if (it == doc.end())
    throw ValidationError(what + " lacks required field '" + key + "'");
  return *it;
}

inline Matrix matrix_from(const json& j, const std::string& what)
{
  if (!j.is_array())
    throw ValidationError(what + " must be an array of rows");
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (const auto& r : j) {
    if (!r.is_array())
      throw ValidationError(what + " must be an array of rows");
    auto& row = rows.emplace_back();
    row.reserve(r.size());
    for (const auto& x : r) {
      if (!x.is_number())
        throw ValidationError(what + " contains a non-number");
      row.push_back(x.get<double>());
    }
  }
  return Matrix::from_rows(rows);
}

inline std::vector<double> vector_from(const json& j, const std::string& what)
{
  if (!j.is_array())
    throw ValidationError(what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number())
      throw ValidationError(what + " contains a non-number");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::size_t index_from(const json& j, const std::string& what)
{
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ValidationError(what + " must be a nonnegative integer");
  return j.get<std::size_t>();
}

inline json rows_of(const Matrix& m) { return m.to_rows(); }

inline std::string slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_text(const std::string& text, const std::string& what)
{
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// bundle

inline ModelBundle bundle_from_json(const json& doc)
{
  const std::string what = "bundle";
  if (!doc.is_object())
    throw ValidationError("bundle document must be a JSON object");
  ModelBundle b;
  b.num_classes = detail::index_from(detail::require(doc, "num_classes", what), "num_classes");
  b.prototypes = detail::matrix_from(detail::require(doc, "prototypes", what), "prototypes");
  b.weights = detail::matrix_from(detail::require(doc, "weights", what), "weights");
  if (auto it = doc.find("num_prototypes"); it != doc.end() &&
      detail::index_from(*it, "num_prototypes") != b.num_prototypes())
    throw DimensionError("num_prototypes says " + it->dump() + " but " +
                         std::to_string(b.num_prototypes()) + " prototypes are listed");
  if (auto it = doc.find("latent_dim"); it != doc.end() &&
      detail::index_from(*it, "latent_dim") != b.latent_dim())
    throw DimensionError("latent_dim says " + it->dump() + " but prototypes have dimension " +
                         std::to_string(b.latent_dim()));

  const json& sig = detail::require(doc, "sigma", what);
  const auto kind = detail::require(sig, "kind", "sigma");
  if (kind != "log_ratio")
    throw ValidationError("unsupported sigma kind " + kind.dump());
  const auto& eps = detail::require(sig, "epsilon", "sigma");
  if (!eps.is_number())
    throw ValidationError("sigma.epsilon must be a number");
  b.sigma = {SigmaKind::log_ratio, eps.get<double>()};

  if (auto it = doc.find("biases"); it != doc.end() && !it->is_null())
    b.biases = detail::vector_from(*it, "biases");
  else
    b.biases.assign(b.num_classes, 0.0);
  if (auto it = doc.find("distance_slack"); it != doc.end() && !it->is_null()) {
    if (!it->is_number())
      throw ValidationError("distance_slack must be a number");
    b.distance_slack = it->get<double>();
  }

  b.proto_dist = prototype_distances(b.prototypes);
  if (auto it = doc.find("proto_dist"); it != doc.end() && !it->is_null()) {
    const Matrix stored = detail::matrix_from(*it, "proto_dist");
    const std::size_t m = b.num_prototypes();
    if (stored.rows() != m || stored.cols() != m)
      throw DimensionError("proto_dist must be " + std::to_string(m) + "x" + std::to_string(m));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (std::abs(stored(i, j) - stored(j, i)) > kProtoDistTolerance)
          throw ValidationError("proto_dist is not symmetric at (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
        if (!(std::abs(stored(i, j) - b.proto_dist(i, j)) <= kProtoDistTolerance))
          throw ValidationError("proto_dist disagrees with the prototypes at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
      }
  }
  validate(b);
  return b;
}

inline json to_json(const ModelBundle& b)
{
  return json{{"num_classes", b.num_classes},
              {"num_prototypes", b.num_prototypes()},
              {"latent_dim", b.latent_dim()},
              {"prototypes", detail::rows_of(b.prototypes)},
              {"weights", detail::rows_of(b.weights)},
              {"biases", b.biases},
              {"sigma", {{"kind", "log_ratio"}, {"epsilon", b.sigma.epsilon}}},
              {"proto_dist", detail::rows_of(b.proto_dist)},
              {"distance_slack", b.distance_slack},
              {"metadata", json::object()}};
}

inline ModelBundle load_bundle(const std::filesystem::path& path)
{
  return bundle_from_json(detail::parse_text(detail::slurp(path), path.string()));
}

// ---------------------------------------------------------------------------
// instances and datasets

inline LatentInstance instance_from_json(const json& doc)
{
  if (!doc.is_object())
    throw ValidationError("instance document must be a JSON object");
  LatentInstance z;
  const auto& id = detail::require(doc, "id", "instance");
  z.id = id.is_string() ? id.get<std::string>() : id.dump();
  z.components = detail::matrix_from(detail::require(doc, "components", "instance " + z.id),
                                     "components of instance " + z.id);
  if (z.num_components() == 0)
    throw ValidationError("instance '" + z.id + "' has no components");
  if (auto it = doc.find("label"); it != doc.end() && !it->is_null())
    z.label = detail::index_from(*it, "label of instance " + z.id);
  z.grid_height = z.num_components();
  z.grid_width = 1;
  if (auto it = doc.find("grid"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2)
      throw ValidationError("grid of instance '" + z.id + "' must be [H1, W1]");
    z.grid_height = detail::index_from((*it)[0], "grid height");
    z.grid_width = detail::index_from((*it)[1], "grid width");
    if (z.grid_height * z.grid_width != z.num_components())
      throw DimensionError("grid " + it->dump() + " of instance '" + z.id + "' does not match " +
                           std::to_string(z.num_components()) + " components");
  }
  if (auto it = doc.find("predicted_class"); it != doc.end() && !it->is_null())
    z.reference_prediction = detail::index_from(*it, "predicted_class");
  if (auto it = doc.find("activations"); it != doc.end() && !it->is_null())
    z.reference_activations = detail::vector_from(*it, "activations");
  return z;
}

inline json to_json(const LatentInstance& z)
{
  json doc{{"id", z.id},
           {"grid", {z.grid_height, z.grid_width}},
           {"components", detail::rows_of(z.components)}};
  if (z.label)
    doc["label"] = *z.label;
  if (z.reference_prediction)
    doc["predicted_class"] = *z.reference_prediction;
  if (z.reference_activations)
    doc["activations"] = *z.reference_activations;
  return doc;
}

/// Reads instance documents one at a time from a JSON array or from a stream of
/// concatenated / newline-delimited objects. Only the current object is held in memory.
class DatasetReader
{
public:
  explicit DatasetReader(const std::filesystem::path& path)
    : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)), in_(*owned_),
      name_(path.string())
  {
    if (!*owned_)
      throw ValidationError("cannot open dataset '" + name_ + "'");
    start();
  }

  explicit DatasetReader(std::istream& in, std::string name = "<stream>")
    : in_(in), name_(std::move(name))
  {
    start();
  }

  /// Next instance, or nothing at the end of the dataset.
  std::optional<LatentInstance> next()
  {
    if (done_)
      return std::nullopt;
    int ch = skip_separators();
    if (ch == EOF) {
      if (array_)
        throw ValidationError(name_ + ": unterminated JSON array");
      done_ = true;
      return std::nullopt;
    }
    if (array_ && ch == ']') {
      in_.get();
      done_ = true;
      return std::nullopt;
    }
    if (ch != '{')
      throw ValidationError(name_ + ": expected an instance object, found '" +
                            std::string(1, static_cast<char>(ch)) + "'");
    const std::string text = read_object();
    ++count_;
    // The object has been consumed whole, so a bad record does not stop the stream.
    const std::string where = name_ + " instance #" + std::to_string(count_);
    std::string id = "#" + std::to_string(count_);
    try {
      const json doc = detail::parse_text(text, where);
      if (doc.is_object() && doc.contains("id"))
        id = doc["id"].is_string() ? doc["id"].get<std::string>() : doc["id"].dump();
      return instance_from_json(doc);
    } catch (const ValidationError& e) {
      throw InstanceError(id, where + ": " + e.what());
    }
  }

  std::size_t count() const { return count_; }

private:
  void start()
  {
    const int ch = skip_separators();
    if (ch == '[') {
      array_ = true;
      in_.get();
    }
  }

  int skip_separators()
  {
    for (;;) {
      const int ch = in_.peek();
      if (ch == EOF)
        return EOF;
      if (std::isspace(ch) || (array_ && ch == ',')) {
        in_.get();
        continue;
      }
      return ch;
    }
  }

  std::string read_object()
  {
    std::string buf;
    int depth = 0;
    bool in_string = false, escaped = false;
    char c;
    while (in_.get(c)) {
      buf.push_back(c);
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"')
        in_string = true;
      else if (c == '{' || c == '[')
        ++depth;
      else if (c == '}' || c == ']') {
        if (--depth == 0)
          return buf;
      }
    }
    throw ValidationError(name_ + ": truncated instance object");
  }

  std::unique_ptr<std::ifstream> owned_;
  std::istream& in_;
  std::string name_;
  bool array_ = false;
  bool done_ = false;
  std::size_t count_ = 0;
};

inline std::vector<LatentInstance> load_dataset(const std::filesystem::path& path)
{
  DatasetReader reader(path);
  std::vector<LatentInstance> out;
  while (auto z = reader.next())
    out.push_back(std::move(*z));
  return out;
}

// ---------------------------------------------------------------------------
// explanations

struct ExplanationDoc
{
  Explanation explanation;
  std::optional<std::size_t> predicted_class;
  std::optional<std::size_t> label;
  std::optional<ActivationBounds> bounds;
  std::optional<VerifyResult> verification;
  std::optional<SearchStatus> status;
  std::optional<std::size_t> forward_size;
  std::optional<std::vector<TraceEvent>> trace;
};

inline json to_json(const VerifyResult& v)
{
  json witnesses = json::object(), gaps = json::object();
  for (const auto& [k, w] : v.witnesses) {
    witnesses[std::to_string(k)] = w.activations;
    gaps[std::to_string(k)] = w.logit_gap;
  }
  return json{{"verified", v.verified},
              {"unverified", v.unverified_classes},
              {"witnesses", witnesses},
              {"logit_gaps", gaps}};
}

inline VerifyResult verify_result_from_json(const json& doc)
{
  VerifyResult v;
  v.verified = detail::require(doc, "verified", "verification").get<bool>();
  if (auto it = doc.find("unverified"); it != doc.end())
    for (const auto& k : *it)
      v.unverified_classes.push_back(detail::index_from(k, "unverified class"));
  if (auto it = doc.find("witnesses"); it != doc.end())
    for (const auto& [key, val] : it->items()) {
      Witness w;
      w.activations = detail::vector_from(val, "witness");
      if (auto g = doc.find("logit_gaps"); g != doc.end() && g->contains(key))
        w.logit_gap = (*g)[key].get<double>();
      v.witnesses.emplace(std::stoul(key), std::move(w));
    }
  return v;
}

inline json to_json(const ExplanationDoc& d)
{
  const Explanation& e = d.explanation;
  json doc{{"paradigm", std::string(to_string(e.paradigm))}, {"instance_id", e.instance_id}};
  if (d.predicted_class)
    doc["predicted_class"] = *d.predicted_class;
  if (d.label)
    doc["label"] = *d.label;
  if (is_spatial(e.paradigm)) {
    json pairs = json::array();
    for (const Pair& p : e.pairs)
      pairs.push_back({p.component, p.prototype});
    doc["pairs"] = std::move(pairs);
  } else {
    doc["prototypes"] = e.prototypes;
  }
  doc["size"] = e.size();
  if (d.status)
    doc["status"] = std::string(to_string(*d.status));
  if (d.forward_size)
    doc["forward_size"] = *d.forward_size;
  if (d.bounds)
    doc["bounds"] = {{"lower", d.bounds->lower}, {"upper", d.bounds->upper}};
  if (d.verification)
    doc["verification"] = to_json(*d.verification);
  if (d.trace) {
    json trace = json::array();
    for (const TraceEvent& t : *d.trace) {
      json ev{{"phase", t.phase == TraceEvent::Phase::forward ? "forward" : "backward"},
              {"verified", t.verified_after}};
      if (is_spatial(e.paradigm))
        ev["pair"] = {t.pair.component, t.pair.prototype};
      else
        ev["prototype"] = t.pair.prototype;
      trace.push_back(std::move(ev));
    }
    doc["search_trace"] = std::move(trace);
  }
  return doc;
}

inline ExplanationDoc explanation_from_json(const json& doc)
{
  if (!doc.is_object())
    throw ValidationError("explanation document must be a JSON object");
  ExplanationDoc d;
  Explanation& e = d.explanation;
  const auto& paradigm = detail::require(doc, "paradigm", "explanation");
  if (!paradigm.is_string())
    throw ValidationError("paradigm must be a string");
  e.paradigm = parse_paradigm(paradigm.get<std::string>());
  if (auto it = doc.find("instance_id"); it != doc.end())
    e.instance_id = it->is_string() ? it->get<std::string>() : it->dump();
  if (auto it = doc.find("predicted_class"); it != doc.end() && !it->is_null())
    d.predicted_class = detail::index_from(*it, "predicted_class");
  if (auto it = doc.find("label"); it != doc.end() && !it->is_null())
    d.label = detail::index_from(*it, "label");

  const bool has_protos = doc.contains("prototypes") && !doc["prototypes"].is_null();
  const bool has_pairs = doc.contains("pairs") && !doc["pairs"].is_null();
  if (is_spatial(e.paradigm)) {
    if (has_protos)
      throw ValidationError("a " + std::string(to_string(e.paradigm)) +
                            " explanation must use 'pairs', not 'prototypes'");
    if (!has_pairs)
      throw ValidationError("explanation lacks required field 'pairs'");
    for (const auto& p : doc["pairs"]) {
      if (!p.is_array() || p.size() != 2)
        throw ValidationError("each pair must be [component, prototype]");
      e.pairs.push_back({detail::index_from(p[0], "pair component"),
                         detail::index_from(p[1], "pair prototype")});
    }
  } else {
    if (has_pairs)
      throw ValidationError("a topk explanation must use 'prototypes', not 'pairs'");
    if (!has_protos)
      throw ValidationError("explanation lacks required field 'prototypes'");
    for (const auto& j : doc["prototypes"])
      e.prototypes.push_back(detail::index_from(j, "prototype index"));
  }
  if (auto it = doc.find("bounds"); it != doc.end() && !it->is_null()) {
    ActivationBounds b;
    b.lower = detail::vector_from(detail::require(*it, "lower", "bounds"), "bounds.lower");
    b.upper = detail::vector_from(detail::require(*it, "upper", "bounds"), "bounds.upper");
    if (b.lower.size() != b.upper.size())
      throw DimensionError("bounds.lower and bounds.upper differ in length");
    d.bounds = std::move(b);
  }
  if (auto it = doc.find("verification"); it != doc.end() && !it->is_null())
    d.verification = verify_result_from_json(*it);
  return d;
}

inline ExplanationDoc make_doc(const SearchResult& r, const LatentInstance& z, bool with_trace)
{
  ExplanationDoc d;
  d.explanation = r.explanation;
  d.explanation.instance_id = z.id;
  d.predicted_class = r.predicted;
  d.label = z.label;
  d.bounds = r.bounds;
  d.verification = r.verification;
  d.status = r.status;
  if (is_spatial(r.explanation.paradigm))
    d.forward_size = r.forward_size;
  if (with_trace)
    d.trace = r.trace;
  return d;
}

// ---------------------------------------------------------------------------
// oracle reports

inline json to_json(const oracle::OracleReport& r)
{
  json doc{{"checked", r.checked}, {"violations", r.violations}, {"seed", r.seed}};
  if (r.first_violation)
    doc["first_violation"] = {{"input", r.first_violation->input},
                              {"expected", r.first_violation->expected},
                              {"got", r.first_violation->got}};
  else
    doc["first_violation"] = nullptr;
  doc["metrics"] = r.metrics;
  return doc;
}

// ---------------------------------------------------------------------------
// files

inline json load_json(const std::filesystem::path& path)
{
  return detail::parse_text(detail::slurp(path), path.string());
}

/// Write through a sibling temporary and rename, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush())
      throw ValidationError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

} // namespace ale::io
