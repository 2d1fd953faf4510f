#pragma once

// The command layer behind the `ale` binary. Every command is an ordinary function that
// takes paths and options, writes to the given streams and returns the process exit code,
// so tests can drive it in-process.

#include <ale/bounds.hpp>
#include <ale/error.hpp>
#include <ale/io.hpp>
#include <ale/model.hpp>
#include <ale/oracle.hpp>
#include <ale/search.hpp>
#include <ale/stats.hpp>
#include <ale/synthetic.hpp>
#include <ale/verifier.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ale::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnverified = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

/// Flags shared by the commands. Unset optionals fall back to the bundle or library default.
struct RunOptions
{
  std::vector<Paradigm> paradigms;
  PairStrategy strategy = PairStrategy::nearest_first;
  InitStrategy init = InitStrategy::empty;
  std::optional<double> slack;
  double margin = 0.0;
  std::optional<double> epsilon_override;
  std::optional<std::size_t> sample_per_class;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::optional<double> timeout_seconds;
  std::optional<std::size_t> max_pairs;
  std::optional<fs::path> out;
  bool trace = false;
  bool timing = true;
};

/// "10s", "500ms", "2m", "1h" or a bare number of seconds.
inline double parse_duration(const std::string& text)
{
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ValidationError("invalid duration '" + text + "'");
  }
  const std::string unit = text.substr(pos);
  double scale = 1.0;
  if (unit.empty() || unit == "s")
    scale = 1.0;
  else if (unit == "ms")
    scale = 1e-3;
  else if (unit == "m" || unit == "min")
    scale = 60.0;
  else if (unit == "h")
    scale = 3600.0;
  else
    throw ValidationError("invalid duration unit in '" + text + "'");
  if (!(value >= 0.0))
    throw ValidationError("duration must be nonnegative: '" + text + "'");
  return value * scale;
}

/// Comma-separated paradigm list; "all" expands to every paradigm.
inline std::vector<Paradigm> parse_paradigms(const std::string& text)
{
  std::vector<Paradigm> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    if (item == "all") {
      for (Paradigm p : {Paradigm::triangle, Paradigm::hypersphere, Paradigm::topk})
        if (std::find(out.begin(), out.end(), p) == out.end())
          out.push_back(p);
    } else if (!item.empty()) {
      const Paradigm p = parse_paradigm(item);
      if (std::find(out.begin(), out.end(), p) == out.end())
        out.push_back(p);
    }
    start = comma + 1;
  }
  if (out.empty())
    throw ValidationError("no paradigm given");
  return out;
}

inline SearchConfig search_config(const RunOptions& o, Paradigm p)
{
  SearchConfig cfg;
  cfg.paradigm = p;
  cfg.pair_strategy = o.strategy;
  cfg.init_strategy = o.init;
  cfg.slack = o.slack;
  cfg.max_pairs = o.max_pairs;
  cfg.margin = o.margin;
  cfg.record_trace = o.trace;
  return cfg;
}

inline ModelBundle load_bundle_for(const fs::path& path, const RunOptions& o)
{
  ModelBundle b = io::load_bundle(path);
  if (o.epsilon_override) {
    b.sigma.epsilon = *o.epsilon_override;
    validate(b);
  }
  if (o.slack && !(*o.slack >= 0.0))
    throw ValidationError("--slack must be nonnegative");
  if (!(o.margin >= 0.0))
    throw ValidationError("--margin must be nonnegative");
  return b;
}

// ---------------------------------------------------------------------------
// dataset traversal

/// Indices of the instances kept by --sample-per-class: k per label, chosen by a seeded
/// shuffle of each class's indices. Unlabeled instances are never sampled.
inline std::optional<std::set<std::size_t>> sample_indices(const fs::path& dataset,
                                                           const RunOptions& o)
{
  if (!o.sample_per_class)
    return std::nullopt;
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  io::DatasetReader reader(dataset);
  std::size_t index = 0;
  for (;; ++index) {
    std::optional<LatentInstance> z;
    try {
      z = reader.next();
    } catch (const InstanceError&) {
      continue;  // has no readable label, so it is never sampled
    }
    if (!z)
      break;
    if (z->label)
      by_label[*z->label].push_back(index);
  }
  std::mt19937_64 rng(o.seed);
  std::set<std::size_t> keep;
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n = std::min(*o.sample_per_class, idx.size());
    keep.insert(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return keep;
}

/// Everything produced for one instance.
struct InstanceRun
{
  LatentInstance instance;  // components dropped after the run
  std::vector<SearchResult> results;
  std::vector<double> seconds;
  std::optional<std::string> error;
  std::optional<std::string> warning;
};

inline InstanceRun run_instance(LatentInstance z, const ModelBundle& bundle, const RunOptions& o,
                                const std::vector<Paradigm>& paradigms)
{
  InstanceRun run;
  try {
    validate(z, bundle);
    const Anchor anchor = make_anchor(z, bundle);
    if (z.reference_prediction && *z.reference_prediction != anchor.predicted)
      run.warning = "instance '" + z.id + "': engine predicts class " +
                    std::to_string(anchor.predicted) + ", attached prediction is " +
                    std::to_string(*z.reference_prediction);
    for (Paradigm p : paradigms) {
      SearchConfig cfg = search_config(o, p);
      const auto start = Clock::now();
      if (o.timeout_seconds)
        cfg.deadline = start + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>(*o.timeout_seconds));
      run.results.push_back(explain(anchor, bundle, cfg, z.id));
      run.seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    }
  } catch (const Error& e) {
    run.error = e.what();
  }
  z.components = Matrix();
  run.instance = std::move(z);
  return run;
}

/// Streams the dataset in chunks, explains each chunk on `jobs` threads and hands the runs
/// to `emit` in dataset order.
inline void for_each_run(const fs::path& dataset, const ModelBundle& bundle, const RunOptions& o,
                         const std::vector<Paradigm>& paradigms,
                         const std::function<void(InstanceRun&)>& emit)
{
  const auto keep = sample_indices(dataset, o);
  io::DatasetReader reader(dataset);
  const std::size_t jobs = std::max<std::size_t>(1, o.jobs);
  const std::size_t chunk = 4 * jobs;
  std::size_t index = 0;
  for (;;) {
    std::vector<LatentInstance> batch;
    // Unreadable records keep their slot so errors are emitted in dataset order.
    std::vector<std::optional<InstanceRun>> failed;
    while (batch.size() < chunk) {
      std::optional<LatentInstance> z;
      try {
        z = reader.next();
      } catch (const InstanceError& e) {
        if (!keep || keep->count(index)) {
          InstanceRun bad;
          bad.instance.id = e.id();
          bad.error = e.what();
          failed.resize(batch.size() + 1);
          failed.back() = std::move(bad);
          batch.emplace_back();
        }
        ++index;
        continue;
      }
      if (!z)
        break;
      if (!keep || keep->count(index))
        batch.push_back(std::move(*z));
      ++index;
    }
    if (batch.empty())
      break;
    failed.resize(batch.size());
    std::vector<InstanceRun> runs(batch.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < batch.size(); i = next++)
        runs[i] = failed[i] ? std::move(*failed[i])
                            : run_instance(std::move(batch[i]), bundle, o, paradigms);
    };
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < std::min(jobs, batch.size()); ++t)
        pool.emplace_back(worker);
      for (auto& t : pool)
        t.join();
    }
    for (auto& r : runs)
      emit(r);
  }
}

inline std::string file_safe(const std::string& id)
{
  std::string out = id.empty() ? "instance" : id;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      c = '_';
  return out;
}

inline bool is_directory_target(const fs::path& p)
{
  const std::string s = p.string();
  return fs::is_directory(p) || (!s.empty() && (s.back() == '/' || s.back() == '\\'));
}

/// Runs `body`, mapping library exceptions onto exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& body)
{
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SizeLimitError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const StateError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

// ---------------------------------------------------------------------------
// explain

inline int run_explain(const fs::path& bundle_path, const fs::path& dataset_path,
                       const RunOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    if (!fs::exists(dataset_path))
      throw ValidationError("dataset '" + dataset_path.string() + "' does not exist");
    const ModelBundle bundle = load_bundle_for(bundle_path, o);
    const auto paradigms = o.paradigms.empty() ? std::vector{Paradigm::topk} : o.paradigms;

    const bool to_dir = o.out && is_directory_target(*o.out);
    std::ofstream file;
    fs::path tmp;
    if (to_dir) {
      fs::create_directories(*o.out);
    } else if (o.out) {
      tmp = *o.out;
      tmp += ".tmp";
      file.open(tmp, std::ios::binary | std::ios::trunc);
      if (!file)
        throw ValidationError("cannot write '" + o.out->string() + "'");
    }
    std::ostream& sink = o.out && !to_dir ? static_cast<std::ostream&>(file) : out;

    int code = kExitOk;
    for_each_run(dataset_path, bundle, o, paradigms, [&](InstanceRun& run) {
      if (run.warning)
        err << "warning: " << *run.warning << "\n";
      if (run.error) {
        err << "error: " << *run.error << "\n";
        code = std::max(code, kExitInput);
        const json doc{{"instance_id", run.instance.id}, {"error", *run.error}};
        if (to_dir)
          io::write_atomic(*o.out / (file_safe(run.instance.id) + ".error.json"), doc.dump(2));
        else
          sink << doc.dump() << "\n";
        return;
      }
      for (const SearchResult& r : run.results) {
        if (r.status != SearchStatus::verified)
          code = std::max(code, kExitUnverified);
        const json doc = io::to_json(io::make_doc(r, run.instance, o.trace));
        if (to_dir) {
          std::string name = file_safe(run.instance.id);
          if (paradigms.size() > 1)
            name += "." + std::string(to_string(r.explanation.paradigm));
          io::write_atomic(*o.out / (name + ".json"), doc.dump(2) + "\n");
        } else {
          sink << doc.dump() << "\n";
        }
      }
    });
    if (file.is_open()) {
      file.close();
      fs::rename(tmp, *o.out);
    }
    return code;
  });
}

// ---------------------------------------------------------------------------
// explanation documents as input

/// One JSON object, a JSON array of objects, or newline-delimited objects.
inline std::vector<json> read_documents(const fs::path& path)
{
  const std::string text = io::detail::slurp(path);
  try {
    json doc = json::parse(text);
    if (doc.is_array())
      return {doc.begin(), doc.end()};
    return {std::move(doc)};
  } catch (const json::parse_error&) {
  }
  std::vector<json> docs;
  std::istringstream lines(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    docs.push_back(io::detail::parse_text(line, path.string() + " line " + std::to_string(n)));
  }
  return docs;
}

/// Instances of `dataset` whose id is in `ids`.
inline std::map<std::string, LatentInstance> instances_by_id(const fs::path& dataset,
                                                             const std::set<std::string>& ids)
{
  std::map<std::string, LatentInstance> found;
  io::DatasetReader reader(dataset);
  while (auto z = reader.next())
    if (ids.count(z->id) && !found.count(z->id))
      found.emplace(z->id, std::move(*z));
  return found;
}

/// Bounds and predicted class of a document, recomputed from its instance when available.
struct Resolved
{
  io::ExplanationDoc doc;
  ActivationBounds bounds;
  std::size_t predicted = 0;
  std::optional<Anchor> anchor;
};

inline Resolved resolve(const json& raw, const ModelBundle& bundle,
                        const std::map<std::string, LatentInstance>* instances, double slack)
{
  Resolved r;
  r.doc = io::explanation_from_json(raw);
  const Explanation& e = r.doc.explanation;
  const std::size_t m = bundle.num_prototypes();
  if (instances) {
    auto it = instances->find(e.instance_id);
    if (it == instances->end())
      throw ValidationError("explanation refers to instance '" + e.instance_id +
                            "', which the dataset does not contain");
    validate(it->second, bundle);
    r.anchor = make_anchor(it->second, bundle);
    validate(e, r.anchor->num_components(), m);
    r.predicted = r.anchor->predicted;
    if (r.doc.predicted_class && *r.doc.predicted_class != r.predicted)
      throw ValidationError("explanation for '" + e.instance_id + "' claims class " +
                            std::to_string(*r.doc.predicted_class) + " but the model predicts " +
                            std::to_string(r.predicted) + " (stale document?)");
    r.bounds = derive_bounds(e, *r.anchor, bundle, slack);
    return r;
  }
  if (!r.doc.bounds)
    throw ValidationError("explanation for '" + e.instance_id +
                          "' embeds no bounds; pass --dataset to recompute them");
  if (!r.doc.predicted_class)
    throw ValidationError("explanation for '" + e.instance_id + "' lacks predicted_class");
  validate(e, std::numeric_limits<std::size_t>::max(), m);
  if (r.doc.bounds->size() != m)
    throw DimensionError("embedded bounds have " + std::to_string(r.doc.bounds->size()) +
                         " entries, the bundle has " + std::to_string(m) + " prototypes");
  check_class(*r.doc.predicted_class, bundle);
  r.bounds = *r.doc.bounds;
  r.predicted = *r.doc.predicted_class;
  return r;
}

inline std::set<std::string> referenced_ids(const std::vector<json>& docs)
{
  std::set<std::string> ids;
  for (const auto& d : docs)
    if (d.is_object() && d.contains("instance_id") && d["instance_id"].is_string())
      ids.insert(d["instance_id"].get<std::string>());
  return ids;
}

// ---------------------------------------------------------------------------
// verify

inline int run_verify(const fs::path& bundle_path, const fs::path& explanation_path,
                      const std::optional<fs::path>& dataset_path, const RunOptions& o,
                      std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    const ModelBundle bundle = load_bundle_for(bundle_path, o);
    const auto docs = read_documents(explanation_path);
    std::optional<std::map<std::string, LatentInstance>> instances;
    if (dataset_path)
      instances = instances_by_id(*dataset_path, referenced_ids(docs));
    const double slack = o.slack.value_or(bundle.distance_slack);

    int code = kExitOk;
    for (const json& raw : docs) {
      std::string label = raw.is_object() ? raw.value("instance_id", std::string("?")) : "?";
      try {
        const Resolved r = resolve(raw, bundle, instances ? &*instances : nullptr, slack);
        const VerifyResult v = verify(r.bounds, bundle, r.predicted, o.margin);
        out << label << " " << to_string(r.doc.explanation.paradigm) << " size "
            << r.doc.explanation.size() << " class " << r.predicted << ": "
            << (v.verified ? "verified" : "unverified") << "\n";
        for (const auto& [k, w] : v.witnesses)
          out << "  witness for class " << k << " (gap " << w.logit_gap
              << "): " << oracle::format_vector(w.activations) << "\n";
        if (!v.verified)
          code = std::max(code, kExitUnverified);
      } catch (const ValidationError& e) {
        err << "error: " << label << ": " << e.what() << "\n";
        code = std::max(code, kExitInput);
      }
    }
    return code;
  });
}

// ---------------------------------------------------------------------------
// stats

inline int run_stats(const fs::path& bundle_path, const fs::path& dataset_path,
                     const RunOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    if (!fs::exists(dataset_path))
      throw ValidationError("dataset '" + dataset_path.string() + "' does not exist");
    const ModelBundle bundle = load_bundle_for(bundle_path, o);
    const auto paradigms = o.paradigms.empty()
                               ? std::vector{Paradigm::triangle, Paradigm::hypersphere,
                                             Paradigm::topk}
                               : o.paradigms;
    stats::StatsReport report;
    report.timing = o.timing;
    json names = json::array();
    for (Paradigm p : paradigms) {
      report.paradigms.push_back({});
      report.paradigms.back().paradigm = p;
      names.push_back(std::string(to_string(p)));
    }
    report.config = {
        {"bundle", bundle_path.filename().string()},
        {"dataset", dataset_path.filename().string()},
        {"paradigms", names},
        {"strategy", std::string(to_string(o.strategy))},
        {"init", std::string(to_string(o.init))},
        {"slack", o.slack.value_or(bundle.distance_slack)},
        {"margin", o.margin},
        {"epsilon", bundle.sigma.epsilon},
        {"sample_per_class", o.sample_per_class ? json(*o.sample_per_class) : json(nullptr)},
        {"seed", o.seed},
        {"timeout_per_instance", o.timeout_seconds ? json(*o.timeout_seconds) : json(nullptr)},
        {"max_pairs", o.max_pairs ? json(*o.max_pairs) : json(nullptr)}};

    int code = kExitOk;
    for_each_run(dataset_path, bundle, o, paradigms, [&](InstanceRun& run) {
      if (run.warning)
        err << "warning: " << *run.warning << "\n";
      if (run.error) {
        err << "error: " << *run.error << "\n";
        code = kExitInput;
        return;
      }
      if (report.instances == 0) {
        report.grid_height = run.instance.grid_height;
        report.grid_width = run.instance.grid_width;
      }
      ++report.instances;
      for (std::size_t i = 0; i < run.results.size(); ++i) {
        const SearchResult& r = run.results[i];
        stats::InstanceOutcome oc;
        oc.id = run.instance.id;
        oc.paradigm = r.explanation.paradigm;
        oc.size = r.explanation.size();
        oc.num_components = run.instance.grid_height * run.instance.grid_width;
        oc.predicted = r.predicted;
        oc.label = run.instance.label;
        oc.status = r.status;
        oc.seconds = run.seconds[i];
        stats::add(report.paradigms[i], oc);
      }
    });

    const std::string doc = stats::to_json(report).dump(2) + "\n";
    const std::string table = stats::text_table(report, dataset_path.stem().string());
    if (o.out) {
      io::write_atomic(*o.out, doc);
      out << table;
    } else {
      out << doc;
      err << table;
    }
    return code;
  });
}

// ---------------------------------------------------------------------------
// oracle

struct OracleArgs
{
  std::string kind;  // corners | sample | minimality | containment
  std::optional<fs::path> bundle;
  std::optional<fs::path> explanation;
  std::optional<fs::path> dataset;
  std::size_t samples = 10000;
  std::vector<double> c1, c2;
  double r1 = 0.0, r2 = 0.0;
};

inline void merge(oracle::OracleReport& into, const oracle::OracleReport& part)
{
  into.checked += part.checked;
  into.violations += part.violations;
  if (!into.first_violation && part.first_violation)
    into.first_violation = part.first_violation;
  for (const auto& [k, v] : part.metrics)
    into.metrics[k] = v;
}

/// Relative tolerance for comparing closed-form and enumerated logit gaps.
inline constexpr double kGapTolerance = 1e-9;

inline int run_oracle(const OracleArgs& a, const RunOptions& o, std::ostream& out,
                      std::ostream& err)
{
  return guarded(err, [&] {
    oracle::OracleReport report;
    report.seed = o.seed;
    int fail_code = kExitInternal;

    if (a.kind == "containment") {
      if (a.c1.empty() || a.c2.empty())
        throw ValidationError("containment needs --c1, --r1, --c2 and --r2");
      report = oracle::sphere_containment_oracle(a.c1, a.r1, a.c2, a.r2, a.samples, o.seed);
    } else if (a.kind == "corners" || a.kind == "sample" || a.kind == "minimality") {
      if (!a.bundle || !a.explanation)
        throw ValidationError(a.kind + " needs --bundle and --explanation");
      const ModelBundle bundle = load_bundle_for(*a.bundle, o);
      const auto docs = read_documents(*a.explanation);
      std::optional<std::map<std::string, LatentInstance>> instances;
      if (a.dataset)
        instances = instances_by_id(*a.dataset, referenced_ids(docs));
      if (a.kind == "minimality" && !instances)
        throw ValidationError("minimality needs --dataset to rebuild the instance");
      const double slack = o.slack.value_or(bundle.distance_slack);

      for (std::size_t n = 0; n < docs.size(); ++n) {
        const Resolved r = resolve(docs[n], bundle, instances ? &*instances : nullptr, slack);
        if (a.kind == "corners") {
          const auto corners = oracle::corner_oracle(r.bounds, bundle, r.predicted);
          for (const auto& [k, gap] : corners.max_gap) {
            const auto v = max_favoring(r.bounds, bundle, k, r.predicted);
            const double mine = logit(v, bundle, k) - logit(v, bundle, r.predicted);
            oracle::OracleReport part;
            part.checked = 1;
            if (std::abs(mine - gap) > kGapTolerance * std::max(1.0, std::abs(gap)))
              part.record({r.doc.explanation.instance_id + " class " + std::to_string(k),
                           std::to_string(gap), std::to_string(mine)});
            report.metrics["max_gap_class_" + std::to_string(k)] = gap;
            merge(report, part);
          }
        } else if (a.kind == "sample") {
          const bool verified = verify(r.bounds, bundle, r.predicted, o.margin).verified;
          if (!verified)
            fail_code = kExitUnverified;
          merge(report, oracle::sample_oracle(r.bounds, bundle, r.predicted, a.samples,
                                              o.seed + n));
        } else {
          SearchConfig cfg = search_config(o, r.doc.explanation.paradigm);
          merge(report, oracle::minimality_oracle(r.doc.explanation, *r.anchor, bundle, cfg));
        }
      }
    } else {
      throw ValidationError("unknown oracle '" + a.kind +
                            "' (expected corners, sample, minimality or containment)");
    }

    const std::string doc = io::to_json(report).dump(2) + "\n";
    if (o.out)
      io::write_atomic(*o.out, doc);
    else
      out << doc;
    return report.violations == 0 ? kExitOk : fail_code;
  });
}

// ---------------------------------------------------------------------------
// generate

inline void write_dataset(const fs::path& path, const std::vector<LatentInstance>& zs)
{
  std::string text = "[\n";
  for (std::size_t i = 0; i < zs.size(); ++i)
    text += io::to_json(zs[i]).dump() + (i + 1 < zs.size() ? ",\n" : "\n");
  text += "]\n";
  io::write_atomic(path, text);
}

/// Writes bundle.json and dataset.json for a named synthetic setup into `dir`.
inline int run_generate(const std::string& kind, const fs::path& dir, std::size_t instances,
                        const RunOptions& o, std::ostream& out, std::ostream& err)
{
  return guarded(err, [&] {
    fs::create_directories(dir);
    ModelBundle bundle;
    std::vector<LatentInstance> zs;
    if (kind == "running-example") {
      const double eps = o.epsilon_override.value_or(1e-4);
      bundle = synthetic::running_example_bundle(eps);
      zs.push_back(synthetic::running_example_instance(eps));
    } else if (kind == "corpus" || kind == "well-separated") {
      auto shape = kind == "corpus" ? synthetic::CorpusShape{} : synthetic::well_separated_shape();
      if (instances)
        shape.instances = instances;
      std::mt19937_64 rng(o.seed);
      bundle = synthetic::corpus_bundle(rng, shape);
      zs = synthetic::corpus(bundle, shape, o.seed);
    } else {
      throw ValidationError("unknown generator '" + kind +
                            "' (expected running-example, corpus or well-separated)");
    }
    io::write_atomic(dir / "bundle.json", io::to_json(bundle).dump(2) + "\n");
    write_dataset(dir / "dataset.json", zs);
    out << "wrote " << (dir / "bundle.json").string() << " and " << (dir / "dataset.json").string()
        << " (" << zs.size() << " instances)\n";
    return kExitOk;
  });
}

} // namespace ale::cli
