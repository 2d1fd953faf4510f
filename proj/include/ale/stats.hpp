#pragma once

// Batch statistics: average explanation sizes split by correct / incorrect predictions.

#include <ale/bounds.hpp>
#include <ale/error.hpp>
#include <ale/search.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ale::stats {

using json = nlohmann::json;

/// What one explanation run contributes to the report.
struct InstanceOutcome
{
  std::string id;
  Paradigm paradigm = Paradigm::topk;
  std::size_t size = 0;
  std::size_t num_components = 1;
  std::size_t predicted = 0;
  std::optional<std::size_t> label;
  SearchStatus status = SearchStatus::verified;
  double seconds = 0.0;
};

struct SizeAverage
{
  std::size_t count = 0;
  double sum = 0.0;

  void add(double v)
  {
    ++count;
    sum += v;
  }
  std::optional<double> mean() const
  {
    if (count == 0)
      return std::nullopt;
    return sum / double(count);
  }
};

struct ParadigmStats
{
  Paradigm paradigm = Paradigm::topk;
  SizeAverage total, correct, incorrect, unlabeled;
  SizeAverage adjusted_total, adjusted_correct, adjusted_incorrect;  // size x L
  std::size_t timeouts = 0;
  std::size_t unverified = 0;  // cap or exhaustion
  std::vector<double> seconds;
};

struct StatsReport
{
  json config = json::object();
  std::size_t instances = 0;
  std::size_t grid_height = 0;
  std::size_t grid_width = 0;
  bool timing = true;
  std::vector<ParadigmStats> paradigms;
};

/// Timed-out runs are counted but their (partial) sizes stay out of the averages; a run that
/// stopped unverified still has a well-defined size and is averaged.
inline void add(ParadigmStats& s, const InstanceOutcome& o)
{
  s.seconds.push_back(o.seconds);
  if (o.status == SearchStatus::timeout) {
    ++s.timeouts;
    return;
  }
  if (o.status != SearchStatus::verified)
    ++s.unverified;
  const double size = double(o.size);
  const double adjusted = size * double(o.num_components);
  s.total.add(size);
  s.adjusted_total.add(adjusted);
  if (!o.label) {
    s.unlabeled.add(size);
  } else if (*o.label == o.predicted) {
    s.correct.add(size);
    s.adjusted_correct.add(adjusted);
  } else {
    s.incorrect.add(size);
    s.adjusted_incorrect.add(adjusted);
  }
}

inline double percentile(std::vector<double> v, double q)
{
  if (v.empty())
    return 0.0;
  std::sort(v.begin(), v.end());
  const double rank = q * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return v[lo] + (rank - double(lo)) * (v[hi] - v[lo]);
}

inline json mean_or_null(const SizeAverage& a)
{
  if (auto m = a.mean())
    return *m;
  return nullptr;
}

inline json to_json(const ParadigmStats& s, bool timing)
{
  json doc{{"paradigm", std::string(to_string(s.paradigm))},
           {"count_total", s.total.count},
           {"count_correct", s.correct.count},
           {"count_incorrect", s.incorrect.count},
           {"count_unlabeled", s.unlabeled.count},
           {"avg_total_size", mean_or_null(s.total)},
           {"avg_correct_size", mean_or_null(s.correct)},
           {"avg_incorrect_size", mean_or_null(s.incorrect)},
           {"avg_unlabeled_size", mean_or_null(s.unlabeled)},
           {"timeouts", s.timeouts},
           {"unverified", s.unverified}};
  if (s.paradigm == Paradigm::topk)
    doc["adjusted"] = {{"avg_total_size", mean_or_null(s.adjusted_total)},
                       {"avg_correct_size", mean_or_null(s.adjusted_correct)},
                       {"avg_incorrect_size", mean_or_null(s.adjusted_incorrect)}};
  if (timing) {
    double mean = 0.0;
    for (double t : s.seconds)
      mean += t;
    if (!s.seconds.empty())
      mean /= double(s.seconds.size());
    doc["wall_time"] = {{"mean", mean}, {"p95", percentile(s.seconds, 0.95)}};
  }
  return doc;
}

inline json to_json(const StatsReport& r)
{
  json list = json::array();
  for (const auto& s : r.paradigms)
    list.push_back(to_json(s, r.timing));
  std::size_t labeled = 0, correct = 0;
  if (!r.paradigms.empty()) {
    correct = r.paradigms.front().correct.count;
    labeled = correct + r.paradigms.front().incorrect.count;
  }
  json doc{{"config", r.config},
           {"instances", r.instances},
           {"grid", {r.grid_height, r.grid_width}},
           {"paradigms", std::move(list)}};
  doc["accuracy"] = labeled ? json(double(correct) / double(labeled)) : json(nullptr);
  return doc;
}

// ---------------------------------------------------------------------------
// schema and invariant checks on a serialized report

/// Returns the list of problems; empty when the report is well formed.
inline std::vector<std::string> check_report(const json& doc, double tol = 1e-9)
{
  std::vector<std::string> problems;
  auto need = [&](const json& obj, const char* key, const std::string& where) -> bool {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(where + " lacks '" + key + "'");
      return false;
    }
    return true;
  };
  need(doc, "config", "report");
  need(doc, "instances", "report");
  if (!need(doc, "paradigms", "report") || !doc["paradigms"].is_array())
    return problems;
  for (const auto& p : doc["paradigms"]) {
    const std::string where = "paradigm " + p.value("paradigm", std::string("?"));
    bool ok = true;
    for (const char* key : {"paradigm", "count_total", "count_correct", "count_incorrect",
                            "count_unlabeled", "avg_total_size", "avg_correct_size",
                            "avg_incorrect_size", "avg_unlabeled_size", "timeouts"})
      ok = need(p, key, where) && ok;
    if (!ok)
      continue;
    if (p["paradigm"] == "topk" && !need(p, "adjusted", where))
      continue;
    const auto n = [&](const char* key) { return p[key].get<double>(); };
    const auto avg = [&](const char* key) { return p[key].is_null() ? 0.0 : p[key].get<double>(); };
    if (n("count_total") != n("count_correct") + n("count_incorrect") + n("count_unlabeled"))
      problems.push_back(where + ": counts do not add up");
    if (n("count_total") > 0) {
      const double weighted = avg("avg_correct_size") * n("count_correct") +
                              avg("avg_incorrect_size") * n("count_incorrect") +
                              avg("avg_unlabeled_size") * n("count_unlabeled");
      const double expect = avg("avg_total_size") * n("count_total");
      if (std::abs(weighted - expect) > tol * std::max(1.0, std::abs(expect)))
        problems.push_back(where + ": avg_total_size is not the weighted mean of its parts");
    }
    for (const char* key : {"count_correct", "count_incorrect", "count_unlabeled"}) {
      const std::string base = std::string(key).substr(6);
      const std::string avg_key = "avg_" + base + "_size";
      if ((n(key) == 0) != p[avg_key].is_null())
        problems.push_back(where + ": " + avg_key + " must be null exactly when " + key + " is 0");
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// aligned text table: Total / Correct / Incorrect per paradigm plus adjusted top-k

inline std::string cell(const ParadigmStats* s, bool adjusted = false)
{
  if (s == nullptr)
    return "";
  auto fmt = [](const SizeAverage& a) {
    auto m = a.mean();
    if (!m)
      return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *m);
    return std::string(buf);
  };
  if (adjusted)
    return fmt(s->adjusted_total) + " / " + fmt(s->adjusted_correct) + " / " +
           fmt(s->adjusted_incorrect);
  return fmt(s->total) + " / " + fmt(s->correct) + " / " + fmt(s->incorrect);
}

inline std::string text_table(const StatsReport& r, const std::string& dataset_name)
{
  const ParadigmStats* by[3] = {nullptr, nullptr, nullptr};
  for (const auto& s : r.paradigms)
    by[static_cast<int>(s.paradigm)] = &s;
  const ParadigmStats* any = r.paradigms.empty() ? nullptr : &r.paradigms.front();
  std::string accuracy = "-";
  if (any && any->correct.count + any->incorrect.count > 0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f",
                  double(any->correct.count) / double(any->correct.count + any->incorrect.count));
    accuracy = buf;
  }
  const std::vector<std::string> head = {"Dataset", "Accuracy", "Triangle", "Hypersphere",
                                         "top-k", "H1xW1", "top-k (adj.)"};
  const std::vector<std::string> row = {
      dataset_name,
      accuracy,
      cell(by[static_cast<int>(Paradigm::triangle)]),
      cell(by[static_cast<int>(Paradigm::hypersphere)]),
      cell(by[static_cast<int>(Paradigm::topk)]),
      std::to_string(r.grid_height) + "x" + std::to_string(r.grid_width),
      cell(by[static_cast<int>(Paradigm::topk)], true)};
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i)
    width[i] = std::max(head[i].size(), row[i].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += (i ? " | " : "") + cells[i] + std::string(width[i] - cells[i].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ')
      out.pop_back();
    return out + "\n";
  };
  std::string sep;
  for (std::size_t i = 0; i < width.size(); ++i)
    sep += (i ? "-+-" : "") + std::string(width[i], '-');
  std::ostringstream os;
  os << line(head) << sep << "\n";
  os << line(row);
  os << "sizes: Avg Total / Avg Correct / Avg Incorrect\n";
  std::size_t timeouts = 0;
  for (const auto& s : r.paradigms)
    timeouts += s.timeouts;
  if (timeouts)
    os << "timeouts: " << timeouts << "\n";
  return os.str();
}

} // namespace ale::stats
