// ale: explain, verify and measure abductive latent explanations of prototype classifiers.

#include <ale/commands.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct RawFlags
{
  std::string paradigm;
  std::string strategy = "nearest";
  std::string init = "empty";
  std::string timeout;
  std::optional<double> slack;
  double margin = 0.0;
  std::optional<double> epsilon;
  std::optional<std::size_t> sample_per_class;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::optional<std::size_t> max_pairs;
  std::string out;
  bool trace = false;
  bool no_timing = false;
};

void add_common(CLI::App* app, RawFlags& f)
{
  app->add_option("--paradigm", f.paradigm,
                  "topk, triangle, hypersphere, a comma-separated list, or all");
  app->add_option("--strategy", f.strategy, "pair order: nearest or round-robin");
  app->add_option("--init", f.init, "initial pairs: empty or nearest-per-component");
  app->add_option("--slack", f.slack, "distance slack (default: the bundle's distance_slack)");
  app->add_option("--margin", f.margin, "logit margin the predicted class must keep");
  app->add_option("--epsilon-override", f.epsilon, "replace the bundle's sigma epsilon");
  app->add_option("--sample-per-class", f.sample_per_class,
                  "explain k seeded random instances per label");
  app->add_option("--seed", f.seed, "seed for sampling and oracles");
  app->add_option("--jobs", f.jobs, "instances processed in parallel")->check(CLI::PositiveNumber);
  app->add_option("--timeout-per-instance", f.timeout, "wall-clock cap per run, e.g. 10s, 500ms");
  app->add_option("--max-pairs", f.max_pairs, "stop the forward pass at this many pairs");
  app->add_option("--out", f.out, "output file, or directory for one document per instance");
  app->add_flag("--trace", f.trace, "include the search trace in explanation documents");
  app->add_flag("--no-timing", f.no_timing, "leave wall times out of the stats report");
}

ale::cli::RunOptions to_options(const RawFlags& f)
{
  ale::cli::RunOptions o;
  if (!f.paradigm.empty())
    o.paradigms = ale::cli::parse_paradigms(f.paradigm);
  o.strategy = ale::parse_pair_strategy(f.strategy);
  o.init = ale::parse_init_strategy(f.init);
  o.slack = f.slack;
  o.margin = f.margin;
  o.epsilon_override = f.epsilon;
  o.sample_per_class = f.sample_per_class;
  o.seed = f.seed;
  o.jobs = f.jobs;
  if (!f.timeout.empty())
    o.timeout_seconds = ale::cli::parse_duration(f.timeout);
  o.max_pairs = f.max_pairs;
  if (!f.out.empty())
    o.out = f.out;
  o.trace = f.trace;
  o.timing = !f.no_timing;
  return o;
}

std::vector<double> parse_point(const std::string& text)
{
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    v.push_back(std::stod(item));
  return v;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Abductive latent explanations for prototype classifiers"};
  app.require_subcommand(1);
  RawFlags flags;
  std::string bundle, dataset, explanation, oracle_kind, c1, c2, generate_kind;
  std::optional<std::string> dataset_opt, bundle_opt, explanation_opt;
  std::size_t samples = 10000, instances = 0;
  double r1 = 0.0, r2 = 0.0;

  auto* explain = app.add_subcommand("explain", "explain every instance of a dataset");
  explain->add_option("bundle", bundle, "bundle document")->required();
  explain->add_option("dataset", dataset, "dataset (JSON array or one object per line)")->required();
  add_common(explain, flags);

  auto* verify = app.add_subcommand("verify", "re-derive bounds of explanations and verify them");
  verify->add_option("bundle", bundle, "bundle document")->required();
  verify->add_option("explanation", explanation, "explanation document(s)")->required();
  verify->add_option("--dataset", dataset_opt, "dataset holding the referenced instances");
  add_common(verify, flags);

  auto* stats = app.add_subcommand("stats", "average explanation sizes over a dataset");
  stats->add_option("bundle", bundle, "bundle document")->required();
  stats->add_option("dataset", dataset, "dataset")->required();
  add_common(stats, flags);

  auto* oracle = app.add_subcommand("oracle", "brute-force checks of the engine");
  oracle->add_option("kind", oracle_kind, "corners, sample, minimality or containment")->required();
  oracle->add_option("--bundle", bundle_opt, "bundle document");
  oracle->add_option("--explanation", explanation_opt, "explanation document(s)");
  oracle->add_option("--dataset", dataset_opt, "dataset holding the referenced instances");
  oracle->add_option("-n,--samples", samples, "samples per check");
  oracle->add_option("--c1", c1, "first center, comma separated");
  oracle->add_option("--r1", r1, "first radius");
  oracle->add_option("--c2", c2, "second center, comma separated");
  oracle->add_option("--r2", r2, "second radius");
  add_common(oracle, flags);

  auto* generate = app.add_subcommand("generate", "write a synthetic bundle and dataset");
  generate->add_option("kind", generate_kind, "running-example, corpus or well-separated")
      ->required();
  generate->add_option("--instances", instances, "number of instances (corpora only)");
  add_common(generate, flags);

  CLI11_PARSE(app, argc, argv);

  ale::cli::RunOptions o;
  try {
    o = to_options(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ale::cli::kExitInput;
  }

  if (*explain)
    return ale::cli::run_explain(bundle, dataset, o, std::cout, std::cerr);
  if (*verify) {
    std::optional<std::filesystem::path> ds;
    if (dataset_opt)
      ds = *dataset_opt;
    return ale::cli::run_verify(bundle, explanation, ds, o, std::cout, std::cerr);
  }
  if (*stats)
    return ale::cli::run_stats(bundle, dataset, o, std::cout, std::cerr);
  if (*oracle) {
    ale::cli::OracleArgs a;
    a.kind = oracle_kind;
    if (bundle_opt)
      a.bundle = *bundle_opt;
    if (explanation_opt)
      a.explanation = *explanation_opt;
    if (dataset_opt)
      a.dataset = *dataset_opt;
    a.samples = samples;
    try {
      if (!c1.empty())
        a.c1 = parse_point(c1);
      if (!c2.empty())
        a.c2 = parse_point(c2);
    } catch (const std::exception&) {
      std::cerr << "error: centers must be comma-separated numbers\n";
      return ale::cli::kExitInput;
    }
    a.r1 = r1;
    a.r2 = r2;
    return ale::cli::run_oracle(a, o, std::cout, std::cerr);
  }
  if (!o.out) {
    std::cerr << "error: generate needs --out DIR\n";
    return ale::cli::kExitInput;
  }
  return ale::cli::run_generate(generate_kind, *o.out, instances, o, std::cout, std::cerr);
}
