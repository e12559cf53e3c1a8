#include "relrank/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "relrank/error.hpp"
#include "relrank/experiment.hpp"
#include "relrank/run_io.hpp"
#include "relrank/service.hpp"

namespace relrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out_dir = "out";
};

io::RunConfig resolve_config(const GlobalOptions& g) {
  io::RunConfig config = g.config ? io::load_config(*g.config) : io::RunConfig{};
  if (g.seed) config.reseed(*g.seed);
  return config;
}

std::vector<double> parse_proportions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--proportions: '" + item + "' is not a number");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string fmt(double v) { return fmt_opt(v); }

/// A finished run reloaded from its directory.
struct FinishedRun {
  io::RunConfig config;
  experiment::Prepared prepared;
  nn::NetworkParams params;
  std::vector<SampleId> selected;
  std::size_t relative_labels = 0;
  std::size_t absolute_labels = 0;
};

FinishedRun load_run(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw ValidationError("run directory not found: " + run_dir.string());
  FinishedRun run;
  run.config = io::load_config(run_dir / "config.json");
  run.prepared = experiment::prepare(run.config);
  const auto snapshot = io::last_params_snapshot(run_dir);
  if (!snapshot) throw ValidationError("no parameter snapshot in " + run_dir.string());
  run.params = io::load_params(*snapshot);
  for (const auto& row : io::read_selections_csv(run_dir / "selections.csv")) {
    const auto id = run.prepared.dataset.find(row.id);
    if (!id) throw ValidationError("selections.csv names unknown sample '" + row.id + "'");
    run.selected.push_back(*id);
  }
  const auto pairs = io::read_pairs_csv(run_dir / "pairs.csv");
  run.relative_labels = pairs.size();
  if (run.config.train.multitask) {
    std::unordered_set<std::string> unique;
    for (const auto& p : pairs) {
      unique.insert(p.first);
      unique.insert(p.second);
    }
    run.absolute_labels = unique.size();
  }
  return run;
}

int cmd_synth(const GlobalOptions& g, std::optional<std::size_t> n, const std::string& proportions,
              std::optional<std::size_t> dim, std::optional<double> noise, std::optional<fs::path> output) {
  io::RunConfig config = resolve_config(g);
  data::SynthConfig synth = config.synth;
  if (n) synth.n = *n;
  if (!proportions.empty()) {
    synth.class_proportions = parse_proportions(proportions);
    synth.num_classes = static_cast<int>(synth.class_proportions.size());
  }
  if (dim) {
    synth.feature_dim = *dim;
    synth.informative_dims = std::min(synth.informative_dims, synth.feature_dim);
  }
  if (noise) synth.noise_scale = *noise;
  const fs::path path = output ? *output : g.out_dir / "dataset.jsonl";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  data::save_dataset(data::synth_generate(synth), path);
  spdlog::info("wrote {} samples to {}", synth.n, path.string());
  return 0;
}

int cmd_run(const GlobalOptions& g, const std::string& sampler) {
  io::RunConfig config = resolve_config(g);
  if (!sampler.empty()) config.loop.sampler = active::sampler_from_string(sampler);
  const experiment::Prepared prepared = experiment::prepare(config);
  const experiment::RunResult result = experiment::run_simulated(prepared, config, g.out_dir);
  std::cout << "run finished: " << result.state.labeled.size() << " labeled pairs over "
            << result.state.metrics_by_round.size() << " training rounds\n"
            << "overall test pair accuracy: " << fmt_opt(result.final_accuracy.overall) << '\n'
            << "mean neighboring accuracy: " << fmt_opt(result.final_accuracy.mean_neighboring) << '\n'
            << "run directory: " << g.out_dir.string() << '\n';
  return 0;
}

int cmd_serve(const GlobalOptions& g, std::optional<int> port, const std::string& host,
              std::optional<fs::path> ui_dir, const std::string& run_id) {
  io::RunConfig config = resolve_config(g);
  if (port) config.port = *port;
  if (ui_dir) config.ui_dir = *ui_dir;
  if (!run_id.empty()) config.run_id = run_id;
  return service::serve(config, g.out_dir, host);
}

eval::MetricReport report_for(const FinishedRun& run) {
  return experiment::evaluate(run.params, run.prepared, run.config, run.selected, run.relative_labels,
                              run.absolute_labels);
}

int cmd_eval(const fs::path& run_dir) {
  const FinishedRun run = load_run(run_dir);
  const eval::MetricReport report = report_for(run);
  write_text(run_dir / "metrics.json", eval::to_json(report).dump(2) + "\n");
  write_text(run_dir / "metrics.csv", eval::to_csv(report));
  std::cout << "wrote " << (run_dir / "metrics.json").string() << " and " << (run_dir / "metrics.csv").string()
            << '\n';
  return 0;
}

void print_accuracy_table(std::ostream& out, const eval::MetricReport& r) {
  out << "Ranking accuracy on test pairs\n";
  out << "  pair set            accuracy\n";
  out << "  overall             " << fmt_opt(r.overall_accuracy) << '\n';
  for (const auto& [name, acc] : r.neighboring_accuracies) {
    std::string label = name;
    label.resize(20, ' ');
    out << "  " << label << fmt(acc) << '\n';
  }
  out << "  mean neighboring    " << fmt_opt(r.mean_neighboring) << "\n\n";
}

void print_cost_table(std::ostream& out, const eval::MetricReport& r) {
  out << "Annotation cost\n";
  out << "  relative labels  absolute labels  seconds\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "  %15lld  %15lld  %7lld\n", static_cast<long long>(r.relative_labels),
                static_cast<long long>(r.absolute_labels), static_cast<long long>(r.cost_seconds));
  out << buf << '\n';
}

void print_classification_table(std::ostream& out, const eval::MetricReport& r) {
  if (!r.classification) return;
  const auto& c = *r.classification;
  out << "Quantized classification on the test split\n";
  out << "  class  precision  recall  f1      support\n";
  char buf[96];
  for (const auto& s : c.per_class) {
    std::snprintf(buf, sizeof buf, "  %5d  %9.4f  %6.4f  %6.4f  %7zu\n", s.label, s.precision, s.recall, s.f1,
                  s.support);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "  macro  %9.4f  %6.4f  %6.4f\n", c.macro_precision, c.macro_recall, c.macro_f1);
  out << buf;
  for (const auto& w : c.warnings) out << "  note: " << w << '\n';
  out << '\n';
}

void print_selection_table(std::ostream& out, const eval::MetricReport& r) {
  if (r.class_proportions.empty()) return;
  std::size_t total = 0;
  for (auto c : r.class_proportions) total += c;
  out << "Selected samples by class\n";
  out << "  class  count  share\n";
  char buf[64];
  for (std::size_t k = 0; k < r.class_proportions.size(); ++k) {
    const double share = total ? static_cast<double>(r.class_proportions[k]) / static_cast<double>(total) : 0.0;
    std::snprintf(buf, sizeof buf, "  %5zu  %5zu  %.4f\n", k, r.class_proportions[k], share);
    out << buf;
  }
  out << '\n';
}

int cmd_report(const fs::path& run_dir) {
  const FinishedRun run = load_run(run_dir);
  const eval::MetricReport report = report_for(run);
  print_accuracy_table(std::cout, report);
  print_classification_table(std::cout, report);
  print_cost_table(std::cout, report);
  print_selection_table(std::cout, report);

  const std::uint64_t base =
      derive_seed(run.config.seed, {static_cast<std::uint64_t>(Stream::posterior), 0x9057});
  const auto posteriors = bayes::predict_posteriors(run.params, run.prepared.dataset, run.prepared.split.train,
                                                    run.config.loop.draws, base);
  std::ostringstream csv;
  csv << "id,mean,variance\n";
  char buf[64];
  for (const auto& p : posteriors) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", p.mean, p.variance);
    csv << run.prepared.dataset[p.id].name << ',' << buf << '\n';
  }
  write_text(run_dir / "posteriors.csv", csv.str());
  std::cout << "posterior dump: " << (run_dir / "posteriors.csv").string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"relrank: active learning to rank from relative labels"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::string config_path;
  std::uint64_t seed = 0;
  auto* config_opt = app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--out-dir", g.out_dir, "output directory (run directory for run/serve)");
  for (auto* opt : {config_opt, seed_opt}) opt->configurable(false);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset (JSONL)");
  std::optional<std::size_t> n, dim;
  std::optional<double> noise;
  std::optional<fs::path> output;
  std::string proportions;
  synth->add_option("--n", n, "number of samples");
  synth->add_option("--proportions", proportions, "comma-separated class proportions");
  synth->add_option("--feature-dim", dim, "feature dimension");
  synth->add_option("--noise", noise, "noise scale of informative coordinates");
  synth->add_option("--output", output, "output file (default <out-dir>/dataset.jsonl)");

  auto* run = app.add_subcommand("run", "run the loop against the simulated oracle");
  std::string sampler;
  run->add_option("--sampler", sampler, "ubs, random or coreset");

  auto* serve = app.add_subcommand("serve", "serve the loop to a human annotator over HTTP");
  std::optional<int> port;
  std::string host = "127.0.0.1";
  std::optional<fs::path> ui_dir;
  std::string run_id;
  serve->add_option("--port", port, "listen port");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--ui-dir", ui_dir, "static UI bundle to serve at /");
  serve->add_option("--run-id", run_id, "run identifier in the URL");

  auto* eval_cmd = app.add_subcommand("eval", "compute metrics for a finished run");
  fs::path eval_dir;
  eval_cmd->add_option("--run-dir", eval_dir, "run directory")->required();

  auto* report = app.add_subcommand("report", "print result tables and dump posteriors");
  fs::path report_dir;
  report->add_option("--run-dir", report_dir, "run directory")->required();

  for (auto* sub : {synth, run, serve, eval_cmd, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (!config_path.empty()) g.config = config_path;
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*synth) return cmd_synth(g, n, proportions, dim, noise, output);
    if (*run) return cmd_run(g, sampler);
    if (*serve) return cmd_serve(g, port, host, ui_dir, run_id);
    if (*eval_cmd) return cmd_eval(eval_dir);
    if (*report) return cmd_report(report_dir);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const RuntimeFailure& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}

}  // namespace relrank
