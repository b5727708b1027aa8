// feet: command-line front end for the evaluation harness.
//
//   feet validate <manifest>
//   feet run --manifest m.json --out runs/x [--parallelism N] [--resume]
//   feet report --run runs/x --format markdown|latex|csv|json [--delta]
//   feet metrics --predictions p.json --metric f1 [--boot 1000] [--seed S]
//   feet synth --kind trend|degradation --out dir [--seed S]
//
// Exit codes: 0 success, 1 cell failures or runtime errors, 2 validation or
// usage errors. FEET_SEED overrides the manifest master_seed.

#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "feet/runner.hpp"
#include "feet/synthetic.hpp"

namespace {

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw feet::Error(feet::ErrorCode::InvalidArgument, std::string(name) + " must be an unsigned integer");
  }
}

void print_findings(const std::vector<feet::Finding>& findings) {
  for (const auto& f : findings)
    std::cerr << (f.severity == feet::Severity::Error ? "error: " : "warning: ") << f.message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frozen/few-shot/fine-tuned embedding evaluation"};
  app.require_subcommand(1);

  std::string manifest_path, out_dir, run_dir, format = "markdown", predictions_path, metric = "accuracy";
  std::string averaging = "weighted", kind = "trend";
  std::size_t parallelism = 0, boot = 1000;
  std::optional<std::size_t> stop_after;
  std::uint32_t pos_class = 1;
  std::optional<std::uint64_t> seed;
  bool resume = false, delta = false;

  auto* validate = app.add_subcommand("validate", "Check a manifest against its embedding files");
  validate->add_option("manifest", manifest_path, "Manifest JSON")->required();

  auto* run = app.add_subcommand("run", "Execute (or resume) a run");
  run->add_option("--manifest", manifest_path, "Manifest JSON")->required();
  run->add_option("--out", out_dir, "Run directory")->required();
  run->add_option("--parallelism", parallelism, "Worker threads (default FEET_THREADS or hardware)");
  run->add_flag("--resume", resume, "Continue an interrupted run in --out");
  run->add_option("--stop-after", stop_after, "Stop after N cells")->group("");

  auto* report = app.add_subcommand("report", "Render tables from a finished run");
  report->add_option("--run", run_dir, "Run directory")->required();
  report->add_option("--format", format, "markdown|latex|csv|json");
  report->add_flag("--delta", delta, "Delta tables instead of FEET tables");

  auto* metrics = app.add_subcommand("metrics", "Score one predictions file with a bootstrap CI");
  metrics->add_option("--predictions", predictions_path, "Predictions JSON")->required();
  metrics->add_option("--metric", metric, "accuracy|precision|recall|f1|auroc|auprc");
  metrics->add_option("--boot", boot, "Bootstrap replicates");
  metrics->add_option("--seed", seed, "Bootstrap seed (default FEET_SEED or 0)");
  metrics->add_option("--averaging", averaging, "weighted|macro|micro|binary");
  metrics->add_option("--pos-class", pos_class, "Positive class for binary averaging and rank metrics");

  auto* synth = app.add_subcommand("synth", "Write a synthetic fixture with its manifest");
  synth->add_option("--kind", kind, "trend|degradation");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Generator seed (default FEET_SEED or 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const auto findings = feet::validate_manifest(feet::load_manifest(manifest_path));
      print_findings(findings);
      if (findings.empty()) std::cout << "ok\n";
      return feet::has_errors(findings) ? 2 : 0;
    }
    if (*run) {
      auto manifest = feet::load_manifest(manifest_path);
      if (const auto s = env_u64("FEET_SEED")) manifest.master_seed = *s;
      feet::RunOptions opts;
      opts.parallelism = parallelism;
      if (opts.parallelism == 0) opts.parallelism = env_u64("FEET_THREADS").value_or(std::thread::hardware_concurrency());
      opts.parallelism = std::max<std::size_t>(1, opts.parallelism);
      opts.resume = resume;
      opts.stop_after = stop_after;
      const auto state = feet::execute_run(manifest, out_dir, opts);
      print_findings(state.validation);
      if (state.refused) {
        std::cerr << "run refused: manifest has validation errors\n";
        return 2;
      }
      for (const auto& c : state.cells)
        if (c.status == feet::CellStatus::Failed) std::cerr << "cell failed: " << c.key << ": " << c.error << "\n";
      std::cout << state.count(feet::CellStatus::Done) << "/" << state.cells.size() << " cells done"
                << (state.interrupted ? " (interrupted)" : "") << "\n";
      return state.interrupted || state.count(feet::CellStatus::Failed) ? 1 : 0;
    }
    if (*report) {
      std::cout << feet::render_run(run_dir, feet::parse_format(format), delta);
      return 0;
    }
    if (*metrics) {
      const auto preds = feet::load_predictions(predictions_path);
      const feet::MetricSpec spec{feet::parse_metric(metric), feet::parse_averaging(averaging), pos_class};
      const feet::BootstrapConfig cfg{boot, seed ? *seed : env_u64("FEET_SEED").value_or(0)};
      const auto est = feet::bootstrap_ci(preds, spec, cfg);
      std::cout << feet::to_json(est).dump(2) << "\n";
      return 0;
    }
    if (*synth) {
      const std::uint64_t s = seed ? *seed : env_u64("FEET_SEED").value_or(0);
      std::filesystem::path path;
      if (kind == "trend") path = feet::synthetic::write_trend_fixture(out_dir, s);
      else if (kind == "degradation") path = feet::synthetic::write_degradation_fixture(out_dir, s);
      else {
        std::cerr << "--kind must be trend or degradation\n";
        return 2;
      }
      std::cout << path.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
