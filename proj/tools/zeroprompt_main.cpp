#include "zeroprompt/config.hpp"
#include "zeroprompt/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

namespace {

using namespace zeroprompt;

int cmd_run(const std::string& config_path, const std::string& mode_str, int tasks,
            const std::string& out_dir) {
  HarnessConfig cfg = load_config(config_path);
  if (!mode_str.empty()) {
    const auto mode = parse_mode(mode_str);
    if (!mode.has_value()) {
      std::cerr << "unknown mode: " << mode_str << "\n";
      return 2;
    }
    cfg.mode = *mode;
  }
  const SuiteSummary s = run_suite(cfg, tasks, std::filesystem::path(out_dir));
  std::cout << "mode=" << s.mode << " tasks=" << s.num_tasks << " asr_" << s.asr_n << "="
            << s.asr_rate_n << " asr_1=" << s.asr_rate_1
            << " mean_opt_queries=" << s.mean_opt_queries
            << " mean_final_loss=" << s.mean_final_loss << "\n";
  std::cout << "wrote " << out_dir << "/records.jsonl, summary.csv, meta.json\n";
  return 0;
}

int cmd_calibrate(const std::string& config_path, int samples) {
  HarnessConfig cfg = load_config(config_path);
  const CalibrationReport r = calibrate(cfg, samples);
  save_config(cfg, config_path);
  std::cout << "checker_threshold=" << r.checker_threshold
            << " (random two-gate pass rate " << r.random_pass_rate << ")\n"
            << "retention_threshold=" << r.retention_threshold
            << " (same-prompt retention p05 " << r.same_prompt_retention_q05 << ")\n"
            << "updated " << config_path << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir) {
  std::ifstream f(std::filesystem::path(in_dir) / "records.jsonl");
  if (!f) {
    std::cerr << "cannot open " << in_dir << "/records.jsonl\n";
    return 2;
  }
  struct Agg {
    int tasks = 0, wins_any = 0, wins_first = 0, errors = 0;
    double queries = 0, loss = 0;
  };
  std::map<std::string, Agg> by_mode;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Agg& a = by_mode[j.value("mode", std::string("?"))];
    a.tasks += 1;
    a.wins_any += j.value("success", false) ? 1 : 0;
    a.wins_first += j.at("asr").value("success_first", false) ? 1 : 0;
    a.errors += j.value("error", std::string()).empty() ? 0 : 1;
    a.queries += j.value("opt_queries", 0.0);
    a.loss += j.value("final_loss", 0.0);
  }
  std::cout << std::left << std::setw(16) << "mode" << std::right << std::setw(8)
            << "tasks" << std::setw(10) << "asr_any" << std::setw(10) << "asr_1"
            << std::setw(14) << "mean_queries" << std::setw(12) << "mean_loss"
            << std::setw(8) << "errors" << "\n";
  for (const auto& [mode, a] : by_mode) {
    const double n = a.tasks > 0 ? a.tasks : 1;
    std::cout << std::left << std::setw(16) << mode << std::right << std::setw(8)
              << a.tasks << std::setw(10) << std::fixed << std::setprecision(3)
              << a.wins_any / n << std::setw(10) << a.wins_first / n << std::setw(14)
              << std::setprecision(1) << a.queries / n << std::setw(12)
              << std::setprecision(3) << a.loss / n << std::setw(8) << a.errors << "\n";
  }
  return 0;
}

int cmd_init_config(const std::string& out_path) {
  save_config(default_config(), out_path);
  std::cout << "wrote " << out_path
            << " (defaults carry calibrated gate thresholds; rerun `calibrate` "
               "after changing seeds or dimensions)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroth-order adversarial prompt search against a gated "
               "text-to-image oracle (desk-scale simulation)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode;
  std::string out_dir = "out";
  std::string in_dir;
  int tasks = 50;
  int samples = 2000;

  auto* run = app.add_subcommand("run", "run an experiment suite");
  run->add_option("--config", config_path, "config JSON path")->required();
  run->add_option("--mode", mode, "override the config's mode");
  run->add_option("--tasks", tasks, "number of seeded tasks");
  run->add_option("--out", out_dir, "output directory");

  auto* cal = app.add_subcommand("calibrate",
                                 "compute gate thresholds and write them back");
  cal->add_option("--config", config_path, "config JSON path")->required();
  cal->add_option("--samples", samples, "calibration sample count");

  auto* rep = app.add_subcommand("report", "summarize records.jsonl");
  rep->add_option("--in", in_dir, "directory containing records.jsonl")->required();

  auto* init = app.add_subcommand("init-config", "write a default config file");
  init->add_option("--out", out_dir, "destination path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, mode, tasks, out_dir);
    if (cal->parsed()) return cmd_calibrate(config_path, samples);
    if (rep->parsed()) return cmd_report(in_dir);
    if (init->parsed()) return cmd_init_config(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
