// streamweave command-line harness: run, train, compare, synth, serve.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "streamweave/error.hpp"
#include "streamweave/gateway.hpp"
#include "streamweave/harness.hpp"
#include "streamweave/metrics.hpp"
#include "streamweave/orchestrator.hpp"

namespace sw = streamweave;

namespace {

constexpr int kUsageError = 2;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("streamweave");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("STREAMWEAVE_LOG");
  const std::string level = env ? env : "info";
  if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else if (level == "error") spdlog::set_level(spdlog::level::err);
  else spdlog::set_level(spdlog::level::info);
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(1) << '\n';
}

sw::RunConfig config_from(const std::string& path) {
  if (path.empty()) return sw::RunConfig{};
  if (!std::filesystem::is_regular_file(path)) throw InputError("config not found: " + path);
  return sw::load_run_config(path);
}

sw::Scenario scenario_from(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("scenario not found: " + path);
  return sw::load_scenario(path);
}

std::vector<sw::NamedScenario> scenario_dir(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("scenario dir not found: " + dir);
  auto set = sw::load_scenario_dir(dir);
  if (set.empty()) throw InputError("empty data: no scenarios in " + dir);
  return set;
}

bool is_input_error(const sw::Error& e) {
  switch (e.code()) {
    case sw::ErrorCode::ParseError:
    case sw::ErrorCode::SchemaError:
    case sw::ErrorCode::ValidationError:
    case sw::ErrorCode::InvalidConfig:
    case sw::ErrorCode::InvalidSpec:
    case sw::ErrorCode::NotFound:
    case sw::ErrorCode::EmptyDataset:
    case sw::ErrorCode::EmptyRelevantSet:
    case sw::ErrorCode::DimensionMismatch:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"streamweave: streaming video-QA pipeline harness"};
  app.require_subcommand(1);

  // run
  std::string run_scenario, run_config, run_mode, run_out, run_report;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Run one scenario and print its metrics");
  run->add_option("--scenario", run_scenario, "Scenario JSON")->required();
  run->add_option("--config", run_config, "Run config JSON");
  run->add_option("--mode", run_mode, "async or serial")->check(CLI::IsMember({"async", "serial"}));
  run->add_option("--out", run_out, "Timeline JSON output");
  run->add_option("--report", run_report, "Metrics JSON output");
  run->add_option("--seed", run_seed, "Seed override");

  // train
  std::string train_kind, train_data, train_out, train_config;
  int train_epochs = 100;
  double train_lr = 0.1;
  auto* train = app.add_subcommand("train", "Train the decision or retrieval head");
  train->add_option("kind", train_kind, "decision or retrieval")
      ->required()
      ->check(CLI::IsMember({"decision", "retrieval"}));
  train->add_option("--data", train_data, "Scenario directory")->required();
  train->add_option("--epochs", train_epochs, "Full-batch epochs")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", train_lr, "Learning rate");
  train->add_option("--out", train_out, "Parameter file output")->required();
  train->add_option("--config", train_config, "Run config JSON (segmenter, ablations, temperature)");
  std::uint64_t train_seed = 0;
  train->add_option("--seed", train_seed, "Seed (training is full batch and deterministic)");

  // compare
  std::string cmp_dir, cmp_axis, cmp_config, cmp_out;
  std::uint64_t cmp_seed = 0;
  auto* compare = app.add_subcommand("compare", "Run an ablation grid over a scenario directory");
  compare->add_option("--scenario-dir", cmp_dir, "Scenario directory")->required();
  compare->add_option("--axis", cmp_axis, "segmenter, tokens or mode")
      ->required()
      ->check(CLI::IsMember({"segmenter", "tokens", "mode"}));
  compare->add_option("--seed", cmp_seed, "Seed shared by every row")->required();
  compare->add_option("--config", cmp_config, "Base run config JSON");
  compare->add_option("--out", cmp_out, "Compare report JSON output");

  // synth
  std::string synth_family = "planted", synth_out;
  std::size_t synth_count = 10;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic scenario family");
  synth->add_option("--family", synth_family, "planted, two_scene or multi_answer")
      ->check(CLI::IsMember({"planted", "two_scene", "multi_answer"}));
  synth->add_option("--count", synth_count, "Number of scenarios");
  synth->add_option("--seed", synth_seed, "Family seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // serve
  int serve_port = 8080;
  std::string serve_host = "0.0.0.0", serve_dir = ".", serve_config;
  auto* serve = app.add_subcommand("serve", "Serve live sessions over HTTP");
  serve->add_option("--port", serve_port, "Port");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--scenario-dir", serve_dir, "Directory scenarios are resolved against");
  serve->add_option("--config", serve_config, "Run config JSON for live sessions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*run) {
      sw::RunConfig cfg = config_from(run_config);
      const sw::Scenario scenario = scenario_from(run_scenario);
      if (!run_mode.empty()) cfg.mode = run_mode == "serial" ? sw::RunMode::Serial : sw::RunMode::Async;
      if (run_seed) {
        cfg.seed = *run_seed;
        cfg.reaction.latency.seed = *run_seed;
      }
      sw::Timeline tl;
      if (cfg.clock == sw::ClockKind::Wall) {
        sw::LiveRun live(scenario, cfg);
        live.play();
        live.wait();
        tl = live.timeline();
      } else {
        tl = sw::run(scenario, cfg);
      }
      const sw::MetricsReport m = sw::compute_metrics(tl, scenario);
      spdlog::info("{} events, {} clips, {} answers", tl.size(), tl.count(sw::EventKind::ClipEmitted),
                   tl.count(sw::EventKind::AnswerEmitted));
      if (!run_out.empty()) write_json(run_out, tl.to_json());
      if (!run_report.empty()) write_json(run_report, sw::metrics_to_json(m));
      std::cout << "mode " << (cfg.mode == sw::RunMode::Async ? "async" : "serial") << "\n"
                << sw::metrics_to_text(m);
    } else if (*train) {
      const sw::RunConfig cfg = config_from(train_config);
      const auto data = scenario_dir(train_data);
      nlohmann::json out;
      if (train_kind == "decision") {
        const auto r = sw::train_decision_on(data, cfg, train_epochs, train_lr);
        spdlog::info("decision head: {} samples ({} positive), BCE {:.6f} -> {:.6f}, train accuracy {:.4f}",
                     r.samples, r.positives, r.result.loss_curve.front(), r.result.loss_curve.back(),
                     r.train_accuracy);
        std::cout << "final BCE " << r.result.loss_curve.back() << "\n";
        out = sw::decision_report_to_json(r, train_epochs, train_lr);
      } else {
        const auto r = sw::train_retrieval_on(data, cfg, train_epochs, train_lr);
        spdlog::info("retrieval head: {} samples, loss {:.6f} -> {:.6f}, recall@1 {:.4f} -> {:.4f}", r.samples,
                     r.result.loss_curve.front(), r.result.loss_curve.back(), r.recall_before, r.recall_after);
        std::cout << "final loss " << r.result.loss_curve.back() << "\nrecall@1 " << r.recall_after << "\n";
        out = sw::retrieval_report_to_json(r, train_epochs, train_lr);
      }
      out["seed"] = train_seed;
      write_json(train_out, out);
    } else if (*compare) {
      const sw::RunConfig cfg = config_from(cmp_config);
      const auto data = scenario_dir(cmp_dir);
      const auto report = sw::run_compare(data, sw::parse_axis(cmp_axis), cfg, cmp_seed);
      std::cout << sw::compare_to_text(report);
      if (!cmp_out.empty()) write_json(cmp_out, sw::compare_to_json(report));
    } else if (*synth) {
      const auto paths = sw::write_dataset(synth_out, sw::parse_family(synth_family), synth_count, synth_seed);
      std::cout << "wrote " << paths.size() << " scenario(s) to " << synth_out << "\n";
    } else if (*serve) {
      sw::GatewayOptions opts{serve_dir, config_from(serve_config)};
      sw::Gateway gateway(std::move(opts));
      spdlog::info("listening on {}:{}", serve_host, serve_port);
      if (!gateway.listen(serve_host, serve_port)) {
        spdlog::error("cannot bind {}:{}", serve_host, serve_port);
        return 1;
      }
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const sw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_input_error(e) ? kUsageError : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
