// Command line front end: dataset generation, training, evaluation, and
// dataset statistics, all driven by one JSON experiment config.
//
// Exit codes: 0 success, 2 config error, 3 numeric error, 4 schema error,
// 1 anything else.

#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rapt/errors.hpp"
#include "rapt/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitSchema = 4;

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const rapt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rapt::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const rapt::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proposal-reweighting detector experiments on synthetic multi-domain data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string arm = "both";
  std::string detections_path;
  std::string annotations_path;
  std::string out_path;
  double overlap_iou = 0.5;

  auto* synth = app.add_subcommand("synth-gen", "Generate the configured synthetic domains");
  synth->add_option("config", config_path, "Experiment config JSON")->required();

  auto* train = app.add_subcommand("train", "Train detection heads on the generated train pool");
  train->add_option("config", config_path, "Experiment config JSON")->required();
  train->add_option("--arm", arm, "Which arm to train: rapt, baseline, or both")
      ->check(CLI::IsMember({"rapt", "baseline", "both"}));

  auto* eval = app.add_subcommand("eval", "Evaluate a detections file against annotations");
  eval->add_option("config", config_path, "Experiment config JSON")->required();
  eval->add_option("--detections", detections_path, "Detection results JSON")->required();
  eval->add_option("--annotations", annotations_path, "Annotation JSON")->required();
  eval->add_option("--out", out_path, "Report JSON path (default <output_dir>/eval/report.json)");

  auto* stats = app.add_subcommand("dataset-stats", "Instance-density statistics of an annotation file");
  stats->add_option("--annotations", annotations_path, "Annotation JSON")->required();
  stats->add_option("--overlap-iou", overlap_iou, "IoU threshold for the overlap count")
      ->check(CLI::Range(0.0, 1.0));
  stats->add_option("--out", out_path, "Optional output JSON path");

  auto* run = app.add_subcommand("run", "Full pipeline: synth-gen, train both arms, evaluate, report");
  run->add_option("config", config_path, "Experiment config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    return run_guarded([&] {
      const auto cfg = rapt::load_experiment_config(config_path);
      const auto summary = rapt::run_synth_gen(cfg);
      std::cout << summary.dump(2) << '\n';
      return 0;
    });
  }

  if (train->parsed()) {
    return run_guarded([&] {
      const auto cfg = rapt::load_experiment_config(config_path);
      const bool do_rapt = arm == "rapt" || arm == "both";
      const bool do_base = arm == "baseline" || arm == "both";
      if (do_rapt) {
        const auto art = rapt::run_train_arm(cfg, rapt::Arm::kRapt);
        std::cout << "rapt: " << art.log_path.string() << '\n';
      }
      if (do_base) {
        const auto art = rapt::run_train_arm(cfg, rapt::Arm::kBaseline);
        std::cout << "baseline: " << art.log_path.string() << '\n';
      }
      return 0;
    });
  }

  if (eval->parsed()) {
    return run_guarded([&] {
      const auto cfg = rapt::load_experiment_config(config_path);
      const auto metrics = rapt::evaluate_files(cfg, detections_path, annotations_path);
      const std::filesystem::path report_path =
          out_path.empty() ? cfg.output_dir / "eval" / "report.json"
                           : std::filesystem::path(out_path);
      const auto report = rapt::write_eval_report(cfg, metrics, report_path);
      std::cout << report["splits"].dump(2) << '\n';
      return 0;
    });
  }

  if (stats->parsed()) {
    return run_guarded([&] {
      const auto result = rapt::run_dataset_stats(annotations_path, overlap_iou);
      if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        out << result.dump(2) << '\n';
      }
      std::cout << result.dump(2) << '\n';
      return 0;
    });
  }

  if (run->parsed()) {
    return run_guarded([&] {
      const auto cfg = rapt::load_experiment_config(config_path);
      const auto report = rapt::run_full_experiment(cfg);
      for (const char* a : {"rapt", "baseline"}) {
        std::cout << a << ": " << report["arms"][a]["metrics"].dump(2) << '\n';
      }
      std::cout << "report: " << (cfg.output_dir / "report.json").string() << '\n';
      return 0;
    });
  }
  return 1;
}
