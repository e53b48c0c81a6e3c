#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rapt/annotations.hpp"
#include "rapt/detector.hpp"
#include "rapt/metrics.hpp"
#include "rapt/synthetic.hpp"

namespace rapt {

struct MetricConfig {
  std::vector<std::string> splits = {"Reasonable", "Small", "Heavy", "All"};
  double iou_thresh = 0.5;
  int max_dets_per_image = 100;
  double overlap_iou = 0.5;
  bool average_iou_50_95 = false;

  MetricOptions options() const;
  void validate() const;
};

/// Fully resolved experiment description. Domain seeds default to values
/// derived from the global seed; the train seed echoes the global seed.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  FeatureGeometry geometry;
  std::vector<DomainSpec> train_domains;
  DomainSpec test_domain;
  TrainConfig train;
  MetricConfig metrics;

  std::filesystem::path data_dir() const { return output_dir / "data"; }
  std::filesystem::path runs_dir() const { return output_dir / "runs"; }
};

/// Parses and validates a config file. Unknown keys are rejected; error
/// messages carry the field path. When the file omits output_dir the
/// RAPT_OUTPUT_DIR environment variable applies, then "rapt_out".
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

/// Resolved-config echo embedded in reports.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Generates every domain, writes per-domain annotation JSON + feature
/// dumps, then the merged train pool and the test domain. Returns a summary
/// (paths + instance-density stats per domain).
nlohmann::json run_synth_gen(const ExperimentConfig& cfg);

enum class Arm { kRapt, kBaseline };
std::string arm_name(Arm arm);

struct ArmArtifacts {
  std::filesystem::path head_path;
  std::filesystem::path log_path;
  std::filesystem::path detections_path;
};

/// Trains one arm on the generated train pool, writes head parameters and
/// the line-JSON training log, and scores the test set. `observer` is
/// forwarded into the training loop.
ArmArtifacts run_train_arm(const ExperimentConfig& cfg, Arm arm,
                           const TrainObserver* observer = nullptr);

/// Metric report for one detections/annotations pair over the configured
/// splits. Undefined metrics (empty splits) appear as null.
nlohmann::json evaluate_files(const ExperimentConfig& cfg,
                              const std::filesystem::path& detections_path,
                              const std::filesystem::path& annotations_path);

/// Writes report JSON and CSV next to each other; returns the JSON.
nlohmann::json write_eval_report(const ExperimentConfig& cfg,
                                 const nlohmann::json& split_metrics,
                                 const std::filesystem::path& json_path);

/// Instance-density statistics of an annotation file.
nlohmann::json run_dataset_stats(const std::filesystem::path& annotations_path,
                                 double overlap_iou);

/// Full pipeline: synth-gen, train both arms, evaluate both on the test
/// domain, and write report.json / report.csv (plus a timings.json sidecar,
/// which is the only output that varies between identical runs).
nlohmann::json run_full_experiment(const ExperimentConfig& cfg,
                                   const TrainObserver* observer = nullptr);

void save_head(const DetectionHead& head, const std::filesystem::path& path);
DetectionHead load_head(const std::filesystem::path& path);
void save_train_log(const std::vector<BatchLogRecord>& log, bool reweighting,
                    const std::filesystem::path& path);

}  // namespace rapt
