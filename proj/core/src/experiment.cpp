#include "rapt/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

namespace rapt {

using nlohmann::json;

MetricOptions MetricConfig::options() const {
  MetricOptions opts;
  opts.iou_thresh = iou_thresh;
  opts.max_dets_per_image = max_dets_per_image;
  opts.average_iou_50_95 = average_iou_50_95;
  return opts;
}

void MetricConfig::validate() const {
  if (splits.empty()) throw ConfigError("splits: must be nonempty");
  for (const auto& s : splits)
    if (!split_by_name(s))
      throw ConfigError("splits: unknown split '" + s +
                        "' (expected Reasonable, Small, Heavy, or All)");
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) throw ConfigError("iou_thresh: must be in (0, 1)");
  if (max_dets_per_image < 1) throw ConfigError("max_dets_per_image: must be >= 1");
  if (!(overlap_iou > 0.0 && overlap_iou < 1.0)) throw ConfigError("overlap_iou: must be in (0, 1)");
}

namespace {

// Strict object reader: every key must be consumed, misses carry the path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  T get(const char* key, T fallback) {
    mark(key);
    if (!j_.contains(key)) return fallback;
    return read<T>(key);
  }

  template <typename T>
  T require(const char* key) {
    mark(key);
    if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": missing required field");
    return read<T>(key);
  }

  const json& raw(const char* key) {
    mark(key);
    return j_.at(key);
  }

  std::string child_path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + "." + key + ": unknown key");
    }
  }

 private:
  void mark(const char* key) { seen_.insert(key); }

  template <typename T>
  T read(const char* key) {
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
        return v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
        return v.get<std::string>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("");
        return v.get<T>();
      } else {
        if (!v.is_number()) throw ConfigError("");
        return v.get<T>();
      }
    } catch (...) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<int> read_int_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of channel indices");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(path + ": entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

DomainSpec parse_domain(const json& j, const std::string& path, std::uint64_t default_seed) {
  Reader r(j, path);
  DomainSpec d;
  d.name = r.get<std::string>("name", "");
  d.rho = r.require<double>("rho");
  d.n_images = r.require<int>("n_images");
  d.proposals_per_image = r.get<int>("proposals_per_image", d.proposals_per_image);
  d.gts_per_image = r.get<int>("gts_per_image", d.gts_per_image);
  d.positive_fraction = r.get<double>("positive_fraction", d.positive_fraction);
  d.noise_sigma = r.get<double>("noise_sigma", d.noise_sigma);
  d.bin_noise_sigma = r.get<double>("bin_noise_sigma", d.bin_noise_sigma);
  if (r.has("relevant_channels"))
    d.relevant_channels = read_int_array(r.raw("relevant_channels"), r.child_path("relevant_channels"));
  if (r.has("irrelevant_channels"))
    d.irrelevant_channels =
        read_int_array(r.raw("irrelevant_channels"), r.child_path("irrelevant_channels"));
  d.image_w = r.get<int>("image_w", d.image_w);
  d.image_h = r.get<int>("image_h", d.image_h);
  d.seed = r.get<std::uint64_t>("seed", default_seed);
  r.finish();
  return d;
}

DecorrConfig parse_decorr(const json& j, const std::string& path, std::uint64_t default_seed) {
  Reader r(j, path);
  DecorrConfig d;
  d.n_rff = r.get<int>("n_rff", d.n_rff);
  if (r.has("pair_budget")) {
    const json& v = r.raw("pair_budget");
    if (v.is_string()) {
      if (v.get<std::string>() != "all")
        throw ConfigError(path + ".pair_budget: must be a count or \"all\"");
      d.pair_budget = 0;
    } else if (v.is_number_integer()) {
      d.pair_budget = v.get<int>();
      if (d.pair_budget < 1) throw ConfigError(path + ".pair_budget: must be >= 1 or \"all\"");
    } else {
      throw ConfigError(path + ".pair_budget: must be a count or \"all\"");
    }
  }
  d.steps = r.get<int>("steps", d.steps);
  d.learning_rate = r.get<double>("learning_rate", d.learning_rate);
  d.seed = r.get<std::uint64_t>("seed", default_seed);
  if (r.has("cov_form")) {
    const std::string form = r.get<std::string>("cov_form", "weight_scaled");
    if (form == "weight_scaled")
      d.cov_form = CovForm::kWeightScaled;
    else if (form == "conventional")
      d.cov_form = CovForm::kConventional;
    else
      throw ConfigError(path + ".cov_form: must be \"weight_scaled\" or \"conventional\"");
  }
  d.resample_banks_per_batch = r.get<bool>("resample_banks_per_batch", false);
  r.finish();
  return d;
}

TrainConfig parse_train(const json& j, const std::string& path, std::uint64_t seed) {
  Reader r(j, path);
  TrainConfig t;
  t.epochs = r.require<int>("epochs");
  t.batches_per_epoch = r.require<int>("batches_per_epoch");
  t.batch_size = r.require<int>("batch_size");
  t.head_lr = r.get<double>("head_lr", t.head_lr);
  t.k = r.get<int>("k", t.k);
  t.kmeans_max_iters = r.get<int>("kmeans_max_iters", t.kmeans_max_iters);
  t.match_iou = r.get<double>("match_iou", t.match_iou);
  t.seed = seed;
  t.foreground_only = r.get<bool>("foreground_only", false);
  if (r.has("decorr")) t.decorr = parse_decorr(r.raw("decorr"), path + ".decorr", mix_seed(seed, 0xDECC));
  else t.decorr.seed = mix_seed(seed, 0xDECC);
  r.finish();
  return t;
}

MetricConfig parse_metrics(const json& j, const std::string& path) {
  Reader r(j, path);
  MetricConfig m;
  if (r.has("splits")) {
    const json& v = r.raw("splits");
    if (!v.is_array()) throw ConfigError(path + ".splits: expected an array of split names");
    m.splits.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(path + ".splits: entries must be strings");
      m.splits.push_back(e.get<std::string>());
    }
  }
  m.iou_thresh = r.get<double>("iou_thresh", m.iou_thresh);
  m.max_dets_per_image = r.get<int>("max_dets_per_image", m.max_dets_per_image);
  m.overlap_iou = r.get<double>("overlap_iou", m.overlap_iou);
  m.average_iou_50_95 = r.get<bool>("average_iou_50_95", false);
  r.finish();
  return m;
}

template <typename Fn>
void with_prefix(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  }
}

json domain_to_json(const DomainSpec& d) {
  json j;
  j["name"] = d.name;
  j["rho"] = d.rho;
  j["n_images"] = d.n_images;
  j["proposals_per_image"] = d.proposals_per_image;
  j["gts_per_image"] = d.gts_per_image;
  j["positive_fraction"] = d.positive_fraction;
  j["noise_sigma"] = d.noise_sigma;
  j["bin_noise_sigma"] = d.bin_noise_sigma;
  j["relevant_channels"] = d.relevant_channels;
  j["irrelevant_channels"] = d.irrelevant_channels;
  j["image_w"] = d.image_w;
  j["image_h"] = d.image_h;
  j["seed"] = d.seed;
  return j;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SchemaError("cannot write file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

std::string arm_name(Arm arm) { return arm == Arm::kRapt ? "rapt" : "baseline"; }

ExperimentConfig parse_experiment_config(const json& j) {
  Reader r(j, "config");
  ExperimentConfig cfg;
  if (r.has("format_version")) {
    const int v = r.get<int>("format_version", 1);
    if (v != 1) throw ConfigError("config.format_version: unsupported version");
  }
  cfg.seed = r.get<std::uint64_t>("seed", 0);

  std::string out_dir = r.get<std::string>("output_dir", "");
  if (out_dir.empty()) {
    if (const char* env = std::getenv("RAPT_OUTPUT_DIR")) out_dir = env;
  }
  if (out_dir.empty()) out_dir = "rapt_out";
  cfg.output_dir = out_dir;

  if (r.has("geometry")) {
    Reader g(r.raw("geometry"), "config.geometry");
    cfg.geometry.channels = g.get<int>("channels", cfg.geometry.channels);
    cfg.geometry.roi_h = g.get<int>("roi_h", cfg.geometry.roi_h);
    cfg.geometry.roi_w = g.get<int>("roi_w", cfg.geometry.roi_w);
    g.finish();
  }
  with_prefix("config.geometry.", [&] { cfg.geometry.validate(); });

  {
    const json& v = r.raw("train_domains");
    if (!v.is_array() || v.empty())
      throw ConfigError("config.train_domains: expected a nonempty array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string path = "config.train_domains[" + std::to_string(i) + "]";
      DomainSpec d = parse_domain(v[i], path, mix_seed(cfg.seed, 0xD0, i));
      with_prefix(path + ".", [&] { d.validate(cfg.geometry); });
      cfg.train_domains.push_back(std::move(d));
    }
  }
  {
    const std::string path = "config.test_domain";
    cfg.test_domain = parse_domain(r.raw("test_domain"), path, mix_seed(cfg.seed, 0xD1));
    with_prefix(path + ".", [&] { cfg.test_domain.validate(cfg.geometry); });
  }
  cfg.train = parse_train(r.raw("train"), "config.train", cfg.seed);
  with_prefix("config.train.", [&] { cfg.train.validate(); });
  if (r.has("metrics")) cfg.metrics = parse_metrics(r.raw("metrics"), "config.metrics");
  with_prefix("config.metrics.", [&] { cfg.metrics.validate(); });
  r.finish();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["format_version"] = 1;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  j["geometry"] = {{"channels", cfg.geometry.channels},
                   {"roi_h", cfg.geometry.roi_h},
                   {"roi_w", cfg.geometry.roi_w}};
  j["train_domains"] = json::array();
  for (const auto& d : cfg.train_domains) j["train_domains"].push_back(domain_to_json(d));
  j["test_domain"] = domain_to_json(cfg.test_domain);
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batches_per_epoch", cfg.train.batches_per_epoch},
                {"batch_size", cfg.train.batch_size},
                {"head_lr", cfg.train.head_lr},
                {"k", cfg.train.k},
                {"kmeans_max_iters", cfg.train.kmeans_max_iters},
                {"match_iou", cfg.train.match_iou},
                {"foreground_only", cfg.train.foreground_only},
                {"decorr",
                 {{"n_rff", cfg.train.decorr.n_rff},
                  {"pair_budget", cfg.train.decorr.pair_budget},
                  {"steps", cfg.train.decorr.steps},
                  {"learning_rate", cfg.train.decorr.learning_rate},
                  {"seed", cfg.train.decorr.seed},
                  {"cov_form", cfg.train.decorr.cov_form == CovForm::kWeightScaled
                                   ? "weight_scaled"
                                   : "conventional"},
                  {"resample_banks_per_batch", cfg.train.decorr.resample_banks_per_batch}}}};
  j["metrics"] = {{"splits", cfg.metrics.splits},
                  {"iou_thresh", cfg.metrics.iou_thresh},
                  {"max_dets_per_image", cfg.metrics.max_dets_per_image},
                  {"overlap_iou", cfg.metrics.overlap_iou},
                  {"average_iou_50_95", cfg.metrics.average_iou_50_95}};
  return j;
}

namespace {

void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  save_annotations(annotations_from_dataset(ds), dir / "annotations.json");
  save_feature_dump(ds, dir / "features.bin");
}

json dataset_summary(const SyntheticDataset& ds, const MetricConfig& metrics) {
  const DatasetStats stats = dataset_stats(ds.all_gts(), ds.n_images(), metrics.overlap_iou);
  return {{"images", ds.n_images()},
          {"proposals", ds.n_proposals()},
          {"objects_per_image", stats.objects_per_image},
          {"overlaps_per_image", stats.overlaps_per_image}};
}

}  // namespace

json run_synth_gen(const ExperimentConfig& cfg) {
  json summary;
  summary["domains"] = json::array();

  std::vector<SyntheticDataset> parts;
  for (std::size_t i = 0; i < cfg.train_domains.size(); ++i) {
    SyntheticDataset d = generate_domain(cfg.train_domains[i], cfg.geometry);
    const auto dir = cfg.data_dir() / ("domain_" + std::to_string(i));
    write_dataset(d, dir);
    json entry = dataset_summary(d, cfg.metrics);
    entry["path"] = dir.string();
    entry["name"] = cfg.train_domains[i].name;
    summary["domains"].push_back(entry);
    parts.push_back(std::move(d));
  }

  // Merge into the domain-label-free train pool.
  SyntheticDataset train;
  train.geometry = cfg.geometry;
  std::int64_t next_id = 0;
  for (auto& part : parts) {
    for (auto& img : part.images) {
      const std::int64_t id = next_id++;
      img.id = id;
      for (auto& g : img.gts) g.image_id = id;
      for (auto& p : img.proposals) p.image_id = id;
      train.images.push_back(std::move(img));
    }
  }
  parts.clear();
  write_dataset(train, cfg.data_dir() / "train");
  summary["train"] = dataset_summary(train, cfg.metrics);
  summary["train"]["path"] = (cfg.data_dir() / "train").string();

  const SyntheticDataset test = generate_domain(cfg.test_domain, cfg.geometry);
  write_dataset(test, cfg.data_dir() / "test");
  summary["test"] = dataset_summary(test, cfg.metrics);
  summary["test"]["path"] = (cfg.data_dir() / "test").string();
  return summary;
}

void save_head(const DetectionHead& head, const std::filesystem::path& path) {
  json j;
  j["format_version"] = 1;
  j["channels"] = head.channels;
  j["cls"] = head.cls;
  j["reg"] = head.reg;
  write_json_file(j, path);
}

DetectionHead load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  DetectionHead head;
  try {
    head.channels = j.at("channels").get<int>();
    head.cls = j.at("cls").get<std::vector<double>>();
    head.reg = j.at("reg").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": bad head file: " + e.what());
  }
  if (static_cast<int>(head.cls.size()) != head.channels + 1 ||
      static_cast<int>(head.reg.size()) != 4 * (head.channels + 1))
    throw SchemaError(path.string() + ": head parameter sizes are inconsistent");
  return head;
}

void save_train_log(const std::vector<BatchLogRecord>& log, bool reweighting,
                    const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SchemaError("cannot write file: " + path.string());
  for (const auto& rec : log) {
    json j;
    j["epoch"] = rec.epoch;
    j["batch"] = rec.batch;
    j["n_proposals"] = rec.n_proposals;
    j["n_positives"] = rec.n_positives;
    j["pred_loss"] = rec.pred_loss;
    if (reweighting) {
      j["decorr_loss_before"] = rec.decorr_loss_before.value_or(0.0);
      j["decorr_loss_after"] = rec.decorr_loss_after.value_or(0.0);
      j["small_clusters"] = rec.small_clusters.value_or(0);
    }
    j["w_min"] = rec.w_min;
    j["w_max"] = rec.w_max;
    j["w_mean"] = rec.w_mean;
    j["w_std"] = rec.w_std;
    out << j.dump() << '\n';
  }
}

ArmArtifacts run_train_arm(const ExperimentConfig& cfg, Arm arm, const TrainObserver* observer) {
  const auto train_dir = cfg.data_dir() / "train";
  const auto test_dir = cfg.data_dir() / "test";
  const AnnotationSet train_ann = load_annotations(train_dir / "annotations.json");
  const SyntheticDataset train_ds = load_feature_dump(train_dir / "features.bin", train_ann);

  TrainConfig tcfg = cfg.train;
  tcfg.reweighting_enabled = arm == Arm::kRapt;
  const TrainResult result = train(train_ds, tcfg, observer);

  ArmArtifacts art;
  const auto dir = cfg.runs_dir() / arm_name(arm);
  art.head_path = dir / "head.json";
  art.log_path = dir / "train_log.jsonl";
  art.detections_path = dir / "detections.json";
  save_head(result.head, art.head_path);
  save_train_log(result.log, tcfg.reweighting_enabled, art.log_path);

  const AnnotationSet test_ann = load_annotations(test_dir / "annotations.json");
  const SyntheticDataset test_ds = load_feature_dump(test_dir / "features.bin", test_ann);
  save_detections(detect(test_ds, result.head), art.detections_path);
  return art;
}

json evaluate_files(const ExperimentConfig& cfg, const std::filesystem::path& detections_path,
                    const std::filesystem::path& annotations_path) {
  const AnnotationSet ann = load_annotations(annotations_path);
  const std::vector<Detection> dets = load_detections(detections_path);
  const MetricOptions opts = cfg.metrics.options();

  json out;
  for (const auto& name : cfg.metrics.splits) {
    const EvalSplit split = *split_by_name(name);
    const auto ap = mean_average_precision(dets, ann.gts, split, opts);
    const auto mr = log_avg_miss_rate(dets, ann.gts, ann.n_images(), split, opts);
    json entry;
    entry["map"] = ap ? json(*ap) : json(nullptr);
    entry["mr2"] = mr ? json(*mr) : json(nullptr);
    out[name] = entry;
  }
  return out;
}

json write_eval_report(const ExperimentConfig& cfg, const json& split_metrics,
                       const std::filesystem::path& json_path) {
  json report;
  report["format_version"] = 1;
  report["config"] = config_to_json(cfg);
  report["splits"] = split_metrics;
  write_json_file(report, json_path);

  std::filesystem::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw SchemaError("cannot write file: " + csv_path.string());
  csv << "split,map,mr2\n";
  for (const auto& name : cfg.metrics.splits) {
    const json& entry = split_metrics.at(name);
    csv << name << ',' << entry["map"].dump() << ',' << entry["mr2"].dump() << '\n';
  }
  return report;
}

json run_dataset_stats(const std::filesystem::path& annotations_path, double overlap_iou) {
  const AnnotationSet ann = load_annotations(annotations_path);
  const DatasetStats stats = dataset_stats(ann.gts, ann.n_images(), overlap_iou);
  return {{"images", ann.n_images()},
          {"objects_per_image", stats.objects_per_image},
          {"overlaps_per_image", stats.overlaps_per_image}};
}

json run_full_experiment(const ExperimentConfig& cfg, const TrainObserver* observer) {
  using clock = std::chrono::steady_clock;
  json timings;
  const auto t0 = clock::now();
  run_synth_gen(cfg);
  const auto t1 = clock::now();

  json report;
  report["format_version"] = 1;
  report["config"] = config_to_json(cfg);
  report["arms"] = json::object();

  const auto test_annotations = cfg.data_dir() / "test" / "annotations.json";
  json arm_seconds = json::object();
  for (Arm arm : {Arm::kRapt, Arm::kBaseline}) {
    const auto ta = clock::now();
    const ArmArtifacts art = run_train_arm(cfg, arm, observer);
    const json metrics = evaluate_files(cfg, art.detections_path, test_annotations);
    const auto tb = clock::now();
    json entry;
    entry["metrics"] = metrics;
    entry["head"] = art.head_path.string();
    entry["train_log"] = art.log_path.string();
    entry["detections"] = art.detections_path.string();
    report["arms"][arm_name(arm)] = entry;
    arm_seconds[arm_name(arm)] = std::chrono::duration<double>(tb - ta).count();
  }

  write_json_file(report, cfg.output_dir / "report.json");
  {
    std::ofstream csv(cfg.output_dir / "report.csv", std::ios::trunc);
    csv << "arm,split,map,mr2\n";
    for (const char* arm : {"rapt", "baseline"}) {
      for (const auto& name : cfg.metrics.splits) {
        const json& entry = report["arms"][arm]["metrics"].at(name);
        csv << arm << ',' << name << ',' << entry["map"].dump() << ',' << entry["mr2"].dump()
            << '\n';
      }
    }
  }

  // Wall-clock timings go to a sidecar so report.json stays byte-stable
  // across reruns.
  timings["synth_gen_seconds"] = std::chrono::duration<double>(t1 - t0).count();
  timings["arm_seconds"] = arm_seconds;
  write_json_file(timings, cfg.output_dir / "timings.json");
  return report;
}

}  // namespace rapt
