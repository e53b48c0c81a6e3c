#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rapt/clustering.hpp"
#include "rapt/decorrelation.hpp"
#include "rapt/geometry.hpp"
#include "rapt/metrics.hpp"
#include "rapt/synthetic.hpp"

namespace rapt {

/// Linear classification + box-regression head over pooled features. The
/// last coefficient of each row is the bias.
struct DetectionHead {
  int channels = 0;
  std::vector<double> cls;  // channels + 1
  std::vector<double> reg;  // 4 x (channels + 1), row-major

  static DetectionHead zeros(int channels);
  double logit(const PooledFeature& z) const;
  std::array<double, 4> deltas(const PooledFeature& z) const;
};

struct TrainConfig {
  int epochs = 1;
  int batches_per_epoch = 1;
  int batch_size = 16;  // images per batch
  double head_lr = 0.1;
  int k = 8;  // clusters per batch (clamped to the batch proposal count)
  int kmeans_max_iters = 50;
  double match_iou = 0.5;
  DecorrConfig decorr;
  std::uint64_t seed = 0;
  bool reweighting_enabled = true;
  bool foreground_only = false;  // restrict clustering + reweighting to positives

  void validate() const;  // throws ConfigError
};

/// A batch of proposals with resolved classification/regression targets.
/// `proposals` are non-owning pointers into the dataset.
struct MatchedBatch {
  std::vector<const Proposal*> proposals;
  std::vector<std::uint8_t> labels;                 // 0 or 1
  std::vector<std::array<double, 4>> reg_targets;   // valid where labels == 1
  std::vector<PooledFeature> pooled;
  ClusterAssignment assignment;  // empty when reweighting is disabled
  SampleWeights weights;

  int size() const { return static_cast<int>(proposals.size()); }
  int positives() const;
};

/// Resolves targets: a proposal is positive iff its max-IoU same-image
/// ground truth reaches iou_thresh; positives carry that ground truth's box
/// deltas. Ignored ground truths do not participate. Also fills pooled
/// features and uniform weights.
MatchedBatch match_targets(const std::vector<const Proposal*>& proposals,
                           const std::vector<GroundTruthBox>& gts, double iou_thresh);

/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);

/// Numerically stable binary cross entropy of sigmoid(logit) against a
/// 0/1 target.
double bce(double logit, int target);

/// Sum over proposals of w_i * (classification + regression loss); the
/// regression term applies to positives only.
double weighted_pred_loss(const MatchedBatch& batch, const DetectionHead& head);

struct HeadGrad {
  std::vector<double> cls;
  std::vector<double> reg;
};

/// Analytic gradient of weighted_pred_loss in the head parameters, plus the
/// loss value itself.
double head_loss_grad(const MatchedBatch& batch, const DetectionHead& head, HeadGrad& grad);

/// One line of the per-batch training log. Decorrelation fields are only
/// present on reweighting runs.
struct BatchLogRecord {
  int epoch = 0;
  int batch = 0;
  int n_proposals = 0;
  int n_positives = 0;
  double pred_loss = 0.0;
  std::optional<double> decorr_loss_before;
  std::optional<double> decorr_loss_after;
  std::optional<int> small_clusters;  // clusters with < 2 members
  double w_min = 1.0, w_max = 1.0, w_mean = 1.0, w_std = 0.0;
};

/// Hooks for tests and audits; every callback is optional.
struct TrainObserver {
  // phase is "cluster", "weights", or "head", fired in execution order.
  std::function<void(const std::string& phase, int epoch, int batch)> on_phase;
  // Fired after weight optimization (reweighting runs only).
  std::function<void(int epoch, int batch, const MatchedBatch& batch_data, double decorr_before,
                     double decorr_after)>
      on_batch_weights;
  // Forwarded to every optimize_weights call.
  WeightStepCallback on_weight_step;
};

struct TrainResult {
  DetectionHead head;
  std::vector<BatchLogRecord> log;
};

/// Image-index batches for the whole run: schedule[e][b] lists the images
/// of batch b in epoch e. Deterministic in the seed; shared by every arm.
std::vector<std::vector<std::vector<int>>> batch_schedule(int n_images, const TrainConfig& cfg);

/// Full training loop. Per batch: resolve targets; when reweighting is
/// enabled fit k-means on the batch, learn decorrelation weights, and apply
/// them; finally take one gradient step on the head against the weighted
/// prediction loss. Throws NumericError (with the batch index) on
/// non-finite losses.
TrainResult train(const SyntheticDataset& dataset, const TrainConfig& cfg,
                  const TrainObserver* observer = nullptr);

/// Scores every proposal of the dataset with the head: score =
/// sigmoid(logit), box = proposal box refined by the predicted deltas.
std::vector<Detection> detect(const SyntheticDataset& dataset, const DetectionHead& head);

}  // namespace rapt
