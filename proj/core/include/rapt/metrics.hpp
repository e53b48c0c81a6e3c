#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rapt/geometry.hpp"

namespace rapt {

struct Detection {
  std::int64_t image_id = 0;
  BoundingBox box;
  double score = 0.0;
  int category_id = 1;
};

struct GroundTruthBox {
  std::int64_t image_id = 0;
  BoundingBox box;
  double height = 0.0;      // y2 - y1 in pixels
  double visibility = 1.0;  // visible fraction in [0, 1]
  bool ignore = false;
  int category_id = 1;
};

/// Height/visibility window selecting which ground truths count for a
/// metric. Out-of-window boxes are treated as ignore regions, not removed.
struct EvalSplit {
  std::string name;
  double height_lo = 0.0;
  double height_hi = std::numeric_limits<double>::infinity();
  double vis_lo = 0.0;
  double vis_hi = 1.0;

  bool contains(const GroundTruthBox& g) const {
    return g.height >= height_lo && g.height <= height_hi && g.visibility >= vis_lo &&
           g.visibility <= vis_hi;
  }
};

/// The four canonical pedestrian evaluation splits.
EvalSplit split_reasonable();  // height [50, inf), visibility [0.65, 1]
EvalSplit split_small();       // height [50, 75],  visibility [0.65, 1]
EvalSplit split_heavy();       // height [50, inf), visibility [0.2, 0.65]
EvalSplit split_all();         // height [20, inf), visibility [0.2, 1]
std::optional<EvalSplit> split_by_name(const std::string& name);

enum class DetFlag { kTruePositive, kFalsePositive, kIgnored };

/// Matching outcome for one image. Detections are reported in descending
/// score order (ties keep input order); gt_matched is aligned to the input
/// ground-truth order.
struct MatchResult {
  std::vector<int> det_order;       // indices into the input detections, ranked
  std::vector<DetFlag> det_flags;   // aligned to det_order
  std::vector<bool> gt_matched;     // aligned to input gts (false for ignored)
};

/// Greedy score-descending matching: each detection takes the highest-IoU
/// not-yet-matched non-ignored GT with IoU >= iou_thresh; failing that, any
/// ignored GT with IoU >= iou_thresh absorbs it (flag kIgnored, and ignored
/// GTs may absorb any number of detections); otherwise it is a false
/// positive. Both inputs must belong to a single image.
MatchResult greedy_match(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gts, double iou_thresh);

/// Returns a copy of the ground truths with every box outside the split
/// re-flagged as ignore.
std::vector<GroundTruthBox> filter_split(const std::vector<GroundTruthBox>& gts,
                                         const EvalSplit& split);

struct MetricOptions {
  double iou_thresh = 0.5;
  int max_dets_per_image = 100;
  bool average_iou_50_95 = false;  // mAP over IoU 0.50:0.05:0.95 instead of a single threshold
};

/// Area under the precision-recall curve (all-point interpolation with the
/// precision envelope), computed over the split's in-window ground truths.
/// Empty splits (zero in-window GTs) yield nullopt.
std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts,
                                        const EvalSplit& split,
                                        const MetricOptions& opts = {});

/// Mean of per-category average precision over categories with at least one
/// in-split ground truth.
std::optional<double> mean_average_precision(const std::vector<Detection>& dets,
                                             const std::vector<GroundTruthBox>& gts,
                                             const EvalSplit& split,
                                             const MetricOptions& opts = {});

/// Log-average miss rate over FPPI in [1e-2, 1e0]: miss rate is sampled at
/// 9 log-spaced FPPI references (taking the operating point with the
/// largest FPPI <= each reference, miss rate 1.0 if none) and averaged in
/// log space with miss rates clamped to at least 1e-10. n_images is the
/// total image count of the evaluated set (FPPI denominator).
std::optional<double> log_avg_miss_rate(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts,
                                        std::int64_t n_images, const EvalSplit& split,
                                        const MetricOptions& opts = {});

struct DatasetStats {
  double objects_per_image = 0.0;
  double overlaps_per_image = 0.0;
};

/// Instance-density statistics: non-ignored boxes per image and same-image
/// box pairs with IoU above overlap_iou per image.
DatasetStats dataset_stats(const std::vector<GroundTruthBox>& gts, std::int64_t n_images,
                           double overlap_iou = 0.5);

}  // namespace rapt
