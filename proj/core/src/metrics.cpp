#include "rapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace rapt {

EvalSplit split_reasonable() { return {"Reasonable", 50.0, std::numeric_limits<double>::infinity(), 0.65, 1.0}; }
EvalSplit split_small() { return {"Small", 50.0, 75.0, 0.65, 1.0}; }
EvalSplit split_heavy() { return {"Heavy", 50.0, std::numeric_limits<double>::infinity(), 0.2, 0.65}; }
EvalSplit split_all() { return {"All", 20.0, std::numeric_limits<double>::infinity(), 0.2, 1.0}; }

std::optional<EvalSplit> split_by_name(const std::string& name) {
  if (name == "Reasonable") return split_reasonable();
  if (name == "Small") return split_small();
  if (name == "Heavy") return split_heavy();
  if (name == "All") return split_all();
  return std::nullopt;
}

MatchResult greedy_match(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gts, double iou_thresh) {
  MatchResult res;
  res.det_order.resize(dets.size());
  std::iota(res.det_order.begin(), res.det_order.end(), 0);
  std::stable_sort(res.det_order.begin(), res.det_order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });
  res.det_flags.assign(dets.size(), DetFlag::kFalsePositive);
  res.gt_matched.assign(gts.size(), false);

  for (std::size_t r = 0; r < res.det_order.size(); ++r) {
    const Detection& d = dets[res.det_order[r]];
    int best_gt = -1;
    double best_iou = -1.0;  // ties keep the lowest GT index
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].ignore || res.gt_matched[g]) continue;
      if (gts[g].category_id != d.category_id) continue;
      const double v = iou(d.box, gts[g].box);
      if (v < iou_thresh) continue;
      if (v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      res.gt_matched[best_gt] = true;
      res.det_flags[r] = DetFlag::kTruePositive;
      continue;
    }
    // Ignored GTs absorb detections without consuming a match slot.
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gts[g].ignore) continue;
      if (gts[g].category_id != d.category_id) continue;
      if (iou(d.box, gts[g].box) >= iou_thresh) {
        res.det_flags[r] = DetFlag::kIgnored;
        break;
      }
    }
  }
  return res;
}

std::vector<GroundTruthBox> filter_split(const std::vector<GroundTruthBox>& gts,
                                         const EvalSplit& split) {
  std::vector<GroundTruthBox> out = gts;
  for (auto& g : out) {
    if (!split.contains(g)) g.ignore = true;
  }
  return out;
}

namespace {

// One globally ranked detection with its matching outcome.
struct RankedDet {
  double score;
  std::int64_t image_id;
  int input_pos;
  bool tp;
};

// Matches every image independently, applies the per-image retention cap,
// and returns the globally ranked TP/FP list plus the in-split GT count.
struct RankedOutcome {
  std::vector<RankedDet> ranked;
  std::int64_t n_gt = 0;
};

RankedOutcome rank_detections(const std::vector<Detection>& dets,
                              const std::vector<GroundTruthBox>& gts,
                              const EvalSplit& split, const MetricOptions& opts,
                              double iou_thresh) {
  std::map<std::int64_t, std::vector<int>> dets_by_image;
  for (std::size_t i = 0; i < dets.size(); ++i)
    dets_by_image[dets[i].image_id].push_back(static_cast<int>(i));
  std::map<std::int64_t, std::vector<GroundTruthBox>> gts_by_image;
  for (const auto& g : gts) gts_by_image[g.image_id].push_back(g);

  RankedOutcome out;
  for (auto& [img, g] : gts_by_image) {
    g = filter_split(g, split);
    for (const auto& box : g)
      if (!box.ignore) out.n_gt += 1;
  }

  for (auto& [img, idxs] : dets_by_image) {
    // Retain at most max_dets_per_image by score (ties keep input order).
    std::stable_sort(idxs.begin(), idxs.end(),
                     [&](int a, int b) { return dets[a].score > dets[b].score; });
    if (opts.max_dets_per_image > 0 &&
        static_cast<int>(idxs.size()) > opts.max_dets_per_image)
      idxs.resize(opts.max_dets_per_image);

    std::vector<Detection> img_dets;
    img_dets.reserve(idxs.size());
    for (int i : idxs) img_dets.push_back(dets[i]);
    static const std::vector<GroundTruthBox> kNoGts;
    auto it = gts_by_image.find(img);
    const auto& img_gts = it == gts_by_image.end() ? kNoGts : it->second;
    const MatchResult m = greedy_match(img_dets, img_gts, iou_thresh);
    for (std::size_t r = 0; r < m.det_order.size(); ++r) {
      if (m.det_flags[r] == DetFlag::kIgnored) continue;
      out.ranked.push_back({img_dets[m.det_order[r]].score, img,
                            idxs[m.det_order[r]],
                            m.det_flags[r] == DetFlag::kTruePositive});
    }
  }

  std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const RankedDet& a, const RankedDet& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return a.input_pos < b.input_pos;
  });
  return out;
}

double ap_from_ranked(const std::vector<RankedDet>& ranked, std::int64_t n_gt) {
  // All-point interpolation: one PR point per rank, precision envelope from
  // the right, summed over recall increments.
  std::vector<double> precision, recall;
  std::int64_t tp = 0, fp = 0;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  for (const auto& d : ranked) {
    if (d.tp)
      ++tp;
    else
      ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  double ap = 0.0;
  double env = 0.0;
  for (std::size_t i = ranked.size(); i-- > 0;) {
    env = std::max(env, precision[i]);
    const double prev_recall = i == 0 ? 0.0 : recall[i - 1];
    ap += (recall[i] - prev_recall) * env;
  }
  return ap;
}

}  // namespace

std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts,
                                        const EvalSplit& split, const MetricOptions& opts) {
  std::vector<double> thresholds;
  if (opts.average_iou_50_95) {
    for (double t = 0.50; t < 0.951; t += 0.05) thresholds.push_back(t);
  } else {
    thresholds.push_back(opts.iou_thresh);
  }
  double sum = 0.0;
  for (double t : thresholds) {
    const RankedOutcome out = rank_detections(dets, gts, split, opts, t);
    if (out.n_gt == 0) return std::nullopt;
    sum += ap_from_ranked(out.ranked, out.n_gt);
  }
  return sum / static_cast<double>(thresholds.size());
}

std::optional<double> mean_average_precision(const std::vector<Detection>& dets,
                                             const std::vector<GroundTruthBox>& gts,
                                             const EvalSplit& split,
                                             const MetricOptions& opts) {
  std::map<int, std::vector<GroundTruthBox>> gts_by_cat;
  for (const auto& g : gts) gts_by_cat[g.category_id].push_back(g);
  std::map<int, std::vector<Detection>> dets_by_cat;
  for (const auto& d : dets) dets_by_cat[d.category_id].push_back(d);

  double sum = 0.0;
  int n = 0;
  for (const auto& [cat, cat_gts] : gts_by_cat) {
    static const std::vector<Detection> kNoDets;
    auto it = dets_by_cat.find(cat);
    const auto ap =
        average_precision(it == dets_by_cat.end() ? kNoDets : it->second, cat_gts, split, opts);
    if (!ap) continue;  // no in-split GTs for this category
    sum += *ap;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::optional<double> log_avg_miss_rate(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts,
                                        std::int64_t n_images, const EvalSplit& split,
                                        const MetricOptions& opts) {
  const RankedOutcome out = rank_detections(dets, gts, split, opts, opts.iou_thresh);
  if (out.n_gt == 0 || n_images < 1) return std::nullopt;

  // Operating points at every distinct score threshold (keep score >= t):
  // lowering the threshold can only add detections, so prefix sums of the
  // ranked list give the exact sweep.
  struct Point {
    double fppi;
    double mr;
  };
  std::vector<Point> curve;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < out.ranked.size(); ++i) {
    if (out.ranked[i].tp)
      ++tp;
    else
      ++fp;
    const bool boundary =
        i + 1 == out.ranked.size() || out.ranked[i + 1].score != out.ranked[i].score;
    if (boundary) {
      curve.push_back({static_cast<double>(fp) / static_cast<double>(n_images),
                       1.0 - static_cast<double>(tp) / static_cast<double>(out.n_gt)});
    }
  }

  double log_sum = 0.0;
  for (int k = 0; k <= 8; ++k) {
    const double ref = std::pow(10.0, -2.0 + 0.25 * k);
    double mr = 1.0;
    double best_fppi = -1.0;
    for (const Point& pt : curve) {
      if (pt.fppi > ref) continue;
      if (pt.fppi > best_fppi) {
        best_fppi = pt.fppi;
        mr = pt.mr;
      } else if (pt.fppi == best_fppi) {
        mr = std::min(mr, pt.mr);
      }
    }
    log_sum += std::log(std::max(mr, 1e-10));
  }
  return std::exp(log_sum / 9.0);
}

DatasetStats dataset_stats(const std::vector<GroundTruthBox>& gts, std::int64_t n_images,
                           double overlap_iou) {
  DatasetStats stats;
  if (n_images <= 0) return stats;
  std::map<std::int64_t, std::vector<const GroundTruthBox*>> by_image;
  std::int64_t objects = 0;
  for (const auto& g : gts) {
    if (g.ignore) continue;
    by_image[g.image_id].push_back(&g);
    ++objects;
  }
  std::int64_t overlaps = 0;
  for (const auto& [img, boxes] : by_image) {
    for (std::size_t a = 0; a < boxes.size(); ++a)
      for (std::size_t b = a + 1; b < boxes.size(); ++b)
        if (iou(boxes[a]->box, boxes[b]->box) > overlap_iou) ++overlaps;
  }
  stats.objects_per_image = static_cast<double>(objects) / static_cast<double>(n_images);
  stats.overlaps_per_image = static_cast<double>(overlaps) / static_cast<double>(n_images);
  return stats;
}

}  // namespace rapt
