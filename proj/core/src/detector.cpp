#include "rapt/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

namespace rapt {

DetectionHead DetectionHead::zeros(int channels) {
  DetectionHead h;
  h.channels = channels;
  h.cls.assign(channels + 1, 0.0);
  h.reg.assign(4 * (channels + 1), 0.0);
  return h;
}

double DetectionHead::logit(const PooledFeature& z) const {
  double v = cls[channels];
  for (int c = 0; c < channels; ++c) v += cls[c] * z[c];
  return v;
}

std::array<double, 4> DetectionHead::deltas(const PooledFeature& z) const {
  std::array<double, 4> out{};
  const int stride = channels + 1;
  for (int d = 0; d < 4; ++d) {
    const double* row = reg.data() + d * stride;
    double v = row[channels];
    for (int c = 0; c < channels; ++c) v += row[c] * z[c];
    out[d] = v;
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (batches_per_epoch < 1) throw ConfigError("train.batches_per_epoch: must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(head_lr > 0.0)) throw ConfigError("train.head_lr: must be > 0");
  if (k < 1) throw ConfigError("train.k: must be >= 1");
  if (kmeans_max_iters < 1) throw ConfigError("train.kmeans_max_iters: must be >= 1");
  if (!(match_iou > 0.0 && match_iou < 1.0))
    throw ConfigError("train.match_iou: must be in (0, 1)");
  decorr.validate();
}

int MatchedBatch::positives() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

MatchedBatch match_targets(const std::vector<const Proposal*>& proposals,
                           const std::vector<GroundTruthBox>& gts, double iou_thresh) {
  std::map<std::int64_t, std::vector<const GroundTruthBox*>> gts_by_image;
  for (const auto& g : gts) {
    if (!g.ignore) gts_by_image[g.image_id].push_back(&g);
  }

  MatchedBatch batch;
  batch.proposals = proposals;
  const int n = static_cast<int>(proposals.size());
  batch.labels.assign(n, 0);
  batch.reg_targets.assign(n, {0.0, 0.0, 0.0, 0.0});
  batch.pooled.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Proposal& p = *proposals[i];
    batch.pooled.push_back(spatial_pool(p.roi, p.visibility));
    auto it = gts_by_image.find(p.image_id);
    if (it == gts_by_image.end()) continue;
    const GroundTruthBox* best = nullptr;
    double best_iou = 0.0;
    for (const GroundTruthBox* g : it->second) {
      const double v = iou(p.box, g->box);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best && best_iou >= iou_thresh) {
      batch.labels[i] = 1;
      batch.reg_targets[i] = encode_box_deltas(p.box, best->box);
    }
  }
  batch.weights = SampleWeights::uniform(n);
  return batch;
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double bce(double logit, int target) {
  // max(l,0) - l*t + log(1 + exp(-|l|))
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double weighted_pred_loss(const MatchedBatch& batch, const DetectionHead& head) {
  double loss = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    double term = bce(head.logit(batch.pooled[i]), batch.labels[i]);
    if (batch.labels[i] == 1) {
      const auto pred = head.deltas(batch.pooled[i]);
      for (int d = 0; d < 4; ++d) term += smooth_l1(pred[d] - batch.reg_targets[i][d]);
    }
    loss += batch.weights.values[i] * term;
  }
  return loss;
}

double head_loss_grad(const MatchedBatch& batch, const DetectionHead& head, HeadGrad& grad) {
  const int c = head.channels;
  const int stride = c + 1;
  grad.cls.assign(stride, 0.0);
  grad.reg.assign(4 * stride, 0.0);
  double loss = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    const PooledFeature& z = batch.pooled[i];
    const double w = batch.weights.values[i];
    const double logit = head.logit(z);
    const int y = batch.labels[i];
    loss += w * bce(logit, y);
    const double sig = 1.0 / (1.0 + std::exp(-logit));
    const double dcls = w * (sig - y);
    for (int j = 0; j < c; ++j) grad.cls[j] += dcls * z[j];
    grad.cls[c] += dcls;
    if (y == 1) {
      const auto pred = head.deltas(z);
      for (int d = 0; d < 4; ++d) {
        const double e = pred[d] - batch.reg_targets[i][d];
        loss += w * smooth_l1(e);
        const double de = w * std::clamp(e, -1.0, 1.0);
        double* row = grad.reg.data() + d * stride;
        for (int j = 0; j < c; ++j) row[j] += de * z[j];
        row[c] += de;
      }
    }
  }
  return loss;
}

std::vector<std::vector<std::vector<int>>> batch_schedule(int n_images,
                                                          const TrainConfig& cfg) {
  if (cfg.batch_size > n_images)
    throw ConfigError("train.batch_size: exceeds the number of training images");
  auto engine = make_engine(mix_seed(cfg.seed, 0xBA7C4));
  std::vector<int> order(n_images);
  std::iota(order.begin(), order.end(), 0);
  int pos = n_images;  // force an initial shuffle

  std::vector<std::vector<std::vector<int>>> schedule(cfg.epochs);
  for (int e = 0; e < cfg.epochs; ++e) {
    schedule[e].resize(cfg.batches_per_epoch);
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      if (pos + cfg.batch_size > n_images) {
        std::shuffle(order.begin(), order.end(), engine);
        pos = 0;
      }
      schedule[e][b].assign(order.begin() + pos, order.begin() + pos + cfg.batch_size);
      pos += cfg.batch_size;
    }
  }
  return schedule;
}

namespace {

void weight_stats(const SampleWeights& w, BatchLogRecord& rec) {
  if (w.size() == 0) return;
  double sum = 0.0, sum2 = 0.0;
  rec.w_min = w.values[0];
  rec.w_max = w.values[0];
  for (double v : w.values) {
    rec.w_min = std::min(rec.w_min, v);
    rec.w_max = std::max(rec.w_max, v);
    sum += v;
  }
  rec.w_mean = sum / w.size();
  for (double v : w.values) sum2 += (v - rec.w_mean) * (v - rec.w_mean);
  rec.w_std = std::sqrt(sum2 / w.size());
}

}  // namespace

TrainResult train(const SyntheticDataset& dataset, const TrainConfig& cfg,
                  const TrainObserver* observer) {
  cfg.validate();
  if (dataset.images.empty()) throw ConfigError("train: dataset is empty");
  const int channels = dataset.geometry.channels;

  TrainResult result;
  result.head = DetectionHead::zeros(channels);

  const auto schedule = batch_schedule(static_cast<int>(dataset.images.size()), cfg);
  RFFBankPair banks = sample_rff(cfg.decorr.n_rff, cfg.decorr.seed);

  HeadGrad grad;
  for (int e = 0; e < cfg.epochs; ++e) {
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      // Assemble the batch.
      std::vector<const Proposal*> proposals;
      std::vector<GroundTruthBox> gts;
      for (int img_idx : schedule[e][b]) {
        const SyntheticImage& img = dataset.images[img_idx];
        for (const auto& p : img.proposals) proposals.push_back(&p);
        gts.insert(gts.end(), img.gts.begin(), img.gts.end());
      }
      MatchedBatch batch = match_targets(proposals, gts, cfg.match_iou);

      BatchLogRecord rec;
      rec.epoch = e;
      rec.batch = b;
      rec.n_proposals = batch.size();
      rec.n_positives = batch.positives();

      if (cfg.reweighting_enabled) {
        // Participating subset: all proposals, or positives only.
        std::vector<int> active;
        active.reserve(batch.size());
        for (int i = 0; i < batch.size(); ++i) {
          if (!cfg.foreground_only || batch.labels[i] == 1) active.push_back(i);
        }

        if (static_cast<int>(active.size()) >= 2) {
          if (observer && observer->on_phase) observer->on_phase("cluster", e, b);
          std::map<std::int64_t, std::pair<int, int>> image_sizes;
          for (int img_idx : schedule[e][b]) {
            const SyntheticImage& img = dataset.images[img_idx];
            image_sizes[img.id] = {img.width, img.height};
          }
          std::vector<ClusterDescriptor> descriptors;
          descriptors.reserve(active.size());
          for (int i : active) {
            const auto [iw, ih] = image_sizes.at(batch.proposals[i]->image_id);
            descriptors.push_back(build_descriptor(*batch.proposals[i], batch.pooled[i], iw, ih));
          }
          scale_descriptor_blocks(descriptors, channels,
                                  dataset.geometry.roi_h * dataset.geometry.roi_w);
          const int k_eff = std::min<int>(cfg.k, static_cast<int>(active.size()));
          const ClusterModel model =
              kmeans_fit(descriptors, k_eff, cfg.kmeans_max_iters,
                         mix_seed(cfg.seed, 0xC1u, static_cast<std::uint64_t>(e) * 1'000'003 + b));
          batch.assignment = assign(model, descriptors);

          if (observer && observer->on_phase) observer->on_phase("weights", e, b);
          DecorrConfig dcfg = cfg.decorr;
          if (dcfg.resample_banks_per_batch) {
            banks = sample_rff(dcfg.n_rff,
                               mix_seed(dcfg.seed, 0xBB, static_cast<std::uint64_t>(e) * 1'000'003 + b));
          }
          std::vector<PooledFeature> active_pooled;
          active_pooled.reserve(active.size());
          for (int i : active) active_pooled.push_back(batch.pooled[i]);

          WeightOptResult opt = optimize_weights(active_pooled, batch.assignment, banks, dcfg,
                                                 observer ? observer->on_weight_step : nullptr);
          for (std::size_t a = 0; a < active.size(); ++a)
            batch.weights.values[active[a]] = opt.weights.values[a];

          rec.decorr_loss_before = opt.initial_loss;
          rec.decorr_loss_after = opt.final_loss;
          int small = 0;
          for (int cnt : batch.assignment.counts)
            if (cnt < 2) ++small;
          rec.small_clusters = small;
          if (observer && observer->on_batch_weights)
            observer->on_batch_weights(e, b, batch, opt.initial_loss, opt.final_loss);
        } else {
          rec.decorr_loss_before = 0.0;
          rec.decorr_loss_after = 0.0;
          rec.small_clusters = 0;
        }
      }

      if (observer && observer->on_phase) observer->on_phase("head", e, b);
      const double loss = head_loss_grad(batch, result.head, grad);
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite prediction loss at epoch " + std::to_string(e) +
                           " batch " + std::to_string(b));
      rec.pred_loss = loss;
      weight_stats(batch.weights, rec);
      const int stride = channels + 1;
      for (int j = 0; j < stride; ++j) result.head.cls[j] -= cfg.head_lr * grad.cls[j];
      for (int j = 0; j < 4 * stride; ++j) result.head.reg[j] -= cfg.head_lr * grad.reg[j];

      result.log.push_back(rec);
    }
  }
  return result;
}

std::vector<Detection> detect(const SyntheticDataset& dataset, const DetectionHead& head) {
  std::vector<Detection> out;
  for (const auto& img : dataset.images) {
    for (const auto& p : img.proposals) {
      const PooledFeature z = spatial_pool(p.roi, p.visibility);
      Detection d;
      d.image_id = img.id;
      const double logit = head.logit(z);
      d.score = 1.0 / (1.0 + std::exp(-logit));
      d.box = apply_box_deltas(p.box, head.deltas(z));
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace rapt
