#include "rapt/clustering.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

namespace rapt {

namespace {

double sq_dist(const double* a, const double* b, int dim) {
  double d = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

ClusterDescriptor build_descriptor(const Proposal& p, const PooledFeature& pooled,
                                   int image_w, int image_h) {
  ClusterDescriptor d;
  d.reserve(4 + pooled.size() + p.visibility.grid.size());
  d.push_back(p.box.cx() / image_w);
  d.push_back(p.box.cy() / image_h);
  d.push_back(std::log(p.box.width() / image_w));
  d.push_back(std::log(p.box.height() / image_h));
  d.insert(d.end(), pooled.begin(), pooled.end());
  for (std::uint8_t v : p.visibility.grid) d.push_back(static_cast<double>(v));
  return d;
}

void scale_descriptor_blocks(std::vector<ClusterDescriptor>& descriptors,
                             int c_roi, int mask_len) {
  if (descriptors.empty()) return;
  const int dim = static_cast<int>(descriptors.front().size());
  const int starts[4] = {0, 4, 4 + c_roi, 4 + c_roi + mask_len};
  if (starts[3] != dim) throw ConfigError("descriptor length does not match block layout");

  const std::size_t n = descriptors.size();
  for (int b = 0; b < 3; ++b) {
    double var_sum = 0.0;
    for (int j = starts[b]; j < starts[b + 1]; ++j) {
      double mean = 0.0;
      for (const auto& d : descriptors) mean += d[j];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& d : descriptors) {
        const double t = d[j] - mean;
        var += t * t;
      }
      var_sum += var / static_cast<double>(n);
    }
    if (var_sum <= 0.0) continue;
    const double scale = 1.0 / std::sqrt(var_sum);
    for (auto& d : descriptors)
      for (int j = starts[b]; j < starts[b + 1]; ++j) d[j] *= scale;
  }
}

ClusterModel kmeans_fit(const std::vector<ClusterDescriptor>& descriptors, int k,
                        int max_iters, std::uint64_t seed,
                        std::vector<double>* distortion_trace,
                        std::vector<int>* final_labels) {
  const int n = static_cast<int>(descriptors.size());
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (k > n) throw ConfigError("kmeans: k exceeds number of points");
  if (max_iters < 1) throw ConfigError("kmeans: max_iters must be >= 1");
  const int dim = static_cast<int>(descriptors.front().size());

  ClusterModel model;
  model.k = k;
  model.dim = dim;
  model.centroids.resize(static_cast<std::size_t>(k) * dim);

  auto engine = make_engine(seed);

  // k-means++ seeding: first center uniform, the rest D^2-weighted.
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  {
    std::uniform_int_distribution<int> first(0, n - 1);
    int idx = first(engine);
    std::copy(descriptors[idx].begin(), descriptors[idx].end(), model.centroids.begin());
    for (int c = 1; c < k; ++c) {
      const double* last = model.centroid(c - 1);
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        min_d2[i] = std::min(min_d2[i], sq_dist(descriptors[i].data(), last, dim));
        total += min_d2[i];
      }
      int pick = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(engine);
        double acc = 0.0;
        pick = n - 1;
        for (int i = 0; i < n; ++i) {
          acc += min_d2[i];
          if (acc >= target) {
            pick = i;
            break;
          }
        }
      } else {
        // All remaining points coincide with chosen centers.
        std::uniform_int_distribution<int> any(0, n - 1);
        pick = any(engine);
      }
      std::copy(descriptors[pick].begin(), descriptors[pick].end(),
                model.centroids.begin() + static_cast<std::size_t>(c) * dim);
    }
  }

  std::vector<int> labels(n, -1);
  std::vector<int> counts(k, 0);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(descriptors[i].data(), model.centroid(0), dim);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(descriptors[i].data(), model.centroid(c), dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
      counts[best]++;
      double* s = sums.data() + static_cast<std::size_t>(best) * dim;
      for (int j = 0; j < dim; ++j) s[j] += descriptors[i][j];
    }

    // Empty clusters adopt the point farthest from its current centroid.
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;
        const double d = sq_dist(descriptors[i].data(), model.centroid(labels[i]), dim);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      const int old = labels[far];
      counts[old]--;
      counts[c] = 1;
      double* so = sums.data() + static_cast<std::size_t>(old) * dim;
      double* sc = sums.data() + static_cast<std::size_t>(c) * dim;
      for (int j = 0; j < dim; ++j) {
        so[j] -= descriptors[far][j];
        sc[j] = descriptors[far][j];
      }
      labels[far] = c;
      changed = true;
    }

    for (int c = 0; c < k; ++c) {
      double* ctr = model.centroids.data() + static_cast<std::size_t>(c) * dim;
      const double* s = sums.data() + static_cast<std::size_t>(c) * dim;
      for (int j = 0; j < dim; ++j) ctr[j] = s[j] / counts[c];
    }

    if (distortion_trace) {
      double dist = 0.0;
      for (int i = 0; i < n; ++i)
        dist += sq_dist(descriptors[i].data(), model.centroid(labels[i]), dim);
      distortion_trace->push_back(dist);
    }

    if (!changed) break;
  }
  if (final_labels) *final_labels = labels;
  return model;
}

ClusterAssignment assign(const ClusterModel& model,
                         const std::vector<ClusterDescriptor>& descriptors) {
  ClusterAssignment out;
  out.labels.resize(descriptors.size());
  out.counts.assign(model.k, 0);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (static_cast<int>(descriptors[i].size()) != model.dim)
      throw ConfigError("assign: descriptor length does not match model");
    int best = 0;
    double best_d = sq_dist(descriptors[i].data(), model.centroid(0), model.dim);
    for (int c = 1; c < model.k; ++c) {
      const double d = sq_dist(descriptors[i].data(), model.centroid(c), model.dim);
      if (d < best_d) {  // strict: ties keep the lowest index
        best_d = d;
        best = c;
      }
    }
    out.labels[i] = best;
    out.counts[best]++;
  }
  return out;
}

}  // namespace rapt
