#pragma once

#include <cstdint>
#include <vector>

#include "rapt/geometry.hpp"

namespace rapt {

/// Concatenated per-proposal descriptor used by k-means:
///   [cx/img_w, cy/img_h, log(w/img_w), log(h/img_h) ; pooled feature ; flattened mask]
/// Block boundaries are (4, 4+C, 4+C+H*W).
using ClusterDescriptor = std::vector<double>;

/// Builds the raw (unscaled) descriptor for one proposal.
ClusterDescriptor build_descriptor(const Proposal& p, const PooledFeature& pooled,
                                   int image_w, int image_h);

/// Rescales each descriptor block in place so that the summed per-entry
/// variance of the block over the batch is 1. Blocks with zero variance
/// are left untouched. Equalizes the influence of the box, feature, and
/// mask blocks on the k-means metric.
void scale_descriptor_blocks(std::vector<ClusterDescriptor>& descriptors,
                             int c_roi, int mask_len);

struct ClusterModel {
  int k = 0;
  int dim = 0;
  std::vector<double> centroids;  // row-major k x dim

  const double* centroid(int i) const { return centroids.data() + static_cast<std::size_t>(i) * dim; }
};

struct ClusterAssignment {
  std::vector<int> labels;  // one per proposal, in [0, k)
  std::vector<int> counts;  // size k, sums to labels.size()

  int k() const { return static_cast<int>(counts.size()); }
  int size() const { return static_cast<int>(labels.size()); }
};

/// Lloyd's algorithm with k-means++ seeding. Deterministic given the seed.
/// Stops when assignments are stable or after max_iters sweeps. Throws
/// ConfigError when k exceeds the number of points or k < 1.
/// If `distortion_trace` is non-null, the within-cluster squared distortion
/// after each centroid update is appended to it. If `final_labels` is
/// non-null it receives the assignment the fit converged to.
ClusterModel kmeans_fit(const std::vector<ClusterDescriptor>& descriptors, int k,
                        int max_iters, std::uint64_t seed,
                        std::vector<double>* distortion_trace = nullptr,
                        std::vector<int>* final_labels = nullptr);

/// Nearest-centroid assignment (squared Euclidean, ties break to the lowest
/// cluster index) plus per-cluster counts.
ClusterAssignment assign(const ClusterModel& model,
                         const std::vector<ClusterDescriptor>& descriptors);

}  // namespace rapt
