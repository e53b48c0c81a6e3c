#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rapt/geometry.hpp"
#include "rapt/metrics.hpp"

namespace rapt {

/// Shape of the per-proposal feature tensor, shared by every domain of an
/// experiment.
struct FeatureGeometry {
  int channels = 32;
  int roi_h = 7;
  int roi_w = 7;

  void validate() const;
};

/// Recipe for one synthetic domain. Relevant channels carry the label and
/// box-offset signal; irrelevant channels carry a unit-variance confound
/// whose correlation with the label is rho (it flips sign across domains
/// when rho does). Channels in neither set are pure noise.
struct DomainSpec {
  std::string name;
  double rho = 0.0;
  int n_images = 0;
  int proposals_per_image = 8;
  int gts_per_image = 3;
  double positive_fraction = 0.5;
  double noise_sigma = 1.0;      // per-channel noise on relevant channels
  double bin_noise_sigma = 0.1;  // per-bin jitter on every channel
  std::vector<int> relevant_channels;
  std::vector<int> irrelevant_channels;
  int image_w = 640;
  int image_h = 480;
  std::uint64_t seed = 0;

  void validate(const FeatureGeometry& geometry) const;  // throws ConfigError
};

struct SyntheticImage {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthBox> gts;
  std::vector<Proposal> proposals;
};

struct SyntheticDataset {
  FeatureGeometry geometry;
  std::vector<SyntheticImage> images;

  std::int64_t n_images() const { return static_cast<std::int64_t>(images.size()); }
  std::int64_t n_proposals() const;
  std::vector<GroundTruthBox> all_gts() const;
};

/// Deterministic domain generation: ground truths at random positions,
/// positives as shift-jittered copies of them (at most 15% of the box size,
/// which keeps IoU with the source above 0.5), negatives as random boxes
/// away from every ground truth.
SyntheticDataset generate_domain(const DomainSpec& spec, const FeatureGeometry& geometry);

struct DgodSplit {
  SyntheticDataset train;  // merged pool, no domain identifiers, re-numbered ids
  SyntheticDataset test;
};

/// Generates every training domain, merges them into one pool with fresh
/// sequential image ids (the training side never sees domain labels), and
/// generates the held-out test domain.
DgodSplit generate_dgod_split(const std::vector<DomainSpec>& train_specs,
                              const DomainSpec& test_spec, const FeatureGeometry& geometry);

}  // namespace rapt
