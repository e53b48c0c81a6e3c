#include "rapt/clustering.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

using namespace rapt;

namespace {

Proposal make_proposal(const BoundingBox& box, int channels, int h, int w) {
  Proposal p;
  p.box = box;
  p.roi = RoIFeature::zeros(channels, h, w);
  p.visibility = VisibilityMask::all_ones(h, w);
  return p;
}

std::vector<ClusterDescriptor> random_descriptors(int n, int dim, std::uint64_t seed) {
  auto eng = make_engine(seed);
  std::normal_distribution<double> gauss;
  std::vector<ClusterDescriptor> out(n, ClusterDescriptor(dim));
  for (auto& d : out)
    for (auto& v : d) v = gauss(eng);
  return out;
}

// Brute-force oracle: nearest centroid by exhaustive scan.
int nearest_centroid(const ClusterModel& model, const ClusterDescriptor& d) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < model.k; ++c) {
    double dist = 0.0;
    for (int j = 0; j < model.dim; ++j) {
      const double t = d[j] - model.centroid(c)[j];
      dist += t * t;
    }
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  return best;
}

}  // namespace

TEST(BuildDescriptor, Deterministic) {
  const Proposal p = make_proposal({10, 20, 50, 100}, 3, 2, 2);
  const PooledFeature pooled{0.5, -1.0, 2.0};
  const auto a = build_descriptor(p, pooled, 640, 480);
  const auto b = build_descriptor(p, pooled, 640, 480);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 4u + 3u + 4u);
}

TEST(BuildDescriptor, FullImageBoxCenters) {
  const Proposal p = make_proposal({0, 0, 640, 480}, 1, 2, 2);
  const auto d = build_descriptor(p, PooledFeature{0.0}, 640, 480);
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], 0.5);
  EXPECT_DOUBLE_EQ(d[2], 0.0);  // log(1)
  EXPECT_DOUBLE_EQ(d[3], 0.0);
}

TEST(BuildDescriptor, MaskFlattening) {
  Proposal p = make_proposal({0, 0, 10, 10}, 1, 2, 2);
  p.visibility.grid = {1, 0, 0, 0};
  const auto d = build_descriptor(p, PooledFeature{0.0}, 100, 100);
  ASSERT_EQ(d.size(), 9u);
  EXPECT_DOUBLE_EQ(d[5], 1.0);
  EXPECT_DOUBLE_EQ(d[6], 0.0);
  EXPECT_DOUBLE_EQ(d[7], 0.0);
  EXPECT_DOUBLE_EQ(d[8], 0.0);
}

TEST(ScaleDescriptorBlocks, EqualizesBlockVariance) {
  auto eng = make_engine(5);
  std::normal_distribution<double> gauss;
  const int c = 3, mask_len = 4;
  std::vector<ClusterDescriptor> ds(200, ClusterDescriptor(4 + c + mask_len));
  for (auto& d : ds) {
    for (int j = 0; j < 4; ++j) d[j] = 100.0 * gauss(eng);
    for (int j = 4; j < 4 + c; ++j) d[j] = 0.01 * gauss(eng);
    for (int j = 4 + c; j < 4 + c + mask_len; ++j) d[j] = gauss(eng) > 0 ? 1.0 : 0.0;
  }
  scale_descriptor_blocks(ds, c, mask_len);

  const int starts[4] = {0, 4, 4 + c, 4 + c + mask_len};
  for (int b = 0; b < 3; ++b) {
    double var_sum = 0.0;
    for (int j = starts[b]; j < starts[b + 1]; ++j) {
      double mean = 0.0;
      for (const auto& d : ds) mean += d[j];
      mean /= ds.size();
      double var = 0.0;
      for (const auto& d : ds) var += (d[j] - mean) * (d[j] - mean);
      var_sum += var / ds.size();
    }
    EXPECT_NEAR(var_sum, 1.0, 1e-9);
  }
}

TEST(ScaleDescriptorBlocks, ConstantBlockUntouched) {
  std::vector<ClusterDescriptor> ds(10, ClusterDescriptor(4 + 2 + 1, 0.0));
  for (std::size_t i = 0; i < ds.size(); ++i) ds[i][4] = static_cast<double>(i);
  scale_descriptor_blocks(ds, 2, 1);
  for (const auto& d : ds) {
    EXPECT_DOUBLE_EQ(d[0], 0.0);  // constant box block unchanged
    EXPECT_DOUBLE_EQ(d[6], 0.0);  // constant mask block unchanged
  }
}

TEST(KMeans, DegenerateKEqualsN) {
  const auto ds = random_descriptors(12, 5, 9);
  std::vector<double> trace;
  const auto model = kmeans_fit(ds, 12, 50, 1, &trace);
  const auto a = assign(model, ds);
  double distortion = 0.0;
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double t = ds[i][j] - model.centroid(a.labels[i])[j];
      distortion += t * t;
    }
  }
  EXPECT_NEAR(distortion, 0.0, 1e-18);
}

TEST(KMeans, SingleClusterIsMean) {
  const auto ds = random_descriptors(40, 3, 2);
  const auto model = kmeans_fit(ds, 1, 50, 1);
  for (int j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (const auto& d : ds) mean += d[j];
    mean /= ds.size();
    EXPECT_NEAR(model.centroid(0)[j], mean, 1e-12);
  }
}

TEST(KMeans, RecoversWellSeparatedBlobs) {
  auto eng = make_engine(17);
  std::normal_distribution<double> gauss(0.0, 0.1);
  std::vector<ClusterDescriptor> ds;
  std::vector<int> truth;
  for (int i = 0; i < 60; ++i) {
    const int blob = i % 2;
    const double cx = blob == 0 ? 0.0 : 100.0;
    ds.push_back({cx + gauss(eng), cx + gauss(eng)});
    truth.push_back(blob);
  }
  const auto model = kmeans_fit(ds, 2, 50, 3);
  const auto a = assign(model, ds);
  // Verify against brute-force blob-mean classification.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.size(); ++j) {
      const bool same_truth = truth[i] == truth[j];
      const bool same_label = a.labels[i] == a.labels[j];
      EXPECT_EQ(same_truth, same_label);
    }
  }
}

TEST(KMeans, RejectsKGreaterThanN) {
  const auto ds = random_descriptors(5, 2, 1);
  EXPECT_THROW(kmeans_fit(ds, 6, 10, 1), ConfigError);
  EXPECT_THROW(kmeans_fit(ds, 0, 10, 1), ConfigError);
}

TEST(KMeans, DistortionNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = random_descriptors(100, 6, seed + 100);
    std::vector<double> trace;
    kmeans_fit(ds, 7, 50, seed, &trace);
    ASSERT_GE(trace.size(), 1u);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      EXPECT_LE(trace[i], trace[i - 1] + 1e-9) << "iteration " << i;
    }
  }
}

TEST(KMeans, AssignIsIdempotentOnFitLabels) {
  const auto ds = random_descriptors(80, 4, 21);
  std::vector<int> fit_labels;
  const auto model = kmeans_fit(ds, 5, 100, 2, nullptr, &fit_labels);
  const auto a = assign(model, ds);
  EXPECT_EQ(a.labels, fit_labels);
}

TEST(KMeans, Deterministic) {
  const auto ds = random_descriptors(64, 4, 33);
  const auto m1 = kmeans_fit(ds, 6, 50, 77);
  const auto m2 = kmeans_fit(ds, 6, 50, 77);
  EXPECT_EQ(m1.centroids, m2.centroids);
  const auto a1 = assign(m1, ds);
  const auto a2 = assign(m2, ds);
  EXPECT_EQ(a1.labels, a2.labels);
}

TEST(Assign, ExactCentroidMatch) {
  const auto ds = random_descriptors(10, 3, 41);
  const auto model = kmeans_fit(ds, 10, 10, 1);
  // A point equal to centroid 3 gets label 3.
  ClusterDescriptor probe(model.centroid(3), model.centroid(3) + model.dim);
  const auto a = assign(model, {probe});
  EXPECT_EQ(a.labels[0], 3);
}

TEST(Assign, TieBreaksToLowestIndex) {
  ClusterModel model;
  model.k = 3;
  model.dim = 1;
  model.centroids = {-1.0, 1.0, 3.0};  // point 0.0 is equidistant from 0 and 1
  const auto a = assign(model, {ClusterDescriptor{0.0}});
  EXPECT_EQ(a.labels[0], 0);
}

TEST(Assign, MatchesBruteForceOracle) {
  const auto ds = random_descriptors(200, 5, 55);
  const auto model = kmeans_fit(ds, 9, 30, 5);
  const auto probes = random_descriptors(300, 5, 56);
  const auto a = assign(model, probes);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    EXPECT_EQ(a.labels[i], nearest_centroid(model, probes[i]));
  }
}

TEST(Assign, CountsMatchLabels) {
  const auto ds = random_descriptors(150, 4, 61);
  const auto model = kmeans_fit(ds, 6, 30, 9);
  const auto a = assign(model, ds);
  std::vector<int> counts(6, 0);
  for (int l : a.labels) counts[l]++;
  EXPECT_EQ(a.counts, counts);
  int total = 0;
  for (int c : a.counts) total += c;
  EXPECT_EQ(total, 150);
}
