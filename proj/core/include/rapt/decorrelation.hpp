#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "rapt/clustering.hpp"
#include "rapt/geometry.hpp"
#include "rapt/rff.hpp"

namespace rapt {

/// How the per-cluster cross-covariance treats the sample weight.
/// kWeightScaled multiplies the weight into the random feature before
/// centering: (w*r(z_p) - rbar)^T (w*s(z_q) - sbar). kConventional is the
/// usual weighted covariance: w * (r(z_p) - rbar)^T (s(z_q) - sbar). Both
/// use the weighted means rbar, sbar with divisor N_k.
enum class CovForm { kWeightScaled, kConventional };

struct DecorrConfig {
  int n_rff = 5;
  int pair_budget = 0;  // 0 = all channel pairs, otherwise a seeded subsample
  int steps = 20;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  CovForm cov_form = CovForm::kWeightScaled;
  bool resample_banks_per_batch = false;

  void validate() const;  // throws ConfigError
};

/// Positive per-proposal weights. Feasible weights satisfy, for every
/// cluster k, sum of member weights == N_k (the cluster size).
struct SampleWeights {
  std::vector<double> values;

  static SampleWeights uniform(int n) { return SampleWeights{std::vector<double>(n, 1.0)}; }
  int size() const { return static_cast<int>(values.size()); }
};

/// True when every weight is strictly positive and every per-cluster sum
/// matches the cluster size within rel_tol relative error.
bool weights_satisfy_constraint(const SampleWeights& w, const ClusterAssignment& assignment,
                                double rel_tol = 1e-6);

/// Rescales raw positive values so each cluster's weights sum to its size.
SampleWeights project_to_weight_space(const std::vector<double>& raw,
                                      const ClusterAssignment& assignment);

/// Deterministic channel-pair list: all p < q, or a seeded subsample of
/// `budget` pairs (returned sorted) when 0 < budget < total.
std::vector<std::pair<int, int>> make_pair_set(int channels, int budget, std::uint64_t seed);

/// Weighted cross-covariance between the RFF embeddings of channels zp and
/// zq over the members of cluster k. Returns a row-major n_rff x n_rff
/// matrix. Throws ConfigError when cluster k has fewer than 2 members.
std::vector<double> weighted_cross_cov(const std::vector<double>& zp,
                                       const std::vector<double>& zq,
                                       const SampleWeights& w,
                                       const ClusterAssignment& assignment, int k,
                                       const RFFBankPair& banks,
                                       CovForm form = CovForm::kWeightScaled);

/// Sum over clusters (size >= 2) and channel pairs of the squared Frobenius
/// norm of the weighted cross-covariance. Smaller clusters contribute 0.
double decorr_loss(const std::vector<PooledFeature>& pooled, const SampleWeights& w,
                   const ClusterAssignment& assignment, const RFFBankPair& banks,
                   const DecorrConfig& cfg);

/// Analytic gradient of decorr_loss with respect to the (unprojected)
/// weights.
std::vector<double> decorr_grad(const std::vector<PooledFeature>& pooled,
                                const SampleWeights& w,
                                const ClusterAssignment& assignment,
                                const RFFBankPair& banks, const DecorrConfig& cfg);

struct WeightOptResult {
  SampleWeights weights;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int accepted_steps = 0;
};

using WeightStepCallback =
    std::function<void(int step, const SampleWeights& projected, double loss)>;

/// Projected gradient descent on the decorrelation loss over the feasible
/// weight set. Starts from uniform weights; each iteration takes a step on
/// u = log(w), projects back onto the constraint, and accepts the candidate
/// only if the loss does not increase (step length halving otherwise), so
/// final_loss <= initial_loss always holds. Throws NumericError on
/// non-finite loss or gradient.
WeightOptResult optimize_weights(const std::vector<PooledFeature>& pooled,
                                 const ClusterAssignment& assignment,
                                 const RFFBankPair& banks, const DecorrConfig& cfg,
                                 const WeightStepCallback& on_step = nullptr);

}  // namespace rapt
