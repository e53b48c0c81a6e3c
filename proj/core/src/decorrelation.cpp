#include "rapt/decorrelation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

namespace rapt {

void DecorrConfig::validate() const {
  if (n_rff < 1) throw ConfigError("decorr.n_rff: must be >= 1");
  if (pair_budget < 0) throw ConfigError("decorr.pair_budget: must be >= 0 (0 = all)");
  if (steps < 1) throw ConfigError("decorr.steps: must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("decorr.learning_rate: must be > 0");
}

bool weights_satisfy_constraint(const SampleWeights& w, const ClusterAssignment& assignment,
                                double rel_tol) {
  if (w.size() != assignment.size()) return false;
  std::vector<double> sums(assignment.k(), 0.0);
  for (int i = 0; i < w.size(); ++i) {
    if (!(w.values[i] > 0.0)) return false;
    sums[assignment.labels[i]] += w.values[i];
  }
  for (int k = 0; k < assignment.k(); ++k) {
    const double target = assignment.counts[k];
    if (target == 0) continue;
    if (std::abs(sums[k] - target) > rel_tol * target) return false;
  }
  return true;
}

SampleWeights project_to_weight_space(const std::vector<double>& raw,
                                      const ClusterAssignment& assignment) {
  if (static_cast<int>(raw.size()) != assignment.size())
    throw ConfigError("project_to_weight_space: weight/assignment size mismatch");
  std::vector<double> sums(assignment.k(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw[i] > 0.0) || !std::isfinite(raw[i]))
      throw NumericError("project_to_weight_space: raw weights must be positive and finite");
    sums[assignment.labels[i]] += raw[i];
  }
  SampleWeights out;
  out.values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int k = assignment.labels[i];
    out.values[i] = raw[i] * assignment.counts[k] / sums[k];
  }
  return out;
}

std::vector<std::pair<int, int>> make_pair_set(int channels, int budget, std::uint64_t seed) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(channels) * (channels - 1) / 2);
  for (int p = 0; p < channels; ++p)
    for (int q = p + 1; q < channels; ++q) pairs.emplace_back(p, q);
  if (budget > 0 && budget < static_cast<int>(pairs.size())) {
    auto engine = make_engine(mix_seed(seed, 0x5041));
    std::shuffle(pairs.begin(), pairs.end(), engine);
    pairs.resize(budget);
    std::sort(pairs.begin(), pairs.end());
  }
  return pairs;
}

namespace {

// Per-batch scratch shared by the loss and gradient kernels: RFF embeddings
// of every (channel, proposal) scalar plus cluster member lists. Embeddings
// depend only on the features, so one workspace serves a whole optimization.
struct Workspace {
  int n = 0;
  int c = 0;
  int f = 0;
  std::vector<double> emb_r;  // (c * n + i) * f
  std::vector<double> emb_s;
  std::vector<std::vector<int>> members;
  std::vector<std::pair<int, int>> pairs;

  const double* r(int channel, int i) const {
    return emb_r.data() + (static_cast<std::size_t>(channel) * n + i) * f;
  }
  const double* s(int channel, int i) const {
    return emb_s.data() + (static_cast<std::size_t>(channel) * n + i) * f;
  }
};

Workspace build_workspace(const std::vector<PooledFeature>& pooled,
                          const ClusterAssignment& assignment, const RFFBankPair& banks,
                          const DecorrConfig& cfg) {
  Workspace ws;
  ws.n = static_cast<int>(pooled.size());
  ws.c = ws.n > 0 ? static_cast<int>(pooled.front().size()) : 0;
  ws.f = banks.r.size();
  ws.emb_r.resize(static_cast<std::size_t>(ws.c) * ws.n * ws.f);
  ws.emb_s.resize(static_cast<std::size_t>(ws.c) * ws.n * ws.f);
  for (int ch = 0; ch < ws.c; ++ch) {
    for (int i = 0; i < ws.n; ++i) {
      const double x = pooled[i][ch];
      apply_rff(banks.r, x, ws.emb_r.data() + (static_cast<std::size_t>(ch) * ws.n + i) * ws.f);
      apply_rff(banks.s, x, ws.emb_s.data() + (static_cast<std::size_t>(ch) * ws.n + i) * ws.f);
    }
  }
  ws.members.resize(assignment.k());
  for (int k = 0; k < assignment.k(); ++k) ws.members[k].reserve(assignment.counts[k]);
  for (int i = 0; i < assignment.size(); ++i) ws.members[assignment.labels[i]].push_back(i);
  ws.pairs = make_pair_set(ws.c, cfg.pair_budget, cfg.seed);
  return ws;
}

// Weighted per-cluster means of the r- and s-embeddings for every channel:
// mean[(k * c + ch) * f + a] = (1/N_k) * sum_{i in k} w_i * emb[ch][i][a].
struct ClusterMeans {
  std::vector<double> r;
  std::vector<double> s;
};

ClusterMeans compute_means(const Workspace& ws, const std::vector<double>& w) {
  const int nk = static_cast<int>(ws.members.size());
  ClusterMeans m;
  m.r.assign(static_cast<std::size_t>(nk) * ws.c * ws.f, 0.0);
  m.s.assign(static_cast<std::size_t>(nk) * ws.c * ws.f, 0.0);
  for (int k = 0; k < nk; ++k) {
    const auto& mem = ws.members[k];
    if (mem.empty()) continue;
    const double inv = 1.0 / static_cast<double>(mem.size());
    for (int ch = 0; ch < ws.c; ++ch) {
      double* mr = m.r.data() + (static_cast<std::size_t>(k) * ws.c + ch) * ws.f;
      double* msv = m.s.data() + (static_cast<std::size_t>(k) * ws.c + ch) * ws.f;
      for (int i : mem) {
        const double wi = w[i];
        const double* er = ws.r(ch, i);
        const double* es = ws.s(ch, i);
        for (int a = 0; a < ws.f; ++a) {
          mr[a] += wi * er[a];
          msv[a] += wi * es[a];
        }
      }
      for (int a = 0; a < ws.f; ++a) {
        mr[a] *= inv;
        msv[a] *= inv;
      }
    }
  }
  return m;
}

// Accumulates the covariance matrix for one (cluster, pair) into cov (f x f).
void pair_cov(const Workspace& ws, const ClusterMeans& means, const std::vector<double>& w,
              int k, int p, int q, CovForm form, double* cov) {
  const auto& mem = ws.members[k];
  const int f = ws.f;
  const double inv = 1.0 / (static_cast<double>(mem.size()) - 1.0);
  std::fill(cov, cov + f * f, 0.0);
  const double* rbar = means.r.data() + (static_cast<std::size_t>(k) * ws.c + p) * f;
  const double* sbar = means.s.data() + (static_cast<std::size_t>(k) * ws.c + q) * f;
  if (form == CovForm::kWeightScaled) {
    for (int i : mem) {
      const double wi = w[i];
      const double* a = ws.r(p, i);
      const double* b = ws.s(q, i);
      for (int x = 0; x < f; ++x) {
        const double ax = wi * a[x] - rbar[x];
        for (int y = 0; y < f; ++y) cov[x * f + y] += ax * (wi * b[y] - sbar[y]);
      }
    }
  } else {
    for (int i : mem) {
      const double wi = w[i];
      const double* a = ws.r(p, i);
      const double* b = ws.s(q, i);
      for (int x = 0; x < f; ++x) {
        const double ax = wi * (a[x] - rbar[x]);
        for (int y = 0; y < f; ++y) cov[x * f + y] += ax * (b[y] - sbar[y]);
      }
    }
  }
  for (int x = 0; x < f * f; ++x) cov[x] *= inv;
}

double loss_kernel(const Workspace& ws, const std::vector<double>& w, CovForm form) {
  const ClusterMeans means = compute_means(ws, w);
  std::vector<double> cov(static_cast<std::size_t>(ws.f) * ws.f);
  double loss = 0.0;
  for (std::size_t k = 0; k < ws.members.size(); ++k) {
    if (ws.members[k].size() < 2) continue;
    for (const auto& [p, q] : ws.pairs) {
      pair_cov(ws, means, w, static_cast<int>(k), p, q, form, cov.data());
      double fro2 = 0.0;
      for (double v : cov) fro2 += v * v;
      loss += fro2;
    }
  }
  return loss;
}

// Loss and d(loss)/dw in one pass. For the weight-scaled form
//   dL/dw_t = (2/(N_k-1)) * [ A_t' Sig (w_t B_t - sbar) + (w_t A_t - rbar)' Sig B_t ]
// summed over pairs; the conventional form picks up a correction term
// proportional to (N_k - W_k) that vanishes on the constraint set.
double loss_grad_kernel(const Workspace& ws, const std::vector<double>& w, CovForm form,
                        std::vector<double>& grad) {
  const ClusterMeans means = compute_means(ws, w);
  const int f = ws.f;
  std::vector<double> cov(static_cast<std::size_t>(f) * f);
  std::vector<double> tmp1(f), tmp2(f);
  grad.assign(w.size(), 0.0);
  double loss = 0.0;

  for (std::size_t k = 0; k < ws.members.size(); ++k) {
    const auto& mem = ws.members[k];
    if (mem.size() < 2) continue;
    const double nk = static_cast<double>(mem.size());
    double wsum = 0.0;
    for (int i : mem) wsum += w[i];

    for (const auto& [p, q] : ws.pairs) {
      pair_cov(ws, means, w, static_cast<int>(k), p, q, form, cov.data());
      double fro2 = 0.0;
      for (double v : cov) fro2 += v * v;
      loss += fro2;

      const double* rbar = means.r.data() + (k * ws.c + p) * f;
      const double* sbar = means.s.data() + (k * ws.c + q) * f;
      const double scale = 2.0 / (nk - 1.0);

      if (form == CovForm::kWeightScaled) {
        for (int t : mem) {
          const double wt = w[t];
          const double* at = ws.r(p, t);
          const double* bt = ws.s(q, t);
          // tmp1 = Sig * (w_t b_t - sbar); tmp2 = Sig * b_t
          for (int x = 0; x < f; ++x) {
            double acc1 = 0.0, acc2 = 0.0;
            const double* row = cov.data() + static_cast<std::size_t>(x) * f;
            for (int y = 0; y < f; ++y) {
              acc1 += row[y] * (wt * bt[y] - sbar[y]);
              acc2 += row[y] * bt[y];
            }
            tmp1[x] = acc1;
            tmp2[x] = acc2;
          }
          double g = 0.0;
          for (int x = 0; x < f; ++x) g += at[x] * tmp1[x] + (wt * at[x] - rbar[x]) * tmp2[x];
          grad[t] += scale * g;
        }
      } else {
        // Correction term from the weighted means' dependence on w; it
        // vanishes when the weights sum to N_k.
        const double corr = (nk - wsum) / nk;
        for (int t : mem) {
          const double* at = ws.r(p, t);
          const double* bt = ws.s(q, t);
          double g = 0.0;
          for (int x = 0; x < f; ++x) {
            const double* row = cov.data() + static_cast<std::size_t>(x) * f;
            double sig_bc = 0.0, sig_b = 0.0, sig_sbar = 0.0;
            for (int y = 0; y < f; ++y) {
              sig_bc += row[y] * (bt[y] - sbar[y]);
              sig_b += row[y] * bt[y];
              sig_sbar += row[y] * sbar[y];
            }
            g += (at[x] - rbar[x]) * sig_bc - corr * (at[x] * sig_sbar + rbar[x] * sig_b);
          }
          grad[t] += scale * g;
        }
      }
    }
  }
  return loss;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace

std::vector<double> weighted_cross_cov(const std::vector<double>& zp,
                                       const std::vector<double>& zq,
                                       const SampleWeights& w,
                                       const ClusterAssignment& assignment, int k,
                                       const RFFBankPair& banks, CovForm form) {
  const int n = assignment.size();
  if (static_cast<int>(zp.size()) != n || static_cast<int>(zq.size()) != n ||
      w.size() != n)
    throw ConfigError("weighted_cross_cov: input sizes disagree with assignment");
  if (k < 0 || k >= assignment.k()) throw ConfigError("weighted_cross_cov: bad cluster id");
  if (assignment.counts[k] < 2)
    throw ConfigError("weighted_cross_cov: cluster has fewer than 2 members");

  const int f = banks.r.size();
  const double nk = assignment.counts[k];
  std::vector<double> er(f), es(f), rbar(f, 0.0), sbar(f, 0.0);
  std::vector<double> cov(static_cast<std::size_t>(f) * f, 0.0);

  for (int i = 0; i < n; ++i) {
    if (assignment.labels[i] != k) continue;
    apply_rff(banks.r, zp[i], er.data());
    apply_rff(banks.s, zq[i], es.data());
    for (int a = 0; a < f; ++a) {
      rbar[a] += w.values[i] * er[a];
      sbar[a] += w.values[i] * es[a];
    }
  }
  for (int a = 0; a < f; ++a) {
    rbar[a] /= nk;
    sbar[a] /= nk;
  }
  for (int i = 0; i < n; ++i) {
    if (assignment.labels[i] != k) continue;
    apply_rff(banks.r, zp[i], er.data());
    apply_rff(banks.s, zq[i], es.data());
    const double wi = w.values[i];
    if (form == CovForm::kWeightScaled) {
      for (int a = 0; a < f; ++a) {
        const double ax = wi * er[a] - rbar[a];
        for (int b = 0; b < f; ++b) cov[a * f + b] += ax * (wi * es[b] - sbar[b]);
      }
    } else {
      for (int a = 0; a < f; ++a) {
        const double ax = wi * (er[a] - rbar[a]);
        for (int b = 0; b < f; ++b) cov[a * f + b] += ax * (es[b] - sbar[b]);
      }
    }
  }
  const double inv = 1.0 / (nk - 1.0);
  for (double& v : cov) v *= inv;
  return cov;
}

double decorr_loss(const std::vector<PooledFeature>& pooled, const SampleWeights& w,
                   const ClusterAssignment& assignment, const RFFBankPair& banks,
                   const DecorrConfig& cfg) {
  if (pooled.empty()) return 0.0;
  const Workspace ws = build_workspace(pooled, assignment, banks, cfg);
  return loss_kernel(ws, w.values, cfg.cov_form);
}

std::vector<double> decorr_grad(const std::vector<PooledFeature>& pooled,
                                const SampleWeights& w,
                                const ClusterAssignment& assignment,
                                const RFFBankPair& banks, const DecorrConfig& cfg) {
  std::vector<double> grad;
  if (pooled.empty()) return grad;
  const Workspace ws = build_workspace(pooled, assignment, banks, cfg);
  loss_grad_kernel(ws, w.values, cfg.cov_form, grad);
  for (double g : grad) check_finite(g, "decorr_grad");
  return grad;
}

WeightOptResult optimize_weights(const std::vector<PooledFeature>& pooled,
                                 const ClusterAssignment& assignment,
                                 const RFFBankPair& banks, const DecorrConfig& cfg,
                                 const WeightStepCallback& on_step) {
  cfg.validate();
  const int n = static_cast<int>(pooled.size());
  WeightOptResult res;
  res.weights = SampleWeights::uniform(n);
  if (n == 0) return res;

  const Workspace ws = build_workspace(pooled, assignment, banks, cfg);
  std::vector<double> grad;
  std::vector<double> candidate(n);

  double cur = loss_kernel(ws, res.weights.values, cfg.cov_form);
  check_finite(cur, "decorr_loss");
  res.initial_loss = cur;

  constexpr int kMaxHalvings = 20;
  constexpr double kExpClip = 10.0;

  for (int step = 1; step <= cfg.steps; ++step) {
    const double got = loss_grad_kernel(ws, res.weights.values, cfg.cov_form, grad);
    check_finite(got, "decorr_loss");
    for (double g : grad) check_finite(g, "decorr_grad");

    bool accepted = false;
    double lr = cfg.learning_rate;
    SampleWeights next;
    double next_loss = cur;
    for (int h = 0; h <= kMaxHalvings; ++h, lr *= 0.5) {
      // Step on u = log(w): w <- w * exp(-lr * dL/dw * w), then project.
      for (int i = 0; i < n; ++i) {
        const double e = std::clamp(-lr * grad[i] * res.weights.values[i], -kExpClip, kExpClip);
        candidate[i] = res.weights.values[i] * std::exp(e);
      }
      SampleWeights proj = project_to_weight_space(candidate, assignment);
      const double cand_loss = loss_kernel(ws, proj.values, cfg.cov_form);
      check_finite(cand_loss, "decorr_loss");
      if (cand_loss <= cur) {
        next = std::move(proj);
        next_loss = cand_loss;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent step found; weights are at a minimum
    res.weights = std::move(next);
    cur = next_loss;
    res.accepted_steps += 1;
    if (on_step) on_step(step, res.weights, cur);
  }
  res.final_loss = cur;
  return res;
}

}  // namespace rapt
