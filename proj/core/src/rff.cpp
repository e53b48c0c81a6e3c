#include "rapt/rff.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rapt/errors.hpp"
#include "rapt/rng.hpp"

namespace rapt {

namespace {

RFFBank sample_bank(int n, std::uint64_t seed) {
  RFFBank bank;
  bank.seed = seed;
  bank.omegas.resize(n);
  bank.phis.resize(n);
  auto engine = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < n; ++i) bank.omegas[i] = normal(engine);
  for (int i = 0; i < n; ++i) bank.phis[i] = uniform(engine);
  return bank;
}

}  // namespace

RFFBankPair sample_rff(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_rff: n must be >= 1");
  RFFBankPair pair;
  pair.r = sample_bank(n, mix_seed(seed, 0x72));
  pair.s = sample_bank(n, mix_seed(seed, 0x73));
  return pair;
}

std::vector<double> apply_rff(const RFFBank& bank, double x) {
  std::vector<double> out(bank.omegas.size());
  apply_rff(bank, x, out.data());
  return out;
}

void apply_rff(const RFFBank& bank, double x, double* out) {
  const int n = bank.size();
  for (int i = 0; i < n; ++i)
    out[i] = std::numbers::sqrt2 * std::cos(bank.omegas[i] * x + bank.phis[i]);
}

}  // namespace rapt
