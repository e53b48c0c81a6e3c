#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace rapt {

/// A bank of random cosine features h(x) = sqrt(2) * cos(omega * x + phi)
/// with omega ~ N(0,1) and phi ~ Uniform[0, 2*pi). Regenerating from the
/// same seed reproduces the bank exactly.
struct RFFBank {
  std::vector<double> omegas;
  std::vector<double> phis;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(omegas.size()); }
};

struct RFFBankPair {
  RFFBank r;
  RFFBank s;
};

/// Draws two independent banks of n features each, deterministic from seed.
RFFBankPair sample_rff(int n, std::uint64_t seed);

/// Evaluates every feature of the bank at scalar x.
std::vector<double> apply_rff(const RFFBank& bank, double x);

/// In-place variant writing bank.size() values to `out`.
void apply_rff(const RFFBank& bank, double x, double* out);

}  // namespace rapt
