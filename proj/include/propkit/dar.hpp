#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "propkit/kernels.hpp"
#include "propkit/random.hpp"

namespace propkit {

/// Discrete autoregressive sign process: eps_t copies (prob rho) or flips
/// eps_{t-l}, with the lag l drawn from lambda_1..lambda_p.
struct DarSpec {
  std::vector<double> lambda;  // lambda[0] is lambda_1
  double rho = 0.5;
  /// Accept rho < 0.5.
  bool allow_antipersistent = false;

  int p() const { return static_cast<int>(lambda.size()); }
  double persistence() const { return 2.0 * rho - 1.0; }
  /// Throws Validation. `allow_unit_rho` admits rho = 1, which the
  /// Yule-Walker recursion handles but simulation does not.
  void validate(bool allow_unit_rho = false) const;
};

/// lambda_l proportional to l^((gamma - 3) / 2), l = 1..p_max.
DarSpec power_law_dar(double gamma, int p_max, double rho);

enum class DarInit { Random, AllPlus };

/// Sequential DAR sampler over a ring buffer of the last p signs.
class DarSampler {
 public:
  /// Fills the history per `init` and discards max(10 p, 10^4) burn-in draws.
  DarSampler(const DarSpec& spec, Rng& rng, DarInit init = DarInit::Random);

  int next();
  /// Appends an externally chosen sign to the history.
  void record(int sign);
  /// (2 rho - 1) sum_l lambda_l eps_{t-l} for the next draw.
  double predictor() const;

 private:
  int past(int lag) const { return hist_[(pos_ + p_ - lag) % p_]; }

  DarSpec spec_;
  Rng* rng_;
  std::discrete_distribution<int> lag_;
  std::bernoulli_distribution copy_;
  std::vector<std::int8_t> hist_;
  int p_ = 0;
  int pos_ = 0;  // slot of the next sign
};

std::size_t dar_burn_in(int p);

std::vector<std::int8_t> simulate(const DarSpec& spec, std::size_t n, std::uint64_t seed,
                                  DarInit init = DarInit::Random);

/// C(0..L) implied by the DAR weights and rho.
std::vector<double> yule_walker_forward(const DarSpec& spec, int L);

struct YuleWalkerOptions {
  /// Coefficients a_n above -tolerance * sum(a) are treated as round-off zeros.
  double negative_tolerance = 1e-8;
  bool allow_antipersistent = false;
};

/// DAR(L) spec reproducing C(0..L).
DarSpec yule_walker_inverse(std::span<const double> C, const YuleWalkerOptions& options = {});

/// Solves sum_n a_n C(|l - n|) = C(l), l = 1..L by the Levinson-Durbin recursion.
std::vector<double> levinson_durbin(std::span<const double> C);
/// Same system by dense QR.
std::vector<double> yule_walker_coefficients_dense(std::span<const double> C);

/// dG(0) = G1, dG(l) = -(2 rho - 1) G1 lambda_l: the TIM1 kernel equivalent to
/// the linear-predictor history dependent model under this sign process.
TimKernel hdim1_kernel_map(const DarSpec& spec, double G1);

/// Best linear predictor of the next sign; `history` is oldest first and
/// needs at least p entries.
double conditional_predictor(const DarSpec& spec, std::span<const std::int8_t> history);

}  // namespace propkit
