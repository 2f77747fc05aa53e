#include "propkit/dar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "numeric.hpp"
#include "propkit/error.hpp"
#include "propkit/linalg.hpp"

namespace propkit {

namespace {

constexpr int kDenseLimit = 2000;

/// x -> M x for the forward Yule-Walker system in the unknowns C(1..p).
void forward_apply(const std::vector<double>& lambda, double a, const std::vector<double>& x,
                   std::vector<double>& y) {
  const int p = static_cast<int>(lambda.size());
  // lambda_j at lam[j], x_k at xs[k]
  for (int l = 1; l <= p; ++l) {
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int k = 1; k < l; ++k) s += lambda[static_cast<std::size_t>(l - k - 1)] * x[static_cast<std::size_t>(k - 1)];
#pragma omp simd reduction(+ : s)
    for (int k = 1; k <= p - l; ++k) s += lambda[static_cast<std::size_t>(l + k - 1)] * x[static_cast<std::size_t>(k - 1)];
    y[static_cast<std::size_t>(l - 1)] = x[static_cast<std::size_t>(l - 1)] - a * s;
  }
}

std::vector<double> bicgstab(const std::vector<double>& lambda, double a, const std::vector<double>& b) {
  const std::size_t n = b.size();
  auto dotv = [](const std::vector<double>& u, const std::vector<double>& v) {
    return detail::dot(u.data(), v.data(), u.size());
  };
  std::vector<double> x(b), r(n), r0, p(n, 0.0), v(n, 0.0), s(n), t(n);
  forward_apply(lambda, a, x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  r0 = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  const double bnorm = std::sqrt(dotv(b, b));
  const double target = 1e-14 * std::max(bnorm, 1e-300);
  for (int it = 0; it < 10000; ++it) {
    if (std::sqrt(dotv(r, r)) <= target) return x;
    const double rho_new = dotv(r0, r);
    if (rho_new == 0.0) break;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    forward_apply(lambda, a, p, v);
    alpha = rho / dotv(r0, v);
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    if (std::sqrt(dotv(s, s)) <= target) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
      return x;
    }
    forward_apply(lambda, a, s, t);
    omega = dotv(t, s) / dotv(t, t);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i] + omega * s[i];
      r[i] = s[i] - omega * t[i];
    }
    if (omega == 0.0) break;
  }
  throw Error(ErrorKind::Conditioning, "dar", "iterative Yule-Walker solve did not converge");
}

}  // namespace

void DarSpec::validate(bool allow_unit_rho) const {
  if (lambda.empty()) throw Error(ErrorKind::Validation, "dar", "empty lag distribution");
  double sum = 0.0;
  for (double l : lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorKind::Validation, "dar", "lambda must be finite and >= 0");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "lambda sums to " << sum << ", not 1";
    throw Error(ErrorKind::Validation, "dar", msg.str());
  }
  const double hi = allow_unit_rho ? 1.0 : std::nextafter(1.0, 0.0);
  const double lo = allow_antipersistent ? 0.0 : 0.5;
  if (!(rho >= lo && rho <= hi)) {
    std::ostringstream msg;
    msg << "rho = " << rho << " outside [" << lo << ", 1" << (allow_unit_rho ? "]" : ")");
    throw Error(ErrorKind::Validation, "dar", msg.str());
  }
}

DarSpec power_law_dar(double gamma, int p_max, double rho) {
  if (p_max < 1) throw Error(ErrorKind::Validation, "dar", "p_max must be >= 1");
  if (!std::isfinite(gamma)) throw Error(ErrorKind::Validation, "dar", "gamma must be finite");
  DarSpec spec;
  spec.rho = rho;
  spec.lambda.resize(static_cast<std::size_t>(p_max));
  const double expo = (gamma - 3.0) / 2.0;
  detail::CompensatedSum z;
  for (int l = 1; l <= p_max; ++l) {
    spec.lambda[static_cast<std::size_t>(l - 1)] = std::pow(static_cast<double>(l), expo);
    z.add(spec.lambda[static_cast<std::size_t>(l - 1)]);
  }
  for (double& l : spec.lambda) l /= z.value();
  spec.validate();
  return spec;
}

std::size_t dar_burn_in(int p) { return std::max<std::size_t>(10 * static_cast<std::size_t>(p), 10000); }

DarSampler::DarSampler(const DarSpec& spec, Rng& rng, DarInit init)
    : spec_(spec),
      rng_(&rng),
      lag_(spec.lambda.begin(), spec.lambda.end()),
      copy_(spec.rho),
      p_(spec.p()) {
  spec_.validate();
  hist_.assign(static_cast<std::size_t>(p_), 1);
  if (init == DarInit::Random) {
    std::bernoulli_distribution coin(0.5);
    for (auto& s : hist_) s = coin(*rng_) ? 1 : -1;
  }
  const std::size_t burn = dar_burn_in(p_);
  for (std::size_t i = 0; i < burn; ++i) next();
}

int DarSampler::next() {
  const int lag = lag_(*rng_) + 1;
  const int parent = past(lag);
  const int sign = copy_(*rng_) ? parent : -parent;
  record(sign);
  return sign;
}

void DarSampler::record(int sign) {
  hist_[static_cast<std::size_t>(pos_)] = static_cast<std::int8_t>(sign);
  pos_ = (pos_ + 1) % p_;
}

double DarSampler::predictor() const {
  double s = 0.0;
  for (int l = 1; l <= p_; ++l) s += spec_.lambda[static_cast<std::size_t>(l - 1)] * past(l);
  return spec_.persistence() * s;
}

std::vector<std::int8_t> simulate(const DarSpec& spec, std::size_t n, std::uint64_t seed, DarInit init) {
  spec.validate();
  Rng rng = make_stream(seed, "dar.signs");
  DarSampler sampler(spec, rng, init);
  std::vector<std::int8_t> out(n);
  for (auto& s : out) s = static_cast<std::int8_t>(sampler.next());
  return out;
}

std::vector<double> yule_walker_forward(const DarSpec& spec, int L) {
  spec.validate(true);
  if (L < 0) throw Error(ErrorKind::InvalidInput, "dar", "negative lag count");
  const int p = spec.p();
  const double a = spec.persistence();
  const auto& lam = spec.lambda;
  std::vector<double> c;  // C(1..p)
  if (p <= kDenseLimit) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd b(p);
    for (int l = 1; l <= p; ++l) {
      b(l - 1) = a * lam[static_cast<std::size_t>(l - 1)];
      for (int k = 1; k <= p; ++k) {
        double coef = 0.0;
        if (l - k >= 1) coef += lam[static_cast<std::size_t>(l - k - 1)];
        if (l + k <= p) coef += lam[static_cast<std::size_t>(l + k - 1)];
        M(l - 1, k - 1) -= a * coef;
      }
    }
    const auto sol = solve_dense(M, b, "dar");
    c.assign(sol.x.data(), sol.x.data() + p);
  } else {
    std::vector<double> b(static_cast<std::size_t>(p));
    for (int l = 1; l <= p; ++l) b[static_cast<std::size_t>(l - 1)] = a * lam[static_cast<std::size_t>(l - 1)];
    c = bicgstab(lam, a, b);
  }
  std::vector<double> C(static_cast<std::size_t>(std::max(L, p)) + 1);
  C[0] = 1.0;
  std::copy(c.begin(), c.end(), C.begin() + 1);
  for (int l = p + 1; l <= L; ++l) {
    detail::CompensatedSum s;
    for (int n = 1; n <= p; ++n) s.add(lam[static_cast<std::size_t>(n - 1)] * C[static_cast<std::size_t>(l - n)]);
    C[static_cast<std::size_t>(l)] = a * s.value();
  }
  C.resize(static_cast<std::size_t>(L) + 1);
  return C;
}

std::vector<double> levinson_durbin(std::span<const double> C) {
  if (C.size() < 2) throw Error(ErrorKind::InvalidInput, "dar", "need C(0..L) with L >= 1");
  const std::size_t L = C.size() - 1;
  if (C[0] <= 0.0) throw Error(ErrorKind::Conditioning, "dar", "C(0) must be positive");
  std::vector<double> phi(L + 1, 0.0), prev(L + 1, 0.0);
  double err = C[0];
  for (std::size_t k = 1; k <= L; ++k) {
    double acc = C[k];
    for (std::size_t j = 1; j < k; ++j) acc -= prev[j] * C[k - j];
    const double refl = acc / err;
    phi[k] = refl;
    for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - refl * prev[k - j];
    err *= (1.0 - refl * refl);
    if (!(err > 1e-14 * C[0])) {
      std::ostringstream msg;
      msg << "Toeplitz system singular at order " << k << " (prediction error " << err << ")";
      throw Error(ErrorKind::Conditioning, "dar", msg.str());
    }
    prev = phi;
  }
  return {phi.begin() + 1, phi.end()};
}

std::vector<double> yule_walker_coefficients_dense(std::span<const double> C) {
  if (C.size() < 2) throw Error(ErrorKind::InvalidInput, "dar", "need C(0..L) with L >= 1");
  const int L = static_cast<int>(C.size()) - 1;
  Eigen::MatrixXd M(L, L);
  Eigen::VectorXd b(L);
  for (int l = 1; l <= L; ++l) {
    b(l - 1) = C[static_cast<std::size_t>(l)];
    for (int n = 1; n <= L; ++n) M(l - 1, n - 1) = C[static_cast<std::size_t>(std::abs(l - n))];
  }
  const auto sol = solve_dense(M, b, "dar", 1e-12);
  return {sol.x.data(), sol.x.data() + L};
}

DarSpec yule_walker_inverse(std::span<const double> C, const YuleWalkerOptions& options) {
  if (C.empty() || std::abs(C[0] - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidInput, "dar", "C(0) must equal 1");
  const auto coef = C.size() - 1 <= static_cast<std::size_t>(kDenseLimit) ? yule_walker_coefficients_dense(C)
                                                                          : levinson_durbin(C);
  detail::CompensatedSum total;
  double scale = 0.0;
  for (double v : coef) {
    total.add(v);
    scale = std::max(scale, std::abs(v));
  }
  const double a = total.value();
  DarSpec spec;
  spec.allow_antipersistent = options.allow_antipersistent;
  if (scale <= 1e-14) {
    // no predictability: rho = 1/2, the lag distribution is irrelevant
    spec.rho = 0.5;
    spec.lambda.assign(coef.size(), 1.0 / static_cast<double>(coef.size()));
    return spec;
  }
  spec.rho = 0.5 * (1.0 + a);
  spec.lambda.resize(coef.size());
  double worst = 0.0;
  std::size_t worst_at = 0;
  for (std::size_t n = 0; n < coef.size(); ++n) {
    const double l = coef[n] / a;
    if (l < worst) {
      worst = l;
      worst_at = n + 1;
    }
    spec.lambda[n] = l;
  }
  if (worst < -options.negative_tolerance) {
    std::ostringstream msg;
    msg << "lambda_" << worst_at << " = " << worst << " is negative; C is not a DAR autocorrelation";
    throw Error(ErrorKind::NotRepresentable, "dar", msg.str());
  }
  if (spec.rho < 0.5 && !options.allow_antipersistent) {
    std::ostringstream msg;
    msg << "implied rho = " << spec.rho << " is anti-persistent";
    throw Error(ErrorKind::NotRepresentable, "dar", msg.str());
  }
  if (spec.rho > 1.0 + 1e-12) {
    std::ostringstream msg;
    msg << "implied rho = " << spec.rho << " exceeds 1";
    throw Error(ErrorKind::NotRepresentable, "dar", msg.str());
  }
  for (double& l : spec.lambda) l = std::max(l, 0.0);
  const double z = std::accumulate(spec.lambda.begin(), spec.lambda.end(), 0.0);
  for (double& l : spec.lambda) l /= z;
  return spec;
}

TimKernel hdim1_kernel_map(const DarSpec& spec, double G1) {
  spec.validate(true);
  if (!std::isfinite(G1)) throw Error(ErrorKind::InvalidInput, "dar", "G1 must be finite");
  std::vector<double> dG(static_cast<std::size_t>(spec.p()) + 1);
  dG[0] = G1;
  const double a = spec.persistence();
  for (int l = 1; l <= spec.p(); ++l) dG[static_cast<std::size_t>(l)] = -a * G1 * spec.lambda[static_cast<std::size_t>(l - 1)];
  return TimKernel::tim1(std::move(dG));
}

double conditional_predictor(const DarSpec& spec, std::span<const std::int8_t> history) {
  spec.validate(true);
  const std::size_t p = static_cast<std::size_t>(spec.p());
  if (history.size() < p)
    throw Error(ErrorKind::InvalidInput, "dar",
                "history of " + std::to_string(history.size()) + " signs shorter than p = " + std::to_string(p));
  double s = 0.0;
  for (std::size_t l = 1; l <= p; ++l) s += spec.lambda[l - 1] * history[history.size() - l];
  return spec.persistence() * s;
}

}  // namespace propkit
