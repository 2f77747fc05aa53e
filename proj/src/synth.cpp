#include "propkit/synth.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "propkit/error.hpp"

namespace propkit {

namespace {

constexpr std::size_t kNC = index(EventType::NC);
constexpr std::size_t kC = index(EventType::C);
// 2013-01-02, a Wednesday
constexpr std::int64_t kBaseDay = 15707;
constexpr std::int64_t kOpenNs = (9LL * 3600 + 30 * 60) * 1'000'000'000LL;

/// sum_{j=0..len-1} k[j] x[j]
inline double window_dot(const double* k, const double* x, std::size_t len) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t j = 0; j < len; ++j) s += k[j] * x[j];
  return s;
}

/// Reversed copy so that sum_n v[n] x[t - n] becomes a forward dot over x[t-L..t].
std::vector<double> reversed(const std::vector<double>& v) { return {v.rbegin(), v.rend()}; }

/// eta_t = sqrt(D_LF) w_t + u_t - u_prev, applied from `first` on to the events
/// flagged in `noisy`. Warm-up events draw nothing, so both generators consume
/// the noise streams identically.
void add_noise(const GeneratorSpec& spec, std::vector<double>& r, std::size_t first, const std::vector<bool>* noisy) {
  const double lf = std::sqrt(spec.noise.D_LF);
  const double hf = std::sqrt(spec.noise.D_HF / 2.0);
  if (lf == 0.0 && hf == 0.0) return;
  Rng rng_lf = make_stream(spec.seed, "synth.noise.lf");
  Rng rng_hf = make_stream(spec.seed, "synth.noise.hf");
  std::normal_distribution<double> gauss(0.0, 1.0), gauss_hf(0.0, 1.0);
  double u_prev = hf * gauss_hf(rng_hf);
  for (std::size_t t = first; t < r.size(); ++t) {
    if (noisy != nullptr && !(*noisy)[t]) continue;
    if (lf > 0.0) r[t] += lf * gauss(rng_lf);
    if (hf > 0.0) {
      const double u = hf * gauss_hf(rng_hf);
      r[t] += u - u_prev;
      u_prev = u;
    }
  }
}

}  // namespace

std::string_view to_string(TypeProcess::Kind k) {
  switch (k) {
    case TypeProcess::Kind::Iid: return "iid";
    case TypeProcess::Kind::Markov: return "markov";
    case TypeProcess::Kind::Scripted: return "scripted";
    case TypeProcess::Kind::Classified: return "classified";
  }
  return "iid";
}

void TypeProcess::validate() const {
  switch (kind) {
    case Kind::Iid:
      if (!(p_c > 0.0 && p_c < 1.0)) throw Error(ErrorKind::Validation, "synth", "P(C) must lie in (0, 1)");
      break;
    case Kind::Markov:
      for (const auto& row : transition) {
        if (!(row[0] >= 0.0 && row[1] >= 0.0) || std::abs(row[0] + row[1] - 1.0) > 1e-12)
          throw Error(ErrorKind::Validation, "synth", "transition rows must be probabilities summing to 1");
      }
      if (!(stationary_pc() > 0.0 && stationary_pc() < 1.0))
        throw Error(ErrorKind::Validation, "synth", "Markov chain must visit both types");
      break;
    case Kind::Scripted:
      if (script.empty()) throw Error(ErrorKind::Validation, "synth", "empty type script");
      break;
    case Kind::Classified: break;
  }
  if (!(reversal_after_c >= 0.0 && reversal_after_c <= 1.0))
    throw Error(ErrorKind::Validation, "synth", "reversal probability must lie in [0, 1]");
}

double TypeProcess::stationary_pc() const {
  switch (kind) {
    case Kind::Iid: return p_c;
    case Kind::Markov: {
      const double in = transition[kNC][kC];
      const double out = transition[kC][kNC];
      return in + out > 0.0 ? in / (in + out) : 0.0;
    }
    case Kind::Scripted: {
      std::size_t c = 0;
      for (auto t : script) c += t == EventType::C;
      return static_cast<double>(c) / static_cast<double>(script.size());
    }
    case Kind::Classified: return 1.0;
  }
  return 0.0;
}

void GeneratorSpec::validate() const {
  signs.validate();
  types.validate();
  noise.validate();
  if (n < 10'000) throw Error(ErrorKind::Validation, "synth", "series length must be at least 10^4");
  if (events_per_day == 0 || events_per_day > 21600)
    throw Error(ErrorKind::Validation, "synth", "events per day must lie in [1, 21600]");
  if (!std::isfinite(start_mid)) throw Error(ErrorKind::Validation, "synth", "start mid must be finite");
  if (!external_signs.empty()) {
    if (types.reversal_after_c > 0.0)
      throw Error(ErrorKind::Validation, "synth", "sign coupling needs the DAR sampler, not external signs");
    for (auto s : external_signs)
      if (s != 1 && s != -1) throw Error(ErrorKind::Validation, "synth", "external signs must be +-1");
  }
  if (const auto* tk = std::get_if<TimKernel>(&impact)) {
    tk->validate();
    if (tk->variant == TimVariant::TIM2 && types.kind == TypeProcess::Kind::Classified)
      throw Error(ErrorKind::Validation, "synth", "two-type kernels need a generative type process");
  } else {
    const auto& ik = std::get<InfluenceKernel>(impact);
    ik.validate();
    if (!ik.pooled && types.kind == TypeProcess::Kind::Classified)
      throw Error(ErrorKind::Validation, "synth", "two-type kernels need a generative type process");
  }
}

FlowSample generate_flow(const GeneratorSpec& spec, std::size_t length) {
  FlowSample out;
  out.signs.resize(length);
  out.types.resize(length);
  Rng sign_rng = make_stream(spec.seed, "synth.signs");
  Rng type_rng = make_stream(spec.seed, "synth.types");
  Rng couple_rng = make_stream(spec.seed, "synth.coupling");
  const bool external = !spec.external_signs.empty();
  if (external && spec.external_signs.size() < length)
    throw Error(ErrorKind::Validation, "synth",
                "external sign series has " + std::to_string(spec.external_signs.size()) + " entries, need " +
                    std::to_string(length));
  std::optional<DarSampler> sampler;
  if (!external) sampler.emplace(spec.signs, sign_rng);
  const auto& tp = spec.types;
  std::bernoulli_distribution reverse(tp.reversal_after_c);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  EventType prev_type = EventType::NC;
  if (tp.kind == TypeProcess::Kind::Markov)
    prev_type = unif(type_rng) < tp.stationary_pc() ? EventType::C : EventType::NC;
  int prev_sign = 0;
  for (std::size_t t = 0; t < length; ++t) {
    EventType type = EventType::C;
    switch (tp.kind) {
      case TypeProcess::Kind::Iid: type = unif(type_rng) < tp.p_c ? EventType::C : EventType::NC; break;
      case TypeProcess::Kind::Markov:
        type = unif(type_rng) < tp.transition[index(prev_type)][kC] ? EventType::C : EventType::NC;
        break;
      case TypeProcess::Kind::Scripted: type = tp.script[t % tp.script.size()]; break;
      case TypeProcess::Kind::Classified: type = EventType::C; break;
    }
    int sign;
    // coupling applies to the event following a C event
    const bool after_c = t > 0 && out.types[t - 1] == EventType::C;
    if (external) {
      sign = spec.external_signs[t];
    } else if (tp.reversal_after_c > 0.0 && after_c && reverse(couple_rng)) {
      sign = -prev_sign;
      sampler->record(sign);
    } else {
      sign = sampler->next();
    }
    out.signs[t] = static_cast<std::int8_t>(sign);
    out.types[t] = type;
    prev_sign = sign;
    prev_type = type;
  }
  return out;
}

EventSeries assemble_series(const GeneratorSpec& spec, std::span<const std::int8_t> signs,
                            std::span<const EventType> types, std::span<const double> returns, bool labeled) {
  const std::size_t n = signs.size();
  std::vector<MarketEvent> events(n);
  std::vector<std::size_t> day_starts;
  double mid = spec.start_mid;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t day = i / spec.events_per_day;
    const std::size_t slot = i % spec.events_per_day;
    if (slot == 0) day_starts.push_back(i);
    auto& e = events[i];
    e.timestamp_ns = (kBaseDay + static_cast<std::int64_t>(day)) * kNanosPerDay + kOpenNs +
                     static_cast<std::int64_t>(slot) * 1'000'000'000LL;
    e.sign = signs[i];
    e.mid_before = mid;
    e.mid_after = returns[i] == 0.0 ? mid : mid + returns[i];
    mid = e.mid_after;
  }
  if (labeled)
    return EventSeries::labeled(spec.instrument, events, std::vector<EventType>(types.begin(), types.end()),
                                std::move(day_starts));
  return EventSeries::classified(spec.instrument, events, std::move(day_starts));
}

EventSeries generate_tim(const GeneratorSpec& spec) {
  spec.validate();
  const auto* kp = std::get_if<TimKernel>(&spec.impact);
  if (kp == nullptr) throw Error(ErrorKind::InvalidInput, "synth", "TIM generation needs a propagator kernel");
  const TimKernel& k = *kp;
  const std::size_t warm = static_cast<std::size_t>(k.L);
  const std::size_t total = spec.n + warm;
  const FlowSample flow = generate_flow(spec, total);
  const std::size_t len = static_cast<std::size_t>(k.L) + 1;

  std::vector<double> r(total, 0.0);
  if (k.variant == TimVariant::TIM1) {
    std::vector<double> x(total);
    for (std::size_t t = 0; t < total; ++t) x[t] = flow.signs[t];
    const auto kr = reversed(k.dG[0]);
    for (std::size_t t = warm; t < total; ++t) r[t] = window_dot(kr.data(), x.data() + t - warm, len);
  } else {
    std::array<std::vector<double>, kTypeCount> x;
    for (auto& v : x) v.assign(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) x[index(flow.types[t])][t] = flow.signs[t];
    const auto kr_nc = reversed(k.dG[kNC]);
    const auto kr_c = reversed(k.dG[kC]);
    for (std::size_t t = warm; t < total; ++t)
      r[t] = window_dot(kr_nc.data(), x[kNC].data() + t - warm, len) +
             window_dot(kr_c.data(), x[kC].data() + t - warm, len);
  }
  add_noise(spec, r, warm, nullptr);

  const bool labeled = spec.types.kind != TypeProcess::Kind::Classified;
  return assemble_series(spec, std::span(flow.signs).subspan(warm), std::span(flow.types).subspan(warm),
                         std::span(r).subspan(warm), labeled);
}

EventSeries generate_hdim2(const GeneratorSpec& spec) {
  spec.validate();
  const auto* kp = std::get_if<InfluenceKernel>(&spec.impact);
  if (kp == nullptr) throw Error(ErrorKind::InvalidInput, "synth", "HDIM generation needs an influence kernel");
  const InfluenceKernel& k = *kp;
  const std::size_t warm = static_cast<std::size_t>(k.L);
  const std::size_t total = spec.n + warm;
  const FlowSample flow = generate_flow(spec, total);
  const std::size_t len = static_cast<std::size_t>(k.L);

  std::array<std::vector<double>, kTypeCount> x;
  for (auto& v : x) v.assign(total, 0.0);
  for (std::size_t t = 0; t < total; ++t) {
    const std::size_t slot = k.pooled ? kC : index(flow.types[t]);
    x[slot][t] = flow.signs[t];
  }
  // krev[past][present][j] = kappa_{past,present}(L - j), j = 0..L-1, so that the
  // dot with x[past][t-L..t-1] gives sum_n kappa(n) x[past][t-n]
  std::array<std::array<std::vector<double>, kTypeCount>, kTypeCount> krev;
  for (std::size_t a = 0; a < kTypeCount; ++a)
    for (std::size_t b = 0; b < kTypeCount; ++b) {
      krev[a][b].resize(len);
      for (std::size_t j = 0; j < len; ++j) krev[a][b][j] = k.kappa[a][b][len - j];
    }

  std::vector<double> r(total, 0.0);
  std::vector<bool> noisy(total, false);
  for (std::size_t t = warm; t < total; ++t) {
    const std::size_t present = k.pooled ? kC : index(flow.types[t]);
    if (present == kNC && !k.unconstrained) continue;
    noisy[t] = true;
    double v = k.G1[present] * flow.signs[t];
    for (std::size_t past = 0; past < kTypeCount; ++past) {
      if (k.pooled && past != kC) continue;
      v += window_dot(krev[past][present].data(), x[past].data() + t - len, len);
    }
    r[t] = v;
  }
  add_noise(spec, r, warm, &noisy);

  const bool labeled = spec.types.kind != TypeProcess::Kind::Classified;
  return assemble_series(spec, std::span(flow.signs).subspan(warm), std::span(flow.types).subspan(warm),
                         std::span(r).subspan(warm), labeled);
}

EventSeries generate(const GeneratorSpec& spec) {
  return std::holds_alternative<TimKernel>(spec.impact) ? generate_tim(spec) : generate_hdim2(spec);
}

std::vector<std::string> preset_names() { return {"iid-null", "large-tick", "small-tick"}; }

GeneratorSpec preset(std::string_view name) {
  GeneratorSpec spec;
  spec.instrument = std::string(name);
  if (name == "iid-null") {
    spec.signs.lambda = {1.0};
    spec.signs.rho = 0.5;
    spec.types.kind = TypeProcess::Kind::Iid;
    spec.types.p_c = 0.5;
    spec.impact = TimKernel::tim1({1.0});
    spec.noise = {0.25, 0.1};
    return spec;
  }
  if (name == "large-tick") {
    spec.signs = power_law_dar(0.5, 1000, 0.9);
    spec.types.kind = TypeProcess::Kind::Markov;
    // P(C -> C) = 0.02 and P(NC -> C) chosen so that P(C) = 0.08
    const double to_c = 0.08 * 0.98 / 0.92;
    spec.types.transition = {{{1.0 - to_c, to_c}, {0.98, 0.02}}};
    spec.types.reversal_after_c = 0.8;
    spec.impact = TimKernel::tim2({0.0}, {1.0});
    spec.noise = {0.05, 0.0};
    return spec;
  }
  if (name == "small-tick") {
    spec.signs = power_law_dar(0.5, 1000, 0.9);
    spec.types.kind = TypeProcess::Kind::Iid;
    spec.types.p_c = 0.7;
    const int L = 100;
    std::vector<double> g_nc(L + 2), g_c(L + 2);
    for (int l = 1; l <= L + 1; ++l) {
      g_c[l] = std::pow(static_cast<double>(l), -0.3);
      g_nc[l] = 0.3 * std::pow(static_cast<double>(l), -0.3);
    }
    std::vector<double> d_nc(L + 1), d_c(L + 1);
    for (int n = 0; n <= L; ++n) {
      d_nc[n] = g_nc[n + 1] - g_nc[n];
      d_c[n] = g_c[n + 1] - g_c[n];
    }
    spec.impact = TimKernel::tim2(std::move(d_nc), std::move(d_c));
    spec.noise = {0.5, 0.4};
    return spec;
  }
  throw Error(ErrorKind::InvalidInput, "synth", "unknown preset '" + std::string(name) + "'");
}

}  // namespace propkit
