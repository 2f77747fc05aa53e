#include "propkit/pipeline.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <future>
#include <iomanip>
#include <sstream>

#include "propkit/error.hpp"
#include "propkit/random.hpp"

namespace propkit {

namespace fs = std::filesystem;

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::Tim1: return "tim1";
    case ModelVariant::Tim2: return "tim2";
    case ModelVariant::Hdim2: return "hdim2";
  }
  return "tim1";
}

ModelVariant model_variant_from_string(std::string_view s) {
  if (s == "tim1" || s == "1") return ModelVariant::Tim1;
  if (s == "tim2" || s == "2") return ModelVariant::Tim2;
  if (s == "hdim2") return ModelVariant::Hdim2;
  throw Error(ErrorKind::Validation, "cli", "variant must be tim1, tim2 or hdim2, got '" + std::string(s) + "'");
}

void RunConfig::validate() const {
  const int sources = (tapes.empty() ? 0 : 1) + (preset ? 1 : 0) + (spec_file ? 1 : 0);
  if (sources != 1) throw Error(ErrorKind::Validation, "cli", "give exactly one of tapes, preset or spec file");
  for (const auto& t : tapes)
    if (!fs::is_regular_file(t)) throw Error(ErrorKind::Io, "cli", "tape not found: " + t.string());
  if (spec_file && !fs::is_regular_file(*spec_file))
    throw Error(ErrorKind::Io, "cli", "spec file not found: " + spec_file->string());
  if (preset) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), *preset) == names.end())
      throw Error(ErrorKind::Validation, "cli", "unknown preset '" + *preset + "'");
  }
  SessionWindow::parse(session);
  if (L < 0 || L_pos < 0 || L_neg < 0 || L_sig < 1)
    throw Error(ErrorKind::Validation, "cli", "lag settings must be non-negative (L_sig >= 1)");
  if (noise_l_min < 1 || noise_l_min >= L_sig)
    throw Error(ErrorKind::Validation, "cli", "noise fit range must contain at least two lags");
  for (long l : deviation_lags)
    if (l < 1 || l > L_neg) throw Error(ErrorKind::Validation, "cli", "deviation lags must lie in 1..L_neg");
  if (out_root.empty()) throw Error(ErrorKind::Validation, "cli", "empty output root");
}

json RunConfig::to_json() const {
  json j;
  json t = json::array();
  for (const auto& p : tapes) t.push_back(p.string());
  j["tapes"] = t;
  j["session"] = session;
  j["tick_size"] = tick_size ? json(*tick_size) : json(nullptr);
  j["preset"] = preset ? json(*preset) : json(nullptr);
  j["spec"] = spec_file ? json(spec_file->string()) : json(nullptr);
  j["n"] = n ? json(*n) : json(nullptr);
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["variant"] = std::string(to_string(variant));
  j["L"] = L;
  j["L_pos"] = L_pos;
  j["L_neg"] = L_neg;
  j["L_sig"] = L_sig;
  j["n_equations"] = n_equations;
  j["fit_noise"] = fit_noise;
  j["fit_on_ld"] = fit_on_ld;
  j["noise_l_min"] = noise_l_min;
  j["deviation_lags"] = deviation_lags;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  auto str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  try {
    if (j.contains("tapes"))
      for (const auto& t : j["tapes"]) c.tapes.emplace_back(t.get<std::string>());
    if (auto s = str("session")) c.session = *s;
    c.tick_size = str("tick_size");
    c.preset = str("preset");
    if (auto s = str("spec")) c.spec_file = *s;
    if (j.contains("n") && !j["n"].is_null()) c.n = j["n"].get<std::size_t>();
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    if (auto s = str("variant")) c.variant = model_variant_from_string(*s);
    c.L = j.value("L", c.L);
    c.L_pos = j.value("L_pos", c.L_pos);
    c.L_neg = j.value("L_neg", c.L_neg);
    c.L_sig = j.value("L_sig", c.L_sig);
    c.n_equations = j.value("n_equations", c.n_equations);
    c.fit_noise = j.value("fit_noise", c.fit_noise);
    c.fit_on_ld = j.value("fit_on_ld", c.fit_on_ld);
    c.noise_l_min = j.value("noise_l_min", c.noise_l_min);
    if (j.contains("deviation_lags")) c.deviation_lags = j["deviation_lags"].get<std::vector<long>>();
    if (auto s = str("out")) c.out_root = *s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "cli", std::string("config: ") + e.what());
  }
  return c;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(to_json().dump())));
  return buf;
}

GeneratorSpec synthetic_spec(const RunConfig& config) {
  GeneratorSpec spec;
  if (config.preset) spec = preset(*config.preset);
  else if (config.spec_file) spec = generator_spec_from_json(read_json_file(*config.spec_file));
  else throw Error(ErrorKind::Validation, "cli", "no synthetic source configured");
  if (config.n) spec.n = *config.n;
  if (config.seed) spec.seed = *config.seed;
  spec.validate();
  return spec;
}

std::vector<EventSeries> load_inputs(const RunConfig& config) {
  std::vector<EventSeries> out;
  if (config.tapes.empty()) {
    out.push_back(generate(synthetic_spec(config)));
    return out;
  }
  TapeOptions opts;
  opts.session = SessionWindow::parse(config.session);
  opts.tick_size = config.tick_size;
  std::vector<std::future<EventSeries>> jobs;
  for (const auto& path : config.tapes) {
    TapeOptions o = opts;
    o.instrument = path.stem().string();
    jobs.push_back(std::async(std::launch::async, [path, o] { return ingest_tape(path, o); }));
  }
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

namespace {

struct Analysis {
  CorrelationSet corr;
  ResponseSet resp;
  std::optional<TimKernel> tim;
  std::optional<InfluenceKernel> hdim;
  ResponsePrediction pred;
  std::vector<long> sig_lags;
  std::vector<double> D_base;
  std::vector<double> D_model;
  std::optional<NoiseFitResult> noise_fit;
  NoiseParams noise;
  std::vector<long> dev_lags;
  std::vector<double> deviation;
};

std::vector<double> model_signature(const Analysis& a, ModelVariant v, const NoiseParams& noise) {
  switch (v) {
    case ModelVariant::Tim1: return signature_tim1(*a.tim, a.corr, noise, a.sig_lags);
    case ModelVariant::Tim2: return signature_tim2(*a.tim, a.corr, noise, a.sig_lags);
    case ModelVariant::Hdim2: return signature_hdim2(*a.hdim, a.corr, noise, a.sig_lags);
  }
  return {};
}

Analysis analyse(const EventSeries& series, const RunConfig& config) {
  Analysis a;
  const int horizon = config.L + std::max({config.L_neg, config.L_pos, config.L_sig});
  a.corr = estimate_correlations(series, horizon);
  ResponseOptions ro;
  ro.L_pos = config.L_pos;
  ro.L_neg = config.L_neg;
  ro.L_sig = config.L_sig;
  if (config.variant == ModelVariant::Hdim2) {
    const int neq = config.n_equations < 0 ? config.L : config.n_equations;
    ro.L_pair = neq;
    ro.L_pos = std::max(ro.L_pos, neq);
  }
  a.resp = estimate_responses(series, ro);

  switch (config.variant) {
    case ModelVariant::Tim1:
    case ModelVariant::Tim2: {
      CalibrationOptions co;
      co.n_equations = config.n_equations;
      a.tim = config.variant == ModelVariant::Tim1 ? calibrate_tim1(a.corr, a.resp, config.L, co)
                                                   : calibrate_tim2(a.corr, a.resp, config.L, co);
      a.pred = predict_response_tim(*a.tim, a.corr, config.L_neg, config.L_pos);
      break;
    }
    case ModelVariant::Hdim2: {
      HdimOptions ho;
      ho.n_equations = config.n_equations;
      ho.series = &series;
      a.hdim = calibrate_hdim2(a.corr, a.resp, config.L, ho);
      a.pred = predict_response_hdim2(*a.hdim, a.corr, config.L_neg, config.L_pos);
      break;
    }
  }

  a.sig_lags = lag_range(1, config.L_sig);
  a.D_base = model_signature(a, config.variant, NoiseParams{});
  if (config.fit_noise) {
    std::vector<double> emp, base;
    std::vector<long> lags;
    for (long l = config.noise_l_min; l <= config.L_sig; ++l) {
      emp.push_back(a.resp.D[static_cast<std::size_t>(l)]);
      base.push_back(a.D_base[static_cast<std::size_t>(l - 1)]);
      lags.push_back(l);
    }
    NoiseFitOptions no;
    no.fit_on_ld = config.fit_on_ld;
    a.noise_fit = fit_noise(emp, base, lags, no);
    a.noise = a.noise_fit->params;
  }
  a.D_model.resize(a.D_base.size());
  for (std::size_t i = 0; i < a.D_base.size(); ++i)
    a.D_model[i] = a.D_base[i] + a.noise.D_LF + a.noise.D_HF / static_cast<double>(a.sig_lags[i]);

  a.dev_lags = config.deviation_lags.empty() ? lag_range(1, config.L_neg) : config.deviation_lags;
  a.deviation = deviation_ratio(a.resp, a.pred.R, a.dev_lags);
  return a;
}

std::string fmt(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

double lag_value(const LagSeries& s, long l) {
  return s.contains(l) ? s.at(l) : std::numeric_limits<double>::quiet_NaN();
}

std::string predicted_response_csv(const Analysis& a, std::string_view prov) {
  std::ostringstream out;
  out << "# " << prov << '\n' << "lag,R_emp,R_emp_se,R_model";
  const bool cond = a.pred.has_conditional() && a.resp.has_conditional();
  if (cond)
    for (EventType t : kEventTypes)
      out << ",R_emp_" << to_string(t) << ",R_emp_se_" << to_string(t) << ",R_model_" << to_string(t);
  out << '\n';
  for (long l = a.pred.R.min_lag; l <= a.pred.R.max_lag(); ++l) {
    out << l << ',' << fmt(lag_value(a.resp.R, l)) << ',' << fmt(lag_value(a.resp.R_se, l)) << ','
        << fmt(a.pred.R.at(l));
    if (cond)
      for (EventType t : kEventTypes)
        out << ',' << fmt(lag_value(a.resp.R_cond[index(t)], l)) << ','
            << fmt(lag_value(a.resp.R_cond_se[index(t)], l)) << ',' << fmt(a.pred.R_cond[index(t)].at(l));
    out << '\n';
  }
  return out.str();
}

std::string predicted_signature_csv(const Analysis& a, std::string_view prov) {
  std::ostringstream out;
  out << "# " << prov << '\n' << "lag,D_emp,D_emp_se,D_model_noiseless,D_model\n";
  for (std::size_t i = 0; i < a.sig_lags.size(); ++i) {
    const auto l = static_cast<std::size_t>(a.sig_lags[i]);
    out << l << ',' << fmt(a.resp.D[l]) << ',' << fmt(a.resp.D_se[l]) << ',' << fmt(a.D_base[i]) << ','
        << fmt(a.D_model[i]) << '\n';
  }
  return out.str();
}

std::string deviation_csv(const Analysis& a, std::string_view prov) {
  std::ostringstream out;
  out << "# " << prov << '\n' << "lag,deviation_ratio\n";
  for (std::size_t i = 0; i < a.dev_lags.size(); ++i) out << a.dev_lags[i] << ',' << fmt(a.deviation[i]) << '\n';
  return out.str();
}

template <class F>
std::string to_text(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

InstrumentReport report_instrument(const EventSeries& series, const RunConfig& config) {
  const Analysis a = analyse(series, config);
  const std::string prov = "propkit " + std::string(library_version()) + " config=" + config.hash();

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("correlations.json", to_json(a.corr).dump(1));
  files.emplace_back("correlations.csv", to_text([&](std::ostream& o) { write_correlations_csv(a.corr, o, prov); }));
  files.emplace_back("responses.json", to_json(a.resp).dump(1));
  files.emplace_back("responses.csv", to_text([&](std::ostream& o) { write_responses_csv(a.resp, o, prov); }));
  files.emplace_back("kernel.json", (a.tim ? to_json(*a.tim) : to_json(*a.hdim)).dump(1));
  files.emplace_back("predicted_response.csv", predicted_response_csv(a, prov));
  files.emplace_back("predicted_signature.csv", predicted_signature_csv(a, prov));
  files.emplace_back("deviation_ratio.csv", deviation_csv(a, prov));

  double max_dev = 0.0;
  for (double d : a.deviation)
    if (std::isfinite(d)) max_dev = std::max(max_dev, std::abs(d));
  json summary = {{"instrument", series.instrument()},
                  {"variant", std::string(to_string(config.variant))},
                  {"version", std::string(library_version())},
                  {"config_hash", config.hash()},
                  {"n_events", series.size()},
                  {"days", series.day_count()},
                  {"probs", {{"NC", a.corr.probs[0]}, {"C", a.corr.probs[1]}}},
                  {"sigma_trade", a.resp.sigma_trade},
                  {"kernel_residual", a.tim ? a.tim->residual : a.hdim->residual},
                  {"max_abs_deviation_ratio", max_dev}};
  if (a.hdim) {
    const double fr = a.hdim->factorization_residual;
    summary["factorization_residual"] = std::isfinite(fr) ? json(fr) : json(nullptr);
  }
  summary["noise_fit"] = a.noise_fit ? to_json(*a.noise_fit) : json(nullptr);
  json names = json::array();
  for (const auto& f : files) names.push_back(f.first);
  summary["files"] = names;
  files.emplace_back("summary.json", summary.dump(1));

  const fs::path dir = config.out_root / series.instrument() / std::string(to_string(config.variant));
  fs::path stage = dir;
  stage += ".partial";
  std::error_code ec;
  fs::remove_all(stage, ec);
  try {
    fs::create_directories(stage);
    for (const auto& [name, content] : files) write_file_atomic(stage / name, content);
    fs::remove_all(dir);
    fs::rename(stage, dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(stage, ec);
    throw Error(ErrorKind::Io, "cli", e.what());
  } catch (...) {
    fs::remove_all(stage, ec);
    throw;
  }
  return {series.instrument(), dir, summary};
}

}  // namespace

std::vector<InstrumentReport> run_pipeline(const RunConfig& config) {
  config.validate();
  const std::vector<EventSeries> inputs = load_inputs(config);
  std::vector<std::future<InstrumentReport>> jobs;
  for (const auto& s : inputs)
    jobs.push_back(std::async(std::launch::async, [&s, &config] { return report_instrument(s, config); }));
  std::vector<InstrumentReport> out;
  std::exception_ptr first;
  for (auto& j : jobs) {
    try {
      out.push_back(j.get());
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return out;
}

bool RoundtripReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const RoundtripCheck& c) { return c.pass; });
}

json RoundtripReport::to_json() const {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name}, {"value", fmt(c.value).empty() ? json(nullptr) : json(c.value)},
                   {"bound", c.bound}, {"pass", c.pass}});
  return {{"pass", pass()}, {"checks", arr}};
}

namespace {

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

void add_check(RoundtripReport& r, std::string name, double value, double bound) {
  r.checks.push_back({std::move(name), value, bound, std::isfinite(value) && value <= bound});
}

void tim_kernel_checks(RoundtripReport& r, const TimKernel& truth, const TimKernel& fit) {
  const long lmax = std::min<long>(50, fit.L + 1);
  std::array<std::vector<double>, kTypeCount> err, tru;
  double scale = 0.0;
  for (EventType t : kEventTypes) {
    for (long l = 1; l <= lmax; ++l) {
      tru[index(t)].push_back(truth.g(t, l));
      err[index(t)].push_back(fit.g(t, l) - truth.g(t, l));
    }
    scale = std::max(scale, rms(tru[index(t)]));
  }
  if (fit.variant == TimVariant::TIM1) {
    add_check(r, "kernel_G_rel_rms", rms(err[index(EventType::C)]) / scale, 0.05);
  } else {
    for (EventType t : kEventTypes)
      add_check(r, "kernel_G_" + std::string(to_string(t)) + "_rel_rms", rms(err[index(t)]) / scale, 0.05);
  }
}

void hdim_kernel_checks(RoundtripReport& r, const InfluenceKernel& truth, const InfluenceKernel& fit) {
  const long lmax = std::min(20, std::min(truth.L, fit.L));
  for (EventType past : kEventTypes) {
    std::vector<double> err, tru;
    for (long n = 1; n <= lmax; ++n) {
      tru.push_back(truth.k(past, EventType::C, n));
      err.push_back(fit.k(past, EventType::C, n) - truth.k(past, EventType::C, n));
    }
    add_check(r, "kappa_" + std::string(to_string(past)) + "_C_rel_rms", rms(err) / rms(tru), 0.10);
  }
  const double g = truth.G1[index(EventType::C)];
  add_check(r, "G1_C_rel_err", std::abs(fit.G1[index(EventType::C)] - g) / std::abs(g), 0.10);
}

}  // namespace

RoundtripReport run_roundtrip(const RunConfig& config) {
  config.validate();
  if (!config.tapes.empty()) throw Error(ErrorKind::Validation, "cli", "roundtrip needs a synthetic source");
  const GeneratorSpec spec = synthetic_spec(config);
  const EventSeries series = generate(spec);
  RunConfig c = config;
  c.fit_noise = false;
  Analysis a = analyse(series, c);

  RoundtripReport r;
  if (const auto* tk = std::get_if<TimKernel>(&spec.impact)) {
    if (a.tim && !(tk->variant == TimVariant::TIM2 && a.tim->variant == TimVariant::TIM1)) tim_kernel_checks(r, *tk, *a.tim);
  } else if (a.hdim) {
    const auto& ik = std::get<InfluenceKernel>(spec.impact);
    if (!ik.unconstrained && !ik.pooled) hdim_kernel_checks(r, ik, *a.hdim);
  }

  // negative-lag responses against the empirical curves
  const std::array<long, 3> probe{1, 10, 100};
  for (long l : probe) {
    if (l > config.L_neg) continue;
    if (a.pred.has_conditional()) {
      for (EventType t : kEventTypes) {
        const double d = std::abs(a.resp.R_cond[index(t)].at(-l) - a.pred.R_cond[index(t)].at(-l));
        add_check(r, "R_" + std::string(to_string(t)) + "(-" + std::to_string(l) + ")_in_se",
                  d / a.resp.R_cond_se[index(t)].at(-l), 3.0);
      }
    } else {
      const double d = std::abs(a.resp.R.at(-l) - a.pred.R.at(-l));
      add_check(r, "R(-" + std::to_string(l) + ")_in_se", d / a.resp.R_se.at(-l), 3.0);
    }
  }
  // signature with the generating noise
  const auto D = model_signature(a, config.variant, spec.noise);
  for (long l : probe) {
    if (l > config.L_sig) continue;
    const auto i = static_cast<std::size_t>(l);
    add_check(r, "D(" + std::to_string(l) + ")_in_se", std::abs(a.resp.D[i] - D[i - 1]) / a.resp.D_se[i], 3.0);
  }
  return r;
}

}  // namespace propkit
