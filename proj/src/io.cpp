#include "propkit/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <system_error>

#include "propkit/error.hpp"

#ifndef PROPKIT_VERSION
#define PROPKIT_VERSION "0.0.0"
#endif

namespace propkit {

std::string_view library_version() { return PROPKIT_VERSION; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string pair_key(EventType a, EventType b) {
  return std::string(to_string(a)) + "_" + std::string(to_string(b));
}

// NaN is written as null; read it back the same way
double num(const json& j) {
  if (j.is_null()) return kNaN;
  if (!j.is_number()) throw Error(ErrorKind::Parse, "io", "expected a number, got " + j.dump());
  return j.get<double>();
}

json num_array(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return out;
}

std::vector<double> read_array(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "io", "expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(num(x));
  return out;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::Parse, "io", std::string("missing key '") + key + "'");
  return *it;
}

json pair_json(const PairArray& a) {
  json out = json::object();
  for (EventType p1 : kEventTypes)
    for (EventType p2 : kEventTypes)
      if (!a[index(p1)][index(p2)].empty()) out[pair_key(p1, p2)] = num_array(a[index(p1)][index(p2)]);
  return out;
}

PairArray read_pair(const json& j) {
  PairArray out;
  if (j.is_null()) return out;
  for (EventType p1 : kEventTypes)
    for (EventType p2 : kEventTypes) {
      auto it = j.find(pair_key(p1, p2));
      if (it != j.end()) out[index(p1)][index(p2)] = read_array(*it);
    }
  return out;
}

json probs_json(const std::array<double, kTypeCount>& p) {
  return {{"NC", p[index(EventType::NC)]}, {"C", p[index(EventType::C)]}};
}

std::array<double, kTypeCount> read_probs(const json& j) {
  return {num(field(j, "NC")), num(field(j, "C"))};
}

json lag_json(const LagSeries& s) { return {{"min_lag", s.min_lag}, {"values", num_array(s.values)}}; }

LagSeries read_lag(const json& j) {
  LagSeries s;
  if (j.is_null()) return s;
  s.min_lag = field(j, "min_lag").get<long>();
  s.values = read_array(field(j, "values"));
  return s;
}

json typed_lag_json(const std::array<LagSeries, kTypeCount>& a) {
  json out = json::object();
  for (EventType t : kEventTypes)
    if (!a[index(t)].values.empty()) out[std::string(to_string(t))] = lag_json(a[index(t)]);
  return out;
}

std::array<LagSeries, kTypeCount> read_typed_lag(const json& j) {
  std::array<LagSeries, kTypeCount> out;
  if (j.is_null()) return out;
  for (EventType t : kEventTypes) {
    auto it = j.find(std::string(to_string(t)));
    if (it != j.end()) out[index(t)] = read_lag(*it);
  }
  return out;
}

const json& opt(const json& j, const char* key) {
  static const json null_value;
  auto it = j.find(key);
  return it == j.end() ? null_value : *it;
}

void provenance_line(std::ostream& out, std::string_view provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
}

void csv_value(std::ostream& out, double x) {
  out << ',';
  if (std::isfinite(x)) out << x;
}

double get_or_nan(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : kNaN; }

double lag_or_nan(const LagSeries& s, long lag) { return s.contains(lag) ? s.at(lag) : kNaN; }

}  // namespace

json to_json(const CorrelationSet& c) {
  return {{"instrument", c.instrument}, {"L", c.max_lag},        {"n_events", c.n_events},
          {"probs", probs_json(c.probs)}, {"C", num_array(c.C)},   {"C_se", num_array(c.C_se)},
          {"C_cond", pair_json(c.C_cond)}, {"C_cond_se", pair_json(c.C_cond_se)}, {"Pi", pair_json(c.Pi)}};
}

CorrelationSet correlations_from_json(const json& j) {
  CorrelationSet c;
  c.instrument = j.value("instrument", std::string());
  c.max_lag = field(j, "L").get<int>();
  c.n_events = j.value("n_events", std::size_t{0});
  c.probs = read_probs(field(j, "probs"));
  c.C = read_array(field(j, "C"));
  c.C_se = j.contains("C_se") ? read_array(j["C_se"]) : std::vector<double>(c.C.size(), kNaN);
  c.C_cond = read_pair(opt(j, "C_cond"));
  c.C_cond_se = read_pair(opt(j, "C_cond_se"));
  c.Pi = read_pair(opt(j, "Pi"));
  if (c.C.size() != static_cast<std::size_t>(c.max_lag) + 1)
    throw Error(ErrorKind::Parse, "io", "correlation array length does not match L");
  return c;
}

json to_json(const ResponseSet& r) {
  return {{"instrument", r.instrument},
          {"L_pos", r.L_pos},
          {"L_neg", r.L_neg},
          {"n_events", r.n_events},
          {"probs", probs_json(r.probs)},
          {"sigma_trade", r.sigma_trade},
          {"R", lag_json(r.R)},
          {"S", lag_json(r.S)},
          {"R_se", lag_json(r.R_se)},
          {"S_se", lag_json(r.S_se)},
          {"R_cond", typed_lag_json(r.R_cond)},
          {"S_cond", typed_lag_json(r.S_cond)},
          {"R_cond_se", typed_lag_json(r.R_cond_se)},
          {"S_cond_se", typed_lag_json(r.S_cond_se)},
          {"S_pair", pair_json(r.S_pair)},
          {"S_pair_se", pair_json(r.S_pair_se)},
          {"D", num_array(r.D)},
          {"D_se", num_array(r.D_se)}};
}

ResponseSet responses_from_json(const json& j) {
  ResponseSet r;
  r.instrument = j.value("instrument", std::string());
  r.L_pos = field(j, "L_pos").get<int>();
  r.L_neg = field(j, "L_neg").get<int>();
  r.n_events = j.value("n_events", std::size_t{0});
  r.probs = read_probs(field(j, "probs"));
  r.sigma_trade = num(field(j, "sigma_trade"));
  r.R = read_lag(field(j, "R"));
  r.S = read_lag(field(j, "S"));
  r.R_se = read_lag(opt(j, "R_se"));
  r.S_se = read_lag(opt(j, "S_se"));
  r.R_cond = read_typed_lag(opt(j, "R_cond"));
  r.S_cond = read_typed_lag(opt(j, "S_cond"));
  r.R_cond_se = read_typed_lag(opt(j, "R_cond_se"));
  r.S_cond_se = read_typed_lag(opt(j, "S_cond_se"));
  r.S_pair = read_pair(opt(j, "S_pair"));
  r.S_pair_se = read_pair(opt(j, "S_pair_se"));
  r.D = j.contains("D") ? read_array(j["D"]) : std::vector<double>{};
  r.D_se = j.contains("D_se") ? read_array(j["D_se"]) : std::vector<double>{};
  return r;
}

json to_json(const TimKernel& k) {
  json G = json::object(), dG = json::object();
  if (k.variant == TimVariant::TIM1) {
    G["all"] = num_array(k.G[0]);
    dG["all"] = num_array(k.dG[0]);
  } else {
    for (EventType t : kEventTypes) {
      G[std::string(to_string(t))] = num_array(k.G[index(t)]);
      dG[std::string(to_string(t))] = num_array(k.dG[index(t)]);
    }
  }
  return {{"variant", std::string(to_string(k.variant))}, {"L", k.L}, {"G", G}, {"dG", dG}, {"residual", k.residual}};
}

TimKernel tim_kernel_from_json(const json& j) {
  const std::string v = field(j, "variant").get<std::string>();
  const json& dG = field(j, "dG");
  TimKernel k;
  if (v == "tim1") {
    k = TimKernel::tim1(read_array(field(dG, "all")));
  } else if (v == "tim2") {
    k = TimKernel::tim2(read_array(field(dG, "NC")), read_array(field(dG, "C")));
  } else {
    throw Error(ErrorKind::Parse, "io", "unknown TIM variant '" + v + "'");
  }
  k.residual = j.contains("residual") ? num(j["residual"]) : 0.0;
  return k;
}

json to_json(const InfluenceKernel& k) {
  json kappa = json::object();
  for (EventType past : kEventTypes)
    for (EventType present : kEventTypes) {
      if (!k.unconstrained && present == EventType::NC) continue;
      if (k.pooled && (past != EventType::C || present != EventType::C)) continue;
      kappa[pair_key(past, present)] = num_array(k.kappa[index(past)][index(present)]);
    }
  return {{"L", k.L},
          {"kappa", kappa},
          {"G1", probs_json(k.G1)},
          {"unconstrained", k.unconstrained},
          {"pooled", k.pooled},
          {"residual", k.residual},
          {"factorization_residual",
           std::isfinite(k.factorization_residual) ? json(k.factorization_residual) : json(nullptr)}};
}

InfluenceKernel influence_kernel_from_json(const json& j) {
  InfluenceKernel k = InfluenceKernel::zero(field(j, "L").get<int>());
  const json& kappa = field(j, "kappa");
  for (EventType past : kEventTypes)
    for (EventType present : kEventTypes) {
      auto it = kappa.find(pair_key(past, present));
      if (it == kappa.end()) continue;
      auto v = read_array(*it);
      if (v.size() != static_cast<std::size_t>(k.L) + 1)
        throw Error(ErrorKind::Parse, "io", "kappa arrays need L + 1 entries");
      k.kappa[index(past)][index(present)] = std::move(v);
    }
  k.G1 = read_probs(field(j, "G1"));
  k.unconstrained = j.value("unconstrained", false);
  k.pooled = j.value("pooled", false);
  k.residual = j.contains("residual") ? num(j["residual"]) : 0.0;
  k.factorization_residual = j.contains("factorization_residual") ? num(j["factorization_residual"]) : kNaN;
  k.validate();
  return k;
}

json to_json(const DarSpec& s) {
  return {{"p", s.p()}, {"lambda", num_array(s.lambda)}, {"rho", s.rho}};
}

DarSpec dar_spec_from_json(const json& j) {
  DarSpec s;
  if (auto it = j.find("power_law"); it != j.end()) {
    s = power_law_dar(num(field(*it, "gamma")), field(*it, "p").get<int>(), num(field(*it, "rho")));
  } else {
    s.lambda = read_array(field(j, "lambda"));
    s.rho = num(field(j, "rho"));
    if (j.contains("p") && j["p"].get<int>() != s.p())
      throw Error(ErrorKind::Parse, "io", "'p' does not match the length of 'lambda'");
  }
  s.allow_antipersistent = j.value("allow_antipersistent", false);
  return s;
}

json to_json(const NoiseParams& n) { return {{"D_LF", n.D_LF}, {"D_HF", n.D_HF}}; }

NoiseParams noise_from_json(const json& j) { return {num(field(j, "D_LF")), num(field(j, "D_HF"))}; }

json to_json(const NoiseFitResult& f) {
  return {{"D_LF", f.params.D_LF},
          {"D_HF", f.params.D_HF},
          {"sse", f.sse},
          {"range", {f.l_min, f.l_max}},
          {"clamped", {{"D_LF", f.clamped[0]}, {"D_HF", f.clamped[1]}}},
          {"fit_on_ld", f.fit_on_ld}};
}

json to_json(const TypeProcess& t) {
  json out = {{"kind", std::string(to_string(t.kind))}, {"reversal_after_c", t.reversal_after_c}};
  switch (t.kind) {
    case TypeProcess::Kind::Iid:
      out["p_c"] = t.p_c;
      break;
    case TypeProcess::Kind::Markov:
      out["transition"] = {{"NC_NC", t.transition[0][0]},
                           {"NC_C", t.transition[0][1]},
                           {"C_NC", t.transition[1][0]},
                           {"C_C", t.transition[1][1]}};
      break;
    case TypeProcess::Kind::Scripted: {
      std::string s;
      for (EventType e : t.script) s += e == EventType::C ? 'C' : 'N';
      out["script"] = s;
      break;
    }
    case TypeProcess::Kind::Classified:
      break;
  }
  return out;
}

TypeProcess type_process_from_json(const json& j) {
  TypeProcess t;
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind == "iid") {
    t.kind = TypeProcess::Kind::Iid;
    t.p_c = num(field(j, "p_c"));
  } else if (kind == "markov") {
    t.kind = TypeProcess::Kind::Markov;
    const json& tr = field(j, "transition");
    t.transition[0][1] = num(field(tr, "NC_C"));
    t.transition[1][1] = num(field(tr, "C_C"));
    t.transition[0][0] = tr.contains("NC_NC") ? num(tr["NC_NC"]) : 1.0 - t.transition[0][1];
    t.transition[1][0] = tr.contains("C_NC") ? num(tr["C_NC"]) : 1.0 - t.transition[1][1];
  } else if (kind == "scripted") {
    t.kind = TypeProcess::Kind::Scripted;
    for (char c : field(j, "script").get<std::string>()) {
      if (c == 'C') t.script.push_back(EventType::C);
      else if (c == 'N') t.script.push_back(EventType::NC);
      else throw Error(ErrorKind::Parse, "io", "script characters must be 'N' or 'C'");
    }
  } else if (kind == "classified") {
    t.kind = TypeProcess::Kind::Classified;
  } else {
    throw Error(ErrorKind::Parse, "io", "unknown type process '" + kind + "'");
  }
  t.reversal_after_c = j.contains("reversal_after_c") ? num(j["reversal_after_c"]) : 0.0;
  return t;
}

json to_json(const GeneratorSpec& g) {
  json impact;
  if (const auto* tk = std::get_if<TimKernel>(&g.impact)) {
    impact = to_json(*tk);
    impact["model"] = "tim";
  } else {
    impact = to_json(std::get<InfluenceKernel>(g.impact));
    impact["model"] = "hdim";
  }
  return {{"instrument", g.instrument},
          {"n", g.n},
          {"seed", g.seed},
          {"start_mid", g.start_mid},
          {"events_per_day", g.events_per_day},
          {"signs", to_json(g.signs)},
          {"types", to_json(g.types)},
          {"impact", impact},
          {"noise", to_json(g.noise)}};
}

GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec g;
  if (auto it = j.find("preset"); it != j.end()) g = preset(it->get<std::string>());
  else {
    // without a preset the process descriptions are mandatory
    field(j, "signs");
    field(j, "types");
    field(j, "impact");
  }
  if (j.contains("instrument")) g.instrument = j["instrument"].get<std::string>();
  if (j.contains("n")) g.n = j["n"].get<std::size_t>();
  if (j.contains("seed")) g.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("start_mid")) g.start_mid = num(j["start_mid"]);
  if (j.contains("events_per_day")) g.events_per_day = j["events_per_day"].get<std::size_t>();
  if (j.contains("signs")) g.signs = dar_spec_from_json(j["signs"]);
  if (j.contains("types")) g.types = type_process_from_json(j["types"]);
  if (j.contains("noise")) g.noise = noise_from_json(j["noise"]);
  if (j.contains("impact")) {
    const json& im = j["impact"];
    const std::string model = field(im, "model").get<std::string>();
    if (model == "tim") g.impact = tim_kernel_from_json(im);
    else if (model == "hdim") g.impact = influence_kernel_from_json(im);
    else throw Error(ErrorKind::Parse, "io", "impact model must be 'tim' or 'hdim'");
  }
  g.validate();
  return g;
}

void write_correlations_csv(const CorrelationSet& c, std::ostream& out, std::string_view provenance) {
  provenance_line(out, provenance);
  out << std::setprecision(17);
  out << "lag,C,C_se";
  const bool typed = c.two_type();
  if (typed) {
    for (const char* name : {"C", "C_se", "Pi"})
      for (EventType a : kEventTypes)
        for (EventType b : kEventTypes) out << ',' << name << '_' << pair_key(a, b);
  }
  out << '\n';
  for (int l = 0; l <= c.max_lag; ++l) {
    out << l;
    csv_value(out, c.C[l]);
    csv_value(out, get_or_nan(c.C_se, l));
    if (typed) {
      for (const PairArray* arr : {&c.C_cond, &c.C_cond_se, &c.Pi})
        for (EventType a : kEventTypes)
          for (EventType b : kEventTypes) csv_value(out, get_or_nan((*arr)[index(a)][index(b)], l));
    }
    out << '\n';
  }
}

void write_responses_csv(const ResponseSet& r, std::ostream& out, std::string_view provenance) {
  provenance_line(out, provenance);
  out << std::setprecision(17);
  out << "lag,R,R_se,S,S_se";
  const bool cond = r.has_conditional();
  if (cond) out << ",R_NC,R_C,S_NC,S_C";
  out << '\n';
  for (long l = r.R.min_lag; l <= r.R.max_lag(); ++l) {
    out << l;
    csv_value(out, r.R.at(l));
    csv_value(out, lag_or_nan(r.R_se, l));
    csv_value(out, lag_or_nan(r.S, l));
    csv_value(out, lag_or_nan(r.S_se, l));
    if (cond) {
      for (EventType t : kEventTypes) csv_value(out, lag_or_nan(r.R_cond[index(t)], l));
      for (EventType t : kEventTypes) csv_value(out, lag_or_nan(r.S_cond[index(t)], l));
    }
    out << '\n';
  }
}

void write_signature_csv(const ResponseSet& r, std::ostream& out, std::string_view provenance) {
  provenance_line(out, provenance);
  out << std::setprecision(17);
  out << "lag,D,D_se\n";
  for (std::size_t l = 1; l < r.D.size(); ++l) {
    out << l;
    csv_value(out, r.D[l]);
    csv_value(out, get_or_nan(r.D_se, l));
    out << '\n';
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "io", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "io", path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "io", "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::Io, "io", "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "io", "cannot rename onto " + path.string());
  }
}

}  // namespace propkit
