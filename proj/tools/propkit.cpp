#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "propkit/error.hpp"
#include "propkit/io.hpp"
#include "propkit/pipeline.hpp"

using namespace propkit;
namespace fs = std::filesystem;

namespace {

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") std::cout << content;
  else write_file_atomic(path, content);
}

std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& cols,
                     const std::vector<long>& lags) {
  std::ostringstream out;
  out << std::setprecision(17) << "lag";
  for (const auto& h : header) out << ',' << h;
  out << '\n';
  for (std::size_t i = 0; i < lags.size(); ++i) {
    out << lags[i];
    for (const auto& c : cols) {
      out << ',';
      if (std::isfinite(c[i])) out << c[i];
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::int8_t> read_sign_column(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cli", "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sign") throw Error(ErrorKind::Parse, "cli", path.string() + ": expected a 'sign' header");
  std::vector<std::int8_t> out;
  while (std::getline(in, line)) {
    if (line == "1" || line == "+1") out.push_back(1);
    else if (line == "-1") out.push_back(-1);
    else if (!line.empty()) throw Error(ErrorKind::Parse, "cli", path.string() + ": bad sign '" + line + "'");
  }
  return out;
}

TapeOptions tape_options(const RunConfig& c, const std::string& tape, const std::string& instrument) {
  TapeOptions o;
  o.session = SessionWindow::parse(c.session);
  o.tick_size = c.tick_size;
  o.instrument = instrument.empty() ? fs::path(tape).stem().string() : instrument;
  return o;
}

fs::path default_out_root() {
  if (const char* env = std::getenv("PROPKIT_OUT"); env != nullptr && *env != '\0') return env;
  return "out";
}

/// The JSON config is loaded before the flags are bound, so flags override it.
RunConfig preload_config(int argc, char** argv) {
  RunConfig c;
  c.out_root = default_out_root();
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    std::string path;
    if (a == "--config" && i + 1 < argc) path = argv[i + 1];
    else if (a.rfind("--config=", 0) == 0) path = a.substr(9);
    if (!path.empty()) {
      const fs::path root = c.out_root;
      const json j = read_json_file(path);
      c = RunConfig::from_json(j);
      if (!j.contains("out")) c.out_root = root;
    }
  }
  return c;
}

struct NoiseArgs {
  std::string noise_file;
  double d_lf = 0.0;
  double d_hf = 0.0;
  bool fit = false;
  bool fit_on_ld = false;
  std::string resp_file;
  std::string noise_out;
};

void add_noise_options(CLI::App* app, NoiseArgs& n) {
  app->add_option("--noise", n.noise_file, "Noise JSON {D_LF, D_HF}");
  app->add_option("--D-LF", n.d_lf, "Low-frequency noise variance");
  app->add_option("--D-HF", n.d_hf, "High-frequency noise variance");
  app->add_flag("--fit-noise", n.fit, "Fit D_LF, D_HF to the empirical signature (needs --resp)");
  app->add_flag("--fit-on-ld", n.fit_on_ld, "Fit l*D(l) instead of D(l)");
  app->add_option("--resp", n.resp_file, "Responses JSON with the empirical signature");
  app->add_option("--noise-out", n.noise_out, "Where to write the noise fit JSON");
}

/// Model curve plus, when responses are given, the empirical curve and the noise fit.
void run_signature(const NoiseArgs& n, long lmax, const std::string& out,
                   const std::function<std::vector<double>(const NoiseParams&, const std::vector<long>&)>& model) {
  const auto lags = lag_range(1, lmax);
  NoiseParams noise{n.d_lf, n.d_hf};
  if (!n.noise_file.empty()) noise = noise_from_json(read_json_file(n.noise_file));
  std::optional<ResponseSet> resp;
  if (!n.resp_file.empty()) resp = responses_from_json(read_json_file(n.resp_file));
  if (n.fit) {
    if (!resp) throw Error(ErrorKind::InvalidInput, "cli", "--fit-noise needs --resp");
    if (static_cast<long>(resp->D.size()) <= lmax)
      throw Error(ErrorKind::Horizon, "cli", "empirical signature is shorter than --lags");
    const auto base = model(NoiseParams{}, lags);
    std::vector<double> emp(resp->D.begin() + 1, resp->D.begin() + 1 + lmax);
    NoiseFitOptions o;
    o.fit_on_ld = n.fit_on_ld;
    const NoiseFitResult fit = fit_noise(emp, base, lags, o);
    noise = fit.params;
    emit(n.noise_out.empty() ? "-" : n.noise_out, to_json(fit).dump(1) + "\n");
  }
  std::vector<std::vector<double>> cols{model(noise, lags)};
  std::vector<std::string> header{"D_model"};
  if (resp && static_cast<long>(resp->D.size()) > lmax) {
    cols.emplace_back(resp->D.begin() + 1, resp->D.begin() + 1 + lmax);
    header.push_back("D_emp");
  }
  emit(out, csv_text(header, cols, lags));
}

std::string prediction_csv(const ResponsePrediction& p) {
  std::vector<long> lags;
  for (long l = p.R.min_lag; l <= p.R.max_lag(); ++l) lags.push_back(l);
  std::vector<std::string> header{"R", "S"};
  std::vector<std::vector<double>> cols{p.R.values, p.S.values};
  if (p.has_conditional())
    for (EventType t : kEventTypes) {
      header.push_back("R_" + std::string(to_string(t)));
      header.push_back("S_" + std::string(to_string(t)));
      cols.push_back(p.R_cond[index(t)].values);
      cols.push_back(p.S_cond[index(t)].values);
    }
  return csv_text(header, cols, lags);
}

void add_run_options(CLI::App* app, RunConfig& c) {
  app->add_option("--config", "JSON run config; flags override its values");
  app->add_option("--tape", c.tapes, "Tape CSV files, one per instrument");
  app->add_option("--session", c.session, "Session window HH:MM-HH:MM")->capture_default_str();
  app->add_option("--tick-size", c.tick_size, "Decimal tick size");
  app->add_option("--preset", c.preset, "Synthetic preset (iid-null, large-tick, small-tick)");
  app->add_option("--spec", c.spec_file, "Generator spec JSON");
  app->add_option("--n", c.n, "Synthetic series length");
  app->add_option("--seed", c.seed, "Generator seed");
  app->add_option("--variant", [&c](const CLI::results_t& r) {
    c.variant = model_variant_from_string(r[0]);
    return true;
  }, "tim1, tim2 or hdim2");
  app->add_option("--L", c.L, "Kernel length")->capture_default_str();
  app->add_option("--L-pos", c.L_pos, "Largest positive response lag")->capture_default_str();
  app->add_option("--L-neg", c.L_neg, "Largest negative response lag")->capture_default_str();
  app->add_option("--L-sig", c.L_sig, "Largest signature lag")->capture_default_str();
  app->add_option("--n-equations", c.n_equations, "Calibration equations (default: square system)");
  app->add_flag("!--no-fit-noise", c.fit_noise, "Skip the noise fit");
  app->add_flag("--fit-on-ld", c.fit_on_ld, "Fit l*D(l) instead of D(l)");
  app->add_option("--noise-l-min", c.noise_l_min, "Smallest lag of the noise fit")->capture_default_str();
  app->add_option("--deviation-lags", c.deviation_lags, "Lags of the deviation-ratio table");
  app->add_option("--out-root", c.out_root, "Output root (env PROPKIT_OUT)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Propagator model calibration and simulation toolkit"};
  app.set_version_flag("--version", std::string(library_version()));
  app.require_subcommand(1);

  RunConfig rc;
  try {
    rc = preload_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  // ingest
  std::string tape, instrument, out;
  auto* ingest = app.add_subcommand("ingest", "Validate a tape and print its summary");
  ingest->add_option("--tape", tape, "Tape CSV")->required();
  ingest->add_option("--session", rc.session, "Session window")->capture_default_str();
  ingest->add_option("--tick-size", rc.tick_size, "Decimal tick size");
  ingest->add_option("--instrument", instrument, "Instrument name (default: file stem)");
  ingest->add_option("--out", out, "Write the canonical tape here");

  // stats
  int stats_L = 1000;
  ResponseOptions ro;
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "Estimate correlations, responses and the signature plot");
  stats->add_option("--tape", tape, "Tape CSV")->required();
  stats->add_option("--session", rc.session, "Session window")->capture_default_str();
  stats->add_option("--tick-size", rc.tick_size, "Decimal tick size");
  stats->add_option("--instrument", instrument, "Instrument name");
  stats->add_option("--L", stats_L, "Largest correlation lag")->capture_default_str();
  stats->add_option("--L-pos", ro.L_pos, "Largest positive response lag")->capture_default_str();
  stats->add_option("--L-neg", ro.L_neg, "Largest negative response lag")->capture_default_str();
  stats->add_option("--L-pair", ro.L_pair, "Largest pair-response lag (negative: none)")->capture_default_str();
  stats->add_option("--L-sig", ro.L_sig, "Largest signature lag (negative: L-pos)")->capture_default_str();
  stats->add_option("--out", stats_out, "Output directory (default: <out-root>/<instrument>/stats)");

  // tim / hdim
  std::string variant = "1", corr_file, resp_file, kernel_file, tape_file;
  int model_L = 100, n_eq = -1, L_neg = 100, L_pos = 100;
  long sig_lags = 100;
  NoiseArgs noise;
  auto* tim = app.add_subcommand("tim", "Transient impact model");
  tim->require_subcommand(1);
  auto* tim_cal = tim->add_subcommand("calibrate", "Solve for the propagator kernel");
  tim_cal->add_option("--variant", variant, "1 or 2")->check(CLI::IsMember({"1", "2", "tim1", "tim2"}))->capture_default_str();
  tim_cal->add_option("--L", model_L, "Kernel length")->capture_default_str();
  tim_cal->add_option("--corr", corr_file, "Correlations JSON")->required();
  tim_cal->add_option("--resp", resp_file, "Responses JSON")->required();
  tim_cal->add_option("--n-equations", n_eq, "Response equations per type");
  tim_cal->add_option("--out", out, "Kernel JSON (default: stdout)");
  auto* tim_pred = tim->add_subcommand("predict", "Model response curves");
  tim_pred->add_option("--kernel", kernel_file, "Kernel JSON")->required();
  tim_pred->add_option("--corr", corr_file, "Correlations JSON")->required();
  tim_pred->add_option("--L-neg", L_neg, "Largest negative lag")->capture_default_str();
  tim_pred->add_option("--L-pos", L_pos, "Largest positive lag")->capture_default_str();
  tim_pred->add_option("--out", out, "CSV (default: stdout)");
  auto* tim_sig = tim->add_subcommand("signature", "Model signature plot");
  tim_sig->add_option("--kernel", kernel_file, "Kernel JSON")->required();
  tim_sig->add_option("--corr", corr_file, "Correlations JSON")->required();
  tim_sig->add_option("--lags", sig_lags, "Largest lag")->capture_default_str();
  tim_sig->add_option("--out", out, "CSV (default: stdout)");
  add_noise_options(tim_sig, noise);

  auto* hdim = app.add_subcommand("hdim", "History dependent impact model (two types)");
  hdim->require_subcommand(1);
  auto* hdim_cal = hdim->add_subcommand("calibrate", "Factorized calibration of the influence kernels");
  hdim_cal->add_option("--L", model_L, "Kernel length")->capture_default_str();
  hdim_cal->add_option("--corr", corr_file, "Correlations JSON")->required();
  hdim_cal->add_option("--resp", resp_file, "Responses JSON with pair responses")->required();
  hdim_cal->add_option("--n-equations", n_eq, "Pair-response equations per type");
  hdim_cal->add_option("--tape", tape_file, "Tape for the factorization residual");
  hdim_cal->add_option("--session", rc.session, "Session window")->capture_default_str();
  hdim_cal->add_option("--tick-size", rc.tick_size, "Decimal tick size");
  hdim_cal->add_option("--out", out, "Kernel JSON (default: stdout)");
  auto* hdim_pred = hdim->add_subcommand("predict", "Model response curves");
  hdim_pred->add_option("--kernel", kernel_file, "Kernel JSON")->required();
  hdim_pred->add_option("--corr", corr_file, "Correlations JSON")->required();
  hdim_pred->add_option("--L-neg", L_neg, "Largest negative lag")->capture_default_str();
  hdim_pred->add_option("--L-pos", L_pos, "Largest positive lag")->capture_default_str();
  hdim_pred->add_option("--out", out, "CSV (default: stdout)");
  auto* hdim_sig = hdim->add_subcommand("signature", "Model signature plot");
  hdim_sig->add_option("--kernel", kernel_file, "Kernel JSON")->required();
  hdim_sig->add_option("--corr", corr_file, "Correlations JSON")->required();
  hdim_sig->add_option("--lags", sig_lags, "Largest lag")->capture_default_str();
  hdim_sig->add_option("--out", out, "CSV (default: stdout)");
  add_noise_options(hdim_sig, noise);

  // dar
  std::string spec_file;
  std::size_t n = 1'000'000;
  std::uint64_t seed = 1;
  int dar_L = 100;
  auto* dar = app.add_subcommand("dar", "Discrete autoregressive sign processes");
  dar->require_subcommand(1);
  auto* dar_sim = dar->add_subcommand("simulate", "Simulate a sign column");
  dar_sim->add_option("--spec", spec_file, "DAR spec JSON")->required();
  dar_sim->add_option("--n", n, "Number of signs")->capture_default_str();
  dar_sim->add_option("--seed", seed, "Seed")->capture_default_str();
  dar_sim->add_option("--out", out, "CSV with a 'sign' column (default: stdout)");
  auto* dar_fwd = dar->add_subcommand("forward", "Sign autocorrelation implied by a spec");
  dar_fwd->add_option("--spec", spec_file, "DAR spec JSON")->required();
  dar_fwd->add_option("--L", dar_L, "Largest lag")->capture_default_str();
  dar_fwd->add_option("--out", out, "CSV (default: stdout)");
  auto* dar_inv = dar->add_subcommand("inverse", "DAR spec reproducing measured correlations");
  dar_inv->add_option("--corr", corr_file, "Correlations JSON")->required();
  dar_inv->add_option("--L", dar_L, "Order (default: all lags)");
  dar_inv->add_option("--out", out, "Spec JSON (default: stdout)");

  // synth
  std::string preset_name, signs_file, spec_out;
  std::optional<std::size_t> synth_n;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic tape");
  auto* synth_src = synth->add_option("--preset", preset_name, "Preset name");
  synth->add_option("--spec", spec_file, "Generator spec JSON")->excludes(synth_src);
  synth->add_option("--n", synth_n, "Series length");
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--signs", signs_file, "Sign column from 'dar simulate' replacing the DAR draws");
  synth->add_option("--out", out, "Tape CSV (default: stdout)");
  synth->add_option("--spec-out", spec_out, "Write the effective generator spec");

  auto* pipeline = app.add_subcommand("pipeline", "Estimate, calibrate, predict and report per instrument");
  add_run_options(pipeline, rc);
  auto* roundtrip = app.add_subcommand("roundtrip", "Generate, recalibrate and check against the truth");
  add_run_options(roundtrip, rc);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const EventSeries s = ingest_tape(tape, tape_options(rc, tape, instrument));
      if (!out.empty()) write_tape(s, fs::path(out));
      json j = {{"instrument", s.instrument()},
                {"n_events", s.size()},
                {"days", s.day_count()},
                {"probs", {{"NC", s.empty() ? 0.0 : event_probability(s, EventType::NC)},
                           {"C", s.empty() ? 0.0 : event_probability(s, EventType::C)}}}};
      std::cout << j.dump(1) << '\n';
    } else if (*stats) {
      const EventSeries s = ingest_tape(tape, tape_options(rc, tape, instrument));
      const CorrelationSet c = estimate_correlations(s, stats_L);
      const ResponseSet r = estimate_responses(s, ro);
      const fs::path dir = stats_out.empty() ? rc.out_root / s.instrument() / "stats" : fs::path(stats_out);
      const std::string prov = "propkit " + std::string(library_version());
      std::ostringstream cc, rr, dd;
      write_correlations_csv(c, cc, prov);
      write_responses_csv(r, rr, prov);
      write_signature_csv(r, dd, prov);
      write_file_atomic(dir / "correlations.json", to_json(c).dump(1));
      write_file_atomic(dir / "correlations.csv", cc.str());
      write_file_atomic(dir / "responses.json", to_json(r).dump(1));
      write_file_atomic(dir / "responses.csv", rr.str());
      write_file_atomic(dir / "signature.csv", dd.str());
      std::cout << dir.string() << '\n';
    } else if (*tim_cal) {
      const auto c = correlations_from_json(read_json_file(corr_file));
      const auto r = responses_from_json(read_json_file(resp_file));
      CalibrationOptions o;
      o.n_equations = n_eq;
      const bool two = variant == "2" || variant == "tim2";
      const TimKernel k = two ? calibrate_tim2(c, r, model_L, o) : calibrate_tim1(c, r, model_L, o);
      emit(out, to_json(k).dump(1) + "\n");
    } else if (*tim_pred) {
      const auto k = tim_kernel_from_json(read_json_file(kernel_file));
      const auto c = correlations_from_json(read_json_file(corr_file));
      emit(out, prediction_csv(predict_response_tim(k, c, L_neg, L_pos)));
    } else if (*tim_sig) {
      const auto k = tim_kernel_from_json(read_json_file(kernel_file));
      const auto c = correlations_from_json(read_json_file(corr_file));
      run_signature(noise, sig_lags, out, [&](const NoiseParams& np, const std::vector<long>& lags) {
        return k.variant == TimVariant::TIM1 ? signature_tim1(k, c, np, lags) : signature_tim2(k, c, np, lags);
      });
    } else if (*hdim_cal) {
      const auto c = correlations_from_json(read_json_file(corr_file));
      const auto r = responses_from_json(read_json_file(resp_file));
      HdimOptions o;
      o.n_equations = n_eq;
      std::optional<EventSeries> s;
      if (!tape_file.empty()) {
        s = ingest_tape(tape_file, tape_options(rc, tape_file, ""));
        o.series = &*s;
      }
      emit(out, to_json(calibrate_hdim2(c, r, model_L, o)).dump(1) + "\n");
    } else if (*hdim_pred) {
      const auto k = influence_kernel_from_json(read_json_file(kernel_file));
      const auto c = correlations_from_json(read_json_file(corr_file));
      emit(out, prediction_csv(predict_response_hdim2(k, c, L_neg, L_pos)));
    } else if (*hdim_sig) {
      const auto k = influence_kernel_from_json(read_json_file(kernel_file));
      const auto c = correlations_from_json(read_json_file(corr_file));
      run_signature(noise, sig_lags, out, [&](const NoiseParams& np, const std::vector<long>& lags) {
        return signature_hdim2(k, c, np, lags);
      });
    } else if (*dar_sim) {
      const DarSpec spec = dar_spec_from_json(read_json_file(spec_file));
      const auto signs = simulate(spec, n, seed);
      std::string text = "sign\n";
      text.reserve(signs.size() * 3 + 5);
      for (auto s : signs) text += s > 0 ? "1\n" : "-1\n";
      emit(out, text);
    } else if (*dar_fwd) {
      const DarSpec spec = dar_spec_from_json(read_json_file(spec_file));
      const auto C = yule_walker_forward(spec, dar_L);
      emit(out, csv_text({"C"}, {C}, lag_range(0, dar_L)));
    } else if (*dar_inv) {
      const auto c = correlations_from_json(read_json_file(corr_file));
      std::span<const double> C(c.C);
      if (dar_inv->count("--L") > 0) {
        if (dar_L < 1 || dar_L > c.max_lag) throw Error(ErrorKind::Validation, "cli", "--L must lie in 1..L of the input");
        C = C.first(static_cast<std::size_t>(dar_L) + 1);
      }
      emit(out, to_json(yule_walker_inverse(C)).dump(1) + "\n");
    } else if (*synth) {
      GeneratorSpec spec;
      if (!preset_name.empty()) spec = preset(preset_name);
      else if (!spec_file.empty()) spec = generator_spec_from_json(read_json_file(spec_file));
      else throw Error(ErrorKind::Validation, "cli", "synth needs --preset or --spec");
      if (synth_n) spec.n = *synth_n;
      if (synth_seed) spec.seed = *synth_seed;
      if (!signs_file.empty()) spec.external_signs = read_sign_column(signs_file);
      if (!spec_out.empty()) write_file_atomic(spec_out, to_json(spec).dump(1) + "\n");
      const EventSeries s = generate(spec);
      if (out.empty() || out == "-") write_tape(s, std::cout);
      else {
        std::ostringstream text;
        write_tape(s, text);
        write_file_atomic(out, text.str());
      }
    } else if (*pipeline) {
      json arr = json::array();
      for (const auto& r : run_pipeline(rc)) arr.push_back({{"instrument", r.instrument}, {"directory", r.directory.string()}});
      std::cout << arr.dump(1) << '\n';
    } else if (*roundtrip) {
      const RoundtripReport r = run_roundtrip(rc);
      std::cout << r.to_json().dump(1) << '\n';
      return r.pass() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "/" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
