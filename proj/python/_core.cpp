#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "propkit/error.hpp"
#include "propkit/pipeline.hpp"

namespace py = pybind11;
using namespace propkit;

namespace {

template <class T>
py::array_t<T> to_array(std::span<const T> v) {
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
  return to_array(std::span<const T>(v));
}

EventType type_arg(const std::string& s) {
  if (s == "C") return EventType::C;
  if (s == "NC") return EventType::NC;
  throw Error(ErrorKind::InvalidInput, "cli", "event type must be 'C' or 'NC', got '" + s + "'");
}

/// {"lags": [...], "values": [...]} for a lag series
py::dict lag_dict(const LagSeries& s) {
  std::vector<long> lags;
  for (long l = s.min_lag; l <= s.max_lag(); ++l) lags.push_back(l);
  py::dict d;
  d["lags"] = to_array(lags);
  d["values"] = to_array(s.values);
  return d;
}

py::dict prediction_dict(const ResponsePrediction& p) {
  py::dict d;
  d["R"] = lag_dict(p.R);
  d["S"] = lag_dict(p.S);
  if (p.has_conditional())
    for (EventType t : kEventTypes) {
      d[py::str("R_" + std::string(to_string(t)))] = lag_dict(p.R_cond[index(t)]);
      d[py::str("S_" + std::string(to_string(t)))] = lag_dict(p.S_cond[index(t)]);
    }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Order-flow statistics and impact model calibration";
  m.attr("__version__") = std::string(library_version());

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&] { return py::object(py::exception<Error>(m, "PropkitError")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& cls = error_type.get_stored();
      py::object inst = cls(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      inst.attr("module") = e.module();
      PyErr_SetObject(cls.ptr(), inst.ptr());
    }
  });

  py::class_<EventSeries>(m, "EventSeries")
      .def("__len__", &EventSeries::size)
      .def_property_readonly("instrument", &EventSeries::instrument)
      .def_property_readonly("labeled", &EventSeries::is_labeled)
      .def_property_readonly("day_starts", &EventSeries::day_starts)
      .def_property_readonly("signs", [](const EventSeries& s) { return to_array(s.signs()); })
      .def_property_readonly("returns", [](const EventSeries& s) { return to_array(s.returns()); })
      .def_property_readonly("timestamps", [](const EventSeries& s) { return to_array(s.timestamps()); })
      .def_property_readonly("is_c",
                             [](const EventSeries& s) {
                               py::array_t<bool> a(static_cast<py::ssize_t>(s.size()));
                               auto* d = a.mutable_data();
                               for (std::size_t i = 0; i < s.size(); ++i) d[i] = s.types()[i] == EventType::C;
                               return a;
                             })
      .def("count", [](const EventSeries& s, const std::string& t) { return s.count(type_arg(t)); })
      .def("write_tape", [](const EventSeries& s, const std::filesystem::path& p) { write_tape(s, p); });

  m.def(
      "ingest_tape",
      [](const std::filesystem::path& path, const std::string& session, std::optional<std::string> tick_size,
         const std::string& instrument) {
        TapeOptions o;
        o.session = SessionWindow::parse(session);
        o.tick_size = std::move(tick_size);
        o.instrument = instrument;
        return ingest_tape(path, o);
      },
      py::arg("path"), py::arg("session") = "09:30-15:30", py::arg("tick_size") = py::none(),
      py::arg("instrument") = "", py::call_guard<py::gil_scoped_release>());

  py::class_<DarSpec>(m, "DarSpec")
      .def(py::init([](std::vector<double> lambda, double rho) { return DarSpec{std::move(lambda), rho}; }),
           py::arg("weights"), py::arg("rho"))
      .def_readonly("weights", &DarSpec::lambda)
      .def_readonly("rho", &DarSpec::rho)
      .def_property_readonly("order", &DarSpec::p)
      .def("to_json", [](const DarSpec& s) { return to_json(s).dump(); });
  m.def("power_law_dar", &power_law_dar, py::arg("gamma"), py::arg("p"), py::arg("rho"));
  m.def("yule_walker_forward", [](const DarSpec& s, int L) { return to_array(yule_walker_forward(s, L)); },
        py::arg("spec"), py::arg("L"));
  m.def(
      "yule_walker_inverse",
      [](const std::vector<double>& C, bool allow_antipersistent) {
        YuleWalkerOptions o;
        o.allow_antipersistent = allow_antipersistent;
        return yule_walker_inverse(C, o);
      },
      py::arg("C"), py::arg("allow_antipersistent") = false);
  m.def(
      "simulate_signs",
      [](const DarSpec& s, std::size_t n, std::uint64_t seed) {
        std::vector<std::int8_t> e;
        {
          py::gil_scoped_release nogil;
          e = simulate(s, n, seed);
        }
        return to_array(e);
      },
      py::arg("spec"), py::arg("n"), py::arg("seed"));

  py::class_<GeneratorSpec>(m, "GeneratorSpec")
      .def_static("preset", &preset, py::arg("name"))
      .def_static("from_json", [](const std::string& s) { return generator_spec_from_json(json::parse(s)); })
      .def_readwrite("n", &GeneratorSpec::n)
      .def_readwrite("seed", &GeneratorSpec::seed)
      .def_readwrite("instrument", &GeneratorSpec::instrument)
      .def("to_json", [](const GeneratorSpec& g) { return to_json(g).dump(); });
  m.def("preset_names", &preset_names);
  m.def("generate", &generate, py::arg("spec"), py::call_guard<py::gil_scoped_release>());

  py::class_<CorrelationSet>(m, "CorrelationSet")
      .def_readonly("max_lag", &CorrelationSet::max_lag)
      .def_readonly("n_events", &CorrelationSet::n_events)
      .def_property_readonly("two_type", &CorrelationSet::two_type)
      .def_property_readonly("C", [](const CorrelationSet& c) { return to_array(c.C); })
      .def_property_readonly("C_se", [](const CorrelationSet& c) { return to_array(c.C_se); })
      .def_property_readonly("probs", [](const CorrelationSet& c) {
        return py::dict(py::arg("NC") = c.probs[0], py::arg("C") = c.probs[1]);
      })
      .def("conditional",
           [](const CorrelationSet& c, const std::string& a, const std::string& b) {
             return to_array(c.C_cond[index(type_arg(a))][index(type_arg(b))]);
           })
      .def("to_json", [](const CorrelationSet& c) { return to_json(c).dump(); })
      .def_static("from_json", [](const std::string& s) { return correlations_from_json(json::parse(s)); });

  py::class_<ResponseSet>(m, "ResponseSet")
      .def_readonly("sigma_trade", &ResponseSet::sigma_trade)
      .def_readonly("n_events", &ResponseSet::n_events)
      .def_property_readonly("R", [](const ResponseSet& r) { return lag_dict(r.R); })
      .def_property_readonly("R_se", [](const ResponseSet& r) { return lag_dict(r.R_se); })
      .def_property_readonly("S", [](const ResponseSet& r) { return lag_dict(r.S); })
      .def_property_readonly("D", [](const ResponseSet& r) { return to_array(r.D); })
      .def_property_readonly("D_se", [](const ResponseSet& r) { return to_array(r.D_se); })
      .def("to_json", [](const ResponseSet& r) { return to_json(r).dump(); })
      .def_static("from_json", [](const std::string& s) { return responses_from_json(json::parse(s)); });

  m.def("estimate_correlations", &estimate_correlations, py::arg("series"), py::arg("L"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "estimate_responses",
      [](const EventSeries& s, int L_pos, int L_neg, int L_pair, int L_sig) {
        ResponseOptions o;
        o.L_pos = L_pos;
        o.L_neg = L_neg;
        o.L_pair = L_pair;
        o.L_sig = L_sig;
        return estimate_responses(s, o);
      },
      py::arg("series"), py::arg("L_pos"), py::arg("L_neg"), py::arg("L_pair") = -1, py::arg("L_sig") = -1,
      py::call_guard<py::gil_scoped_release>());

  py::class_<TimKernel>(m, "TimKernel")
      .def_static("tim1", &TimKernel::tim1, py::arg("dG"))
      .def_static("tim2", &TimKernel::tim2, py::arg("dG_NC"), py::arg("dG_C"))
      .def_readonly("L", &TimKernel::L)
      .def_readonly("residual", &TimKernel::residual)
      .def_property_readonly("variant", [](const TimKernel& k) { return std::string(to_string(k.variant)); })
      .def("G", [](const TimKernel& k, const std::string& t) {
        std::vector<double> g(static_cast<std::size_t>(k.L) + 2);
        for (long l = 0; l <= k.L + 1; ++l) g[static_cast<std::size_t>(l)] = k.g(type_arg(t), l);
        return to_array(g);
      }, py::arg("type") = "C")
      .def("dG", [](const TimKernel& k, const std::string& t) { return to_array(k.differential(type_arg(t))); },
           py::arg("type") = "C")
      .def("to_json", [](const TimKernel& k) { return to_json(k).dump(); });

  m.def(
      "calibrate_tim",
      [](const CorrelationSet& c, const ResponseSet& r, int L, const std::string& variant, int n_equations) {
        CalibrationOptions o;
        o.n_equations = n_equations;
        if (variant == "tim1") return calibrate_tim1(c, r, L, o);
        if (variant == "tim2") return calibrate_tim2(c, r, L, o);
        throw Error(ErrorKind::InvalidInput, "tim", "variant must be 'tim1' or 'tim2'");
      },
      py::arg("corr"), py::arg("resp"), py::arg("L"), py::arg("variant") = "tim1", py::arg("n_equations") = -1,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "predict_response_tim",
      [](const TimKernel& k, const CorrelationSet& c, int L_neg, int L_pos) {
        return prediction_dict(predict_response_tim(k, c, L_neg, L_pos));
      },
      py::arg("kernel"), py::arg("corr"), py::arg("L_neg"), py::arg("L_pos"));
  m.def(
      "signature_tim",
      [](const TimKernel& k, const CorrelationSet& c, double D_LF, double D_HF, int L) {
        const auto lags = lag_range(1, L);
        const NoiseParams n{D_LF, D_HF};
        return to_array(k.variant == TimVariant::TIM1 ? signature_tim1(k, c, n, lags) : signature_tim2(k, c, n, lags));
      },
      py::arg("kernel"), py::arg("corr"), py::arg("D_LF") = 0.0, py::arg("D_HF") = 0.0, py::arg("L") = 100);

  py::class_<InfluenceKernel>(m, "InfluenceKernel")
      .def_readonly("L", &InfluenceKernel::L)
      .def_readonly("residual", &InfluenceKernel::residual)
      .def_readonly("factorization_residual", &InfluenceKernel::factorization_residual)
      .def_property_readonly("G1_C", [](const InfluenceKernel& k) { return k.G1[index(EventType::C)]; })
      .def("kappa",
           [](const InfluenceKernel& k, const std::string& past, const std::string& present) {
             return to_array(k.kappa[index(type_arg(past))][index(type_arg(present))]);
           },
           py::arg("past"), py::arg("present") = "C")
      .def("to_json", [](const InfluenceKernel& k) { return to_json(k).dump(); });

  m.def(
      "calibrate_hdim2",
      [](const CorrelationSet& c, const ResponseSet& r, int L, int n_equations, const EventSeries* series) {
        HdimOptions o;
        o.n_equations = n_equations;
        o.series = series;
        return calibrate_hdim2(c, r, L, o);
      },
      py::arg("corr"), py::arg("resp"), py::arg("L"), py::arg("n_equations") = -1, py::arg("series") = nullptr,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "predict_response_hdim2",
      [](const InfluenceKernel& k, const CorrelationSet& c, int L_neg, int L_pos) {
        return prediction_dict(predict_response_hdim2(k, c, L_neg, L_pos));
      },
      py::arg("kernel"), py::arg("corr"), py::arg("L_neg"), py::arg("L_pos"));
  m.def(
      "signature_hdim2",
      [](const InfluenceKernel& k, const CorrelationSet& c, double D_LF, double D_HF, int L) {
        return to_array(signature_hdim2(k, c, NoiseParams{D_LF, D_HF}, lag_range(1, L)));
      },
      py::arg("kernel"), py::arg("corr"), py::arg("D_LF") = 0.0, py::arg("D_HF") = 0.0, py::arg("L") = 100);

  m.def(
      "fit_noise",
      [](const std::vector<double>& D_emp, const std::vector<double>& D_base, const std::vector<long>& lags,
         bool fit_on_ld) {
        NoiseFitOptions o;
        o.fit_on_ld = fit_on_ld;
        const auto f = fit_noise(D_emp, D_base, lags, o);
        py::dict d;
        d["D_LF"] = f.params.D_LF;
        d["D_HF"] = f.params.D_HF;
        d["sse"] = f.sse;
        d["clamped"] = py::make_tuple(f.clamped[0], f.clamped[1]);
        return d;
      },
      py::arg("D_emp"), py::arg("D_base"), py::arg("lags"), py::arg("fit_on_ld") = false);

  m.def(
      "run_pipeline",
      [](const std::string& config) {
        const RunConfig c = RunConfig::from_json(json::parse(config));
        std::vector<std::string> out;
        {
          py::gil_scoped_release nogil;
          for (const auto& r : run_pipeline(c)) out.push_back(r.summary.dump());
        }
        return out;
      },
      py::arg("config"));
  m.def(
      "roundtrip",
      [](const std::string& config) {
        const RunConfig c = RunConfig::from_json(json::parse(config));
        std::string out;
        {
          py::gil_scoped_release nogil;
          out = run_roundtrip(c).to_json().dump();
        }
        return out;
      },
      py::arg("config"));
}
