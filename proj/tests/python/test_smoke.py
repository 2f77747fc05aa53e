import json

import numpy as np
import pytest

import propkit


def small_tick(n=100_000, seed=5):
    spec = propkit.GeneratorSpec.preset("small-tick")
    spec.n = n
    spec.seed = seed
    return propkit.generate(spec)


def test_generate_and_estimate():
    s = small_tick()
    assert len(s) == 100_000
    assert s.labeled
    assert s.signs.dtype == np.int8
    assert set(np.unique(s.signs)) == {-1, 1}
    assert s.count("C") == int(s.is_c.sum())
    corr = propkit.estimate_correlations(s, 20)
    assert corr.C[0] == 1.0
    assert corr.two_type
    resp = propkit.estimate_responses(s, 20, 10, L_pair=20)
    assert resp.R["lags"][0] == -10
    assert np.all(np.isfinite(resp.D[1:]))
    # the day-batch se is positive
    assert np.all(resp.D_se[1:] > 0)


def test_tim2_round_trip_through_json():
    s = small_tick()
    corr = propkit.estimate_correlations(s, 40)
    resp = propkit.estimate_responses(s, 20, 10)
    k = propkit.calibrate_tim(corr, resp, 20, variant="tim2")
    assert k.variant == "tim2"
    c2 = propkit.CorrelationSet.from_json(corr.to_json())
    r2 = propkit.ResponseSet.from_json(resp.to_json())
    k2 = propkit.calibrate_tim(c2, r2, 20, variant="tim2")
    assert np.array_equal(k.G("C"), k2.G("C"))
    assert np.array_equal(k.G("NC"), k2.G("NC"))
    pred = propkit.predict_response_tim(k, corr, 10, 20)
    assert "R_C" in pred and len(pred["R"]["values"]) == 31
    sig = propkit.signature_tim(k, corr, 0.1, 0.2, 10)
    assert sig.shape == (10,)
    assert propkit.as_dict(k)["variant"] == "tim2"


def test_hdim2_and_noise_fit():
    s = small_tick()
    corr = propkit.estimate_correlations(s, 40)
    resp = propkit.estimate_responses(s, 20, 10, L_pair=20)
    k = propkit.calibrate_hdim2(corr, resp, 10, series=s)
    assert np.isfinite(k.factorization_residual)
    assert np.all(k.kappa("C", "NC") == 0.0)
    lags = np.arange(1, 21)
    base = np.ones(20)
    f = propkit.fit_noise(base + 0.5 + 1.2 / lags, base, lags)
    assert f["D_LF"] == pytest.approx(0.5, rel=1e-10)
    assert f["D_HF"] == pytest.approx(1.2, rel=1e-10)


def test_dar_functions():
    spec = propkit.DarSpec([1.0], 0.8)
    C = propkit.yule_walker_forward(spec, 10)
    assert C == pytest.approx(0.6 ** np.arange(11), rel=1e-12)
    back = propkit.yule_walker_inverse(C)
    assert back.rho == pytest.approx(0.8)
    e = propkit.simulate_signs(propkit.power_law_dar(0.5, 50, 0.9), 1000, 3)
    assert e.shape == (1000,)
    assert np.array_equal(e, propkit.simulate_signs(propkit.power_law_dar(0.5, 50, 0.9), 1000, 3))


def test_errors_carry_kind_and_module():
    with pytest.raises(propkit.PropkitError) as err:
        propkit.yule_walker_inverse([1.0, 0.5, 0.0])
    assert err.value.kind == "not representable"
    assert err.value.module == "dar"
    with pytest.raises(propkit.PropkitError) as err:
        propkit.GeneratorSpec.preset("mid-tick")
    assert err.value.module == "synth"


def test_tape_and_pipeline(tmp_path):
    s = small_tick(30_000)
    tape = tmp_path / "x.csv"
    s.write_tape(tape)
    back = propkit.ingest_tape(tape)
    assert np.array_equal(back.returns, s.returns)
    out = propkit.run_pipeline(tapes=[str(tape)], variant="tim1", L=10, L_pos=10, L_neg=10, L_sig=10,
                               out=str(tmp_path / "out"))
    assert out[0]["variant"] == "tim1"
    assert (tmp_path / "out" / "x" / "tim1" / "kernel.json").is_file()


def test_roundtrip_report():
    rep = propkit.roundtrip(preset="large-tick", variant="tim2", n=1_000_000, seed=7, out="unused")
    assert rep["pass"], json.dumps(rep, indent=1)
