import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liqsurf.exceptions import SweepError, ValidationError
from liqsurf.tsmodel import (
    GARCH_FAMILY,
    ModelSpec,
    VolatilityModel,
    VolParams,
    VOL_MODELS,
    best_row,
    bic,
    bic_sweep,
    evidence_label,
    fit_mle,
    loglik_at,
    simulate,
    volatility_filter,
    write_sweep_csv,
)
from liqsurf.tsmodel.estimation import write_fit_json

PARAMS = {
    "Constant": VolParams(0.5),
    "ARCH(1)": VolParams(0.2, alpha=0.4),
    "GARCH(1,1)": VolParams(0.1, alpha=0.1, beta=0.8),
    "EGARCH(1,0,1)": VolParams(-0.05, alpha=0.15, beta=0.95),
    "EGARCH(1,1,1)": VolParams(-0.05, alpha=0.15, beta=0.95, gamma=-0.08),
    "GJR-GARCH(1,1,1)": VolParams(0.1, alpha=0.05, beta=0.8, gamma=0.1),
    "TARCH(1,1,1)": VolParams(0.05, alpha=0.05, beta=0.85, gamma=0.1),
}


def _ar_garch(T, seed, phi=0.5, params=VolParams(0.1, alpha=0.1, beta=0.8), vol="GARCH(1,1)", dist="normal", shape=None):
    rng = np.random.default_rng(seed)
    eps, s2 = simulate(vol, params, dist, shape, T, rng)
    y = np.empty(T)
    prev = 0.0
    for t in range(T):
        prev = phi * prev + eps[t]
        y[t] = prev
    return y


# -- recursions ---------------------------------------------------------------


def test_garch_constant_reduction(rng):
    s2 = volatility_filter("GARCH(1,1)", VolParams(1.0), rng.normal(size=50), 4.0)
    np.testing.assert_array_equal(s2, 1.0)


def test_arch_hand_value():
    s2 = volatility_filter("ARCH(1)", VolParams(1.0, alpha=0.5), [2.0, 0.3], 2.0)
    assert s2.tolist() == [2.0, 3.0]


def test_egarch_degenerate(rng):
    for vol in ("EGARCH(1,0,1)", "EGARCH(1,1,1)"):
        s2 = volatility_filter(vol, VolParams(0.7), rng.normal(size=40), 1.0)
        np.testing.assert_allclose(np.log(s2), 0.7, rtol=1e-15)


def test_garch_hand_recursion(rng):
    e = rng.normal(size=30)
    p = VolParams(0.2, alpha=0.15, beta=0.7)
    s2 = volatility_filter("GARCH(1,1)", p, e, 1.3)
    ref = [0.2 + 0.15 * 1.3 + 0.7 * 1.3]
    for t in range(1, 30):
        ref.append(0.2 + 0.15 * e[t - 1] ** 2 + 0.7 * ref[-1])
    np.testing.assert_allclose(s2, ref, rtol=1e-14)


def test_egarch_hand_recursion(rng):
    e = rng.normal(size=30)
    p = VolParams(-0.1, alpha=0.2, beta=0.9, gamma=-0.1)
    k = math.sqrt(2 / math.pi)
    s2 = volatility_filter("EGARCH(1,1,1)", p, e, 1.0)
    ref = [math.exp(-0.1 + 0.9 * math.log(1.0))]
    for t in range(1, 30):
        z = e[t - 1] / math.sqrt(ref[-1])
        ref.append(math.exp(-0.1 + 0.2 * (abs(z) - k) - 0.1 * z + 0.9 * math.log(ref[-1])))
    np.testing.assert_allclose(s2, ref, rtol=1e-12)


def test_gjr_and_tarch_hand_recursions(rng):
    e = rng.normal(size=25)
    p = VolParams(0.1, alpha=0.05, beta=0.8, gamma=0.2)
    gjr = volatility_filter("GJR-GARCH(1,1,1)", p, e, 1.0)
    tar = volatility_filter("TARCH(1,1,1)", p, e, 1.0)
    k = math.sqrt(2 / math.pi)
    g = [0.1 + 0.05 + 0.2 * 0.5 + 0.8]
    s = [(0.1 + 0.05 * k + 0.2 * k / 2 + 0.8) ** 2]
    for t in range(1, 25):
        neg = e[t - 1] < 0
        g.append(0.1 + (0.05 + 0.2 * neg) * e[t - 1] ** 2 + 0.8 * g[-1])
        s.append((0.1 + (0.05 + 0.2 * neg) * abs(e[t - 1]) + 0.8 * math.sqrt(s[-1])) ** 2)
    np.testing.assert_allclose(gjr, g, rtol=1e-13)
    np.testing.assert_allclose(tar, s, rtol=1e-13)
    assert np.max(np.abs(gjr - tar)) > 1e-6


def test_filter_constraint_errors():
    with pytest.raises(ValidationError):
        volatility_filter("GARCH(1,1)", VolParams(-1.0), [0.1, 0.2], 1.0)
    with pytest.raises(ValidationError):
        volatility_filter("GJR-GARCH(1,1,1)", VolParams(0.1, alpha=0.1, gamma=-0.5), [0.1], 1.0)
    with pytest.raises(ValidationError):
        volatility_filter("Constant", VolParams(0.0), [0.1], 1.0)
    with pytest.raises(ValidationError):
        volatility_filter("GARCH(1,1)", VolParams(1.0), [0.1], 0.0)
    with pytest.raises(ValidationError):
        volatility_filter("FIGARCH", VolParams(1.0), [0.1], 1.0)


@pytest.mark.parametrize("vol", VOL_MODELS)
@pytest.mark.parametrize("dist,shape", [("normal", None), ("skewt", (5.0, -0.3))])
def test_simulate_filter_roundtrip(vol, dist, shape):
    eps, s2 = simulate(vol, PARAMS[vol], dist, shape, 2000, np.random.default_rng(5), s0=1.0, burn=0)
    back = volatility_filter(vol, PARAMS[vol], eps, 1.0, dist, shape)
    np.testing.assert_allclose(back, s2, rtol=1e-10, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(VOL_MODELS))
def test_filtered_variance_positive(seed, vol):
    rng = np.random.default_rng(seed)
    s2 = volatility_filter(vol, PARAMS[vol], rng.standard_t(3, size=300) * 3, float(rng.uniform(0.1, 10)))
    assert np.all(s2 > 0) and np.all(np.isfinite(s2))


def test_stationarity_flags():
    assert VolParams(0.1, alpha=0.1, beta=0.8).is_stationary("GARCH(1,1)")
    assert not VolParams(0.1, alpha=0.3, beta=0.8).is_stationary("GARCH(1,1)")
    assert not VolParams(0.1, alpha=0.1, beta=0.8, gamma=0.3).is_stationary("GJR-GARCH(1,1,1)")
    assert VolParams(0.1, beta=-0.99).is_stationary("EGARCH(1,0,1)")


# -- BIC and labels -----------------------------------------------------------


def test_bic_examples():
    assert bic(-50.0, 3, 100) == pytest.approx(113.8155, abs=1e-4)
    assert bic(-50.0, 3, 100) == 100 + 3 * math.log(100)
    assert bic(-12.5, 0, 30) == 25.0
    assert bic(-7.0, 4, 250) - bic(-7.0, 3, 250) == pytest.approx(math.log(250), rel=1e-14)
    with pytest.raises(ValidationError):
        bic(0.0, -1, 10)


def test_evidence_labels():
    assert evidence_label(0.0) == "—"
    assert evidence_label(1.0) == "not worth a bare mention"
    assert evidence_label(2.0) == "positive"
    assert evidence_label(5.999) == "positive"
    assert evidence_label(6.0) == "strong"
    assert evidence_label(7.3) == "strong"
    assert evidence_label(10.0) == "very strong"
    assert evidence_label(1e6) == "very strong"
    with pytest.raises(ValidationError):
        evidence_label(-1.0)


# -- estimation ---------------------------------------------------------------


def test_model_spec_validation():
    assert ModelSpec("AR(2)", "TARCH(1,1,1)", "skewt").n_params == 2 + 4 + 2
    assert ModelSpec("ARMA(1,1)", "Constant", "normal").n_params == 3
    with pytest.raises(ValidationError):
        ModelSpec("AR(4)")
    with pytest.raises(ValidationError):
        ModelSpec(vol="GARCH(2,2)")
    with pytest.raises(ValidationError):
        ModelSpec(dist="laplace")


def test_gaussian_ar1_closed_form(rng):
    y = _ar1_gauss(rng)
    f = fit_mle(y, ModelSpec("AR(1)", "Constant", "normal"))
    x, z = y[:-1], y[1:]
    phi = float(x @ z / (x @ x))
    s2 = float(np.mean((z - phi * x) ** 2))
    n = z.size
    closed = -0.5 * n * (math.log(2 * math.pi * s2) + 1)
    assert f.converged
    assert f.loglik == pytest.approx(closed, abs=1e-6)
    assert f.mean_params["phi_1"] == pytest.approx(phi, abs=1e-5)
    assert f.vol_params.omega == pytest.approx(s2, rel=1e-5)


def _ar1_gauss(rng, T=600):
    e = rng.normal(scale=2.0, size=T)
    y = np.empty(T)
    y[0] = e[0]
    for t in range(1, T):
        y[t] = 0.7 * y[t - 1] + e[t]
    return y


def test_fit_invariants():
    y = _ar_garch(1500, 2, dist="t", shape=(6.0,))
    for spec in [ModelSpec("AR(1)", "GARCH(1,1)", "t"), ModelSpec("ARMA(1,1)", "EGARCH(1,1,1)", "skewt"),
                 ModelSpec("AR(2)", "TARCH(1,1,1)", "ged")]:
        f = fit_mle(y, spec)
        assert f.loglik >= f.init_loglik
        assert f.bic == -2.0 * f.loglik + f.n_params * math.log(f.nobs)
        assert np.all(f.sigma_path > 0)
        assert f.sigma_path.size == f.nobs
        f.vol_params.check(spec.vol)
        assert loglik_at(y, spec, (np.array([v for k, v in f.mean_params.items() if k.startswith("phi")]),
                                   f.mean_params.get("theta", 0.0)),
                         f.vol_params, tuple(f.dist_params.values())) == pytest.approx(f.loglik, rel=1e-12)


def test_garch_recovery_single_seed():
    y = _ar_garch(4000, 0)
    f = fit_mle(y, ModelSpec("AR(1)", "GARCH(1,1)", "normal"))
    assert f.converged
    assert f.vol_params.omega == pytest.approx(0.1, abs=0.08)
    assert f.vol_params.alpha == pytest.approx(0.1, abs=0.08)
    assert f.vol_params.beta == pytest.approx(0.8, abs=0.08)
    assert f.mean_params["phi_1"] == pytest.approx(0.5, abs=0.05)


def test_fit_too_short():
    with pytest.raises(ValidationError):
        fit_mle(np.arange(49.0), ModelSpec())


def test_fit_json(tmp_path):
    f = fit_mle(_ar_garch(300, 1), ModelSpec("AR(1)", "GJR-GARCH(1,1,1)", "t"))
    write_fit_json(f, tmp_path / "f.json")
    d = json.loads((tmp_path / "f.json").read_text())
    assert d["vol"] == "GJR-GARCH(1,1,1)"
    assert set(d["dist_params"]) == {"nu"}
    assert "sigma_path" not in d
    write_fit_json(f, tmp_path / "g.json", include_sigma=True)
    assert len(json.loads((tmp_path / "g.json").read_text())["sigma_path"]) == f.nobs


def test_sweep_table(tmp_path):
    y = _ar_garch(600, 4)
    rows = bic_sweep(y, vol_models=("Constant", "GARCH(1,1)", "EGARCH(1,0,1)"),
                     distributions=("normal", "t"), series_id="b1")
    assert len(rows) == 6
    b = best_row(rows)
    assert b.delta_bic == 0.0
    assert sum(r.label == "—" for r in rows) == 1
    conv = [r for r in rows if r.converged]
    assert b.bic == min(r.bic for r in conv)
    for r in conv:
        if r is not b:
            assert r.delta_bic >= 0
            assert r.label == evidence_label(r.delta_bic)
    # common sample across the grid
    assert len({r.d for r in rows}) > 1
    write_sweep_csv(rows, tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as fh:
        recs = list(csv.DictReader(fh))
    assert len(recs) == 6
    assert recs[0]["series_id"] == "b1"


def test_sweep_deterministic():
    y = _ar_garch(400, 6)
    kw = dict(vol_models=("ARCH(1)", "GARCH(1,1)"), distributions=("normal",))
    a = [r.as_csv_row() for r in bic_sweep(y, **kw)]
    b = [r.as_csv_row() for r in bic_sweep(y, **kw)]
    assert a == b


def test_sweep_all_fail(monkeypatch):
    import liqsurf.tsmodel.estimation as est

    monkeypatch.setattr(est, "_fit_quiet", lambda *a: None)
    with pytest.raises(SweepError):
        bic_sweep(np.random.default_rng(0).normal(size=100), vol_models=("Constant",), distributions=("normal",))


def test_garch_family_membership():
    assert "Constant" not in GARCH_FAMILY and "ARCH(1)" not in GARCH_FAMILY
    assert len(GARCH_FAMILY) == 5


def test_volatility_model_estimator():
    y = _ar_garch(500, 8)
    m = VolatilityModel(vol="GARCH(1,1)", dist="t").fit(y)
    assert m.get_params()["dist"] == "t"
    assert m.score(y) == pytest.approx(m.loglik_, rel=1e-12)
    assert m.bic_ == m.fit_.bic
