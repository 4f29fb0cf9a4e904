"""Acceptance checks, one per criterion.

Every test records a ``PASS``/``FAIL`` line that the terminal summary prints
(see ``conftest.py``); ``python tests/test_acceptance.py`` prints the same
lines without pytest.
"""

import functools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavecheck.harness import StudyConfig, run_cfl_scenario, run_study
from wavecheck.operator import DiagonalOperator, SpectralSine
from wavecheck.problems import PRESETS, scalar_operator
from wavecheck.reconstruct import build_reconstruction
from wavecheck.residual import estimate, residuals_for
from wavecheck.scheme import SchemeParams, advance, discrete_energy, initial_step, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
GOLDEN = json.loads((Path(__file__).parent / "fixtures" / "golden.json").read_text())
KS = [1 / 20, 1 / 40, 1 / 80, 1 / 160]
SCHEMES = {
    "leapfrog": {"family": "leapfrog"},
    "cosine1": {"family": "cosine", "q1": 0.5, "formulation": 1},
    "cosine2": {"family": "cosine", "q1": 0.5, "formulation": 2},
}

VERDICTS = {}


def _record(criterion, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    VERDICTS[criterion] = line
    return passed


def _preset1_config(scheme, quad_points=3):
    return StudyConfig.from_dict({
        "name": f"preset1_{scheme}",
        "preset": 1,
        "scheme": SCHEMES[scheme],
        "h": KS,
        "time_step": {"rule": "explicit", "k": KS},
        "T": 1.0,
        "quad_points": quad_points,
        "record_wall_time": False,
    })


def _other_configs(quad_points=3):
    out = {
        "preset2_spectral": StudyConfig.from_dict({"name": "p2", "preset": 2}),
        "preset2_fd2d": StudyConfig.load(CONFIGS / "preset2_fd2d.json"),
        "preset3_spectral": StudyConfig.load(CONFIGS / "preset3_spectral.json"),
    }
    for cfg in out.values():
        cfg.quad_points = quad_points
        cfg.record_wall_time = False
    return out


@functools.lru_cache(maxsize=None)
def _study(key, quad_points=3):
    if key in SCHEMES:
        cfg = _preset1_config(key, quad_points)
    else:
        cfg = _other_configs(quad_points)[key]
    start = time.perf_counter()
    study = run_study(cfg)
    return study, time.perf_counter() - start


@functools.lru_cache(maxsize=None)
def _cfl(quad_points=3):
    cfg = StudyConfig.load(CONFIGS / "cfl_preset1.json")
    cfg.quad_points = quad_points
    start = time.perf_counter()
    study, verdicts = run_cfl_scenario(cfg)
    return study, verdicts, time.perf_counter() - start


def _eoc_ok(study):
    last = study.rows[-1]
    eocs = (last.eoc_eL, last.eoc_eR, last.eoc_eta1)
    return all(1.8 <= e <= 2.2 for e in eocs), eocs


def _residual_ratios(scheme):
    sol = PRESETS[1].solution
    op = SpectralSine(1.0, sol.modes)
    u0, v0 = sol.initial_state(op)
    params = _preset1_config(scheme).scheme_params()
    norms = [residuals_for(op, run(op, params, u0, v0, None, k, round(1 / k))).max_norms(op) for k in KS[-2:]]
    return norms[0][0] / norms[1][0], norms[0][1] / norms[1][1]


# criterion checks ------------------------------------------------------------------


def check_1():
    study, secs = _study("leapfrog")
    ok, eocs = _eoc_ok(study)
    ok_time = secs < 5.0
    return _record(1, ok and ok_time, "EOC(eL, eR, eta1) = " + ", ".join(f"{e:.4f}" for e in eocs)
                   + f" in [1.8, 2.2]; runtime {secs:.2f} s < 5 s")


def check_2():
    worst, lines = -math.inf, []
    keys = ["leapfrog", "preset2_spectral", "preset2_fd2d", "preset3_spectral"]
    ok = True
    for key in keys:
        study, _ = _study(key)
        for r in study.rows:
            if not r.stable:
                continue
            ok &= r.sup_eR <= r.eta1 + 1e-9
            worst = max(worst, r.sup_eR / r.eta1)
        lines.append(key)
    return _record(2, ok, f"sup_eR <= eta1 + 1e-9 on every stable row of {', '.join(lines)}; max sup_eR/eta1 = {worst:.4f}")


def check_3():
    ratios = {s: _residual_ratios(s) for s in SCHEMES}
    ok = all(3.4 <= r <= 4.6 for pair in ratios.values() for r in pair)
    detail = "; ".join(f"{s}: rho_U {a:.4f}, rho_V {b:.4f}" for s, (a, b) in ratios.items())
    return _record(3, ok, f"halving ratios in [3.4, 4.6]: {detail}")


def check_4():
    parts, ok = [], True
    for scheme in ("cosine1", "cosine2"):
        study, _ = _study(scheme)
        eoc_ok, eocs = _eoc_ok(study)
        rel_ok = all(r.sup_eR <= r.eta1 + 1e-9 for r in study.rows if r.stable)
        rho_ok = all(3.4 <= r <= 4.6 for r in _residual_ratios(scheme))
        ok &= eoc_ok and rel_ok and rho_ok
        parts.append(f"{scheme} EOC " + "/".join(f"{e:.3f}" for e in eocs) + f" reliable={rel_ok} rho={rho_ok}")
    sol = PRESETS[1].solution
    op = SpectralSine(1.0, sol.modes)
    u0, v0 = sol.initial_state(op)
    worst = 0.0
    for k in KS:
        lf = run(op, SchemeParams.leapfrog(), u0, v0, None, k, round(1 / k))
        for form in (1, 2):
            cs = run(op, SchemeParams.cosine(0.0, form), u0, v0, None, k, round(1 / k))
            for a, b in ((lf.U, cs.U), (lf.Vhalf, cs.Vhalf)):
                worst = max(worst, np.max(np.abs(a - b)) / np.max(np.abs(a)))
    ok &= worst <= 1e-13
    parts.append(f"cosine q1=0 vs leap-frog max rel diff {worst:.2e} <= 1e-13")
    return _record(4, ok, "; ".join(parts))


# criterion 5: randomized structural identities --------------------------------------

STRUCTURAL_CASES = {"count": 0, "worst": 0.0}


def _rel(a, b, scale):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / scale


@st.composite
def _cases(draw):
    dim = draw(st.integers(1, 5))
    lam = np.array(draw(st.lists(st.floats(0.5, 400.0), min_size=dim, max_size=dim)))
    family = draw(st.sampled_from(["leapfrog", "cosine1", "cosine2"]))
    if family == "leapfrog":
        scheme = SchemeParams.leapfrog()
    else:
        scheme = SchemeParams.cosine(draw(st.sampled_from([0.0, 0.1, 0.25, 0.5, 1.0])), int(family[-1]))
    limit = scheme.max_stable_step(DiagonalOperator(tuple(lam)))
    k = draw(st.floats(0.01, 0.95)) * min(limit, 0.2)
    N = draw(st.integers(2, 25))
    seed = draw(st.integers(0, 2**32 - 1))
    forced = draw(st.booleans())
    return lam, scheme, k, N, seed, forced


@settings(max_examples=150)
@given(_cases())
def _structural_property(case):
    lam, scheme, k, N, seed, forced = case
    rng = np.random.default_rng(seed)
    op = DiagonalOperator(tuple(lam))
    u0, v0 = rng.standard_normal((2, op.dim))
    amp, nu = rng.standard_normal(op.dim), rng.uniform(0.5, 5.0)
    f = (lambda t: amp * np.cos(nu * t)) if forced else None
    tr = run(op, scheme, u0, v0, f, k, N)
    scale = max(np.max(np.abs(tr.U)), np.max(np.abs(tr.Vhalf)), 1e-300)
    errs = []

    # ghost values
    if scheme.formulation == 2 and scheme.q1 != 0:
        dq = (tr.node(0) - tr.node(-1)) / k
        errs.append(_rel(dq, 2 * v0 - (tr.node(1) - tr.node(0)) / k, scale))
        errs.append(_rel(tr.half(-1), dq + k * k * scheme.q1 * op.apply(dq), scale))
    else:
        errs.append(_rel(tr.half(-1), 2 * v0 - tr.half(0), scale))
        errs.append(_rel(tr.node(-1), tr.node(0) - k * tr.half(-1), scale))

    # mid-point endpoint identities and continuity
    rec = build_reconstruction(op, tr, residuals_for(op, tr))
    for n in range(N + 1):
        side = "right" if n == 0 else "left"
        errs.append(_rel(rec.U_hat(n * k, side=side), tr.node(n), scale))
        errs.append(_rel(rec.V_hat((n + 0.5) * k), tr.half(n), scale))
        errs.append(_rel(rec.V_hat((n - 0.5) * k, side="right"), tr.half(n - 1), scale))
    errs.append(float(np.max(np.abs(rec.U_hat.jumps()))) / scale)
    errs.append(float(np.max(np.abs(rec.V_hat.jumps()))) / scale)

    # discrete energy conservation for unforced leap-frog
    if scheme.family == "leapfrog" and not forced:
        E = discrete_energy(op, tr)
        errs.append(float(np.max(np.abs(E - E[0]))) / abs(E[0]))

    worst = max(errs)
    STRUCTURAL_CASES["count"] += 1
    STRUCTURAL_CASES["worst"] = max(STRUCTURAL_CASES["worst"], worst)
    assert worst <= 1e-12


def check_5():
    STRUCTURAL_CASES.update(count=0, worst=0.0)
    failure = None
    try:
        _structural_property()
    except AssertionError as exc:
        failure = exc
    n, worst = STRUCTURAL_CASES["count"], STRUCTURAL_CASES["worst"]
    ok = failure is None and n >= 100
    _record(5, ok, f"ghost, endpoint, continuity and energy identities on {n} random runs; worst relative defect {worst:.2e} <= 1e-12")
    if failure is not None:
        raise failure
    return ok


def check_6():
    study, (v,), secs = _cfl()
    ok = v.growth_error > 1e3 and v.growth_eta > 1e3 and v.reliable_eR and v.reliable_eL and v.iei_within_decade
    ok &= secs < 2.0
    return _record(
        6, ok,
        f"k*sqrt(lmax) = {study.rows[0].cfl_number:.2f}: growth(eL) {v.growth_error:.3e}, growth(eta1) {v.growth_eta:.3e} > 1e3; "
        f"eta1 >= error at every node: {v.reliable_eR and v.reliable_eL}; IEI spread {v.iei_spread:.3f} <= 10 "
        f"over {v.unstable_nodes} nodes; runtime {secs:.2f} s < 2 s",
    )


def check_7():
    worst = 0.0
    keys = list(SCHEMES) + ["preset2_spectral", "preset2_fd2d", "preset3_spectral"]
    for key in keys:
        a, _ = _study(key, 3)
        b, _ = _study(key, 6)
        for ra, rb in zip(a.rows, b.rows):
            worst = max(worst, abs(ra.eta1 - rb.eta1) / ra.eta1)
    ca, _, _ = _cfl(3)
    cb, _, _ = _cfl(6)
    worst = max(worst, abs(ca.rows[0].eta1 - cb.rows[0].eta1) / ca.rows[0].eta1)
    return _record(7, worst < 1e-9, f"3 -> 6 Gauss points: max relative change in eta1 {worst:.2e} < 1e-9 over {len(keys) + 1} studies")


def check_8():
    op = scalar_operator(1.0)
    lf, cos = SchemeParams.leapfrog(), SchemeParams.cosine(0.5)
    tr = run(op, lf, [1.0], [0.0], None, 0.1, 2)
    got = {
        "U1": (initial_step(op, [1.0], [0.0], [0.0], 0.1)[0], 0.995),
        "U2": (advance(op, lf, [1.0], [0.995], [0.0], [0.0], [0.0], 0.1)[0], 0.98005),
        "R_U^1": (residuals_for(op, tr).rho_U.coef[1, 0, 0], -0.0024875),
        "cosine U2": (advance(op, cos, [1.0], [0.995], [0.0], [0.0], [0.0], 0.1)[0], 0.985 / 1.005),
    }
    ok = all(abs(a - b) <= 1e-14 for a, b in got.values())
    g = GOLDEN["scalar_leapfrog_eta1"]
    eta = estimate(op, run(op, lf, [g["u0"]], [g["v0"]], None, g["k"], round(g["T"] / g["k"]))).value
    rel = abs(eta - float(g["value"])) / float(g["value"])
    ok &= rel <= 1e-10
    worst = max(abs(a - b) for a, b in got.values())
    return _record(8, ok, f"scalar goldens max abs diff {worst:.1e} <= 1e-14; eta1 golden rel diff {rel:.1e} <= 1e-10")


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6, 7: check_7, 8: check_8}


@pytest.mark.parametrize("criterion", sorted(CHECKS))
def test_acceptance(criterion):
    assert CHECKS[criterion](), VERDICTS.get(criterion)


if __name__ == "__main__":
    for c in sorted(CHECKS):
        try:
            CHECKS[c]()
        except Exception as exc:  # report and keep going
            VERDICTS.setdefault(c, f"FAIL criterion {c}: {type(exc).__name__}: {exc}")
        print(VERDICTS[c])
