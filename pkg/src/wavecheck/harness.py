"""Convergence studies, the CFL-violation scenario, EOC/IEI and report files."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ContractViolation, ReliabilityViolation
from .operator import FdLaplacian1d, FdLaplacian2d, SpectralSine, energy_norm
from .problems import SineSeriesSolution, errors_sup, get_preset, reconstruction_energy, reference_solution
from .residual import DEFAULT_QUAD_POINTS, estimate
from .scheme import SchemeParams, run

CSV_COLUMNS = (
    "level", "h", "k", "stable", "sup_eR", "sup_eL", "eta1",
    "eoc_eR", "eoc_eL", "eoc_eta1", "iei", "energy_T", "wall_ms",
)
CLAMP = 1e300
GROWTH_LIMIT = 1e6
RELIABILITY_ABS = 1e-9
RELIABILITY_REL = 1e-12

CONVENTIONS = {
    "source_interpolant": "continuous piecewise linear through (t^n, f^n); the velocity reconstruction adds "
    "a per-staggered-interval constant -(f^{n-1}-2f^n+f^{n+1})/8, and R_f is taken against that sum",
    "reconstruction_energy": "0.5 * |||(U_hat(t), V_hat(t))|||^2",
    "source_at_minus_k": "f(-k) evaluated from the source provider unless source_extension='zero'",
    "eta1_profile": "cumulative: time integral stopped at each node t_m",
    "error_profiles": "instantaneous value at nodes and running sup over samples up to each node",
    "iei": "sup_eL / eta1 (sup over [0, t_m] for profiles)",
    "first_step": "leap-frog start U^1 = U^0 + k v0 + k^2/2 (f^0 - A U^0) for every family member",
}


# configuration --------------------------------------------------------------


@dataclass
class StudyConfig:
    """Everything needed to run a refinement study; mirrors the JSON config file."""

    name: str = "study"
    preset: int | None = None
    solution: dict | None = None  # {"c": .., "terms": [[k, j, alpha, beta], ...]}
    operator: dict = field(default_factory=lambda: {"kind": "spectral"})
    scheme: dict = field(default_factory=lambda: {"family": "leapfrog"})
    h: list | None = None
    time_step: dict | None = None
    T: float | None = None
    quad_points: int = DEFAULT_QUAD_POINTS
    samples_per_half_step: int = 4
    source_extension: str = "evaluate"
    norm: str = "euclidean"  # or "grid": finite-difference norms carry the cell weight h^d
    record_wall_time: bool = True

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    # resolved pieces ---------------------------------------------------------

    def validate(self):
        self.solution_obj()
        self.scheme_params()
        self.levels()
        if self.quad_points < 1:
            raise ConfigError("quad_points must be >= 1")
        if self.samples_per_half_step < 0:
            raise ConfigError("samples_per_half_step must be >= 0")
        if self.norm not in ("euclidean", "grid"):
            raise ConfigError("norm must be 'euclidean' or 'grid'")
        if self.operator.get("kind", "spectral") not in ("spectral", "fd1d", "fd2d"):
            raise ConfigError(f"unknown operator kind {self.operator.get('kind')!r}")

    def solution_obj(self):
        if (self.preset is None) == (self.solution is None):
            raise ConfigError("give exactly one of 'preset' or 'solution'")
        if self.preset is not None:
            return get_preset(self.preset).solution
        try:
            return SineSeriesSolution(float(self.solution["c"]), tuple(tuple(t) for t in self.solution["terms"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad inline solution: {exc}") from None

    def scheme_params(self):
        s = dict(self.scheme)
        try:
            return SchemeParams(s.get("family", "leapfrog"), float(s.get("q1", 0.0)), int(s.get("formulation", 1)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad scheme block: {exc}") from None

    def final_time(self):
        if self.T is not None:
            return float(self.T)
        return get_preset(self.preset).T if self.preset is not None else 1.0

    def build_operator(self, h):
        kind = self.operator.get("kind", "spectral")
        sol = self.solution_obj()
        if kind == "spectral":
            modes = self.operator.get("modes") or sol.modes
            return SpectralSine(sol.c, [tuple(m) for m in modes])
        if kind in ("fd1d", "fd2d"):
            n = self.operator.get("n_interior")
            if n is None:
                if h is None:
                    raise ConfigError("finite-difference operators need h or n_interior")
                n = int(round(1.0 / h)) - 1
            cls = FdLaplacian2d if kind == "fd2d" else FdLaplacian1d
            return cls(sol.c, int(n))
        raise ConfigError(f"unknown operator kind {kind!r}")

    def levels(self):
        """Resolved ``(h, k, N, T)`` per refinement level."""
        rule = dict(self.time_step or {})
        if not rule:
            if self.preset is None:
                raise ConfigError("time_step rule required when no preset is given")
            p = get_preset(self.preset)
            rule = {"rule": "power", "C": p.C, "r": p.r}
        kind = rule.get("rule", "power")
        T = self.final_time()
        if T <= 0:
            raise ConfigError("T must be positive")
        hs = self.h
        if hs is None and self.preset is not None and kind == "power":
            hs = list(get_preset(self.preset).h_sequence)
        out = []
        if kind == "power":
            C, r = float(rule.get("C", 0)), int(rule.get("r", 1))
            if C <= 0 or r not in (1, 2):
                raise ConfigError("power rule needs C > 0 and r in {1, 2}")
            if not hs:
                raise ConfigError("power rule needs an h list")
            for h in hs:
                N = max(2, math.ceil(T / (C * h**r) - 1e-9))
                out.append((float(h), T / N, N, T))
        elif kind == "explicit":
            ks = rule.get("k")
            if not ks:
                raise ConfigError("explicit rule needs a k list")
            hs = hs or ks
            if len(hs) != len(ks):
                raise ConfigError("h and k lists differ in length")
            for h, k in zip(hs, ks):
                if not k > 0:
                    raise ConfigError("time steps must be positive")
                N = max(2, math.ceil(T / k - 1e-9))  # largest k' <= k with T / k' integral
                out.append((float(h), T / N, N, T))
        elif kind == "cfl":
            ratio = float(rule.get("ratio", 0))
            steps = int(rule.get("steps", 0))
            if ratio <= 0 or steps < 2:
                raise ConfigError("cfl rule needs ratio > 0 and steps >= 2")
            for h in hs or [None]:
                lam = self.build_operator(h).spectral_bound()
                k = ratio / math.sqrt(lam)
                out.append((float(h) if h is not None else k, k, steps, steps * k))
        else:
            raise ConfigError(f"unknown time-step rule {kind!r}")
        return out

    def conventions(self):
        return dict(CONVENTIONS, source_extension=self.source_extension, norm=self.norm)


def norm_scale(op, norm):
    """Factor applied to reported norms: ``h^(d/2)`` for grid operators under ``norm='grid'``."""
    if norm != "grid":
        return 1.0
    if isinstance(op, FdLaplacian2d):
        return op.h
    if isinstance(op, FdLaplacian1d):
        return math.sqrt(op.h)
    return 1.0


# row-level quantities ---------------------------------------------------------


def eoc(a, h, i):
    """``log(a[i+1]/a[i]) / log(h[i+1]/h[i])``."""
    vals = (a[i], a[i + 1], h[i], h[i + 1])
    if any(not (v > 0) for v in vals):
        raise ContractViolation("EOC needs strictly positive quantities and mesh sizes")
    if not h[i + 1] < h[i]:
        raise ContractViolation("mesh sizes must decrease")
    return math.log(a[i + 1] / a[i]) / math.log(h[i + 1] / h[i])


def iei(sup_error, eta1):
    """Inverse effectivity index ``error / eta1``."""
    if eta1 > 0:
        return sup_error / eta1
    if sup_error == 0:
        return 0.0
    raise ReliabilityViolation(f"estimator is zero but the error is {sup_error:g}")


@dataclass
class StudyRow:
    level: int
    h: float
    k: float
    stable: bool
    sup_eR: float
    sup_eL: float
    eta1: float
    eoc_eR: float = math.nan
    eoc_eL: float = math.nan
    eoc_eta1: float = math.nan
    iei: float = math.nan
    energy_T: float = math.nan
    wall_ms: float = 0.0
    cfl_number: float = math.nan  # k sqrt(lambda_max)
    N: int = 0

    def as_csv(self):
        return [getattr(self, c) for c in CSV_COLUMNS]

    @property
    def reliable(self):
        return reliable(self.sup_eR, self.eta1)


def reliable(error, eta):
    return error <= eta * (1 + RELIABILITY_REL) + RELIABILITY_ABS


@dataclass
class CaseResult:
    row: StudyRow
    node_times: np.ndarray
    eR_nodes: np.ndarray
    eL_nodes: np.ndarray
    eR_running: np.ndarray
    eL_running: np.ndarray
    eta_cumulative: np.ndarray
    energy_nodes: np.ndarray
    breakdown: list
    initial_energy_norm: float

    @property
    def iei_profile(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.eL_running / self.eta_cumulative
        return np.where(self.eta_cumulative > 0, out, 0.0)


def _clamp(x):
    x = float(x)
    if not math.isfinite(x) or abs(x) > CLAMP:
        return math.copysign(CLAMP, x) if not math.isnan(x) else CLAMP
    return x


def run_case(config, level):
    """Run one refinement level end to end and return its row and time profiles."""
    levels = config.levels()
    if not 0 <= level < len(levels):
        raise ConfigError(f"level {level} out of range (study has {len(levels)})")
    h, k, N, T = levels[level]
    start = time.perf_counter()
    op = config.build_operator(h)
    sol = config.solution_obj()
    scheme = config.scheme_params()
    u0, v0 = sol.initial_state(op)
    ref = reference_solution(sol, op)

    traj = run(op, scheme, u0, v0, None, k, N, extend_source=config.source_extension)
    est = estimate(op, traj, quad_points=config.quad_points)
    prof = errors_sup(op, traj, est.recon, ref, config.samples_per_half_step)
    nodes = traj.k * np.arange(0, N + 1)
    energy = reconstruction_energy(op, est.recon.U_hat, est.recon.V_hat, nodes)
    wall = (time.perf_counter() - start) * 1e3 if config.record_wall_time else 0.0

    E0 = float(energy_norm(op, (u0, v0)))
    growth = np.max(energy_norm(op, (traj.U[1 : N + 2], traj.Vhalf[1:])))
    lam = op.spectral_bound()
    sc = norm_scale(op, config.norm)  # every reported norm is homogeneous of degree one
    prof_arrays = [sc * np.asarray(x) for x in (prof.eR_nodes, prof.eL_nodes, prof.eR_running, prof.eL_running)]
    stable = k <= scheme.max_stable_step(op) * (1 - 1e-12) and (E0 == 0 or growth <= GROWTH_LIMIT * E0)
    E0 *= sc

    row = StudyRow(
        level=level,
        h=h,
        k=k,
        stable=bool(stable),
        sup_eR=_clamp(sc * prof.sup_eR),
        sup_eL=_clamp(sc * prof.sup_eL),
        eta1=_clamp(sc * est.value),
        iei=_clamp(iei(prof.sup_eL, est.value)),
        energy_T=_clamp(sc * sc * energy[-1]),
        wall_ms=wall,
        cfl_number=k * math.sqrt(lam),
        N=N,
    )
    return CaseResult(
        row=row,
        node_times=nodes,
        eR_nodes=prof_arrays[0],
        eL_nodes=prof_arrays[1],
        eR_running=prof_arrays[2],
        eL_running=prof_arrays[3],
        eta_cumulative=sc * est.eta.cumulative,
        energy_nodes=sc * sc * energy,
        breakdown=[(i, a, b, sc * c) for i, a, b, c in est.eta.breakdown_rows()],
        initial_energy_norm=E0,
    )


def _fill_eoc(rows):
    hs = [r.h for r in rows]
    for name in ("sup_eR", "sup_eL", "eta1"):
        vals = [getattr(r, name) for r in rows]
        for i in range(1, len(rows)):
            try:
                value = eoc(vals, hs, i - 1)
            except ContractViolation:
                value = math.nan
            setattr(rows[i], "eoc_" + ("eta1" if name == "eta1" else name[4:]), value)


@dataclass
class Study:
    config: StudyConfig
    results: list

    @property
    def rows(self):
        return [r.row for r in self.results]

    def violations(self):
        """Stable rows whose ``sup_eR`` exceeds ``eta1``."""
        return [r for r in self.rows if r.stable and not r.reliable]


def run_study(config):
    """Run every level in order; cases are independent of one another."""
    results = [run_case(config, i) for i in range(len(config.levels()))]
    _fill_eoc([r.row for r in results])
    return Study(config, results)


@dataclass
class CflVerdict:
    growth_error: float  # final sup_eL / initial energy norm
    growth_eta: float
    blew_up: bool
    reliable_eR: bool  # cumulative eta_1 >= running sup of e_R at every node
    reliable_eL: bool
    iei_median: float
    iei_spread: float  # max(max/median, median/min) over the unstable phase
    iei_within_decade: bool
    unstable_nodes: int

    @property
    def passed(self):
        return self.blew_up and self.reliable_eR and self.reliable_eL and self.iei_within_decade


def cfl_verdict(result):
    E0 = result.initial_energy_norm
    eta = result.eta_cumulative
    ok_R = bool(np.all([reliable(e, n) for e, n in zip(result.eR_running, eta)]))
    ok_L = bool(np.all([reliable(e, n) for e, n in zip(result.eL_running, eta)]))
    unstable = result.eL_running > E0  # nodes after the error overtook the solution itself
    prof = result.iei_profile[unstable]
    if prof.size:
        med = float(np.median(prof))
        spread = float(max(prof.max() / med, med / prof.min()))
    else:
        med, spread = math.nan, math.inf
    g_err = result.row.sup_eL / E0 if E0 > 0 else math.inf
    g_eta = result.row.eta1 / E0 if E0 > 0 else math.inf
    return CflVerdict(
        growth_error=g_err,
        growth_eta=g_eta,
        blew_up=g_err > 1e3 and g_eta > 1e3,
        reliable_eR=ok_R,
        reliable_eL=ok_L,
        iei_median=med,
        iei_spread=spread,
        iei_within_decade=spread <= 10.0,
        unstable_nodes=int(unstable.sum()),
    )


def run_cfl_scenario(config):
    """Run a deliberately unstable configuration to completion and judge the estimator on it."""
    scheme = config.scheme_params()
    for h, k, N, T in config.levels():
        op = config.build_operator(h)
        if k <= scheme.max_stable_step(op):
            raise ConfigError(f"k={k:g} satisfies the stability limit; the CFL scenario needs a violating step")
    study = run_study(config)
    verdicts = [cfl_verdict(r) for r in study.results]
    return study, verdicts


# reports -------------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.16e}"


def write_rows_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r.as_csv()])


def read_rows_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [[float(v) for v in line] for line in reader]


def emit_report(study, out_dir, verdicts=None, plot=True):
    """Write the study CSV, time profiles, estimator breakdowns, SVG and JSON sidecar.

    Returns the list of written paths.
    """
    rows = study.rows
    if not rows:
        raise ConfigError("nothing to report: the study has no rows")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    name = study.config.name
    written = []

    path = out / f"{name}.csv"
    write_rows_csv(rows, path)
    written.append(path)

    path = out / f"{name}_profiles.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "t", "eR", "eL", "eR_running_sup", "eL_running_sup", "eta1_cumulative", "iei", "energy"])
        for res in study.results:
            cols = (res.node_times, res.eR_nodes, res.eL_nodes, res.eR_running, res.eL_running,
                    res.eta_cumulative, res.iei_profile, res.energy_nodes)
            for vals in zip(*cols):
                w.writerow([str(res.row.level)] + [_fmt(_clamp(v)) for v in vals])
    written.append(path)

    for res in study.results:
        path = out / f"{name}_estimator_level{res.row.level}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["interval", "t_left", "t_right", "contribution"])
            for i, a, b, c in res.breakdown:
                w.writerow([str(i), _fmt(a), _fmt(b), _fmt(_clamp(c))])
        written.append(path)

    if plot:
        from .plots import study_figure

        path = out / f"{name}.svg"
        study_figure(study, path)
        written.append(path)

    meta = {
        "name": name,
        "version": __version__,
        "config": study.config.to_dict(),
        "conventions": study.config.conventions(),
        "levels": [
            {"level": r.level, "N": r.N, "k": r.k, "cfl_number": r.cfl_number, "stable": r.stable} for r in rows
        ],
        "reliability_violations": [r.level for r in study.violations()],
    }
    if verdicts is not None:
        meta["cfl_verdicts"] = [asdict(v) | {"passed": v.passed} for v in verdicts]
    path = out / f"{name}.json"
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    written.append(path)
    return written


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
