"""Sweep drivers: reorganisation energy, correlation length, approximations,
delocalisation length, eigenstate scans and static disorder.

Every driver takes a :class:`SweepSpec` and a :class:`RunConfig` and returns a
:class:`SweepResult`.  Parameter points run on a thread pool; results are
always collected in grid order, so output does not depend on the pool width.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .bath import BathSpec, neighbor_count
from .config import RunConfig, load_config
from .errors import InvalidInputError
from .estimator import assemble_model, evaluate
from .exciton import disorder_sample, eigenstate_initials, initial_state

KINDS = ("reorg_sweep", "corrlen_sweep", "deloc_sweep", "eigenstate_scan", "approx_compare",
         "disorder_study")
REFERENCE_STATES = ("8+", "8-", "32+", "32-")
PLATEAU_TOL = 0.002


def default_grid(kind):
    if kind == "reorg_sweep":
        return [0.0] + list(np.logspace(-1, 1, 9)[:-1]) + list(np.linspace(10.0, 100.0, 10))
    if kind == "corrlen_sweep":
        return [0.0] + list(np.linspace(2.0, 100.0, 50)) + [120.0, 150.0, 200.0, 300.0, 500.0,
                                                             math.inf]
    if kind == "approx_compare":
        return list(np.linspace(0.0, 100.0, 51))
    if kind == "deloc_sweep":
        return list(range(1, 33))
    if kind == "disorder_study":
        return [0.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0]
    return [0.0]


def default_states(kind):
    if kind == "approx_compare":
        return ["8-", "1+"]
    if kind in ("deloc_sweep",):
        return ["+", "-"]
    if kind == "eigenstate_scan":
        return []
    return list(REFERENCE_STATES)


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    grid: tuple = None
    states: tuple = None
    fixed: dict = field(default_factory=dict)
    n_disorder: int = 1
    seed: int = 0
    method: str = "linear"
    n_traj: int = 1000
    threads: int = 1
    y: float = 0.7
    plateau_tol: float = PLATEAU_TOL
    sigma: float = None
    corr_lengths: tuple = (40.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown sweep kind {self.kind!r}")
        grid = tuple(float(g) for g in (self.grid if self.grid is not None else default_grid(self.kind)))
        if not grid:
            raise InvalidInputError("grid must be non-empty")
        if len(grid) > 1 and not all(b > a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        states = self.states if self.states is not None else default_states(self.kind)
        object.__setattr__(self, "states", tuple(states))
        if self.n_disorder < 1:
            raise InvalidInputError("n_disorder must be >= 1")
        if self.threads < 1:
            raise InvalidInputError("threads must be >= 1")


@dataclass
class SweepRecord:
    param: float
    state: str
    eta_mean: float
    eta_spread: float
    n_samples: int
    method: str
    config_hash: str
    eta_loss: float = math.nan
    residual: float = 0.0


@dataclass
class SweepResult:
    kind: str
    records: list
    diagnostics: dict
    wall_time: float = 0.0
    warnings: tuple = ()

    def curve(self, state):
        rec = [r for r in self.records if r.state == state]
        return np.array([r.param for r in rec]), np.array([r.eta_mean for r in rec])


def parse_state(desc):
    """``'8+'`` -> ``('window', 8, +1)``; ``'eig:5'`` -> ``('eig', 5, 0)``."""
    desc = str(desc).strip()
    if desc.startswith("eig:"):
        try:
            return ("eig", int(desc[4:]), 0)
        except ValueError as exc:
            raise InvalidInputError(f"bad state {desc!r}") from exc
    if len(desc) >= 2 and desc[-1] in "+-" and desc[:-1].isdigit():
        m = int(desc[:-1])
        if m < 1:
            raise InvalidInputError(f"bad state {desc!r}")
        return ("window", m, 1 if desc[-1] == "+" else -1)
    raise InvalidInputError(f"state must look like '8+', '8-' or 'eig:k', got {desc!r}")


def translation_states(m, sign, system):
    return [initial_state(m, sign, start, system) for start in range(1, system.n_ring + 1)]


def translation_average(m, sign, system, evaluator):
    """Mean and max-min spread of the yield over every cyclic window position.

    ``evaluator`` maps a list of initial states to yields (floats or result
    objects with an ``eta`` attribute).
    """
    etas = _etas(evaluator(translation_states(m, sign, system)))
    return float(etas.mean()), float(etas.max() - etas.min())


def _etas(results):
    return np.array([getattr(r, "eta", r) for r in results], dtype=float)


def _task_seed(seed, *index):
    return int(np.random.SeedSequence([int(seed), *[int(i) for i in index]]).generate_state(1)[0])


def _state_stats(model, descs, method, n_traj, seed):
    """Evaluate several state descriptors on one model with a shared solve."""
    system = model.system
    batches = []
    for d in descs:
        kind, m, sign = parse_state(d)
        if kind == "eig":
            if not 0 <= m < system.n_sites:
                raise InvalidInputError(f"eigenstate index {m} out of range")
            batches.append([model.basis.modes[:, m]])
        else:
            if m > system.n_ring:
                raise InvalidInputError(f"window {m} larger than the ring")
            batches.append(translation_states(m, sign, system))
    flat = [s for b in batches for s in b]
    if method == "jumps":
        results = []
        for i, s in enumerate(flat):
            results.extend(evaluate(model, [s], "jumps", n_traj, _task_seed(seed, i)))
    else:
        results = evaluate(model, flat, method)
    out, pos = {}, 0
    for d, b in zip(descs, batches):
        chunk = results[pos:pos + len(b)]
        pos += len(b)
        eta = _etas(chunk)
        out[d] = dict(mean=float(eta.mean()), spread=float(eta.max() - eta.min()),
                      loss=float(np.mean([r.eta_loss for r in chunk])),
                      residual=float(np.mean([r.residual_trace for r in chunk])), n=len(b))
    return out


def _run_tasks(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(i, x) for i, x in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(items)), items))


def _bath(config, spec, **kw):
    b = config.bath
    fields = dict(reorg_energy=b.reorg_energy, cutoff=b.cutoff, temperature=b.temperature,
                  corr_length=b.corr_length)
    fields.update({k: v for k, v in spec.fixed.items() if k in fields})
    fields.update(kw)
    return BathSpec(**{k: float(v) for k, v in fields.items()})


def _records(param, stats_, spec, config, rename=None):
    recs = []
    for d, s in stats_.items():
        recs.append(SweepRecord(float(param), rename(d) if rename else d, s["mean"], s["spread"],
                                s["n"], spec.method, config.hash, s["loss"], s["residual"]))
    return recs


def _family_split(point):
    plus = [v["mean"] for k, v in point.items() if k.endswith("+")]
    minus = [v["mean"] for k, v in point.items() if k.endswith("-")]
    if not plus or not minus:
        return math.nan, math.nan
    within = max(max(plus) - min(plus), max(minus) - min(minus))
    return float(np.mean(plus) - np.mean(minus)), float(within)


def _spread(point):
    vals = [v["mean"] for v in point.values()]
    return float(max(vals) - min(vals))


def sweep_reorganization(spec: SweepSpec, config: RunConfig = None) -> SweepResult:
    """Yield versus E_R with purely local dephasing (R_B = 0)."""
    config = config or load_config()
    start = time.perf_counter()

    def task(i, er):
        # independent assembly: identity kernel, no J0 evaluation
        model = assemble_model(config.system, _bath(config, spec, reorg_energy=er, corr_length=0.0),
                               kernel="local", bin_tol=config.bin_tol)
        return _state_stats(model, spec.states, spec.method, spec.n_traj, _task_seed(spec.seed, i))

    points = _run_tasks(task, spec.grid, spec.threads)
    records = [r for g, p in zip(spec.grid, points) for r in _records(g, p, spec, config)]
    diag = {"spread": [_spread(p) for p in points]}
    return SweepResult(spec.kind, records, diag, time.perf_counter() - start)


def sweep_correlation_length(spec: SweepSpec, config: RunConfig = None) -> SweepResult:
    """Yield versus R_B at fixed E_R, with the symmetric/asymmetric split."""
    config = config or load_config()
    start = time.perf_counter()

    def task(i, rb):
        model = assemble_model(config.system, _bath(config, spec, corr_length=rb),
                               kernel="full", bin_tol=config.bin_tol)
        return _state_stats(model, spec.states, spec.method, spec.n_traj, _task_seed(spec.seed, i))

    points = _run_tasks(task, spec.grid, spec.threads)
    records = [r for g, p in zip(spec.grid, points) for r in _records(g, p, spec, config)]
    split = [_family_split(p) for p in points]
    diag = {"split": [s[0] for s in split], "within_family_spread": [s[1] for s in split],
            "spread": [_spread(p) for p in points]}
    return SweepResult(spec.kind, records, diag, time.perf_counter() - start)


def approx_compare(spec: SweepSpec, config: RunConfig = None) -> SweepResult:
    """Exact kernel versus the cutoff kernel and the effective local bath."""
    config = config or load_config()
    start = time.perf_counter()
    system = config.system

    def task(i, rb):
        bath = _bath(config, spec, corr_length=rb)
        out = {}
        for curve in ("exact", "cutoff", "effective"):
            kernel = {"exact": "full"}.get(curve, curve)
            model = assemble_model(system, bath, kernel=kernel, y=spec.y, bin_tol=config.bin_tol)
            res = _state_stats(model, spec.states, spec.method, spec.n_traj,
                               _task_seed(spec.seed, i))
            out.update({f"{d}:{curve}": v for d, v in res.items()})
        return out, neighbor_count(system, rb, spec.y)

    results = _run_tasks(task, spec.grid, spec.threads)
    records = [r for g, (p, _) in zip(spec.grid, results) for r in _records(g, p, spec, config)]
    diag = {"neighbor_count": [n for _, n in results]}
    for d in spec.states:
        for curve in ("effective", "cutoff"):
            dev = [abs(p[f"{d}:{curve}"]["mean"] - p[f"{d}:exact"]["mean"]) for p, _ in results]
            diag[f"{d}:{curve}_deviation"] = dev
    return SweepResult(spec.kind, records, diag, time.perf_counter() - start)


def plateau_onset(ms, etas, tol=PLATEAU_TOL):
    """Smallest m with |eta(m') - eta(m)| < tol for every later m'."""
    etas = np.asarray(etas, dtype=float)
    for i, m in enumerate(ms):
        if np.all(np.abs(etas[i + 1:] - etas[i]) < tol):
            return m
    return ms[-1]


def sweep_delocalization(spec: SweepSpec, config: RunConfig = None) -> SweepResult:
    """Translation-averaged yield versus window length m for both sign families."""
    config = config or load_config()
    start = time.perf_counter()
    ms = [int(round(g)) for g in spec.grid]
    if any(m < 1 or m > config.system.n_ring for m in ms):
        raise InvalidInputError("window lengths must lie in 1..n_ring")
    families = [s for s in spec.states if s in ("+", "-")]
    if not families:
        raise InvalidInputError("deloc_sweep states must be '+' and/or '-'")

    def task(i, rb):
        model = assemble_model(config.system, _bath(config, spec, corr_length=rb),
                               kernel="full", bin_tol=config.bin_tol)
        descs = [f"{m}{f}" for f in families for m in ms]
        return _state_stats(model, descs, spec.method, spec.n_traj, _task_seed(spec.seed, i))

    points = _run_tasks(task, list(spec.corr_lengths), spec.threads)
    records, diag = [], {"m_c": {}, "monotonicity_violation": {}}
    for rb, point in zip(spec.corr_lengths, points):
        for f in families:
            tag = f"{f}@RB={_fmt(rb)}"
            etas = np.array([point[f"{m}{f}"]["mean"] for m in ms])
            for m in ms:
                s = point[f"{m}{f}"]
                records.append(SweepRecord(float(m), tag, s["mean"], s["spread"], s["n"],
                                           spec.method, config.hash, s["loss"], s["residual"]))
            mc = plateau_onset(ms, etas, spec.plateau_tol)
            upto = etas[: ms.index(mc) + 1]
            steps = np.diff(upto) * (1 if f == "-" else -1)
            diag["m_c"][tag] = int(mc)
            diag["monotonicity_violation"][tag] = float(max(0.0, -steps.min())) if steps.size else 0.0
    return SweepResult(spec.kind, records, diag, time.perf_counter() - start)


def eigenstate_efficiency_scan(spec: SweepSpec, config: RunConfig = None,
                               overlap_tol=1e-4) -> SweepResult:
    """Yield of each eigenstate with negligible trap population versus its energy."""
    config = config or load_config()
    start = time.perf_counter()
    system = config.system

    def task(i, rb):
        model = assemble_model(system, _bath(config, spec, corr_length=rb), kernel="full",
                               bin_tol=config.bin_tol)
        initials = eigenstate_initials(model.basis, system, overlap_tol)
        if not initials:
            raise InvalidInputError("no eigenstate satisfies the overlap tolerance")
        traps = system.trap_sites
        for _, st in initials:
            if np.sum(np.abs(st.amplitudes[traps]) ** 2) > overlap_tol:
                raise InvalidInputError(f"{st.label} overlaps the trap")
        states = [st for _, st in initials]
        if spec.method == "jumps":
            res = [evaluate(model, [s], "jumps", spec.n_traj, _task_seed(spec.seed, i, j))[0]
                   for j, s in enumerate(states)]
        else:
            res = evaluate(model, states, spec.method)
        return [(e, st.label, r) for (e, st), r in zip(initials, res)]

    points = _run_tasks(task, list(spec.corr_lengths), spec.threads)
    records, diag = [], {"spearman": {}, "eta_spread": {}, "n_states": {}}
    for rb, point in zip(spec.corr_lengths, points):
        tag = f"RB={_fmt(rb)}"
        for e, label, r in point:
            records.append(SweepRecord(e, f"{label}@{tag}", r.eta, 0.0, 1, spec.method,
                                       config.hash, r.eta_loss, r.residual_trace))
        energies = np.array([p[0] for p in point])
        etas = np.array([p[2].eta for p in point])
        rho = stats.spearmanr(energies, etas).statistic if len(point) > 1 else math.nan
        diag["spearman"][tag] = float(rho)
        diag["eta_spread"][tag] = float(etas.max() - etas.min())
        diag["n_states"][tag] = len(point)
    return SweepResult(spec.kind, records, diag, time.perf_counter() - start)


def disorder_study(spec: SweepSpec, config: RunConfig = None) -> SweepResult:
    """Correlation-length sweep averaged over static site-energy disorder."""
    config = config or load_config()
    if spec.sigma is None:
        raise InvalidInputError("disorder_study needs an explicit sigma")
    if spec.n_disorder < 10:
        raise InvalidInputError("disorder_study needs n_disorder >= 10")
    start = time.perf_counter()
    system = config.system
    M = system.n_sites
    samples = [disorder_sample(spec.sigma, M, [spec.seed, j]) for j in range(spec.n_disorder)]
    tasks = [(j, rb) for j in range(spec.n_disorder) for rb in spec.grid]

    def task(i, item):
        j, rb = item
        model = assemble_model(system, _bath(config, spec, corr_length=rb), kernel="full",
                               bin_tol=config.bin_tol_disordered if spec.sigma > 0 else config.bin_tol,
                               disorder=samples[j])
        return _state_stats(model, spec.states, spec.method, spec.n_traj, _task_seed(spec.seed, i))

    points = _run_tasks(task, tasks, spec.threads)
    clean = sweep_correlation_length(
        replace(spec, kind="corrlen_sweep", n_disorder=1, sigma=None), config)
    clean_eta = {(r.param, r.state): r.eta_mean for r in clean.records}
    records, deviation = [], []
    G = len(spec.grid)
    for gi, rb in enumerate(spec.grid):
        worst = 0.0
        for d in spec.states:
            vals = np.array([points[j * G + gi][d]["mean"] for j in range(spec.n_disorder)])
            loss = np.mean([points[j * G + gi][d]["loss"] for j in range(spec.n_disorder)])
            records.append(SweepRecord(float(rb), d, float(vals.mean()), float(vals.std(ddof=1)),
                                       spec.n_disorder, spec.method, config.hash, float(loss), 0.0))
            worst = max(worst, abs(vals.mean() - clean_eta[(float(rb), d)]))
        deviation.append(float(worst))
    diag = {"sigma": float(spec.sigma), "clean": [r.eta_mean for r in clean.records],
            "max_deviation_from_clean": deviation,
            "clean_split": clean.diagnostics["split"]}
    return SweepResult(spec.kind, records, diag, time.perf_counter() - start)


def _fmt(x):
    return "inf" if math.isinf(x) else f"{x:g}"


DRIVERS = {
    "reorg_sweep": sweep_reorganization,
    "corrlen_sweep": sweep_correlation_length,
    "approx_compare": approx_compare,
    "deloc_sweep": sweep_delocalization,
    "eigenstate_scan": eigenstate_efficiency_scan,
    "disorder_study": disorder_study,
}


def run_sweep(spec: SweepSpec, config: RunConfig = None) -> SweepResult:
    return DRIVERS[spec.kind](spec, config)
