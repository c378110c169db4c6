"""Experiment drivers behind the command line.

Each driver takes a :class:`RunConfig` and returns an :class:`Output` made of
named tables, Wigner grids and scalar results. Rendering to files lives in
:mod:`mechqubit.cli`.
"""

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import aav, hilbert, observables
from .closed_form import CouplingParams, PostSelection, branch, plus_branch_angle, \
    solve_postselection_angle, superposition_residual
from .config import FIELDS, RunConfig
from .damped import DampedParams, kernel, phonon_distribution_analytic, \
    postselected_state_damped, postselection_probability
from .errors import ConfigError, CutoffError, DegeneratePostSelection, NoSolutionError
from .lindblad import DEFAULT_DT, DecoherenceRates, SolverConfig, default_n_max, evolve, \
    fidelity_to_plus_qubit, initial_state, postselect_spin
from .robustness import AngleJitter, monte_carlo_preparation

THREE_HALF_PI = 1.5 * math.pi
FIDELITY_THRESHOLD = 0.85
# reference rates shared by the open-system presets
BATH = dict(nbar_m=10.0, nbar_q=10.0)
FULL_RATES = dict(gamma=1e-3, Gamma=1e-4, gamma_phi=1e-3)


@dataclass
class Output:
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)
    grids: dict = field(default_factory=dict)  # name -> WignerGrid
    scalars: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PointResult:
    theta: float
    phi: float
    branch: str
    model: str
    n_max: int
    probability: float
    distribution: np.ndarray
    coherence: float
    coherence_full: float
    x: float
    p: float
    Q: float
    P: float
    fidelity: float
    rho_m: np.ndarray = field(repr=False)

    def summary(self) -> dict:
        d = self.distribution
        return {"theta": self.theta, "phi": self.phi, "branch": self.branch,
                "model": self.model, "n_max": self.n_max, "probability": self.probability,
                "pr0": float(d[0]), "pr1": float(d[1]), "pr2": float(d[2]) if len(d) > 2 else 0.0,
                "coherence": self.coherence, "coherence_full": self.coherence_full,
                "x": self.x, "p": self.p, "Q": self.Q, "P": self.P, "fidelity": self.fidelity}


def analytic_n_max(lam: float, gamma: float, t: float, tol: float = 1e-13) -> int:
    """Smallest cutoff (at least 8) holding both damped branches to ``tol``."""
    amp = abs(kernel(DampedParams(lam, gamma, t)).beta_plus)
    for n in range(8, 400):
        if hilbert.coherent_leakage(amp, n) <= tol:
            return n
    raise CutoffError(f"coherent amplitude {amp:.3g} needs more than 400 levels")


def select_angle(p: CouplingParams, phi: float, which: str = "plus") -> float:
    roots = solve_postselection_angle(p, phi)
    if not roots:
        raise NoSolutionError(f"no equal-superposition angle for lambda={p.lam}, "
                              f"t={p.t}, phi={phi}")
    if len(roots) == 1:
        return roots[0]
    plus = plus_branch_angle(p, phi)
    return plus if which == "plus" else next(r for r in roots if r != plus)


def _is_thermal(rates: DecoherenceRates) -> bool:
    return bool(rates.Gamma or rates.gamma_phi or rates.nbar_m or rates.nbar_q)


def postselected_state(lam: float, t: float, rates: DecoherenceRates, s: PostSelection,
                       n_max: int = None, model: str = "auto", dt: float = DEFAULT_DT,
                       method: str = "rk4"):
    """Oscillator state after post-selection: ``(rho_m, probability, model, n_max)``.

    ``auto`` uses the closed-form damped model when only zero-temperature
    mechanical damping is present and the master equation otherwise. With
    ``n_max`` unset the master-equation cutoff grows until the tail check
    passes.
    """
    if model == "auto":
        model = "lindblad" if _is_thermal(rates) else "analytic"
    if model == "analytic":
        if _is_thermal(rates):
            raise ConfigError("the analytic model covers zero-temperature mechanical "
                              "damping only; use model=lindblad")
        n = n_max or analytic_n_max(lam, rates.gamma, t)
        rho_m, prob = postselected_state_damped(DampedParams(lam, rates.gamma, t), s, n)
        return rho_m, prob, model, n
    sizes = [n_max] if n_max else [default_n_max(rates) + 8 * k for k in range(4)]
    for i, n in enumerate(sizes):
        try:
            rho = evolve(initial_state(n), t, lam, rates, SolverConfig(n, dt, method))
        except CutoffError:
            if i == len(sizes) - 1:
                raise
            continue
        rho_m, prob = postselect_spin(rho, s)
        return rho_m, prob, model, n


def describe(rho_m, prob, lam, s, which, model, n) -> PointResult:
    x, p = observables.quadratures(rho_m)
    q_amp, p_amp = (x / (2 * lam), p / lam) if lam > 0 else (math.nan, math.nan)
    return PointResult(
        s.theta, s.phi, which, model, n, float(prob), observables.phonon_distribution(rho_m),
        observables.coherence_l1(rho_m[:2, :2]), observables.coherence_l1(rho_m),
        x, p, q_amp, p_amp, fidelity_to_plus_qubit(rho_m), rho_m)


def evaluate_point(lam: float, t: float, rates: DecoherenceRates, theta: float = None,
                   phi: float = 0.0, which: str = "plus", n_max: int = None,
                   model: str = "auto", dt: float = DEFAULT_DT,
                   method: str = "rk4") -> PointResult:
    """Prepare, post-select and characterise the oscillator at one parameter point."""
    p = CouplingParams(lam, t)
    if theta is None:
        theta = select_angle(p, phi, which)
    s = PostSelection(theta, phi)
    tag = branch(p, s)
    rho_m, prob, used, n = postselected_state(lam, t, rates, s, n_max, model, dt, method)
    return describe(rho_m, prob, lam, s, tag, used, n)


_RATE_ATTRS = ("gamma", "Gamma", "gamma_phi", "nbar_m", "nbar_q")


def _rates(cfg: RunConfig, **defaults) -> DecoherenceRates:
    return DecoherenceRates(*(cfg.get(k, defaults.get(k, 0.0)) for k in _RATE_ATTRS))


def _solver_kwargs(cfg: RunConfig) -> dict:
    return dict(n_max=cfg.n_max, model=cfg.get("model", "auto"),
                dt=cfg.get("dt", DEFAULT_DT), method=cfg.get("method", "rk4"))


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _distribution_table(res: PointResult, lam, gamma, t):
    n = np.arange(len(res.distribution))
    cols = ["n", "probability"]
    analytic = None
    if res.model == "analytic" and abs(t - math.pi) < 1e-12:
        analytic = phonon_distribution_analytic(
            DampedParams(lam, gamma, t), PostSelection(res.theta, res.phi), n)
        cols.append("probability_analytic")
    rows = []
    for k in n:
        row = [int(k), float(res.distribution[k])]
        if analytic is not None:
            row.append(float(analytic[k]))
        rows.append(tuple(row))
    return cols, rows


def _wigner(rho_m, extent, resolution):
    return observables.wigner(rho_m, (-extent, extent), (-extent, extent), resolution)


# commands

def run_solve_angle(cfg: RunConfig) -> Output:
    p = CouplingParams(cfg.get("lam", 0.1), cfg.get("t", math.pi))
    phi = cfg.get("phi", 0.0)
    roots = solve_postselection_angle(p, phi)
    if not roots:
        raise NoSolutionError(f"no equal-superposition angle for lambda={p.lam}, "
                              f"t={p.t}, phi={phi}")
    dp = DampedParams(p.lam, 0.0, p.t)
    rows = []
    for theta in roots:
        s = PostSelection(theta, phi)
        rows.append((branch(p, s), theta, superposition_residual(p, s),
                     postselection_probability(dp, s)))
    out = Output()
    out.tables["solve_angle"] = (["branch", "theta", "residual", "probability"], rows)
    return out


def run_evolve(cfg: RunConfig) -> Output:
    lam, t = cfg.get("lam", 0.1), cfg.get("t", math.pi)
    rates = _rates(cfg)
    res = evaluate_point(lam, t, rates, cfg.theta, cfg.get("phi", 0.0),
                         cfg.get("branch", "plus"), **_solver_kwargs(cfg))
    out = Output()
    out.tables["evolve_distribution"] = _distribution_table(res, lam, rates.gamma, t)
    out.scalars.update(res.summary())
    if cfg.get("wigner", False):
        grid = _wigner(res.rho_m, cfg.get("extent", 3.0), cfg.get("resolution", 201))
        out.grids["evolve_wigner"] = grid
        out.scalars["wigner_min"] = grid.min
    return out


SWEEP_COLUMNS = ("theta", "probability", "pr0", "pr1", "pr2", "coherence", "x", "p",
                 "Q", "P", "fidelity")


def run_sweep(cfg: RunConfig) -> Output:
    keys = [a.key for a in cfg.axes]
    points = list(itertools.product(*(a.values for a in cfg.axes)))
    base = {"lam": cfg.get("lam", 0.1), "t": cfg.get("t", math.pi),
            "theta": cfg.theta, "phi": cfg.get("phi", 0.0)}
    solver = _solver_kwargs(cfg)

    def one(values):
        params = dict(base)
        rate_over = {}
        for key, v in zip(keys, values):
            attr = FIELDS[key][0]
            if attr in params:
                params[attr] = v
            else:
                rate_over[attr] = v
        try:
            rates = _rates(cfg) if not rate_over else DecoherenceRates(
                *(rate_over.get(k, cfg.get(k, 0.0)) for k in _RATE_ATTRS))
            res = evaluate_point(params["lam"], params["t"], rates, params["theta"],
                                 params["phi"], cfg.get("branch", "plus"), **solver)
        except NoSolutionError:
            return tuple(values) + (math.nan,) * len(SWEEP_COLUMNS) + ("no-solution",)
        except DegeneratePostSelection:
            return tuple(values) + (math.nan,) * len(SWEEP_COLUMNS) + ("degenerate",)
        except CutoffError:
            return tuple(values) + (math.nan,) * len(SWEEP_COLUMNS) + ("cutoff",)
        s = res.summary()
        return tuple(values) + tuple(float(s[c]) for c in SWEEP_COLUMNS) + ("ok",)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = _map(one, points, cfg.workers)
    out = Output()
    out.tables["sweep"] = (keys + list(SWEEP_COLUMNS) + ["status"], rows)
    out.scalars["points"] = len(rows)
    out.scalars["failed"] = sum(r[-1] != "ok" for r in rows)
    return out


def _mc(cfg: RunConfig, lam: float, rates: DecoherenceRates):
    jitter = AngleJitter(cfg.get("rel_tol_theta", 1e-3), cfg.get("rel_tol_phi", 1e-3),
                         cfg.get("distribution", "uniform"), cfg.seed)
    t = cfg.get("t", math.pi)
    phi = cfg.get("phi", 0.0)
    center = PostSelection(select_angle(CouplingParams(lam, t), phi), phi)
    n_samples = cfg.get("n_samples", 500)
    sizes = [cfg.n_max] if cfg.n_max else [default_n_max(rates) + 8 * k for k in range(4)]
    for i, n in enumerate(sizes):
        solver = SolverConfig(n, cfg.get("dt", DEFAULT_DT), cfg.get("method", "rk4"))
        try:
            return monte_carlo_preparation(lam, rates, jitter, n_samples, t, solver,
                                           post_center=center, workers=cfg.workers)
        except CutoffError:
            if i == len(sizes) - 1:
                raise


def _mc_tables(out: Output, name: str, summary):
    rows = [(n, m, s) for n, (m, s) in
            enumerate(zip(summary.mean_distribution, summary.std_distribution))]
    out.tables[name] = (["n", "mean", "std"], rows)
    return {"n_samples": summary.n_samples, "n_failed": summary.n_failed,
            "mean_pr0": summary.mean_pr0, "std_pr0": summary.std_pr0,
            "mean_pr1": summary.mean_pr1, "std_pr1": summary.std_pr1,
            "mean_fidelity": summary.mean_fidelity, "std_fidelity": summary.std_fidelity,
            "mean_probability": summary.mean_probability,
            "std_probability": summary.std_probability}


def run_monte_carlo(cfg: RunConfig) -> Output:
    lam = cfg.get("lam", 0.05)
    rates = _rates(cfg, **FULL_RATES, **BATH)
    out = Output()
    stats = _mc_tables(out, "monte_carlo_distribution", _mc(cfg, lam, rates))
    out.scalars.update(stats)
    return out


def _aav_curve(out: Output, name: str, lam, t, phi, grid):
    rows = aav.compare_aav_exact(lam, t, phi, grid)
    out.tables[name] = (["theta", "x_exact", "x_aav", "abs_err", "masked"],
                        [(r.theta, r.x_exact, r.x_aav, r.abs_err, r.masked) for r in rows])
    return aav_statistics(rows)


def aav_statistics(rows) -> dict:
    """Breakdown ratio and relative error over the unmasked, finite rows."""
    ok = [r for r in rows if not r.masked and math.isfinite(r.x_aav) and math.isfinite(r.x_exact)]
    if not ok:
        return {"max_ratio": math.nan, "rel_err_sup": math.nan}
    ex = np.array([r.x_exact for r in ok])
    ap = np.array([r.x_aav for r in ok])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(ap) / np.abs(ex)
    scale = float(np.max(np.abs(ex)))
    return {"max_ratio": float(np.nanmax(ratio)),
            "rel_err_sup": float(np.max(np.abs(ap - ex)) / scale) if scale > 0 else math.nan}


def _theta_grid(cfg: RunConfig, lo, hi, num):
    return np.linspace(cfg.get("theta_min", lo), cfg.get("theta_max", hi),
                       cfg.get("n_theta", num))


def run_aav_compare(cfg: RunConfig) -> Output:
    out = Output()
    grid = _theta_grid(cfg, THREE_HALF_PI - 0.5, THREE_HALF_PI + 0.5, 1001)
    out.scalars.update(_aav_curve(out, "aav_compare", cfg.get("lam", 0.05),
                                  cfg.get("t", math.pi), cfg.get("phi", 0.0), grid))
    return out


# figure presets

def _tag(v: float) -> str:
    return f"{v:g}"


def momentum_phi(lam: float, t: float = math.pi) -> float:
    """``phi`` whose equal-superposition root sits at ``theta = 3 pi / 2``.

    There the post-selected ``<x>`` vanishes and ``<p>`` is extremal.
    """
    x2 = abs(CouplingParams(lam, t).displacement) ** 2
    return math.acos((1 - x2) / (1 + x2))


def theta_scan(lam, gamma, t, phi, thetas, n_max=None):
    """Post-selected observables along ``thetas`` for the damped model."""
    dp = DampedParams(lam, gamma, t)
    k = kernel(dp)
    n = n_max or analytic_n_max(lam, gamma, t)
    rows = []
    for th in thetas:
        s = PostSelection(float(th), phi)
        try:
            rho_m, prob = postselected_state_damped(dp, s, n, k=k)
        except DegeneratePostSelection:
            rows.append((float(th),) + (math.nan,) * 7)
            continue
        x, p = observables.quadratures(rho_m)
        rows.append((float(th), observables.coherence_l1(rho_m[:2, :2]),
                     observables.coherence_l1(rho_m), x, p, x / (2 * lam), p / lam, prob))
    return ["theta", "coherence", "coherence_full", "x", "p", "Q", "P", "probability"], rows


def fig1(cfg: RunConfig) -> Output:
    out = Output()
    t, gamma = cfg.get("t", math.pi), cfg.get("gamma", 1e-2)
    rates = DecoherenceRates(gamma=gamma)
    lams = [cfg.lam] if cfg.lam is not None else [0.1, 0.25]
    for i, lam in enumerate(lams):
        res = evaluate_point(lam, t, rates, cfg.theta, cfg.get("phi", 0.0),
                             cfg.get("branch", "plus"), n_max=cfg.n_max, model="analytic")
        name = f"fig1_lambda{_tag(lam)}"
        out.tables[name + "_distribution"] = _distribution_table(res, lam, gamma, t)
        stats = res.summary()
        if i == 0:
            grid = _wigner(res.rho_m, cfg.get("extent", 3.0), cfg.get("resolution", 201))
            out.grids[name + "_wigner"] = grid
            stats["wigner_min"] = grid.min
        out.scalars[name] = stats
    return out


def fig2(cfg: RunConfig) -> Output:
    out = Output()
    lam, t, gamma = cfg.get("lam", 0.05), cfg.get("t", math.pi), cfg.get("gamma", 0.01)
    grid = _theta_grid(cfg, 4.3, 5.2, 901)
    phi_m = momentum_phi(lam, t)
    phis = [cfg.phi] if cfg.phi is not None else [0.0, phi_m / 2, phi_m]
    for phi in phis:
        cols, rows = theta_scan(lam, gamma, t, phi, grid, cfg.n_max)
        name = f"fig2_phi{_tag(phi)}"
        out.tables[name] = (cols, rows)
        coh = np.array([r[1] for r in rows])
        best = int(np.nanargmax(coh))
        # both roots maximise the coherence; report the one the peak sits on
        roots = solve_postselection_angle(CouplingParams(lam, t), phi)
        root = min(roots, key=lambda r: abs(r - rows[best][0])) if roots else math.nan
        out.scalars[name] = {"phi": phi, "root": root, "argmax_theta": rows[best][0],
                             "peak_coherence": float(coh[best]),
                             "max_Q": float(np.nanmax([r[5] for r in rows])),
                             "max_abs_P": float(np.nanmax(np.abs([r[6] for r in rows])))}
    return out


def _fidelity_rows(cfg, lam, t, rate_sets):
    solver = dict(n_max=cfg.n_max, model="lindblad", dt=cfg.get("dt", DEFAULT_DT),
                  method=cfg.get("method", "rk4"))

    def one(rates):
        res = evaluate_point(lam, t, rates, None, 0.0, **solver)
        d = res.distribution
        return (rates.gamma, rates.Gamma, rates.gamma_phi, res.fidelity, res.probability,
                float(d[0]), float(d[1]))

    return _map(one, rate_sets, cfg.workers)


FIDELITY_COLUMNS = ["gamma", "Gamma", "gamma_phi", "fidelity", "probability", "pr0", "pr1"]


def threshold_crossing(xs, fs, level=FIDELITY_THRESHOLD) -> float:
    """First ``x`` (log-interpolated) where ``fs`` falls below ``level``."""
    for (x0, f0), (x1, f1) in zip(zip(xs, fs), zip(xs[1:], fs[1:])):
        if f0 >= level > f1:
            w = (f0 - level) / (f0 - f1)
            return math.exp(math.log(x0) + w * (math.log(x1) - math.log(x0)))
    return math.nan


def fig3a(cfg: RunConfig) -> Output:
    out = Output()
    lam, t = cfg.get("lam", 0.05), cfg.get("t", math.pi)
    nbar = dict(nbar_m=cfg.get("nbar_m", 10.0), nbar_q=cfg.get("nbar_q", 10.0))
    gammas = [cfg.gamma] if cfg.gamma is not None else [1e-3, 1e-4]
    big_gammas = [10 ** (-5 + k / 4) for k in range(13)]
    for g in gammas:
        rows = _fidelity_rows(cfg, lam, t, [DecoherenceRates(g, G, 0.0, **nbar)
                                            for G in big_gammas])
        name = f"fig3a_gamma{_tag(g)}"
        out.tables[name] = (FIDELITY_COLUMNS, rows)
        out.scalars[name] = {"Gamma_at_threshold": threshold_crossing(
            big_gammas, [r[3] for r in rows])}
    return out


def fig3b(cfg: RunConfig) -> Output:
    out = Output()
    lam, t = cfg.get("lam", 0.05), cfg.get("t", math.pi)
    nbar = dict(nbar_m=cfg.get("nbar_m", 10.0), nbar_q=cfg.get("nbar_q", 10.0))
    if cfg.gamma is not None or cfg.Gamma is not None:
        pairs = [(cfg.get("gamma", 1e-3), cfg.get("Gamma", 1e-4))]
    else:
        pairs = [(1e-3, 1e-4), (1e-4, 1e-4)]
    dephasing = [10 ** (-5 + k / 2) for k in range(7)]
    for g, G in pairs:
        rows = _fidelity_rows(cfg, lam, t, [DecoherenceRates(g, G, gp, **nbar)
                                            for gp in dephasing])
        name = f"fig3b_gamma{_tag(g)}_Gamma{_tag(G)}"
        out.tables[name] = (FIDELITY_COLUMNS, rows)
        out.scalars[name] = {"max_fidelity": max(r[3] for r in rows)}
    return out


def fig4(cfg: RunConfig) -> Output:
    out = Output()
    t, gamma = cfg.get("t", math.pi), cfg.get("gamma", 0.01)
    theta, phi = cfg.get("theta", THREE_HALF_PI), cfg.get("phi", 0.0)
    lams = [cfg.lam] if cfg.lam is not None else [1.0, 0.1]
    for lam in lams:
        res = evaluate_point(lam, t, DecoherenceRates(gamma=gamma), theta, phi,
                             n_max=cfg.n_max, model="analytic")
        name = f"fig4_lambda{_tag(lam)}"
        out.tables[name + "_distribution"] = _distribution_table(res, lam, gamma, t)
        grid = _wigner(res.rho_m, cfg.get("extent", 4.0), cfg.get("resolution", 201))
        out.grids[name + "_wigner"] = grid
        d = res.distribution
        total = float(d.sum())
        stats = res.summary()
        stats.update(even_weight=float(d[0::2].sum()) / total,
                     pr1_share=float(d[1]) / total, wigner_min=grid.min)
        if abs(t - math.pi) < 1e-12:
            n = np.arange(len(d))
            pa = phonon_distribution_analytic(DampedParams(lam, gamma, t),
                                              PostSelection(theta, phi), n)
            stats["even_weight_analytic"] = float(pa[0::2].sum() / pa.sum())
        out.scalars[name] = stats
    return out


def fig5(cfg: RunConfig) -> Output:
    out = Output()
    rates = _rates(cfg, **FULL_RATES, **BATH)
    lams = [cfg.lam] if cfg.lam is not None else [0.05, 0.25]
    for lam in lams:
        name = f"fig5_lambda{_tag(lam)}"
        out.scalars[name] = _mc_tables(out, name, _mc(cfg, lam, rates))
    return out


def fig6(cfg: RunConfig) -> Output:
    out = Output()
    t = cfg.get("t", math.pi)
    grid = _theta_grid(cfg, THREE_HALF_PI - 0.5, THREE_HALF_PI + 0.5, 1001)
    lams = [cfg.lam] if cfg.lam is not None else [0.05, 0.01]
    phis = [cfg.phi] if cfg.phi is not None else [0.0, 0.08]
    for lam in lams:
        for phi in phis:
            name = f"fig6_lambda{_tag(lam)}_phi{_tag(phi)}"
            out.scalars[name] = _aav_curve(out, name, lam, t, phi, grid)
    return out


FIGURES = {"fig1": fig1, "fig2": fig2, "fig3a": fig3a, "fig3b": fig3b,
           "fig4": fig4, "fig5": fig5, "fig6": fig6}
COMMANDS = {"solve-angle": run_solve_angle, "evolve": run_evolve, "sweep": run_sweep,
            "monte-carlo": run_monte_carlo, "aav-compare": run_aav_compare}


def run(cfg: RunConfig) -> Output:
    if cfg.experiment == "figure":
        return FIGURES[cfg.preset](cfg)
    return COMMANDS[cfg.experiment](cfg)

