"""Monte-Carlo study of imperfect spin pre- and post-selection.

Each sample perturbs the pre-selection angles around ``(pi/2, 0)`` and the
post-selection angles around the equal-superposition root, evolves under
the full master equation and post-selects. Because the evolution map is
linear, it is applied once to the four spin-basis operators
``|s><s'| (x) |0><0|``; every sample's evolved state is then an exact linear
combination of those, so a sample costs no further integration.

Randomness is counter-based: sample ``i`` draws from a generator seeded with
``(seed, i)``, so results do not depend on execution order or worker count.
"""

import functools
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .closed_form import PRESELECTION, CouplingParams, PostSelection, plus_branch_angle
from .errors import DegeneratePostSelection
from .lindblad import DecoherenceRates, SolverConfig, check_tail, fidelity_to_plus_qubit, \
    postselect_spin, propagate


@dataclass(frozen=True)
class AngleJitter:
    rel_tol_theta: float = 1e-3
    rel_tol_phi: float = 1e-3
    distribution: str = "uniform"  # or "gaussian" (std = rel_tol * angle)
    seed: int = 0
    pre_rel_tol_theta: float = None  # defaults to rel_tol_theta
    pre_rel_tol_phi: float = None

    def __post_init__(self):
        if self.rel_tol_theta < 0 or self.rel_tol_phi < 0:
            raise ValueError("relative tolerances must be non-negative")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"unknown distribution {self.distribution!r}")

    def pre(self) -> "AngleJitter":
        return AngleJitter(
            self.rel_tol_theta if self.pre_rel_tol_theta is None else self.pre_rel_tol_theta,
            self.rel_tol_phi if self.pre_rel_tol_phi is None else self.pre_rel_tol_phi,
            self.distribution, self.seed)


@dataclass(frozen=True)
class SampleRecord:
    index: int
    pre_theta: float
    pre_phi: float
    post_theta: float
    post_phi: float
    probability: float
    pr0: float
    pr1: float
    fidelity: float
    failed: bool
    populations: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class McSummary:
    n_samples: int
    n_failed: int
    mean_pr0: float
    std_pr0: float
    mean_pr1: float
    std_pr1: float
    mean_fidelity: float
    std_fidelity: float
    mean_probability: float
    std_probability: float
    mean_distribution: tuple = ()
    std_distribution: tuple = ()
    records: tuple = field(default=(), compare=True, repr=False)

    @property
    def n_ok(self) -> int:
        return self.n_samples - self.n_failed

    def sem(self, name: str) -> float:
        """Standard error of the mean for ``name`` in {pr0, pr1, fidelity, probability}."""
        return getattr(self, f"std_{name}") / math.sqrt(max(self.n_ok, 1))


def _draw(rng, distribution, size):
    if distribution == "uniform":
        return rng.uniform(-1.0, 1.0, size)
    return rng.standard_normal(size)


def sample_angles(center: PostSelection, j: AngleJitter, rng) -> PostSelection:
    """Perturb ``center`` by at most ``rel_tol * angle`` (uniform) in each angle."""
    u = _draw(rng, j.distribution, 2)
    return PostSelection(center.theta + j.rel_tol_theta * center.theta * u[0],
                         center.phi + j.rel_tol_phi * center.phi * u[1])


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


@functools.lru_cache(maxsize=8)
def propagated_basis(lam: float, rates: DecoherenceRates, t: float = math.pi,
                     cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Evolved ``|s><s'| (x) |0><0|`` for all spin pairs, shape (2, 2, d, d).

    Cached per parameter set; the returned array is read-only.
    """
    n = cfg.n_max
    basis = np.zeros((2, 2, 2 * n, 2 * n), dtype=complex)
    for s in range(2):
        for sp in range(2):
            basis[s, sp, s * n, sp * n] = 1.0
    out = propagate(basis.reshape(4, 2 * n, 2 * n), t, lam, rates, cfg)
    out = out.reshape(2, 2, 2 * n, 2 * n)
    out.flags.writeable = False
    return out


def state_from_basis(evolved: np.ndarray, pre: PostSelection) -> np.ndarray:
    a = pre.ket
    return np.einsum("s,t,stij->ij", a, a.conj(), evolved)


def _summarise(values):
    # statistics works in exact rationals, so the result is order-independent
    if not values:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(statistics.mean(values)), float(statistics.stdev(values))


def monte_carlo_preparation(lam: float, rates: DecoherenceRates, jitter: AngleJitter,
                            n_samples: int, t: float = math.pi, cfg: SolverConfig = None,
                            post_center: PostSelection = None, keep_records: bool = False,
                            workers: int = 1) -> McSummary:
    """Statistics of the prepared oscillator state under angle jitter."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cfg = cfg or SolverConfig()
    if post_center is None:
        post_center = PostSelection(plus_branch_angle(CouplingParams(lam, t), 0.0), 0.0)
    evolved = propagated_basis(lam, rates, t, cfg)
    check_tail(state_from_basis(evolved, PRESELECTION), cfg.n_max, cfg.tail_tolerance)
    pre_jitter = jitter.pre()

    def one(i):
        rng = sample_rng(jitter.seed, i)
        pre = sample_angles(PRESELECTION, pre_jitter, rng)
        post = sample_angles(post_center, jitter, rng)
        rho = state_from_basis(evolved, pre)
        try:
            rho_m, prob = postselect_spin(rho, post)
        except DegeneratePostSelection:
            return SampleRecord(i, pre.theta, pre.phi, post.theta, post.phi,
                                0.0, math.nan, math.nan, math.nan, True)
        pops = np.real(np.diagonal(rho_m))
        return SampleRecord(i, pre.theta, pre.phi, post.theta, post.phi, prob,
                            float(pops[0]), float(pops[1]), fidelity_to_plus_qubit(rho_m), False,
                            tuple(float(v) for v in pops))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, range(n_samples)))
    else:
        records = [one(i) for i in range(n_samples)]

    ok = [r for r in records if not r.failed]
    stats = {}
    for name in ("pr0", "pr1", "fidelity", "probability"):
        stats[name] = _summarise([getattr(r, name) for r in ok])
    per_level = [_summarise([r.populations[n] for r in ok]) for n in range(cfg.n_max)]
    return McSummary(
        n_samples, len(records) - len(ok),
        *stats["pr0"], *stats["pr1"], *stats["fidelity"], *stats["probability"],
        mean_distribution=tuple(m for m, _ in per_level),
        std_distribution=tuple(s for _, s in per_level),
        records=tuple(records) if keep_records else ())

