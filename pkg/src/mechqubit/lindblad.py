"""Thermal master equation for the spin-oscillator pair.

The generator is

    d rho/dt = -i[H, rho] + gamma (1 + nbar_m) D[b] + gamma nbar_m D[b^dag]
               + Gamma (1 + nbar_q) D[sigma^-] + Gamma nbar_q D[sigma^+]
               + (gamma_phi / 2) D[sigma_z]

with ``H = b^dag b - lam sigma_z (b^dag + b)`` and
``D[O] rho = O rho O^dag - {O^dag O, rho}/2``. States are dense density
matrices on spin (x) Fock (spin first, see :mod:`mechqubit.hilbert`).
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import hilbert
from .closed_form import MIN_PROBABILITY, PRESELECTION, PostSelection
from .errors import CutoffError, DegeneratePostSelection, IntegrationError

DEFAULT_DT = math.pi / 2000


@dataclass(frozen=True)
class DecoherenceRates:
    gamma: float = 0.0
    Gamma: float = 0.0
    gamma_phi: float = 0.0
    nbar_m: float = 0.0
    nbar_q: float = 0.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value >= 0:
                raise ValueError(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class SolverConfig:
    n_max: int = 16
    dt: float = DEFAULT_DT
    method: str = "rk4"  # or "adaptive"
    rtol: float = 1e-10
    atol: float = 1e-12
    tail_tolerance: float = 1e-8
    trace_tolerance: float = 1e-8

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.dt <= 0 or self.tail_tolerance <= 0:
            raise ValueError("dt and tail_tolerance must be positive")
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown method {self.method!r}")


def default_n_max(rates: DecoherenceRates) -> int:
    return 32 if rates.nbar_m > 10 else 16


class Generator:
    """Precomputed pieces of the Lindblad generator for one parameter set."""

    def __init__(self, n_max: int, lam: float, rates: DecoherenceRates):
        self.n_max = n_max
        self.dim = 2 * n_max
        eye_s = np.eye(2)
        eye_m = np.eye(n_max)
        b = hilbert.tensor(eye_s, hilbert.annihilation(n_max))
        sz = hilbert.tensor(hilbert.sigma_z(), eye_m)
        sm = hilbert.tensor(hilbert.sigma_minus(), eye_m)
        bd = b.conj().T
        self.hamiltonian = bd @ b - lam * sz @ (bd + b)
        jumps = [
            (rates.gamma * (1 + rates.nbar_m), b),
            (rates.gamma * rates.nbar_m, bd),
            (rates.Gamma * (1 + rates.nbar_q), sm),
            (rates.Gamma * rates.nbar_q, sm.conj().T),
            (rates.gamma_phi / 2, sz),
        ]
        self.jumps = [(r, op) for r, op in jumps if r > 0]
        h_eff = self.hamiltonian.astype(complex)
        for r, op in self.jumps:
            h_eff = h_eff - 0.5j * r * op.conj().T @ op
        # rhs = A rho + rho A^dag + sum_k r_k L_k rho L_k^dag, with A = -i H_eff
        self._a = -1j * h_eff
        self._a_dag = self._a.conj().T
        self._ls = [(r, op, op.conj().T) for r, op in self.jumps]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = self._a @ rho + rho @ self._a_dag
        for r, op, op_dag in self._ls:
            out += r * (op @ rho @ op_dag)
        return out


@functools.lru_cache(maxsize=32)
def _generator(n_max: int, lam: float, rates: DecoherenceRates) -> Generator:
    return Generator(n_max, lam, rates)


def liouvillian_rhs(rho: np.ndarray, lam: float, rates: DecoherenceRates) -> np.ndarray:
    """Time derivative of ``rho`` under the master equation."""
    dim = rho.shape[-1]
    if rho.shape[-2] != dim or dim % 2 or dim < 4:
        raise ValueError(f"expected a spin (x) Fock matrix, got shape {rho.shape}")
    return _generator(dim // 2, float(lam), rates)(rho)


def initial_state(n_max: int, pre: PostSelection = PRESELECTION) -> np.ndarray:
    """Spin pre-selected on ``pre`` and the oscillator in its ground state."""
    ket = hilbert.tensor(pre.ket, hilbert.fock_ket(0, n_max))
    return hilbert.ket2dm(ket)


def rk4(gen, rho: np.ndarray, t_final: float, dt: float) -> np.ndarray:
    """Fixed-step classical Runge-Kutta; the step is shrunk to divide ``t_final``."""
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    h = t_final / n_steps
    rho = np.array(rho, dtype=complex)
    for _ in range(n_steps):
        k1 = gen(rho)
        k2 = gen(rho + 0.5 * h * k1)
        k3 = gen(rho + 0.5 * h * k2)
        k4 = gen(rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def _adaptive(gen, rho, t_final, cfg, t_eval=None):
    shape = rho.shape

    def f(_t, y):
        return gen(y.reshape(shape)).ravel()

    sol = solve_ivp(f, (0.0, t_final), np.asarray(rho, dtype=complex).ravel(),
                    method="DOP853", rtol=cfg.rtol, atol=cfg.atol, t_eval=t_eval)
    if not sol.success:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    if t_eval is None:
        return sol.y[:, -1].reshape(shape)
    return sol.y.T.reshape((len(t_eval),) + shape)


def propagate(rho0: np.ndarray, t_final: float, lam: float, rates: DecoherenceRates,
              cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Apply the linear evolution map to ``rho0`` without state checks.

    ``rho0`` may carry leading batch axes and need not be a density matrix,
    which lets callers evolve operator bases in one pass.
    """
    gen = _generator(cfg.n_max, float(lam), rates)
    if rho0.shape[-1] != gen.dim:
        raise ValueError(f"state dimension {rho0.shape[-1]} does not match "
                         f"2 x n_max = {gen.dim}")
    if t_final == 0:
        return np.array(rho0, dtype=complex)
    if cfg.method == "rk4":
        return rk4(gen, rho0, t_final, cfg.dt)
    if rho0.ndim > 2:
        return np.stack([_adaptive(gen, r, t_final, cfg) for r in rho0])
    return _adaptive(gen, rho0, t_final, cfg)


def check_tail(rho: np.ndarray, n_max: int, tol: float) -> float:
    """Population of the two highest Fock levels; raises CutoffError above ``tol``."""
    pops = np.real(np.diagonal(hilbert.partial_trace_spin(rho, n_max)))
    tail = float(pops[-2:].sum())
    if tail > tol:
        raise CutoffError(f"top two Fock levels hold {tail:.2e} > {tol:.1e}; "
                          f"increase n_max (currently {n_max})")
    return tail


def evolve(rho0: np.ndarray, t_final: float, lam: float, rates: DecoherenceRates,
           cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Evolve a joint density matrix to ``t_final`` and validate the result."""
    rho = propagate(rho0, t_final, lam, rates, cfg)
    drift = abs(np.trace(rho) - np.trace(rho0))
    if drift > cfg.trace_tolerance:
        raise IntegrationError(f"trace drifted by {drift:.2e}")
    check_tail(rho, cfg.n_max, cfg.tail_tolerance)
    return rho


def trajectory(rho0: np.ndarray, times, lam: float, rates: DecoherenceRates,
               cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """States at each of the increasing ``times`` (first entry may be 0)."""
    times = np.asarray(times, dtype=float)
    out = []
    rho, t_prev = np.array(rho0, dtype=complex), 0.0
    for t in times:
        rho = propagate(rho, t - t_prev, lam, rates, cfg)
        t_prev = t
        out.append(rho)
    return np.stack(out)


def postselect_spin(rho: np.ndarray, s: PostSelection):
    """Project the spin on ``s``; returns ``(rho_m, probability)``."""
    dim = rho.shape[-1]
    if dim % 2:
        raise ValueError(f"odd dimension {dim} is not spin (x) Fock")
    n_max = dim // 2
    f = s.ket
    blocks = rho.reshape(rho.shape[:-2] + (2, n_max, 2, n_max))
    unnorm = np.einsum("s,...sitj,t->...ij", f.conj(), blocks, f)
    prob = float(np.trace(unnorm, axis1=-2, axis2=-1).real) if unnorm.ndim == 2 else None
    if prob is None:
        raise ValueError("postselect_spin expects a single density matrix")
    if prob < MIN_PROBABILITY:
        raise DegeneratePostSelection(
            f"post-selection probability {prob:.2e} at theta={s.theta}, phi={s.phi}")
    return unnorm / prob, prob


PLUS_QUBIT = np.array([1.0, 1.0]) / math.sqrt(2)


def fidelity_to_plus_qubit(rho_m: np.ndarray) -> float:
    """``sqrt(<psi|rho_m|psi>)`` with ``psi = (|0> + |1>)/sqrt(2)``."""
    value = (PLUS_QUBIT.conj() @ rho_m[:2, :2] @ PLUS_QUBIT).real
    return float(math.sqrt(min(1.0, max(0.0, value))))
