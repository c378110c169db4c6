"""Lossless dynamics and the equal-superposition condition.

Starting from ``(|up> + |down>)/sqrt(2) (x) |0>``, the dispersive Hamiltonian
``H = b^dag b - lam sigma_z (b^dag + b)`` displaces the oscillator by
``+/- lam * eta`` with ``eta = 1 - exp(-i t)``. Projecting the spin on
``cos(theta/2)|up> + sin(theta/2) e^{i phi}|down>`` leaves the oscillator in a
superposition of the two displaced states.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import hilbert
from .errors import DegeneratePostSelection

TWO_PI = 2 * math.pi

# |lam * eta| bounds for the single-phonon truncation
WEAK_COUPLING_SOFT = 0.25
WEAK_COUPLING_HARD = 0.5
MIN_PROBABILITY = 1e-15


@dataclass(frozen=True)
class CouplingParams:
    lam: float
    t: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"coupling must be non-negative, got {self.lam}")
        if self.t < 0:
            raise ValueError(f"time must be non-negative, got {self.t}")

    @property
    def displacement(self) -> complex:
        """``lam * eta``, the coherent amplitude of the spin-up branch."""
        return self.lam * eta(self.t)


@dataclass(frozen=True)
class PostSelection:
    """Bloch angles of ``cos(theta/2)|up> + sin(theta/2) e^{i phi}|down>``."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def normalized(self) -> "PostSelection":
        return PostSelection(self.theta % TWO_PI, self.phi % TWO_PI)

    @property
    def ket(self) -> np.ndarray:
        return hilbert.spin_ket(self.theta, self.phi)

    @property
    def alpha_plus(self) -> complex:
        return np.cos(self.theta / 2) + np.exp(-1j * self.phi) * np.sin(self.theta / 2)

    @property
    def alpha_minus(self) -> complex:
        return np.cos(self.theta / 2) - np.exp(-1j * self.phi) * np.sin(self.theta / 2)


PRESELECTION = PostSelection(math.pi / 2, 0.0)


@dataclass(frozen=True)
class MechQubit:
    """Post-selected oscillator state on ``{|0>, |1>}``."""

    c0: complex
    c1: complex
    norm_prefactor: float

    @property
    def probability(self) -> float:
        return self.norm_prefactor ** 2

    @property
    def ket(self) -> np.ndarray:
        return np.array([self.c0, self.c1])


def eta(t: float) -> complex:
    return 1 - np.exp(-1j * t)


def joint_state_unitary(p: CouplingParams, n_max: int, tol: float = 1e-10) -> np.ndarray:
    """``(|up>|lam eta> + |down>|-lam eta>)/sqrt(2)`` on spin (x) Fock."""
    beta = p.displacement
    up = hilbert.coherent_ket(beta, n_max, tol=tol)
    down = hilbert.coherent_ket(-beta, n_max, tol=tol)
    return (hilbert.tensor(hilbert.spin_ket(0, 0), up)
            + hilbert.tensor(hilbert.spin_ket(math.pi, 0), down)) / math.sqrt(2)


def truncated_mech_qubit(p: CouplingParams, s: PostSelection) -> MechQubit:
    """Post-selected oscillator state with each displaced state cut after ``|1>``.

    The amplitudes are ``c0 ~ alpha_+`` and ``c1 ~ lam eta alpha_-``; the
    returned ``norm_prefactor`` squares to the post-selection probability.
    """
    le = p.displacement
    if abs(le) > WEAK_COUPLING_HARD:
        raise ValueError(
            f"|lam eta| = {abs(le):.3f} exceeds {WEAK_COUPLING_HARD}; "
            "the single-phonon truncation does not apply")
    if abs(le) > WEAK_COUPLING_SOFT:
        warnings.warn(f"|lam eta| = {abs(le):.3f} > {WEAK_COUPLING_SOFT}: "
                      "two-phonon population is no longer negligible", stacklevel=2)
    x2 = abs(le) ** 2
    a0 = s.alpha_plus
    a1 = le * s.alpha_minus
    weight = abs(a0) ** 2 + abs(a1) ** 2
    prob = weight / (2 * (1 + x2))
    if prob < MIN_PROBABILITY:
        raise DegeneratePostSelection(
            f"post-selection probability {prob:.2e} at theta={s.theta}, phi={s.phi}")
    scale = 1 / math.sqrt(weight)
    return MechQubit(a0 * scale, a1 * scale, math.sqrt(prob))


def superposition_residual(p: CouplingParams, s: PostSelection) -> float:
    x2 = abs(p.displacement) ** 2
    sc = math.sin(s.theta) * math.cos(s.phi)
    return x2 * (1 - sc) - (1 + sc)


def solve_postselection_angle(p: CouplingParams, phi: float) -> list:
    """All ``theta`` in ``[0, 2 pi)`` giving equal |0> and |1> weights.

    Returns zero, one or two angles in increasing order. At ``lam = 0`` the
    only root is ``3 pi / 2`` (for ``phi = 0``) and its post-selection
    probability vanishes; a warning says so.
    """
    x2 = abs(p.displacement) ** 2
    target = (x2 - 1) / (x2 + 1)
    cphi = math.cos(phi)
    if abs(cphi) < 1e-15:
        if target == 0:
            raise ValueError("every theta solves the condition when cos(phi) = 0 "
                             "and |lam eta| = 1")
        return []
    s = target / cphi
    if abs(s) > 1 + 1e-12:
        return []
    s = min(1.0, max(-1.0, s))
    first = math.asin(s) % TWO_PI
    second = (math.pi - math.asin(s)) % TWO_PI
    roots = sorted({first, second})
    if len(roots) == 2 and abs(roots[1] - roots[0]) < 1e-12:
        roots = roots[:1]
    if x2 == 0:
        warnings.warn("zero coupling: the post-selected state is orthogonal to the "
                      "pre-selected one and occurs with probability 0", stacklevel=2)
    return roots


def branch(p: CouplingParams, s: PostSelection) -> str:
    """``'plus'`` when the induced ``c1/c0`` has a positive real part.

    At ``phi = 0`` and ``t = pi`` the ratio is real, so this is its sign.
    """
    ratio = p.displacement * s.alpha_minus / s.alpha_plus
    return "plus" if ratio.real > 0 else "minus"


def plus_branch_angle(p: CouplingParams, phi: float = 0.0) -> float:
    """The equal-superposition root whose ``c1/c0`` points along ``+1``."""
    roots = solve_postselection_angle(p, phi)
    if not roots:
        raise ValueError(f"no equal-superposition angle for lam={p.lam}, t={p.t}, phi={phi}")
    return max(roots, key=lambda th: (p.displacement * PostSelection(th, phi).alpha_minus
                                      / PostSelection(th, phi).alpha_plus).real)


def postselected_ket_exact(p: CouplingParams, s: PostSelection, n_max: int,
                           tol: float = 1e-10):
    """Untruncated-model oscillator state after post-selection.

    Returns ``(ket, probability)`` where the probability uses exact
    coherent-state overlaps (no Fock cutoff) and the ket is represented on
    ``n_max`` levels.
    """
    beta = p.displacement
    cu = math.cos(s.theta / 2)
    cd = math.sin(s.theta / 2) * np.exp(-1j * s.phi)
    ket = (cu * hilbert.coherent_ket(beta, n_max, tol=tol)
           + cd * hilbert.coherent_ket(-beta, n_max, tol=tol)) / math.sqrt(2)
    prob = 0.5 * (abs(cu) ** 2 + abs(cd) ** 2
                  + 2 * (np.conj(cu) * cd * hilbert.coherent_overlap(beta, -beta)).real)
    if prob < MIN_PROBABILITY:
        raise DegeneratePostSelection(f"post-selection probability {prob:.2e}")
    return ket / np.linalg.norm(ket), float(prob)


def quadratures_exact(p: CouplingParams, s: PostSelection):
    """``(<x>, <p>)`` of the post-selected state from coherent-state algebra alone."""
    beta = p.displacement
    cu = math.cos(s.theta / 2)
    cd = math.sin(s.theta / 2) * np.exp(-1j * s.phi)
    ov = hilbert.coherent_overlap(beta, -beta)  # real: exp(-2|beta|^2)
    norm = abs(cu) ** 2 + abs(cd) ** 2 + 2 * (np.conj(cu) * cd * ov).real
    if norm / 2 < MIN_PROBABILITY:
        raise DegeneratePostSelection(f"post-selection probability {norm / 2:.2e}")
    # <psi|b|psi> with psi = cu|beta> + cd|-beta>
    mean_b = (abs(cu) ** 2 * beta - abs(cd) ** 2 * beta
              - np.conj(cu) * cd * ov * beta + np.conj(cd) * cu * ov * beta) / norm
    return float(mean_b.real), float(mean_b.imag)
