"""Zero-temperature damped dynamics in closed form.

With mechanical damping ``gamma`` only, the joint state stays a mixture of
spin blocks ``|s><s'| (x) |beta_s><beta_s'|`` whose spin coherences are
suppressed by ``exp(-decoherence_exponent)``. Everything here is exact up to
the Fock cutoff used to represent the coherent states.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import hilbert
from .closed_form import MIN_PROBABILITY, PostSelection
from .errors import DegeneratePostSelection


@dataclass(frozen=True)
class DampedParams:
    lam: float
    gamma: float
    t: float

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0 or self.t < 0:
            raise ValueError(f"lam, gamma and t must be non-negative: {self}")


@dataclass(frozen=True)
class DampedKernel:
    beta_plus: complex
    beta_minus: complex
    decoherence_exponent: float

    @property
    def coherence_factor(self) -> float:
        return math.exp(-self.decoherence_exponent)


def beta(p: DampedParams, sign: int) -> complex:
    """Coherent amplitude of the ``sigma_z = sign`` branch at time ``p.t``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    g = p.gamma
    return (sign * 2j * p.lam * (g - 2j) / (g * g + 4)
            * (1 - np.exp(-0.5 * (g + 2j) * p.t)))


def _beta_gap_sq(t, lam, gamma):
    # |beta_+ - beta_-|^2 = 4 |beta_+|^2
    return 16 * lam ** 2 / (gamma ** 2 + 4) * (
        1 - 2 * math.exp(-gamma * t / 2) * math.cos(t) + math.exp(-gamma * t))


def decoherence_exponent(p: DampedParams) -> float:
    """``(gamma/2) int_0^t |beta_+ - beta_-|^2 dt'``, non-negative.

    The spin coherence between the two branches decays as ``exp(-value)``.
    """
    if p.gamma == 0 or p.lam == 0 or p.t == 0:
        return 0.0
    # the integrand oscillates with period 2 pi; split so each piece is smooth
    n_pieces = max(1, math.ceil(p.t / math.pi))
    edges = np.linspace(0.0, p.t, n_pieces + 1)
    total = math.fsum(
        integrate.quad(_beta_gap_sq, a, b, args=(p.lam, p.gamma),
                       epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        for a, b in zip(edges[:-1], edges[1:]))
    return 0.5 * p.gamma * total


def kernel(p: DampedParams) -> DampedKernel:
    return DampedKernel(beta(p, 1), beta(p, -1), decoherence_exponent(p))


def postselection_probability(p: DampedParams, s: PostSelection, k: DampedKernel = None) -> float:
    """Probability of finding the spin in the post-selected state."""
    k = k or kernel(p)
    overlap = hilbert.coherent_overlap(k.beta_minus, k.beta_plus)
    return 0.5 * (1 + math.sin(s.theta) * (
        k.coherence_factor * np.exp(1j * s.phi) * overlap).real)


def joint_state_damped(p: DampedParams, n_max: int, tol: float = 1e-10) -> np.ndarray:
    """Joint spin (x) Fock density matrix, pre-selected on ``(|up>+|down>)/sqrt 2``."""
    k = kernel(p)
    kp = hilbert.coherent_ket(k.beta_plus, n_max, tol=tol)
    km = hilbert.coherent_ket(k.beta_minus, n_max, tol=tol)
    cross = k.coherence_factor * np.outer(kp, km.conj())
    rho = np.zeros((2 * n_max, 2 * n_max), dtype=complex)
    rho[:n_max, :n_max] = np.outer(kp, kp.conj())
    rho[:n_max, n_max:] = cross
    rho[n_max:, :n_max] = cross.conj().T
    rho[n_max:, n_max:] = np.outer(km, km.conj())
    return rho / 2


def postselected_state_damped(p: DampedParams, s: PostSelection, n_max: int,
                              tol: float = 1e-10, k: DampedKernel = None):
    """Normalised oscillator state after spin post-selection, and its probability.

    The density matrix is assembled from the coherent projectors; the
    probability is the analytic (cutoff-free) expression. Pass ``k`` to reuse
    a kernel across an angle scan.
    """
    k = k or kernel(p)
    prob = postselection_probability(p, s, k)
    if prob < MIN_PROBABILITY:
        raise DegeneratePostSelection(
            f"post-selection probability {prob:.2e} at theta={s.theta}, phi={s.phi}")
    kp = hilbert.coherent_ket(k.beta_plus, n_max, tol=tol)
    km = hilbert.coherent_ket(k.beta_minus, n_max, tol=tol)
    half = s.theta / 2
    cross = (math.sin(s.theta) / 2 * k.coherence_factor * np.exp(1j * s.phi)
             * np.outer(kp, km.conj()))
    rho = (math.cos(half) ** 2 * np.outer(kp, kp.conj())
           + math.sin(half) ** 2 * np.outer(km, km.conj())
           + cross + cross.conj().T)
    rho /= np.trace(rho).real
    return rho, prob


def c1_coefficient(gamma: float) -> float:
    return (math.exp(-math.pi * gamma / 2) + 1) ** 2 / (gamma ** 2 + 4)


def c2_coefficient(gamma: float) -> float:
    """Non-positive; ``exp(c2 lam^2)`` is the coherence factor at ``t = pi``."""
    g = gamma
    return (8 * math.exp(-math.pi * g) / (g * g + 4) ** 2
            * (4 * math.exp(math.pi * g / 2) * g * g + g * g
               - math.exp(math.pi * g) * (-3 * g * g + math.pi * (g * g + 4) * g + 4) + 4))


def phonon_distribution_analytic(p: DampedParams, s: PostSelection, n):
    """Closed-form ``Pr(n)`` of the post-selected oscillator at ``t = pi``.

    ``n`` may be an integer or an integer array.
    """
    if abs(p.t - math.pi) > 1e-12:
        raise ValueError(f"the closed-form distribution holds at t = pi only, got t={p.t}")
    n = np.asarray(n)
    c1 = c1_coefficient(p.gamma)
    c2 = c2_coefficient(p.gamma)
    mu = 4 * c1 * p.lam ** 2
    sc = math.sin(s.theta) * math.cos(s.phi)
    prob = 0.5 * (1 + sc * math.exp(c2 * p.lam ** 2) * math.exp(-2 * mu))
    if prob < MIN_PROBABILITY:
        raise DegeneratePostSelection(f"post-selection probability {prob:.2e}")
    if mu > 0:
        poisson = np.exp(-mu + n * math.log(mu) - gammaln(n + 1))
    else:
        poisson = (n == 0).astype(float)
    parity = np.where(n % 2 == 0, 1.0, -1.0)
    out = poisson * (1 + sc * math.exp(c2 * p.lam ** 2) * parity) / (2 * prob)
    return out if out.ndim else float(out)
