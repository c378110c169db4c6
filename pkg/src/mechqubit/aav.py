"""Weak-value (first-order AAV) description of the oscillator shift.

Expanding the evolution to first order in ``lam`` and post-selecting the
spin gives a meter shift set by the weak value of ``sigma_z``. These
routines evaluate that approximation and compare it with the exact
post-selected mean position.
"""

import math
from dataclasses import dataclass

import numpy as np

from .closed_form import PRESELECTION, CouplingParams, PostSelection, eta, quadratures_exact
from .errors import DegeneratePostSelection

SINGULAR_OVERLAP = 1e-12
# |<psi_f|psi_i>|^2 below this is treated as the orthogonal neighbourhood
MASK_OVERLAP_SQ = 1e-4


@dataclass(frozen=True)
class WeakValue:
    re: float
    im: float
    finite: bool

    @property
    def value(self) -> complex:
        return complex(self.re, self.im) if self.finite else complex(math.inf, math.inf)


@dataclass(frozen=True)
class AavContext:
    alpha_m: complex = 0.0
    lam: float = 0.0
    t: float = math.pi


@dataclass(frozen=True)
class AavRow:
    theta: float
    x_exact: float
    x_aav: float
    abs_err: float
    masked: bool


def preselection_overlap(s: PostSelection) -> complex:
    """``<psi_f|psi_i>`` with ``psi_i = (|up> + |down>)/sqrt(2)``."""
    return complex(np.vdot(s.ket, PRESELECTION.ket))


def weak_value_sigmaz(s: PostSelection) -> WeakValue:
    f = s.ket
    i = PRESELECTION.ket
    overlap = np.vdot(f, i)
    if abs(overlap) < SINGULAR_OVERLAP:
        return WeakValue(math.inf, math.inf, False)
    w = np.vdot(f, np.array([i[0], -i[1]])) / overlap
    return WeakValue(float(w.real), float(w.imag), True)


def x_mean_aav(s: PostSelection, ctx: AavContext) -> float:
    """First-order mean position for a coherent initial meter ``alpha_m``."""
    wv = weak_value_sigmaz(s)
    if not wv.finite:
        raise ValueError("weak value diverges: post-selection orthogonal to pre-selection")
    a, b = wv.re, wv.im
    lam, t, am = ctx.lam, ctx.t, complex(ctx.alpha_m)
    e = eta(t)
    rot = am * np.exp(-1j * t)
    return float(
        rot.real
        + lam * a * (1 - math.cos(t))
        - lam * b * ((1 + 2 * abs(am) ** 2) * e.imag
                     + 2 * (e * np.conj(am) ** 2 * np.exp(2j * t)).imag)
        + 4 * lam * b * rot.real * (e * np.conj(am) * np.exp(1j * t)).imag)


def x_mean_aav_ground(s: PostSelection, lam: float, t: float) -> float:
    """First-order mean position for a meter starting in the ground state."""
    wv = weak_value_sigmaz(s)
    if not wv.finite:
        raise ValueError("weak value diverges: post-selection orthogonal to pre-selection")
    return lam * (wv.re * (1 - math.cos(t)) - wv.im * math.sin(t))


def compare_aav_exact(lam: float, t: float, phi: float, theta_grid) -> list:
    """Exact versus first-order mean position along a ``theta`` scan.

    Rows whose post-selection is (nearly) orthogonal to the pre-selected
    spin are flagged ``masked``; their AAV value is NaN when it diverges.
    """
    p = CouplingParams(lam, t)
    rows = []
    for theta in np.asarray(theta_grid, dtype=float):
        s = PostSelection(float(theta), phi)
        masked = abs(preselection_overlap(s)) ** 2 < MASK_OVERLAP_SQ
        try:
            x_exact = quadratures_exact(p, s)[0]
        except DegeneratePostSelection:
            x_exact = math.nan
        wv = weak_value_sigmaz(s)
        x_aav = x_mean_aav_ground(s, lam, t) if wv.finite else math.nan
        rows.append(AavRow(float(theta), x_exact, x_aav, abs(x_exact - x_aav), masked))
    return rows
