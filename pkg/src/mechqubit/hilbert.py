"""Dense operator algebra on truncated Fock and spin-Fock spaces.

Ordering convention (used by every module in the package): composite
objects are ``spin (x) Fock`` with the spin factor first, so index
``s * n_max + n`` addresses ``|s>|n>``. Spin index 0 is ``|up>`` (sigma_z = +1)
and index 1 is ``|down>`` (sigma_z = -1).

Quadratures follow ``[x, p] = i/2``: ``x = (b + b^dag)/2`` and
``p = (b - b^dag)/(2i)``, so that a coherent state ``|alpha>`` has
``<x> = Re(alpha)`` and ``<p> = Im(alpha)``.
"""

import numpy as np
from scipy.special import gammainc

from .errors import CutoffError

SPIN_DIM = 2
UP, DOWN = 0, 1


def _check_dim(n_max):
    if int(n_max) != n_max or n_max < 2:
        raise ValueError(f"n_max must be an integer >= 2, got {n_max!r}")
    return int(n_max)


def annihilation(n_max: int) -> np.ndarray:
    """Truncated bosonic lowering operator, ``<n-1|b|n> = sqrt(n)``."""
    n_max = _check_dim(n_max)
    return np.diag(np.sqrt(np.arange(1, n_max)), k=1).astype(complex)


def creation(n_max: int) -> np.ndarray:
    return annihilation(n_max).conj().T


def number(n_max: int) -> np.ndarray:
    n_max = _check_dim(n_max)
    return np.diag(np.arange(n_max)).astype(complex)


def position(n_max: int) -> np.ndarray:
    b = annihilation(n_max)
    return (b + b.conj().T) / 2


def momentum(n_max: int) -> np.ndarray:
    b = annihilation(n_max)
    return (b - b.conj().T) / 2j


def sigma_z() -> np.ndarray:
    return np.diag([1.0, -1.0]).astype(complex)


def sigma_minus() -> np.ndarray:
    """``|down><up|``: lowers the spin towards sigma_z = -1."""
    op = np.zeros((2, 2), dtype=complex)
    op[DOWN, UP] = 1.0
    return op


def sigma_plus() -> np.ndarray:
    return sigma_minus().T.copy()


def spin_ket(theta: float, phi: float) -> np.ndarray:
    """``cos(theta/2)|up> + sin(theta/2) e^{i phi}|down>``."""
    return np.array([np.cos(theta / 2), np.sin(theta / 2) * np.exp(1j * phi)])


def fock_ket(n: int, n_max: int) -> np.ndarray:
    n_max = _check_dim(n_max)
    if not 0 <= n < n_max:
        raise ValueError(f"Fock index {n} outside 0..{n_max - 1}")
    ket = np.zeros(n_max, dtype=complex)
    ket[n] = 1.0
    return ket


def coherent_leakage(alpha: complex, n_max: int) -> float:
    """Population of ``|alpha>`` above the cutoff, ``sum_{n >= n_max} |c_n|^2``.

    Evaluated as a Poisson tail (regularised lower incomplete gamma) so
    that it stays accurate far below machine epsilon.
    """
    mu = abs(alpha) ** 2
    if mu == 0.0:
        return 0.0
    return float(gammainc(n_max, mu))


def coherent_ket(alpha: complex, n_max: int, tol: float = 1e-10,
                 return_leakage: bool = False):
    """Coherent state ``|alpha>`` truncated to ``n_max`` levels and renormalised.

    Raises CutoffError when more than ``tol`` of the population lies above
    the cutoff. With ``return_leakage`` the discarded population is returned
    alongside the ket.
    """
    n_max = _check_dim(n_max)
    leak = coherent_leakage(alpha, n_max)
    if leak > tol:
        raise CutoffError(
            f"coherent amplitude |alpha|={abs(alpha):.4g} leaks {leak:.3e} "
            f"beyond n_max={n_max} (tolerance {tol:.1e})")
    amps = np.empty(n_max, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, n_max):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    amps /= np.linalg.norm(amps)
    if return_leakage:
        return amps, leak
    return amps


def coherent_overlap(a: complex, b: complex) -> complex:
    """Exact ``<a|b>`` for untruncated coherent states."""
    return np.exp(-abs(a) ** 2 / 2 - abs(b) ** 2 / 2 + np.conj(a) * b)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; pass the spin factor first."""
    return np.kron(a, b)


def ket2dm(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


def partial_trace_spin(rho: np.ndarray, n_max: int = None) -> np.ndarray:
    """Trace out the spin from a ``spin (x) Fock`` density matrix."""
    dim = rho.shape[-1]
    if rho.shape[-2] != dim or dim % SPIN_DIM:
        raise ValueError(f"expected a square matrix of even size, got {rho.shape}")
    if n_max is None:
        n_max = dim // SPIN_DIM
    if dim != SPIN_DIM * n_max:
        raise ValueError(f"dimension {dim} does not match 2 x n_max = {2 * n_max}")
    blocks = rho.reshape(rho.shape[:-2] + (SPIN_DIM, n_max, SPIN_DIM, n_max))
    return np.einsum("...sisj->...ij", blocks)


def expectation(rho: np.ndarray, obs: np.ndarray) -> complex:
    """``Tr[rho obs]`` for density matrices of matching dimension."""
    if rho.shape != obs.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs obs {obs.shape}")
    return complex(np.einsum("ij,ji->", rho, obs))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``(1/2) ||rho - sigma||_1`` for Hermitian inputs."""
    diff = rho - sigma
    diff = (diff + diff.conj().T) / 2
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def check_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                         trace_tol: float = 1e-8, pos_tol: float = 1e-8) -> None:
    """Raise ValueError unless ``rho`` is Hermitian, unit-trace and positive."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"not a square matrix: {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("non-finite entries")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"not Hermitian (max deviation {herm:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"trace {tr!r} differs from 1")
    low = np.linalg.eigvalsh(rho).min()
    if low < -pos_tol:
        raise ValueError(f"negative eigenvalue {low:.2e}")
