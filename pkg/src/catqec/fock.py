"""Truncated Fock-space states, operators and phase-space functions.

States are plain complex numpy arrays: a 1-D array is a pure state, a 2-D
square array is a density matrix.  Operators are dense 2-D arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln
from scipy.stats import poisson

from .errors import DimensionError, TruncationError

DEFAULT_DIM = 20
LEAKAGE_THRESHOLD = 1e-9
# extra levels used when building states and displacements before truncation
_PAD = 60


def tail_mass(psi: np.ndarray, levels: int = 2) -> float:
    """Population in the top ``levels`` Fock states."""
    if psi.ndim == 1:
        return float(np.sum(np.abs(psi[-levels:]) ** 2))
    return float(np.real(np.trace(psi)[()] - np.trace(psi[:-levels, :-levels])))


def normalize(psi: np.ndarray) -> np.ndarray:
    if psi.ndim == 1:
        return psi / np.linalg.norm(psi)
    return psi / np.trace(psi)


def _coherent_amplitudes(alpha: complex, n_levels: int) -> np.ndarray:
    n = np.arange(n_levels)
    r = abs(alpha)
    if r == 0:
        out = np.zeros(n_levels, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * r**2 + n * np.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def required_dim(nbar: float, threshold: float = LEAKAGE_THRESHOLD, minimum: int = DEFAULT_DIM) -> int:
    """Smallest dimension whose top two levels hold less than ``threshold`` of a cat at ``nbar``."""
    dim = max(minimum, 3)
    # a cat carries at most twice the coherent-state population on each level
    while 2.0 * poisson.sf(dim - 3, nbar) > threshold:
        dim += 1
    return dim


def _truncate(full: np.ndarray, dim: int, threshold: float) -> np.ndarray:
    """Cut a padded expansion to ``dim`` levels, checking the edge population."""
    full = full / np.linalg.norm(full)
    edge = float(np.sum(np.abs(full[dim - 2:]) ** 2))
    if edge > threshold:
        raise TruncationError(
            f"population {edge:.3e} above level {dim - 3} exceeds {threshold:.1e}; increase dim"
        )
    return normalize(full[:dim].astype(complex))


def coherent_state(alpha: complex, dim: int = DEFAULT_DIM,
                   threshold: float = LEAKAGE_THRESHOLD) -> np.ndarray:
    """|alpha> on ``dim`` Fock levels, renormalized after truncation."""
    return _truncate(_coherent_amplitudes(alpha, dim + _PAD), dim, threshold)


def cat_state(alpha: complex, parity_sign: int, dim: int = DEFAULT_DIM,
              threshold: float = LEAKAGE_THRESHOLD) -> np.ndarray:
    """Even (+1) or odd (-1) two-component cat, N(|alpha> +/- |-alpha>)."""
    if parity_sign not in (1, -1):
        raise ValueError("parity_sign must be +1 or -1")
    n_levels = dim + _PAD
    n = np.arange(n_levels)
    amps = _coherent_amplitudes(alpha, n_levels)
    # |alpha> + s|-alpha> keeps only Fock states whose parity matches s
    mask = (n % 2 == 0) if parity_sign == 1 else (n % 2 == 1)
    full = np.where(mask, 2 * amps, 0.0)
    if np.linalg.norm(full) == 0:
        raise ValueError("odd cat with alpha=0 is undefined")
    return _truncate(full, dim, threshold)


def fock_state(n: int, dim: int = DEFAULT_DIM) -> np.ndarray:
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def ladder_ops(dim: int = DEFAULT_DIM):
    """Return (a, a_dag, n, parity) for a ``dim``-level oscillator."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    n = np.diag(np.arange(dim)).astype(complex)
    parity = np.diag((-1.0) ** np.arange(dim)).astype(complex)
    return a, a.conj().T, n, parity


def number_op(dim: int = DEFAULT_DIM) -> np.ndarray:
    return np.diag(np.arange(dim)).astype(complex)


def parity_op(dim: int = DEFAULT_DIM) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def phase_rotation(theta: float, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Diagonal phase-space rotation exp(i theta n)."""
    return np.diag(np.exp(1j * theta * np.arange(dim)))


def displacement(alpha: complex, dim: int = DEFAULT_DIM) -> np.ndarray:
    """D(alpha) = exp(alpha a^dag - alpha^* a).

    The exponential is taken on a padded space and cropped, so matrix elements
    between low Fock levels are free of truncation error.
    """
    big = 2 * dim + int(np.ceil(abs(alpha) ** 2)) + 20
    a, ad, _, _ = ladder_ops(big)
    return expm(alpha * ad - np.conj(alpha) * a)[:dim, :dim]


def as_density(state: np.ndarray) -> np.ndarray:
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    if op.shape[0] != state.shape[0]:
        raise DimensionError(f"operator dim {op.shape[0]} != state dim {state.shape[0]}")
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """State fidelity; pure-pure is |<a|b>|^2, pure-mixed <a|rho|a>."""
    if a.ndim == 1 and b.ndim == 1:
        return float(abs(np.vdot(a, b)) ** 2)
    if a.ndim == 1:
        return float(np.real(np.vdot(a, b @ a)))
    if b.ndim == 1:
        return float(np.real(np.vdot(b, a @ b)))
    from scipy.linalg import sqrtm

    s = sqrtm(a)
    return float(np.real(np.trace(sqrtm(s @ b @ s))) ** 2)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = as_density(rho) - as_density(sigma)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def _displaced_parity_elements(beta: np.ndarray, dim: int) -> np.ndarray:
    """<m| D(beta) P D(beta)^dag |n> for all m, n and each grid point.

    Closed form via associated Laguerre polynomials; returns shape
    (len(beta), dim, dim).
    """
    beta = np.asarray(beta, dtype=complex).ravel()
    x = 4 * np.abs(beta) ** 2
    out = np.zeros((beta.size, dim, dim), dtype=complex)
    gauss = np.exp(-0.5 * x)
    for m in range(dim):
        for n in range(m + 1):
            k = m - n
            coef = (-1) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            val = coef * (2 * beta) ** k * gauss * eval_genlaguerre(n, k, x)
            out[:, m, n] = val
            out[:, n, m] = np.conj(val)
    return out


def wigner(state: np.ndarray, grid) -> np.ndarray:
    """W(beta) = (2/pi) <D(beta) P D(beta)^dag> at each complex grid point."""
    rho = as_density(np.asarray(state, dtype=complex))
    grid = np.asarray(grid, dtype=complex)
    elems = _displaced_parity_elements(grid, rho.shape[0])
    vals = np.einsum("mn,gnm->g", rho, elems)
    return (2 / np.pi) * np.real(vals).reshape(grid.shape)


def safe_disk_radius(dim: int) -> float:
    """Largest |beta| accepted for Wigner grids on a ``dim``-level state."""
    return float(np.sqrt(dim))


def wigner_csv_rows(grid, values):
    """Yield (re, im, W) rows for CSV output."""
    for b, w in zip(np.ravel(grid), np.ravel(values)):
        yield (float(np.real(b)), float(np.imag(b)), float(w))
