"""Cat-code logical codec and phenomenological codeword bookkeeping.

Logical basis: |0> = C+(alpha), |1> = C+(i alpha).  A photon loss maps the
pair onto the odd cats and applies a logical Z rotation by pi/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import sqrtm

from .dynamics import kerr_unitary
from .errors import LeakageError
from .fock import DEFAULT_DIM, LEAKAGE_THRESHOLD, cat_state, ladder_ops, phase_rotation, required_dim

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class LogicalQubit:
    c0: complex
    c1: complex

    def __post_init__(self):
        norm = math.sqrt(abs(self.c0) ** 2 + abs(self.c1) ** 2)
        if norm == 0:
            raise ValueError("logical qubit has zero norm")
        object.__setattr__(self, "c0", complex(self.c0) / norm)
        object.__setattr__(self, "c1", complex(self.c1) / norm)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c1])

    def density(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def bloch(self) -> np.ndarray:
        return bloch_of(self.density())

    @classmethod
    def from_bloch(cls, r) -> "LogicalQubit":
        x, y, z = r
        theta = math.acos(max(-1.0, min(1.0, z)))
        phi = math.atan2(y, x)
        return cls(math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2))


CARDINALS = {
    "+z": LogicalQubit(1, 0),
    "-z": LogicalQubit(0, 1),
    "+x": LogicalQubit(1, 1),
    "-x": LogicalQubit(1, -1),
    "+y": LogicalQubit(1, 1j),
    "-y": LogicalQubit(1, -1j),
}

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bloch_of(rho: np.ndarray) -> np.ndarray:
    return np.array([np.real(np.trace(rho @ p)) for p in _PAULI])


def density_from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * (np.eye(2) + r[0] * _PAULI[0] + r[1] * _PAULI[1] + r[2] * _PAULI[2])


def z_rotation(k: int) -> np.ndarray:
    """Logical action of k photon jumps: diag(1, i^k)."""
    return np.diag([1.0, 1j ** (k % 4)])


def depolarize(rho: np.ndarray, retention: float) -> np.ndarray:
    """Shrink the Bloch vector by ``retention``."""
    return retention * rho + (1 - retention) * 0.5 * np.trace(rho) * np.eye(2)


def depolarizing_retention(process_infidelity: float) -> float:
    """Bloch shrink factor of the depolarizing channel with the given process infidelity."""
    # X00 = 1 - 3p/4 and the Bloch vector shrinks by 1 - p
    return 1.0 - 4.0 * process_infidelity / 3.0


@dataclass(frozen=True)
class CatCodeParams:
    nbar0: float = 2.0
    kappa_s: float = 1 / 250.0
    K_s: float = TWO_PI * 0.0045
    dim: int = DEFAULT_DIM
    leakage_threshold: float = LEAKAGE_THRESHOLD

    def __post_init__(self):
        if self.nbar0 <= 0:
            raise ValueError("nbar0 must be positive")

    @property
    def alpha0(self) -> float:
        return math.sqrt(self.nbar0)

    def alpha(self, t: float) -> float:
        return self.alpha0 * math.exp(-0.5 * self.kappa_s * t)


@dataclass(frozen=True)
class CodewordState:
    """Phenomenological tracker of the encoded resonator state."""

    alpha0: complex
    elapsed: float = 0.0
    parity: int = 1
    error_count: int = 0
    frame_angle: float = 0.0
    jump_times: tuple = ()

    def __post_init__(self):
        if self.parity not in (1, -1):
            raise ValueError("parity must be +1 or -1")
        if (self.parity == 1) != (self.error_count % 2 == 0):
            raise ValueError("parity must be +1 exactly when error_count is even")
        if not math.isfinite(self.frame_angle):
            raise ValueError("frame_angle must be finite")
        object.__setattr__(self, "frame_angle", self.frame_angle % TWO_PI)

    def alpha(self, kappa: float) -> complex:
        return self.alpha0 * math.exp(-0.5 * kappa * self.elapsed)

    def advanced(self, dt: float) -> "CodewordState":
        return replace(self, elapsed=self.elapsed + dt)

    def rotated(self, theta: float) -> "CodewordState":
        return replace(self, frame_angle=self.frame_angle + theta)


def apply_logical_jump(s: CodewordState, t_jump: float, K_s: float = 0.0) -> CodewordState:
    """Record one photon loss at ``t_jump``; Kerr turns it into a frame rotation K_s t_jump."""
    if t_jump < s.elapsed - 1e-12:
        raise ValueError("jump time precedes the tracked time")
    return CodewordState(
        alpha0=s.alpha0,
        elapsed=max(s.elapsed, t_jump),
        parity=-s.parity,
        error_count=s.error_count + 1,
        frame_angle=s.frame_angle + K_s * t_jump,
        jump_times=s.jump_times + (t_jump,),
    )


def logical_rotation(s: CodewordState) -> np.ndarray:
    return z_rotation(s.error_count)


def code_basis(alpha: complex, parity: int, dim: int,
               threshold: float = LEAKAGE_THRESHOLD) -> np.ndarray:
    """Columns C^p(alpha), C^p(i alpha)."""
    return np.column_stack([
        cat_state(alpha, parity, dim, threshold),
        cat_state(1j * alpha, parity, dim, threshold),
    ])


def _check_conditioning(alpha: complex) -> None:
    if abs(alpha) ** 2 < 1.0:
        warnings.warn(f"cat basis at |alpha|^2={abs(alpha) ** 2:.2f} is nearly degenerate; "
                      "Gram inversion is ill-conditioned", RuntimeWarning, stacklevel=3)


def encode_ideal(q: LogicalQubit, params: CatCodeParams) -> np.ndarray:
    """Normalized c0 C+(alpha) + c1 C+(i alpha)."""
    basis = code_basis(params.alpha0, 1, params.dim, params.leakage_threshold)
    psi = basis @ q.vector
    return psi / np.linalg.norm(psi)


def _undo_frame(psi: np.ndarray, s: CodewordState, params: CatCodeParams) -> np.ndarray:
    u = kerr_unitary(params.K_s, s.elapsed, params.dim)
    return phase_rotation(s.frame_angle, params.dim) @ (u.conj().T @ psi)


def decode_ideal(psi: np.ndarray, s: CodewordState, params: CatCodeParams,
                 leakage_bound: float | None = None):
    """Project onto the parity-matched code space at alpha(t).

    The Kerr evolution over ``s.elapsed`` and the recorded frame rotation are
    undone first.  Returns (LogicalQubit, leakage) where leakage is the
    population outside span{C^p(alpha_t), C^p(i alpha_t)}.
    """
    alpha_t = s.alpha(params.kappa_s)
    _check_conditioning(alpha_t)
    psi = _undo_frame(np.asarray(psi, dtype=complex), s, params)
    basis = code_basis(alpha_t, s.parity, params.dim, params.leakage_threshold)
    gram = basis.conj().T @ basis
    proj = basis.conj().T @ psi
    x = np.linalg.solve(gram, proj)
    kept = float(np.real(np.vdot(proj, x)))
    leakage = max(0.0, 1.0 - kept / float(np.real(np.vdot(psi, psi))))
    if leakage_bound is not None and leakage > leakage_bound:
        raise LeakageError(f"leakage {leakage:.3f} exceeds {leakage_bound}")
    if np.linalg.norm(x) < 1e-14:
        raise LeakageError("state has no component in the code space")
    return LogicalQubit(x[0], x[1]), leakage


def orthonormal_basis(alpha: complex, parity: int, dim: int) -> np.ndarray:
    """Symmetrically orthonormalized code basis B G^{-1/2}.

    This is the closest orthonormal pair to the cat basis, i.e. what a unitary
    encode or decode pulse can at best target.
    """
    basis = code_basis(alpha, parity, dim)
    gram = basis.conj().T @ basis
    return basis @ np.linalg.inv(sqrtm(gram))


def basis_overlaps(alpha: float):
    """Squared overlaps |<C+a|C+ia>|^2 and |<C-a|C-ia>|^2 for real alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a2 = alpha * alpha
    e1 = math.exp(-a2)
    e2 = math.exp(-2 * a2)
    even = (2 * e1 * math.cos(a2) / (1 + e2)) ** 2
    odd = (2 * e1 * math.sin(a2) / (1 - e2)) ** 2
    return even, odd


def jump_time_estimates(jump_step_indices: Sequence[int], t_w: float,
                        step_durations: Sequence[float] | None = None) -> list[float]:
    """Mid-step time assigned to each detected jump (steps are 1-based)."""
    if step_durations is None:
        return [(j - 0.5) * t_w for j in jump_step_indices]
    ends = np.cumsum(step_durations)
    starts = ends - np.asarray(step_durations)
    return [0.5 * (starts[j - 1] + ends[j - 1]) for j in jump_step_indices]


def kerr_frame_estimate(jump_step_indices: Sequence[int], t_w: float, K_s: float,
                        step_durations: Sequence[float] | None = None) -> float:
    """Best-estimate Kerr frame angle: K_s times the midpoint of each flagged step."""
    if any(j < 1 for j in jump_step_indices):
        raise ValueError("step indices are 1-based")
    return float(K_s * sum(jump_time_estimates(jump_step_indices, t_w, step_durations)))


def jump_branch(psi: np.ndarray, k: int, kappa: float, t: float) -> np.ndarray:
    """Unnormalized k-jump branch of pure loss over [0, t]: e^{-kappa t n/2} a^k psi."""
    dim = psi.shape[0]
    a = ladder_ops(dim)[0]
    out = np.asarray(psi, dtype=complex)
    for _ in range(k):
        out = a @ out
    return np.exp(-0.5 * kappa * t * np.arange(dim)) * out


def unitary_codec_retention(nbar0: float, kappa: float, t: float, jumps: int,
                            dim: int = DEFAULT_DIM) -> float:
    """Bloch retention of a unitary encode at alpha0 and unitary decode at alpha(t).

    Encode and decode target the orthonormalized cat pairs.  Because those pairs
    depend on the basis overlap, which changes as the amplitude decays, the
    round trip is no longer the identity.  ``jumps`` photon losses are applied
    exactly and undone by the logical Z correction.  The returned value is the
    scaled process fidelity (X00 - 1/4)/(3/4), read as a depolarizing retention.
    """
    from .tomography import chi_from_cardinals, process_fidelity, scaled_fidelity

    alpha0 = math.sqrt(nbar0)
    alpha_t = alpha0 * math.exp(-0.5 * kappa * t)
    # the result is a scalar, so grow the space to whatever the amplitude needs
    dim = required_dim(nbar0, minimum=dim)
    enc = orthonormal_basis(alpha0, 1, dim)
    parity = 1 if jumps % 2 == 0 else -1
    dec = orthonormal_basis(alpha_t, parity, dim)
    fix = z_rotation(-jumps)
    outs = {}
    for name, q in CARDINALS.items():
        psi = jump_branch(enc @ q.vector, jumps, kappa, t)
        v = fix @ (dec.conj().T @ psi)
        rho = np.outer(v, v.conj())
        outs[name] = bloch_of(rho / np.trace(rho).real)
    return scaled_fidelity(process_fidelity(chi_from_cardinals(outs)))
