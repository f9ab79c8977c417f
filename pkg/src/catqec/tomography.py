"""Single-qubit state and process tomography, channel models and decay fits.

Process matrices use the operator basis {I, X, -iY, Z}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit, minimize
from scipy.spatial.transform import Rotation

from .errors import FitError, UnphysicalError

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
CHI_BASIS = (_I, _X, -1j * _Y, _Z)
_PAULI = (_X, _Y, _Z)

_VEC = np.column_stack([e.T.ravel() for e in CHI_BASIS])
_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class BlochVector:
    rx: float
    ry: float
    rz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True)
class ChiMatrix:
    matrix: np.ndarray

    @property
    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))))

    def to_json(self) -> dict:
        return {"re": np.real(self.matrix).tolist(), "im": np.imag(self.matrix).tolist()}

    @classmethod
    def from_json(cls, data: Mapping) -> "ChiMatrix":
        return cls(np.array(data["re"]) + 1j * np.array(data["im"]))


@dataclass(frozen=True)
class DecayFit:
    A: float
    tau: float
    A_err: float
    tau_err: float
    model: str

    def predict(self, t, nbar0: float | None = None):
        return decay_model(self.model, nbar0)(np.asarray(t, dtype=float), self.A, self.tau)


def _as_vec(r) -> np.ndarray:
    if isinstance(r, BlochVector):
        return r.as_array()
    return np.asarray(r, dtype=float)


def bloch_from_outcomes(counts) -> np.ndarray:
    """Estimate (rx, ry, rz) from (n_plus, n_minus) counts along x, y, z.

    ``counts`` is a mapping axis -> (n_plus, n_minus) or a 3x2 array.
    """
    if isinstance(counts, Mapping):
        rows = [counts[a] for a in ("x", "y", "z")]
    else:
        rows = list(counts)
    out = np.empty(3)
    for i, (plus, minus) in enumerate(rows):
        total = plus + minus
        if total <= 0:
            raise ValueError("each axis needs at least one outcome")
        out[i] = (plus - minus) / total
    return out


def sample_bloch(rho: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Projective measurement counts along x, y, z for ``shots`` copies each."""
    counts = np.empty((3, 2), dtype=np.int64)
    for i, p in enumerate(_PAULI):
        prob_plus = 0.5 * (1 + float(np.real(np.trace(rho @ p))))
        plus = rng.binomial(shots, min(1.0, max(0.0, prob_plus)))
        counts[i] = plus, shots - plus
    return counts


def affine_map(bloch: Mapping[str, object]):
    """Bloch-sphere affine map r -> M r + c from cardinal-state outputs."""
    for key in ("+x", "+y", "+z", "-z"):
        if key not in bloch:
            raise ValueError(f"missing cardinal input {key}")
    rz_p, rz_m = _as_vec(bloch["+z"]), _as_vec(bloch["-z"])
    c = 0.5 * (rz_p + rz_m)
    m = np.empty((3, 3))
    m[:, 2] = 0.5 * (rz_p - rz_m)
    for col, axis in ((0, "x"), (1, "y")):
        plus = _as_vec(bloch["+" + axis])
        if "-" + axis in bloch:
            m[:, col] = 0.5 * (plus - _as_vec(bloch["-" + axis]))
        else:
            m[:, col] = plus - c
    return m, c


def _choi_basis():
    # Pauli coefficients and traces of each |i><j|, in row-major (i, j) order
    units = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    coeffs = np.array([[np.trace(e @ p) for p in _PAULI] for e in units])  # 4 x 3
    traces = np.array([np.trace(e) for e in units])
    return coeffs, traces


_UNIT_COEFFS, _UNIT_TRACES = _choi_basis()
_PAULI_STACK = np.array(_PAULI)


def chi_from_affine(m: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Process matrix of the Bloch map r -> M r + c."""
    # Lambda(|i><j|) = (tr I + sum_k (M r + c tr)_k sigma_k) / 2 with complex r
    out_r = _UNIT_COEFFS @ np.asarray(m).T + np.outer(_UNIT_TRACES, c)
    outs = 0.5 * (_UNIT_TRACES[:, None, None] * _I + np.einsum("uk,kab->uab", out_r, _PAULI_STACK))
    # block (i, j) of the Choi matrix is Lambda(|i><j|)
    choi = outs.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    chi = _VEC.conj().T @ choi @ _VEC / 4.0
    # the identity element has the closed form (1 + tr M) / 4; set it exactly
    chi[0, 0] = 0.25 * (1.0 + np.trace(m))
    return chi


def chi_from_cardinals(bloch: Mapping[str, object], psd_tol: float = 1e-6,
                       on_unphysical: str = "report") -> ChiMatrix:
    """Process matrix from output Bloch vectors of the cardinal inputs.

    ``on_unphysical`` is "report" (return as is), "raise" or "clip" (project
    negative eigenvalues to zero and renormalize).
    """
    m, c = affine_map(bloch)
    chi = chi_from_affine(m, c)
    chi = 0.5 * (chi + chi.conj().T)
    evals, evecs = np.linalg.eigh(chi)
    if evals.min() < -psd_tol:
        if on_unphysical == "raise":
            raise UnphysicalError(f"chi has eigenvalue {evals.min():.3e}")
        if on_unphysical == "clip":
            evals = np.clip(evals, 0, None)
            chi = (evecs * evals) @ evecs.conj().T
            chi = chi / np.trace(chi).real
    return ChiMatrix(chi)


def x00_formula(bloch: Mapping[str, object]) -> float:
    """Closed form of the identity element of chi from the four required inputs."""
    px, py = _as_vec(bloch["+x"]), _as_vec(bloch["+y"])
    pz, mz = _as_vec(bloch["+z"]), _as_vec(bloch["-z"])
    return 0.25 * (
        1
        + (px[0] - 0.5 * (pz[0] + mz[0]))
        + (py[1] - 0.5 * (pz[1] + mz[1]))
        + 0.5 * (pz[2] - mz[2])
    )


def chi_of_kraus(kraus) -> np.ndarray:
    """Process matrix of a channel given by Kraus operators."""
    coeffs = []
    for k in kraus:
        # expand K = sum_m e_m E_m; E_m are orthogonal with norm^2 = 2
        coeffs.append([np.trace(e.conj().T @ k) / 2 for e in CHI_BASIS])
    coeffs = np.array(coeffs)
    return coeffs.T @ coeffs.conj()


def process_fidelity(chi) -> float:
    mat = chi.matrix if isinstance(chi, ChiMatrix) else np.asarray(chi)
    return float(np.real(mat[0, 0]))


def scaled_fidelity(f_process):
    return (f_process - 0.25) / 0.75


def depolarizing_chi(p: float) -> np.ndarray:
    return np.diag([1 - 0.75 * p, 0.25 * p, 0.25 * p, 0.25 * p]).astype(complex)


def z_rotation_chi(angle: float) -> np.ndarray:
    u = np.diag([1.0, np.exp(1j * angle)])
    return chi_of_kraus([u])


def amplitude_damping_channel(t: float, t0: float, n_th: float):
    """Kraus operators of generalized amplitude damping with f(t) = 1 - e^{-t/t0}."""
    if t < 0:
        raise ValueError("t must be non-negative")
    f = 1.0 - math.exp(-t / t0) if math.isfinite(t0) else 0.0
    a, b = math.sqrt(1 - n_th), math.sqrt(n_th)
    return [
        a * np.array([[1, 0], [0, math.sqrt(1 - f)]], dtype=complex),
        a * np.array([[0, math.sqrt(f)], [0, 0]], dtype=complex),
        b * np.array([[math.sqrt(1 - f), 0], [0, 1]], dtype=complex),
        b * np.array([[0, 0], [math.sqrt(f), 0]], dtype=complex),
    ]


def apply_kraus(kraus, rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def _rotate_bloch_sets(bloch: Mapping[str, object], rot: np.ndarray) -> dict:
    return {k: rot @ _as_vec(v) for k, v in bloch.items()}


def frame_optimize(bloch: Mapping[str, object], bound_deg: float = 15.0):
    """Single software rotation of the output frame that maximizes X00.

    Returns (scipy Rotation, ChiMatrix of the rotated data).  The search runs
    Nelder-Mead over z-y-z Euler angles, each limited to +/- ``bound_deg``.
    """
    bound = math.radians(bound_deg)

    def rotation(angles):
        return Rotation.from_euler("zyz", angles)

    def cost(angles):
        m, c = affine_map(_rotate_bloch_sets(bloch, rotation(angles).as_matrix()))
        return -chi_from_affine(m, c)[0, 0].real

    res = minimize(cost, np.zeros(3), method="Nelder-Mead",
                   bounds=[(-bound, bound)] * 3,
                   options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 4000})
    best = res.x if res.fun <= cost(np.zeros(3)) else np.zeros(3)
    rot = rotation(best)
    return rot, chi_from_cardinals(_rotate_bloch_sets(bloch, rot.as_matrix()))


def decay_model(model: str, nbar0: float | None = None):
    if model == "single-exponential":
        return lambda t, A, tau: 0.25 + A * np.exp(-t / tau)
    if model == "uncorrected-cat":
        if nbar0 is None:
            raise ValueError("uncorrected-cat model needs nbar0")
        return lambda t, A, tau: 0.25 + A * np.exp(-nbar0 * (1 - np.exp(-t / tau)))
    raise ValueError(f"unknown decay model {model!r}")


def fit_decay(times, fidelities, model: str = "single-exponential",
              nbar0: float | None = None, p0=None) -> DecayFit:
    """Unweighted least-squares fit of F(t) = 0.25 + A e^{...}; errors from the Jacobian."""
    t = np.asarray(times, dtype=float)
    f = np.asarray(fidelities, dtype=float)
    if t.size < 4:
        raise ValueError("need at least four points")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
        raise ValueError("times and fidelities must be finite")
    fn = decay_model(model, nbar0)
    if p0 is None:
        a0 = max(f[0] - 0.25, 1e-3)
        frac = np.clip((f - 0.25) / a0, 1e-3, None)
        slope = np.polyfit(t, np.log(frac), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else 10 * (t.max() - t.min() + 1)
        if model == "uncorrected-cat":
            tau0 *= nbar0
        p0 = (a0, tau0)
    try:
        with warnings.catch_warnings():
            # an unidentifiable fit is reported below as FitError
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(fn, t, f, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(str(exc)) from exc
    if popt[1] <= 0 or not np.all(np.isfinite(popt)):
        raise FitError("fit returned a non-positive time constant")
    if not np.all(np.isfinite(pcov)):
        raise FitError("parameters are not identifiable from the data")
    err = np.sqrt(np.clip(np.diag(pcov), 0, None))
    return DecayFit(float(popt[0]), float(popt[1]), float(err[0]), float(err[1]), model)


def anisotropy(bloch: Mapping[str, object]) -> float:
    """max_i | |r_i| - mean_j |r_j| | over the supplied Bloch vectors."""
    lengths = np.array([np.linalg.norm(_as_vec(v)) for v in bloch.values()])
    return float(np.max(np.abs(lengths - lengths.mean())))
