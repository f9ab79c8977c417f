"""Lindblad master-equation integration and jump-trajectory unraveling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import poisson

from .errors import DimensionError, IntegratorError, TruncationError
from .fock import as_density, ladder_ops, tail_mass
from .params import SystemParams


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian (rad/us, rotating frame) plus collapse channels (operator, rate)."""

    hamiltonian: np.ndarray
    channels: tuple = ()

    def __post_init__(self):
        dim = self.hamiltonian.shape[0]
        chans = tuple((np.asarray(op, dtype=complex), float(rate)) for op, rate in self.channels)
        for op, rate in chans:
            if rate < 0:
                raise ValueError("collapse rates must be non-negative")
            if op.shape != (dim, dim):
                raise DimensionError("collapse operator dimension mismatch")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "hamiltonian", np.asarray(self.hamiltonian, dtype=complex))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def collapse_ops(self) -> list[np.ndarray]:
        return [np.sqrt(rate) * op for op, rate in self.channels]

    def effective_hamiltonian(self) -> np.ndarray:
        h = self.hamiltonian.copy()
        for c in self.collapse_ops():
            h -= 0.5j * c.conj().T @ c
        return h


def kerr_hamiltonian(K: float, dim: int) -> np.ndarray:
    """(K/2) a^dag^2 a^2, the generator whose propagator is ``kerr_unitary``."""
    n = np.arange(dim)
    return np.diag(0.5 * K * n * (n - 1)).astype(complex)


def kerr_unitary(K: float, t: float, dim: int) -> np.ndarray:
    """Diagonal exp(-i (K/2) t n(n-1))."""
    n = np.arange(dim)
    return np.diag(np.exp(-0.5j * K * t * n * (n - 1)))


def resonator_model(params: SystemParams, dim: int, *, kerr: bool = True,
                    thermal: bool = True, dephasing_rate: float = 0.0) -> LindbladModel:
    """Storage resonator with loss, optional thermal gain, Kerr and pure dephasing.

    ``dephasing_rate`` is the Lindblad rate of a collapse operator n, which
    damps coherences |m><n| at rate dephasing_rate*(m-n)^2/2.
    """
    a, ad, n, _ = ladder_ops(dim)
    kappa = params.kappa_s
    nth = params.n_th_s if thermal else 0.0
    chans = [(a, kappa * (1 + nth))]
    if nth > 0:
        chans.append((ad, kappa * nth))
    if dephasing_rate > 0:
        chans.append((n, dephasing_rate))
    h = kerr_hamiltonian(params.K_s, dim) if kerr else np.zeros((dim, dim), dtype=complex)
    return LindbladModel(h, tuple(chans))


def pure_loss_model(kappa: float, dim: int, K: float = 0.0) -> LindbladModel:
    a, _, _, _ = ladder_ops(dim)
    return LindbladModel(kerr_hamiltonian(K, dim), ((a, kappa),))


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for c in model.collapse_ops():
        cd = c.conj().T
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def liouvillian(model: LindbladModel) -> np.ndarray:
    """Superoperator acting on row-major vec(rho)."""
    d = model.dim
    eye = np.eye(d)
    h = model.hamiltonian
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in model.collapse_ops():
        cdc = c.conj().T @ c
        sup += np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return sup


def max_step(model: LindbladModel) -> float:
    """Fixed RK4 step: 1% of the fastest decay time and of the fastest phase period."""
    rate = 0.0
    for c in model.collapse_ops():
        rate += float(np.max(np.abs(np.linalg.eigvalsh(c.conj().T @ c))))
    h_scale = 2.0 * float(np.max(np.abs(np.linalg.eigvalsh(model.hamiltonian))))
    limits = [1.0]
    if rate > 0:
        limits.append(0.01 / rate)
    if h_scale > 0:
        limits.append(0.01 * 2 * np.pi / h_scale)
    return min(limits)


def evolve_master(rho: np.ndarray, model: LindbladModel, t: float,
                  step: float | None = None, trace_tol: float = 1e-8) -> np.ndarray:
    """Integrate d rho/dt = L(rho) for time t with fixed-step RK4."""
    if t < 0:
        raise ValueError("t must be non-negative")
    rho = np.array(as_density(np.asarray(rho, dtype=complex)), dtype=complex)
    if rho.shape[0] != model.dim:
        raise DimensionError("state and model dimensions differ")
    if t == 0:
        return rho
    dt_max = step if step is not None else max_step(model)
    n_steps = max(1, int(np.ceil(t / dt_max)))
    dt = t / n_steps
    tr0 = np.trace(rho).real
    f = lambda r: lindblad_rhs(model, r)  # noqa: E731
    for _ in range(n_steps):
        k1 = f(rho)
        k2 = f(rho + 0.5 * dt * k1)
        k3 = f(rho + 0.5 * dt * k2)
        k4 = f(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    drift = abs(np.trace(rho).real - tr0)
    if drift > trace_tol:
        raise IntegratorError(f"trace drifted by {drift:.2e}")
    return 0.5 * (rho + rho.conj().T)


@dataclass
class TrajectoryResult:
    final_state: np.ndarray
    jump_events: list = field(default_factory=list)  # (time, channel index)
    rng_seed: object = None

    def to_record(self) -> dict:
        return {
            "seed": self.rng_seed,
            "jump_times": [float(t) for t, _ in self.jump_events],
            "channels": [int(c) for _, c in self.jump_events],
        }


class _NoJumpPropagator:
    """exp(-i H_eff t) via one eigendecomposition of the effective Hamiltonian."""

    def __init__(self, model: LindbladModel):
        h_eff = model.effective_hamiltonian()
        if np.allclose(h_eff, np.diag(np.diag(h_eff))):
            self.evals = np.diag(h_eff).copy()
            self.vecs = None
        else:
            self.evals, self.vecs = np.linalg.eig(h_eff)
            self.inv = np.linalg.inv(self.vecs)

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return psi if self.vecs is None else self.inv @ psi

    def state(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        c = coeffs * np.exp(-1j * self.evals * t)
        return c if self.vecs is None else self.vecs @ c

    def norm_sq(self, coeffs: np.ndarray, t: float) -> float:
        return float(np.sum(np.abs(self.state(coeffs, t)) ** 2))


def evolve_trajectory(psi: np.ndarray, model: LindbladModel, t: float, seed,
                      leakage_threshold: float = 1e-6) -> TrajectoryResult:
    """One quantum-jump trajectory using the norm-threshold method.

    ``seed`` is anything ``numpy.random.default_rng`` accepts; ensembles use
    ``(master_seed, index)`` so each trajectory owns an independent stream.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    rng = np.random.default_rng(seed)
    prop = _NoJumpPropagator(model)
    collapse = model.collapse_ops()
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    now = 0.0
    events: list = []
    threshold = rng.random()
    coeffs = prop.coefficients(psi)
    while True:
        remaining = t - now
        if prop.norm_sq(coeffs, remaining) > threshold or not collapse:
            psi = prop.state(coeffs, remaining)
            psi = psi / np.linalg.norm(psi)
            break
        dt = brentq(lambda s: prop.norm_sq(coeffs, s) - threshold, 0.0, remaining,
                    xtol=1e-12, rtol=1e-14)
        now += dt
        psi = prop.state(coeffs, dt)
        weights = np.array([np.sum(np.abs(c @ psi) ** 2) for c in collapse])
        ch = int(rng.choice(len(collapse), p=weights / weights.sum()))
        psi = collapse[ch] @ psi
        psi = psi / np.linalg.norm(psi)
        events.append((now, ch))
        if tail_mass(psi) > leakage_threshold:
            raise TruncationError("trajectory reached the top of the Fock space")
        coeffs = prop.coefficients(psi)
        threshold = rng.random()
    if tail_mass(psi) > leakage_threshold:
        raise TruncationError("trajectory reached the top of the Fock space")
    seed_tag = list(seed) if isinstance(seed, (tuple, list)) else seed
    return TrajectoryResult(psi, events, seed_tag)


def run_ensemble(psi: np.ndarray, model: LindbladModel, t: float, master_seed: int,
                 n_traj: int) -> list[TrajectoryResult]:
    return [evolve_trajectory(psi, model, t, (master_seed, i)) for i in range(n_traj)]


def ensemble_density(results: Sequence[TrajectoryResult]) -> np.ndarray:
    rho = sum(np.outer(r.final_state, r.final_state.conj()) for r in results)
    return rho / len(results)


def write_trajectory_records(results: Iterable[TrajectoryResult], path) -> None:
    with open(path, "w") as fh:
        for r in results:
            fh.write(json.dumps(r.to_record()) + "\n")


def read_trajectory_records(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def mean_photon_number(nbar0: float, kappa: float, t, n_th: float = 0.0):
    """n(t) = n0 e^{-kappa t} + n_th (1 - e^{-kappa t})."""
    decay = np.exp(-kappa * np.asarray(t, dtype=float))
    return nbar0 * decay + n_th * (1 - decay)


def expected_jumps(nbar0: float, kappa: float, t: float) -> float:
    return nbar0 * (1 - np.exp(-kappa * t))


def jump_count_pmf(nbar0: float, kappa: float, t: float, kmax: int | None = None) -> np.ndarray:
    """Poisson probabilities of k = 0..kmax photon jumps during [0, t]."""
    if nbar0 < 0:
        raise ValueError("nbar0 must be non-negative")
    lam = expected_jumps(nbar0, kappa, t)
    if kmax is None:
        kmax = int(lam + 10 * np.sqrt(lam) + 10)
    return poisson.pmf(np.arange(kmax + 1), lam)


def double_jump_probability(nbar: float, kappa: float, t_M: float) -> float:
    """Leading-order chance of two jumps within one step, (n kappa t)^2/2 e^{-n kappa t}."""
    x = nbar * kappa * t_M
    return 0.5 * x * x * np.exp(-x)
