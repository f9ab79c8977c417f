"""Discrete-event model of the feedback controller and the full QEC cycle.

Random draws inside one cycle come from a single generator and are consumed
in a fixed order, so a cycle is replayable from (master seed, run index):

  1. initial ancilla reset
  2. per monitoring step: ancilla excitation during the wait, plant jumps,
     forward propagation during mapping, outcome, demolition, readout
     deflection, then (on e) ancilla decay during readout and the reset loop
  3. tomography outcome drawn by the caller after decoding
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .catcode import (
    CatCodeParams,
    CodewordState,
    LeakageError,
    LogicalQubit,
    apply_logical_jump,
    decode_ideal,
    depolarize,
    depolarizing_retention,
    encode_ideal,
    kerr_frame_estimate,
    z_rotation,
)
from .dynamics import evolve_trajectory, resonator_model
from .fock import ladder_ops, phase_rotation
from .params import (
    DEFAULT_BANDS,
    FIDELITY_REFERENCE_WAIT,
    PERFECT_BANDS,
    ParityFidelityBands,
    SystemParams,
)

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class AncillaModel:
    T1: float = 35.0
    T2: float = 12.0
    Gamma_up: float = 0.04 / 35.0
    n_th: float = 0.04
    M_gg: float = 0.993
    M_ee: float = 0.993
    parity_map_time: float = math.pi / (TWO_PI * 1.97)
    tau_meas: float = 0.4
    T_FB: float = 0.332
    p_d: float = 0.001
    theta_M: float = 70 * TWO_PI * 0.002 * 0.4
    theta_M_spread: float = math.sqrt(70) * TWO_PI * 0.002 * 0.4
    bands: ParityFidelityBands = DEFAULT_BANDS
    # step period (wait + mapping + readout + feedback) the band fidelities refer to
    reference_step: float = FIDELITY_REFERENCE_WAIT + math.pi / (TWO_PI * 1.97) + 0.732

    @classmethod
    def from_params(cls, params: SystemParams, bands: ParityFidelityBands = DEFAULT_BANDS,
                    reference_wait: float = FIDELITY_REFERENCE_WAIT) -> "AncillaModel":
        return cls(
            T1=params.T1,
            T2=params.T2,
            Gamma_up=params.Gamma_up,
            n_th=params.n_th_a,
            M_gg=params.M_gg,
            M_ee=params.M_ee,
            parity_map_time=params.parity_map_time,
            tau_meas=params.tau_meas,
            T_FB=params.T_FB,
            p_d=params.p_d,
            theta_M=params.n_readout * params.chi_sr * params.tau_meas,
            theta_M_spread=math.sqrt(params.n_readout) * params.chi_sr * params.tau_meas,
            bands=bands,
            reference_step=reference_wait + params.step_overhead,
        )

    @classmethod
    def perfect(cls) -> "AncillaModel":
        return cls(T1=math.inf, T2=math.inf, Gamma_up=0.0, n_th=0.0, M_gg=1.0, M_ee=1.0,
                   p_d=0.0, theta_M=0.0, theta_M_spread=0.0, bands=PERFECT_BANDS)

    @property
    def forward_propagation_prob(self) -> float:
        """Ancilla decay during the parity mapping, pi/(chi 2 T1)."""
        return self.parity_map_time / (2 * self.T1)

    @property
    def readout_decay_prob(self) -> float:
        return 1.0 - math.exp(-(self.tau_meas + self.T_FB) / self.T1)

    def excitation_prob(self, dt: float) -> float:
        return 1.0 - math.exp(-self.Gamma_up * dt)

    def assignment(self, nbar: float) -> tuple[float, float]:
        """Total (p(g | no flip), p(e | flip)) at the reference cadence.

        The band fidelity is split so that p(e|flip) = p(g|same) e^{-tau_meas/T1},
        i.e. the excited branch additionally suffers decay during readout.
        """
        f = self.bands(nbar)
        decay = math.exp(-self.tau_meas / self.T1)
        p_g = min(1.0, f * 2.0 / (1.0 + decay))
        return p_g, p_g * decay

    def intrinsic_assignment(self, nbar: float) -> tuple[float, float]:
        """Assignment fidelities with ancilla excitation at the reference cadence removed."""
        p_ref = self.excitation_prob(self.reference_step)
        scale = 1.0 - 2.0 * p_ref
        return tuple(min(1.0, (p - p_ref) / scale) for p in self.assignment(nbar))


@dataclass(frozen=True)
class ParityProtocol:
    maps_even_to_g: bool = True

    def flipped(self) -> "ParityProtocol":
        return ParityProtocol(not self.maps_even_to_g)


@dataclass
class MeasurementRecord:
    bits: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    protocol_signs: list = field(default_factory=list)
    time_in_e: float = 0.0

    @property
    def error_count(self) -> int:
        return int(sum(self.bits))

    @property
    def label(self) -> str:
        return "".join(str(b) for b in self.bits)

    def jump_steps(self) -> list[int]:
        return [i + 1 for i, b in enumerate(self.bits) if b]

    def confirmed(self) -> bool:
        """Every 1 is followed by a 0."""
        return is_confirmed(self.bits)


def is_confirmed(bits: Sequence[int]) -> bool:
    bits = list(bits)
    return all(bits[i + 1] == 0 for i, b in enumerate(bits) if b == 1 and i + 1 < len(bits)) and (
        not bits or bits[-1] == 0
    )


class Plant(ABC):
    """Resonator model driven by the controller."""

    elapsed: float

    @property
    @abstractmethod
    def parity(self) -> int: ...

    @property
    @abstractmethod
    def nbar(self) -> float: ...

    @abstractmethod
    def advance(self, dt: float, rng: np.random.Generator) -> None: ...

    @abstractmethod
    def rotate(self, theta: float) -> None:
        """Phase-space rotation by -theta, tracked in the frame angle."""

    @abstractmethod
    def scramble(self, rng: np.random.Generator) -> None:
        """Rotation by an unknown, uniformly random angle."""

    @abstractmethod
    def force_jump(self) -> None: ...

    @abstractmethod
    def decode(self, parity_guess: int, frame_estimate: float) -> np.ndarray:
        """Decoded logical density matrix before software correction."""


def _wrap(theta: float) -> float:
    return (theta + math.pi) % TWO_PI - math.pi


class PhenomenologicalPlant(Plant):
    """Codeword bookkeeping with Poisson jump sampling.

    Decoding is resolved analytically: a scrambled codeword or a parity
    mismatch yields the maximally mixed state.  Otherwise the residual frame
    error is split into a whole number of quarter turns, which permute the
    cat basis coherently, and a remainder that keeps the logical state with
    probability exp(-d^2 / 2 sigma^2).  ``codec_retention(parity, t)`` adds
    the decode error caused by changing basis overlap.
    """

    def __init__(self, q: LogicalQubit, code: CatCodeParams, n_th: float = 0.0,
                 decode_sigma: float = math.radians(24.0),
                 codec_retention: Callable[[int, float], float] | None = None):
        self.rho_in = q.density() if isinstance(q, LogicalQubit) else np.asarray(q)
        self.code = code
        self.n_th = n_th
        self.sigma = decode_sigma
        self.codec_retention = codec_retention
        self.state = CodewordState(alpha0=code.alpha0)
        self.dephased = False

    @property
    def elapsed(self) -> float:
        return self.state.elapsed

    @property
    def parity(self) -> int:
        return self.state.parity

    @property
    def nbar(self) -> float:
        return self.code.nbar0 * math.exp(-self.code.kappa_s * self.state.elapsed)

    def advance(self, dt: float, rng: np.random.Generator) -> None:
        kappa = self.code.kappa_s
        t0 = self.state.elapsed
        nbar = self.nbar
        frac = 1.0 - math.exp(-kappa * dt)
        n_loss = rng.poisson((1 + self.n_th) * nbar * frac)
        loss_times = t0 - np.log1p(-rng.random(n_loss) * frac) / kappa
        n_gain = rng.poisson(self.n_th * (kappa * dt + nbar * frac)) if self.n_th > 0 else 0
        gain_times = t0 + dt * rng.random(n_gain)
        events = sorted([(t, 0) for t in loss_times] + [(t, 1) for t in gain_times])
        s = self.state
        for t, kind in events:
            if kind == 0:
                s = apply_logical_jump(s, float(t), self.code.K_s)
            else:
                # photon gain is not a code operation: parity flips, information lost
                s = replace(s, parity=-s.parity, error_count=s.error_count + 1)
                self.dephased = True
        self.state = replace(s, elapsed=t0 + dt)

    @property
    def true_jumps(self) -> int:
        return len(self.state.jump_times)

    def rotate(self, theta: float) -> None:
        self.state = self.state.rotated(theta)

    def scramble(self, rng: np.random.Generator) -> None:
        self.dephased = True

    def force_jump(self) -> None:
        self.state = apply_logical_jump(self.state, self.state.elapsed, self.code.K_s)

    def decode(self, parity_guess: int, frame_estimate: float) -> np.ndarray:
        mixed = 0.5 * np.eye(2, dtype=complex)
        if self.dephased or parity_guess != self.state.parity:
            return mixed
        err = _wrap(self.state.frame_angle - frame_estimate)
        turns = int(round(err / (math.pi / 2)))
        rest = err - turns * math.pi / 2
        u = z_rotation(self.state.error_count)
        # a quarter turn of phase space swaps C(alpha) and C(i alpha)
        swap = np.array([[0, 1], [1, 0]]) if parity_guess == 1 else np.array([[0, -1], [1, 0]])
        for _ in range(turns % 4):
            u = swap @ u
        keep = math.exp(-0.5 * (rest / self.sigma) ** 2) if self.sigma > 0 else float(rest == 0)
        if self.codec_retention is not None:
            keep *= self.codec_retention(parity_guess, self.state.elapsed)
        return depolarize(u @ self.rho_in @ u.conj().T, keep)


class FullHilbertPlant(Plant):
    """State-vector plant evolved by quantum-jump trajectories."""

    def __init__(self, q: LogicalQubit, code: CatCodeParams, params: SystemParams,
                 thermal: bool = True, kerr: bool = True, leakage_bound: float = 0.5):
        self.code = code
        self.psi = encode_ideal(q, code)
        self.model = resonator_model(params, code.dim, kerr=kerr, thermal=thermal)
        self.elapsed = 0.0
        self.leakage_bound = leakage_bound
        _, _, self._n, self._p = ladder_ops(code.dim)
        self._a = ladder_ops(code.dim)[0]
        self.jump_times: list[float] = []

    @property
    def parity(self) -> int:
        return 1 if np.real(np.vdot(self.psi, self._p @ self.psi)) >= 0 else -1

    @property
    def nbar(self) -> float:
        return float(np.real(np.vdot(self.psi, self._n @ self.psi)))

    def advance(self, dt: float, rng: np.random.Generator) -> None:
        seed = int(rng.integers(2**63))
        res = evolve_trajectory(self.psi, self.model, dt, seed)
        # channel 0 is photon loss; gains are not counted as code errors
        self.jump_times.extend(self.elapsed + t for t, ch in res.jump_events if ch == 0)
        self.psi = res.final_state
        self.elapsed += dt

    @property
    def true_jumps(self) -> int:
        return len(self.jump_times)

    def rotate(self, theta: float) -> None:
        self.psi = phase_rotation(-theta, self.code.dim) @ self.psi

    def scramble(self, rng: np.random.Generator) -> None:
        self.psi = phase_rotation(TWO_PI * rng.random(), self.code.dim) @ self.psi

    def force_jump(self) -> None:
        out = self._a @ self.psi
        self.psi = out / np.linalg.norm(out)
        self.jump_times.append(self.elapsed)

    def decode(self, parity_guess: int, frame_estimate: float) -> np.ndarray:
        s = CodewordState(self.code.alpha0, elapsed=self.elapsed, parity=parity_guess,
                          error_count=0 if parity_guess == 1 else 1, frame_angle=frame_estimate)
        try:
            q, leak = decode_ideal(self.psi, s, self.code, leakage_bound=self.leakage_bound)
        except LeakageError:
            return 0.5 * np.eye(2, dtype=complex)
        return (1 - leak) * q.density() + leak * 0.5 * np.eye(2)


@dataclass(frozen=True)
class ResetResult:
    excited: bool
    pulses: int


def ancilla_reset(ancilla: AncillaModel, rng: np.random.Generator,
                  excited: bool | None = None, max_rounds: int = 20) -> ResetResult:
    """Measure and apply a pi pulse until the ancilla reads g."""
    if excited is None:
        excited = bool(rng.random() < ancilla.n_th)
    pulses = 0
    for _ in range(max_rounds):
        reads_e = rng.random() < (ancilla.M_ee if excited else 1.0 - ancilla.M_gg)
        if not reads_e:
            break
        excited = not excited
        pulses += 1
    return ResetResult(excited, pulses)


def parity_measure(plant: Plant, ancilla: AncillaModel, protocol: ParityProtocol,
                   rng: np.random.Generator, excited: bool = False) -> str:
    """One Ramsey parity mapping and readout; returns "g" or "e".

    ``excited`` marks an ancilla that was already in e when the mapping began,
    which inverts the result.
    """
    if rng.random() < ancilla.forward_propagation_prob:
        plant.scramble(rng)
    expect_g = (plant.parity == 1) == protocol.maps_even_to_g
    p_g_same, p_e_flip = ancilla.intrinsic_assignment(plant.nbar)
    u = rng.random()
    reads_g = (u < p_g_same) if expect_g else (u >= p_e_flip)
    if excited:
        reads_g = not reads_g
    if rng.random() < ancilla.p_d:
        plant.force_jump()
    plant.rotate(ancilla.theta_M + ancilla.theta_M_spread * rng.standard_normal())
    return "g" if reads_g else "e"


@dataclass(frozen=True)
class MonitorConfig:
    t_k: tuple = ()
    adaptive: bool = True

    @property
    def S(self) -> int:
        return len(self.t_k)

    @property
    def T(self) -> float:
        return float(sum(self.t_k))

    @classmethod
    def equal(cls, T: float, S: int, adaptive: bool = True) -> "MonitorConfig":
        return cls(tuple([T / S] * S), adaptive)


def adaptive_monitor(plant: Plant, ancilla: AncillaModel, config: MonitorConfig,
                     rng: np.random.Generator, excited: bool = False) -> MeasurementRecord:
    """Run the monitoring sequence; the protocol flips on every e outcome."""
    record = MeasurementRecord()
    protocol = ParityProtocol(True)
    now = 0.0
    last = "g"
    for k, tk in enumerate(config.t_k):
        if not excited and rng.random() < ancilla.excitation_prob(tk):
            excited = True
            plant.scramble(rng)
        plant.advance(tk, rng)
        now += tk
        sign = protocol.maps_even_to_g
        outcome = parity_measure(plant, ancilla, protocol, rng, excited=excited)
        excited = False
        if config.adaptive:
            bit = 1 if outcome == "e" else 0
            if outcome == "e":
                record.time_in_e += ancilla.tau_meas + ancilla.T_FB
                if rng.random() < ancilla.readout_decay_prob:
                    plant.scramble(rng)
                protocol = protocol.flipped()
                excited = ancilla_reset(ancilla, rng, excited=True).excited
        else:
            # fixed mapping and no reset: an e result leaves the ancilla excited
            bit = int(outcome != last)
            last = outcome
            if outcome == "e":
                dwell = ancilla.tau_meas + ancilla.T_FB
                if k + 1 < len(config.t_k):
                    dwell += config.t_k[k + 1]
                record.time_in_e += dwell
                if rng.random() < 1.0 - math.exp(-dwell / ancilla.T1):
                    plant.scramble(rng)
        record.bits.append(bit)
        record.step_times.append(now)
        record.protocol_signs.append(sign)
    return record


@dataclass(frozen=True)
class QecConfig:
    code: CatCodeParams = CatCodeParams()
    monitor: MonitorConfig = MonitorConfig()
    ancilla: AncillaModel = AncillaModel()
    correct: bool = True
    storage_time: float | None = None  # used when correct is False
    pulse_infidelity: float = 0.04
    decode_sigma_deg: float = 24.0
    n_th_s: float = 0.02
    unitary_codec: bool = True
    force_decode_parity: int | None = None

    @property
    def total_time(self) -> float:
        if not self.correct and self.storage_time is not None:
            return self.storage_time
        return self.monitor.T


@dataclass
class CycleResult:
    rho: np.ndarray
    record: MeasurementRecord
    frame_estimate: float = 0.0
    true_jumps: int | None = None  # photon losses that actually occurred, for audit


_codec_cache: dict = {}


def codec_retention_table(nbar0: float, kappa: float, dim: int):
    """Cached lookup parity, t -> retention of the unitary codec (t rounded to 1 ns)."""
    from .catcode import unitary_codec_retention

    def lookup(parity: int, t: float) -> float:
        key = (nbar0, kappa, dim, parity, round(t, 3))
        if key not in _codec_cache:
            jumps = 0 if parity == 1 else 1
            _codec_cache[key] = unitary_codec_retention(nbar0, kappa, t, jumps, dim)
        return _codec_cache[key]

    return lookup


def make_plant(kind: str, q: LogicalQubit, config: QecConfig,
               params: SystemParams | None = None) -> Plant:
    if kind == "phenomenological":
        codec = (codec_retention_table(config.code.nbar0, config.code.kappa_s, config.code.dim)
                 if config.unitary_codec else None)
        return PhenomenologicalPlant(q, config.code, n_th=config.n_th_s,
                                     decode_sigma=math.radians(config.decode_sigma_deg),
                                     codec_retention=codec)
    if kind == "full":
        params = params or SystemParams()
        params = replace(params, n_th_s=config.n_th_s, K_s=config.code.K_s,
                         tau_s=1.0 / config.code.kappa_s)
        return FullHilbertPlant(q, config.code, params, thermal=config.n_th_s > 0,
                                kerr=config.code.K_s != 0)
    raise ValueError(f"unknown plant kind {kind!r}")


def run_qec_cycle(q: LogicalQubit, config: QecConfig, plant_kind: str = "phenomenological",
                  params: SystemParams | None = None,
                  rng: np.random.Generator | None = None) -> CycleResult:
    """Reset, encode, monitor, decode by final parity and undo the counted rotations."""
    rng = rng if rng is not None else np.random.default_rng()
    ancilla = config.ancilla
    excited = ancilla_reset(ancilla, rng).excited
    plant = make_plant(plant_kind, q, config, params)
    if config.correct:
        record = adaptive_monitor(plant, ancilla, config.monitor, rng, excited=excited)
        durations = list(config.monitor.t_k)
        frame = kerr_frame_estimate(record.jump_steps(), 0.0, config.code.K_s, durations)
        frame += ancilla.theta_M * len(record.bits)
        k_rec = record.error_count
    else:
        T = config.total_time
        if excited or rng.random() < ancilla.excitation_prob(T):
            plant.scramble(rng)
        plant.advance(T, rng)
        record = MeasurementRecord()
        frame = 0.0
        k_rec = 0
    parity_guess = 1 if k_rec % 2 == 0 else -1
    if config.force_decode_parity is not None:
        parity_guess = config.force_decode_parity
    rho = plant.decode(parity_guess, frame)
    fix = z_rotation(-k_rec)
    rho = fix @ rho @ fix.conj().T
    keep = depolarizing_retention(config.pulse_infidelity) ** 2
    return CycleResult(depolarize(rho, keep), record, frame, plant.true_jumps)
