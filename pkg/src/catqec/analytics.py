"""Closed-form cadence model, loss budget and measurement-record confidence."""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import bisect

from .catcode import unitary_codec_retention
from .dynamics import double_jump_probability
from .errors import NoRootError
from .params import TAU_FOCK_REFERENCE, SystemParams

DECODE_SIGMA = math.radians(24.0)
R_BRACKET = (1e-3, 1e9)
FAST_CADENCE_LIMIT = 1.5  # us; budget strategy switches above this t_M

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(64)


@dataclass(frozen=True)
class StepFidelities:
    f0: float
    f1: float

    def __post_init__(self):
        if not 0.0 <= self.f1 <= self.f0 <= 1.0:
            raise ValueError("need 0 <= f1 <= f0 <= 1")


@dataclass(frozen=True)
class CadenceSolution:
    T: float
    nbar0: float
    S: int
    t_k: tuple
    lambda_per_step: tuple
    F_up: float
    F_ED: float
    F_T: float
    F_KD: float

    @property
    def predicted_F(self) -> float:
        return self.F_up * self.F_ED * self.F_T * self.F_KD

    @property
    def t_w(self) -> float:
        """Mean step period."""
        return self.T / self.S if self.S else 0.0

    def to_row(self) -> dict:
        return {"T": self.T, "nbar0": self.nbar0, "S": self.S, "t_w": self.t_w,
                "F_up": self.F_up, "F_ED": self.F_ED, "F_T": self.F_T, "F_KD": self.F_KD,
                "predicted_F": self.predicted_F}


def step_fidelities(params: SystemParams, dephasing: str = "T2") -> StepFidelities:
    """Per-step success given zero (f0) or one (f1) photon jump."""
    if dephasing == "T2":
        t_deph = params.T2
    elif dephasing == "Tphi":
        t_deph = params.T_phi
    else:
        raise ValueError(f"dephasing must be 'T2' or 'Tphi', not {dephasing!r}")
    coherence = math.exp(-params.parity_map_time / t_deph) if math.isfinite(t_deph) else 1.0
    excited = math.exp(-(params.tau_meas + params.T_FB) / params.T1)
    f0 = coherence * params.M_gg
    f1 = min(f0, coherence * params.M_ee * excited)
    return StepFidelities(f0, f1)


def _ratio_equation(r: float, f0: float) -> float:
    return math.log(f0) + math.log1p(1.0 / r) - 1.0 / (1.0 + r)


def solve_r(f0: float) -> float:
    """Positive root of log f0 + log(1 + 1/r) - 1/(1 + r) = 0."""
    lo, hi = R_BRACKET
    if not 0.0 < f0 < 1.0:
        raise NoRootError(f"no finite root for f0={f0}")
    g_lo, g_hi = _ratio_equation(lo, f0), _ratio_equation(hi, f0)
    if g_lo * g_hi > 0:
        raise NoRootError(f"no root in r in [{lo:g}, {hi:g}] for f0={f0}")
    return bisect(_ratio_equation, lo, hi, args=(f0,), xtol=1e-12, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def expected_total_jumps(nbar0: float, kappa: float, T: float) -> float:
    return nbar0 * (1.0 - math.exp(-kappa * T))


def continuous_optimum(f: StepFidelities, nbar0: float, kappa: float, T: float) -> float:
    """Unrounded optimal step count r (f1/f0) n_j."""
    return solve_r(f.f0) * f.f1 / f.f0 * expected_total_jumps(nbar0, kappa, T)


def equal_lambda_schedule(T: float, nbar0: float, kappa: float, S: int) -> tuple:
    """Step periods with the same expected number of jumps in every step."""
    if S < 1:
        raise ValueError("S must be at least 1")
    lam = expected_total_jumps(nbar0, kappa, T) / S
    levels = nbar0 - lam * np.arange(S + 1)
    return tuple(np.log(levels[:-1] / levels[1:]) / kappa)


def step_lambdas(nbar0: float, kappa: float, t_k: Sequence[float]) -> np.ndarray:
    """Expected jumps per step with the mean photon number decayed to each step start."""
    t = np.asarray(t_k, dtype=float)
    starts = np.concatenate([[0.0], np.cumsum(t)[:-1]])
    return nbar0 * np.exp(-kappa * starts) * (1.0 - np.exp(-kappa * t))


def tracking_fidelity(f: StepFidelities, lambdas: Iterable[float]) -> float:
    lam = np.asarray(list(lambdas), dtype=float)
    return float(np.prod((f.f0 + f.f1 * lam) * np.exp(-lam)))


def gaussian_angle_retention(spread, sigma: float = DECODE_SIGMA):
    """E[exp(-theta^2 / 2 sigma^2)] for theta ~ N(0, spread^2), by Gauss-Hermite."""
    spread = np.asarray(spread, dtype=float)
    theta = math.sqrt(2.0) * spread[..., None] * _GH_NODES
    vals = np.exp(-0.5 * (theta / sigma) ** 2) @ _GH_WEIGHTS / math.sqrt(math.pi)
    return float(vals) if vals.ndim == 0 else vals


def kerr_decode_fidelity(K_s: float, t_k: Sequence[float], lambdas: Sequence[float],
                         sigma: float = DECODE_SIGMA) -> float:
    """Loss from not knowing when in each step a jump happened.

    A jump in step k is assigned to the step midpoint, leaving a uniform
    angle error of width K t_k (std K t_k / sqrt 12).
    """
    t = np.asarray(t_k, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if t.size == 0:
        return 1.0
    q = lam / (1.0 + lam)
    keep = gaussian_angle_retention(abs(K_s) * t / math.sqrt(12.0), sigma)
    return float(np.prod(1.0 - q * (1.0 - keep)))


@functools.lru_cache(maxsize=4096)
def _codec(nbar0: float, kappa: float, t: float, jumps: int, dim: int) -> float:
    return unitary_codec_retention(nbar0, kappa, t, jumps, dim)


def encode_decode_fidelity(T: float, nbar0: float, kappa: float, dim: int = 20) -> float:
    """Parity-weighted codec retention after storage time T."""
    if T <= 0:
        return 1.0
    key_t = round(T, 6)
    lam = expected_total_jumps(nbar0, kappa, T)
    p_even = 0.5 * (1.0 + math.exp(-2.0 * lam))
    return (p_even * _codec(nbar0, kappa, key_t, 0, dim)
            + (1.0 - p_even) * _codec(nbar0, kappa, key_t, 1, dim))


def total_fidelity(T: float, nbar0: float, S: int, t_k: Sequence[float],
                   params: SystemParams, dephasing: str = "T2", include_codec: bool = True,
                   dim: int = 20) -> CadenceSolution:
    t_k = tuple(float(t) for t in t_k)
    if len(t_k) != S:
        raise ValueError("len(t_k) must equal S")
    if abs(sum(t_k) - T) > 1e-9 * max(1.0, T):
        raise ValueError("step periods must sum to T")
    kappa = params.kappa_s
    f_ed = encode_decode_fidelity(T, nbar0, kappa, dim) if include_codec else 1.0
    if S == 0:
        return CadenceSolution(T, nbar0, 0, (), (), 1.0, f_ed, 1.0, 1.0)
    lam = step_lambdas(nbar0, kappa, t_k)
    f = step_fidelities(params, dephasing)
    return CadenceSolution(
        T, nbar0, S, t_k, tuple(float(x) for x in lam),
        F_up=math.exp(-T * params.Gamma_up),
        F_ED=f_ed,
        F_T=tracking_fidelity(f, lam),
        F_KD=kerr_decode_fidelity(params.K_s, t_k, lam),
    )


def _tracking_at(S: int, T: float, nbar0: float, kappa: float, f: StepFidelities) -> float:
    return tracking_fidelity(f, step_lambdas(nbar0, kappa, equal_lambda_schedule(T, nbar0, kappa, S)))


def brute_force_steps(T: float, nbar0: float, params: SystemParams, s_max: int = 50,
                      dephasing: str = "T2", kerr_aware: bool = False) -> int:
    """S in [1, s_max] maximizing F_T (times F_KD when kerr_aware)."""
    f = step_fidelities(params, dephasing)
    kappa = params.kappa_s
    best_s, best_v = 1, -1.0
    for s in range(1, s_max + 1):
        t_k = equal_lambda_schedule(T, nbar0, kappa, s)
        lam = step_lambdas(nbar0, kappa, t_k)
        v = tracking_fidelity(f, lam)
        if kerr_aware:
            v *= kerr_decode_fidelity(params.K_s, t_k, lam)
        if v > best_v:
            best_s, best_v = s, v
    return best_s


def optimize_cadence(T: float, nbar0: float, params: SystemParams, dephasing: str = "T2",
                     kerr_aware: bool = False, s_max: int = 50,
                     include_codec: bool = True) -> CadenceSolution:
    """Optimal equal-lambda monitoring schedule for storage time T.

    The step count comes from the closed-form optimum; with ``kerr_aware`` it
    is instead the brute-force maximizer of F_T * F_KD over [1, s_max].
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    if T == 0:
        return total_fidelity(0.0, nbar0, 0, (), params, dephasing, include_codec)
    kappa = params.kappa_s
    f = step_fidelities(params, dephasing)
    if kerr_aware:
        S = brute_force_steps(T, nbar0, params, s_max, dephasing, kerr_aware=True)
    elif f.f0 >= 1.0:
        S = s_max
    else:
        s_cont = continuous_optimum(f, nbar0, kappa, T)
        lo = max(1, math.floor(s_cont))
        hi = max(1, math.ceil(s_cont))
        S = lo if s_cont - math.floor(s_cont) <= 0.5 else hi
        other = hi if S == lo else lo
        if other != S and _tracking_at(other, T, nbar0, kappa, f) > _tracking_at(S, T, nbar0, kappa, f):
            S = other
    t_k = equal_lambda_schedule(T, nbar0, kappa, S)
    return total_fidelity(T, nbar0, S, t_k, params, dephasing, include_codec)


def gain(params: SystemParams | StepFidelities, dephasing: str = "T2") -> float:
    """Slow-down G of the logical decay relative to nbar0 kappa at the optimal cadence."""
    f = params if isinstance(params, StepFidelities) else step_fidelities(params, dephasing)
    ratio = f.f1 / f.f0 if f.f0 > 0 else 0.0
    if f.f0 >= 1.0:
        return math.inf if ratio >= 1.0 else 1.0 / (1.0 - ratio)
    r = solve_r(f.f0)
    return 1.0 / (1.0 - ratio * r / (1.0 + r))


def break_even_ratio(G: float, nbar0: float) -> float:
    return 2.0 * G / (3.0 * nbar0)


# ---------------------------------------------------------------- loss budget

@dataclass(frozen=True)
class LossBudget:
    t_M: float
    nbar: float
    strategy: str
    probabilities: dict
    gains: dict
    tau_f01: float = TAU_FOCK_REFERENCE

    def __post_init__(self):
        if any(not g > 0 for g in self.gains.values()):
            raise ValueError("gains must be positive")

    def to_rows(self) -> list[dict]:
        return [{"t_M": self.t_M, "strategy": self.strategy, "channel": k,
                 "probability": self.probabilities[k], "gain": g}
                for k, g in self.gains.items()]


def _uniform_window_loss(half_width: float, sigma: float = DECODE_SIGMA) -> float:
    """1 - mean of exp(-theta^2/2 sigma^2) for theta uniform on [-w, w]."""
    if half_width <= 0:
        return 0.0
    from scipy.special import erf

    x = half_width / (math.sqrt(2.0) * sigma)
    return 1.0 - math.sqrt(math.pi) / 2.0 * erf(x) / x


def loss_budget(params: SystemParams, t_M: float, nbar: float = 2.0,
                strategy: str | None = None, tau_f01: float = TAU_FOCK_REFERENCE) -> LossBudget:
    """Lifetime gain over the Fock encoding if each channel were the only loss.

    ``strategy`` is "fast" (filter many quick measurements) or "optimal"
    (trust every result); by default it follows from t_M.
    """
    if t_M <= 0:
        raise ValueError("t_M must be positive")
    if strategy is None:
        strategy = "fast" if t_M <= FAST_CADENCE_LIMIT else "optimal"
    if strategy not in ("fast", "optimal"):
        raise ValueError(f"unknown strategy {strategy!r}")
    kappa = params.kappa_s
    rate = nbar * kappa
    p_jump = 1.0 - math.exp(-rate * t_M)
    p = {}
    g = {}

    p["double_jump"] = float(double_jump_probability(nbar, kappa, t_M))
    g["double_jump"] = t_M / (p["double_jump"] * tau_f01)

    p["resonator_excitation"] = t_M * params.n_th_s * nbar / params.tau_s
    g["resonator_excitation"] = t_M / (p["resonator_excitation"] * tau_f01)

    if strategy == "fast":
        # a filter needs about two cadences to register a jump
        p["readout"] = 2.0 * rate
        g["readout"] = (1.0 / rate) / (p["readout"] * tau_f01)
        # majority voting leaves second-order preparation errors
        p["preparation"] = (params.Gamma_up * t_M) ** 2
        g["preparation"] = t_M / (p["preparation"] * tau_f01)
    else:
        p["readout"] = 0.5 * (1.0 - math.exp(-params.parity_map_time / params.T2))
        g["readout"] = t_M / (p["readout"] * tau_f01)
        p["preparation"] = params.Gamma_up * t_M
        g["preparation"] = t_M / (p["preparation"] * tau_f01)

    p["kerr"] = p_jump * _uniform_window_loss(0.5 * abs(params.K_s) * t_M)
    g["kerr"] = t_M / (p["kerr"] * tau_f01) if p["kerr"] > 0 else math.inf

    p["forward_propagation"] = (params.parity_map_time / (2.0 * params.T1)
                                + rate * t_M * params.tau_meas / params.T1
                                + params.Gamma_up * t_M)
    g["forward_propagation"] = t_M / (p["forward_propagation"] * tau_f01)
    return LossBudget(t_M, nbar, strategy, p, g, tau_f01)


# ------------------------------------------------------ record confidence

@dataclass(frozen=True)
class RecordConfidence:
    bits: tuple
    probability: float
    confidence: float  # posterior that the hidden jump pattern equals the record

    @property
    def label(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class ConfidenceTable:
    records: tuple
    first_step: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(r.probability for r in self.records)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"record probabilities sum to {total}")

    def by_label(self) -> dict:
        return {r.label: r for r in self.records}

    def probability_by_count(self) -> dict:
        out: dict = {}
        for r in self.records:
            k = sum(r.bits)
            out[k] = out.get(k, 0.0) + r.probability
        return dict(sorted(out.items()))

    def to_rows(self) -> list[dict]:
        rows, cum = [], 0.0
        for r in sorted(self.records, key=lambda r: -r.probability):
            cum += r.probability
            rows.append({"record": r.label, "probability": r.probability,
                         "confidence": r.confidence, "cumulative": cum})
        return rows


def flip_probabilities(nbar0: float, t_w: float, S: int, tau_s: float,
                       flip_model: str = "poisson", n_th: float = 0.0) -> np.ndarray:
    """Per-step probability that the parity changed, with nbar decayed to each step start."""
    kappa = 1.0 / tau_s
    frac = 1.0 - math.exp(-kappa * t_w)
    nbar = nbar0 * np.exp(-kappa * t_w * np.arange(S))
    if flip_model == "poisson":
        lam = nbar * frac
        return 1.0 - np.exp(-lam)
    if flip_model == "parity":
        mu = (1.0 + n_th) * nbar * frac + n_th * (kappa * t_w + nbar * frac)
        return 0.5 * (1.0 - np.exp(-2.0 * mu))
    raise ValueError(f"unknown flip model {flip_model!r}")


def bayes_records(nbar0: float, t_w: float, S: int, p_g_no_flip: float, p_e_flip: float,
                  tau_s: float = 250.0, flip_model: str = "poisson",
                  n_th: float = 0.0) -> ConfidenceTable:
    """Probability and confidence of every adaptive measurement record.

    Hidden state per step: whether the tracked parity is still correct.  A
    step flips the parity with probability p1_k; the adaptive protocol reads
    g with probability p_g_no_flip when the parity matches its expectation
    and e with probability p_e_flip when it does not.  Every e flips the
    expectation.  Confidence is the posterior probability that the true
    jump pattern equals the record.
    """
    for v in (p_g_no_flip, p_e_flip):
        if not 0.0 <= v <= 1.0:
            raise ValueError("assignment probabilities must lie in [0, 1]")
    if S < 1:
        raise ValueError("S must be at least 1")
    p1 = flip_probabilities(nbar0, t_w, S, tau_s, flip_model, n_th)
    records = []
    for bits in itertools.product((0, 1), repeat=S):
        # forward filter over "tracked parity correct" (index 0) / "wrong" (1)
        alpha = np.array([1.0, 0.0])
        match = 1.0  # joint probability of record and hidden pattern == record
        for k, b in enumerate(bits):
            flip = np.array([[1 - p1[k], p1[k]], [p1[k], 1 - p1[k]]])
            pred = alpha @ flip  # parity vs expectation before readout
            like = np.array([p_g_no_flip, 1 - p_e_flip]) if b == 0 else np.array([1 - p_g_no_flip, p_e_flip])
            joint = pred * like
            # an e result flips the expectation, swapping the roles
            alpha = joint if b == 0 else joint[::-1]
            match *= (1 - p1[k]) * p_g_no_flip if b == 0 else p1[k] * p_e_flip
        prob = float(alpha.sum())
        records.append(RecordConfidence(bits, prob, float(match / prob) if prob > 0 else 0.0))
    p0 = float(1 - p1[0])
    p_g = p_g_no_flip * p0 + (1 - p_e_flip) * (1 - p0)
    first = {
        "p_g": p_g,
        "p_e": 1 - p_g,
        "no_error_given_g": p_g_no_flip * p0 / p_g,
        "error_given_e": p_e_flip * (1 - p0) / (1 - p_g),
    }
    return ConfidenceTable(tuple(records), first)


def postselect(records) -> tuple[list, float]:
    """Keep records in which every 1 is followed by a 0."""
    records = list(records)
    from .controller import is_confirmed

    def bits_of(r):
        return r.bits if hasattr(r, "bits") else r

    kept = [r for r in records if is_confirmed(bits_of(r))]
    frac = len(kept) / len(records) if records else 0.0
    return kept, frac


def acceptance_probability(table: ConfidenceTable) -> float:
    """Predicted fraction of records that pass post-selection."""
    from .controller import is_confirmed

    return float(sum(r.probability for r in table.records if is_confirmed(r.bits)))
