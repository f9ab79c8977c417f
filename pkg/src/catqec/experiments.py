"""Lifetime sweeps, two-step record statistics and run archives."""

from __future__ import annotations

import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import optimize_cadence
from .catcode import CARDINALS, CatCodeParams, depolarize, depolarizing_retention
from .config import ExperimentConfig, dump_config
from .controller import AncillaModel, MonitorConfig, QecConfig, adaptive_monitor, ancilla_reset, make_plant, run_qec_cycle
from .dynamics import evolve_master, resonator_model
from .errors import FitError
from .fock import fock_state
from .params import SystemParams
from .tomography import (
    amplitude_damping_channel,
    anisotropy,
    apply_kraus,
    bloch_from_outcomes,
    chi_from_cardinals,
    fit_decay,
    frame_optimize,
    process_fidelity,
)

INPUTS = tuple(CARDINALS)  # +z, -z, +x, -x, +y, -y
AXES = ("x", "y", "z")
_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_SCHEME_ID = {"transmon": 0, "fock": 1, "uncorrected": 2, "corrected": 3}


def shot_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one shot, addressed by (seed, scheme, time, input, axis, shot)."""
    return np.random.default_rng([seed, *key])


def _measure(rho: np.ndarray, axis: str, rng: np.random.Generator) -> int:
    p_plus = 0.5 * (1.0 + float(np.real(np.trace(rho @ _PAULI[axis]))))
    return 1 if rng.random() < p_plus else -1


# ----------------------------------------------------------- storage schemes

def transmon_output(rho_in: np.ndarray, t: float, params: SystemParams) -> np.ndarray:
    """Bare ancilla: generalized amplitude damping plus pure dephasing."""
    rho = apply_kraus(amplitude_damping_channel(t, params.T1, params.n_th_a), rho_in)
    if math.isfinite(params.T_phi):
        rho = rho.copy()
        decay = math.exp(-t / params.T_phi)
        rho[0, 1] *= decay
        rho[1, 0] *= decay
    return rho


def fock_output(rho_in: np.ndarray, t: float, params: SystemParams,
                pulse_infidelity: float = 0.02, dim: int = 5) -> np.ndarray:
    """|0>,|1> resonator encoding with loss, thermal gain and dephasing from T2_s."""
    # coherences decay at kappa/2 + rate/2 for a collapse operator n
    deph = max(0.0, 2.0 * (1.0 / params.T2_s - 0.5 * params.kappa_s))
    model = resonator_model(params, dim, kerr=False, thermal=True, dephasing_rate=deph)
    basis = np.column_stack([fock_state(0, dim), fock_state(1, dim)])
    keep = depolarizing_retention(pulse_infidelity)
    rho = basis @ depolarize(rho_in, keep) @ basis.conj().T
    rho = evolve_master(rho, model, t)
    block = rho[:2, :2]
    leak = 1.0 - float(np.real(np.trace(block)))
    # excitations above |1> are not mapped back by the decode pulse
    out = block + leak * 0.5 * np.eye(2)
    return depolarize(out, keep)


@functools.lru_cache(maxsize=256)
def _optimal_schedule(T: float, nbar0: float, params: SystemParams, kerr_aware: bool) -> tuple:
    return optimize_cadence(T, nbar0, params, kerr_aware=kerr_aware, include_codec=False).t_k


def monitor_schedule(T: float, config: ExperimentConfig) -> tuple:
    if T <= 0:
        return ()
    if config.schedule == "fixed":
        S = max(1, int(round(T / config.step_period)))
        return tuple([T / S] * S)
    return _optimal_schedule(T, config.nbar0, config.params, config.kerr_aware)


def qec_config_for(T: float, config: ExperimentConfig, correct: bool) -> QecConfig:
    p = config.params
    code = CatCodeParams(nbar0=config.nbar0, kappa_s=p.kappa_s, K_s=p.K_s, dim=config.dim)
    monitor = MonitorConfig(monitor_schedule(T, config) if correct else ())
    return QecConfig(code=code, monitor=monitor, ancilla=AncillaModel.from_params(p),
                     correct=correct, storage_time=None if correct else T,
                     pulse_infidelity=config.pulse_infidelity,
                     decode_sigma_deg=config.decode_sigma_deg, n_th_s=p.n_th_s,
                     unitary_codec=config.unitary_codec)


# ------------------------------------------------------------- work items

@dataclass(frozen=True)
class WorkItem:
    scheme: str
    time_index: int
    T: float
    input_name: str
    axis: str


def _run_item(args):
    config, item = args
    seed = config.seed
    ids = (_SCHEME_ID[item.scheme], item.time_index, INPUTS.index(item.input_name), AXES.index(item.axis))
    q = CARDINALS[item.input_name]
    outcomes = np.empty(config.shots, dtype=np.int8)
    bits = []
    if item.scheme in ("transmon", "fock"):
        if item.scheme == "transmon":
            rho = transmon_output(q.density(), item.T, config.params)
        else:
            rho = fock_output(q.density(), item.T, config.params, config.fock_pulse_infidelity)
        rng = shot_rng(seed, *ids)
        p_plus = 0.5 * (1.0 + float(np.real(np.trace(rho @ _PAULI[item.axis]))))
        plus = int(rng.binomial(config.shots, min(1.0, max(0.0, p_plus))))
        outcomes[:plus] = 1
        outcomes[plus:] = -1
        return item, outcomes, bits
    qec = qec_config_for(item.T, config, correct=item.scheme == "corrected")
    for shot in range(config.shots):
        rng = shot_rng(seed, *ids, shot)
        res = run_qec_cycle(q, qec, config.plant, config.params, rng)
        outcomes[shot] = _measure(res.rho, item.axis, rng)
        bits.append(tuple(res.record.bits))
    return item, outcomes, bits


def work_items(config: ExperimentConfig) -> list[WorkItem]:
    items = []
    for scheme in config.schemes:
        times = config.transmon_times if scheme == "transmon" else config.times
        for ti, T in enumerate(times):
            for name in INPUTS:
                for axis in AXES:
                    items.append(WorkItem(scheme, ti, float(T), name, axis))
    return items


# ----------------------------------------------------------------- archive

@dataclass
class CurvePoint:
    T: float
    bloch: dict
    X00: float
    X00_frame: float
    anisotropy: float
    acceptance: float | None = None

    def to_dict(self) -> dict:
        return {"T": self.T, "bloch": {k: list(map(float, v)) for k, v in self.bloch.items()},
                "X00": self.X00, "X00_frame": self.X00_frame, "anisotropy": self.anisotropy,
                "acceptance": self.acceptance}


@dataclass
class RunArchive:
    config: ExperimentConfig
    curves: dict = field(default_factory=dict)  # scheme -> list[CurvePoint]
    fits: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    version: str = __version__

    def aggregates(self) -> dict:
        return {
            "version": self.version,
            "curves": {k: [p.to_dict() for p in v] for k, v in self.curves.items()},
            "fits": self.fits,
        }

    def write(self, directory=None) -> Path:
        out = Path(directory) if directory else self.config.resolved_output_dir()
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(dump_config(self.config))
        (out / "aggregates.json").write_text(json.dumps(self.aggregates(), indent=1, sort_keys=True))
        if self.config.write_records:
            with open(out / "records.jsonl", "w") as fh:
                for rec in self.records:
                    fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        return out


def _curve_point(T: float, counts: dict, acceptance: float | None = None) -> CurvePoint:
    bloch = {}
    for name in INPUTS:
        rows = [counts[(name, a)] for a in AXES]
        bloch[name] = bloch_from_outcomes(rows)
    x00 = process_fidelity(chi_from_cardinals(bloch))
    _, chi_rot = frame_optimize(bloch)
    return CurvePoint(T, bloch, x00, process_fidelity(chi_rot), anisotropy(bloch), acceptance)


def _fit(times, fids, model="single-exponential", nbar0=None) -> dict:
    try:
        fit = fit_decay(times, fids, model, nbar0)
    except (FitError, ValueError) as exc:
        return {"model": model, "error": str(exc)}
    out = {"model": model, "A": fit.A, "tau": fit.tau, "A_err": fit.A_err, "tau_err": fit.tau_err}
    if model == "uncorrected-cat":
        out["tau_short"] = fit.tau / nbar0
    return out


def run_lifetime_sweep(config: ExperimentConfig, threads: int = 1) -> RunArchive:
    """Process tomography of every storage scheme at every time point."""
    if config.seed is None:
        raise ValueError("a seed is required for archived runs")
    items = work_items(config)
    payload = [(config, it) for it in items]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_item, payload, chunksize=1))
    else:
        results = [_run_item(p) for p in payload]

    grouped: dict = {}
    records = []
    for item, outcomes, bits in results:
        grouped.setdefault(item.scheme, {}).setdefault(item.time_index, []).append((item, outcomes, bits))
        if bits and config.write_records:
            for shot, b in enumerate(bits):
                records.append({"scheme": item.scheme, "T": item.T, "input": item.input_name,
                                "axis": item.axis, "shot": shot, "bits": list(b),
                                "outcome": int(outcomes[shot])})

    archive = RunArchive(config, records=records)
    for scheme, per_time in grouped.items():
        curve, post = [], []
        for ti in sorted(per_time):
            entries = per_time[ti]
            T = entries[0][0].T
            counts, post_counts = {}, {}
            accepted = total = 0
            for item, outcomes, bits in entries:
                plus = int(np.sum(outcomes == 1))
                counts[(item.input_name, item.axis)] = (plus, len(outcomes) - plus)
                if scheme == "corrected":
                    from .controller import is_confirmed

                    mask = np.array([is_confirmed(b) for b in bits], dtype=bool)
                    accepted += int(mask.sum())
                    total += len(mask)
                    kept = outcomes[mask]
                    p_plus = int(np.sum(kept == 1))
                    post_counts[(item.input_name, item.axis)] = (p_plus, len(kept) - p_plus)
            curve.append(_curve_point(T, counts))
            if scheme == "corrected":
                ok = all(sum(v) > 0 for v in post_counts.values())
                if ok:
                    post.append(_curve_point(T, post_counts, accepted / total))
        archive.curves[scheme] = curve
        if post:
            archive.curves["postselected"] = post

    for scheme, curve in archive.curves.items():
        ts = [p.T for p in curve]
        fs = [p.X00_frame for p in curve]
        if scheme == "uncorrected":
            archive.fits[scheme] = _fit(ts, fs, "uncorrected-cat", config.nbar0)
        else:
            archive.fits[scheme] = _fit(ts, fs)
    return archive


def acceptance_at(archive: RunArchive, T: float) -> float:
    post = archive.curves.get("postselected", [])
    if not post:
        raise ValueError("archive has no post-selected curve")
    return float(np.interp(T, [p.T for p in post], [p.acceptance for p in post]))


# ------------------------------------------------------- two-step records

def two_step_statistics(n_runs: int, seed: int, nbar0: float = 3.0, t_wait: float = 13.8,
                        params: SystemParams | None = None, dim: int = 24) -> dict:
    """Frequencies of the four records after two adaptive monitoring steps.

    Each step lasts the idle ``t_wait`` plus mapping, readout and feedback.
    """
    params = params or SystemParams()
    ancilla = AncillaModel.from_params(params)
    t_step = t_wait + params.step_overhead
    code = CatCodeParams(nbar0=nbar0, kappa_s=params.kappa_s, K_s=params.K_s, dim=dim)
    cfg = QecConfig(code=code, monitor=MonitorConfig((t_step, t_step)), ancilla=ancilla,
                    n_th_s=params.n_th_s, unitary_codec=False)
    counts = {"00": 0, "01": 0, "10": 0, "11": 0}
    for i in range(n_runs):
        rng = np.random.default_rng([seed, i])
        excited = ancilla_reset(ancilla, rng).excited
        plant = make_plant("phenomenological", CARDINALS["+z"], cfg)
        rec = adaptive_monitor(plant, ancilla, cfg.monitor, rng, excited=excited)
        counts[rec.label] += 1
    return {k: v / n_runs for k, v in counts.items()}
