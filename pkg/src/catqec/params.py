"""Hardware constants.  Times in microseconds, angular frequencies in rad/us."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class SystemParams:
    # Hamiltonian (angular frequency, rad/us); 2*pi*MHz
    chi_sa: float = TWO_PI * 1.97
    chi_ra: float = TWO_PI * 1.0
    chi_sr: float = TWO_PI * 0.002
    K_s: float = TWO_PI * 0.0045
    K_r: float = TWO_PI * 0.0005
    K_a: float = TWO_PI * 297.0
    omega_s: float = TWO_PI * 8305.6
    omega_a: float = TWO_PI * 6281.5
    omega_r: float = TWO_PI * 9314.9
    # coherence and thermal populations
    tau_s: float = 250.0
    T2_s: float = 330.0
    n_th_s: float = 0.02
    T1: float = 35.0
    T2: float = 12.0
    n_th_a: float = 0.04
    Gamma_up: float | None = None  # derived as n_th_a / T1 when unset
    # readout and timing
    M_gg: float = 0.993
    M_ee: float = 0.993
    tau_meas: float = 0.4
    T_FB: float = 0.332
    p_d: float = 0.001
    n_readout: float = 70.0

    def __post_init__(self):
        if self.Gamma_up is None:
            object.__setattr__(self, "Gamma_up", self.n_th_a / self.T1)
        for name in ("tau_s", "T2_s", "T1", "T2", "tau_meas"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.T_FB < 0:
            raise ValueError("T_FB must be non-negative")
        if self.T2 > 2 * self.T1 + 1e-12:
            raise ValueError("T2 cannot exceed 2*T1")
        for name in ("M_gg", "M_ee", "p_d", "n_th_s", "n_th_a"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.Gamma_up < 0:
            raise ValueError("Gamma_up must be non-negative")

    @property
    def kappa_s(self) -> float:
        return 1.0 / self.tau_s

    @property
    def parity_map_time(self) -> float:
        return math.pi / self.chi_sa

    @property
    def step_overhead(self) -> float:
        """Parity mapping + readout + feedback latency within one step."""
        return self.parity_map_time + self.tau_meas + self.T_FB

    @property
    def T_phi(self) -> float:
        """Pure dephasing time of the ancilla."""
        rate = 1.0 / self.T2 - 0.5 / self.T1
        return math.inf if rate <= 0 else 1.0 / rate

    @property
    def fock_lifetime(self) -> float:
        """Harmonic-mean lifetime 3/(1/tau_s + 2/T2_s) of the {|0>,|1>} encoding."""
        return 3.0 / (1.0 / self.tau_s + 2.0 / self.T2_s)

    def replace(self, **changes) -> "SystemParams":
        if "n_th_a" in changes or "T1" in changes:
            changes.setdefault("Gamma_up", None)
        return dataclasses.replace(self, **changes)


def ideal_params(**overrides) -> SystemParams:
    """Parameters with every ancilla and resonator imperfection switched off."""
    base = dict(
        T1=1e12, T2=1e12, n_th_a=0.0, n_th_s=0.0, M_gg=1.0, M_ee=1.0, p_d=0.0,
        chi_sr=0.0, K_s=0.0, Gamma_up=0.0,
    )
    base.update(overrides)
    return SystemParams(**base)


@dataclass(frozen=True)
class ParityFidelityBands:
    """Measured parity-mapping fidelity versus mean photon number."""

    nbar: tuple = (0.0, 2.0, 3.0)
    fidelity: tuple = (0.985, 0.981, 0.977)

    def __call__(self, nbar: float) -> float:
        return float(np.interp(nbar, self.nbar, self.fidelity))


DEFAULT_BANDS = ParityFidelityBands()
PERFECT_BANDS = ParityFidelityBands(nbar=(0.0,), fidelity=(1.0,))

# Idle wait at which the quoted parity fidelities apply; used to separate
# intrinsic mapping errors from ancilla excitation during the wait.
FIDELITY_REFERENCE_WAIT = 13.8

TAU_FOCK_REFERENCE = 290.0


def field_names(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls)]


__all__ = [
    "SystemParams",
    "ideal_params",
    "ParityFidelityBands",
    "DEFAULT_BANDS",
    "PERFECT_BANDS",
    "FIDELITY_REFERENCE_WAIT",
    "TAU_FOCK_REFERENCE",
    "TWO_PI",
]
