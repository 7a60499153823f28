"""Simulated lattice experiment.

A one-dimensional Bose-Hubbard chain stands in for the atomic sample: a
depth waveform is mapped to hopping/interaction strengths, the state is
propagated exactly through piecewise-constant intervals, and the residual
excitation above the target ground state plays the role of the measured
figure of merit.  Small enough for exact diagonalization, deterministic
given a seed.

Internal time is measured in units of hbar over the recoil energy; the
``ms_to_internal`` config constant converts control-field milliseconds
into those units so that lab-scale ramp durations land in a meaningful
adiabaticity regime for the small chain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import comb
from typing import Optional

import numpy as np

from .errors import CrabloopError, EvaluationFailedError
from .waveform import ControlField, ExponentialRamp, Waveform

MAX_HILBERT_DIM = 5000
MAX_SITES = 8
MAX_BOSONS = 8

# reference ramps, durations and time constants in ms
QUASI_ADIABATIC = (140.0, 30.0)
SFMI_BASE = (25.0, 40.0, 8.0)       # (s_max, delta_t_ms, tau_ms)
CROSSOVER_GUESS = (32.0, 15.0, 3.0)

PLANCK_H = 6.62607015e-34           # J s
ATOMIC_MASS_KG = 1.66053906660e-27  # kg per unified mass unit
ATOM_MASS_U = {"Rb87": 86.909180527}


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class ShallowDepthError(CrabloopError):
    pass


class DimensionError(CrabloopError):
    pass


class NormDriftError(CrabloopError):
    pass


class DegenerateGroundStateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HubbardConfig:
    sites: int = 5
    bosons: int = 5
    boundary: Boundary = Boundary.OPEN
    u_scale: float = 0.2
    s_min_map: float = 2.0
    ms_to_internal: float = 20.0
    lattice_wavelength_nm: float = 830.0
    atom: str = "Rb87"

    def __post_init__(self) -> None:
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not (1 <= self.sites <= MAX_SITES and 1 <= self.bosons <= MAX_BOSONS):
            raise DimensionError(
                f"sites/bosons must be within 1..{MAX_SITES}/1..{MAX_BOSONS}"
            )
        if self.hilbert_dim > MAX_HILBERT_DIM:
            raise DimensionError(
                f"Hilbert dimension {self.hilbert_dim} exceeds {MAX_HILBERT_DIM}"
            )
        if self.ms_to_internal <= 0:
            raise ValueError("ms_to_internal must be positive")

    @property
    def hilbert_dim(self) -> int:
        return comb(self.bosons + self.sites - 1, self.bosons)

    @property
    def recoil_energy_joule(self) -> float:
        """E_r = h^2 / (2 m lambda^2); units bookkeeping only."""
        mass = ATOM_MASS_U[self.atom] * ATOMIC_MASS_KG
        wavelength = self.lattice_wavelength_nm * 1e-9
        return PLANCK_H**2 / (2.0 * mass * wavelength**2)


@dataclass(frozen=True)
class PlantProtocol:
    """One full experimental sequence fed to the plant."""

    ramp_up: Waveform
    hold_ms: float = 5.0
    round_trip: bool = False
    ramp_down: Optional[Waveform] = None
    noise_sigma: float = 0.0
    rng_seed: int = 0


@dataclass(frozen=True)
class FomSample:
    """One plant evaluation: the figure of merit plus raw diagnostics."""

    fom: float
    fidelity: float
    energy_excess: float
    seed: int
    noisy: bool


def depth_to_hubbard(
    s: float, u_scale: float = 0.2, s_min_map: float = 2.0
) -> tuple[float, float]:
    """Map lattice depth to (hopping, interaction) in recoil units.

    Tight-binding form for the hopping; power law with a tunable scale for
    the interaction.  Meaningless at shallow depth, hence the floor.
    """
    if s < s_min_map:
        raise ShallowDepthError(f"depth {s} below mapping floor {s_min_map}")
    hopping = 4.0 / np.sqrt(np.pi) * s**0.75 * np.exp(-2.0 * np.sqrt(s))
    interaction = u_scale * s**0.75
    return float(hopping), float(interaction)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_basis(sites: int, bosons: int) -> list[tuple[int, ...]]:
    """Occupation tuples summing to the boson number, ascending lexicographic."""
    return list(_compositions(bosons, sites))


@lru_cache(maxsize=8)
def _operators(sites: int, bosons: int, boundary: Boundary):
    """Basis plus the depth-independent hopping and interaction matrices."""
    basis = enumerate_basis(sites, bosons)
    index = {occ: i for i, occ in enumerate(basis)}
    dim = len(basis)
    hop = np.zeros((dim, dim))
    bonds = [(i, i + 1) for i in range(sites - 1)]
    if boundary is Boundary.PERIODIC and sites > 2:
        bonds.append((sites - 1, 0))
    for col, occ in enumerate(basis):
        for i, j in bonds:
            for src, dst in ((j, i), (i, j)):  # b_dst^dag b_src + h.c.
                if occ[src] == 0:
                    continue
                target = list(occ)
                target[src] -= 1
                target[dst] += 1
                row = index[tuple(target)]
                hop[row, col] += np.sqrt(occ[src] * (occ[dst] + 1))
    interaction = np.array([sum(n * (n - 1) for n in occ) for occ in basis], float)
    return basis, index, hop, interaction


def build_hamiltonian(config: HubbardConfig, J: float, U: float) -> np.ndarray:
    """Dense Bose-Hubbard Hamiltonian in the occupation basis."""
    _, _, hop, interaction = _operators(config.sites, config.bosons, config.boundary)
    return -J * hop + np.diag(0.5 * U * interaction)


def ground_state(
    config: HubbardConfig, J: float, U: float
) -> tuple[np.ndarray, float]:
    """Lowest eigenpair, with the global phase fixed.

    The largest-magnitude amplitude is made real positive; exact ties fall
    back to the lowest basis index.  A gap below 1e-10 triggers a
    degeneracy warning.
    """
    energies, vectors = np.linalg.eigh(build_hamiltonian(config, J, U))
    if len(energies) > 1 and energies[1] - energies[0] < 1e-10:
        warnings.warn(
            f"ground state nearly degenerate (gap {energies[1] - energies[0]:.2e})",
            DegenerateGroundStateWarning,
        )
    state = vectors[:, 0].astype(np.complex128)
    anchor = int(np.argmax(np.abs(state)))
    phase = state[anchor] / abs(state[anchor])
    state = state / phase
    return state, float(energies[0])


def _clamped_hubbard(config: HubbardConfig, s: float) -> tuple[float, float]:
    return depth_to_hubbard(
        max(s, config.s_min_map), config.u_scale, config.s_min_map
    )


def _propagate_interval(
    config: HubbardConfig, psi: np.ndarray, s: float, theta: float
) -> np.ndarray:
    J, U = _clamped_hubbard(config, s)
    energies, vectors = np.linalg.eigh(build_hamiltonian(config, J, U))
    return vectors @ (np.exp(-1j * theta * energies) * (vectors.T @ psi))


def evolve(state: np.ndarray, waveform: Waveform, config: HubbardConfig) -> np.ndarray:
    """Propagate through the waveform, one exact step per sample interval.

    Each interval uses the Hamiltonian at its midpoint depth (clamped to
    the mapping floor) and the exact propagator from a dense
    eigendecomposition.
    """
    psi = np.asarray(state, dtype=np.complex128).copy()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("input state must be normalized")
    samples = waveform.samples
    if len(samples) < 2 or not np.all(np.isfinite(samples)):
        raise EvaluationFailedError("waveform must hold >= 2 finite samples")
    theta = waveform.dt_ms * config.ms_to_internal
    if theta < 0:
        raise EvaluationFailedError("waveform sample spacing must be nonnegative")
    if theta > 0:
        for k in range(len(samples) - 1):
            midpoint = 0.5 * (samples[k] + samples[k + 1])
            psi = _propagate_interval(config, psi, midpoint, theta)
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > 1e-8:
        raise NormDriftError(f"norm drifted by {drift:.2e}")
    return psi


def free_evolve(
    state: np.ndarray, s: float, duration_ms: float, config: HubbardConfig
) -> np.ndarray:
    """Evolve at constant depth for the given duration."""
    if duration_ms == 0:
        return np.asarray(state, dtype=np.complex128).copy()
    theta = duration_ms * config.ms_to_internal
    return _propagate_interval(config, np.asarray(state, np.complex128), s, theta)


def evaluate(protocol: PlantProtocol, config: HubbardConfig) -> FomSample:
    """Run one experimental sequence and measure the figure of merit.

    Forward mode: start in the ground state at the (clamped) initial
    depth, ramp up, hold, and score one minus the squared overlap with the
    target ground state at the final depth.  Round-trip mode additionally
    ramps back down and scores the overlap with the initial state instead.
    Internal failures surface as EvaluationFailedError so a driving
    optimizer can substitute a penalty.
    """
    wf = protocol.ramp_up
    if np.any(np.asarray(wf.samples) < 0) or not np.all(np.isfinite(wf.samples)):
        raise EvaluationFailedError("ramp depths must be finite and nonnegative")
    if protocol.hold_ms < 0:
        raise EvaluationFailedError("hold_ms must be nonnegative")
    if protocol.round_trip and protocol.ramp_down is None:
        raise EvaluationFailedError("round_trip protocol needs a ramp_down waveform")

    try:
        start, _ = _clamped_hubbard(config, wf.samples[0])
        psi0, _ = ground_state(config, *_clamped_hubbard(config, wf.samples[0]))
        psi = evolve(psi0, wf, config)
        top = max(wf.samples[-1], config.s_min_map)
        psi = free_evolve(psi, top, protocol.hold_ms, config)

        if protocol.round_trip:
            psi = evolve(psi, protocol.ramp_down, config)
            reference = psi0
            s_final = max(protocol.ramp_down.samples[-1], config.s_min_map)
        else:
            reference = None
            s_final = top

        J_f, U_f = _clamped_hubbard(config, s_final)
        target, e_ground = ground_state(config, J_f, U_f)
        if reference is None:
            reference = target
        fidelity = float(abs(np.vdot(reference, psi)) ** 2)
        h_final = build_hamiltonian(config, J_f, U_f)
        excess = (float(np.vdot(psi, h_final @ psi).real) - e_ground) / J_f
    except (ShallowDepthError, NormDriftError, ValueError) as exc:
        raise EvaluationFailedError(str(exc)) from exc

    fom = 1.0 - fidelity
    noisy = protocol.noise_sigma > 0
    if noisy:
        rng = np.random.default_rng(protocol.rng_seed)
        fom = max(0.0, fom + protocol.noise_sigma * rng.standard_normal())
    return FomSample(
        fom=fom,
        fidelity=fidelity,
        energy_excess=excess,
        seed=protocol.rng_seed,
        noisy=noisy,
    )


def time_reversed_ramp(
    s_max: float, delta_t_ms: float, tau_ms: float, n_steps: int
) -> Waveform:
    """Sampled exponential switch-off: the loading ramp run backwards."""
    from .waveform import sample_waveform

    up = sample_waveform(
        ControlField(ExponentialRamp(s_max, delta_t_ms, tau_ms)), n_steps
    )
    return Waveform(dt_ms=up.dt_ms, samples=up.samples[::-1].copy())


def reference_protocols(s_max: float) -> dict[str, ControlField]:
    """Standard comparison fields, durations in control-field ms."""
    return {
        "quasi_adiabatic": ControlField(
            ExponentialRamp(s_max, QUASI_ADIABATIC[0], QUASI_ADIABATIC[1])
        ),
        "sfmi_base": ControlField(ExponentialRamp(*SFMI_BASE)),
        "crossover_guess": ControlField(ExponentialRamp(*CROSSOVER_GUESS)),
    }
