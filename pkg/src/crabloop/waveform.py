"""Lattice-depth control fields.

A control field is an exponential base ramp, optionally multiplied by a
truncated trigonometric correction whose normalization pins the endpoint
value.  Fields are evaluated in physical units (depth in recoil energies,
time in ms) and discretized into uniform waveforms for the plant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CrabloopError

DENOM_EPS = 1e-6     # corrections with |denominator| below this are rejected
PROBE_POINTS = 1024  # grid used to probe for negative depths


class FieldError(CrabloopError):
    """Invalid control-field parameters or evaluation outside the domain."""


class InvalidRampError(FieldError):
    pass


class SingularCorrectionError(FieldError):
    pass


@dataclass(frozen=True)
class ExponentialRamp:
    """Exponential loading ramp from 0 to s_max over delta_t_ms."""

    s_max: float
    delta_t_ms: float
    tau_ms: float


@dataclass(frozen=True)
class CrabCorrection:
    """Truncated trigonometric correction factor.

    ``coeffs`` holds one (sine, cosine) amplitude pair per frequency
    component; ``freqs_per_ms`` the component frequencies in 1/ms.
    """

    coeffs: tuple[tuple[float, float], ...]
    freqs_per_ms: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.coeffs) != len(self.freqs_per_ms):
            raise FieldError(
                "coefficient pairs and frequencies must have equal length"
            )

    @classmethod
    def from_flat(
        cls, flat: Sequence[float], freqs_per_ms: Sequence[float]
    ) -> "CrabCorrection":
        """Build from a flat [a1, b1, a2, b2, ...] coefficient vector."""
        flat = list(flat)
        if len(flat) != 2 * len(freqs_per_ms):
            raise FieldError("flat coefficient vector must have length 2*n_components")
        pairs = tuple(
            (float(flat[2 * j]), float(flat[2 * j + 1]))
            for j in range(len(freqs_per_ms))
        )
        return cls(pairs, tuple(float(f) for f in freqs_per_ms))

    def flat(self) -> list[float]:
        out: list[float] = []
        for a, b in self.coeffs:
            out.extend((a, b))
        return out

    @property
    def n_components(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class ControlField:
    """Exponential base ramp times an optional correction factor."""

    base: ExponentialRamp
    correction: CrabCorrection | None = None


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled control field: depths at t = 0, dt, 2*dt, ..."""

    dt_ms: float
    samples: np.ndarray

    @property
    def duration_ms(self) -> float:
        return self.dt_ms * (len(self.samples) - 1)

    def times_ms(self) -> np.ndarray:
        return self.dt_ms * np.arange(len(self.samples))


def harmonic_frequencies(n_components: int, delta_t_ms: float) -> tuple[float, ...]:
    """Frequencies locked to integer multiples of 1/delta_t."""
    if n_components < 1:
        raise FieldError("need at least one frequency component")
    return tuple(j / delta_t_ms for j in range(1, n_components + 1))


def randomized_frequencies(
    n_components: int, delta_t_ms: float, rng: np.random.Generator
) -> tuple[float, ...]:
    """Harmonics jittered by a uniform factor in [0.5, 1.5]."""
    if n_components < 1:
        raise FieldError("need at least one frequency component")
    shifts = rng.uniform(-0.5, 0.5, size=n_components)
    return tuple(
        j * (1.0 + r) / delta_t_ms for j, r in zip(range(1, n_components + 1), shifts)
    )


def _check_ramp(ramp: ExponentialRamp) -> None:
    if not (np.isfinite(ramp.delta_t_ms) and ramp.delta_t_ms > 0):
        raise InvalidRampError(f"delta_t_ms must be positive, got {ramp.delta_t_ms}")
    if not (np.isfinite(ramp.tau_ms) and ramp.tau_ms != 0):
        raise InvalidRampError(f"tau_ms must be finite and nonzero, got {ramp.tau_ms}")
    if not (np.isfinite(ramp.s_max) and ramp.s_max >= 0):
        raise InvalidRampError(f"s_max must be nonnegative, got {ramp.s_max}")


def eval_exponential(ramp: ExponentialRamp, t_ms):
    """Evaluate the exponential ramp at time t (scalar or array).

    Uses an expm1 form that stays finite for arbitrarily small tau and is
    exact at both endpoints: 0 at t=0 and s_max at t=delta_t.
    """
    _check_ramp(ramp)
    t = np.asarray(t_ms, dtype=float)
    if np.any(t < 0) or np.any(t > ramp.delta_t_ms):
        raise FieldError(f"time outside [0, {ramp.delta_t_ms}] ms")
    a = t / ramp.tau_ms
    big = ramp.delta_t_ms / ramp.tau_ms
    if ramp.tau_ms > 0:
        # (e^a - 1)/(e^A - 1) = e^(a-A) * (e^-a - 1)/(e^-A - 1), overflow-free
        ratio = np.exp(a - big) * np.expm1(-a) / np.expm1(-big)
    else:
        ratio = np.expm1(a) / np.expm1(big)
    out = ramp.s_max * ratio
    return float(out) if np.isscalar(t_ms) else out


def _trig_sum(correction: CrabCorrection, t):
    total = np.zeros_like(np.asarray(t, dtype=float))
    for (a, b), nu in zip(correction.coeffs, correction.freqs_per_ms):
        phase = 2.0 * np.pi * nu * np.asarray(t, dtype=float)
        total = total + a * np.sin(phase) + b * np.cos(phase)
    return total


def correction_denominator(correction: CrabCorrection, delta_t_ms: float) -> float:
    """Normalization denominator: the trig sum evaluated at t = delta_t."""
    return float(1.0 + _trig_sum(correction, delta_t_ms))


def eval_crab(correction: CrabCorrection, delta_t_ms: float, t_ms):
    """Evaluate the correction factor at time t; equals 1 at t = delta_t."""
    if correction.n_components < 1:
        raise FieldError("correction must have at least one component")
    flat = correction.flat() + list(correction.freqs_per_ms)
    if not np.all(np.isfinite(flat)):
        raise FieldError("correction coefficients must be finite")
    t = np.asarray(t_ms, dtype=float)
    if np.any(t < 0) or np.any(t > delta_t_ms):
        raise FieldError(f"time outside [0, {delta_t_ms}] ms")
    denom = correction_denominator(correction, delta_t_ms)
    if abs(denom) < DENOM_EPS:
        raise SingularCorrectionError(
            f"correction denominator {denom:.3e} below {DENOM_EPS:.0e}"
        )
    out = (1.0 + _trig_sum(correction, t)) / denom
    return float(out) if np.isscalar(t_ms) else out


def eval_field(field: ControlField, t_ms):
    """Depth of the full control field at time t (scalar or array)."""
    base = eval_exponential(field.base, t_ms)
    if field.correction is None:
        return base
    return base * eval_crab(field.correction, field.base.delta_t_ms, t_ms)


def sample_waveform(field: ControlField, n_steps: int) -> Waveform:
    """Discretize the field into n_steps uniform samples on [0, delta_t]."""
    if n_steps < 2:
        raise FieldError(f"n_steps must be >= 2, got {n_steps}")
    t = np.linspace(0.0, field.base.delta_t_ms, n_steps)
    samples = np.asarray(eval_field(field, t), dtype=float)
    return Waveform(dt_ms=field.base.delta_t_ms / (n_steps - 1), samples=samples)


@dataclass
class ValidationReport:
    """Every violated field invariant, one coded entry per violation."""

    issues: list[str]

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> list[str]:
        return [entry.split(":", 1)[0] for entry in self.issues]


def validate(field: ControlField) -> ValidationReport:
    """Check a field against all invariants without raising."""
    issues: list[str] = []
    ramp = field.base
    if not (np.isfinite(ramp.s_max) and ramp.s_max >= 0):
        issues.append(f"invalid-smax: s_max={ramp.s_max}")
    if not (np.isfinite(ramp.delta_t_ms) and ramp.delta_t_ms > 0):
        issues.append(f"invalid-duration: delta_t_ms={ramp.delta_t_ms}")
    if not (np.isfinite(ramp.tau_ms) and ramp.tau_ms != 0):
        issues.append(f"invalid-tau: tau_ms={ramp.tau_ms}")

    corr = field.correction
    if corr is not None:
        flat = corr.flat() + list(corr.freqs_per_ms)
        if corr.n_components < 1:
            issues.append("invalid-correction: no frequency components")
        elif not np.all(np.isfinite(flat)):
            issues.append("nonfinite-coefficients: correction entries must be finite")
        elif np.isfinite(ramp.delta_t_ms) and ramp.delta_t_ms > 0:
            denom = correction_denominator(corr, ramp.delta_t_ms)
            if abs(denom) < DENOM_EPS:
                issues.append(f"singular-denominator: |D|={abs(denom):.3e}")

    if not issues:
        probe = np.linspace(0.0, ramp.delta_t_ms, PROBE_POINTS)
        depths = eval_field(field, probe)
        if np.any(depths < 0):
            worst = float(np.min(depths))
            issues.append(f"negative-depth: min depth {worst:.6g} on probe grid")
    return ValidationReport(issues)


def write_waveform_csv(waveform: Waveform, path) -> None:
    """Write samples as CSV with header t_ms,depth_Er at full precision."""
    lines = ["t_ms,depth_Er"]
    for t, s in zip(waveform.times_ms(), waveform.samples):
        lines.append(f"{t:.17g},{s:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
