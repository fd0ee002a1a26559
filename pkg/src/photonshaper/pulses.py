"""Temporal modes and control-pulse synthesis for emission and storage.

Grid convention: a mode with start time ``t0`` and step ``dt`` holds samples
at bin centers t_j = t0 + (j + 1/2) dt, and integrals are midpoint sums
(sum * dt).  The remaining-energy integral R(t) entering the control formula
is accumulated suffix-inclusively (R_j includes bin j), its mirror for
storage prefix-inclusively; this pairing makes the emission/storage
time-reversal identity grid-exact.

Stored Rabi frequencies are linear MHz (angular value / 2pi); the control
energy h is accumulated trapezoidally from the stored values (MHz^2 us) and
picks up its (2pi)^2 at formula boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cqed import AdiabaticCoeffs, CqedParams

TWO_PI = 2.0 * math.pi

__all__ = [
    "TemporalMode",
    "ShapeSpec",
    "ControlPulse",
    "SpinWaveTrajectory",
    "PulseOptions",
    "make_shape",
    "emission_control",
    "storage_control",
    "spin_wave",
    "mode_fidelity",
    "selection_efficiency",
    "time_reverse",
    "resample",
    "mode_to_csv",
    "mode_from_csv",
    "pulse_to_csv",
    "pulse_from_csv",
]

MIN_SAMPLES = 16
NORM_TOL = 1e-9
MIN_WINDOW_ENERGY = 0.999


@dataclass(frozen=True)
class TemporalMode:
    """Normalized complex temporal amplitude e(t) on a uniform grid (us^-1/2)."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.samples.size < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        self.samples.flags.writeable = False
        norm = float(np.sum(np.abs(self.samples) ** 2) * self.dt)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"mode norm {norm} deviates from 1 beyond {NORM_TOL}")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n) + 0.5) * self.dt

    @classmethod
    def from_samples(cls, t0: float, dt: float, samples) -> "TemporalMode":
        """Construct with numerical normalization on the grid."""
        arr = np.asarray(samples, dtype=complex)
        norm = math.sqrt(float(np.sum(np.abs(arr) ** 2) * dt))
        if norm == 0.0:
            raise ValueError("cannot normalize an all-zero mode")
        return cls(t0=t0, dt=dt, samples=arr / norm)


@dataclass(frozen=True)
class ShapeSpec:
    """Analytic pulse-shape description.

    family: 'sech' (e ~ sech(t/t_char), so the intensity FWHM is 1.763
    t_char), 'gaussian' (e ~ exp(-t^2/(2 sigma^2)) with sigma = t_char),
    'square' (flat on [0, t_char]) or 'custom'.  The window must capture
    >= 99.9% of the analytic energy.  ``phase_jump`` = (time, dphi)
    multiplies samples by exp(i dphi) for t >= time.
    """

    family: str
    t_char: float = 0.0
    window: tuple = (0.0, 0.0)
    n_samples: int = 1024
    phase_jump: Optional[tuple] = None
    custom_samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in ("sech", "gaussian", "square", "custom"):
            raise ValueError(f"unknown shape family {self.family!r}")
        if self.family != "custom" and self.t_char <= 0:
            raise ValueError("characteristic time must be positive")
        if self.window[1] <= self.window[0]:
            raise ValueError("window must have positive extent")


def _window_energy_fraction(spec: ShapeSpec) -> float:
    lo, hi = spec.window
    if spec.family == "sech":
        c = 0.5 * (lo + hi)
        x = lambda t: math.tanh((t - c) / spec.t_char)
        return 0.5 * (x(hi) - x(lo))
    if spec.family == "gaussian":
        c = 0.5 * (lo + hi)
        x = lambda t: math.erf((t - c) / spec.t_char)
        return 0.5 * (x(hi) - x(lo))
    if spec.family == "square":
        return 1.0 if lo <= 0.0 and hi >= spec.t_char else 0.0
    return 1.0


def make_shape(spec: ShapeSpec) -> TemporalMode:
    """Sample and normalize the requested shape, applying any phase jump."""
    frac = _window_energy_fraction(spec)
    if frac < MIN_WINDOW_ENERGY:
        raise ValueError(
            f"window captures {frac:.6f} of the pulse energy; need >= {MIN_WINDOW_ENERGY}"
        )
    lo, hi = spec.window
    n = spec.n_samples
    dt = (hi - lo) / n
    t = lo + (np.arange(n) + 0.5) * dt
    if spec.family == "sech":
        c = 0.5 * (lo + hi)
        amp = 1.0 / np.cosh((t - c) / spec.t_char)
    elif spec.family == "gaussian":
        c = 0.5 * (lo + hi)
        amp = np.exp(-((t - c) ** 2) / (2.0 * spec.t_char**2))
    elif spec.family == "square":
        amp = np.where((t >= 0.0) & (t <= spec.t_char), 1.0, 0.0)
    else:
        if spec.custom_samples is None:
            raise ValueError("custom family requires custom_samples")
        amp = np.asarray(spec.custom_samples, dtype=complex)
        if amp.size != n:
            raise ValueError("custom_samples length must equal n_samples")
    amp = amp.astype(complex)
    if spec.phase_jump is not None:
        t_jump, dphi = spec.phase_jump
        amp = np.where(t >= t_jump, amp * np.exp(1j * dphi), amp)
    return TemporalMode.from_samples(lo, dt, amp)


@dataclass(frozen=True)
class ControlPulse:
    """Control Rabi frequency on the mode grid.

    omega holds Omega(t)/2pi in MHz; h is the cumulative control energy
    integral of |omega|^2 (MHz^2 us, trapezoidal); ``compensated`` records
    whether the light-shift phase term was applied.  clamp_time / stop_time
    mark where amplitude clamping began and where the pulse was cut off by
    the remaining-energy threshold (None if never).
    """

    t0: float
    dt: float
    omega: np.ndarray
    h: np.ndarray
    compensated: bool
    omega_max: float
    tail_epsilon: float
    clamp_time: Optional[float] = None
    stop_time: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=complex))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
        self.omega.flags.writeable = False
        self.h.flags.writeable = False
        if np.any(np.diff(self.h) < -1e-15):
            raise ValueError("control energy h must be non-decreasing")
        if np.any(np.abs(self.omega) > self.omega_max * (1 + 1e-12)):
            raise ValueError("omega exceeds omega_max")

    @property
    def n(self) -> int:
        return self.omega.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n) + 0.5) * self.dt


@dataclass(frozen=True)
class PulseOptions:
    compensate_phase: bool = True
    omega_max: float = 50.0  # MHz, linear
    tail_epsilon: float = 1e-4


@dataclass(frozen=True)
class SpinWaveTrajectory:
    """Storage-state amplitude S(t) and out-field amplitude during emission."""

    t0: float
    dt: float
    S: np.ndarray
    flux_out: np.ndarray  # complex amplitude, us^-1/2

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.S.size) + 0.5) * self.dt

    def emitted_energy(self) -> float:
        return float(np.sum(np.abs(self.flux_out) ** 2) * self.dt)


def _suffix_energy(mode: TemporalMode) -> np.ndarray:
    """R_j = sum_{k>=j} |e_k|^2 dt (suffix-inclusive remaining energy)."""
    w = np.abs(mode.samples) ** 2 * mode.dt
    return np.cumsum(w[::-1])[::-1]


def _prefix_energy(mode: TemporalMode) -> np.ndarray:
    """Prefix-inclusive accumulated energy, mirror of _suffix_energy."""
    w = np.abs(mode.samples) ** 2 * mode.dt
    return np.cumsum(w)


def _shape_to_control(mode, coeffs, opts, accumulated, phase_sign):
    """Common core of emission/storage synthesis.

    ``accumulated`` is the energy integral entering both the amplitude
    denominator and the phase logarithm; ``phase_sign`` is -1 for emission,
    +1 for storage.
    """
    if coeffs.K.real <= 0.0:
        raise ValueError("Re(K) must be positive to synthesize a pulse")
    live = accumulated >= opts.tail_epsilon
    safe = np.where(live, accumulated, 1.0)
    omega_ang = mode.samples / np.sqrt(2.0 * coeffs.K.real * safe)
    if opts.compensate_phase:
        omega_ang = omega_ang * np.exp(
            phase_sign * 1j * coeffs.chirp_ratio * np.log(safe)
        )
    omega = omega_ang / TWO_PI
    omega = np.where(live, omega, 0.0)

    mag = np.abs(omega)
    over = mag > opts.omega_max
    omega = np.where(over, omega * (opts.omega_max / np.where(over, mag, 1.0)), omega)

    times = mode.times
    clamp_time = float(times[np.argmax(over)]) if bool(np.any(over)) else None
    stopped = ~live
    stop_time = float(times[np.argmax(stopped)]) if bool(np.any(stopped)) else None

    w = np.abs(omega) ** 2
    h = np.empty_like(w)
    h[0] = 0.5 * w[0] * mode.dt
    h[1:] = 0.5 * w[0] * mode.dt + np.cumsum(0.5 * (w[1:] + w[:-1]) * mode.dt)
    return ControlPulse(
        t0=mode.t0,
        dt=mode.dt,
        omega=omega,
        h=h,
        compensated=opts.compensate_phase,
        omega_max=opts.omega_max,
        tail_epsilon=opts.tail_epsilon,
        clamp_time=clamp_time,
        stop_time=stop_time,
    )


def emission_control(
    mode: TemporalMode, coeffs: AdiabaticCoeffs, opts: PulseOptions = PulseOptions()
) -> ControlPulse:
    """Control pulse generating photon shape ``mode`` in emission.

    Omega(t) = e(t) / sqrt(2 ReK R(t)) * exp(-i ImK/(2 ReK) ln R(t)) with
    R(t) the remaining mode energy; the phase factor is dropped when
    ``opts.compensate_phase`` is off (chirp left on the photon).
    """
    return _shape_to_control(mode, coeffs, opts, _suffix_energy(mode), phase_sign=-1)


def storage_control(
    mode: TemporalMode, coeffs: AdiabaticCoeffs, opts: PulseOptions = PulseOptions()
) -> ControlPulse:
    """Control pulse absorbing an incoming photon of shape ``mode``.

    Time reversal of emission: the accumulated-energy integral runs from the
    pulse start and the chirp phase carries the opposite sign.
    """
    return _shape_to_control(mode, coeffs, opts, _prefix_energy(mode), phase_sign=+1)


def spin_wave(
    pulse: ControlPulse, coeffs: AdiabaticCoeffs, params: CqedParams
) -> SpinWaveTrajectory:
    """Emission trajectory S(t) = exp(-K h(t)) and the out-field amplitude.

    The out-field carries sqrt(eta_esc * calibration) * L * Omega * S so its
    squared norm integrates to the calibrated emission efficiency.
    """
    h_ang = TWO_PI**2 * pulse.h
    S = np.exp(-coeffs.K * h_ang)
    flux = (
        math.sqrt(params.eta_esc * coeffs.calibration)
        * coeffs.L
        * (TWO_PI * pulse.omega)
        * S
    )
    return SpinWaveTrajectory(t0=pulse.t0, dt=pulse.dt, S=S, flux_out=flux)


def mode_fidelity(f: TemporalMode, g: TemporalMode) -> float:
    """|integral f*(t) g(t) dt|^2 for same-grid modes."""
    if f.n != g.n or abs(f.t0 - g.t0) > 1e-12 or abs(f.dt - g.dt) > 1e-15:
        raise ValueError("grid mismatch; resample first")
    overlap = np.sum(np.conj(f.samples) * g.samples) * f.dt
    return float(abs(overlap) ** 2)


def selection_efficiency(
    input_mode: TemporalMode, accepted: TemporalMode, eta0: float
) -> float:
    """Overlap model of storage selectivity: eta0 * fidelity(input, accepted)."""
    if not 0.0 <= eta0 <= 1.0:
        raise ValueError("eta0 must lie in [0, 1]")
    return eta0 * mode_fidelity(input_mode, accepted)


def time_reverse(mode: TemporalMode) -> TemporalMode:
    """Conjugated, sample-reversed mode about the window midpoint (involution)."""
    return TemporalMode(t0=mode.t0, dt=mode.dt, samples=np.conj(mode.samples[::-1]))


def resample(mode: TemporalMode, t0: float, dt: float, n: int) -> TemporalMode:
    """Linear-interpolation resampling onto a new grid, renormalized."""
    t_new = t0 + (np.arange(n) + 0.5) * dt
    re = np.interp(t_new, mode.times, mode.samples.real, left=0.0, right=0.0)
    im = np.interp(t_new, mode.times, mode.samples.imag, left=0.0, right=0.0)
    return TemporalMode.from_samples(t0, dt, re + 1j * im)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def mode_to_csv(mode: TemporalMode, path) -> None:
    """Serialize to CSV; round trip is bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# temporal_mode t0_us={_fmt(mode.t0)} dt_us={_fmt(mode.dt)} "
            f"n={mode.n} units=us^-0.5\n"
        )
        fh.write("t_us,re,im\n")
        for t, s in zip(mode.times, mode.samples):
            fh.write(f"{_fmt(t)},{_fmt(s.real)},{_fmt(s.imag)}\n")


def mode_from_csv(path) -> TemporalMode:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# temporal_mode"):
            raise ValueError("not a temporal-mode CSV")
        fields = dict(tok.split("=") for tok in header[2:].split()[1:])
        fh.readline()  # column names
        rows = [line.strip().split(",") for line in fh if line.strip()]
    samples = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
    mode = TemporalMode(
        t0=float(fields["t0_us"]), dt=float(fields["dt_us"]), samples=samples
    )
    if mode.n != int(fields["n"]):
        raise ValueError("sample count mismatch in CSV")
    return mode


def pulse_to_csv(pulse: ControlPulse, path) -> None:
    """Serialize to CSV; round trip is bit-exact."""
    clamp = "none" if pulse.clamp_time is None else _fmt(pulse.clamp_time)
    stop = "none" if pulse.stop_time is None else _fmt(pulse.stop_time)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# control_pulse t0_us={_fmt(pulse.t0)} dt_us={_fmt(pulse.dt)} "
            f"n={pulse.n} compensated={int(pulse.compensated)} "
            f"omega_max_mhz={_fmt(pulse.omega_max)} tail_epsilon={_fmt(pulse.tail_epsilon)} "
            f"clamp_time_us={clamp} stop_time_us={stop} units=MHz\n"
        )
        fh.write("t_us,re_omega_mhz,im_omega_mhz,h_mhz2us\n")
        for t, o, h in zip(pulse.times, pulse.omega, pulse.h):
            fh.write(f"{_fmt(t)},{_fmt(o.real)},{_fmt(o.imag)},{_fmt(h)}\n")


def pulse_from_csv(path) -> ControlPulse:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# control_pulse"):
            raise ValueError("not a control-pulse CSV")
        fields = dict(tok.split("=") for tok in header[2:].split()[1:])
        fh.readline()  # column names
        rows = [line.strip().split(",") for line in fh if line.strip()]
    omega = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
    h = np.array([float(r[3]) for r in rows])
    opt = lambda s: None if fields[s] == "none" else float(fields[s])
    pulse = ControlPulse(
        t0=float(fields["t0_us"]),
        dt=float(fields["dt_us"]),
        omega=omega,
        h=h,
        compensated=bool(int(fields["compensated"])),
        omega_max=float(fields["omega_max_mhz"]),
        tail_epsilon=float(fields["tail_epsilon"]),
        clamp_time=opt("clamp_time_us"),
        stop_time=opt("stop_time_us"),
    )
    if pulse.n != int(fields["n"]):
        raise ValueError("sample count mismatch in CSV")
    return pulse
