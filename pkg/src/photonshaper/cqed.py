"""Cavity-QED parameters, level schemes and the adiabatic transfer model.

Units convention
----------------
All rates (g, kappa_c, kappa_l, gamma) and detunings are stored as *linear*
frequencies in MHz; the 2*pi factor is applied once, at formula-evaluation
boundaries, where quantities become angular (rad/us).  Times are in us.
``AdiabaticCoeffs`` holds angular quantities: ``a`` and ``b`` in rad/us,
``K`` in us, ``L`` in sqrt(us).

Coupling-coefficient convention
-------------------------------
``CouplingTable`` stores decay-normalized dipole amplitudes (per excited
state the squared amplitudes over all decay channels sum to one, so every
coefficient has magnitude <= 1).  The transfer model and the master-equation
simulator rescale them to the measured reference transitions (cavity leg
|F=1,m=0> <-> |F'=1,m'=-1>, control leg |F=2,m=-1> <-> |F'=1,m'=-1>), i.e.
the g and Omega supplied by the user are the couplings *on those
transitions*, and other channels scale by dipole ratios.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .wigner import wigner_3j, wigner_6j

TWO_PI = 2.0 * math.pi

__all__ = [
    "ConfigurationError",
    "DegenerateDenominatorError",
    "CqedParams",
    "Variant",
    "CouplingTable",
    "LevelScheme",
    "AdiabaticCoeffs",
    "ReferenceData",
    "load_reference_data",
    "branching_weight",
    "build_coupling_table",
    "build_scheme",
    "adiabatic_coeffs",
    "emission_efficiency",
    "efficiency_sweep",
    "EfficiencySweep",
]


class ConfigurationError(ValueError):
    """Missing or malformed reference/configuration data."""


_REF_CACHE: dict = {}


class DegenerateDenominatorError(ArithmeticError):
    """a1*a2 - b^2 vanished; the coupled two-manifold system is singular."""


@dataclass(frozen=True)
class CqedParams:
    """Atom-cavity rate constants, linear frequencies in MHz.

    g is the light-matter coupling on the reference cavity transition,
    kappa_c the field decay rate through the output mirror, kappa_l the
    field decay rate into losses, gamma the atomic polarization decay rate.
    """

    g: float
    kappa_c: float
    kappa_l: float
    gamma: float

    def __post_init__(self):
        for name in ("g", "kappa_c", "kappa_l", "gamma"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def kappa(self) -> float:
        return self.kappa_c + self.kappa_l

    @property
    def cooperativity(self) -> float:
        """C = g^2 / (2 kappa gamma); dimensionless."""
        return self.g**2 / (2.0 * self.kappa * self.gamma)

    @property
    def eta_esc(self) -> float:
        """Escape efficiency kappa_c / (kappa_c + kappa_l)."""
        return self.kappa_c / self.kappa

    @property
    def ideal_efficiency(self) -> float:
        """eta_esc * 2C/(2C+1), the lossless-transfer anchor."""
        c = self.cooperativity
        return self.eta_esc * 2.0 * c / (2.0 * c + 1.0)


class Variant(enum.Enum):
    """How many excited hyperfine manifolds the transfer model keeps."""

    ONE_LEVEL = 1
    TWO_LEVEL = 2
    THREE_LEVEL = 3


@dataclass(frozen=True)
class ReferenceData:
    """Atomic structure constants loaded from the reference-data file."""

    species: str
    nuclear_spin: float
    j_ground: float
    j_excited: float
    ground_f: tuple
    excited_f: tuple
    hyperfine_offsets: dict  # F' -> offset from F'=1 in MHz, increasing
    cavity_transition: tuple  # (F_g, m_g, F_e, m_e)
    control_transition: tuple


def load_reference_data(path: Optional[str] = None) -> ReferenceData:
    """Load atomic reference data (default: bundled Rb87 D2 values)."""
    if path is None and "default" in _REF_CACHE:
        return _REF_CACHE["default"]
    try:
        if path is None:
            raw = resources.files("photonshaper.data").joinpath("rb87_d2.json").read_text()
        else:
            with open(path, "r", encoding="utf-8") as fh:
                raw = fh.read()
        data = json.loads(raw)
        offsets = {int(k): float(v) for k, v in data["hyperfine_offsets_mhz"].items()}
        cav = data["reference_transitions"]["cavity"]
        ctl = data["reference_transitions"]["control"]
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigurationError(f"reference data unavailable or malformed: {exc}") from exc
    fs = sorted(offsets)
    if any(offsets[a] >= offsets[b] for a, b in zip(fs, fs[1:])):
        raise ConfigurationError("hyperfine offsets must increase with F'")
    ref = ReferenceData(
        species=data["species"],
        nuclear_spin=float(data["nuclear_spin"]),
        j_ground=float(data["J_ground"]),
        j_excited=float(data["J_excited"]),
        ground_f=tuple(data["ground_F"]),
        excited_f=tuple(data["excited_F"]),
        hyperfine_offsets=offsets,
        cavity_transition=(cav["F_ground"], cav["m_ground"], cav["F_excited"], cav["m_excited"]),
        control_transition=(ctl["F_ground"], ctl["m_ground"], ctl["F_excited"], ctl["m_excited"]),
    )
    if path is None:
        _REF_CACHE["default"] = ref
    return ref


def branching_weight(f_e, m_e, f_g, m_g, *, j_ground=0.5, j_excited=1.5, nuclear_spin=1.5):
    """Signed decay-normalized dipole amplitude for |F'_e m_e> -> |F_g m_g>.

    For each excited state the squares over all dipole-allowed decay
    channels sum to one.  Forbidden channels (selection-rule violations)
    return exactly 0.0.
    """
    q = m_g - m_e
    if abs(q) > 1:
        return 0.0
    pre = math.sqrt((2 * j_excited + 1) * (2 * f_g + 1) * (2 * f_e + 1))
    sixj = wigner_6j(j_ground, j_excited, 1, f_e, f_g, nuclear_spin)
    threej = wigner_3j(f_g, 1, f_e, -m_g, q, m_e)
    phase = (-1) ** int(f_e + j_ground + 1 + nuclear_spin) * (-1) ** int(f_g - m_g)
    return phase * pre * sixj * threej


@dataclass(frozen=True)
class CouplingTable:
    """Decay-normalized coupling coefficients for the working transitions.

    c_g[F'] couples the cavity leg |F=1,m=0> <-> |F',m'=-1| (F' in {1,2});
    c_s[F'] couples the control leg |F=2,m=-1> <-> |F',m'=-1> (F' in
    {1,2,3}).  ``decay_table`` maps ((F_e, m_e), (F_g, m_g)) to the signed
    branching amplitude for every dipole decay channel of the excited basis.
    """

    c_g: dict
    c_s: dict
    decay_table: dict

    def __post_init__(self):
        for coeffs in (self.c_g, self.c_s):
            for v in coeffs.values():
                if abs(v) > 1.0 + 1e-12:
                    raise ValueError("coupling coefficient magnitude exceeds 1")

    def branching_sums(self) -> dict:
        """Sum of squared branching amplitudes per excited state."""
        sums: dict = {}
        for (exc, _g), w in self.decay_table.items():
            sums[exc] = sums.get(exc, 0.0) + w * w
        return sums


def _excited_states(reference: ReferenceData):
    """The pi-coupled excited Zeeman states, in fixed basis order."""
    states = []
    for f_e in reference.excited_f:
        for m in range(-f_e, f_e + 1):
            if abs(m) <= 2:  # pi-coupled from F=2 (m' = m, |m| <= 2)
                states.append((f_e, m))
    return states


def _ground_states(reference: ReferenceData):
    states = []
    for f_g in reference.ground_f:
        for m in range(-f_g, f_g + 1):
            states.append((f_g, m))
    return states


_TABLE_CACHE: dict = {}


def build_coupling_table(reference: Optional[ReferenceData] = None) -> CouplingTable:
    """Evaluate all coupling coefficients from angular-momentum algebra."""
    ref = reference or load_reference_data()
    if reference is None and "default" in _TABLE_CACHE:
        return _TABLE_CACHE["default"]
    kwargs = dict(
        j_ground=ref.j_ground,
        j_excited=ref.j_excited,
        nuclear_spin=ref.nuclear_spin,
    )
    f_gc, m_gc, _, m_ec = ref.cavity_transition
    f_gs, m_gs, _, m_es = ref.control_transition
    c_g = {f_e: branching_weight(f_e, m_ec, f_gc, m_gc, **kwargs) for f_e in (1, 2)}
    c_s = {f_e: branching_weight(f_e, m_es, f_gs, m_gs, **kwargs) for f_e in (1, 2, 3)}
    decay = {}
    for exc in _excited_states(ref):
        for gnd in _ground_states(ref):
            w = branching_weight(exc[0], exc[1], gnd[0], gnd[1], **kwargs)
            if w != 0.0:
                decay[(exc, gnd)] = w
    table = CouplingTable(c_g=c_g, c_s=c_s, decay_table=decay)
    if reference is None:
        _TABLE_CACHE["default"] = table
    return table


@dataclass(frozen=True)
class LevelScheme:
    """Excited-manifold detunings and couplings for one model variant.

    ``delta`` is the single-photon detuning from F'=1 in MHz; the
    per-manifold detunings follow as delta_i = delta - offset(F'=i).
    Variant masking zeroes the couplings of manifolds the model excludes.
    """

    variant: Variant
    delta: float
    hyperfine_offsets: dict
    coupling_table: CouplingTable

    def delta_i(self, f_e: int) -> float:
        return self.delta - self.hyperfine_offsets[f_e]

    def masked_couplings(self):
        """(c_g, c_s) dicts with the variant mask applied."""
        c_g = dict(self.coupling_table.c_g)
        c_s = dict(self.coupling_table.c_s)
        if self.variant is Variant.ONE_LEVEL:
            c_s[2] = c_s[3] = 0.0
            c_g[2] = 0.0
        elif self.variant is Variant.TWO_LEVEL:
            c_s[3] = 0.0
        return c_g, c_s


def build_scheme(
    params: CqedParams,
    delta: float,
    variant: Variant,
    reference: Optional[ReferenceData] = None,
) -> LevelScheme:
    """Assemble a LevelScheme at single-photon detuning ``delta`` (MHz)."""
    if params is None:
        raise ConfigurationError("CqedParams required")
    ref = reference or load_reference_data()
    table = build_coupling_table(ref)
    return LevelScheme(
        variant=variant,
        delta=float(delta),
        hyperfine_offsets=dict(ref.hyperfine_offsets),
        coupling_table=table,
    )


@dataclass(frozen=True)
class AdiabaticCoeffs:
    """Intermediate quantities of the adiabatic solution (angular units).

    a[j] = gamma(1+2C_j) + i Delta_j in rad/us, b = g1 g2 / kappa in rad/us,
    K in us, L in sqrt(us).  ``calibration`` is the global factor applied to
    |L|^2/(2 Re K) so the one-manifold, resonant, unit-coefficient limit
    reproduces 2C/(2C+1).
    """

    a: tuple
    b: float
    K: complex
    L: complex
    calibration: float

    @property
    def chirp_ratio(self) -> float:
        """Im(K) / (2 Re K): the light-shift phase per unit log remaining energy."""
        return self.K.imag / (2.0 * self.K.real)

    @property
    def transfer_efficiency(self) -> float:
        """Calibrated |L|^2/(2 Re K), before the escape factor."""
        return self.calibration * abs(self.L) ** 2 / (2.0 * self.K.real)


def _kl_from_inputs(a1, a2, a3, b, c_s, c_g, gamma_ang, coop):
    """K and L from already-assembled angular inputs.

    Raises DegenerateDenominatorError if a1*a2 - b^2 is numerically zero.
    Unreachable for physical parameters (Re(a1 a2 - b^2) >= gamma^2 (1 +
    2C1 + 2C2) > 0) but guarded for direct construction.
    """
    det = a1 * a2 - b * b
    scale = max(abs(a1 * a2), b * b, 1.0)
    if abs(det) < 1e-12 * scale:
        raise DegenerateDenominatorError("a1*a2 - b^2 is numerically singular")
    bracket = (c_s[1] ** 2 * a2 + c_s[2] ** 2 * a1 - 2.0 * c_s[1] * c_s[2] * b) / det
    if c_s[3] != 0.0:
        bracket = bracket + c_s[3] ** 2 / a3
    K = 0.25 * bracket
    L = (
        0.5
        * math.sqrt(2.0 * gamma_ang * coop)
        * (c_g[1] * (a2 * c_s[1] - c_s[2] * b) + c_g[2] * (a1 * c_s[2] - c_s[1] * b))
        / (b * b - a1 * a2)
    )
    return K, L


def _calibration(params: CqedParams) -> float:
    """Ratio fixing the resonant one-manifold limit to 2C/(2C+1).

    The closed form evaluates to exactly 2; it is recomputed here rather
    than hard-coded so the anchor stays tied to the formulas.
    """
    coop = params.cooperativity
    gamma_ang = TWO_PI * params.gamma
    a1 = gamma_ang * (1.0 + 2.0 * coop)
    k0 = 0.25 / a1
    l0 = -0.5 * math.sqrt(2.0 * gamma_ang * coop) / a1
    uncal = l0 * l0 / (2.0 * k0)
    ideal = 2.0 * coop / (2.0 * coop + 1.0)
    return ideal / uncal


def adiabatic_coeffs(params: CqedParams, scheme: LevelScheme) -> AdiabaticCoeffs:
    """Evaluate a_j, b, K and L for the given parameters and scheme.

    Couplings are rescaled to the reference transitions before entering the
    closed forms (see module docstring), so c_s1 = c_g1 = 1 effectively.
    """
    c_g_raw, c_s_raw = scheme.masked_couplings()
    ref_g = scheme.coupling_table.c_g[1]
    ref_s = scheme.coupling_table.c_s[1]
    c_g = {j: c_g_raw.get(j, 0.0) / ref_g for j in (1, 2)}
    c_g[3] = 0.0
    c_s = {j: c_s_raw.get(j, 0.0) / ref_s for j in (1, 2, 3)}

    coop = params.cooperativity
    gamma_ang = TWO_PI * params.gamma
    coops = {j: c_g[j] ** 2 * coop for j in (1, 2, 3)}
    a = tuple(
        gamma_ang * (1.0 + 2.0 * coops[j]) + 1j * TWO_PI * scheme.delta_i(j)
        for j in (1, 2, 3)
    )
    b = c_g[1] * c_g[2] * TWO_PI * params.g**2 / params.kappa
    K, L = _kl_from_inputs(a[0], a[1], a[2], b, c_s, c_g, gamma_ang, coop)
    if K.real <= 0.0 and (c_s[1] or c_s[2] or c_s[3]):
        raise ArithmeticError("Re(K) <= 0 for a driven scheme; inputs unphysical")
    return AdiabaticCoeffs(a=a, b=b, K=K, L=L, calibration=_calibration(params))


def emission_efficiency(params: CqedParams, scheme: LevelScheme) -> float:
    """Detuning-dependent emission/absorption efficiency.

    eta = eta_esc * calibration * |L|^2 / (2 Re K).  Values above 1 are
    reported as-is with a warning (never silently clamped).
    """
    coeffs = adiabatic_coeffs(params, scheme)
    eta = params.eta_esc * coeffs.transfer_efficiency
    if eta > 1.0 + 1e-9:
        warnings.warn(f"efficiency {eta:.6f} exceeds 1; inputs likely unphysical")
    return eta


@dataclass(frozen=True)
class EfficiencySweep:
    """Detuning sweep of the transfer efficiency for one model variant."""

    variant: Variant
    deltas: np.ndarray
    eta: np.ndarray
    errors: tuple = ()

    def minimum(self):
        """(delta, eta) at the sweep minimum, ignoring failed points."""
        idx = int(np.nanargmin(self.eta))
        return float(self.deltas[idx]), float(self.eta[idx])


def efficiency_sweep(
    params: CqedParams,
    variant: Variant,
    delta_range: tuple,
    n_points: int,
    reference: Optional[ReferenceData] = None,
) -> EfficiencySweep:
    """Sweep eta(Delta) over ``delta_range`` (MHz) on a monotone grid.

    Per-point failures are recorded in ``errors`` and show up as NaN in the
    curve; they never abort the sweep.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    ref = reference or load_reference_data()
    deltas = np.linspace(delta_range[0], delta_range[1], n_points)
    eta = np.empty(n_points)
    errors = []
    for i, d in enumerate(deltas):
        try:
            eta[i] = emission_efficiency(params, build_scheme(params, d, variant, ref))
        except (DegenerateDenominatorError, ArithmeticError) as exc:
            eta[i] = np.nan
            errors.append((float(d), repr(exc)))
    return EfficiencySweep(variant=variant, deltas=deltas, eta=eta, errors=tuple(errors))
