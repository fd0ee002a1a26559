"""Full master-equation model of the Rb87 D2 atom-cavity emission process.

Basis (fixed ordering, serialization contract):
  atomic index 0..20:   F=1 m=-1,0,+1 | F=2 m=-2..+2 | F'=1 m=-1..+1 |
                        F'=2 m=-2..+2 | F'=3 m=-2..+2
  product index:        atom * 4 + n_plus * 2 + n_minus        (dim 84)
with n_plus / n_minus the {0,1} Fock occupations of the two circular cavity
polarization modes ('plus' couples ground m to excited m+1, 'minus' to m-1;
the coherent signal leaves in 'minus').

Out-coupled and lost photon probabilities are integrated as augmented
components of the same ODE system (rates 2*kappa_c<n> and 2*kappa_l<n>),
which reproduces the bookkeeping of explicit sink levels exactly: sink
populations obey those equations and nothing couples back out of a sink.

The no-jump sector of the same generator is exposed separately
(``coherent_evolve``): it propagates a pure state under H_eff = H - (i/2)
sum(c^dag c) and yields the coherent emission amplitude
sqrt(2 kappa_c) <F=1,m=0; 1_minus | psi(t)>, i.e. the single-photon temporal
mode including its phase, at a fraction of the density-matrix cost.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from . import _integrators
from .cqed import CqedParams, LevelScheme, branching_weight
from .pulses import ControlPulse, TemporalMode, mode_fidelity, resample

TWO_PI = 2.0 * math.pi

__all__ = [
    "IntegratorError",
    "HilbertSpace",
    "CouplingRecord",
    "Operators",
    "SimConfig",
    "SimResult",
    "CoherentEmission",
    "EmissionReport",
    "build_space",
    "build_operators",
    "hamiltonian_at",
    "build_hamiltonian",
    "build_collapse_ops",
    "evolve",
    "coherent_evolve",
    "emission_experiment",
    "simresult_to_csv",
    "simresult_summary",
]


class IntegratorError(RuntimeError):
    """Trace drift or step-control failure during integration."""


GROUND_STATES = [(1, -1), (1, 0), (1, 1)] + [(2, m) for m in range(-2, 3)]
EXCITED_STATES = (
    [(1, m) for m in (-1, 0, 1)]
    + [(2, m) for m in range(-2, 3)]
    + [(3, m) for m in range(-2, 3)]
)


@dataclass(frozen=True)
class HilbertSpace:
    """Atomic + two-mode product space with documented index ordering.

    Atomic states are addressed as ('g', F, m) or ('e', F', m); the level
    tag is required because F=1,2 and F'=1,2 share (F, m) labels.
    """

    ground: tuple
    excited: tuple
    offsets: dict
    delta: float  # single-photon detuning, MHz

    @property
    def n_atom(self) -> int:
        return len(self.ground) + len(self.excited)

    @property
    def dim(self) -> int:
        return self.n_atom * 4

    def atom_index(self, state) -> int:
        kind, f, m = state
        if kind == "g":
            return self.ground.index((f, m))
        return len(self.ground) + self.excited.index((f, m))

    def index(self, state, n_plus: int, n_minus: int) -> int:
        return self.atom_index(state) * 4 + n_plus * 2 + n_minus

    def atom_labels(self):
        labels = [f"F{f}_m{m:+d}" for f, m in self.ground]
        labels += [f"Fp{f}_m{m:+d}" for f, m in self.excited]
        return labels


def build_space(scheme: LevelScheme) -> HilbertSpace:
    """Deterministic basis for the full model (variant-independent)."""
    if not scheme.coupling_table.decay_table:
        raise ValueError("scheme carries no decay table")
    return HilbertSpace(
        ground=tuple(GROUND_STATES),
        excited=tuple(EXCITED_STATES),
        offsets=dict(scheme.hyperfine_offsets),
        delta=scheme.delta,
    )


@dataclass(frozen=True)
class CouplingRecord:
    """One Hamiltonian coupling channel.

    For kind='cavity' the amplitude is the bare coupling g_i in MHz; for
    kind='control' it is the dimensionless dipole ratio multiplying
    Omega(t)/2.  Channels whose target Zeeman state does not exist carry
    amplitude exactly 0 but are kept for countability.
    """

    kind: str
    ground: tuple
    manifold: int
    excited_m: int
    amplitude: float
    mode: Optional[str] = None


@dataclass
class Operators:
    """Static operator content of the model (angular units, rad/us)."""

    space: HilbertSpace
    H0: sp.csr_matrix
    X: sp.csr_matrix
    Y: sp.csr_matrix
    collapse: list
    control_channels: list
    cavity_channels: list
    G0: sp.csr_matrix = field(init=False)
    GX: sp.csr_matrix = field(init=False)
    GY: sp.csr_matrix = field(init=False)
    kappa_c_ang: float = 0.0
    kappa_l_ang: float = 0.0

    def __post_init__(self):
        herm = lambda m: abs(m - m.getH()).max()
        for name, m in (("H0", self.H0), ("X", self.X), ("Y", self.Y)):
            resid = herm(m)
            if resid > 1e-12:
                raise AssertionError(f"{name} hermiticity residual {resid}")
        cc = sum((c.getH() @ c for c in self.collapse), sp.csr_matrix(self.H0.shape, dtype=complex))
        self.G0 = (-1j * self.H0 - 0.5 * cc).tocsr()
        self.GX = (-1j * self.X).tocsr()
        self.GY = (-1j * self.Y).tocsr()


def _mode_annihilator(space: HilbertSpace, mode: str) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for a in range(space.n_atom):
        for np_ in (0, 1):
            for nm in (0, 1):
                if mode == "plus" and np_ == 1:
                    rows.append(a * 4 + 0 * 2 + nm)
                    cols.append(a * 4 + 1 * 2 + nm)
                    vals.append(1.0)
                if mode == "minus" and nm == 1:
                    rows.append(a * 4 + np_ * 2 + 0)
                    cols.append(a * 4 + np_ * 2 + 1)
                    vals.append(1.0)
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(space.dim, space.dim), dtype=complex
    )


def _atom_op(space: HilbertSpace, bra_state, ket_state, value) -> sp.coo_matrix:
    """value * |bra><ket| on the atom, identity on both modes."""
    rows, cols, vals = [], [], []
    bi = space.atom_index(bra_state)
    ki = space.atom_index(ket_state)
    for mode_idx in range(4):
        rows.append(bi * 4 + mode_idx)
        cols.append(ki * 4 + mode_idx)
        vals.append(value)
    return sp.coo_matrix((vals, (rows, cols)), shape=(space.dim, space.dim), dtype=complex)


def build_operators(
    space: HilbertSpace, params: CqedParams, scheme: LevelScheme
) -> Operators:
    """Hamiltonian pieces and collapse operators for the full model.

    Couplings are rescaled to the measured reference transitions (see
    cqed module docstring); the Hamiltonian splits as
    H(t) = H0 + Re(Omega_ang) X + Im(Omega_ang) Y.
    """
    table = scheme.coupling_table
    ref_g = table.c_g[1]
    ref_s = table.c_s[1]
    dim = space.dim
    kw = {}

    # static part: detunings + cavity couplings
    H0 = sp.lil_matrix((dim, dim), dtype=complex)
    for f_e, m_e in space.excited:
        d_ang = TWO_PI * (space.delta - space.offsets[f_e])
        ai = space.atom_index(("e", f_e, m_e))
        for mode_idx in range(4):
            H0[ai * 4 + mode_idx, ai * 4 + mode_idx] = d_ang

    cavity_channels = []
    for mode, q in (("plus", +1), ("minus", -1)):
        a_op = _mode_annihilator(space, mode)
        for m_g in (-1, 0, 1):
            for f_e in (1, 2):
                m_e = m_g + q
                w = branching_weight(f_e, m_e, 1, m_g) if abs(m_e) <= f_e else 0.0
                amp = params.g * w / ref_g
                cavity_channels.append(
                    CouplingRecord(
                        kind="cavity", ground=(1, m_g), manifold=f_e,
                        excited_m=m_e, amplitude=amp, mode=mode,
                    )
                )
                if amp == 0.0:
                    continue
                sig = _atom_op(space, ("e", f_e, m_e), ("g", 1, m_g), 1.0).tocsr()
                term = (-TWO_PI * amp) * (sig @ a_op)
                H0 = H0 + term + term.getH()

    # control couplings: V = sum ratio |e><s|, H_ctrl = -(1/2)(Omega V + h.c.)
    control_channels = []
    V = sp.lil_matrix((dim, dim), dtype=complex)
    for m_g in range(-2, 3):
        for f_e in (1, 2, 3):
            if abs(m_g) > f_e:
                continue
            ratio = branching_weight(f_e, m_g, 2, m_g) / ref_s
            control_channels.append(
                CouplingRecord(
                    kind="control", ground=(2, m_g), manifold=f_e,
                    excited_m=m_g, amplitude=ratio,
                )
            )
            if ratio == 0.0:
                continue
            V = V + _atom_op(space, ("e", f_e, m_g), ("g", 2, m_g), ratio)
    V = V.tocsr()
    X = (-0.5 * (V + V.getH())).tocsr()
    Y = (-0.5j * (V - V.getH())).tocsr()

    gamma_ang = TWO_PI * params.gamma
    collapse = []
    for (exc, gnd), w in sorted(table.decay_table.items()):
        collapse.append(
            _atom_op(
                space, ("g",) + gnd, ("e",) + exc, math.sqrt(2.0 * gamma_ang) * w
            ).tocsr()
        )
    kc_ang = TWO_PI * params.kappa_c
    kl_ang = TWO_PI * params.kappa_l
    for mode in ("plus", "minus"):
        a_op = _mode_annihilator(space, mode)
        collapse.append(math.sqrt(2.0 * kc_ang) * a_op)
        collapse.append(math.sqrt(2.0 * kl_ang) * a_op)

    return Operators(
        space=space,
        H0=H0.tocsr(),
        X=X,
        Y=Y,
        collapse=collapse,
        control_channels=control_channels,
        cavity_channels=cavity_channels,
        kappa_c_ang=kc_ang,
        kappa_l_ang=kl_ang,
    )


def hamiltonian_at(ops: Operators, omega_mhz: complex) -> sp.csr_matrix:
    """H for a control sample Omega/2pi = omega_mhz (Hermitian by construction)."""
    om = TWO_PI * complex(omega_mhz)
    return (ops.H0 + om.real * ops.X + om.imag * ops.Y).tocsr()


def build_hamiltonian(
    space: HilbertSpace,
    params: CqedParams,
    scheme: LevelScheme,
    omega_mhz: complex = 0.0,
) -> sp.csr_matrix:
    """One-shot Hamiltonian at a control sample; see build_operators for the
    reusable split into static and control-quadrature parts."""
    return hamiltonian_at(build_operators(space, params, scheme), omega_mhz)


def build_collapse_ops(space, params, scheme):
    """Collapse operators alone (atomic decays then out/lost per mode)."""
    return build_operators(space, params, scheme).collapse


@dataclass
class SimConfig:
    """Integration window, step control and initial state.

    dt=None selects the fixed-step bound dt * max-rate * 2pi < 0.1; the
    window defaults to the pulse grid plus a cavity-drain margin.
    integrator 'rk4' is the deterministic default, 'adaptive' delegates to
    scipy's DOP853 with the given tolerances (intended for long pulses).
    """

    t_start: Optional[float] = None
    t_stop: Optional[float] = None
    dt: Optional[float] = None
    integrator: str = "rk4"
    rtol: float = 1e-8
    atol: float = 1e-10
    save_points: int = 400
    initial_state: Union[str, tuple] = "emission"
    drain_margin: Optional[float] = None
    use_numba: bool = True
    max_steps: int = 60_000_000


def _fastest_rate(space: HilbertSpace, params: CqedParams, pulse: ControlPulse) -> float:
    return max(
        max(abs(space.delta - off) for off in space.offsets.values()),
        params.kappa,
        params.gamma,
        float(np.max(np.abs(pulse.omega))) if pulse.n else 0.0,
    )


def _auto_dt(space: HilbertSpace, params: CqedParams, pulse: ControlPulse) -> float:
    # fixed-step bound: dt * max-rate * 2pi < 0.1
    return 0.099 / (TWO_PI * _fastest_rate(space, params, pulse))


def _window(config: SimConfig, pulse: ControlPulse, params: CqedParams):
    margin = config.drain_margin
    if margin is None:
        margin = 8.0 / (2.0 * TWO_PI * params.kappa)
    t_start = config.t_start if config.t_start is not None else pulse.t0
    t_stop = (
        config.t_stop
        if config.t_stop is not None
        else pulse.t0 + pulse.n * pulse.dt + margin
    )
    if t_stop <= t_start:
        raise ValueError("empty integration window")
    return t_start, t_stop


def _initial_atom_state(space: HilbertSpace, config: SimConfig):
    if config.initial_state == "emission":
        return ("g", 2, -1), 0, 0
    state, n_p, n_m = config.initial_state
    return tuple(state), int(n_p), int(n_m)


@dataclass
class SimResult:
    """Density-matrix evolution record on the save grid."""

    times: np.ndarray
    atom_pops: np.ndarray  # (n_save, 21)
    n_plus: np.ndarray
    n_minus: np.ndarray
    flux_plus: np.ndarray  # 2 kappa_c <n_plus>, 1/us
    flux_minus: np.ndarray
    out_plus: np.ndarray  # cumulative probabilities
    lost_plus: np.ndarray
    out_minus: np.ndarray
    lost_minus: np.ndarray
    trace: np.ndarray
    atom_labels: list
    dt: float
    n_steps: int

    @property
    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))

    @property
    def out_total(self) -> np.ndarray:
        return self.out_plus + self.out_minus

    @property
    def sinks(self) -> np.ndarray:
        return self.out_plus + self.lost_plus + self.out_minus + self.lost_minus

    @property
    def photon_population(self) -> np.ndarray:
        return self.n_plus + self.n_minus

    @property
    def atom_only_population(self) -> np.ndarray:
        """Zero-photon, not-yet-sunk population in explicit-sink semantics.

        The zero-photon population of this compressed representation absorbs
        the sink probability; subtracting the accumulators recovers the
        partition an explicit-sink basis would report.
        """
        return self.trace - self.photon_population - self.sinks

    @property
    def bookkeeping_total(self) -> np.ndarray:
        """atom-only + photon + out-coupled + lost (explicit-sink partition)."""
        return self.atom_only_population + self.photon_population + self.sinks


def _superoperator(ops: Operators):
    dim = ops.space.dim
    eye = sp.identity(dim, dtype=complex, format="csr")

    def two_sided(G):
        return sp.kron(G, eye, format="csr") + sp.kron(eye, G.conjugate(), format="csr")

    L0 = two_sided(ops.G0)
    for c in ops.collapse:
        L0 = L0 + sp.kron(c, c.conjugate(), format="csr")
    LX = two_sided(ops.GX)
    LY = two_sided(ops.GY)

    # augmented rows integrating out-coupled / lost probabilities
    # (photon population decays at 2 kappa, twice the field rate)
    n_vec = dim * dim
    acc_rows = []
    for mode, rate in (("plus", 2.0 * ops.kappa_c_ang), ("plus", 2.0 * ops.kappa_l_ang),
                       ("minus", 2.0 * ops.kappa_c_ang), ("minus", 2.0 * ops.kappa_l_ang)):
        cols, vals = [], []
        for a in range(ops.space.n_atom):
            for np_ in (0, 1):
                for nm in (0, 1):
                    occ = np_ if mode == "plus" else nm
                    if occ == 1:
                        i = a * 4 + np_ * 2 + nm
                        cols.append(i * dim + i)
                        vals.append(rate)
        acc_rows.append(sp.coo_matrix((vals, ([0] * len(cols), cols)), shape=(1, n_vec)))
    W = sp.vstack(acc_rows, format="csr")

    def pad(L, with_acc):
        top = sp.hstack([L, sp.csr_matrix((n_vec, 4), dtype=complex)], format="csr")
        if with_acc:
            bottom = sp.hstack([W.astype(complex), sp.csr_matrix((4, 4), dtype=complex)], format="csr")
        else:
            bottom = sp.csr_matrix((4, n_vec + 4), dtype=complex)
        return sp.vstack([top, bottom], format="csr")

    return pad(L0, True), pad(LX, False), pad(LY, False)


def evolve(
    ops: Operators,
    config: SimConfig,
    pulse: ControlPulse,
    params: CqedParams,
) -> SimResult:
    """Integrate the Lindblad dynamics and record populations and fluxes."""
    space = ops.space
    dim = space.dim
    t_start, t_stop = _window(config, pulse, params)
    dt = config.dt if config.dt is not None else _auto_dt(space, params, pulse)
    if config.integrator == "rk4" and dt * TWO_PI * _fastest_rate(space, params, pulse) >= 0.1:
        warnings.warn(
            "fixed step does not resolve the fastest rate "
            "(dt * max-rate * 2pi >= 0.1); results may be inaccurate"
        )
    n_steps = max(1, int(math.ceil((t_stop - t_start) / dt)))
    if n_steps > config.max_steps:
        raise IntegratorError(
            f"{n_steps} steps exceed max_steps={config.max_steps}; "
            "use integrator='adaptive' or a coarser window"
        )
    dt = (t_stop - t_start) / n_steps

    state, n_p, n_m = _initial_atom_state(space, config)
    i0 = space.index(state, n_p, n_m)
    y0 = np.zeros(dim * dim + 4, dtype=complex)
    y0[i0 * dim + i0] = 1.0

    diag_positions = [i * dim + i for i in range(dim)]
    save_positions = diag_positions + [dim * dim + k for k in range(4)]

    L0, LX, LY = _superoperator(ops)
    pulse_re = TWO_PI * pulse.omega.real
    pulse_im = TWO_PI * pulse.omega.imag

    if config.integrator == "adaptive":
        times, saves = _evolve_adaptive(
            L0, LX, LY, y0, t_start, t_stop, config, pulse, save_positions
        )
        n_steps_eff = -1
    else:
        # align the save grid with t_stop: steps are a multiple of the stride
        stride = max(1, math.ceil(n_steps / max(1, config.save_points - 1)))
        n_steps = stride * math.ceil(n_steps / stride)
        dt = (t_stop - t_start) / n_steps
        saves, _ = _integrators.run_fixed_rk4(
            L0, LX, LY, y0, t_start, dt, n_steps,
            pulse.t0, pulse.dt, pulse_re, pulse_im,
            save_positions, stride, use_numba=config.use_numba,
        )
        times = t_start + np.arange(saves.shape[0]) * stride * dt
        n_steps_eff = n_steps

    diag = saves[:, :dim].real
    acc = saves[:, dim:].real
    occ = diag.reshape(-1, space.n_atom, 4)
    atom_pops = occ.sum(axis=2)
    n_plus = occ[:, :, 2].sum(axis=1) + occ[:, :, 3].sum(axis=1)
    n_minus = occ[:, :, 1].sum(axis=1) + occ[:, :, 3].sum(axis=1)
    trace = diag.sum(axis=1)

    result = SimResult(
        times=times,
        atom_pops=atom_pops,
        n_plus=n_plus,
        n_minus=n_minus,
        flux_plus=2.0 * ops.kappa_c_ang * n_plus,
        flux_minus=2.0 * ops.kappa_c_ang * n_minus,
        out_plus=acc[:, 0],
        lost_plus=acc[:, 1],
        out_minus=acc[:, 2],
        lost_minus=acc[:, 3],
        trace=trace,
        atom_labels=space.atom_labels(),
        dt=dt,
        n_steps=n_steps_eff,
    )
    if result.trace_drift > 1e-5:
        raise IntegratorError(
            f"trace drift {result.trace_drift:.3e} exceeds 1e-5 "
            f"(dt={dt:.3e}, steps={n_steps_eff})"
        )
    return result


def _evolve_adaptive(L0, LX, LY, y0, t_start, t_stop, config, pulse, save_positions):
    from scipy.integrate import solve_ivp

    pulse_re = TWO_PI * pulse.omega.real
    pulse_im = TWO_PI * pulse.omega.imag

    def rhs(t, v):
        wr, wi = _integrators._pulse_at_py(t, pulse.t0, pulse.dt, pulse_re, pulse_im)
        out = L0 @ v
        if wr:
            out = out + wr * (LX @ v)
        if wi:
            out = out + wi * (LY @ v)
        return out

    t_eval = np.linspace(t_start, t_stop, config.save_points)
    sol = solve_ivp(
        rhs, (t_start, t_stop), y0, method="DOP853",
        rtol=config.rtol, atol=config.atol, t_eval=t_eval,
    )
    if not sol.success:
        raise IntegratorError(f"adaptive integrator failed: {sol.message}")
    saves = sol.y.T[:, save_positions]
    return sol.t, saves


@dataclass
class CoherentEmission:
    """No-jump (coherent-channel) emission record.

    ``amplitude`` is sqrt(2 kappa_c) times the cavity amplitude of the
    signal polarization: the temporal wave function of the coherently
    emitted photon.  Its squared norm integrates to the coherent-mode
    efficiency.
    """

    times: np.ndarray
    amplitude: np.ndarray
    efficiency: float
    norm_final: float
    dt: float
    n_steps: int

    def mode(self) -> TemporalMode:
        dt = float(self.times[1] - self.times[0])
        return TemporalMode.from_samples(
            float(self.times[0]) - 0.5 * dt, dt, self.amplitude
        )


def coherent_evolve(
    ops: Operators,
    config: SimConfig,
    pulse: ControlPulse,
    params: CqedParams,
    save_points: int = 2000,
) -> CoherentEmission:
    """Propagate the no-jump pure state and extract the coherent photon mode."""
    space = ops.space
    t_start, t_stop = _window(config, pulse, params)
    dt = config.dt if config.dt is not None else _auto_dt(space, params, pulse)
    n_steps = max(1, int(math.ceil((t_stop - t_start) / dt)))
    if n_steps > config.max_steps:
        raise IntegratorError(f"{n_steps} steps exceed max_steps")
    dt = (t_stop - t_start) / n_steps

    state, n_p, n_m = _initial_atom_state(space, config)
    y0 = np.zeros(space.dim, dtype=complex)
    y0[space.index(state, n_p, n_m)] = 1.0

    signal_idx = space.index(("g", 1, 0), 0, 1)
    stride = max(1, math.ceil(n_steps / max(1, save_points - 1)))
    n_steps = stride * math.ceil(n_steps / stride)
    dt = (t_stop - t_start) / n_steps
    saves, y_final = _integrators.run_fixed_rk4(
        ops.G0, ops.GX, ops.GY, y0, t_start, dt, n_steps,
        pulse.t0, pulse.dt, TWO_PI * pulse.omega.real, TWO_PI * pulse.omega.imag,
        [signal_idx], stride, use_numba=config.use_numba,
    )
    times = t_start + np.arange(saves.shape[0]) * stride * dt
    amp = math.sqrt(2.0 * ops.kappa_c_ang) * saves[:, 0]
    eff = float(np.trapezoid(np.abs(amp) ** 2, times))
    return CoherentEmission(
        times=times,
        amplitude=amp,
        efficiency=eff,
        norm_final=float(np.linalg.norm(y_final) ** 2),
        dt=dt,
        n_steps=n_steps,
    )


@dataclass
class EmissionReport:
    """Polarization-resolved emission outcome."""

    pulse: ControlPulse
    sim: Optional[SimResult]
    coherent: Optional[CoherentEmission]
    efficiency_signal: float
    efficiency_total: float
    coherent_efficiency: float
    incoherent_fraction: float
    amplitude_fidelity: float


def emission_experiment(
    params: CqedParams,
    scheme: LevelScheme,
    target: TemporalMode,
    pulse: ControlPulse,
    config: Optional[SimConfig] = None,
    mode: str = "both",
) -> EmissionReport:
    """Drive the full model with a synthesized pulse and tally the outcome.

    mode: 'full' (density matrix only), 'coherent' (no-jump only) or 'both'.
    """
    config = config or SimConfig()
    space = build_space(scheme)
    ops = build_operators(space, params, scheme)

    sim = None
    coherent = None
    if mode in ("full", "both"):
        sim = evolve(ops, config, pulse, params)
    if mode in ("coherent", "both"):
        coherent = coherent_evolve(ops, config, pulse, params)

    eff_signal = float(sim.out_minus[-1]) if sim else 0.0
    eff_total = float(sim.out_total[-1]) if sim else 0.0
    eff_coh = coherent.efficiency if coherent else 0.0

    if sim is not None and eff_total > 0:
        incoherent = max(0.0, eff_total - eff_coh) / eff_total if coherent else float("nan")
    else:
        incoherent = 0.0

    if coherent is not None:
        emitted = coherent.mode()
        target_rs = resample(target, emitted.t0, emitted.dt, emitted.n)
        fid = mode_fidelity(emitted, target_rs)
    elif sim is not None:
        amp = np.sqrt(np.maximum(sim.flux_minus, 0.0))
        norm = math.sqrt(float(np.trapezoid(amp**2, sim.times)))
        if norm > 0:
            dt_s = float(sim.times[1] - sim.times[0])
            emitted = TemporalMode.from_samples(float(sim.times[0]) - 0.5 * dt_s, dt_s, amp / norm)
            target_rs = resample(target, emitted.t0, emitted.dt, emitted.n)
            fid = mode_fidelity(
                emitted,
                TemporalMode.from_samples(target_rs.t0, target_rs.dt, np.abs(target_rs.samples)),
            )
        else:
            fid = 0.0
    else:
        fid = float("nan")

    return EmissionReport(
        pulse=pulse,
        sim=sim,
        coherent=coherent,
        efficiency_signal=eff_signal,
        efficiency_total=eff_total,
        coherent_efficiency=eff_coh,
        incoherent_fraction=incoherent,
        amplitude_fidelity=fid,
    )


def simresult_to_csv(result: SimResult, path) -> None:
    cols = (
        ["t_us"]
        + [f"pop_{lab}" for lab in result.atom_labels]
        + ["n_plus", "n_minus", "flux_plus", "flux_minus",
           "out_plus", "lost_plus", "out_minus", "lost_minus", "trace"]
    )
    data = np.column_stack(
        [
            result.times, result.atom_pops,
            result.n_plus, result.n_minus,
            result.flux_plus, result.flux_minus,
            result.out_plus, result.lost_plus,
            result.out_minus, result.lost_minus,
            result.trace,
        ]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")


def simresult_summary(result: SimResult, coherent: Optional[CoherentEmission] = None) -> dict:
    out = {
        "efficiency_signal": float(result.out_minus[-1]),
        "efficiency_total": float(result.out_total[-1]),
        "lost_total": float(result.lost_plus[-1] + result.lost_minus[-1]),
        "trace_drift": result.trace_drift,
        "dt_us": result.dt,
        "n_steps": result.n_steps,
    }
    if coherent is not None:
        out["coherent_efficiency"] = coherent.efficiency
        tot = out["efficiency_total"]
        out["incoherent_fraction"] = (
            max(0.0, tot - coherent.efficiency) / tot if tot > 0 else 0.0
        )
    return out
