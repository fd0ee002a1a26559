"""Temporal-mode tomography from fixed-phase homodyne quadrature records.

Records are shot-noise normalized: vacuum variance per time bin equals one,
so the vacuum autocorrelation is the identity and the vacuum-normalized
correlation of a field with mean photon number n_i in temporal mode f_i has
eigenvalue kappa_i = 2 n_i + 1 on that mode.  Eigenfunctions are
dt-orthonormal (sum f_i f_j dt = delta_ij).

A complex signal mode g occupied with probability p1 contributes
2 p1 (Re g Re g^T + Im g Im g^T) dt to the correlation: exactly two
eigenvalues above one, with occupations n_1 + n_2 = p1 given by the Gram
matrix of (Re g, Im g).  The reconstruction
f = (sqrt(n1) f_1 + i sqrt(n2) f_2)/sqrt(n1+n2) recovers g up to a global
phase and the documented two-fold sign ambiguity (f vs f*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pulses import TemporalMode, resample

__all__ = [
    "MultimodeSignalError",
    "NoSignalError",
    "QuadratureRecords",
    "ModeDecomposition",
    "ReconstructedMode",
    "PhotonStats",
    "BudgetResult",
    "exact_mode_split",
    "synth_records",
    "autocorrelation",
    "jacobi_eigh",
    "vacuum_eigenvalue_threshold",
    "decompose",
    "decomposition_to_json",
    "reconstruct_mode",
    "photon_stats",
    "loss_budget",
    "save_records",
    "load_records",
]


class MultimodeSignalError(RuntimeError):
    """More than two significant eigenvalues: the signal is not a single mode."""


class NoSignalError(RuntimeError):
    """No eigenvalue rises above the vacuum significance threshold."""


@dataclass(frozen=True)
class QuadratureRecords:
    """trials x n_bins real matrix of shot-noise-normalized quadratures."""

    t0: float
    dt: float
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float))
        if self.data.ndim != 2:
            raise ValueError("records must be a trials x n_bins matrix")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("records contain non-finite entries")

    @property
    def trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n_bins) + 0.5) * self.dt


def exact_mode_split(mode: TemporalMode, p1: float, t0: float, dt: float, n_bins: int):
    """Occupations (n1, n2) and dt-orthonormal (f1, f2) of sqrt(p1) * mode.

    Resamples the mode onto the record grid, splits it into real and
    imaginary quadrature components and diagonalizes their 2x2 Gram matrix.
    f2 is None for a real (single-component) mode.
    """
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    rs = resample(mode, t0, dt, n_bins)
    u = math.sqrt(p1) * rs.samples.real
    v = math.sqrt(p1) * rs.samples.imag
    gram = dt * np.array([[u @ u, u @ v], [u @ v, v @ v]])
    vals, vecs = np.linalg.eigh(gram)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    basis = np.stack([u, v])
    modes = []
    for k in range(2):
        if vals[k] <= 1e-14 * max(1.0, vals[0]):
            modes.append(None)
            continue
        f = (vecs[:, k] @ basis) / math.sqrt(vals[k])
        modes.append(f)
    return float(vals[0]), float(max(vals[1], 0.0)), modes[0], modes[1]


def synth_records(
    mode: Optional[TemporalMode],
    p1: float,
    trials: int,
    t0: float,
    dt: float,
    n_bins: int,
    seed: int,
    generator: str = "gaussian",
) -> QuadratureRecords:
    """Synthesize homodyne records for a vacuum/single-photon mixture.

    generator='gaussian' draws records with the exact second moments
    I + 2 n1 f1 f1^T dt + 2 n2 f2 f2^T dt (all the mode-reconstruction
    pipeline consumes); 'fock_mixture' additionally reproduces the
    non-Gaussian single-photon quadrature density on the mode components
    (required by photon-number estimation).  mode=None or p1=0 gives pure
    shot noise.
    """
    if n_bins < 2 or trials < 1:
        raise ValueError("degenerate record grid")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((trials, n_bins))
    if mode is None or p1 == 0.0:
        return QuadratureRecords(t0=t0, dt=dt, data=x)

    n1, n2, f1, f2 = exact_mode_split(mode, p1, t0, dt, n_bins)
    comps = [(n1, f1)] + ([(n2, f2)] if f2 is not None else [])
    if generator == "gaussian":
        for n_i, f_i in comps:
            w = rng.standard_normal(trials)
            x += np.outer(w * math.sqrt(2.0 * n_i * dt), f_i)
        return QuadratureRecords(t0=t0, dt=dt, data=x)
    if generator != "fock_mixture":
        raise ValueError(f"unknown generator {generator!r}")

    # replace the mode-component quadratures by exact Fock-mixture draws
    units = [math.sqrt(dt) * f_i for _, f_i in comps]
    r = n1 / p1
    probs = rng.random(trials)
    which = np.full(trials, -1)  # -1 vacuum, 0 photon in f1, 1 photon in f2
    which[probs < n1] = 0
    if f2 is not None:
        which[(probs >= n1) & (probs < n1 + n2)] = 1
    for k, unit in enumerate(units):
        q = x @ unit
        x -= np.outer(q, unit)  # strip the shot noise in this component
        fresh = rng.standard_normal(trials)
        excited = which == k
        # Fock-1 quadrature: |y| = sqrt(chi2(3)), random sign
        y = np.sqrt(rng.chisquare(3, size=trials)) * np.where(
            rng.random(trials) < 0.5, 1.0, -1.0
        )
        q_new = np.where(excited, y, fresh)
        x += np.outer(q_new, unit)
    return QuadratureRecords(t0=t0, dt=dt, data=x)


def autocorrelation(records: QuadratureRecords, subtract_mean: bool = False) -> np.ndarray:
    """Sample second-moment matrix <x(t) x(t')> over trials."""
    x = records.data
    if x.shape[0] < 2:
        raise ValueError("need at least two trials")
    if subtract_mean:
        x = x - x.mean(axis=0, keepdims=True)
        return (x.T @ x) / (x.shape[0] - 1)
    return (x.T @ x) / x.shape[0]


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 60):
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Returns (eigenvalues, eigenvectors-as-columns) sorted descending.
    Convergence: off-diagonal Frobenius norm below tol * ||a||_F.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(a - a.T)) > 1e-9 * max(1.0, np.max(np.abs(a))):
        raise ValueError("matrix is not symmetric within 1e-9")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(a**2) - np.sum(np.diag(a) ** 2)))
        if off <= tol * max(norm, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                # small root of t^2 - 2 theta t - 1 = 0 for [[c,s],[-s,c]] rotations
                t = -math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[[p, q], :] = rot @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ rot.T
                v[:, [p, q]] = v[:, [p, q]] @ rot.T
        a = 0.5 * (a + a.T)
    vals = np.diag(a).copy()
    order = np.argsort(vals)[::-1]
    return vals[order], v[:, order]


def vacuum_eigenvalue_threshold(n_bins: int, trials: int) -> float:
    """Detection threshold for 'eigenvalue above 1' among n_bins modes.

    The largest eigenvalue of a pure-shot-noise sample correlation sits at
    the Marchenko-Pastur edge (1 + sqrt(n_bins/trials))^2, not at
    1 + O(1/sqrt(trials)); adding the five-standard-error margin of a fixed
    mode keeps false positives negligible for any grid size.
    """
    c = n_bins / trials
    return (1.0 + math.sqrt(c)) ** 2 - 1.0 + 5.0 / math.sqrt(trials)


@dataclass(frozen=True)
class ModeDecomposition:
    """Vacuum-normalized eigenmodes of the quadrature autocorrelation.

    kappas descend; eigenfunctions (rows of ``funcs``) are dt-orthonormal;
    photon numbers follow kappa_i = 2 n_i + 1.
    """

    kappas: np.ndarray
    funcs: np.ndarray
    dt: float
    t0: float
    trials: Optional[int] = None

    @property
    def photon_numbers(self) -> np.ndarray:
        return 0.5 * (self.kappas - 1.0)


def decompose(
    corr: np.ndarray,
    vacuum_ref: np.ndarray,
    dt: float,
    t0: float = 0.0,
    trials: Optional[int] = None,
    tol: float = 1e-10,
) -> ModeDecomposition:
    """Eigendecompose the vacuum-normalized correlation matrix.

    The vacuum reference fixes the shot-noise scale (mean of its diagonal);
    matrices must be symmetric within 1e-9.
    """
    corr = np.asarray(corr, dtype=float)
    vac = np.asarray(vacuum_ref, dtype=float)
    if corr.shape != vac.shape:
        raise ValueError("correlation and vacuum reference differ in shape")
    scale = float(np.mean(np.diag(vac)))
    if scale <= 0:
        raise ValueError("vacuum reference has non-positive shot-noise scale")
    vals, vecs = jacobi_eigh(corr / scale, tol=tol)
    funcs = (vecs / math.sqrt(dt)).T
    return ModeDecomposition(kappas=vals, funcs=funcs, dt=dt, t0=t0, trials=trials)


@dataclass(frozen=True)
class ReconstructedMode:
    """Complex temporal mode recovered from a decomposition.

    The overall sign of the imaginary part is not measurable with a single
    local-oscillator setting; ``ambiguous_sign`` records that both f and f*
    are consistent with the data.  ``phase`` is defined where |f| exceeds
    5% of its peak and NaN elsewhere.
    """

    t0: float
    dt: float
    samples: np.ndarray
    phase: np.ndarray
    n1: float
    n2: float
    ambiguous_sign: bool

    @property
    def mode(self) -> TemporalMode:
        return TemporalMode.from_samples(self.t0, self.dt, self.samples)

    def conjugate(self) -> "ReconstructedMode":
        return ReconstructedMode(
            t0=self.t0,
            dt=self.dt,
            samples=np.conj(self.samples),
            phase=-self.phase,
            n1=self.n1,
            n2=self.n2,
            ambiguous_sign=self.ambiguous_sign,
        )


def reconstruct_mode(
    dec: ModeDecomposition, threshold: Optional[float] = None
) -> ReconstructedMode:
    """Rebuild the complex signal mode from the top eigenmodes.

    threshold defaults to 5/sqrt(trials) (five standard errors of a fixed
    vacuum-mode eigenvalue estimate).  Zero significant eigenvalues raise
    NoSignalError; more than two raise MultimodeSignalError.
    """
    if threshold is None:
        if dec.trials is None:
            raise ValueError("threshold required when trials unknown")
        threshold = 5.0 / math.sqrt(dec.trials)
    significant = np.nonzero(dec.kappas > 1.0 + threshold)[0]
    if significant.size == 0:
        raise NoSignalError("no eigenvalue exceeds the vacuum threshold")
    if significant.size > 2:
        raise MultimodeSignalError(
            f"{significant.size} eigenvalues exceed threshold; "
            "signal occupies more than one temporal mode"
        )
    n = dec.photon_numbers
    if significant.size == 1:
        f = dec.funcs[significant[0]]
        samples = f.astype(complex)
        n1, n2 = float(n[significant[0]]), 0.0
        phase = np.where(np.abs(f) > 0.05 * np.max(np.abs(f)), 0.0, np.nan)
        ambiguous = False
    else:
        i1, i2 = significant[:2]
        n1, n2 = float(n[i1]), float(n[i2])
        f1, f2 = dec.funcs[i1], dec.funcs[i2]
        samples = (math.sqrt(n1) * f1 + 1j * math.sqrt(n2) * f2) / math.sqrt(n1 + n2)
        mask = np.abs(samples) > 0.05 * np.max(np.abs(samples))
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.where(
                mask, np.arctan(math.sqrt(n2) * f2 / (math.sqrt(n1) * f1)), np.nan
            )
        ambiguous = True
    norm = math.sqrt(float(np.sum(np.abs(samples) ** 2) * dec.dt))
    return ReconstructedMode(
        t0=dec.t0,
        dt=dec.dt,
        samples=samples / norm,
        phase=phase,
        n1=n1,
        n2=n2,
        ambiguous_sign=ambiguous,
    )


def _fock_densities(y: np.ndarray) -> np.ndarray:
    """Quadrature densities of Fock 0,1,2 in vacuum-unit-variance units."""
    g = np.exp(-0.5 * y * y) / math.sqrt(2.0 * math.pi)
    p0 = g
    p1 = y * y * g
    p2 = 0.5 * (y * y - 1.0) ** 2 * g
    return np.stack([p0, p1, p2])


@dataclass(frozen=True)
class PhotonStats:
    """Maximum-likelihood Fock populations of the signal mode."""

    p: np.ndarray  # (p0, p1, p2)
    sigma: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float


def photon_stats(
    records: QuadratureRecords,
    mode: ReconstructedMode,
    max_iter: int = 20000,
    rtol: float = 1e-8,
) -> PhotonStats:
    """Fit {0,1,2}-Fock populations to the mode-projected quadratures.

    Each record projects onto the real and (when present) imaginary mode
    components; the two projections are treated as quadrature samples of
    the corresponding eigenmodes with the occupation split (n1, n2) fixed
    by the reconstruction.  Two-photon terms neglect the |20>-|02>
    interference cross term (populations at the 1e-3 level).
    """
    dt = records.dt
    re = mode.samples.real
    im = mode.samples.imag
    nr = math.sqrt(float(np.sum(re**2) * dt))
    f1 = re / nr
    q1 = records.data @ (math.sqrt(dt) * f1)
    two_mode = mode.n2 > 0 and float(np.sum(im**2) * dt) > 1e-12
    if two_mode:
        ni = math.sqrt(float(np.sum(im**2) * dt))
        f2 = im / ni
        q2 = records.data @ (math.sqrt(dt) * f2)
        r = mode.n1 / (mode.n1 + mode.n2)
        d1 = _fock_densities(q1)
        d2 = _fock_densities(q2)
        comp0 = d1[0] * d2[0]
        comp1 = r * d1[1] * d2[0] + (1.0 - r) * d1[0] * d2[1]
        comp2 = (
            r**2 * d1[2] * d2[0]
            + 2.0 * r * (1.0 - r) * d1[1] * d2[1]
            + (1.0 - r) ** 2 * d1[0] * d2[2]
        )
        dens = np.stack([comp0, comp1, comp2])
    else:
        dens = _fock_densities(q1)

    p = np.array([0.9, 0.09, 0.01])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mix = p @ dens
        resp = p[:, None] * dens / mix
        p_new = resp.mean(axis=1)
        # boundary components decay only harmonically under EM; snap them
        p_new[p_new < 1e-12] = 0.0
        p_new = np.clip(p_new, 0.0, 1.0)
        p_new = p_new / p_new.sum()
        delta = float(np.max(np.abs(p_new - p)))
        p = p_new
        if delta < rtol:
            converged = True
            break
    if not converged:
        raise RuntimeError(
            f"photon-statistics fit did not converge in {max_iter} iterations"
        )

    # observed Fisher information for (p1, p2) with p0 = 1 - p1 - p2
    mix = p @ dens
    g1 = (dens[1] - dens[0]) / mix
    g2 = (dens[2] - dens[0]) / mix
    info = np.array(
        [[np.sum(g1 * g1), np.sum(g1 * g2)], [np.sum(g1 * g2), np.sum(g2 * g2)]]
    )
    try:
        cov = np.linalg.inv(info)
        s1, s2 = math.sqrt(max(cov[0, 0], 0.0)), math.sqrt(max(cov[1, 1], 0.0))
        s0 = math.sqrt(max(cov[0, 0] + cov[1, 1] + 2.0 * cov[0, 1], 0.0))
    except np.linalg.LinAlgError:
        s0 = s1 = s2 = float("nan")
    return PhotonStats(
        p=p,
        sigma=np.array([s0, s1, s2]),
        converged=converged,
        iterations=it,
        log_likelihood=float(np.sum(np.log(p @ dens))),
    )


@dataclass(frozen=True)
class BudgetResult:
    total: float
    uncertainty: float
    stages: tuple


def loss_budget(stages) -> BudgetResult:
    """Product of named stage efficiencies with independent relative errors.

    ``stages`` is an iterable of (name, value) or (name, value, error).
    """
    total = 1.0
    rel_sq = 0.0
    norm = []
    for stage in stages:
        name, value, err = (*stage, 0.0) if len(stage) == 2 else stage
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"stage {name!r} efficiency {value} outside [0, 1]")
        total *= value
        if value > 0 and err:
            rel_sq += (err / value) ** 2
        norm.append((name, value, err))
    return BudgetResult(total=total, uncertainty=total * math.sqrt(rel_sq), stages=tuple(norm))


def decomposition_to_json(
    dec: ModeDecomposition, rec: Optional[ReconstructedMode] = None
) -> dict:
    """JSON-ready export: eigenvalues plus modes as Re/Im arrays."""
    payload = {
        "t0_us": dec.t0,
        "dt_us": dec.dt,
        "trials": dec.trials,
        "eigenvalues": dec.kappas.tolist(),
        "photon_numbers": dec.photon_numbers.tolist(),
        "eigenfunctions": [f.tolist() for f in dec.funcs[:4]],
    }
    if rec is not None:
        payload["reconstructed_mode"] = {
            "re": rec.samples.real.tolist(),
            "im": rec.samples.imag.tolist(),
            "phase_rad": [None if math.isnan(x) else x for x in rec.phase],
            "n1": rec.n1,
            "n2": rec.n2,
            "sign_ambiguous": rec.ambiguous_sign,
        }
    return payload


def save_records(records: QuadratureRecords, path) -> None:
    """Binary (.npz) or CSV serialization with grid metadata."""
    path = str(path)
    if path.endswith(".npz"):
        np.savez_compressed(
            path, t0=records.t0, dt=records.dt, data=records.data
        )
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# quadrature_records t0_us={records.t0:.17g} dt_us={records.dt:.17g} "
            f"n_bins={records.n_bins} trials={records.trials} normalization=vacuum_unit\n"
        )
        for row in records.data:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def load_records(path) -> QuadratureRecords:
    path = str(path)
    if path.endswith(".npz"):
        with np.load(path) as z:
            return QuadratureRecords(t0=float(z["t0"]), dt=float(z["dt"]), data=z["data"])
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# quadrature_records"):
            raise ValueError("not a quadrature-records file")
        fields = dict(tok.split("=") for tok in header[2:].split()[1:])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    rec = QuadratureRecords(t0=float(fields["t0_us"]), dt=float(fields["dt_us"]), data=data)
    if rec.trials != int(fields["trials"]) or rec.n_bins != int(fields["n_bins"]):
        raise ValueError("record shape mismatch with header")
    return rec
