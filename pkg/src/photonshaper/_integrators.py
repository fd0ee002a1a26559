"""Fixed-step RK4 kernels for sparse linear master-equation dynamics.

The generator is L(t) = L0 + om_re(t) LX + om_im(t) LY with static CSR
matrices and the complex control envelope interpolated linearly from its
sample grid (zero outside).  A numba path handles production step counts;
a numpy fallback keeps everything runnable without JIT.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _pulse_at(t, p_t0, p_dt, p_re, p_im):
    """Linear interpolation of the control envelope at time t (bin centers)."""
    n = p_re.size
    u = (t - p_t0) / p_dt - 0.5
    if u <= 0.0:
        if u <= -1.0:
            return 0.0, 0.0
        # ramp from zero into the first bin
        w = u + 1.0
        return w * p_re[0], w * p_im[0]
    j = int(u)
    if j >= n - 1:
        if u >= n:
            return 0.0, 0.0
        w = 1.0 - (u - (n - 1))
        if w < 0.0:
            w = 0.0
        return w * p_re[n - 1], w * p_im[n - 1]
    f = u - j
    return p_re[j] * (1.0 - f) + p_re[j + 1] * f, p_im[j] * (1.0 - f) + p_im[j + 1] * f


@njit(cache=True)
def _apply(ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy, wr, wi, y, out):
    n = y.size
    for row in range(n):
        s = 0.0 + 0.0j
        for k in range(ip0[row], ip0[row + 1]):
            s += d0[k] * y[ix0[k]]
        if wr != 0.0:
            for k in range(ipx[row], ipx[row + 1]):
                s += wr * dx[k] * y[ixx[k]]
        if wi != 0.0:
            for k in range(ipy[row], ipy[row + 1]):
                s += wi * dy[k] * y[ixy[k]]
        out[row] = s


@njit(cache=True)
def _rk4_run(
    ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy,
    y, t_start, dt, n_steps,
    p_t0, p_dt, p_re, p_im,
    save_positions, save_stride, saves,
):
    """Integrate y' = L(t) y, recording y[save_positions] every save_stride steps.

    ``saves`` must be shaped (n_saves, save_positions.size); row k holds the
    state at step k*save_stride (row 0 = initial state).  Returns y.
    """
    n = y.size
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)

    row = 0
    for p in range(save_positions.size):
        saves[row, p] = y[save_positions[p]]
    row += 1

    half = 0.5 * dt
    sixth = dt / 6.0
    for step in range(n_steps):
        t = t_start + step * dt
        wr, wi = _pulse_at(t, p_t0, p_dt, p_re, p_im)
        _apply(ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy, wr, wi, y, k1)
        for i in range(n):
            tmp[i] = y[i] + half * k1[i]
        wr, wi = _pulse_at(t + half, p_t0, p_dt, p_re, p_im)
        _apply(ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy, wr, wi, tmp, k2)
        for i in range(n):
            tmp[i] = y[i] + half * k2[i]
        _apply(ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy, wr, wi, tmp, k3)
        for i in range(n):
            tmp[i] = y[i] + dt * k3[i]
        wr, wi = _pulse_at(t + dt, p_t0, p_dt, p_re, p_im)
        _apply(ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy, wr, wi, tmp, k4)
        for i in range(n):
            y[i] = y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if (step + 1) % save_stride == 0 and row < saves.shape[0]:
            for p in range(save_positions.size):
                saves[row, p] = y[save_positions[p]]
            row += 1
    return y


def _pulse_at_py(t, p_t0, p_dt, p_re, p_im):
    n = p_re.size
    u = (t - p_t0) / p_dt - 0.5
    if u <= 0.0:
        if u <= -1.0:
            return 0.0, 0.0
        w = u + 1.0
        return w * p_re[0], w * p_im[0]
    j = int(u)
    if j >= n - 1:
        if u >= n:
            return 0.0, 0.0
        w = max(0.0, 1.0 - (u - (n - 1)))
        return w * p_re[n - 1], w * p_im[n - 1]
    f = u - j
    return (
        p_re[j] * (1.0 - f) + p_re[j + 1] * f,
        p_im[j] * (1.0 - f) + p_im[j + 1] * f,
    )


def _rk4_run_py(
    L0, LX, LY, y, t_start, dt, n_steps, p_t0, p_dt, p_re, p_im,
    save_positions, save_stride, saves,
):
    """scipy.sparse fallback with identical semantics to _rk4_run."""

    def rhs(t, v):
        wr, wi = _pulse_at_py(t, p_t0, p_dt, p_re, p_im)
        out = L0 @ v
        if wr != 0.0:
            out = out + wr * (LX @ v)
        if wi != 0.0:
            out = out + wi * (LY @ v)
        return out

    row = 0
    saves[row] = y[save_positions]
    row += 1
    half = 0.5 * dt
    for step in range(n_steps):
        t = t_start + step * dt
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (step + 1) % save_stride == 0 and row < saves.shape[0]:
            saves[row] = y[save_positions]
            row += 1
    return y


def csr_parts(mat):
    m = mat.tocsr()
    m.sort_indices()
    return (
        m.indptr.astype(np.int64),
        m.indices.astype(np.int64),
        m.data.astype(np.complex128),
    )


def run_fixed_rk4(
    L0, LX, LY, y0, t_start, dt, n_steps,
    pulse_t0, pulse_dt, pulse_re, pulse_im,
    save_positions, save_stride, use_numba=True,
):
    """Driver: returns (saves array, final state)."""
    n_saves = n_steps // save_stride + 1
    saves = np.empty((n_saves, len(save_positions)), dtype=np.complex128)
    pos = np.asarray(save_positions, dtype=np.int64)
    y = np.array(y0, dtype=np.complex128)
    p_re = np.ascontiguousarray(pulse_re, dtype=np.float64)
    p_im = np.ascontiguousarray(pulse_im, dtype=np.float64)
    if use_numba and HAVE_NUMBA:
        ip0, ix0, d0 = csr_parts(L0)
        ipx, ixx, dx = csr_parts(LX)
        ipy, ixy, dy = csr_parts(LY)
        y = _rk4_run(
            ip0, ix0, d0, ipx, ixx, dx, ipy, ixy, dy,
            y, float(t_start), float(dt), int(n_steps),
            float(pulse_t0), float(pulse_dt), p_re, p_im,
            pos, int(save_stride), saves,
        )
    else:
        y = _rk4_run_py(
            L0.tocsr(), LX.tocsr(), LY.tocsr(),
            y, float(t_start), float(dt), int(n_steps),
            float(pulse_t0), float(pulse_dt), p_re, p_im,
            pos, int(save_stride), saves,
        )
    return saves, y
