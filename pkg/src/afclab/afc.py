"""
Two-channel adaptive feedback canceller (2ch-AFC).

The prediction error

    eps[k] = m[k] + a_bar^T [m[k-1] .. m[k-L_A+1]] + b^T [l[k] .. l[k-L_B+1]]

is linear in theta = [a_bar; b], so minimizing its mean square is a linear
least-squares problem theta = -R^{-1} r over the stacked regressor
i[k] = [m[k-1..k-L_A+1]; l[k..k-L_B+1]]. The feedback path estimate is
F_hat = -B(q) / A(q), obtained by truncated polynomial long division.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
from numpy.lib.stride_tricks import sliding_window_view

from .signals import as_coeffs, as_signal

CHUNK = 1 << 15


@dataclass
class CorrelationSystem:
    R: np.ndarray
    r: np.ndarray
    n_samples: int
    L_A: int
    L_B: int

    @property
    def dim(self):
        return self.L_A - 1 + self.L_B

    def blocks(self):
        """The four blocks (R_mm, R_ml, R_lm, R_ll) and two vectors (r_mm, r_lm)."""
        p = self.L_A - 1
        R, r = self.R, self.r
        return R[:p, :p], R[:p, p:], R[p:, :p], R[p:, p:], r[:p], r[p:]


@dataclass
class AfcSolution:
    a_bar: np.ndarray
    b: np.ndarray
    kappa: float
    degenerate: bool = False

    @property
    def a(self):
        return np.concatenate([[1.0], self.a_bar])

    def feedback_path(self, L_F_hat, remove_dc=False):
        return recover_feedback(self.a, self.b, L_F_hat, remove_dc=remove_dc)


def burn_in(L_A, L_B):
    """First sample index whose regressor is free of zero padding."""
    return max(L_A, L_B)


def regressors(m, l, L_A, L_B, start=None, stop=None):
    """
    Stacked regressors i[k] for k in [start, stop), one row per sample.

    Samples before index 0 are treated as zero, so ``start`` may be anywhere
    in the signal.
    """
    m = np.asarray(m, dtype=float)
    l = np.asarray(l, dtype=float)
    start = burn_in(L_A, L_B) if start is None else start
    stop = len(m) if stop is None else stop
    pad = max(L_A, L_B)
    mp = np.concatenate([np.zeros(pad), m])
    lp = np.concatenate([np.zeros(pad), l])
    p = L_A - 1
    out = np.empty((max(stop - start, 0), p + L_B))
    if out.shape[0] == 0:
        return out
    # row k: m[k-1], m[k-2], ..., m[k-p]
    if p:
        win = sliding_window_view(mp[pad + start - p:pad + stop - 1], p)
        out[:, :p] = win[:, ::-1]
    win = sliding_window_view(lp[pad + start - L_B + 1:pad + stop], L_B)
    out[:, p:] = win[:, ::-1]
    return out


def build_normal_equations(m, l, L_A, L_B):
    """
    Sample-average correlation matrix R and vector r of the 2ch-AFC problem.

    Averages run over k = max(L_A, L_B) .. n-1 and are normalized by the
    number of regressors used.
    """
    if L_A < 1 or L_B < 1:
        raise ValueError("L_A and L_B must be positive")
    m = as_signal(m, "m")
    l = as_signal(l, "l")
    if m.size != l.size:
        raise ValueError(f"m and l differ in length ({m.size} vs {l.size})")
    k0 = burn_in(L_A, L_B)
    n = m.size
    if n <= k0:
        raise ValueError(f"need more than {k0} samples, got {n}")
    dim = L_A - 1 + L_B
    R = np.zeros((dim, dim))
    r = np.zeros(dim)
    for start in range(k0, n, CHUNK):
        stop = min(start + CHUNK, n)
        X = regressors(m, l, L_A, L_B, start, stop)
        R += X.T @ X
        r += X.T @ m[start:stop]
    count = n - k0
    R /= count
    r /= count
    R = 0.5 * (R + R.T)
    return CorrelationSystem(R, r, count, L_A, L_B)


def condition_number(R):
    """sigma_max / sigma_min from a full SVD; +inf when sigma_min is zero."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("condition number needs a square matrix")
    s = np.linalg.svd(R, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def default_loading(R):
    return 1e-10 * np.trace(R) / R.shape[0]


def degeneracy_threshold(dim):
    return 1.0 / (np.finfo(float).eps * dim)


def solve_batch(cs, loading=None):
    """
    Least-squares 2ch-AFC solution -(R + delta*I)^{-1} r.

    ``loading`` defaults to 1e-10 * trace(R) / dim. The condition number is
    that of the unloaded R; solutions from a numerically singular R come back
    with ``degenerate=True``.
    """
    R, r = cs.R, cs.r
    dim = R.shape[0]
    kappa = condition_number(R)
    delta = default_loading(R) if loading is None else loading
    A = R + delta * np.eye(dim)
    try:
        theta = -la.solve(A, r, assume_a="pos")
    except (la.LinAlgError, ValueError):
        theta = -la.lstsq(A, r)[0]
    p = cs.L_A - 1
    return AfcSolution(theta[:p].copy(), theta[p:].copy(), kappa, bool(kappa > degeneracy_threshold(dim)))


def recover_feedback(a, b, L_F_hat, remove_dc=False):
    """
    Feedback estimate f_hat = -B(q)/A(q), truncated to ``L_F_hat`` taps.

    With ``remove_dc`` the mean of the estimate is subtracted afterwards.
    """
    a = as_coeffs(a, "a")
    b = as_coeffs(b, "b")
    if a[0] != 1.0:
        raise ValueError("A(q) must be monic")
    f_hat = np.zeros(L_F_hat)
    for k in range(L_F_hat):
        acc = -b[k] if k < b.size else 0.0
        j = min(k, a.size - 1)
        if j:
            acc -= np.dot(a[1:j + 1], f_hat[k - 1::-1][:j])
        f_hat[k] = acc
    if remove_dc:
        f_hat -= f_hat.mean()
    return f_hat


def prediction_error(m, l, a_bar, b):
    """eps[k] = m[k] + a_bar^T m[k-1..] + b^T l[k..], zero history before k = 0."""
    m = as_signal(m, "m")
    l = as_signal(l, "l")
    a = np.concatenate([[1.0], np.asarray(a_bar, dtype=float)])
    eps = np.convolve(a, m)[: m.size] + np.convolve(np.asarray(b, dtype=float), l)[: l.size]
    return eps


@dataclass(frozen=True)
class RlsState:
    P: np.ndarray
    w: np.ndarray
    lam: float = 1.0
    n: int = 0
    faults: int = 0


def rls_init(dim, delta, lam=1.0):
    """RLS state with P = I / delta and zero weights."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("forgetting factor must lie in (0, 1]")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return RlsState(np.eye(dim) / delta, np.zeros(dim), lam)


def rls_update(state, m_k, regressor):
    """
    One exponentially weighted RLS step on eps = m_k + w^T regressor.

    A non-finite result leaves the previous weights and P in place and
    increments ``faults``.
    """
    x = np.asarray(regressor, dtype=float)
    if x.shape != state.w.shape:
        raise ValueError(f"regressor has shape {x.shape}, expected {state.w.shape}")
    P, w, lam = state.P, state.w, state.lam
    Px = P @ x
    gain = Px / (lam + x @ Px)
    eps = m_k + w @ x
    w_new = w - gain * eps
    P_new = (P - np.outer(gain, Px)) / lam
    P_new = 0.5 * (P_new + P_new.T)
    if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(P_new))):
        return replace(state, faults=state.faults + 1)
    return RlsState(P_new, w_new, lam, state.n + 1, state.faults)
