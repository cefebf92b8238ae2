"""One implicit step of the Lur'e integrator.

Each step solves, for the unknown pair (x_next, mu),

    (1 - h*kappa) x_next + h B mu = y_in
    mu in N_K(C x_next - D mu)

with K the moving set evaluated at (t_next, x_prev). Eliminating the linear
state equation reduces the step to a variational inequality in the multiplier:

    w = q - M mu,   mu in N_K(w),
    q = C y_in / (1 - h*kappa),   M = h C B / (1 - h*kappa) + D.

For box-shaped K the inclusion is solved by a semismooth Newton method on the
residual map mu -> w - clamp(w + mu), which is the multiplier block of the
full (x, mu) residual after exact elimination of the state block. A damped
fixed-point sweep serves as fallback. Polyhedral K is handled by active-set
enumeration over the constraint rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import sets
from .errors import (
    DimensionMismatch,
    NoSolution,
    SolverDiverged,
    StepTooLarge,
    StepTooSmall,
)
from .linalg import range_projector

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .system import LureSystem

__all__ = [
    "SolverOptions",
    "StepResult",
    "box_vi_enumerate",
    "brute_force_step_oracle",
    "inner_solve_box",
    "solve_step",
    "solve_static_multiplier",
]

MIN_STEP = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    """Inner-solver knobs.

    tol is an absolute residual tolerance; the fallback budget only engages
    when Newton stalls. ``force`` skips the admissibility gate in simulate.
    """

    tol: float = 1e-10
    max_newton: int = 100
    max_fallback: int = 1000
    force: bool = False


@dataclass(frozen=True)
class StepResult:
    """Converged step: state, multipliers, output argument and diagnostics.

    ``lam`` is the system-sign multiplier (lam = -mu); ``w = C x_next - D mu``
    is the argument at which the normal-cone inclusion holds. ``residual`` is
    the larger of the normalized state-equation residual and the cone
    residual.
    """

    x_next: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    w: np.ndarray
    residual: float = 0.0
    iterations: int = 0


def _box_residual(m_mat, q, lower, upper, mu):
    w = q - m_mat @ mu
    return w - np.clip(w + mu, lower, upper), w


def inner_solve_box(m_mat, q, box, opts=None, c1=None, d_norm=None):
    """Solve ``mu in N_box(q - M mu)`` for a box set.

    Semismooth Newton with elementwise clamp derivatives (slope 1 strictly
    inside the interval, 0 at or beyond a face) and a halving line search on
    the residual norm; falls back to a damped fixed-point sweep with factor
    ``rho = min(1, c1 / (1 + ||D||^2))`` when Newton stalls.

    Returns
    -------
    (mu, w, iterations)

    Raises
    ------
    SolverDiverged
        If neither phase reaches ``opts.tol``.
    """
    if opts is None:
        opts = SolverOptions()
    q = np.asarray(q, dtype=float).reshape(-1)
    m_dim = q.size
    m_mat = np.asarray(m_mat, dtype=float)
    if m_mat.shape != (m_dim, m_dim):
        raise DimensionMismatch("M must be square and match q")
    lower, upper = box.lower, box.upper
    if lower.size != m_dim:
        raise DimensionMismatch("box dimension mismatch")
    # converge below the stored tolerance so residuals recomputed from
    # x_next stay under opts.tol after rounding
    tol = 0.5 * opts.tol
    mu = np.zeros(m_dim)
    f, w = _box_residual(m_mat, q, lower, upper, mu)
    nf = float(np.linalg.norm(f))
    best_mu, best_nf = mu.copy(), nf
    iterations = 0
    eye = np.eye(m_dim)
    for _ in range(opts.max_newton):
        iterations += 1
        if nf <= tol:
            return mu, w, iterations
        z = w + mu
        s = ((z > lower) & (z < upper)).astype(float)
        jac = (np.diag(s) - eye) @ m_mat - np.diag(s)
        try:
            delta = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(jac, -f, rcond=None)[0]
        if not np.all(np.isfinite(delta)):
            delta = np.linalg.lstsq(jac, -f, rcond=None)[0]
        step_len = 1.0
        improved = False
        for _ in range(30):
            cand = mu + step_len * delta
            fc, wc = _box_residual(m_mat, q, lower, upper, cand)
            nfc = float(np.linalg.norm(fc))
            if nfc < nf or nfc <= tol:
                mu, f, w, nf = cand, fc, wc, nfc
                improved = True
                break
            step_len *= 0.5
        if nf < best_nf:
            best_mu, best_nf = mu.copy(), nf
        if not improved:
            break
    if nf <= tol:
        return mu, w, iterations
    # damped fixed-point fallback: mu <- mu + rho * residual(mu)
    d_norm = 0.0 if d_norm is None else float(d_norm)
    rho = min(1.0, (c1 if c1 is not None else 1.0) / (1.0 + d_norm * d_norm))
    mu = best_mu.copy()
    f, w = _box_residual(m_mat, q, lower, upper, mu)
    nf = float(np.linalg.norm(f))
    for _ in range(opts.max_fallback):
        iterations += 1
        if nf <= tol:
            return mu, w, iterations
        cand = mu + rho * f
        fc, wc = _box_residual(m_mat, q, lower, upper, cand)
        nfc = float(np.linalg.norm(fc))
        if nfc >= nf:
            rho *= 0.5
            if rho < 1e-8:
                break
            continue
        mu, f, w, nf = cand, fc, wc, nfc
        if nf < best_nf:
            best_mu, best_nf = mu.copy(), nf
    raise SolverDiverged(
        f"inner box solve stalled at residual {best_nf:.3e}", residual=best_nf
    )


def _unwrap_polyhedron(k_set):
    # peel Translate layers: N_{S+o}(w) = N_S(w - o)
    offset = None
    base = k_set
    while isinstance(base, sets.Translate):
        offset = base.offset if offset is None else offset + base.offset
        base = base.base
    if isinstance(base, sets.Polyhedron):
        if offset is None:
            offset = np.zeros(base.a.shape[1])
        return base, offset
    return None


def _poly_vi_enumerate(a, b, m_mat, q, tol):
    """All KKT-consistent multipliers of mu in N_{Ay<=b}(q - M mu).

    mu = A_S^T nu with nu >= 0 on an active subset S; returns the feasible
    candidate of least multiplier norm together with the count of patterns
    examined. Raises NoSolution when no subset works.
    """
    k, m_dim = a.shape
    if k > 16:
        raise SolverDiverged("polyhedral step enumeration capped at 16 rows")
    scale = 1.0 + float(np.max(np.abs(q))) + (float(np.max(np.abs(b))) if k else 0.0)
    best = None
    examined = 0
    for size in range(0, min(k, m_dim) + 1):
        for subset in itertools.combinations(range(k), size):
            examined += 1
            idx = list(subset)
            a_s = a[idx]
            lhs = a_s @ m_mat @ a_s.T
            rhs = a_s @ q - b[idx]
            nu = np.linalg.lstsq(lhs, rhs, rcond=None)[0] if size else np.zeros(0)
            if size and float(np.max(np.abs(lhs @ nu - rhs))) > tol * scale:
                continue
            if size and float(np.min(nu)) < -tol * scale:
                continue
            mu = a_s.T @ nu if size else np.zeros(m_dim)
            w = q - m_mat @ mu
            if k and float(np.max(a @ w - b)) > tol * scale:
                continue
            nrm = float(np.linalg.norm(mu))
            if best is None or nrm < best[0]:
                best = (nrm, mu, w)
    if best is None:
        raise NoSolution("no feasible active set for the polyhedral step")
    return best[1], best[2], examined


def _solve_multiplier(k_set, m_mat, q, opts, c1=None, d_norm=None):
    """Dispatch the multiplier inclusion by set shape."""
    box = sets.as_box(k_set)
    if box is not None:
        return inner_solve_box(m_mat, q, sets.Box(box[0], box[1]), opts, c1, d_norm)
    poly = _unwrap_polyhedron(k_set)
    if poly is None:
        raise TypeError(f"unsupported set type: {type(k_set).__name__}")
    base, offset = poly
    # shift the offset into b: A(w - offset) <= b becomes A w <= b + A offset
    try:
        mu, w_val, examined = _poly_vi_enumerate(
            base.a, base.b + base.a @ offset, m_mat, q, max(opts.tol, 1e-12)
        )
    except NoSolution as exc:
        raise SolverDiverged(str(exc)) from exc
    return mu, w_val, examined


def solve_step(sys, t_next, x_prev, y_in, h, opts=None):
    """Advance one implicit step.

    Parameters
    ----------
    sys : LureSystem
        System data; the moving set is evaluated at ``(t_next, x_prev)``.
    t_next : float
        Time at the end of the step.
    x_prev : ndarray
        State at the start of the step (argument of the moving set).
    y_in : ndarray
        Drift-advanced input ``x + h f(t, x) - h kappa x``.
    h : float
        Step size, ``MIN_STEP < h`` and ``1 - h kappa > 0`` required.

    Returns
    -------
    StepResult

    Raises
    ------
    StepTooSmall, StepTooLarge, SolverDiverged, EmptySet
    """
    if opts is None:
        opts = SolverOptions()
    if h <= MIN_STEP:
        raise StepTooSmall(f"step size {h:g} at or below {MIN_STEP:g}")
    denom = 1.0 - h * sys.kappa
    if denom <= 1e-12:
        raise StepTooLarge(f"1 - h*kappa = {denom:g} not positive")
    x_prev = np.asarray(x_prev, dtype=float).reshape(-1)
    y_in = np.asarray(y_in, dtype=float).reshape(-1)
    if x_prev.size != sys.n or y_in.size != sys.n:
        raise DimensionMismatch("state dimension mismatch in step")
    k_set = sys.K.at(t_next, x_prev)
    q = (sys.C @ y_in) / denom
    m_mat = (h / denom) * (sys.C @ sys.B) + sys.D
    c1 = sys.cert.c1 if sys.cert is not None else None
    d_norm = float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    mu, _, iterations = _solve_multiplier(k_set, m_mat, q, opts, c1, d_norm)
    mu = _minimal_norm_polish(sys, k_set, m_mat, q, mu, opts.tol)
    x_next = (y_in - h * (sys.B @ mu)) / denom
    w = sys.C @ x_next - sys.D @ mu
    state_res = float(
        np.linalg.norm(denom * x_next + h * (sys.B @ mu) - y_in)
    ) / (1.0 + float(np.linalg.norm(y_in)))
    cone_res = sets.normal_cone_residual(k_set, w, mu)
    return StepResult(
        x_next=x_next,
        mu=mu,
        lam=-mu,
        w=w,
        residual=max(state_res, cone_res),
        iterations=iterations,
    )


def _minimal_norm_polish(sys, k_set, m_mat, q, mu, tol):
    """Project mu onto rge(D + D^T) when doing so preserves both residuals.

    When the step solution is non-unique the ambiguity lives in
    ker(D + D^T) inter ker(B); dropping the kernel component then recovers the
    least-norm multiplier, which is the one the theory works with. The
    projection is only adopted if the cone residual survives at tolerance
    (it cannot survive when the kernel component is structurally forced, e.g.
    D = 0 with an active constraint).
    """
    proj = range_projector(sys.D + sys.D.T)
    mu_r = proj @ mu
    if np.allclose(mu_r, mu, rtol=0.0, atol=1e-30):
        return mu
    if float(np.linalg.norm(sys.B @ (mu - mu_r))) > 0.25 * tol:
        return mu
    box = sets.as_box(k_set)
    if box is not None:
        f, _ = _box_residual(m_mat, q, box[0], box[1], mu_r)
        if float(np.linalg.norm(f)) <= 0.5 * tol:
            return mu_r
        return mu
    w_r = q - m_mat @ mu_r
    if sets.normal_cone_residual(k_set, w_r, mu_r) <= 0.5 * tol:
        return mu_r
    return mu


def solve_static_multiplier(k_set, c_mat, d_mat, x0, opts=None, c1=None):
    """Solve the stationary inclusion ``mu in N_K(C x0 - D mu)``.

    Same machinery as the step solve with M = D and q = C x0; used by the
    admissibility test and for the multiplier attached to the initial state.
    Returns ``(mu, w, iterations)``.
    """
    if opts is None:
        opts = SolverOptions()
    q = c_mat @ np.asarray(x0, dtype=float).reshape(-1)
    d_norm = float(np.linalg.norm(d_mat, 2)) if d_mat.size else 0.0
    return _solve_multiplier(k_set, d_mat, q, opts, c1, d_norm)


def box_vi_enumerate(m_mat, q, lower, upper, tol=1e-9):
    """Least-norm solution of ``mu in N_box(q - M mu)`` by face patterns.

    Every coordinate is pinned to its lower face, upper face, or left free
    (3^m patterns); each pattern yields a linear system for the active
    multiplier components, and candidates are filtered by multiplier sign
    (nonpositive on lower faces, nonnegative on upper) and by the free
    coordinates landing inside the box. Returns (mu, w, patterns_examined).

    Raises
    ------
    NoSolution
        When no pattern is feasible.
    """
    m_dim = q.size
    if m_dim > 12:
        raise NoSolution("pattern enumeration capped at m = 12")
    scale = 1.0 + float(np.max(np.abs(q), initial=0.0))
    finite = np.concatenate([lower[np.isfinite(lower)], upper[np.isfinite(upper)]])
    if finite.size:
        scale += float(np.max(np.abs(finite)))
    best = None
    examined = 0
    for pattern in itertools.product((-1, 0, 1), repeat=m_dim):
        pat = np.array(pattern)
        act = np.where(pat != 0)[0]
        target = np.where(pat[act] < 0, lower[act], upper[act])
        if act.size and not np.all(np.isfinite(target)):
            continue
        examined += 1
        mu = np.zeros(m_dim)
        if act.size:
            sub = m_mat[np.ix_(act, act)]
            rhs = q[act] - target
            mu_act = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            if float(np.max(np.abs(sub @ mu_act - rhs))) > tol * scale:
                continue
            mu[act] = mu_act
            sign_ok = np.all(
                np.where(pat[act] < 0, mu_act <= tol * scale, mu_act >= -tol * scale)
            )
            if not sign_ok:
                continue
        w = q - m_mat @ mu
        free = np.where(pat == 0)[0]
        if free.size and not np.all(
            (w[free] >= lower[free] - tol * scale)
            & (w[free] <= upper[free] + tol * scale)
        ):
            continue
        nrm = float(np.linalg.norm(mu))
        if best is None or nrm < best[0] - 1e-15:
            best = (nrm, mu, w)
    if best is None:
        raise NoSolution("no feasible face pattern")
    return best[1], best[2], examined


def brute_force_step_oracle(sys, t_next, x_prev, y_in, h, tol=1e-9):
    """Reference step solution by exhaustive face-pattern enumeration.

    Independent cross-check route for :func:`solve_step` on box-shaped sets;
    see :func:`box_vi_enumerate` for the pattern search. The least-norm
    feasible candidate is returned.
    """
    if h <= MIN_STEP:
        raise StepTooSmall(f"step size {h:g} at or below {MIN_STEP:g}")
    denom = 1.0 - h * sys.kappa
    if denom <= 1e-12:
        raise StepTooLarge(f"1 - h*kappa = {denom:g} not positive")
    x_prev = np.asarray(x_prev, dtype=float).reshape(-1)
    y_in = np.asarray(y_in, dtype=float).reshape(-1)
    k_set = sys.K.at(t_next, x_prev)
    box = sets.as_box(k_set)
    if box is None:
        raise TypeError("oracle supports box-shaped sets only")
    lower, upper = box
    q = (sys.C @ y_in) / denom
    m_mat = (h / denom) * (sys.C @ sys.B) + sys.D
    mu, _, examined = box_vi_enumerate(m_mat, q, lower, upper, tol)
    x_next = (y_in - h * (sys.B @ mu)) / denom
    w_out = sys.C @ x_next - sys.D @ mu
    state_res = float(
        np.linalg.norm(denom * x_next + h * (sys.B @ mu) - y_in)
    ) / (1.0 + float(np.linalg.norm(y_in)))
    cone_res = sets.normal_cone_residual(k_set, w_out, mu)
    return StepResult(
        x_next=x_next,
        mu=mu,
        lam=-mu,
        w=w_out,
        residual=max(state_res, cone_res),
        iterations=examined,
    )
