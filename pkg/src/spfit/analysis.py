"""Error measurement, convergence tables and numerical checks of the analytic bounds."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import OracleError
from .mesh import Mesh, make_mesh
from .problem import (ProblemSpec, SolutionFunction, continuous_decomposition,
                      exact_solution, forced_response, sample_points)
from .reports import BoundReport, CheckReport
from .scheme import (check_discrete_stability, discrete_decompose, exp_difference,
                     solve)

EPS_GRID = tuple(2.0 ** -k for k in range(0, 21))
N_GRID = tuple(2 ** k for k in range(4, 12))
DUAL_ORACLE_ATOL = 1e-8
FINE_INTERVALS = 2 ** 16
DRIFT_LIMIT = 10.0
REFERENCE_EPS = 2.0 ** -4


# ---------------------------------------------------------------------------
# oracles


def oracle_components(p: ProblemSpec, t):
    """Reference ``(u, v, w)`` at sorted points, and the accuracy estimate of ``u``.

    One forced-response quadrature serves both ``u`` and the smooth part,
    since they differ only in the homogeneous term.
    """
    t = np.asarray(t, dtype=float)
    decay = np.exp(-p.antiderivative(t) / p.eps)
    v0 = p.reduced_initial
    w = (p.u0 - v0) * decay
    if p.has_constant_coefficients:
        a, f = p.a.constant_value, p.f.constant_value
        v = np.full_like(t, f / a)
        return v + w, v, w, 0.0
    J, estimate = forced_response(p, t)
    v = v0 * decay + J
    return p.u0 * decay + J, v, w, estimate


_SQ6 = np.sqrt(6.0)
_RADAU_A = np.array([
    [(88 - 7 * _SQ6) / 360, (296 - 169 * _SQ6) / 1800, (-2 + 3 * _SQ6) / 225],
    [(296 + 169 * _SQ6) / 1800, (88 + 7 * _SQ6) / 360, (-2 - 3 * _SQ6) / 225],
    [(16 - _SQ6) / 36, (16 + _SQ6) / 36, 1.0 / 9.0],
])
_RADAU_C = np.array([(4 - _SQ6) / 10, (4 + _SQ6) / 10, 1.0])


def _radau_steps(p: ProblemSpec, left, h):
    """Affine step maps ``y(left + h) = R y(left) + S`` of 3-stage Radau IIA.

    Scaled by ``eps/h`` so that neither ``h -> 0`` nor ``eps -> 0`` overflows.
    """
    left = np.asarray(left, dtype=float)
    h = np.asarray(h, dtype=float)
    R = np.ones_like(h)
    S = np.zeros_like(h)
    live = h > 0
    if not np.any(live):
        return R, S
    hl, ll = h[live], left[live]
    ts = ll[:, None] + hl[:, None] * _RADAU_C
    a_s = p.a(ts) * np.ones_like(ts)
    f_s = p.f(ts) * np.ones_like(ts)
    delta = p.eps / hl
    M = _RADAU_A[None, :, :] * a_s[:, None, :] + delta[:, None, None] * np.eye(3)
    rhs = np.stack([np.repeat(delta[:, None], 3, axis=1), f_s @ _RADAU_A.T], axis=2)
    X = np.linalg.solve(M, rhs)
    R[live] = X[:, 2, 0]
    S[live] = X[:, 2, 1]
    return R, S


def layer_adapted_nodes(p: ProblemSpec, n_intervals: int) -> np.ndarray:
    """Piecewise-uniform nodes, half of them inside ``[0, 4 eps ln N / alpha]``."""
    half = n_intervals // 2
    tr = min(0.5 * p.T, 4.0 * p.eps * np.log(n_intervals) / p.alpha)
    return np.concatenate((np.linspace(0.0, tr, half + 1),
                           np.linspace(tr, p.T, n_intervals - half + 1)[1:]))


def _radau_march(p, nodes):
    R, S = _radau_steps(p, nodes[:-1], np.diff(nodes))
    out = np.empty(nodes.size)
    out[0] = acc = p.u0
    for j, (r, s) in enumerate(zip(R.tolist(), S.tolist()), start=1):
        acc = r * acc + s
        out[j] = acc
    return out


def fine_mesh_reference(p: ProblemSpec, n_intervals: int = FINE_INTERVALS) -> SolutionFunction:
    """Independent reference: L-stable collocation on a fine layer-adapted mesh.

    Uses only pointwise values of ``a`` and ``f``.  The accuracy estimate is
    the largest gap to the same solve on every other node.
    """
    if n_intervals < 4 or n_intervals % 4:
        raise ValueError("n_intervals must be a positive multiple of 4")
    nodes = layer_adapted_nodes(p, n_intervals)
    values = _radau_march(p, nodes)
    coarse = _radau_march(p, nodes[::2])
    estimate = float(np.max(np.abs(coarse - values[::2])))

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, n_intervals)
        R, S = _radau_steps(p, nodes[k].ravel(), (t - nodes[k]).ravel())
        return (R * values[k].ravel() + S).reshape(t.shape)

    ref = SolutionFunction(evaluate, estimate, "fine_mesh_reference")
    object.__setattr__(ref, "nodes", nodes)
    return ref


@dataclass
class OracleAgreement:
    problem: str
    eps: float
    max_gap: float
    quadrature_accuracy: float
    fine_accuracy: float
    points: int

    @property
    def passed(self) -> bool:
        return self.max_gap <= DUAL_ORACLE_ATOL


def compare_oracles(p: ProblemSpec, n_intervals: int = FINE_INTERVALS, stride: int = 32
                    ) -> OracleAgreement:
    """Quadrature versus fine-mesh reference on every ``stride``-th fine node."""
    fine = fine_mesh_reference(p, n_intervals)
    pts = np.unique(np.append(fine.nodes[::stride], p.T))
    quad = exact_solution(p, method="quadrature")
    gap = float(np.max(np.abs(quad(pts) - fine(pts))))
    return OracleAgreement(p.name, p.eps, gap, quad.accuracy_estimate,
                           fine.accuracy_estimate, pts.size)


@lru_cache(maxsize=512)
def checked_oracle(p: ProblemSpec) -> OracleAgreement:
    """Dual-oracle gate; raises :class:`OracleError` when the references disagree."""
    agreement = compare_oracles(p)
    if not agreement.passed:
        raise OracleError(f"reference rejected for {p.name} eps={p.eps!r}: oracles differ by "
                          f"{agreement.max_gap:.3e} > {DUAL_ORACLE_ATOL:g}")
    return agreement


# ---------------------------------------------------------------------------
# errors and tables


def nodal_error(U, u: SolutionFunction, error_scale: Optional[float] = None) -> float:
    """``max_j |U_j - u(t_j)|``.

    ``error_scale`` is the size of error the caller expects to resolve
    (default ``T/N``); the reference must be 100 times more accurate.
    """
    if error_scale is None:
        error_scale = U.mesh.T / U.mesh.N
    if u.accuracy_estimate > 0.01 * error_scale:
        raise OracleError(f"reference accuracy {u.accuracy_estimate:.3e} too coarse for "
                          f"error scale {error_scale:.3e}")
    return float(np.max(np.abs(np.asarray(U.values) - u(U.mesh.nodes))))


class UniformOrder(NamedTuple):
    orders: np.ndarray      # p^N for consecutive pairs; nan where undefined
    c_hat: float            # max_N N * E^N
    undefined: np.ndarray   # True where E^{2N} == 0


def _check_n_grid(n_grid):
    n = np.asarray(n_grid)
    if n.size == 0:
        raise ValueError("empty N grid")
    if n.size > 1 and not np.all(n[1:] == 2 * n[:-1]):
        raise ValueError("N grid must double at every step")


@dataclass
class ErrorTable:
    """Max-norm nodal errors ``errors[i, k]`` for ``eps_grid[i]`` and ``n_grid[k]``."""

    eps_grid: np.ndarray
    n_grid: np.ndarray
    errors: np.ndarray
    mesh_kind: str = "uniform"
    scheme: str = "fitted"
    seed: Optional[int] = None
    problem: str = ""
    smooth_errors: Optional[np.ndarray] = None
    singular_errors: Optional[np.ndarray] = None
    decomposition_residual: float = 0.0
    stability_failures: int = 0
    solves: int = 0
    oracle_checks: list = field(default_factory=list)

    def __post_init__(self):
        self.eps_grid = np.asarray(self.eps_grid, dtype=float)
        self.n_grid = np.asarray(self.n_grid, dtype=int)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.errors.shape != (self.eps_grid.size, self.n_grid.size):
            raise ValueError("errors must have shape (len(eps_grid), len(n_grid))")
        if np.any(self.errors < 0):
            raise ValueError("errors must be nonnegative")

    @property
    def uniform_errors(self) -> np.ndarray:
        return self.errors.max(axis=0)

    @property
    def orders(self) -> np.ndarray:
        return uniform_order(self).orders

    @property
    def c_hat(self) -> float:
        return uniform_order(self).c_hat


def uniform_order(t: ErrorTable) -> UniformOrder:
    """``p^N = log2(E^N / E^{2N})`` and ``C = max_N N E^N``."""
    _check_n_grid(t.n_grid)
    E = t.uniform_errors
    lo, hi = E[:-1], E[1:]
    undefined = hi == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.where(undefined, np.nan, np.log2(lo / np.where(undefined, 1.0, hi)))
    return UniformOrder(orders, float(np.max(t.n_grid * E)), undefined)


def component_constants(errors, n_grid) -> np.ndarray:
    """Per-``eps`` constant ``max_N N * E_eps^N``."""
    return np.max(np.asarray(errors) * np.asarray(n_grid)[None, :], axis=1)


def eps_drift(constants, eps_grid, reference_eps: float = REFERENCE_EPS) -> float:
    """Largest constant over all ``eps`` relative to the largest one with ``eps >= reference_eps``.

    A constant that grows like a negative power of ``eps`` drives this far
    past :data:`DRIFT_LIMIT` on the default grids.
    """
    constants = np.asarray(constants, dtype=float)
    eps_grid = np.asarray(eps_grid, dtype=float)
    regular = constants[eps_grid >= reference_eps * (1 - 1e-12)]
    base = float(np.max(regular)) if regular.size else float(constants[0])
    top = float(np.max(constants))
    if top == 0.0:
        return 0.0
    return top / base if base > 0 else np.inf


def _cell(p, mesh, scheme, components):
    U = solve(p, mesh, scheme)
    u, v, w, estimate = oracle_components(p, mesh.nodes)
    if estimate > 0.01 * mesh.T / mesh.N:
        raise OracleError(f"reference accuracy {estimate:.3e} too coarse at N={mesh.N}")
    out = {"error": float(np.max(np.abs(U.values - u))),
           "stable": check_discrete_stability(U).passed}
    if components:
        dec = discrete_decompose(p, mesh, scheme)
        V, W = dec.smooth.values, dec.singular.values
        scale = max(float(np.max(np.abs(U.values))), np.finfo(float).tiny)
        out["residual"] = float(np.max(np.abs(V + W - U.values))) / scale
        out["smooth"] = float(np.max(np.abs(V - v)))
        out["singular"] = float(np.max(np.abs(W - w)))
    return out


def build_error_table(p: ProblemSpec, eps_grid: Sequence[float] = EPS_GRID,
                      n_grid: Sequence[int] = N_GRID, mesh_kind: str = "uniform",
                      scheme: str = "fitted", seed: int = 0, *, spread: float = 0.5,
                      grading: float = 2.0, components: bool = False,
                      cross_check: bool = True, n_jobs: int = 1) -> ErrorTable:
    """Solve on every ``(eps, N)`` cell and tabulate max nodal errors.

    Meshes depend on ``N`` and ``seed`` only, so one mesh serves a whole
    column.  Cells are independent; ``n_jobs > 1`` evaluates them on a
    thread pool without changing the result.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0:
        raise ValueError("empty eps grid")
    _check_n_grid(n_grid)
    meshes = [make_mesh(mesh_kind, int(n), p.T, seed=seed, spread=spread, grading=grading)
              for n in n_grid]
    problems = [p.with_eps(float(e)) for e in eps_grid]
    checks = []
    if cross_check and not p.has_constant_coefficients:
        checks = [checked_oracle(q) for q in problems]
    jobs = [(i, k) for i in range(len(problems)) for k in range(len(meshes))]

    def run(job):
        i, k = job
        try:
            return _cell(problems[i], meshes[k], scheme, components)
        except Exception as exc:
            exc.add_note(f"at eps={eps_grid[i]!r}, N={int(n_grid[k])}")
            raise

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            cells = list(pool.map(run, jobs))
    else:
        cells = [run(job) for job in jobs]

    shape = (eps_grid.size, len(n_grid))

    def grid(key):
        return np.array([c[key] for c in cells]).reshape(shape)

    return ErrorTable(
        eps_grid, np.asarray(n_grid), grid("error"), mesh_kind, scheme, seed, p.name,
        smooth_errors=grid("smooth") if components else None,
        singular_errors=grid("singular") if components else None,
        decomposition_residual=float(grid("residual").max()) if components else 0.0,
        stability_failures=int(np.count_nonzero(~grid("stable"))),
        solves=len(cells),
        oracle_checks=checks,
    )


def convergence_check(t: ErrorTable, min_order: float = 0.85, n_from: int = 64,
                      max_ratio: float = 4.0) -> CheckReport:
    """Orders ``p^N >= min_order`` for ``N >= n_from`` and ``max N E^N / min_{N>=n_from} N E^N <= max_ratio``."""
    res = uniform_order(t)
    n = t.n_grid[:-1]
    sel = n >= n_from
    orders = res.orders[sel]
    order_ok = bool(orders.size and np.all(np.nan_to_num(orders, nan=-np.inf) >= min_order))
    scaled = t.n_grid * t.uniform_errors
    tail = scaled[t.n_grid >= n_from]
    ratio = float(np.max(scaled) / np.min(tail)) if tail.size and np.min(tail) > 0 else np.inf
    worst = float(np.nanmin(orders)) if orders.size else float("nan")
    return CheckReport(f"uniform convergence {t.problem}/{t.mesh_kind}/{t.scheme}",
                       order_ok and ratio <= max_ratio, worst, min_order, worst - min_order,
                       int(np.count_nonzero(~(np.nan_to_num(orders, nan=-1) >= min_order))),
                       int(orders.size), details={"C_ratio": ratio, "C_hat": res.c_hat})


# ---------------------------------------------------------------------------
# analytic bounds


def singular_derivatives(p: ProblemSpec, t, k: int):
    """Multiplier ``m_k`` with ``w^{(k)} = m_k w``, from differentiating ``eps w' + a w = 0``."""
    t = np.asarray(t, dtype=float)
    a = p.a(t) * np.ones_like(t)
    m1 = -a / p.eps
    if k == 0:
        return np.ones_like(t)
    if k == 1:
        return m1
    if k == 2:
        return -(p.a_prime(t) + a * m1) / p.eps
    raise ValueError("only k = 0, 1, 2 are supported")


def _layer_constants(p: ProblemSpec, t, k):
    """``max_t |w^{(k)}(t)| eps^k exp(alpha t / eps)``; the exponential weight is folded in."""
    amp = abs(p.layer_amplitude)
    # w e^{alpha t/eps} = w(0) exp((alpha t - A(t))/eps), with alpha t <= A(t)
    weighted = amp * np.exp((p.alpha * t - p.antiderivative(t)) / p.eps)
    return float(np.max(np.abs(singular_derivatives(p, t, k)) * p.eps ** k * weighted))


def _smooth_constants(p: ProblemSpec, t):
    _, v, _, _ = oracle_components(p, t)
    a = p.a(t) * np.ones_like(t)
    f = p.f(t) * np.ones_like(t)
    dv = (f - a * v) / p.eps
    d2v = (p.f_prime(t) - p.a_prime(t) * v - a * dv) / p.eps
    return (float(np.max(np.abs(v))), float(np.max(np.abs(dv))),
            float(p.eps * np.max(np.abs(d2v))))


def check_layer_bounds(p: ProblemSpec, k_max: int = 2,
                       eps_grid: Sequence[float] = tuple(2.0 ** -k for k in range(4, 21)),
                       samples: int = 2000) -> BoundReport:
    """Infer the constants in the smooth/singular derivative bounds across ``eps``.

    For each ``eps``: ``|w^{(k)}(t)| <= C eps^{-k} e^{-alpha t/eps}``
    (``k <= k_max``), ``|v|, |v'| <= C`` and ``|v''| <= C/eps``.  A bound
    passes when its constant never exceeds ``DRIFT_LIMIT`` times its value
    at the largest ``eps`` of the grid.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    names = [f"w^({k})" for k in range(k_max + 1)] + ["v", "v'", "eps*v''"]
    table = np.zeros((eps_grid.size, len(names)))
    for i, e in enumerate(eps_grid):
        q = p.with_eps(float(e))
        t = sample_points(q, samples, seed=i)
        table[i, :k_max + 1] = [_layer_constants(q, t, k) for k in range(k_max + 1)]
        table[i, k_max + 1:] = _smooth_constants(q, t)
    ref = table[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        drift = np.where(ref > 0, table.max(axis=0) / np.where(ref > 0, ref, 1.0),
                         np.where(table.max(axis=0) > 0, np.inf, 0.0))
    margins = (DRIFT_LIMIT * ref[None, :] - table).ravel()
    passed = bool(np.all(drift < DRIFT_LIMIT))
    details = {f"C[{n}]": float(table[:, j].max()) for j, n in enumerate(names)}
    details.update({f"drift[{n}]": float(drift[j]) for j, n in enumerate(names)})
    report = BoundReport("layer bounds", margins, float(table.max()), passed, DRIFT_LIMIT,
                         details)
    if p.layer_amplitude == 0:
        report.notes.append("zero layer amplitude: singular bounds hold trivially")
    return report


def interval_extrema(p: ProblemSpec, m: Mesh, per_interval: int = 64):
    """Sampled ``(min a, max a)`` on each closed mesh interval."""
    frac = np.linspace(0.0, 1.0, per_interval + 2)
    s = m.nodes[:-1, None] + m.widths[:, None] * frac[None, :]
    vals = p.a(s) * np.ones_like(s)
    return vals.min(axis=1), vals.max(axis=1)


def check_sandwich(p: ProblemSpec, m: Mesh, rtol: float = 1e-12) -> BoundReport:
    """Per-interval decay of the singular component lies between the extreme frozen rates.

    With ``lo_j, hi_j`` the min and max of ``a`` on interval ``j``,
    ``w_j / w_{j-1} = exp(-int a / eps)`` must satisfy

        exp(-rho_j hi_j) <= w_j / w_{j-1} <= exp(-rho_j lo_j).

    The comparison runs on exponents so that underflowed ``w`` values
    still count.  The report also records whether the opposite
    orientation holds.
    """
    lo, hi = interval_extrema(p, m)
    rho = m.widths / p.eps
    rate = p.window_integral(m.nodes[1:], m.widths) / p.eps
    slack = rtol * rate
    lower = rate - rho * lo
    upper = rho * hi - rate
    margins = np.minimum(lower, upper) + slack
    bracket = exp_difference(rho * lo, rho * hi)
    report = BoundReport("sandwich", margins / np.maximum(rate, np.finfo(float).tiny),
                         float(np.max(hi - lo) / np.max(m.widths)),
                         bool(np.all(margins >= 0)), rtol,
                         {"intervals": m.N, "max_bracket_width": float(np.max(bracket))})
    if p.layer_amplitude == 0:
        report.notes.append("zero layer amplitude: ratio undefined, exponent form checked")
    opposite_ok = int(np.count_nonzero((rho * hi <= rate + slack) & (rate <= rho * lo + slack)))
    report.details["opposite_orientation_holds"] = opposite_ok
    if opposite_ok < m.N:
        report.notes.append(
            f"min-rate-below orientation fails on {m.N - opposite_ok}/{m.N} intervals; "
            "the decay factor sits between exp(-rho*max a) and exp(-rho*min a)")
    return report


def continuous_checks(p: ProblemSpec, samples: int = 1000):
    """Decomposition consistency and the ``|w(t)| <= |w(0)| e^{-alpha t/eps}`` bound."""
    t = sample_points(p, samples)
    u = exact_solution(p)
    dec = continuous_decomposition(p)
    gap = float(np.max(np.abs(u(t) - dec.smooth(t) - dec.singular(t))))
    w = np.abs(dec.singular(t))
    envelope = abs(p.layer_amplitude) * np.exp(-p.alpha * t / p.eps) * (1 + 1e-12)
    bad = int(np.count_nonzero(w > envelope))
    return CheckReport("continuous decomposition", gap <= 1e-9 and bad == 0, gap, 1e-9,
                       1e-9 - gap, bad, t.size)
