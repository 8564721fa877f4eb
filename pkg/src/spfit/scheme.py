"""Fitted and standard backward Euler on arbitrary meshes.

The discrete operator is ``eps * sigma_j * D^- U_j + a_j U_j`` with
``a_j = a(t_j)`` and ``rho_j = h_j / eps``; the fitted scheme uses
``sigma_j = x/(e^x - 1)`` with ``x = a_j rho_j``, the standard scheme
``sigma_j = 1``.  Both reduce to the forward recurrence

    U_j = c_j U_{j-1} + d_j g_j,

with strictly positive ``c_j, d_j``.  For the fitted scheme
``c_j = exp(-x)`` and ``d_j = (1 - exp(-x)) / a_j``, which stays bounded
as ``eps -> 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, require_valid
from .problem import Decomposition, ProblemSpec
from .reports import CheckReport

SCHEMES = ("fitted", "standard")
_SMALL_X = 1e-2
_LARGE_X = 30.0


def fitting_factor(a_j, rho_j):
    """``sigma = x/(e^x - 1)`` with ``x = a_j * rho_j``; equal to 1 at ``rho_j = 0``.

    Small ``x`` uses the Taylor series, moderate ``x`` goes through ``expm1`` and large ``x`` through
    ``x e^{-x}/(1 - e^{-x})`` so nothing cancels or overflows.
    """
    a_j = np.asarray(a_j, dtype=float)
    rho_j = np.asarray(rho_j, dtype=float)
    if np.any(a_j <= 0):
        raise ValueError("fitting factor needs a_j > 0")
    if np.any(rho_j < 0) or np.any(np.isnan(rho_j)):
        raise ValueError("fitting factor needs rho_j >= 0")
    x = a_j * rho_j
    out = np.ones(x.shape)
    small = (x > 0) & (x < _SMALL_X)
    mid = (x >= _SMALL_X) & (x < _LARGE_X)
    large = x >= _LARGE_X
    xs = x[small]
    out[small] = 1.0 - xs / 2.0 + xs * xs / 12.0 - xs ** 4 / 720.0
    out[mid] = x[mid] / np.expm1(x[mid])
    e = np.exp(-x[large])
    out[large] = x[large] * e / -np.expm1(-x[large])
    return float(out) if out.ndim == 0 else out


def exp_difference(p, q):
    """``|e^{-p} - e^{-q}|`` for nonnegative arguments, without cancellation."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.exp(-np.minimum(p, q)) * -np.expm1(-np.abs(p - q))


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected 'fitted' or 'standard'")


def recurrence_coefficients(p: ProblemSpec, m: Mesh, scheme: str = "fitted"):
    """``(c, d)`` for ``U_j = c_j U_{j-1} + d_j g_j``, ``j = 1..N``, and ``a_j``."""
    _check_scheme(scheme)
    t = m.nodes[1:]
    a = p.a(t) * np.ones_like(t)
    rho = m.widths / p.eps
    x = a * rho
    if scheme == "fitted":
        c = np.exp(-x)
        d = -np.expm1(-x) / a
    else:
        c = 1.0 / (1.0 + x)
        d = rho / (1.0 + x)
    return c, d, a


def _march(c, d, g, start):
    out = np.empty(c.size + 1)
    out[0] = start
    acc = float(start)
    for j, (cj, dj, gj) in enumerate(zip(c.tolist(), d.tolist(), g.tolist()), start=1):
        acc = cj * acc + dj * gj
        out[j] = acc
    return out


def solve_mesh_function(p: ProblemSpec, m: Mesh, g, start: float, scheme: str = "fitted"):
    """Solve ``L^N Psi = g`` (``g`` at nodes ``1..N``) with ``Psi_0 = start``."""
    c, d, _ = recurrence_coefficients(p, m, scheme)
    g = np.broadcast_to(np.asarray(g, dtype=float), c.shape)
    return _march(c, d, g, start)


def apply_operator(p: ProblemSpec, m: Mesh, values, scheme: str = "fitted"):
    """``(L^N Psi)_j`` for ``j = 1..N``; uses ``eps sigma_j / h_j = a_j / (e^x - 1)``."""
    values = np.asarray(values, dtype=float)
    c, d, a = recurrence_coefficients(p, m, scheme)
    # (Psi_j - c_j Psi_{j-1}) / d_j rearranges the recurrence without forming eps/h
    return (values[1:] - c * values[:-1]) / d


@dataclass(frozen=True)
class DiscreteSolution:
    mesh: Mesh
    values: np.ndarray
    scheme: str
    problem: ProblemSpec

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes


def solve(p: ProblemSpec, m: Mesh, scheme: str = "fitted") -> DiscreteSolution:
    """March the scheme from ``U_0 = u0``."""
    _check_scheme(scheme)
    require_valid(m, p.T)
    f = p.f(m.nodes[1:]) * np.ones(m.N)
    values = solve_mesh_function(p, m, f, p.u0, scheme)
    values.setflags(write=False)
    return DiscreteSolution(m, values, scheme, p)


def discrete_decompose(p: ProblemSpec, m: Mesh, scheme: str = "fitted") -> Decomposition:
    """``V`` solves the scheme from ``f(0)/a(0)``; ``W`` the homogeneous scheme from the remainder."""
    _check_scheme(scheme)
    require_valid(m, p.T)
    v0 = p.reduced_initial
    V = solve(p.with_u0(v0), m, scheme)
    w_vals = solve_mesh_function(p, m, 0.0, p.u0 - v0, scheme)
    w_vals.setflags(write=False)
    W = DiscreteSolution(m, w_vals, scheme, p.with_u0(p.u0 - v0))
    return Decomposition(smooth=V, singular=W, kind="discrete")


def check_discrete_max_principle(p: ProblemSpec, m: Mesh, scheme: str = "fitted",
                                 trials: int = 1000, seed: int = 0) -> CheckReport:
    """Random nonnegative data ``g >= 0``, ``Psi_0 >= 0`` must give ``Psi >= 0``."""
    name = f"discrete maximum principle ({scheme})"
    if trials <= 0:
        return CheckReport(name, False, skipped=True, details={"reason": "trials=0"})
    require_valid(m, p.T)
    c, d, a = recurrence_coefficients(p, m, scheme)
    rng = np.random.default_rng(seed)
    worst = np.inf
    lowest = np.inf
    bad = 0
    for _ in range(trials):
        # mix of strictly positive, sparse and zero data
        g = rng.exponential(1.0, m.N) * (rng.random(m.N) < rng.uniform(0.0, 1.0))
        psi0 = rng.exponential(1.0) * (rng.random() < 0.8)
        psi = _march(c, d, g, psi0)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(psi))))
        margin = float(np.min(psi)) + tol
        worst = min(worst, margin)
        lowest = min(lowest, float(np.min(psi)))
        bad += margin < 0
    coeff_ok = bool(np.all(c > 0) and np.all(d > 0))
    return CheckReport(name, bad == 0 and coeff_ok, lowest, 0.0, worst, bad, trials,
                       details={"positive_coefficients": coeff_ok})


def check_discrete_stability(U: DiscreteSolution) -> CheckReport:
    """``max |U_j| <= max(|U_0|, |L^N U|_inf / alpha)``."""
    p = U.problem
    Lu = apply_operator(p, U.mesh, U.values, U.scheme)
    f_sup = float(np.max(np.abs(p.f(U.mesh.nodes[1:]) * np.ones(U.mesh.N))))
    bound = max(abs(float(U.values[0])), f_sup / p.alpha)
    observed = float(np.max(np.abs(U.values)))
    slack = bound * (1 + 1e-12) - np.abs(U.values)
    bad = int(np.count_nonzero(slack < 0))
    return CheckReport(f"discrete stability ({U.scheme})", bad == 0, observed, bound,
                       float(np.min(slack)), bad, U.values.size,
                       details={"operator_residual": float(np.max(np.abs(Lu - p.f(U.mesh.nodes[1:]))))})


def sigma_property_sweep(samples: int = 1_000_000, seed: int = 0) -> CheckReport:
    """``0 < sigma < 1`` and ``1 - sigma <= min(1, a rho / 2)`` on random ``(a, rho)``.

    ``rho`` is log-uniform on ``[1e-8, 1e2]`` and ``a`` uniform on
    ``[0.01, 5]``; below ``x ~ 2e-16`` the factor rounds to exactly 1, so
    the strict upper bound is a statement about floats only above that.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.01, 5.0, samples)
    rho = 10.0 ** rng.uniform(-8.0, 2.0, samples)
    sigma = fitting_factor(a, rho)
    x = a * rho
    gap = 1.0 - sigma
    bound = np.minimum(1.0, 0.5 * x)
    # 1 - sigma = x/2 - x^2/12 + ...; allow one rounding unit of slack
    ok = (sigma > 0) & (sigma < 1) & (gap <= bound * (1 + 1e-15) + 1.2e-16)
    bad = int(np.count_nonzero(~ok))
    margin = float(np.min(bound - gap))
    return CheckReport("fitting factor bounds", bad == 0, float(np.max(gap / bound)), 1.0,
                       margin, bad, samples)


def check_exp_difference(samples: int = 100_000, seed: int = 0) -> CheckReport:
    """``|e^{-p} - e^{-q}| <= |p - q| e^{-min(p, q)}`` for random positive pairs."""
    rng = np.random.default_rng(seed)
    p = 10.0 ** rng.uniform(-6, 2.5, samples)
    q = 10.0 ** rng.uniform(-6, 2.5, samples)
    lhs = exp_difference(p, q)
    rhs = np.abs(p - q) * np.exp(-np.minimum(p, q))
    ok = lhs <= rhs * (1 + 1e-14)
    bad = int(np.count_nonzero(~ok))
    return CheckReport("exponential difference inequality", bad == 0,
                       float(np.max(np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), 0))), 1.0,
                       float(np.min(rhs - lhs)), bad, samples)
