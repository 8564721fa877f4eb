"""Problem instances ``eps u' + a(t) u = f(t)``, ``u(0) = u0`` on ``[0, T]``.

Reference solutions come from the integrating-factor representation

    u(t) = exp(-A(t)/eps) u0 + J(t),
    J(t) = (1/eps) int_0^t exp(-(A(t) - A(s))/eps) f(s) ds,

where ``A`` is the antiderivative of ``a``.  ``J`` does not depend on
``u0``, so the smooth/singular split shares one quadrature.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .coefficients import BASIS, Coefficient, constant
from .exceptions import InvalidProblemError, QuadratureError
from .reports import CheckReport

# tau breakpoints for the layer kernel exp(-tau); the tail beyond 40 is below 5e-18
_TAU_BREAKS = np.array([0.0, 1.0, 3.0, 8.0, 18.0, 40.0])
_GAUSS_ORDERS = ((16, 24), (24, 32), (32, 48), (48, 64))
_STEP_RTOL = 1e-12
TARGET_ACCURACY = 1e-10


@lru_cache(maxsize=None)
def _gauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _derivative(func, t):
    if hasattr(func, "derivative"):
        return func.derivative(t)
    step = 1e-6
    return (func(t + step) - func(t - step)) / (2 * step)


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the initial value problem.

    ``a`` and ``f`` must accept numpy arrays.  When ``a`` is a
    :class:`~spfit.coefficients.Coefficient` its antiderivative is used for
    ``A``; otherwise ``A`` may be supplied, and is integrated numerically
    when absent.  ``alpha`` defaults to the sampled minimum of ``a``.
    """

    a: Callable
    f: Callable
    u0: float
    eps: float
    T: float = 1.0
    alpha: Optional[float] = None
    A: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise InvalidProblemError(f"eps must lie in (0, 1], got {self.eps!r}")
        if not self.T > 0:
            raise InvalidProblemError(f"T must be positive, got {self.T!r}")
        t = np.linspace(0.0, self.T, 1025)
        a_min = float(np.min(self.a(t)))
        alpha = a_min if self.alpha is None else float(self.alpha)
        if alpha <= 0:
            raise InvalidProblemError(f"alpha must be positive, got {alpha!r}")
        if a_min < alpha * (1 - 1e-14):
            raise InvalidProblemError(f"a(t) drops to {a_min:.6g} below alpha={alpha:.6g}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "u0", float(self.u0))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "T", float(self.T))
        if self.A is None and isinstance(self.a, Coefficient):
            object.__setattr__(self, "A", self.a.antiderivative)
        elif self.A is not None and not isinstance(self.a, Coefficient):
            self._check_antiderivative()

    def _check_antiderivative(self):
        rng = np.random.default_rng(0)
        lo, hi = np.sort(rng.uniform(0, self.T, size=(2, 16)), axis=0)
        x, w = _gauss01(20)
        s = lo[:, None] + (hi - lo)[:, None] * x
        quad = (hi - lo) * (self.a(s) @ w)
        diff = self.A(hi) - self.A(lo)
        if abs(float(self.A(0.0))) > 1e-14 or not np.allclose(diff, quad, rtol=1e-9, atol=1e-12):
            raise InvalidProblemError("A is not an antiderivative of a with A(0) = 0")

    def with_eps(self, eps: float) -> "ProblemSpec":
        return dataclasses.replace(self, eps=eps)

    def with_u0(self, u0: float) -> "ProblemSpec":
        return dataclasses.replace(self, u0=u0)

    @property
    def reduced_initial(self) -> float:
        """``f(0)/a(0)``, the starting value of the smooth component."""
        return float(self.f(np.float64(0.0)) / self.a(np.float64(0.0)))

    @property
    def layer_amplitude(self) -> float:
        return self.u0 - self.reduced_initial

    @property
    def has_constant_coefficients(self) -> bool:
        return all(isinstance(g, Coefficient) and g.is_constant for g in (self.a, self.f))

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.A is not None:
            return np.asarray(self.A(t), dtype=float)
        return self.window_integral(t, t)

    def window_integral(self, t, d):
        """``int_{t-d}^t a(s) ds`` computed without cancellation."""
        t = np.asarray(t, dtype=float)
        d = np.asarray(d, dtype=float)
        if isinstance(self.a, Coefficient):
            return self.a.window_integral(t, d)
        x, w = _gauss01(24)
        tt, dd = np.broadcast_arrays(t, d)
        s = tt[..., None] - dd[..., None] * (1.0 - x)
        return dd * (self.a(s) @ w)

    def a_prime(self, t):
        return _derivative(self.a, np.asarray(t, dtype=float))

    def f_prime(self, t):
        return _derivative(self.f, np.asarray(t, dtype=float))

    def forcing_scale(self) -> float:
        t = np.linspace(0.0, self.T, 1025)
        return float(np.max(np.abs(self.f(t) / self.a(t))))

    def forcing_sup(self) -> float:
        t = np.linspace(0.0, self.T, 1025)
        return float(np.max(np.abs(self.f(t) * np.ones_like(t))))


@dataclass(frozen=True)
class SolutionFunction:
    """Evaluable function on ``[0, T]`` with an absolute accuracy estimate."""

    evaluator: Callable
    accuracy_estimate: float
    kind: str  # closed_form | quadrature_reference | fine_mesh_reference

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.evaluator(t_arr), dtype=float)
        return float(out) if t_arr.ndim == 0 else out


@dataclass(frozen=True)
class Decomposition:
    """Smooth plus singular parts; continuous (functions) or discrete (nodal)."""

    smooth: object
    singular: object
    kind: str  # continuous | discrete


def reduced_solution(p: ProblemSpec) -> SolutionFunction:
    """``u_0(t) = f(t)/a(t)``, the solution with ``eps`` set to zero."""
    return SolutionFunction(lambda t: p.f(t) / p.a(t), 0.0, "closed_form")


# ---------------------------------------------------------------------------
# integrating-factor quadrature


def _solve_offsets(p: ProblemSpec, t, h, target):
    """Find ``d`` in ``[0, h]`` with ``int_{t-d}^t a = target`` (safeguarded Newton)."""
    a_t = p.a(t)
    first = target / a_t
    d = np.clip(first + 0.5 * p.a_prime(t) * first * first / a_t, 0.0, h)
    for _ in range(40):
        g = p.window_integral(t, d) - target
        step = g / p.a(t - d)
        d_new = np.clip(d - step, 0.0, h)
        done = np.abs(d_new - d) <= 4e-16 * (t + d)
        d = d_new
        if np.all(done):
            break
    return d


def _panel_integrals(p: ProblemSpec, t, h, W, n):
    """``int_0^min(W,40) exp(-tau) (f/a)(s(tau)) dtau`` for each step, with ``n``-point panels."""
    lo = _TAU_BREAKS[:-1]
    hi = _TAU_BREAKS[1:]
    step_idx, panel_idx = np.nonzero(W[:, None] > lo[None, :])
    a_lo = lo[panel_idx]
    a_hi = np.minimum(hi[panel_idx], W[step_idx])
    x, w = _gauss01(n)
    width = (a_hi - a_lo)[:, None]
    tau = a_lo[:, None] + width * x
    ts = t[step_idx][:, None]
    d = _solve_offsets(p, ts, h[step_idx][:, None], p.eps * tau)
    s = ts - d
    vals = np.exp(-tau) * (p.f(s) / p.a(s)) * (width * w)
    return np.bincount(step_idx, weights=vals.sum(axis=1), minlength=len(t))


def _step_integrals(p: ProblemSpec, t, h, W, scale):
    """Local integrals over each step, refined until two rules agree."""
    m = len(t)
    result = np.zeros(m)
    disc = np.zeros(m)
    pending = np.nonzero(W > 0)[0]
    for n_lo, n_hi in _GAUSS_ORDERS:
        if pending.size == 0:
            break
        tp, hp, Wp = t[pending], h[pending], W[pending]
        i_lo = _panel_integrals(p, tp, hp, Wp, n_lo)
        i_hi = _panel_integrals(p, tp, hp, Wp, n_hi)
        gap = np.abs(i_hi - i_lo)
        mag = np.maximum(np.abs(i_hi), scale * -np.expm1(-Wp))
        ok = gap <= _STEP_RTOL * mag + 1e-300
        result[pending] = i_hi
        disc[pending] = gap
        pending = pending[~ok]
    if pending.size:
        raise QuadratureError("integrating-factor quadrature did not converge",
                              achieved=float(np.max(disc[pending])))
    return result, disc


def forced_response(p: ProblemSpec, t):
    """``J(t)`` at sorted nonnegative points, and the accumulated error estimate."""
    t = np.asarray(t, dtype=float)
    nodes = np.concatenate(([0.0], t))
    h = np.diff(nodes)
    if np.any(h < 0):
        raise ValueError("forced_response expects sorted nonnegative points")
    scale = p.forcing_scale()
    if scale == 0.0:
        return np.zeros_like(t), 0.0
    W = p.window_integral(t, h) / p.eps
    local, disc = _step_integrals(p, t, h, W, scale)
    decay = np.exp(-W).tolist()
    J = np.empty_like(t)
    acc = 0.0
    for j, (e, i) in enumerate(zip(decay, local.tolist())):
        acc = e * acc + i
        J[j] = acc
    truncated = np.count_nonzero(W > _TAU_BREAKS[-1])
    estimate = float(disc.sum()) + truncated * np.exp(-_TAU_BREAKS[-1]) * scale
    estimate += len(t) * 2.3e-16 * scale
    return J, estimate


def _integrating_factor_values(p: ProblemSpec, t, u0):
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    if np.any(flat < 0):
        raise ValueError("solution evaluated at negative time")
    uniq, inverse = np.unique(flat, return_inverse=True)
    J, estimate = forced_response(p, uniq)
    if estimate > TARGET_ACCURACY:
        raise QuadratureError("reference accuracy target missed", achieved=estimate)
    u = np.exp(-p.antiderivative(uniq) / p.eps) * u0 + J
    return u[inverse].reshape(t.shape)


def _probe_points(p: ProblemSpec) -> np.ndarray:
    layer = p.eps * np.geomspace(1e-3, 60.0, 256) / p.alpha
    return np.unique(np.concatenate((np.linspace(0, p.T, 1025), layer[layer < p.T])))


def _closed_form(p: ProblemSpec, u0: float) -> SolutionFunction:
    a = p.a.constant_value
    steady = p.f.constant_value / a

    def evaluate(t):
        return steady + (u0 - steady) * np.exp(-a * np.asarray(t) / p.eps)

    return SolutionFunction(evaluate, 0.0, "closed_form")


def exact_solution(p: ProblemSpec, method: str = "auto") -> SolutionFunction:
    """Solution of the full problem.

    With ``method="auto"`` constant ``a`` and ``f`` give the closed form;
    anything else (or ``method="quadrature"``) uses the integrating-factor
    quadrature, whose accuracy estimate is measured on a probe grid that
    resolves the layer.
    """
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and p.has_constant_coefficients:
        return _closed_form(p, p.u0)
    _, estimate = forced_response(p, _probe_points(p))
    estimate = max(estimate, 1e-15)
    if estimate > TARGET_ACCURACY:
        raise QuadratureError("reference accuracy target missed", achieved=estimate)
    return SolutionFunction(lambda t: _integrating_factor_values(p, t, p.u0), estimate,
                            "quadrature_reference")


def singular_component(p: ProblemSpec) -> SolutionFunction:
    """``w(t) = (u0 - f(0)/a(0)) exp(-A(t)/eps)``."""
    amp = p.layer_amplitude
    return SolutionFunction(lambda t: amp * np.exp(-p.antiderivative(t) / p.eps), 0.0,
                            "closed_form")


def continuous_decomposition(p: ProblemSpec) -> Decomposition:
    """Split ``u = v + w``: ``v`` starts at ``f(0)/a(0)``, ``w`` solves the homogeneous problem."""
    v = exact_solution(p.with_u0(p.reduced_initial))
    return Decomposition(smooth=v, singular=singular_component(p), kind="continuous")


def sample_points(p: ProblemSpec, samples: int, seed: int = 0) -> np.ndarray:
    """Uniform plus layer-concentrated points, sorted, including ``t = 0``."""
    rng = np.random.default_rng(seed)
    n_layer = samples // 2
    layer = p.eps * rng.exponential(3.0, size=n_layer) / p.alpha
    bulk = rng.uniform(0.0, p.T, size=samples - n_layer)
    pts = np.concatenate(([0.0, p.T], bulk, layer[layer < p.T]))
    return np.unique(pts)


def continuous_stability_check(p: ProblemSpec, samples: int = 1000) -> CheckReport:
    """``|u(t)| <= max(|u0|, |f|_inf / alpha)`` at sample points."""
    t = sample_points(p, samples)
    u = exact_solution(p)(t)
    bound = max(abs(p.u0), p.forcing_sup() / p.alpha)
    observed = float(np.max(np.abs(u)))
    slack = bound * (1 + 1e-8) - np.abs(u)
    bad = int(np.count_nonzero(slack < 0))
    return CheckReport("continuous stability", bad == 0, observed, bound,
                       float(np.min(slack)), bad, len(t))


def continuous_max_principle_check(p: ProblemSpec, samples: int = 1000) -> CheckReport:
    """Nonnegative data must give a nonnegative solution."""
    t = sample_points(p, samples)
    if p.u0 < 0 or np.min(p.f(t)) < 0:
        return CheckReport("continuous maximum principle", True, skipped=True,
                           details={"reason": "data not nonnegative"})
    u = exact_solution(p)(t)
    bad = int(np.count_nonzero(u < -1e-10))
    return CheckReport("continuous maximum principle", bad == 0, float(np.min(u)), 0.0,
                       float(np.min(u) + 1e-10), bad, len(t))


# ---------------------------------------------------------------------------
# bundled problems

def _const_a1_f0(eps):
    return ProblemSpec(constant(1.0), constant(0.0), 1.0, eps, alpha=1.0, name="const_a1_f0")


def _steady(eps):
    return ProblemSpec(constant(2.0), constant(2.0), 1.0, eps, alpha=2.0, name="steady")


def _const_a1_f1_u3(eps):
    return ProblemSpec(constant(1.0), constant(1.0), 3.0, eps, alpha=1.0, name="const_a1_f1_u3")


def _var_linear(eps):
    a = BASIS["one"] + BASIS["t"]
    f = BASIS["one"] + BASIS["t2"]
    return ProblemSpec(a, f, 2.0, eps, alpha=1.0, name="var_linear")


def _var_sine(eps):
    a = 2 * BASIS["one"] + BASIS["sin_pi"]
    return ProblemSpec(a, BASIS["exp"], 0.0, eps, alpha=2.0, name="var_sine")


CATALOG: dict[str, Callable[[float], ProblemSpec]] = {
    "const_a1_f0": _const_a1_f0,
    "steady": _steady,
    "const_a1_f1_u3": _const_a1_f1_u3,
    "var_linear": _var_linear,
    "var_sine": _var_sine,
}


def get_problem(name: str, eps: float = 1.0, u0: Optional[float] = None) -> ProblemSpec:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(CATALOG)}") from None
    p = factory(eps)
    return p if u0 is None else p.with_u0(u0)
