"""Non-uniform meshes on ``[0, T]`` with a checkable width bound ``h_j <= c_mesh * T / N``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidMeshError

KINDS = ("uniform", "random", "graded", "custom")
# PCG64 via numpy's default_rng; recorded in reports for reproducibility
PRNG_NAME = "numpy.random.PCG64"
_WIDTH_RTOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    kind: str = "custom"
    c_mesh: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidMeshError("a mesh needs at least two nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if self.kind not in KINDS:
            raise InvalidMeshError(f"unknown mesh kind {self.kind!r}")

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __len__(self):
        return self.nodes.size


@dataclass
class ValidationReport:
    passed: bool
    failures: list = field(default_factory=list)  # (check, index, message)

    def __bool__(self):
        return self.passed

    def message(self) -> str:
        return "; ".join(msg for _, _, msg in self.failures) or "ok"


def validate(m: Mesh, T: Optional[float] = None) -> ValidationReport:
    """Check endpoints, strict monotonicity and the width bound."""
    failures = []
    nodes = m.nodes
    if nodes[0] != 0.0:
        failures.append(("start", 0, f"first node is {nodes[0]!r}, expected 0"))
    if T is not None and not np.isclose(nodes[-1], T, rtol=1e-12, atol=0):
        failures.append(("end", m.N, f"last node is {nodes[-1]!r}, expected T={T!r}"))
    h = np.diff(nodes)
    bad = np.nonzero(h <= 0)[0]
    if bad.size:
        j = int(bad[0]) + 1
        failures.append(("monotone", j, f"non-monotone at j={j}: h_{j}={h[j - 1]!r}"))
    if nodes[-1] > 0:
        limit = m.c_mesh * nodes[-1] / m.N
        over = np.nonzero(h > limit * (1 + _WIDTH_RTOL))[0]
        if over.size:
            j = int(over[0]) + 1
            failures.append(("width", j, f"h_{j}={h[j - 1]!r} exceeds c_mesh*T/N={limit!r}"))
    return ValidationReport(not failures, failures)


def require_valid(m: Mesh, T: Optional[float] = None) -> Mesh:
    report = validate(m, T)
    if not report:
        raise InvalidMeshError(f"invalid mesh: {report.message()}", report)
    return m


def _check_args(N, T):
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")


def _from_widths(widths, T):
    nodes = np.concatenate(([0.0], np.cumsum(widths)))
    nodes *= T / nodes[-1]
    nodes[-1] = T
    return nodes


def uniform_mesh(N: int, T: float = 1.0) -> Mesh:
    _check_args(N, T)
    nodes = np.linspace(0.0, T, int(N) + 1)
    return Mesh(nodes, "uniform", 1.0)


def random_quasi_uniform_mesh(N: int, T: float = 1.0, seed: int = 0, spread: float = 0.5) -> Mesh:
    """Widths drawn from ``U[1 - spread, 1 + spread]`` and rescaled to sum to ``T``.

    The largest width is at most ``(1 + spread)/(1 - spread) * T/N``.
    """
    _check_args(N, T)
    if not 0.0 <= spread < 1.0:
        raise ValueError(f"spread must lie in [0, 1), got {spread!r}")
    c_mesh = (1 + spread) / (1 - spread)
    if spread == 0.0:
        return Mesh(np.linspace(0.0, T, int(N) + 1), "random", c_mesh, seed)
    rng = np.random.default_rng(seed)
    widths = rng.uniform(1 - spread, 1 + spread, size=int(N))
    return Mesh(_from_widths(widths, T), "random", c_mesh, seed)


def _grading_ratio(N, target):
    """Ratio ``q`` of a geometric width sequence whose last width is ``target`` times the mean."""
    def last_over_mean(q):
        return N * (q - 1) / (q - q ** (1 - N))

    lo, hi = 1.0, 2.0
    while last_over_mean(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if last_over_mean(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo


def graded_mesh(N: int, T: float = 1.0, grading: float = 2.0) -> Mesh:
    """Geometric widths, finest at ``t = 0``, the last one ``grading * T/N``.

    When ``N`` is too small for that ratio to be reachable the largest
    width is set to ``(1 + N)/2 * T/N``, still inside the bound.
    """
    _check_args(N, T)
    if grading < 1.0:
        raise ValueError(f"grading must be >= 1, got {grading!r}")
    N = int(N)
    target = min(grading, 0.5 * (1 + N))
    if N == 1 or target == 1.0:
        return Mesh(np.linspace(0.0, T, N + 1), "graded", grading)
    q = _grading_ratio(N, target)
    widths = q ** np.arange(N)
    return Mesh(_from_widths(widths, T), "graded", grading)


def make_mesh(kind: str, N: int, T: float = 1.0, *, seed: int = 0, spread: float = 0.5,
              grading: float = 2.0) -> Mesh:
    if kind == "uniform":
        return uniform_mesh(N, T)
    if kind == "random":
        return random_quasi_uniform_mesh(N, T, seed=seed, spread=spread)
    if kind == "graded":
        return graded_mesh(N, T, grading)
    raise ValueError(f"unknown mesh kind {kind!r}; expected uniform, random or graded")


def load_mesh(path, c_mesh: float = 1.0) -> Mesh:
    """Read one node per line (blank lines and ``#`` comments ignored)."""
    nodes = np.loadtxt(path, comments="#", ndmin=1)
    return Mesh(nodes, "custom", c_mesh)
