"""Discretized Markov integral operators on ``C([a, b])`` and their adjoints.

A :class:`GridDomain` carries nodes and positive quadrature weights.  The
same weights are used to normalize the kernel, to apply the operator and to
apply its adjoint, so row-stochasticity and mass conservation hold as
floating-point identities rather than as quadrature approximations.

Measures are stored as point masses on the nodes; the density against the
base measure is ``mass / quad_weight``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

SAFETY_MARGIN = 1e-6
DEFAULT_GRID_SIZE = 2048


class KernelError(ValueError):
    """The kernel cannot be normalized into a Markov kernel."""


class NotCertifiedError(RuntimeError):
    """The contraction certificate failed, so no convergence is guaranteed."""


def trapezoid_weights(P: int, h: float) -> np.ndarray:
    q = np.full(P, h)
    q[0] = q[-1] = h / 2
    return q


def simpson_weights(P: int, h: float) -> np.ndarray:
    """Composite Simpson weights on ``P`` uniform nodes.

    With an odd number of intervals the last three use Simpson's 3/8 rule.
    All weights are positive.
    """
    if P < 3:
        return trapezoid_weights(P, h)
    n_int = P - 1
    q = np.zeros(P)
    m = n_int if n_int % 2 == 0 else n_int - 3
    if m >= 2:
        q[:m + 1:2] += 2 * h / 3
        q[1:m:2] += 4 * h / 3
        q[0] -= h / 3
        q[m] -= h / 3
    if m != n_int:
        q[m:m + 4] += np.array([3, 9, 9, 3]) * h / 8
    return q


QUADRATURE_RULES = {"trapezoid": trapezoid_weights, "simpson": simpson_weights}


@dataclass(frozen=True, eq=False)
class GridDomain:
    points: np.ndarray
    quad_weights: np.ndarray
    rule: str = "custom"

    def __post_init__(self):
        if self.points.shape != self.quad_weights.shape or self.points.ndim != 1:
            raise ValueError("points and quad_weights must be 1-D of equal length")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(self.quad_weights <= 0):
            raise ValueError("quadrature weights must be positive")
        self.points.setflags(write=False)
        self.quad_weights.setflags(write=False)

    @classmethod
    def uniform(cls, a: float, b: float, P: int = DEFAULT_GRID_SIZE, rule: str = "simpson") -> "GridDomain":
        if not a < b:
            raise ValueError("domain needs a < b")
        if P < 2:
            raise ValueError("grid needs at least 2 points")
        x = np.linspace(a, b, P)
        h = (b - a) / (P - 1)
        try:
            q = QUADRATURE_RULES[rule](P, h)
        except KeyError:
            raise ValueError(f"unknown quadrature rule {rule!r}") from None
        return cls(x, q, rule)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.quad_weights)

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    def nearest(self, x: float) -> tuple[int, float]:
        """Index of the node closest to ``x`` and the snap distance."""
        i = int(np.argmin(np.abs(self.points - x)))
        return i, abs(float(self.points[i]) - x)


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray

    @classmethod
    def from_callable(cls, dom: GridDomain, f: Callable) -> "GridFunction":
        return cls(np.broadcast_to(np.asarray(f(dom.points), dtype=float), dom.points.shape).copy())

    @classmethod
    def constant(cls, dom: GridDomain, c: float = 1.0) -> "GridFunction":
        return cls(np.full(dom.size, float(c)))


@dataclass(frozen=True, eq=False)
class GridMeasure:
    masses: np.ndarray
    snap_distance: float = 0.0

    @classmethod
    def zero(cls, dom: GridDomain) -> "GridMeasure":
        return cls(np.zeros(dom.size))

    @classmethod
    def base_probability(cls, dom: GridDomain) -> "GridMeasure":
        """The base measure normalized to total mass 1."""
        return cls(dom.quad_weights / dom.total_mass)

    @classmethod
    def point_mass(cls, dom: GridDomain, x: float, mass: float = 1.0) -> "GridMeasure":
        """Mass at the node nearest ``x``; the snap distance is recorded."""
        i, d = dom.nearest(x)
        m = np.zeros(dom.size)
        m[i] = mass
        return cls(m, d)

    @property
    def total(self) -> float:
        return math.fsum(self.masses)

    @property
    def tv(self) -> float:
        return math.fsum(np.abs(self.masses))

    def density(self, dom: GridDomain) -> np.ndarray:
        return self.masses / dom.quad_weights

    def is_probability(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.masses >= 0)) and abs(self.total - 1.0) <= tol

    def __sub__(self, other: "GridMeasure") -> "GridMeasure":
        return GridMeasure(self.masses - other.masses)


def tv_distance(a: GridMeasure, b: GridMeasure) -> float:
    return math.fsum(np.abs(a.masses - b.masses))


def pair(v: GridMeasure, f: GridFunction) -> float:
    """``integral f dv``."""
    return math.fsum(v.masses * f.values)


@dataclass(frozen=True, eq=False)
class NormalizedKernel:
    """Row-normalized kernel ``K~_ij = k(x_i, x_j) / d_i``, ``d_i = sum_j k(x_i, x_j) q_j``."""

    matrix: np.ndarray
    denominators: np.ndarray

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.matrix))

    def row_sums(self, dom: GridDomain) -> np.ndarray:
        return _matvec(self.matrix, dom.quad_weights)


def _matvec(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    # fixed-order numpy reduction: bit-stable regardless of BLAS threading
    return (A * x[None, :]).sum(axis=1)


def _rmatvec(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (A * x[:, None]).sum(axis=0)


def normalize_kernel(dom: GridDomain, k: Callable, min_denominator: float = 1e-12) -> NormalizedKernel:
    """Sample ``k`` on the grid and normalize rows against the quadrature weights.

    ``k`` is called once with broadcast arrays ``(x[:, None], y[None, :])``.

    Raises
    ------
    KernelError
        On a negative or non-finite sample, or a row integral ``<= min_denominator``.
    """
    x = dom.points
    raw = np.broadcast_to(np.asarray(k(x[:, None], x[None, :]), dtype=float), (dom.size, dom.size))
    if not np.all(np.isfinite(raw)):
        raise KernelError("kernel has non-finite samples")
    if np.any(raw < 0):
        i, j = np.unravel_index(int(np.argmin(raw)), raw.shape)
        raise KernelError(f"kernel is negative at ({x[i]!r}, {x[j]!r}): {raw[i, j]!r}")
    d = _matvec(raw, dom.quad_weights)
    if np.any(d <= min_denominator):
        i = int(np.argmin(d))
        raise KernelError(f"row integral vanishes at x = {x[i]!r} (d = {d[i]!r})")
    return NormalizedKernel(raw / d[:, None], d)


def markov_apply(K: NormalizedKernel, dom: GridDomain, f: GridFunction) -> GridFunction:
    """``(T f)(x_i) = sum_j K~_ij f(x_j) q_j``."""
    return GridFunction(_matvec(K.matrix, f.values * dom.quad_weights))


def adjoint_apply(K: NormalizedKernel, dom: GridDomain, v: GridMeasure) -> GridMeasure:
    """``T* v`` with density ``rho_j = sum_i K~_ij m_i`` and masses ``rho_j q_j``."""
    rho = _rmatvec(K.matrix, v.masses)
    return GridMeasure(rho * dom.quad_weights)


@dataclass(frozen=True)
class ContractionCertificate:
    ktilde_sup: float
    total_mass: float
    safety_margin: float = SAFETY_MARGIN

    @property
    def threshold(self) -> float:
        return 2.0 / self.total_mass

    @property
    def rate(self) -> float:
        return 0.5 * self.ktilde_sup * self.total_mass

    @property
    def passed(self) -> bool:
        return self.ktilde_sup < self.threshold - self.safety_margin

    def to_dict(self) -> dict:
        return {
            "ktilde_sup": self.ktilde_sup,
            "threshold": self.threshold,
            "rate": self.rate,
            "passed": self.passed,
            "total_mass": self.total_mass,
            "safety_margin": self.safety_margin,
            "note": "ktilde_sup is a grid maximum, a lower bound on the true supremum",
        }


def contraction_certificate(
    K: NormalizedKernel, dom: GridDomain, safety_margin: float = SAFETY_MARGIN
) -> ContractionCertificate:
    """Bound on the adjoint's contraction of zero-mass measures: ``rate = ||K~|| mu(Omega) / 2``."""
    return ContractionCertificate(K.sup_norm, dom.total_mass, safety_margin)


def hilbert_dual_norm(v: GridMeasure, tol: float = 1e-10) -> float:
    """Half the total variation of a zero-mass measure.

    Raises
    ------
    ValueError
        If the total mass is not zero within ``tol``.
    """
    if abs(v.total) > tol:
        raise ValueError(f"Hilbert dual norm needs zero total mass, got {v.total!r}")
    return 0.5 * v.tv


def thompson_norm(f: GridFunction) -> float:
    """Order-unit norm with unit 1, i.e. the sup norm."""
    return float(np.max(np.abs(f.values))) if f.values.size else 0.0


def random_zero_mass(dom: GridDomain, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` zero-mass measures (as columns) built as differences of random probability vectors."""
    a = rng.random((dom.size, count))
    b = rng.random((dom.size, count))
    return a / a.sum(axis=0) - b / b.sum(axis=0)


def observed_contraction(
    K: NormalizedKernel, dom: GridDomain, trials: int = 500, seed: int = 0
) -> float:
    """Largest ``TV(T* v) / TV(v)`` over random zero-mass ``v``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    V = random_zero_mass(dom, rng, trials)
    out = (K.matrix.T @ V) * dom.quad_weights[:, None]
    ratios = np.abs(out).sum(axis=0) / np.abs(V).sum(axis=0)
    return float(np.max(ratios))


@dataclass
class InvariantMeasureResult:
    pi: GridMeasure
    iterations: int
    residual: float
    converged: bool
    rate: float
    diff_history: list[float]
    rate_history: list[float]
    distance_bound: float
    iterates: list[GridMeasure] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "rate": self.rate,
            "distance_bound": self.distance_bound,
            "diff_history": self.diff_history,
            "rate_history": self.rate_history,
        }


def invariant_measure(
    K: NormalizedKernel,
    dom: GridDomain,
    start: GridMeasure,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    keep_iterates: bool = False,
) -> InvariantMeasureResult:
    """Power iteration ``v_{n+1} = T* v_n`` to the invariant probability measure.

    Stops once ``TV(v_{n+1} - v_n) < tol``.  ``distance_bound`` is the Banach
    estimate ``rate / (1 - rate) * TV(v_{n+1} - v_n)`` on the distance of the
    returned iterate to the true fixed point.

    Raises
    ------
    NotCertifiedError
        If the contraction certificate fails.
    ValueError
        If ``start`` is not a probability measure.
    """
    cert = contraction_certificate(K, dom)
    if not cert.passed:
        raise NotCertifiedError(
            f"contraction certificate failed: ||k~|| = {cert.ktilde_sup:.6g} is not below "
            f"2/mu(Omega) - margin = {cert.threshold - cert.safety_margin:.6g} "
            f"(rate {cert.rate:.6g} >= 1); power iteration has no convergence guarantee"
        )
    if not start.is_probability():
        raise ValueError("start must be a probability measure")
    rate = cert.rate
    v = start
    iterates = [v] if keep_iterates else None
    diffs: list[float] = []
    ratios: list[float] = []
    converged = False
    for it in range(1, max_iter + 1):
        nxt = adjoint_apply(K, dom, v)
        d = tv_distance(nxt, v)
        if diffs and diffs[-1] > 0:
            ratios.append(d / diffs[-1])
        diffs.append(d)
        v = nxt
        if keep_iterates:
            iterates.append(v)
        if d < tol:
            converged = True
            break
    residual = tv_distance(adjoint_apply(K, dom, v), v)
    bound = rate / (1 - rate) * diffs[-1]
    return InvariantMeasureResult(
        pi=v,
        iterations=it,
        residual=residual,
        converged=converged,
        rate=rate,
        diff_history=diffs,
        rate_history=ratios,
        distance_bound=bound,
        iterates=iterates,
    )


def forward_spread(
    K: NormalizedKernel, dom: GridDomain, f: GridFunction, steps: int
) -> list[float]:
    """Oscillation ``max T^n f - min T^n f`` for ``n = 0..steps``; a diagnostic only."""
    out = []
    g = f
    for _ in range(steps + 1):
        out.append(float(np.ptp(g.values)))
        g = markov_apply(K, dom, g)
    return out


# ---------------------------------------------------------------------------
# kernel presets
# ---------------------------------------------------------------------------

def paper_sine_kernel(x, y):
    return 0.25 * np.sin(0.25 * (x + y))


def paper_kernel(P: int = DEFAULT_GRID_SIZE, rule: str = "simpson") -> tuple[GridDomain, Callable]:
    """Lebesgue measure on ``[0, 2 pi]`` with ``k(x, y) = sin((x + y)/4) / 4``."""
    return GridDomain.uniform(0.0, 2 * math.pi, P, rule), paper_sine_kernel


def paper_normalizer(x):
    """Exact row integral of the sine kernel: ``cos(x/4) + sin(x/4)``."""
    return np.cos(0.25 * np.asarray(x)) + np.sin(0.25 * np.asarray(x))


def constant_kernel(x, y):
    return np.ones(np.broadcast(x, y).shape)


def gauss_kernel(sigma: float) -> Callable:
    if not sigma > 0:
        raise ValueError("gauss kernel needs sigma > 0")

    def k(x, y):
        return np.exp(-((x - y) ** 2) / (2 * sigma**2))

    return k


def kernel_from_preset(
    spec: str,
    P: int = DEFAULT_GRID_SIZE,
    domain: tuple[float, float] | None = None,
    rule: str = "simpson",
) -> tuple[GridDomain, Callable]:
    """``"paper-sine"``, ``"constant"``, ``"gauss:sigma"`` or ``"table:<csv path>"``.

    The sine kernel defaults to ``[0, 2 pi]``, the others to ``[0, 1]``.
    """
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "table":
        return load_tabulated_kernel(arg)
    if name == "paper-sine":
        a, b = domain or (0.0, 2 * math.pi)
        k = paper_sine_kernel
    elif name == "constant":
        a, b = domain or (0.0, 1.0)
        k = constant_kernel
    elif name == "gauss":
        a, b = domain or (0.0, 1.0)
        k = gauss_kernel(float(arg))
    else:
        raise ValueError(f"unknown kernel preset {spec!r}")
    return GridDomain.uniform(a, b, P, rule), k


def load_tabulated_kernel(path: str | Path, rule: str = "trapezoid") -> tuple[GridDomain, Callable]:
    """Read ``x,y,k`` triples covering a full tensor grid.

    The nodes are the sorted distinct ``x`` values and must equal the
    distinct ``y`` values.  The returned kernel only answers on those nodes.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y", "k"} <= set(reader.fieldnames):
            raise KernelError("tabulated kernel needs columns x,y,k")
        for r in reader:
            rows.append((float(r["x"]), float(r["y"]), float(r["k"])))
    xs = np.unique([r[0] for r in rows])
    ys = np.unique([r[1] for r in rows])
    if not np.array_equal(xs, ys):
        raise KernelError("tabulated kernel: x and y node sets differ")
    P = len(xs)
    if len(rows) != P * P:
        raise KernelError(f"tabulated kernel: expected {P * P} triples, got {len(rows)}")
    table = np.full((P, P), np.nan)
    for x, y, kv in rows:
        table[np.searchsorted(xs, x), np.searchsorted(xs, y)] = kv
    if np.any(np.isnan(table)):
        raise KernelError("tabulated kernel: duplicate or missing (x, y) pairs")
    h = np.diff(xs)
    if rule == "trapezoid":
        q = np.zeros(P)
        q[:-1] += h / 2
        q[1:] += h / 2
    else:
        raise ValueError("tabulated kernels support only the trapezoid rule")
    dom = GridDomain(xs, q, "trapezoid")

    def k(x, y):
        i = np.searchsorted(xs, np.asarray(x))
        j = np.searchsorted(xs, np.asarray(y))
        return table[i, j]

    return dom, k
