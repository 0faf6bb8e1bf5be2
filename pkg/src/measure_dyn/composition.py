"""Weighted composition operators ``T f = w * (f o alpha)`` and their adjoints.

The adjoint ``T*`` acts on atomic measures by a weighted pushforward along
``alpha``; ``S = T^{-1}`` and ``S*`` run the orbit backwards.  The certificate
functions scan sup-norms of the iterated weight products over a compact
window, which is the uniform sufficient condition for hyper-transitivity,
cosine-function transitivity and chaos of ``T*`` on ``M(R)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .measures import (
    AtomicMeasure,
    _check_injective,
    add,
    scale,
    sum_measures,
    tv_norm,
)

logger = logging.getLogger(__name__)

LOG_SPACE_THRESHOLD = 64
DEFAULT_GRID_POINTS = 4001
RATIO_CUT = 1e-16
MAX_DIVERGENCE_TERMS = 64
MAX_SERIES_TERMS = 100_000


class PreconditionError(ValueError):
    """An operation's precondition does not hold at the working resolution."""


@dataclass(frozen=True)
class WeightSystem:
    """Dynamical data ``(alpha, alpha^{-1}, w)`` with bounds on ``w`` and ``1/w``.

    All callables must accept and return numpy arrays elementwise.
    """

    alpha: Callable
    alpha_inv: Callable
    w: Callable
    w_sup: float
    w_inv_sup: float
    name: str = "custom"
    alpha_monotone: bool = True

    def check(self, lo: float, hi: float, points: int = 1001) -> None:
        """Validate the invariants on a sample of ``[lo, hi]``."""
        t = np.linspace(lo, hi, points)
        back = self.alpha_inv(self.alpha(t))
        if not np.allclose(back, t, rtol=0.0, atol=1e-9):
            raise ValueError(f"{self.name}: alpha_inv(alpha(t)) != t on [{lo}, {hi}]")
        wt = np.asarray(self.w(t), dtype=float)
        if np.any(wt <= 0):
            raise ValueError(f"{self.name}: weight must be positive")
        slack = 1e-12
        if np.any(wt > self.w_sup * (1 + slack)) or np.any(
            wt < (1 / self.w_inv_sup) * (1 - slack)
        ):
            raise ValueError(f"{self.name}: weight outside declared bounds")


def _shift(t):
    return t + 1.0


def _unshift(t):
    return t - 1.0


def _paper_w(t):
    return np.clip(1.25 - 0.75 * np.asarray(t, dtype=float), 0.5, 2.0)


def paper_weight() -> WeightSystem:
    """Translation ``t -> t + 1`` with weight 2 left of -1, 1/2 right of 1, affine between."""
    return WeightSystem(
        alpha=_shift, alpha_inv=_unshift, w=_paper_w, w_sup=2.0, w_inv_sup=2.0, name="paper"
    )


def constant_weight(c: float) -> WeightSystem:
    if c <= 0:
        raise ValueError("constant weight must be positive")

    def w(t):
        return np.full(np.shape(t), float(c))

    return WeightSystem(_shift, _unshift, w, w_sup=c, w_inv_sup=1.0 / c, name=f"constant:{c:g}")


def two_sided_weight(M: float, eps: float, K1: float, K2: float) -> WeightSystem:
    """Translation with ``w = 1+eps`` on ``(-inf, -K1]``, ``1-eps`` on ``[K2, inf)``, affine between.

    This is the slowest-decaying member of the family bounded by ``M``.
    """
    if not (eps > 0 and M > 0 and K1 > 0 and K2 > 0):
        raise ValueError("two-sided weight needs M, eps, K1, K2 > 0")
    if not (1 + eps < M and 1 - eps > 1 / M):
        raise ValueError("two-sided weight needs 1+eps < M and 1-eps > 1/M")
    left, right = 1.0 + eps, 1.0 - eps

    def w(t):
        return np.interp(np.asarray(t, dtype=float), [-K1, K2], [left, right])

    return WeightSystem(
        _shift, _unshift, w, w_sup=M, w_inv_sup=M, name=f"two-sided:{M:g},{eps:g},{K1:g},{K2:g}"
    )


def weight_from_preset(spec: str) -> WeightSystem:
    """Parse ``"paper"``, ``"constant:c"`` or ``"two-sided:M,eps,K1,K2"``."""
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    if name == "paper" and not args:
        return paper_weight()
    if name == "constant":
        return constant_weight(float(args))
    if name == "two-sided":
        vals = [float(a) for a in args.split(",")]
        if len(vals) != 4:
            raise ValueError("two-sided preset needs four parameters M,eps,K1,K2")
        return two_sided_weight(*vals)
    raise ValueError(f"unknown weight system preset {spec!r}")


@dataclass(frozen=True)
class CompactWindow:
    lo: float
    hi: float
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("window needs lo < hi")
        if self.grid_points < 2:
            raise ValueError("window needs at least 2 grid points")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.grid_points)


# ---------------------------------------------------------------------------
# weight products and iterates
# ---------------------------------------------------------------------------

def _orbit_product(ws: WeightSystem, t, n: int, backward: bool) -> np.ndarray:
    # forward: w(t) w(alpha t) ... w(alpha^{n-1} t); backward: 1/w(alpha^{-1} t) ... 1/w(alpha^{-n} t)
    t = np.asarray(t, dtype=float)
    log_space = n > LOG_SPACE_THRESHOLD
    acc = np.zeros_like(t) if log_space else np.ones_like(t)
    for _ in range(n):
        if backward:
            t = ws.alpha_inv(t)
        wt = ws.w(t)
        if log_space:
            acc = acc - np.log(wt) if backward else acc + np.log(wt)
        else:
            acc = acc / wt if backward else acc * wt
        if not backward:
            t = ws.alpha(t)
    return np.exp(acc) if log_space else acc


def forward_weight_product(ws: WeightSystem, t, n: int):
    """``prod_{j=0}^{n-1} w(alpha^j(t))``; scalar in, float out, arrays elementwise."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = _orbit_product(ws, t, n, backward=False)
    return float(out) if np.ndim(t) == 0 else out


def backward_weight_product(ws: WeightSystem, t, n: int):
    """``prod_{j=1}^{n} w(alpha^{-j}(t))^{-1}``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = _orbit_product(ws, t, n, backward=True)
    return float(out) if np.ndim(t) == 0 else out


def _iterate(step, t, n: int):
    t = np.asarray(t, dtype=float)
    for _ in range(n):
        t = step(t)
    return t


def apply_T_iter(ws: WeightSystem, f: Callable, n: int) -> Callable:
    """Evaluator for ``T^n f = (prod_{j<n} w o alpha^j) * (f o alpha^n)``."""
    if n == 0:
        return f

    def Tn_f(t):
        return forward_weight_product(ws, t, n) * f(_iterate(ws.alpha, t, n))

    return Tn_f


def apply_S_iter(ws: WeightSystem, f: Callable, n: int) -> Callable:
    """Evaluator for ``S^n f = T^{-n} f``."""
    if n == 0:
        return f

    def Sn_f(t):
        return backward_weight_product(ws, t, n) * f(_iterate(ws.alpha_inv, t, n))

    return Sn_f


def adjoint_T_star(ws: WeightSystem, m: AtomicMeasure, n: int) -> AtomicMeasure:
    """``T*^n m``: atom ``(x, c)`` goes to ``(alpha^n(x), c * prod_{j<n} w(alpha^j x))``."""
    if n == 0 or m.is_empty:
        return m
    y = _iterate(ws.alpha, m.locations, n)
    _check_injective(y, m.merge_tolerance)
    c = m.weights * forward_weight_product(ws, m.locations, n)
    return AtomicMeasure.from_arrays(y, c, m.merge_tolerance)


def adjoint_S_star(ws: WeightSystem, m: AtomicMeasure, n: int) -> AtomicMeasure:
    """``S*^n m``: atom ``(x, c)`` goes to ``(alpha^{-n}(x), c * prod_{j=1}^n w(alpha^{-j} x)^{-1})``."""
    if n == 0 or m.is_empty:
        return m
    y = _iterate(ws.alpha_inv, m.locations, n)
    _check_injective(y, m.merge_tolerance)
    c = m.weights * backward_weight_product(ws, m.locations, n)
    return AtomicMeasure.from_arrays(y, c, m.merge_tolerance)


def cosine_adjoint(ws: WeightSystem, m: AtomicMeasure, n: int) -> AtomicMeasure:
    """``C^(n)* m = (T*^n m + S*^n m) / 2``."""
    return scale(add(adjoint_T_star(ws, m, n), adjoint_S_star(ws, m, n)), 0.5)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    n: int
    sup_forward: float
    sup_backward: float
    extra: tuple[float, ...] | None = None


@dataclass
class CertificateReport:
    kind: str
    passed: bool
    scan: list[ScanRow]
    tolerance: float
    estimated_ratio: float | None = None
    escape_time: int | None = None
    grid_points: int | None = None
    notes: str = ""
    extra_columns: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scan"] = [
            {"n": r.n, "sup_forward": r.sup_forward, "sup_backward": r.sup_backward,
             **({k: v for k, v in zip(self.extra_columns, r.extra)} if r.extra else {})}
            for r in self.scan
        ]
        d["extra_columns"] = list(self.extra_columns)
        return d

    def csv_header(self) -> list[str]:
        return ["n", "sup_forward", "sup_backward", *self.extra_columns]

    def csv_rows(self) -> list[list]:
        return [[r.n, r.sup_forward, r.sup_backward, *(r.extra or ())] for r in self.scan]


def aperiodicity_escape(ws: WeightSystem, K: CompactWindow, n_max: int) -> CertificateReport:
    """Least ``N`` with ``alpha^n(K)`` disjoint from ``K`` for every ``N <= n <= n_max``.

    The scan's ``extra`` column holds the image interval and a 0/1 disjointness flag.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if ws.alpha_monotone:
        pts = np.array([K.lo, K.hi])
        caveat = "monotone alpha: image interval from endpoints"
    else:
        pts = K.grid()
        caveat = f"non-monotone alpha: image hull from {K.grid_points} grid points (resolution-limited)"
    rows, disjoint = [], []
    for n in range(1, n_max + 1):
        pts = ws.alpha(pts)
        img_lo, img_hi = float(np.min(pts)), float(np.max(pts))
        ok = img_lo > K.hi or img_hi < K.lo
        disjoint.append(ok)
        rows.append(ScanRow(n, math.nan, math.nan, (img_lo, img_hi, float(ok))))
    escape = None
    for n in range(n_max, 0, -1):
        if not disjoint[n - 1]:
            break
        escape = n
    return CertificateReport(
        kind="aperiodicity",
        passed=escape is not None,
        scan=rows,
        tolerance=0.0,
        escape_time=escape,
        grid_points=K.grid_points,
        notes=caveat,
        extra_columns=("image_lo", "image_hi", "disjoint"),
    )


class _ProductTable:
    """Cumulative log weight products along orbits of a grid, extended on demand.

    Column ``j`` of ``fwd`` holds ``log prod_{i<j} w(alpha^i t)``; column ``j``
    of ``bwd`` holds ``log prod_{i=1}^{j} w(alpha^{-i} t)^{-1}``.
    """

    def __init__(self, ws: WeightSystem, grid: np.ndarray):
        self.ws = ws
        self._fwd = [np.zeros_like(grid)]
        self._bwd = [np.zeros_like(grid)]
        self._fwd_pt = grid.copy()
        self._bwd_pt = grid.copy()

    def _extend(self, n: int) -> None:
        ws = self.ws
        while len(self._fwd) <= n:
            self._fwd.append(self._fwd[-1] + np.log(ws.w(self._fwd_pt)))
            self._fwd_pt = ws.alpha(self._fwd_pt)
            self._bwd_pt = ws.alpha_inv(self._bwd_pt)
            self._bwd.append(self._bwd[-1] - np.log(ws.w(self._bwd_pt)))

    def sup_forward(self, n: int) -> float:
        self._extend(n)
        return math.exp(float(np.max(self._fwd[n])))

    def sup_backward(self, n: int) -> float:
        self._extend(n)
        return math.exp(float(np.max(self._bwd[n])))


def _tail_nonincreasing(values: list[float], window: int) -> bool:
    tail = values[-window:]
    return all(b <= a for a, b in zip(tail, tail[1:]))


def _geometric_ratio(ns: list[int], values: list[float]) -> float | None:
    pts = [(n, math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    slope = np.polyfit(x, y, 1)[0]
    return float(math.exp(slope))


def _window_len(n_max: int, fraction: float) -> int:
    return max(1, int(math.ceil(n_max * fraction)))


def transitivity_certificate(
    ws: WeightSystem,
    K: CompactWindow,
    n_max: int,
    tol: float,
    window_fraction: float = 0.25,
) -> CertificateReport:
    """Scan ``sup_K`` of the forward and backward ``n``-step weight products.

    Passes when both end below ``tol`` and neither increases over the last
    ``window_fraction`` of the scan.  ``estimated_ratio`` is the geometric
    decay rate fitted to the forward sups over that window.
    """
    _check_scan_args(n_max, tol)
    table = _ProductTable(ws, K.grid())
    ns = list(range(1, n_max + 1))
    sf = [table.sup_forward(n) for n in ns]
    sb = [table.sup_backward(n) for n in ns]
    win = _window_len(n_max, window_fraction)
    below = sf[-1] < tol and sb[-1] < tol
    mono = _tail_nonincreasing(sf, win) and _tail_nonincreasing(sb, win)
    escape = aperiodicity_escape(ws, K, n_max).escape_time
    return CertificateReport(
        kind="transitivity",
        passed=below and mono,
        scan=[ScanRow(n, f, b) for n, f, b in zip(ns, sf, sb)],
        tolerance=tol,
        estimated_ratio=_geometric_ratio(ns[-win:], sf[-win:]),
        escape_time=escape,
        grid_points=K.grid_points,
        notes=_verdict_notes(below, mono, win, K),
    )


def cosine_certificate(
    ws: WeightSystem,
    K: CompactWindow,
    n_max: int,
    tol: float,
    window_fraction: float = 0.25,
) -> CertificateReport:
    """As :func:`transitivity_certificate`, also scanning the ``2n``-step products."""
    _check_scan_args(n_max, tol)
    table = _ProductTable(ws, K.grid())
    ns = list(range(1, n_max + 1))
    seqs = [
        [table.sup_forward(n) for n in ns],
        [table.sup_backward(n) for n in ns],
        [table.sup_forward(2 * n) for n in ns],
        [table.sup_backward(2 * n) for n in ns],
    ]
    win = _window_len(n_max, window_fraction)
    below = all(s[-1] < tol for s in seqs)
    mono = all(_tail_nonincreasing(s, win) for s in seqs)
    return CertificateReport(
        kind="cosine",
        passed=below and mono,
        scan=[ScanRow(n, a, b, (c, d)) for n, a, b, c, d in zip(ns, *seqs)],
        tolerance=tol,
        estimated_ratio=_geometric_ratio(ns[-win:], seqs[0][-win:]),
        escape_time=aperiodicity_escape(ws, K, n_max).escape_time,
        grid_points=K.grid_points,
        notes=_verdict_notes(below, mono, win, K),
        extra_columns=("sup_forward_2n", "sup_backward_2n"),
    )


@dataclass(frozen=True)
class SeriesValue:
    value: float
    terms: int
    tail_bound: float
    divergent: bool


def _sup_series(term: Callable[[int], float]) -> SeriesValue:
    """``sum_{l>=1} term(l)`` with a ratio-certified truncation.

    Terms are summed until one drops below ``RATIO_CUT`` times the first,
    once consecutive ratios are below 1.  The remainder is bounded by
    ``last * r / (1 - r)`` with ``r`` the last observed ratio, which is
    rigorous when ratios are non-increasing from there on.
    """
    first = term(1)
    terms = [first]
    saw_contraction = False
    for l in range(2, MAX_SERIES_TERMS + 1):
        t = term(l)
        prev = terms[-1]
        r = t / prev if prev > 0 else 0.0
        terms.append(t)
        if r < 1.0:
            saw_contraction = True
        elif not saw_contraction and l >= MAX_DIVERGENCE_TERMS:
            return SeriesValue(math.inf, l, math.inf, True)
        if saw_contraction and r < 1.0 and t < RATIO_CUT * first:
            tail = t * r / (1.0 - r)
            return SeriesValue(math.fsum(sorted(terms)) + tail, l, tail, False)
        if t == 0.0:
            return SeriesValue(math.fsum(sorted(terms)), l, 0.0, False)
    return SeriesValue(math.inf, MAX_SERIES_TERMS, math.inf, True)


def chaos_certificate(
    ws: WeightSystem,
    K: CompactWindow,
    n_max: int,
    tol: float,
) -> CertificateReport:
    """Scan ``sum_{l>=1} sup_K prod_{j<ln} w(alpha^j t)`` and its backward mirror over ``n``.

    Reported series values include their tail bounds.  Fails if either
    series is flagged divergent at any scanned ``n``.
    """
    _check_scan_args(n_max, tol)
    table = _ProductTable(ws, K.grid())
    rows, divergent_at = [], []
    for n in range(1, n_max + 1):
        fwd = _sup_series(lambda l: table.sup_forward(l * n))
        bwd = _sup_series(lambda l: table.sup_backward(l * n))
        if fwd.divergent or bwd.divergent:
            divergent_at.append(n)
        rows.append(
            ScanRow(n, table.sup_forward(n), table.sup_backward(n), (fwd.value, bwd.value))
        )
    last = rows[-1].extra
    below = last[0] < tol and last[1] < tol
    passed = below and not divergent_at
    if divergent_at:
        notes = f"divergent series at n in {divergent_at[:5]}{'...' if len(divergent_at) > 5 else ''}"
    else:
        notes = _verdict_notes(below, True, 1, K)
    return CertificateReport(
        kind="chaos",
        passed=passed,
        scan=rows,
        tolerance=tol,
        escape_time=aperiodicity_escape(ws, K, n_max).escape_time,
        grid_points=K.grid_points,
        notes=notes,
        extra_columns=("series_forward", "series_backward"),
        details={"divergent": bool(divergent_at), "divergent_at": divergent_at},
    )


def _check_scan_args(n_max: int, tol: float) -> None:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")


def _verdict_notes(below: bool, mono: bool, win: int, K: CompactWindow) -> str:
    parts = [f"grid sup over {K.grid_points} points of [{K.lo}, {K.hi}]"]
    if not below:
        parts.append("terminal values not below tolerance")
    if not mono:
        parts.append(f"not non-increasing over last {win} steps")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# constructive witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixingWitness:
    eta: AtomicMeasure
    err_in: float
    err_out: float
    bound_in: float
    bound_out: float
    within_bounds: bool


def _hull(*measures: AtomicMeasure) -> tuple[float, float] | None:
    hulls = [m.hull() for m in measures if not m.is_empty]
    if not hulls:
        return None
    return min(h[0] for h in hulls), max(h[1] for h in hulls)


def _escapes(ws: WeightSystem, lo: float, hi: float, n: int) -> bool:
    win_pts = np.array([lo, hi]) if ws.alpha_monotone else np.linspace(lo, hi, DEFAULT_GRID_POINTS)
    fwd = _iterate(ws.alpha, win_pts, n)
    bwd = _iterate(ws.alpha_inv, win_pts, n)
    return all(np.min(p) > hi or np.max(p) < lo for p in (fwd, bwd))


def mixing_witness(
    ws: WeightSystem,
    mu: AtomicMeasure,
    v: AtomicMeasure,
    n: int,
    rel_tol: float = 1e-12,
) -> MixingWitness:
    """Build ``eta = mu + S*^n v`` with ``eta`` near ``mu`` and ``T*^n eta`` near ``v``.

    ``err_in = ||eta - mu||`` and ``err_out = ||T*^n eta - v||`` are checked
    against ``max_{supp v} B_n * ||v||`` and ``max_{supp mu} F_n * ||mu||``
    (``F_n``/``B_n`` the forward/backward products), up to ``rel_tol`` times
    ``||mu|| + ||v||`` of floating-point slack.

    Raises
    ------
    PreconditionError
        If ``alpha^{+-n}`` of the hull of both supports meets the hull.
    """
    hull = _hull(mu, v)
    if hull is not None and not _escapes(ws, *hull, n):
        raise PreconditionError(
            f"alpha^n(K) meets K for K = [{hull[0]}, {hull[1]}] at n = {n}; "
            "choose n past the escape time"
        )
    pulled = adjoint_S_star(ws, v, n)
    eta = add(mu, pulled)
    err_in = tv_norm(add(eta, scale(mu, -1.0)))
    err_out = tv_norm(add(adjoint_T_star(ws, eta, n), scale(v, -1.0)))
    bound_in = _max_or_zero(backward_weight_product(ws, v.locations, n)) * tv_norm(v)
    bound_out = _max_or_zero(forward_weight_product(ws, mu.locations, n)) * tv_norm(mu)
    slack = rel_tol * (tv_norm(mu) + tv_norm(v))
    ok = err_in <= bound_in * (1 + rel_tol) + slack and err_out <= bound_out * (1 + rel_tol) + slack
    return MixingWitness(eta, err_in, err_out, bound_in, bound_out, ok)


def _max_or_zero(a: np.ndarray) -> float:
    return float(np.max(a)) if np.size(a) else 0.0


@dataclass(frozen=True)
class PeriodicPoint:
    v: AtomicMeasure
    tail_bound: float
    q_forward: float
    q_backward: float
    residual_T: float
    residual_C: float
    residual_bound: float = 0.0

    @property
    def within_bounds(self) -> bool:
        return self.residual_T <= 2 * self.tail_bound and self.residual_C <= 2 * self.tail_bound


def periodic_point(ws: WeightSystem, mu: AtomicMeasure, N: int, L: int) -> PeriodicPoint:
    """Truncated periodic point ``v = mu + sum_{l=1}^L (T*^{lN} mu + S*^{lN} mu)``.

    ``tail_bound = ||mu|| (q_f^{L+1}/(1-q_f) + q_b^{L+1}/(1-q_b))`` bounds the
    omitted tails, where ``q_f``/``q_b`` are the largest ``N``-step
    forward/backward products over the support of ``mu``.

    Truncation leaves ``T*^N v - v = T*^{(L+1)N} mu - S*^{LN} mu``, whose norm
    is of order ``q_b^L`` rather than ``q_b^{L+1}``; ``residual_bound =
    ||mu|| (q_f^L + q_b^L)`` plus a rounding allowance of order ``N eps ||mu||``
    bounds both residuals when the ``N``-step products do not grow along the
    orbit of the support.

    Raises
    ------
    PreconditionError
        If ``q_f >= 1`` or ``q_b >= 1``.
    """
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    if mu.is_empty:
        return PeriodicPoint(mu, 0.0, 0.0, 0.0, 0.0, 0.0)
    q_f = _max_or_zero(forward_weight_product(ws, mu.locations, N))
    q_b = _max_or_zero(backward_weight_product(ws, mu.locations, N))
    if q_f >= 1 or q_b >= 1:
        raise PreconditionError(
            f"series not summable at N = {N}: q_forward = {q_f:.6g}, q_backward = {q_b:.6g}"
        )
    parts = [mu]
    fwd, bwd = mu, mu
    for _ in range(L):
        fwd = adjoint_T_star(ws, fwd, N)
        bwd = adjoint_S_star(ws, bwd, N)
        parts.extend((fwd, bwd))
    v = sum_measures(parts)
    tail = tv_norm(mu) * (q_f ** (L + 1) / (1 - q_f) + q_b ** (L + 1) / (1 - q_b))
    res_T = tv_norm(add(adjoint_T_star(ws, v, N), scale(v, -1.0)))
    res_C = tv_norm(add(cosine_adjoint(ws, v, N), scale(v, -1.0)))
    eps = np.finfo(float).eps
    rounding = 8 * N * eps * (1 / (1 - q_f) ** 2 + 1 / (1 - q_b) ** 2)
    res_bound = tv_norm(mu) * (q_f**L + q_b**L + rounding)
    return PeriodicPoint(v, tail, q_f, q_b, res_T, res_C, res_bound)
