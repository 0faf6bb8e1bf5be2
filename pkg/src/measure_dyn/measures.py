"""Finitely supported complex Radon measures on the real line.

An :class:`AtomicMeasure` is a sorted list of point masses ``(x, c)`` with
``x`` real and ``c`` complex.  Values are immutable; every operation returns
a new, canonical measure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

MERGE_TOLERANCE = 1e-12
ZERO_THRESHOLD = 1e-300


class InjectivityError(ValueError):
    """Two distinct atoms were mapped within the merge tolerance of each other."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Canonical finitely supported complex measure.

    Use :meth:`from_atoms` (or :func:`atomic`) to build one; the raw
    constructor assumes its arrays are already canonical.
    """

    locations: np.ndarray
    weights: np.ndarray
    merge_tolerance: float = MERGE_TOLERANCE

    @classmethod
    def from_atoms(
        cls,
        atoms: Iterable[tuple[float, complex]] = (),
        merge_tolerance: float = MERGE_TOLERANCE,
    ) -> "AtomicMeasure":
        atoms = list(atoms)
        x = np.array([float(a[0]) for a in atoms], dtype=float)
        c = np.array([complex(a[1]) for a in atoms], dtype=complex)
        return cls.from_arrays(x, c, merge_tolerance)

    @classmethod
    def from_arrays(
        cls, x, c, merge_tolerance: float = MERGE_TOLERANCE
    ) -> "AtomicMeasure":
        x, c = _canonicalize(
            np.asarray(x, dtype=float).ravel(),
            np.asarray(c, dtype=complex).ravel(),
            merge_tolerance,
        )
        return cls(_readonly(x), _readonly(c), merge_tolerance)

    @classmethod
    def empty(cls, merge_tolerance: float = MERGE_TOLERANCE) -> "AtomicMeasure":
        return cls.from_arrays([], [], merge_tolerance)

    @classmethod
    def dirac(cls, x: float, c: complex = 1.0) -> "AtomicMeasure":
        return cls.from_atoms([(x, c)])

    def __len__(self) -> int:
        return len(self.locations)

    def __iter__(self):
        return iter(zip(self.locations.tolist(), self.weights.tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return np.array_equal(self.locations, other.locations) and np.array_equal(
            self.weights, other.weights
        )

    def __repr__(self) -> str:
        body = ", ".join(f"({x!r}, {c!r})" for x, c in self)
        return f"AtomicMeasure([{body}])"

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return add(self, other)

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "AtomicMeasure":
        return scale(self, -1.0)

    @property
    def is_empty(self) -> bool:
        return len(self.locations) == 0

    @property
    def support(self) -> np.ndarray:
        return self.locations

    def hull(self) -> tuple[float, float] | None:
        """Smallest closed interval containing the support, or None if empty."""
        if self.is_empty:
            return None
        return float(self.locations[0]), float(self.locations[-1])

    def to_records(self) -> list[dict]:
        return [
            {"x": float(x), "re": float(c.real), "im": float(c.imag)}
            for x, c in zip(self.locations, self.weights)
        ]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "AtomicMeasure":
        return cls.from_atoms(
            (r["x"], complex(r.get("re", 0.0), r.get("im", 0.0))) for r in records
        )

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text: str) -> "AtomicMeasure":
        return cls.from_records(json.loads(text))


def atomic(*atoms: tuple[float, complex]) -> AtomicMeasure:
    """Shorthand: ``atomic((0, 1), (1, -2j))``."""
    return AtomicMeasure.from_atoms(atoms)


def _canonicalize(x: np.ndarray, c: np.ndarray, tol: float):
    if x.shape != c.shape:
        raise ValueError("locations and weights must have the same length")
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("atom locations must be finite")
    order = np.argsort(x, kind="stable")
    x, c = x[order], c[order]
    if x.size > 1:
        # chain clusters: consecutive gaps within tol are one atom
        new_group = np.empty(x.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = np.diff(x) > tol
        if not new_group.all():
            starts = np.flatnonzero(new_group)
            c = np.add.reduceat(c, starts)
            x = x[starts]
    # flush components, not moduli, so Jordan parts drop exactly what the whole drops
    re = np.where(np.abs(c.real) < ZERO_THRESHOLD, 0.0, c.real)
    im = np.where(np.abs(c.imag) < ZERO_THRESHOLD, 0.0, c.imag)
    keep = (re != 0) | (im != 0)
    return x[keep].copy(), (re + 1j * im)[keep]


def canonicalize(m: AtomicMeasure) -> AtomicMeasure:
    return AtomicMeasure.from_arrays(m.locations, m.weights, m.merge_tolerance)


def tv_norm(m: AtomicMeasure) -> float:
    """Total variation ``|m|(R)``: the sum of the moduli of the weights."""
    return float(np.sum(np.sort(np.abs(m.weights))))


@dataclass(frozen=True)
class JordanParts:
    """Four mutually singular nonnegative parts of a complex measure."""

    p1_plus: AtomicMeasure
    p1_minus: AtomicMeasure
    p2_plus: AtomicMeasure
    p2_minus: AtomicMeasure

    def recombine(self) -> AtomicMeasure:
        return add(
            add(self.p1_plus, scale(self.p1_minus, -1.0)),
            add(scale(self.p2_plus, 1j), scale(self.p2_minus, -1j)),
        )

    def total(self) -> float:
        return sum(tv_norm(p) for p in (self.p1_plus, self.p1_minus, self.p2_plus, self.p2_minus))


def jordan_decompose(m: AtomicMeasure) -> JordanParts:
    x, re, im = m.locations, m.weights.real, m.weights.imag

    def part(vals: np.ndarray) -> AtomicMeasure:
        return AtomicMeasure.from_arrays(x, np.maximum(vals, 0.0), m.merge_tolerance)

    return JordanParts(part(re), part(-re), part(im), part(-im))


def pushforward(m: AtomicMeasure, f: Callable) -> AtomicMeasure:
    """Image measure ``m o f^{-1}``: each atom ``(x, c)`` moves to ``(f(x), c)``.

    Raises
    ------
    InjectivityError
        If two atoms land within ``merge_tolerance`` of each other.
    """
    if m.is_empty:
        return m
    y = np.asarray(f(m.locations), dtype=float).reshape(m.locations.shape)
    _check_injective(y, m.merge_tolerance)
    return AtomicMeasure.from_arrays(y, m.weights, m.merge_tolerance)


def _check_injective(y: np.ndarray, tol: float) -> None:
    if y.size > 1:
        ys = np.sort(y)
        gaps = np.diff(ys)
        if np.any(gaps <= tol):
            i = int(np.argmin(gaps))
            raise InjectivityError(
                f"image atoms at {ys[i]!r} and {ys[i + 1]!r} collide "
                f"(gap {gaps[i]:.3e} <= merge tolerance {tol:.1e})"
            )


def restrict(m: AtomicMeasure, keep: Callable) -> AtomicMeasure:
    """Keep the atoms whose location satisfies ``keep`` (vectorized or scalar predicate)."""
    if m.is_empty:
        return m
    mask = np.asarray(_eval_predicate(keep, m.locations), dtype=bool)
    return AtomicMeasure(
        _readonly(m.locations[mask].copy()),
        _readonly(m.weights[mask].copy()),
        m.merge_tolerance,
    )


def _eval_predicate(keep: Callable, x: np.ndarray):
    try:
        out = np.asarray(keep(x))
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([bool(keep(float(t))) for t in x])


def interval(lo: float, hi: float) -> Callable:
    """Predicate for the closed interval ``[lo, hi]``."""
    return lambda t: (t >= lo) & (t <= hi)


def pair(m: AtomicMeasure, f: Callable) -> complex:
    """``integral f dm = sum_i c_i f(x_i)``."""
    if m.is_empty:
        return 0j
    vals = np.asarray(f(m.locations), dtype=complex)
    if vals.shape != m.locations.shape:
        vals = np.broadcast_to(vals, m.locations.shape)
    return complex(np.sum(m.weights * vals))


def add(m1: AtomicMeasure, m2: AtomicMeasure) -> AtomicMeasure:
    tol = max(m1.merge_tolerance, m2.merge_tolerance)
    return AtomicMeasure.from_arrays(
        np.concatenate([m1.locations, m2.locations]),
        np.concatenate([m1.weights, m2.weights]),
        tol,
    )


def scale(m: AtomicMeasure, c: complex) -> AtomicMeasure:
    return AtomicMeasure.from_arrays(m.locations, m.weights * complex(c), m.merge_tolerance)


def sum_measures(measures: Iterable[AtomicMeasure]) -> AtomicMeasure:
    measures = list(measures)
    if not measures:
        return AtomicMeasure.empty()
    tol = max(m.merge_tolerance for m in measures)
    return AtomicMeasure.from_arrays(
        np.concatenate([m.locations for m in measures]),
        np.concatenate([m.weights for m in measures]),
        tol,
    )
