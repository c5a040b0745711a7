"""Tensor-product B-spline ribbons.

A Bézier ribbon is the clamped B-spline with no interior knots, so there is
a single evaluation path. Control nets are indexed ``[row along s, column
along h, xyz]``; column 0 is the boundary curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RibbonError(ValueError):
    pass


class ParameterRangeError(ValueError):
    pass


def bezier_knots(degree: int) -> np.ndarray:
    return np.concatenate([np.zeros(degree + 1), np.ones(degree + 1)])


def _check_knots(knots, degree, n_ctrl, name):
    if degree < 0:
        raise RibbonError(f"{name}: negative degree")
    if len(knots) != n_ctrl + degree + 1:
        raise RibbonError(f"{name}: expected {n_ctrl + degree + 1} knots for {n_ctrl} control points, got {len(knots)}")
    if np.any(np.diff(knots) < 0):
        raise RibbonError(f"{name}: knots must be non-decreasing")
    if knots[-1] <= knots[0]:
        raise RibbonError(f"{name}: empty knot range")
    p = degree
    if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1 :] != knots[-1]):
        raise RibbonError(f"{name}: knot vector is not clamped")
    # interior multiplicity above the degree would break continuity bookkeeping
    inner = knots[p + 1 : len(knots) - p - 1]
    if len(inner):
        _, mult = np.unique(inner, return_counts=True)
        if mult.max() > p:
            raise RibbonError(f"{name}: interior knot multiplicity exceeds degree")


@dataclass(frozen=True)
class Ribbon:
    """Tensor-product B-spline surface ``R(s, h)`` over ``[0, 1]^2``."""

    degree_s: int
    degree_h: int
    knots_s: np.ndarray
    knots_h: np.ndarray
    control_net: np.ndarray

    def __post_init__(self):
        net = np.array(self.control_net, dtype=float)
        if net.ndim != 3 or net.shape[2] != 3:
            raise RibbonError("control_net must have shape (rows, columns, 3)")
        if self.degree_h < 1:
            raise RibbonError("degree_h must be at least 1")
        ks = np.array(self.knots_s, dtype=float)
        kh = np.array(self.knots_h, dtype=float)
        _check_knots(ks, self.degree_s, net.shape[0], "knots_s")
        _check_knots(kh, self.degree_h, net.shape[1], "knots_h")
        ks = (ks - ks[0]) / (ks[-1] - ks[0])
        kh = (kh - kh[0]) / (kh[-1] - kh[0])
        for a in (net, ks, kh):
            a.setflags(write=False)
        object.__setattr__(self, "control_net", net)
        object.__setattr__(self, "knots_s", ks)
        object.__setattr__(self, "knots_h", kh)

    @classmethod
    def bezier(cls, control_net) -> "Ribbon":
        net = np.asarray(control_net, dtype=float)
        ds, dh = net.shape[0] - 1, net.shape[1] - 1
        return cls(ds, dh, bezier_knots(ds), bezier_knots(dh), net)

    @property
    def shape(self) -> tuple[int, int]:
        return self.control_net.shape[:2]

    def with_net(self, net) -> "Ribbon":
        return Ribbon(self.degree_s, self.degree_h, self.knots_s, self.knots_h, net)

    def reversed_s(self) -> "Ribbon":
        return Ribbon(self.degree_s, self.degree_h, 1.0 - self.knots_s[::-1], self.knots_h, self.control_net[::-1])

    def eval(self, s: float, h: float) -> np.ndarray:
        return eval(self, s, h)

    def eval_partials(self, s: float, h: float) -> tuple[np.ndarray, np.ndarray]:
        return eval_partials(self, s, h)

    def boundary_data(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        return boundary_data(self, s)


def find_span(knots: np.ndarray, degree: int, t: float) -> int:
    """Index ``i`` with ``knots[i] <= t < knots[i+1]``; the last span is closed."""
    n = len(knots) - degree - 1
    if t >= knots[n]:
        return n - 1
    return int(np.searchsorted(knots, t, side="right") - 1)


def basis_derivatives(knots: np.ndarray, degree: int, t: float, order: int = 1) -> tuple[int, np.ndarray]:
    """Non-zero basis functions and their derivatives at ``t``.

    Returns the span index and an array ``ders[k, j]``: the ``k``-th
    derivative of basis function ``span - degree + j``.
    """
    p = degree
    span = find_span(knots, p, t)
    ndu = np.zeros((p + 1, p + 1))
    ndu[0, 0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            tmp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        ndu[j, j] = saved

    ders = np.zeros((order + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, order + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, order + 1):
        ders[k] *= fac
        fac *= p - k
    return span, ders


def basis(knots: np.ndarray, degree: int, n_ctrl: int, t: float, order: int = 0) -> np.ndarray:
    """Dense vector of all ``n_ctrl`` basis functions (or a derivative) at ``t``."""
    span, ders = basis_derivatives(knots, degree, t, order)
    out = np.zeros(n_ctrl)
    out[span - degree : span + 1] = ders[order]
    return out


def de_boor(knots: np.ndarray, degree: int, ctrl: np.ndarray, t: float) -> np.ndarray:
    """Point on a B-spline curve by de Boor's algorithm."""
    p = degree
    k = find_span(knots, p, t)
    d = np.array(ctrl[k - p : k + 1], dtype=float)
    for r in range(1, p + 1):
        for j in range(p, r - 1, -1):
            den = knots[j + 1 + k - r] - knots[j + k - p]
            alpha = 0.0 if den == 0 else (t - knots[j + k - p]) / den
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j]
    return d[p]


def _check_param(s, h):
    for name, t in (("s", s), ("h", h)):
        if not (0.0 <= t <= 1.0):
            raise ParameterRangeError(f"{name}={t} outside [0, 1]")


def eval(ribbon: Ribbon, s: float, h: float) -> np.ndarray:
    _check_param(s, h)
    net = ribbon.control_net
    cols = np.array([de_boor(ribbon.knots_s, ribbon.degree_s, net[:, j], s) for j in range(net.shape[1])])
    return de_boor(ribbon.knots_h, ribbon.degree_h, cols, h)


def eval_partials(ribbon: Ribbon, s: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(dR/ds, dR/dh)`` at ``(s, h)``, exact for the piecewise polynomial."""
    _check_param(s, h)
    ns, nh = ribbon.shape
    bs = basis(ribbon.knots_s, ribbon.degree_s, ns, s, 0)
    dbs = basis(ribbon.knots_s, ribbon.degree_s, ns, s, 1) if ribbon.degree_s > 0 else np.zeros(ns)
    bh = basis(ribbon.knots_h, ribbon.degree_h, nh, h, 0)
    dbh = basis(ribbon.knots_h, ribbon.degree_h, nh, h, 1)
    net = ribbon.control_net
    return (
        np.einsum("i,j,ijd->d", dbs, bh, net),
        np.einsum("i,j,ijd->d", bs, dbh, net),
    )


def boundary_data(ribbon: Ribbon, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Boundary position ``R(s, 0)`` and cross-derivative ``dR/dh(s, 0)``."""
    return eval(ribbon, s, 0.0), eval_partials(ribbon, s, 0.0)[1]


def boundary_weights(ribbon: Ribbon, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear maps from the control net to boundary data at many ``s``.

    Returns ``(pos, ds, dh)``, each of shape ``(len(s), rows, columns)``, so
    that ``R(s, 0) = pos @ net`` and likewise for the two partials at
    ``h = 0``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s < 0) | (s > 1)):
        raise ParameterRangeError("s outside [0, 1]")
    ns, nh = ribbon.shape
    bh = basis(ribbon.knots_h, ribbon.degree_h, nh, 0.0, 0)
    dbh = basis(ribbon.knots_h, ribbon.degree_h, nh, 0.0, 1)
    pos = np.empty((len(s), ns, nh))
    ds = np.empty_like(pos)
    dh = np.empty_like(pos)
    for k, t in enumerate(s):
        b = basis(ribbon.knots_s, ribbon.degree_s, ns, t, 0)
        db = basis(ribbon.knots_s, ribbon.degree_s, ns, t, 1) if ribbon.degree_s > 0 else np.zeros(ns)
        pos[k] = np.outer(b, bh)
        ds[k] = np.outer(db, bh)
        dh[k] = np.outer(b, dbh)
    return pos, ds, dh
