"""Radial path-gain functions h(r) and their generalized inverses.

Every model is left-continuous and nondecreasing on (0, inf) and exposes

    h.evaluate(r)   gain at distance r (> 0)
    h.inverse(y)    inf{x : h(x) > y}

Both accept scalars or arrays.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, ParameterError


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("path gain is defined for r > 0 only")
    return r


def _check_gain(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y >= 0)):
        raise DomainError("inverse gain requires y >= 0")
    return y


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


# --------------------------------------------------------------------------
# Lambert W, principal branch on [0, inf)

def _lambert_w_scalar(y):
    if y == 0.0:
        return 0.0
    if math.isinf(y):
        return math.inf
    w = math.log1p(y)
    if y <= math.e:
        # Halley on w e^w - y
        for _ in range(100):
            ew = math.exp(w)
            f = w * ew - y
            wp1 = w + 1.0
            step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
            w_new = w - step
            if w_new < 0.0:
                w_new = 0.5 * w
            if abs(w_new - w) <= 4e-16 * max(1.0, w_new):
                return w_new
            w = w_new
        return w
    # Halley on w + log w - log y, avoids overflow of e^w for large y
    ly = math.log(y)
    for _ in range(100):
        f = w + math.log(w) - ly
        d1 = 1.0 + 1.0 / w
        d2 = -1.0 / (w * w)
        step = f / (d1 - 0.5 * f * d2 / d1)
        w_new = w - step
        if w_new <= 0.0:
            w_new = 0.5 * w
        if abs(w_new - w) <= 4e-16 * w_new:
            return w_new
        w = w_new
    return w


def lambert_w(y):
    """Principal-branch Lambert W for ``y >= 0``: the ``w >= 0`` with ``w e^w = y``.

    Halley iteration started from ``log(1 + y)``; for ``y > e`` the iteration
    runs on ``w + log w = log y`` so huge arguments do not overflow.
    """
    arr = np.asarray(y, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("lambert_w supports the principal branch on y >= 0 only")
    if arr.ndim == 0:
        return _lambert_w_scalar(float(arr))
    flat = np.fromiter((_lambert_w_scalar(v) for v in arr.ravel()), float, arr.size)
    return flat.reshape(arr.shape)


# --------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class PowerLaw:
    """h(r) = (K r)^beta."""

    K: float = 1.0
    beta: float = 4.0

    def __post_init__(self):
        if not (self.K > 0 and self.beta > 0):
            raise ParameterError("power-law needs K > 0 and beta > 0")

    def evaluate(self, r):
        rr = _check_radius(r)
        return _out((self.K * rr) ** self.beta, r)

    def inverse(self, y):
        yy = _check_gain(y)
        return _out(yy ** (1.0 / self.beta) / self.K, y)

    def to_dict(self):
        return {"kind": "power-law", "K": self.K, "beta": self.beta}


@dataclass(frozen=True)
class ExpPower:
    """h(r) = r^beta e^(alpha r); inverse through the Lambert W function."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta > 0):
            raise ParameterError("exp-power needs alpha >= 0 and beta > 0")

    def evaluate(self, r):
        rr = _check_radius(r)
        return _out(rr ** self.beta * np.exp(self.alpha * rr), r)

    def inverse(self, y):
        yy = _check_gain(y)
        root = yy ** (1.0 / self.beta)
        if self.alpha == 0:
            return _out(root, y)
        k = self.alpha / self.beta
        return _out(lambert_w(k * root) / k, y)

    def to_dict(self):
        return {"kind": "exp-power", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class MultiSlope:
    """Piecewise power law h(r) = r^beta_i / b_i on [r_{i-1}, r_i).

    Only ``b1`` is supplied; the remaining coefficients follow from continuity
    at each breakpoint.
    """

    breakpoints: tuple
    exponents: tuple
    b1: float = 1.0
    b: tuple = field(init=False, repr=False)
    s: tuple = field(init=False, repr=False)
    c: tuple = field(init=False, repr=False)

    def __post_init__(self):
        bps = tuple(float(x) for x in self.breakpoints)
        exps = tuple(float(x) for x in self.exponents)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "exponents", exps)
        if len(exps) != len(bps) + 1:
            raise ParameterError("multi-slope needs len(exponents) == len(breakpoints) + 1")
        if any(e <= 0 for e in exps) or not self.b1 > 0:
            raise ParameterError("multi-slope exponents and b1 must be positive")
        if any(x <= 0 for x in bps) or any(b >= a for a, b in zip(bps[1:], bps)):
            raise ParameterError("breakpoints must be positive and strictly increasing")
        b = [float(self.b1)]
        for r_i, lo, hi in zip(bps, exps, exps[1:]):
            b.append(b[-1] * r_i ** (hi - lo))
        s = [r_i ** e / bi for r_i, e, bi in zip(bps, exps, b)]
        c = [bi ** (1.0 / e) for bi, e in zip(b, exps)]
        object.__setattr__(self, "b", tuple(b))
        object.__setattr__(self, "s", tuple(s))
        object.__setattr__(self, "c", tuple(c))

    def evaluate(self, r):
        rr = _check_radius(r)
        idx = np.searchsorted(self.breakpoints, rr, side="right")
        beta = np.asarray(self.exponents)[idx]
        b = np.asarray(self.b)[idx]
        return _out(rr ** beta / b, r)

    def inverse(self, y):
        yy = _check_gain(y)
        idx = np.searchsorted(self.s, yy, side="right")
        beta = np.asarray(self.exponents)[idx]
        c = np.asarray(self.c)[idx]
        return _out(c * yy ** (1.0 / beta), y)

    def to_dict(self):
        return {"kind": "multi-slope", "breakpoints": list(self.breakpoints),
                "exponents": list(self.exponents), "b1": self.b1}


@dataclass(frozen=True)
class Tabulated:
    """Left-continuous step function.

    ``h(r) = values[j]`` on ``(knots[j-1], knots[j]]`` with ``knots[-1] = 0``
    and the last value extending to infinity, so ``len(values) ==
    len(knots) + 1``.  The inverse is ``inf`` for ``y >= values[-1]``.
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        knots = tuple(float(x) for x in self.knots)
        values = tuple(float(x) for x in self.values)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if len(values) != len(knots) + 1:
            raise ParameterError("tabulated model needs len(values) == len(knots) + 1")
        if any(x <= 0 for x in knots) or any(b <= a for a, b in zip(knots, knots[1:])):
            raise ParameterError("knots must be positive and strictly increasing")
        if values[0] <= 0 or any(b < a for a, b in zip(values, values[1:])):
            raise ParameterError("values must be positive and nondecreasing")

    def evaluate(self, r):
        rr = _check_radius(r)
        idx = np.searchsorted(self.knots, rr, side="left")
        return _out(np.asarray(self.values)[idx], r)

    def inverse(self, y):
        yy = _check_gain(y)
        j = np.searchsorted(self.values, yy, side="right")
        edges = np.concatenate(([0.0], self.knots, [np.inf]))
        return _out(edges[j], y)

    def to_dict(self):
        return {"kind": "tabulated", "knots": list(self.knots), "values": list(self.values)}


def evaluate(model, r):
    return model.evaluate(r)


def inverse(model, y):
    return model.inverse(y)


def from_dict(spec):
    """Build a model from its JSON form, e.g. ``{"kind": "power-law", "K": 1, "beta": 4}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "power-law":
            return PowerLaw(**spec)
        if kind == "exp-power":
            return ExpPower(**spec)
        if kind == "multi-slope":
            return MultiSlope(**spec)
        if kind == "tabulated":
            return Tabulated(**spec)
    except TypeError as exc:
        raise ParameterError(str(exc)) from None
    raise ParameterError(f"unknown path-loss kind {kind!r}")
