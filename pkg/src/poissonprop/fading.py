"""Fading / shadowing laws S: sampling, exact tails, moments.

Composite laws (products, shared common factors) reduce tails and moments to
one-dimensional quadratures over one component, which keeps them accurate to
~1e-10 where simulation could not.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError, DivergentMomentError, ParameterError

_QUAD = dict(epsabs=1e-13, epsrel=1e-11, limit=400)
# standard-normal mass outside [-_ZCUT, _ZCUT] is below 1e-32
_ZCUT = 12.0


def _positive(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("tail requires s > 0")
    return s


def _ret(x, like):
    return float(x) if np.ndim(like) == 0 else x


class Fading:
    """Interface shared by all fading laws.

    ``expect(f)`` returns E f(S) for a scalar function ``f``; composites build
    on it.  Subclasses that can draw S conditioned on ``S >= s`` set
    ``conditional = True``.
    """

    conditional = False
    shared = False

    def sample(self, size, rng):
        raise NotImplementedError

    def tail(self, s):
        raise NotImplementedError

    def fractional_moment(self, p):
        raise NotImplementedError

    def truncated_moment(self, q, lo, hi):
        """E[S^q 1{lo <= S < hi}]."""
        raise NotImplementedError

    def expect(self, f, points=None):
        raise NotImplementedError

    def with_sigma(self, sigma):
        """Copy with every lognormal component's sigma replaced."""
        return self


@dataclass(frozen=True)
class Lognormal(Fading):
    """S = exp(sigma B - sigma^2 / beta), B standard normal; E S^(2/beta) = 1."""

    sigma: float
    beta: float = 4.0
    conditional = True

    def __post_init__(self):
        if not (self.sigma >= 0 and self.beta > 0):
            raise ParameterError("lognormal needs sigma >= 0 and beta > 0")

    @property
    def _shift(self):
        return -self.sigma ** 2 / self.beta

    def sample(self, size, rng):
        return np.exp(self.sigma * rng.standard_normal(size) + self._shift)

    def _z(self, s):
        # P(S >= s) = P(B >= z)
        with np.errstate(divide="ignore"):
            return (np.log(s) - self._shift) / self.sigma

    def tail(self, s):
        ss = _positive(s)
        if self.sigma == 0:
            return _ret((ss <= math.exp(self._shift)).astype(float), s)
        return _ret(special.ndtr(-self._z(ss)), s)

    def conditional_sample(self, s, rng):
        """Draw S given S >= s (elementwise), by inverting the normal tail."""
        s = np.asarray(s, dtype=float)
        if self.sigma == 0:
            return np.full(s.shape, math.exp(self._shift))
        u = rng.random(s.shape)
        b = -special.ndtri(u * special.ndtr(-self._z(s)))
        b = np.maximum(b, self._z(s))
        return np.maximum(np.exp(self.sigma * b + self._shift), s)

    def fractional_moment(self, p):
        if not p > 0:
            raise DomainError("moment order must be positive")
        if p * self.beta == 2:
            return 1.0
        return math.exp(p * p * self.sigma ** 2 / 2 + p * self._shift)

    def truncated_moment(self, q, lo, hi):
        if self.sigma == 0:
            s0 = math.exp(self._shift)
            return s0 ** q if lo <= s0 < hi else 0.0
        # tilt by q: S^q dP = E S^q * dP(B' + q sigma)
        a = self._z(lo) - q * self.sigma if lo > 0 else -np.inf
        b = self._z(hi) - q * self.sigma if np.isfinite(hi) else np.inf
        if a >= b:
            return 0.0
        mass = special.ndtr(-a) - special.ndtr(-b) if a > 0 else special.ndtr(b) - special.ndtr(a)
        return math.exp(q * q * self.sigma ** 2 / 2 + q * self._shift) * float(mass)

    def expect(self, f, points=None):
        if self.sigma == 0:
            return float(f(math.exp(self._shift)))

        def g(b):
            return f(math.exp(self.sigma * b + self._shift)) * math.exp(-0.5 * b * b)

        pts = None
        if points:
            pts = sorted(z for z in (float(self._z(p)) for p in points if p > 0) if -_ZCUT < z < _ZCUT)
        val, _ = integrate.quad(g, -_ZCUT, _ZCUT, points=pts or None, **_QUAD)
        return val / math.sqrt(2 * math.pi)

    def with_sigma(self, sigma):
        return Lognormal(sigma, self.beta)

    def to_dict(self):
        return {"kind": "lognormal", "sigma": self.sigma, "beta": self.beta}


@dataclass(frozen=True)
class Exponential(Fading):
    """Rate-``mu`` exponential (Rayleigh power fading)."""

    mu: float = 1.0
    conditional = True

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError("exponential rate must be positive")

    @classmethod
    def unit_moment(cls, beta):
        """Rate Gamma(1 + 2/beta)^(beta/2), the one with E S^(2/beta) = 1."""
        return cls(math.gamma(1 + 2 / beta) ** (beta / 2))

    def sample(self, size, rng):
        return rng.exponential(1.0 / self.mu, size)

    def tail(self, s):
        ss = _positive(s)
        return _ret(np.exp(-self.mu * ss), s)

    def conditional_sample(self, s, rng):
        s = np.asarray(s, dtype=float)
        return s + rng.exponential(1.0 / self.mu, s.shape)

    def fractional_moment(self, p):
        if not p > 0:
            raise DomainError("moment order must be positive")
        return math.exp(math.lgamma(1 + p) - p * math.log(self.mu))

    def truncated_moment(self, q, lo, hi):
        lo_u = self.mu * lo
        hi_u = self.mu * hi if np.isfinite(hi) else np.inf
        if lo_u >= hi_u:
            return 0.0
        upper = special.gammaincc(1 + q, lo_u)
        rest = special.gammaincc(1 + q, hi_u) if np.isfinite(hi_u) else 0.0
        return math.exp(math.lgamma(1 + q) - q * math.log(self.mu)) * float(upper - rest)

    def expect(self, f, points=None):
        mu = self.mu
        pts = sorted(mu * p for p in points if 0 < mu * p < 800) if points else []
        edges = [0.0] + pts + [800.0]
        total = 0.0
        for a, b in zip(edges, edges[1:]):
            if b > a:
                total += integrate.quad(lambda u: f(u / mu) * math.exp(-u), a, b, **_QUAD)[0]
        return total

    def to_dict(self):
        return {"kind": "exponential", "mu": self.mu}


@dataclass(frozen=True)
class Deterministic(Fading):
    s0: float = 1.0
    conditional = True

    def __post_init__(self):
        if not self.s0 > 0:
            raise ParameterError("deterministic fading value must be positive")

    def sample(self, size, rng):
        return np.full(size, float(self.s0))

    def tail(self, s):
        ss = _positive(s)
        return _ret((ss <= self.s0).astype(float), s)

    def conditional_sample(self, s, rng):
        return np.full(np.shape(s), float(self.s0))

    def fractional_moment(self, p):
        if not p > 0:
            raise DomainError("moment order must be positive")
        return self.s0 ** p

    def truncated_moment(self, q, lo, hi):
        return self.s0 ** q if lo <= self.s0 < hi else 0.0

    def expect(self, f, points=None):
        return float(f(self.s0))

    def to_dict(self):
        return {"kind": "deterministic", "s0": self.s0}


@dataclass(frozen=True)
class Product(Fading):
    """Product of independent components, e.g. the Suzuki model."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ParameterError("product fading needs at least one component")
        if any(c.shared for c in comps):
            raise ParameterError("shared-factor laws cannot be nested inside a product")
        object.__setattr__(self, "components", comps)

    def _split(self):
        scale = 1.0
        rest = []
        for c in self.components:
            if isinstance(c, Deterministic):
                scale *= c.s0
            elif isinstance(c, Product):
                inner_scale, inner = c._split()
                scale *= inner_scale
                rest.extend(inner)
            else:
                rest.append(c)
        return scale, rest

    def sample(self, size, rng):
        out = np.ones(size)
        for c in self.components:
            out = out * c.sample(size, rng)
        return out

    def _tail_scalar(self, s, scale, rest):
        s = s / scale
        if not rest:
            return 1.0 if s <= 1.0 else 0.0
        if len(rest) == 1:
            return float(rest[0].tail(s))
        mix, inner = rest[-1], Product(tuple(rest[:-1]))
        return mix.expect(lambda x: inner._tail_scalar(s / x, 1.0, rest[:-1]), points=[s])

    def tail(self, s):
        ss = _positive(s)
        scale, rest = self._split()
        vals = np.array([self._tail_scalar(v, scale, rest) for v in ss.ravel()]).reshape(ss.shape)
        return _ret(np.clip(vals, 0.0, 1.0), s)

    def fractional_moment(self, p):
        out = 1.0
        for c in self.components:
            out *= c.fractional_moment(p)
        return out

    def truncated_moment(self, q, lo, hi):
        scale, rest = self._split()
        lo, hi = lo / scale, hi / scale
        if not rest:
            return scale ** q if lo <= 1.0 < hi else 0.0
        if len(rest) == 1:
            return scale ** q * rest[0].truncated_moment(q, lo, hi)
        mix, inner = rest[-1], Product(tuple(rest[:-1]))
        pts = [p for p in (lo, hi) if 0 < p < np.inf]
        val = mix.expect(lambda x: x ** q * inner.truncated_moment(q, lo / x, hi / x), points=pts)
        return scale ** q * val

    def expect(self, f, points=None):
        scale, rest = self._split()
        if not rest:
            return float(f(scale))
        if len(rest) == 1:
            pts = [p / scale for p in points] if points else None
            return rest[0].expect(lambda x: f(scale * x), points=pts)
        mix, inner = rest[-1], Product(tuple(rest[:-1]))
        return mix.expect(lambda x: inner.expect(lambda y: f(scale * x * y)))

    def with_sigma(self, sigma):
        return Product(tuple(c.with_sigma(sigma) for c in self.components))

    def to_dict(self):
        return {"kind": "product", "components": [c.to_dict() for c in self.components]}


@dataclass(frozen=True)
class SharedFactor(Fading):
    """S_i = idiosyncratic_i * common, with one ``common`` draw per sampling call.

    Marginally each S_i has the product law, so tails and moments are those of
    ``Product((idiosyncratic, common))``.
    """

    idiosyncratic: Fading
    common: Fading
    shared = True

    def __post_init__(self):
        if self.idiosyncratic.shared or self.common.shared:
            raise ParameterError("shared-factor components must be independent laws")

    @property
    def marginal(self):
        return Product((self.idiosyncratic, self.common))

    def sample_common(self, rng):
        return float(self.common.sample(1, rng)[0])

    def sample(self, size, rng):
        common = self.sample_common(rng)
        return self.idiosyncratic.sample(size, rng) * common

    def tail(self, s):
        return self.marginal.tail(s)

    def fractional_moment(self, p):
        return self.marginal.fractional_moment(p)

    def truncated_moment(self, q, lo, hi):
        return self.marginal.truncated_moment(q, lo, hi)

    def expect(self, f, points=None):
        return self.marginal.expect(f, points)

    def with_sigma(self, sigma):
        return SharedFactor(self.idiosyncratic.with_sigma(sigma), self.common.with_sigma(sigma))

    def to_dict(self):
        return {"kind": "shared-factor", "idiosyncratic": self.idiosyncratic.to_dict(),
                "common": self.common.to_dict()}


def suzuki(sigma, beta):
    """Lognormal shadowing times unit-moment exponential fading."""
    return Product((Lognormal(sigma, beta), Exponential.unit_moment(beta)))


def sample(model, size, rng):
    return model.sample(size, rng)


def tail(model, s):
    return model.tail(s)


def fractional_moment(model, p):
    """E S^p.  Raises DivergentMomentError for an infinite moment and
    OverflowError when a finite moment is too large for a double."""
    val = model.fractional_moment(p)
    if math.isinf(val):
        raise DivergentMomentError(f"E S^{p} is infinite")
    return val


def from_dict(spec):
    """Build a fading law from its JSON form, e.g. ``{"kind": "lognormal", "sigma": 2, "beta": 4}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "lognormal":
            return Lognormal(**spec)
        if kind == "exponential":
            if spec.get("mu") == "unit-moment":
                return Exponential.unit_moment(spec["beta"])
            spec.pop("beta", None)
            return Exponential(**spec)
        if kind == "deterministic":
            return Deterministic(**spec)
        if kind == "product":
            return Product(tuple(from_dict(c) for c in spec["components"]))
        if kind == "suzuki":
            return suzuki(spec["sigma"], spec["beta"])
        if kind == "shared-factor":
            return SharedFactor(from_dict(spec["idiosyncratic"]), from_dict(spec["common"]))
    except (TypeError, KeyError) as exc:
        raise ParameterError(f"bad {kind} fading spec: {exc}") from None
    raise ParameterError(f"unknown fading kind {kind!r}")
