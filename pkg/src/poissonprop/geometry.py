"""Planar transmitter patterns on a disk of radius ``r_max``, origin excluded."""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import special

from .errors import OutOfWindowError, ParameterError
from .seeding import as_rng

LATTICE_KINDS = ("square", "triangular", "hexagonal")


@dataclass(frozen=True)
class GrowthFunction:
    """Asymptotic radial count D(r) of a pattern.

    ``kind`` is a lattice kind (``scale`` = edge length s) or ``"disk-area"``
    (``scale`` = intensity lambda, points per unit area).
    """

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in LATTICE_KINDS + ("disk-area",):
            raise ParameterError(f"unknown growth kind {self.kind!r}")
        if not self.scale > 0:
            raise ParameterError("growth scale must be positive")

    @property
    def intensity(self):
        """Points per unit area."""
        s = self.scale
        return {
            "square": 1 / s ** 2,
            "triangular": 2 / (math.sqrt(3) * s ** 2),
            "hexagonal": 4 / (3 * math.sqrt(3) * s ** 2),
            "disk-area": s,
        }[self.kind]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self.intensity * math.pi * r ** 2
        return float(out) if out.ndim == 0 else out

    def inverse(self, d):
        return np.sqrt(np.asarray(d, dtype=float) / (self.intensity * math.pi))


def growth_value(D, r):
    if np.any(np.asarray(r) < 0):
        raise ParameterError("growth_value needs r >= 0")
    return D(r)


@dataclass
class PointPattern2D:
    """Finite planar pattern inside the closed disk of radius ``r_max``.

    ``growth`` (optional) records the intensity the pattern continues with
    beyond ``r_max``; the propagation layer uses it for far-field completion.
    """

    points: np.ndarray
    r_max: float
    provenance: dict = field(default_factory=dict)
    growth: GrowthFunction = None
    radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        r = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(r == 0):
            raise ParameterError("patterns exclude the origin")
        if np.any(r > self.r_max * (1 + 1e-12)):
            raise ParameterError("pattern point outside r_max")
        # fixed order (radius, then angle) so fading draws attach deterministically
        order = np.lexsort((np.arctan2(pts[:, 1], pts[:, 0]), r))
        self.points = pts[order]
        self.radii = r[order]

    @classmethod
    def from_radii(cls, radii, r_max, provenance=None, growth=None):
        """Pattern known only through its radii (points placed on the positive x-axis)."""
        radii = np.asarray(radii, dtype=float)
        pts = np.column_stack([radii, np.zeros_like(radii)])
        return cls(pts, r_max, provenance or {"kind": "radii"}, growth)

    def __len__(self):
        return len(self.radii)

    def radial_count(self, r):
        return radial_count(self, r)


def radial_count(pattern, r):
    """Number of points with 0 < |x| <= r."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("radius must be nonnegative")
    if np.any(r_arr > pattern.r_max):
        raise OutOfWindowError(f"radius exceeds the simulated disk r_max={pattern.r_max}")
    out = np.searchsorted(pattern.radii, r_arr, side="right")
    return int(out) if out.ndim == 0 else out


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ParameterError(f"{name} must be positive, got {v}")


def make_lattice(kind, s, r_max):
    """All vertices of a lattice with edge length ``s`` inside the disk, origin removed."""
    _check_positive(s=s, r_max=r_max)
    if kind not in LATTICE_KINDS:
        raise ParameterError(f"unknown lattice kind {kind!r}")
    if kind == "square":
        a1, a2, basis = (s, 0.0), (0.0, s), [(0.0, 0.0)]
        step = s
    elif kind == "triangular":
        a1, a2, basis = (s, 0.0), (s / 2, s * math.sqrt(3) / 2), [(0.0, 0.0)]
        step = s * math.sqrt(3) / 2
    else:
        # honeycomb: two triangular sublattices of spacing s*sqrt(3)
        a = s * math.sqrt(3)
        a1, a2, basis = (a, 0.0), (a / 2, a * math.sqrt(3) / 2), [(0.0, 0.0), (0.0, s)]
        step = a * math.sqrt(3) / 2
    n = int(math.ceil(r_max / step)) + 2
    idx = np.arange(-n, n + 1, dtype=float)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    i, j = i.ravel(), j.ravel()
    chunks = []
    for bx, by in basis:
        x = i * a1[0] + j * a2[0] + bx
        y = i * a1[1] + j * a2[1] + by
        r2 = x * x + y * y
        keep = (r2 > 0) & (r2 <= r_max * r_max)
        chunks.append(np.column_stack([x[keep], y[keep]]))
    return PointPattern2D(
        np.concatenate(chunks), r_max,
        {"kind": kind, "s": s, "r_max": r_max},
        GrowthFunction(kind, s),
    )


def _uniform_disk(n, r_max, rng):
    r = r_max * np.sqrt(rng.random(n))
    phi = 2 * math.pi * rng.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def sample_poisson(lam, r_max, seed=None):
    """Homogeneous Poisson pattern of intensity ``lam`` on the disk."""
    _check_positive(lam=lam, r_max=r_max)
    rng = as_rng(seed)
    n = rng.poisson(lam * math.pi * r_max ** 2)
    pts = _uniform_disk(n, r_max, rng)
    pts = pts[np.any(pts != 0, axis=1)]
    prov = {"kind": "poisson", "lambda": lam, "r_max": r_max}
    if isinstance(seed, (int, np.integer)):
        prov["seed"] = int(seed)
    return PointPattern2D(pts, r_max, prov, GrowthFunction("disk-area", lam))


def sample_cox_mixture(lam1, lam2, r_max, seed=None):
    """Poisson pattern whose intensity is ``lam1`` or ``lam2`` with probability 1/2."""
    _check_positive(lam1=lam1, lam2=lam2)
    rng = as_rng(seed)
    lam = lam1 if rng.random() < 0.5 else lam2
    pattern = sample_poisson(lam, r_max, rng)
    pattern.provenance = {"kind": "cox-mixture", "lambda1": lam1, "lambda2": lam2,
                          "chosen_lambda": lam, "r_max": r_max}
    if isinstance(seed, (int, np.integer)):
        pattern.provenance["seed"] = int(seed)
    # the continuation beyond r_max has the realized intensity
    pattern.growth = GrowthFunction("disk-area", lam)
    return pattern


@dataclass(frozen=True)
class GinibreParams:
    """alpha-Ginibre parameters: thinning ``alpha`` in (0, 1], intensity ``c / pi``."""

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if not (0 < self.alpha <= 1) or not self.c > 0:
            raise ParameterError("alpha-Ginibre needs 0 < alpha <= 1 and c > 0")

    @property
    def intensity(self):
        return self.c / math.pi

    def rho1(self):
        return self.c / math.pi

    def pair_correlation(self, u):
        """rho2(x, y) / rho1^2 at |x - y| = u."""
        u = np.asarray(u, dtype=float)
        return -np.expm1(-(self.c / self.alpha) * u * u)

    def rho2(self, u):
        return self.intensity ** 2 * self.pair_correlation(u)


@lru_cache(maxsize=64)
def ginibre_kmax(params, r_max, eps=1e-8):
    """Smallest index count whose omitted points fall inside ``r_max`` with
    total probability below ``eps``.

    Point k has squared modulus Gamma(k, alpha/c); these are stochastically
    increasing in k, so the tail sum is taken over k > kmax.
    """
    x = r_max ** 2 * params.c / params.alpha
    upper = int(x + 40 * math.sqrt(x) + 200)
    while True:
        k = np.arange(1, upper + 1)
        probs = special.gammainc(k, x)
        if probs[-1] < eps * 1e-6:
            break
        upper *= 2
    tail = np.cumsum(probs[::-1])[::-1]  # tail[j] = sum_{k >= j+1} P_k
    below = np.nonzero(tail < eps)[0]
    return int(below[0])  # omit indices k >= below[0] + 1


def sample_alpha_ginibre(params, r_max, seed=None, method="eigen"):
    """alpha-Ginibre pattern on the disk.

    ``method="eigen"`` draws the eigenvalues of a kmax x kmax complex Gaussian
    matrix (a truncated Ginibre ensemble), rescales by sqrt(alpha/c) and
    thins each eigenvalue independently with probability ``alpha``.  This
    reproduces the full planar law, including the pair correlation.

    ``method="kostlan"`` keeps index k with probability ``alpha`` and gives it
    an independent Gamma(k, alpha/c) squared modulus and a uniform angle.  The
    radii then have exactly the alpha-Ginibre law, so radial counts and
    everything built from radii (propagation values) are exact, but angular
    correlations are lost.  It scales to far larger disks.
    """
    if not r_max > 0:
        raise ParameterError("r_max must be positive")
    rng = as_rng(seed)
    kmax = ginibre_kmax(params, r_max)
    scale = params.alpha / params.c
    if method == "eigen":
        if kmax > 3000:
            raise ParameterError(f"eigen method would need a {kmax}x{kmax} matrix; use method='kostlan'")
        z = np.zeros(0, dtype=complex)
        if kmax:
            a = (rng.standard_normal((kmax, kmax)) + 1j * rng.standard_normal((kmax, kmax))) / math.sqrt(2)
            z = np.linalg.eigvals(a) * math.sqrt(scale)
            z = z[rng.random(kmax) < params.alpha]
            z = z[np.abs(z) <= r_max]
        pts = np.column_stack([z.real, z.imag])
    elif method == "kostlan":
        k = np.arange(1, kmax + 1)
        k = k[rng.random(kmax) < params.alpha]
        mod2 = rng.gamma(k, scale)
        mod = np.sqrt(mod2[mod2 <= r_max ** 2])
        phi = 2 * math.pi * rng.random(mod.size)
        pts = np.column_stack([mod * np.cos(phi), mod * np.sin(phi)])
    else:
        raise ParameterError(f"unknown Ginibre method {method!r}")
    pts = pts[np.any(pts != 0, axis=1)]
    prov = {"kind": "ginibre", "alpha": params.alpha, "c": params.c, "r_max": r_max,
            "method": method, "kmax": kmax}
    if isinstance(seed, (int, np.integer)):
        prov["seed"] = int(seed)
    return PointPattern2D(pts, r_max, prov, GrowthFunction("disk-area", params.intensity))


def pattern_sampler(spec, r_max):
    """Return ``(sampler, growth)`` for a pattern spec dict.

    ``sampler(rng)`` yields a fresh realization; deterministic lattices return
    the same pattern every time.
    """
    spec = dict(spec)
    kind = spec.get("kind")
    if kind in LATTICE_KINDS:
        pattern = make_lattice(kind, spec.get("s", 1.0), r_max)
        return (lambda rng: pattern), pattern.growth
    if kind == "poisson":
        lam = spec["lambda"]
        return (lambda rng: sample_poisson(lam, r_max, rng)), GrowthFunction("disk-area", lam)
    if kind == "cox-mixture":
        l1, l2 = spec["lambda1"], spec["lambda2"]
        return (lambda rng: sample_cox_mixture(l1, l2, r_max, rng)), None
    if kind == "ginibre":
        params = GinibreParams(spec["alpha"], spec.get("c", 1.0))
        method = spec.get("method", "kostlan")
        return (lambda rng: sample_alpha_ginibre(params, r_max, rng, method)), \
            GrowthFunction("disk-area", params.intensity)
    if kind == "points":
        if "radii" in spec:
            pattern = PointPattern2D.from_radii(spec["radii"], r_max, {"kind": "points"})
        else:
            pattern = PointPattern2D(np.asarray(spec.get("points", []), dtype=float).reshape(-1, 2),
                                     r_max, {"kind": "points"})
        return (lambda rng: pattern), None
    raise ParameterError(f"unknown pattern kind {kind!r}")
