"""Charts, metric tensors, Christoffel symbols, and boundary geometry.

Three metric families are supported:

* ``FlatProduct``     -- D^n x S^1 with the flat product metric; chart
  coordinates (x_1..x_n, theta), metric = identity.
* ``SurfaceOfRevolution`` -- [-1, 1] x S^1 with metric dt^2 + F(t)^2 dalpha^2,
  where F(t) = 1 + h(shift + t) and h is a compactly supported smooth bump.
  F(+-1) = 1 always, so all profiles share the same boundary circles.
* ``PerturbedProduct`` -- a flat product with a smooth symmetric perturbation
  supported strictly inside the disc, vanishing identically within distance
  ``BOUNDARY_CLEARANCE`` of the boundary.

Boundary points and vectors are kept in canonical coordinates shared by every
spec with the same boundary type, so scattering data of different metrics can
be compared under the identity identification of their boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ContractError, DomainError, IdentificationError

TWO_PI = 2.0 * math.pi

#: below this inner product with the inward normal a boundary vector is grazing
GRAZING_TOL = 1e-9

#: interior perturbations must vanish within this chart distance of the boundary
BOUNDARY_CLEARANCE = 0.05


# ---------------------------------------------------------------------------
# angle helpers
# ---------------------------------------------------------------------------

def reduce_angle(a: float, period: float = TWO_PI) -> float:
    """Reduce an angle to [0, period)."""
    r = math.fmod(a, period)
    if r < 0.0:
        r += period
    if r >= period:  # fmod roundoff at the seam
        r -= period
    return r


def angle_distance(a: float, b: float, period: float = TWO_PI) -> float:
    """Distance between two angles, min(|d|, period - |d|)."""
    d = abs(reduce_angle(a, period) - reduce_angle(b, period))
    return min(d, period - d)


def signed_angle_delta(a: float, b: float, period: float = TWO_PI) -> float:
    """a - b reduced to (-period/2, period/2]."""
    d = math.fmod(a - b, period)
    if d <= -0.5 * period:
        d += period
    elif d > 0.5 * period:
        d -= period
    return d


def sphere_surface_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def unit_vector_angle(a, b) -> float:
    """Angle between two unit vectors, stable near 0 and pi.

    Uses 2*arcsin of the half chord instead of arccos of the inner product,
    so roundoff in nearly equal vectors is not amplified to sqrt(eps).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / float(np.linalg.norm(a))
    b = b / float(np.linalg.norm(b))
    if float(a @ b) >= 0.0:
        half = 0.5 * float(np.linalg.norm(a - b))
        return 2.0 * math.asin(min(1.0, half))
    half = 0.5 * float(np.linalg.norm(a + b))
    return math.pi - 2.0 * math.asin(min(1.0, half))


# ---------------------------------------------------------------------------
# bump profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpProfile:
    """Generating function F(t) = 1 + h(shift + t) of a revolution surface.

    h(u) = amplitude * exp(1 - epsilon^2 / (epsilon^2 - u^2)) for |u| < epsilon
    and 0 otherwise, so h is C-infinity, h(0) = amplitude, and h vanishes with
    all derivatives at |u| = epsilon.  amplitude = 0 gives the flat cylinder.
    """

    amplitude: float = 0.05
    epsilon: float = 0.2
    shift: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 0.25):
            raise ContractError("bump epsilon must lie in (0, 1/4)")
        if self.amplitude < 0.0:
            raise ContractError("bump amplitude must be >= 0 (profiles keep F >= 1)")
        if self.amplitude > 0.0 and not self.shift_admissible(self.shift, self.epsilon):
            raise ContractError(
                "bump shift must lie in (-1 + 2*epsilon, 1 - 2*epsilon) so the "
                "bump support stays strictly inside the cylinder"
            )

    @staticmethod
    def shift_admissible(shift: float, epsilon: float) -> bool:
        return -1.0 + 2.0 * epsilon < shift < 1.0 - 2.0 * epsilon

    # -- bump h and derivatives in the shifted variable u = shift + t --------

    def h(self, u: float) -> float:
        e2 = self.epsilon * self.epsilon
        w = e2 - u * u
        if w <= 0.0 or self.amplitude == 0.0:
            return 0.0
        return self.amplitude * math.exp(1.0 - e2 / w)

    def dh(self, u: float) -> float:
        e2 = self.epsilon * self.epsilon
        w = e2 - u * u
        if w <= 0.0 or self.amplitude == 0.0:
            return 0.0
        return -2.0 * e2 * u * self.h(u) / (w * w)

    def d2h(self, u: float) -> float:
        e2 = self.epsilon * self.epsilon
        w = e2 - u * u
        if w <= 0.0 or self.amplitude == 0.0:
            return 0.0
        hv = self.h(u)
        dhv = self.dh(u)
        return -2.0 * e2 * ((hv + u * dhv) / (w * w) + 4.0 * u * u * hv / (w ** 3))

    # -- profile F(t) = 1 + h(shift + t) -------------------------------------

    def value(self, t: float) -> float:
        return 1.0 + self.h(self.shift + t)

    def deriv(self, t: float) -> float:
        return self.dh(self.shift + t)

    def second(self, t: float) -> float:
        return self.d2h(self.shift + t)

    def support(self) -> tuple[float, float]:
        """t-interval outside of which F is identically 1."""
        return (-self.shift - self.epsilon, -self.shift + self.epsilon)

    @property
    def max_value(self) -> float:
        return 1.0 + self.amplitude


# ---------------------------------------------------------------------------
# manifold specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatProduct:
    """D^n x S^1 with the flat product metric (chart = (x, theta))."""

    n: int = 2
    disc_radius: float = 1.0
    circle_length: float = TWO_PI
    trapped_budget: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ContractError(
                "FlatProduct supports disc dimension n >= 2; the 2D flat "
                "cylinder is available as SurfaceOfRevolution with amplitude 0"
            )
        if self.disc_radius <= 0.0 or self.circle_length <= 0.0:
            raise ContractError("disc_radius and circle_length must be positive")

    @property
    def dim(self) -> int:
        return self.n + 1


@dataclass(frozen=True)
class SurfaceOfRevolution:
    """[-1, 1] x S^1 with metric dt^2 + F(t)^2 dalpha^2, F from a BumpProfile."""

    profile: BumpProfile = BumpProfile(amplitude=0.0)
    trapped_budget: float | None = None

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class PerturbedProduct:
    """Flat product plus a smooth interior perturbation of the metric.

    The perturbation is amplitude * b(x) * E where b is a radial bump in disc
    coordinates supported in the ball of the given radius about ``center``
    (b(center) = 1) and E selects the perturbed block:

    * ``disc``  -- E = identity on the disc block (g_xx scaled),
    * ``fiber`` -- E = d(theta)^2 (g_thth scaled),
    * ``all``   -- E = full identity.
    """

    base: FlatProduct = FlatProduct()
    amplitude: float = 0.1
    radius: float = 0.3
    center: tuple[float, ...] = (0.0, 0.0)
    mode: str = "disc"
    trapped_budget: float | None = None

    def __post_init__(self):
        if self.mode not in ("disc", "fiber", "all"):
            raise ContractError("perturbation mode must be one of disc|fiber|all")
        if len(self.center) != self.base.n:
            raise ContractError("perturbation center must have n components")
        if abs(self.amplitude) >= 0.5:
            raise ContractError(
                "|perturbation amplitude| must be < 0.5, half the base metric's "
                "smallest eigenvalue, to keep the metric positive definite"
            )
        if self.radius <= 0.0:
            raise ContractError("perturbation radius must be positive")
        c = math.sqrt(sum(x * x for x in self.center))
        if c + self.radius > self.base.disc_radius - BOUNDARY_CLEARANCE + 1e-12:
            raise ContractError(
                "perturbation must vanish near the boundary: require "
                f"|center| + radius <= disc_radius - {BOUNDARY_CLEARANCE}"
            )

    @property
    def dim(self) -> int:
        return self.base.dim

    def core_bump(self, x) -> float:
        """Radial bump b(x) in disc coordinates, 1 at the center, 0 outside."""
        q = sum((xi - ci) ** 2 for xi, ci in zip(x, self.center)) / (self.radius ** 2)
        if q >= 1.0:
            return 0.0
        return math.exp(1.0 - 1.0 / (1.0 - q))

    def core_bump_grad(self, x) -> np.ndarray:
        q = sum((xi - ci) ** 2 for xi, ci in zip(x, self.center)) / (self.radius ** 2)
        g = np.zeros(self.base.n)
        if q >= 1.0:
            return g
        b = math.exp(1.0 - 1.0 / (1.0 - q))
        dbdq = -b / (1.0 - q) ** 2
        for i in range(self.base.n):
            g[i] = dbdq * 2.0 * (x[i] - self.center[i]) / (self.radius ** 2)
        return g


ManifoldSpec = Union[FlatProduct, SurfaceOfRevolution, PerturbedProduct]


# ---------------------------------------------------------------------------
# chart-level queries
# ---------------------------------------------------------------------------

def chart_dim(spec: ManifoldSpec) -> int:
    return spec.dim


def chart_coord_names(spec: ManifoldSpec) -> list[str]:
    if isinstance(spec, SurfaceOfRevolution):
        return ["t", "alpha"]
    n = spec.n if isinstance(spec, FlatProduct) else spec.base.n
    return [f"x{i + 1}" for i in range(n)] + ["theta"]


def chart_contains(spec: ManifoldSpec, pos, tol: float = 1e-9) -> bool:
    pos = np.asarray(pos, dtype=float)
    if isinstance(spec, SurfaceOfRevolution):
        return abs(pos[0]) <= 1.0 + tol
    flat = spec if isinstance(spec, FlatProduct) else spec.base
    return float(np.linalg.norm(pos[: flat.n])) <= flat.disc_radius + tol


def boundary_gap(spec: ManifoldSpec, pos) -> float:
    """Defining function of the boundary: positive inside, zero on it."""
    if isinstance(spec, SurfaceOfRevolution):
        return 1.0 - abs(pos[0])
    flat = spec if isinstance(spec, FlatProduct) else spec.base
    s = 0.0
    for i in range(flat.n):
        s += pos[i] * pos[i]
    return flat.disc_radius - math.sqrt(s)


def reduce_chart_point(spec: ManifoldSpec, pos) -> np.ndarray:
    """Return the chart point with its angle coordinate reduced to [0, period)."""
    pos = np.array(pos, dtype=float)
    if isinstance(spec, SurfaceOfRevolution):
        pos[1] = reduce_angle(pos[1], TWO_PI)
    else:
        flat = spec if isinstance(spec, FlatProduct) else spec.base
        pos[-1] = reduce_angle(pos[-1], flat.circle_length)
    return pos


def diameter(spec: ManifoldSpec) -> float:
    """Upper estimate of the manifold diameter, used for trapped budgets."""
    if isinstance(spec, FlatProduct):
        return math.hypot(2.0 * spec.disc_radius, 0.5 * spec.circle_length)
    if isinstance(spec, SurfaceOfRevolution):
        return math.hypot(2.0, math.pi * spec.profile.max_value)
    return diameter(spec.base) * math.sqrt(1.0 + abs(spec.amplitude))


def default_trapped_budget(spec: ManifoldSpec) -> float:
    if spec.trapped_budget is not None:
        return spec.trapped_budget
    return 1e3 * diameter(spec)


# ---------------------------------------------------------------------------
# metric, metric derivatives, Christoffel symbols
# ---------------------------------------------------------------------------

def metric_at(spec: ManifoldSpec, pos) -> np.ndarray:
    """Metric tensor g_ij at a chart point (symmetric positive definite)."""
    pos = np.asarray(pos, dtype=float)
    if not chart_contains(spec, pos, tol=1e-9):
        raise DomainError(f"chart point {pos.tolist()} outside the domain")
    if isinstance(spec, FlatProduct):
        return np.eye(spec.dim)
    if isinstance(spec, SurfaceOfRevolution):
        F = spec.profile.value(float(pos[0]))
        return np.diag([1.0, F * F])
    return _perturbed_metric(spec, pos)


def _perturbed_metric(spec: PerturbedProduct, pos) -> np.ndarray:
    n = spec.base.n
    g = np.eye(spec.dim)
    p = spec.amplitude * spec.core_bump(pos[:n])
    if spec.mode == "disc":
        g[:n, :n] += p * np.eye(n)
    elif spec.mode == "fiber":
        g[n, n] += p
    else:
        g += p * np.eye(spec.dim)
    return g


def metric_derivs_at(spec: ManifoldSpec, pos) -> np.ndarray:
    """Partial derivatives D[l, i, j] = d g_ij / d x_l at a chart point."""
    pos = np.asarray(pos, dtype=float)
    d = spec.dim
    D = np.zeros((d, d, d))
    if isinstance(spec, FlatProduct):
        return D
    if isinstance(spec, SurfaceOfRevolution):
        F = spec.profile.value(float(pos[0]))
        dF = spec.profile.deriv(float(pos[0]))
        D[0, 1, 1] = 2.0 * F * dF
        return D
    n = spec.base.n
    grad = spec.amplitude * spec.core_bump_grad(pos[:n])
    for l in range(n):
        if spec.mode == "disc":
            D[l, :n, :n] = grad[l] * np.eye(n)
        elif spec.mode == "fiber":
            D[l, n, n] = grad[l]
        else:
            D[l] = grad[l] * np.eye(d)
    return D


def christoffel_at(spec: ManifoldSpec, pos) -> np.ndarray:
    """Christoffel symbols Gamma[k, i, j] of the metric at a chart point.

    Computed from the analytic metric derivatives through the standard
    formula, so the result is exact for all three families and symmetric in
    the lower indices by construction.
    """
    pos = np.asarray(pos, dtype=float)
    if isinstance(spec, FlatProduct):
        return np.zeros((spec.dim,) * 3)
    g = metric_at(spec, pos)
    D = metric_derivs_at(spec, pos)
    ginv = np.linalg.inv(g)
    # E[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    E = D + D.transpose(1, 0, 2) - D.transpose(1, 2, 0)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, E)


def metric_norm(spec: ManifoldSpec, pos, vec) -> float:
    g = metric_at(spec, pos)
    v = np.asarray(vec, dtype=float)
    return float(math.sqrt(v @ g @ v))


def metric_inner(spec: ManifoldSpec, pos, a, b) -> float:
    g = metric_at(spec, pos)
    return float(np.asarray(a, float) @ g @ np.asarray(b, float))


# ---------------------------------------------------------------------------
# boundary types and canonical boundary vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryPoint:
    """Canonical boundary coordinates.

    Product boundary: coords = (u_1..u_n, theta) with |u| = 1.
    Revolution boundary: coords = (end, alpha) with end in {-1, +1}.
    """

    coords: tuple[float, ...]


@dataclass(frozen=True)
class BoundaryVector:
    """A unit tangent vector at a boundary point, in the shared boundary basis.

    Product boundary: comps = (v_x1..v_xn, v_theta), unit in the flat metric.
    Revolution boundary: comps = (v_t, v_alpha); since F(+-1) = 1 the chart
    basis at the ends is orthonormal for every profile.
    """

    point: BoundaryPoint
    comps: tuple[float, ...]

    def reversed(self) -> "BoundaryVector":
        return BoundaryVector(self.point, tuple(-c for c in self.comps))


@dataclass(frozen=True)
class ProductBoundary:
    """S^(n-1) x S^1 boundary shared by flat and perturbed products."""

    n: int
    disc_radius: float = 1.0
    circle_length: float = TWO_PI

    # -- constructors --------------------------------------------------------

    def point(self, u, theta: float) -> BoundaryPoint:
        u = np.asarray(u, dtype=float)
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            raise ContractError("boundary sphere point must be nonzero")
        u = u / nrm
        return BoundaryPoint(tuple(float(x) for x in u)
                             + (reduce_angle(float(theta), self.circle_length),))

    def vector(self, point: BoundaryPoint, comps, normalize: bool = True) -> BoundaryVector:
        c = np.asarray(comps, dtype=float)
        if normalize:
            c = c / float(np.linalg.norm(c))
        return BoundaryVector(point, tuple(float(x) for x in c))

    def from_angles(self, u, theta, psi, tangent_dir) -> BoundaryVector:
        """Inward vector cos(psi) * normal + sin(psi) * (unit boundary tangent)."""
        pt = self.point(u, theta)
        u = np.asarray(pt.coords[: self.n])
        normal = np.append(-u, 0.0)
        tang = np.asarray(tangent_dir, dtype=float)
        comps = math.cos(psi) * normal + math.sin(psi) * tang
        return BoundaryVector(pt, tuple(float(x) for x in comps))

    # -- geometry -------------------------------------------------------------

    def split_point(self, point: BoundaryPoint):
        c = point.coords
        return np.asarray(c[: self.n]), c[self.n]

    def normal_comps(self, point: BoundaryPoint) -> tuple[float, ...]:
        u = point.coords[: self.n]
        return tuple(-x for x in u) + (0.0,)

    def nu(self, bvec: BoundaryVector) -> float:
        """Inner product with the inward normal (positive = inward)."""
        u = bvec.point.coords[: self.n]
        return -sum(ui * vi for ui, vi in zip(u, bvec.comps[: self.n]))

    def point_distance(self, a: BoundaryPoint, b: BoundaryPoint) -> float:
        ua, ta = self.split_point(a)
        ub, tb = self.split_point(b)
        arc = self.disc_radius * unit_vector_angle(ua, ub)
        return math.hypot(arc, angle_distance(ta, tb, self.circle_length))

    def vector_angle(self, a: BoundaryVector, b: BoundaryVector) -> float:
        return unit_vector_angle(a.comps, b.comps)

    def area(self) -> float:
        return sphere_surface_area(self.n - 1) * self.disc_radius ** (self.n - 1) \
            * self.circle_length

    def tangent_frame(self, u) -> list[np.ndarray]:
        """Deterministic orthonormal frame of the sphere tangent space at u."""
        u = np.asarray(u, dtype=float)
        if self.n == 2:
            return [np.array([-u[1], u[0]])]
        frame = []
        basis = np.eye(self.n)
        for e in basis:
            w = e - (e @ u) * u
            for f in frame:
                w = w - (w @ f) * f
            nrm = float(np.linalg.norm(w))
            if nrm > 1e-8:
                frame.append(w / nrm)
            if len(frame) == self.n - 1:
                break
        return frame

    # -- sampling --------------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> BoundaryVector:
        """Uniform boundary area x uniform inward hemisphere solid angle."""
        u = rng.normal(size=self.n)
        u = u / float(np.linalg.norm(u))
        theta = rng.uniform(0.0, self.circle_length)
        v = rng.normal(size=self.n + 1)
        v = v / float(np.linalg.norm(v))
        if float(u @ v[: self.n]) > 0.0:
            v = -v
        return BoundaryVector(self.point(u, theta), tuple(v))

    def grid_axes(self) -> list[tuple[str, float, float]]:
        """(name, start, span) per axis; nodes are open, (i + 1/2)/k * span."""
        axes = []
        if self.n == 2:
            axes.append(("sphere_a", 0.0, TWO_PI))
        elif self.n == 3:
            axes.append(("sphere_polar", 0.0, math.pi))
            axes.append(("sphere_azim", 0.0, TWO_PI))
        else:
            raise IdentificationError("grid sampling supports n in {2, 3}; use Monte Carlo")
        axes.append(("theta", 0.0, self.circle_length))
        axes.append(("psi", 0.0, 0.5 * math.pi))
        if self.n == 2:
            axes.append(("chi", 0.0, TWO_PI))
        else:
            axes.append(("dir_polar", 0.0, math.pi))
            axes.append(("dir_azim", 0.0, TWO_PI))
        return axes

    def grid_vector(self, values: tuple[float, ...]) -> BoundaryVector:
        if self.n == 2:
            a, theta, psi, chi = values
            u = np.array([math.cos(a), math.sin(a)])
            t1 = np.array([-u[1], u[0]])
            tang = math.cos(chi) * np.append(t1, 0.0) + math.sin(chi) * _e_last(3)
        else:
            pol, azim, theta, psi, b, chi = values
            u = np.array([
                math.sin(pol) * math.cos(azim),
                math.sin(pol) * math.sin(azim),
                math.cos(pol),
            ])
            t1, t2 = self.tangent_frame(u)
            tang = (
                math.sin(b) * math.cos(chi) * np.append(t1, 0.0)
                + math.sin(b) * math.sin(chi) * np.append(t2, 0.0)
                + math.cos(b) * _e_last(4)
            )
        return self.from_angles(u, theta, psi, tang)


def _e_last(d: int) -> np.ndarray:
    e = np.zeros(d)
    e[-1] = 1.0
    return e


@dataclass(frozen=True)
class RevolutionBoundary:
    """Two unit circles, t = -1 and t = +1, shared by all admissible profiles."""

    circle_length: float = TWO_PI

    def point(self, end: int, alpha: float) -> BoundaryPoint:
        if end not in (-1, 1):
            raise ContractError("revolution boundary end must be -1 or +1")
        return BoundaryPoint((float(end),
                              reduce_angle(float(alpha), self.circle_length)))

    def vector(self, point: BoundaryPoint, comps, normalize: bool = True) -> BoundaryVector:
        c = np.asarray(comps, dtype=float)
        if normalize:
            c = c / float(np.linalg.norm(c))
        return BoundaryVector(point, tuple(float(x) for x in c))

    def from_angle(self, end: int, alpha: float, phi: float) -> BoundaryVector:
        """Inward vector at angle phi from the inward meridian direction."""
        pt = self.point(end, alpha)
        return BoundaryVector(pt, (-float(end) * math.cos(phi), math.sin(phi)))

    def normal_comps(self, point: BoundaryPoint) -> tuple[float, ...]:
        return (-point.coords[0], 0.0)

    def nu(self, bvec: BoundaryVector) -> float:
        return -bvec.point.coords[0] * bvec.comps[0]

    def point_distance(self, a: BoundaryPoint, b: BoundaryPoint) -> float:
        if a.coords[0] != b.coords[0]:
            return math.inf  # different boundary components
        return angle_distance(a.coords[1], b.coords[1], self.circle_length)

    def vector_angle(self, a: BoundaryVector, b: BoundaryVector) -> float:
        return unit_vector_angle(a.comps, b.comps)

    def area(self) -> float:
        return 2.0 * self.circle_length

    def sample(self, rng: np.random.Generator) -> BoundaryVector:
        end = -1 if rng.random() < 0.5 else 1
        alpha = rng.uniform(0.0, self.circle_length)
        beta = rng.uniform(-0.5 * math.pi, 0.5 * math.pi)
        return self.from_angle(end, alpha, beta)

    def grid_axes(self) -> list[tuple[str, float, float]]:
        return [("end", -1.0, 2.0), ("alpha", 0.0, self.circle_length),
                ("phi", -0.5 * math.pi, math.pi)]

    def grid_vector(self, values: tuple[float, ...]) -> BoundaryVector:
        end_val, alpha, phi = values
        return self.from_angle(int(end_val), alpha, phi)


BoundaryType = Union[ProductBoundary, RevolutionBoundary]


def boundary_type(spec: ManifoldSpec) -> BoundaryType:
    if isinstance(spec, SurfaceOfRevolution):
        return RevolutionBoundary()
    flat = spec if isinstance(spec, FlatProduct) else spec.base
    return ProductBoundary(flat.n, flat.disc_radius, flat.circle_length)


def classify_boundary_vector(bt: BoundaryType, bvec: BoundaryVector,
                             tol: float = GRAZING_TOL) -> str:
    nu = bt.nu(bvec)
    if nu > tol:
        return "inward"
    if nu < -tol:
        return "outward"
    return "grazing"


# ---------------------------------------------------------------------------
# boundary <-> chart conversions
# ---------------------------------------------------------------------------

def boundary_point_chart(spec: ManifoldSpec, point: BoundaryPoint) -> np.ndarray:
    """Chart coordinates of a canonical boundary point."""
    bt = boundary_type(spec)
    if isinstance(bt, RevolutionBoundary):
        return np.array([point.coords[0], point.coords[1]])
    u, theta = bt.split_point(point)
    return np.append(bt.disc_radius * u, theta)


def boundary_to_chart(spec: ManifoldSpec, bvec: BoundaryVector):
    """Chart realization (position, velocity, inward normal) of a boundary vector.

    The boundary metric agrees with the flat canonical one for every spec
    sharing a boundary type, so unit canonical vectors stay unit in the chart.
    """
    bt = boundary_type(spec)
    pos = boundary_point_chart(spec, bvec.point)
    vel = np.asarray(bvec.comps, dtype=float)
    normal = np.asarray(bt.normal_comps(bvec.point), dtype=float)
    return pos, vel, normal


def boundary_from_chart(spec: ManifoldSpec, pos, vel, tol: float = 1e-6) -> BoundaryVector:
    """Canonical boundary vector from a chart position/velocity at the boundary.

    The position is projected exactly onto the boundary and the velocity is
    renormalized to unit length, absorbing integrator event tolerance.
    """
    bt = boundary_type(spec)
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    if abs(boundary_gap(spec, pos)) > tol:
        raise IdentificationError("chart point is not on the boundary")
    if isinstance(bt, RevolutionBoundary):
        end = -1 if pos[0] < 0 else 1
        pt = bt.point(end, pos[1])
        return bt.vector(pt, vel, normalize=True)
    u = pos[: bt.n] / float(np.linalg.norm(pos[: bt.n]))
    pt = bt.point(u, pos[-1])
    return bt.vector(pt, vel, normalize=True)
