"""Volume from lens data, trapped-set measure, and Busemann approximations.

Santalo volume.  The Liouville measure of the non-trapped part of the unit
tangent bundle equals the boundary integral of the travel time weighted by
the cosine of the entry angle:

    Vol(M) * vol(S^(d-1)) = integral over U+dM of TT(V) <V, normal> dsigma.

Sampling boundary points uniformly w.r.t. boundary area A and directions
uniformly w.r.t. solid angle on the inward hemisphere (mass vol(S^(d-1))/2)
gives the estimator

    Vol_est = A * mean(TT * nu) / 2,

with the dimension-dependent sphere measures cancelling; the hemisphere mass
is still derived from the Gamma-function formula and the normalization is
validated on two flat products with known volume.  Trapped samples are
censored: they contribute budget * nu as a lower bound and are counted in
the censored fraction.

Busemann functions.  On the universal-cover model (angle unwrapped, flat
exterior extension) the approximants f_t(p) = d(p, gamma_V(t)) - t of the
Busemann function of a ray with non-vertical exterior line are evaluated by
cover distances; f_t is non-increasing in t and 1-Lipschitz, and its
gradient has unit norm away from the ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ContractError
from .geodesic import cover_distance, cover_flow, integrate_until_exit
from .manifold import (
    FlatProduct,
    ManifoldSpec,
    PerturbedProduct,
    SurfaceOfRevolution,
    boundary_type,
    default_trapped_budget,
    metric_at,
    sphere_surface_area,
)
from .revolution import travel_time_batch


# ---------------------------------------------------------------------------
# sampling travel times in bulk
# ---------------------------------------------------------------------------

def _flat_product_tt(spec: FlatProduct, rng: np.random.Generator, n: int):
    """(travel_time, nu) samples on a flat product, closed form, vectorized."""
    dim = spec.n
    u = rng.normal(size=(n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = rng.normal(size=(n, dim + 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    dot = np.einsum("ij,ij->i", u, v[:, :dim])
    flip = dot > 0.0
    v[flip] = -v[flip]
    nu = -np.einsum("ij,ij->i", u, v[:, :dim])
    m2 = np.einsum("ij,ij->i", v[:, :dim], v[:, :dim])
    tt = 2.0 * spec.disc_radius * nu / m2
    return tt, nu


def _revolution_tt(spec: SurfaceOfRevolution, rng: np.random.Generator, n: int,
                   budget: float):
    """(travel_time, nu) samples on a revolution surface via Clairaut."""
    beta = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=n)
    nu = np.cos(beta)
    c = np.sin(beta)
    tt = travel_time_batch(spec.profile, c, exact_above=budget)
    return tt, nu


def _generic_tt(spec: ManifoldSpec, rng: np.random.Generator, n: int, budget: float):
    bt = boundary_type(spec)
    tt = np.empty(n)
    nu = np.empty(n)
    for i in range(n):
        b = bt.sample(rng)
        nu[i] = bt.nu(b)
        verdict, _ = integrate_until_exit(spec, b, budget=budget)
        tt[i] = verdict.travel_time if verdict.status == "exited" else math.inf
    return tt, nu


def _tt_samples(spec: ManifoldSpec, rng: np.random.Generator, n: int, budget: float):
    if isinstance(spec, FlatProduct):
        return _flat_product_tt(spec, rng, n)
    if isinstance(spec, SurfaceOfRevolution):
        return _revolution_tt(spec, rng, n, budget)
    return _generic_tt(spec, rng, n, budget)


# ---------------------------------------------------------------------------
# Santalo volume estimate
# ---------------------------------------------------------------------------

@dataclass
class SantaloEstimate:
    volume: float
    stderr: float
    n_samples: int
    censored_fraction: float
    budget: float
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "volume": self.volume,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "censored_fraction": self.censored_fraction,
            "budget": self.budget,
            "seed": self.seed,
        }


def santalo_volume(spec: ManifoldSpec, n_samples: int, budget: float | None = None,
                   seed: int = 0) -> SantaloEstimate:
    """Monte Carlo volume from lens data via the boundary travel-time integral.

    Converges to ``nontrapped_volume(spec)``: the full manifold volume
    whenever the trapped set has measure zero (flat products), and the
    boundary-visible mass otherwise (bump cylinders trap an open set of
    interior directions).  Either way the value is determined by the lens
    data, so lens-equivalent metrics report equal estimates.
    """
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")
    if budget is None:
        budget = default_trapped_budget(spec)
    rng = np.random.default_rng(seed)
    tt, nu = _tt_samples(spec, rng, n_samples, budget)
    censored = tt > budget
    tt = np.where(censored, budget, tt)
    y = tt * nu
    bt = boundary_type(spec)
    area = bt.area()
    dim = spec.dim
    hemisphere = 0.5 * sphere_surface_area(dim - 1)
    scale = area * hemisphere / sphere_surface_area(dim - 1)  # = area / 2
    vol = scale * float(np.mean(y))
    stderr = scale * float(np.std(y, ddof=1)) / math.sqrt(n_samples) \
        if n_samples > 1 else math.inf
    return SantaloEstimate(vol, stderr, n_samples,
                           float(np.mean(censored)), budget, seed)


def analytic_volume(spec: ManifoldSpec) -> float:
    """Reference volume for flat products and revolution surfaces."""
    if isinstance(spec, FlatProduct):
        ball = math.pi ** (spec.n / 2.0) / math.gamma(spec.n / 2.0 + 1.0) \
            * spec.disc_radius ** spec.n
        return ball * spec.circle_length
    if isinstance(spec, SurfaceOfRevolution):
        profile = spec.profile
        bump, _ = quad(profile.h, -profile.epsilon, profile.epsilon,
                       epsabs=1e-13, epsrel=1e-13)
        return 2.0 * math.pi * (2.0 + bump)
    raise ContractError("no analytic volume for perturbed products")


def nontrapped_volume(spec: ManifoldSpec) -> float:
    """What the boundary travel-time integral converges to: Vol(M) minus the
    normalized Liouville mass of the trapped set.

    Flat products trap only the vertical fibers (measure zero), so this is
    the full volume.  A bump cylinder traps every vector whose Clairaut
    constant exceeds 1: such geodesics oscillate inside the band where
    F >= |c| and never meet the boundary.  At height t the trapped
    directions fill all but 4*arcsin(1/F(t)) of the fiber circle, so the
    boundary-visible mass is the quadrature below.  It is shift invariant,
    which is the volume equality across the lens-equivalent family.
    """
    if isinstance(spec, FlatProduct):
        return analytic_volume(spec)
    if isinstance(spec, SurfaceOfRevolution):
        profile = spec.profile

        def visible(t):
            F = profile.value(t)
            return 4.0 * math.asin(min(1.0, 1.0 / F)) * F

        lo, hi = profile.support()
        pts = [p for p in (lo, hi) if -1.0 < p < 1.0]
        val, _ = quad(visible, -1.0, 1.0, points=pts or None,
                      epsabs=1e-12, epsrel=1e-12, limit=200)
        return val
    raise ContractError("no closed-form non-trapped volume for perturbed products")


# ---------------------------------------------------------------------------
# trapped-set measure
# ---------------------------------------------------------------------------

@dataclass
class TrappedEstimate:
    budget: float
    fraction: float
    stderr: float
    n_samples: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "budget": self.budget,
            "fraction": self.fraction,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def trapped_ladder(spec: ManifoldSpec, budgets, n_samples: int,
                   seed: int = 0) -> list[TrappedEstimate]:
    """Trapped fraction at each budget, on one shared sample set.

    Sharing the samples makes the fractions exactly non-increasing in the
    budget for a fixed seed: the events {TT > T} are nested.
    """
    budgets = sorted(float(b) for b in budgets)
    rng = np.random.default_rng(seed)
    tt, _ = _tt_samples(spec, rng, n_samples, max(budgets))
    out = []
    for budget in budgets:
        hits = tt > budget
        p = float(np.mean(hits))
        se = math.sqrt(p * (1.0 - p) / n_samples)
        out.append(TrappedEstimate(budget, p, se, n_samples, seed))
    return out


def trapped_fraction(spec: ManifoldSpec, budget: float, n_samples: int,
                     seed: int = 0) -> TrappedEstimate:
    """Fraction of inward boundary samples still inside after the budget."""
    return trapped_ladder(spec, [budget], n_samples, seed)[0]


def flat_trapped_tail_exact(spec: FlatProduct, budget: float) -> float:
    """Exact solid-angle measure of {TT > budget} on flat D^2 x S^1.

    TT = 2 r nu / |v_h|^2; integrating the indicator over the inward
    hemisphere in the (horizontal speed, horizontal direction) slicing gives
    a one dimensional quadrature over the direction angle.  Decays like
    (r/budget)^2.
    """
    if not isinstance(spec, FlatProduct) or spec.n != 2:
        raise ContractError("exact tail oracle implemented for flat D^2 x S^1")
    T = budget
    r = spec.disc_radius
    if T <= 2.0 * r:
        raise ContractError("oracle requires budget > disc diameter")

    def g(beta):
        a = 2.0 * r * math.cos(beta) / T
        return 1.0 - math.sqrt(max(0.0, 1.0 - a * a))

    val, _ = quad(g, -0.5 * math.pi, 0.5 * math.pi, epsabs=1e-14, epsrel=1e-13)
    return val / math.pi


def trapped_direction_scan(spec: FlatProduct, point, n_directions: int,
                           budget: float) -> list[int]:
    """Indices of scan directions not exited by the budget, at an interior point.

    Directions sweep the polar angle from the fiber axis in a single vertical
    plane; on the flat product only a shrinking cone around the vertical
    fails to exit, a finite-budget probe of the single trapped direction
    pair per interior point.
    """
    pos = np.asarray(point, dtype=float)
    stuck = []
    for i in range(n_directions):
        ang = (i + 0.5) / n_directions * math.pi
        vel = np.zeros(spec.dim)
        vel[0] = math.sin(ang)
        vel[-1] = math.cos(ang)
        verdict, _ = integrate_until_exit(spec, (pos, vel), budget=budget)
        if verdict.status != "exited":
            stuck.append(i)
    return stuck


# ---------------------------------------------------------------------------
# Busemann approximants on the cover model
# ---------------------------------------------------------------------------

def _check_defining_vector(spec: ManifoldSpec, base, direction) -> np.ndarray:
    from .geodesic import metric_norm_cover

    v = np.asarray(direction, dtype=float)
    nrm = metric_norm_cover(spec, np.asarray(base, dtype=float), v)
    if abs(nrm - 1.0) > 1e-9:
        raise ContractError(
            "defining direction must be unit in the cover metric at its base "
            f"(|V|_g = {nrm!r}); note the base may sit inside the curved core"
        )
    if isinstance(spec, SurfaceOfRevolution):
        horizontal = abs(v[0])
    else:
        horizontal = float(np.linalg.norm(v[:-1]))
    if horizontal <= 1e-9:
        raise ContractError(
            "defining direction is vertical; its ray does not escape and the "
            "Busemann limit is undefined"
        )
    return v


def busemann_value(spec: ManifoldSpec, base, direction, p, t: float,
                   rtol: float = 1e-12) -> float:
    """f_t(p) = d_cover(p, gamma_V(t)) - t for the ray V = (base, direction)."""
    base = np.asarray(base, dtype=float)
    v = _check_defining_vector(spec, base, direction)
    tip = cover_flow(spec, base, v, t, rtol=rtol)
    return cover_distance(spec, np.asarray(p, dtype=float), tip, rtol=rtol) - t


def busemann_gradient_norm(spec: ManifoldSpec, base, direction, p, t: float,
                           h: float = 1e-3) -> float:
    """Central-difference norm of grad f_t at p (metric inner product).

    For rays with non-vertical exterior line the limit function has unit
    gradient; the finite-t, finite-h probe should return 1 up to
    O(h^2) + O(1/t).
    """
    base = np.asarray(base, dtype=float)
    v = _check_defining_vector(spec, base, direction)
    p = np.asarray(p, dtype=float)
    tip = cover_flow(spec, base, v, t)
    d = len(p)
    grad = np.empty(d)
    for i in range(d):
        dp = np.zeros(d)
        dp[i] = h
        fp = cover_distance(spec, p + dp, tip)
        fm = cover_distance(spec, p - dp, tip)
        grad[i] = (fp - fm) / (2.0 * h)
    if isinstance(spec, FlatProduct):
        ginv = np.eye(d)
    else:
        # cover metric coincides with the chart metric formula everywhere
        ginv = np.linalg.inv(_cover_metric(spec, p))
    return float(math.sqrt(grad @ ginv @ grad))


def _cover_metric(spec: ManifoldSpec, pos) -> np.ndarray:
    # same formulas as metric_at, valid on the extended chart
    if isinstance(spec, SurfaceOfRevolution):
        F = spec.profile.value(float(pos[0]))
        return np.diag([1.0, F * F])
    if isinstance(spec, PerturbedProduct):
        from .manifold import _perturbed_metric

        return _perturbed_metric(spec, np.asarray(pos, dtype=float))
    return np.eye(spec.dim)
