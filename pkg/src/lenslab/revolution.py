"""Clairaut-relation oracle for surfaces of revolution.

On a surface with metric dt^2 + F(t)^2 dalpha^2 the quantity
c = F(t) sin(phi) = F(t)^2 dalpha/dtau is conserved along unit-speed
geodesics (phi the angle from the meridian).  With F >= 1 on [-1, 1] and
F = 1 at the ends, a boundary-entering geodesic with |c| < 1 has
dt/dtau = +-sqrt(1 - c^2/F^2) bounded away from zero, so it crosses to the
other end with

    delta_alpha = integral  c / (F sqrt(F^2 - c^2)) dt,
    travel_time = integral  F / sqrt(F^2 - c^2) dt,

and exits at the same angle phi.  Both integrands are constant
1/sqrt(1 - c^2) (times c) wherever F = 1, so the integrals are evaluated as
an exact flat part plus an adaptive Gauss-Kronrod quadrature over the bump
support in the shifted variable u = shift + t.  That substitution makes the
values manifestly independent of the shift, which is exactly the lens-data
invariance of the family; the scan below guards the implementation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import ContractError, NearGrazingError
from .manifold import (
    BoundaryVector,
    BumpProfile,
    SurfaceOfRevolution,
    boundary_type,
)

#: refuse the quadrature route beyond this |sin phi|; travel times blow up
#: toward tangency and the samples are reported as near-grazing instead
SIN_CAP = 0.999

_QUAD_TOL = 1e-12


def clairaut_constant(profile: BumpProfile, t: float, alpha_rate: float) -> float:
    """c = F(t)^2 * dalpha/dtau for a chart state."""
    F = profile.value(t)
    return F * F * alpha_rate


def _bump_integrals(profile: BumpProfile, c: float) -> tuple[float, float]:
    """Quadrature of the two integrands over the bump support (u variable).

    Near |c| = 1 the integrands develop boundary layers at the support edges
    where the profile flattens to 1; the tolerance is relaxed there (the
    values are huge, only the relative error matters) and the quadrature
    error estimate is still checked.
    """
    if profile.amplitude == 0.0:
        return 0.0, 0.0
    eps = profile.epsilon
    c2 = c * c
    hard = abs(c) > SIN_CAP
    tol = 1e-9 if hard else _QUAD_TOL

    def f_alpha(u):
        F = 1.0 + profile.h(u)
        return c / (F * math.sqrt(F * F - c2))

    def f_time(u):
        F = 1.0 + profile.h(u)
        return F / math.sqrt(F * F - c2)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        ia, ea = quad(f_alpha, -eps, eps, epsabs=tol, epsrel=tol, limit=500)
        it, et = quad(f_time, -eps, eps, epsabs=tol, epsrel=tol, limit=500)
    if max(ea, et) > 1e-6 * max(1.0, abs(it)):
        raise ContractError(
            f"quadrature error estimate {max(ea, et)!r} too large at c = {c!r}"
        )
    return ia, it


def clairaut_integrals(profile: BumpProfile, c: float) -> tuple[float, float]:
    """(delta_alpha, travel_time) for Clairaut constant c, |c| < 1.

    Internal route without the near-grazing cap; used by the volume and
    trapped-set estimators, which censor huge travel times at their budget.
    """
    if abs(c) >= 1.0:
        raise ContractError("|c| must be < 1 for a boundary-crossing geodesic")
    flat_len = 2.0 - (2.0 * profile.epsilon if profile.amplitude > 0.0 else 0.0)
    root = math.sqrt(1.0 - c * c)
    ia, it = _bump_integrals(profile, c)
    if profile.amplitude == 0.0:
        return 2.0 * c / root, 2.0 / root
    return c * flat_len / root + ia, flat_len / root + it


def clairaut_exit(profile: BumpProfile, phi: float, end: int = -1):
    """Scatter a boundary entry at angle phi from the meridian by quadrature.

    Parameters
    ----------
    profile : BumpProfile
        Generating function of the surface (F >= 1, F(+-1) = 1).
    phi : float
        Entry angle from the inward meridian direction, |sin phi| <= SIN_CAP.
    end : int
        Entry end, -1 or +1.

    Returns
    -------
    (delta_alpha, travel_time, exit_angle), with exit_angle = phi because the
    profile takes the same value at both ends.
    """
    if end not in (-1, 1):
        raise ContractError("end must be -1 or +1")
    s = math.sin(phi)
    if abs(s) > SIN_CAP:
        raise NearGrazingError(
            f"|sin phi| = {abs(s):.6f} beyond the quadrature cap {SIN_CAP}; "
            "travel time near tangency exceeds any reasonable budget"
        )
    da, tt = clairaut_integrals(profile, s)
    return da, tt, phi


def clairaut_record(spec: SurfaceOfRevolution, bvec: BoundaryVector):
    """LensRecord-shaped quadrature scattering for a revolution surface.

    Returns (status, exit BoundaryVector or None, travel_time).  Grazing
    entries scatter to themselves with travel time 0.
    """
    bt = boundary_type(spec)
    nu = bt.nu(bvec)
    if nu < -1e-9:
        raise ContractError("entry vector points outward")
    if nu <= 1e-9:
        return "grazing", bvec, 0.0
    end = int(bvec.point.coords[0])
    alpha = bvec.point.coords[1]
    v_t, v_alpha = bvec.comps
    c = v_alpha  # F = 1 at the ends
    if abs(c) > SIN_CAP:
        raise NearGrazingError(f"|sin phi| = {abs(c):.6f} beyond the quadrature cap")
    da, tt = clairaut_integrals(spec.profile, c)
    exit_pt = bt.point(-end, alpha + da)
    exit_vec = bt.vector(exit_pt, (v_t, v_alpha), normalize=True)
    return "exited", exit_vec, tt


# ---------------------------------------------------------------------------
# vectorized travel times for Monte Carlo estimators
# ---------------------------------------------------------------------------

_GAUSS_NODES = 96


def travel_time_batch(profile: BumpProfile, c: np.ndarray,
                      n_nodes: int = _GAUSS_NODES,
                      exact_above: float = 1e6) -> np.ndarray:
    """Travel times for an array of Clairaut constants, |c| < 1.

    Fixed-order Gauss-Legendre over the bump support plus the exact flat
    part, accurate to better than 1e-8 relative for |c| <= SIN_CAP.  Samples
    beyond the cap develop boundary layers at the support edges and fall
    back to the adaptive quadrature.  When even the exact flat part exceeds
    ``exact_above`` (typically the caller's censoring budget) that lower
    bound is returned as-is: the sample will be censored whatever the exact
    value, and essentially tangent draws would defeat any quadrature.
    """
    c = np.asarray(c, dtype=float)
    root = np.sqrt(1.0 - c * c)
    if profile.amplitude == 0.0:
        return 2.0 / root
    eps = profile.epsilon
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    u = eps * nodes
    F = 1.0 + np.array([profile.h(ui) for ui in u])
    # integrand F / sqrt(F^2 - c^2) over the support, broadcast samples x nodes
    denom = np.sqrt(F[None, :] ** 2 - (c * c)[:, None])
    bump = (eps * weights[None, :] * F[None, :] / denom).sum(axis=1)
    flat_part = (2.0 - 2.0 * eps) / root
    out = flat_part + bump
    hard = (np.abs(c) > SIN_CAP) & (flat_part <= exact_above)
    for i in np.nonzero(hard)[0]:
        _, out[i] = clairaut_integrals(profile, float(c[i]))
    beyond = (np.abs(c) > SIN_CAP) & (flat_part > exact_above)
    out[beyond] = flat_part[beyond]
    return out


# ---------------------------------------------------------------------------
# family invariance scan and the non-isometry witness
# ---------------------------------------------------------------------------

@dataclass
class FamilyScan:
    """Scattering data of the bump family across shifts, plus deviations."""

    shifts: list[float]
    angles: list[float]
    rows: list[tuple[float, float, float, float, float]]  # (s, phi, dalpha, tt, exit)
    per_angle_deviation: list[float]
    max_deviation: float

    def to_json_dict(self) -> dict:
        return {
            "shifts": self.shifts,
            "n_angles": len(self.angles),
            "max_deviation": self.max_deviation,
            "per_angle_deviation": self.per_angle_deviation,
        }

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("shift,phi,delta_alpha,travel_time,exit_angle\n")
            for row in self.rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def family_invariance_scan(
    amplitude: float,
    epsilon: float,
    shifts,
    angles,
    scatter=None,
) -> FamilyScan:
    """Max deviation of (delta_alpha, travel_time, exit_angle) across shifts.

    ``scatter(profile, phi) -> (dalpha, tt, exit_angle)`` defaults to the
    quadrature route; the ODE route can be passed in to cross-validate.
    """
    shifts = [float(s) for s in shifts]
    angles = [float(a) for a in angles]
    for s in shifts:
        if amplitude > 0.0 and not BumpProfile.shift_admissible(s, epsilon):
            raise ContractError(
                f"shift {s} outside the admissible range "
                f"(-1 + 2*epsilon, 1 - 2*epsilon) for epsilon = {epsilon}"
            )
    if scatter is None:
        scatter = lambda profile, phi: clairaut_exit(profile, phi)

    rows = []
    per_angle = []
    for phi in angles:
        vals = []
        for s in shifts:
            profile = BumpProfile(amplitude, epsilon, s)
            da, tt, ea = scatter(profile, phi)
            rows.append((s, phi, da, tt, ea))
            vals.append((da, tt, ea))
        dev = max(
            max(v[j] for v in vals) - min(v[j] for v in vals)
            for j in range(3)
        )
        per_angle.append(dev)
    return FamilyScan(shifts, angles, rows, per_angle, max(per_angle) if per_angle else 0.0)


def curvature_profile(profile: BumpProfile, ts) -> np.ndarray:
    """Gauss curvature -F''/F sampled along the axis."""
    ts = np.asarray(ts, dtype=float)
    return np.array([-profile.second(t) / profile.value(t) for t in ts])


def nonisometry_witness(p1: BumpProfile, p2: BumpProfile, n_grid: int = 2001) -> float:
    """L2 distance between curvature profiles, minimized over the t-flip.

    Shifted profiles have identical curvature *histograms*; what tells the
    surfaces apart, up to the mirror symmetry t -> -t that really is an
    isometry for an even bump, is the curvature as a function of position.
    A positive witness certifies the two surfaces are not isometric via an
    orientation-respecting correspondence of their charts.
    """
    ts = np.linspace(-1.0, 1.0, n_grid)
    k1 = curvature_profile(p1, ts)
    k2 = curvature_profile(p2, ts)
    dt = ts[1] - ts[0]
    direct = math.sqrt(float(np.sum((k1 - k2) ** 2)) * dt)
    flipped = math.sqrt(float(np.sum((k1 - k2[::-1]) ** 2)) * dt)
    return min(direct, flipped)
