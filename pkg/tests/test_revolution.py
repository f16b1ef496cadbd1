import math

import numpy as np
import pytest
from scipy.integrate import quad

from lenslab.errors import ContractError, NearGrazingError
from lenslab.geodesic import integrate_until_exit
from lenslab.manifold import BumpProfile, boundary_type
from lenslab.revolution import (
    SIN_CAP,
    clairaut_exit,
    clairaut_integrals,
    curvature_profile,
    family_invariance_scan,
    nonisometry_witness,
    travel_time_batch,
)


def brute_clairaut(profile, c):
    """Independent oracle: quadrature over the full axis, no flat-part split."""
    F = profile.value
    da, _ = quad(lambda t: c / (F(t) * math.sqrt(F(t) ** 2 - c * c)), -1, 1,
                 points=list(profile.support()), epsabs=1e-12, epsrel=1e-12,
                 limit=300)
    tt, _ = quad(lambda t: F(t) / math.sqrt(F(t) ** 2 - c * c), -1, 1,
                 points=list(profile.support()), epsabs=1e-12, epsrel=1e-12,
                 limit=300)
    return da, tt


def test_flat_cylinder_closed_forms():
    p = BumpProfile(amplitude=0.0)
    da, tt, ea = clairaut_exit(p, math.pi / 4)
    assert da == pytest.approx(2.0, abs=1e-12)
    assert tt == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert ea == math.pi / 4


def test_meridian_travel_time_is_two_for_any_profile():
    for prof in (BumpProfile(0.0), BumpProfile(0.05, 0.2, 0.0),
                 BumpProfile(0.05, 0.2, 0.5)):
        da, tt, _ = clairaut_exit(prof, 0.0)
        assert da == 0.0
        assert tt == pytest.approx(2.0, abs=1e-12)


def test_quadrature_matches_full_axis_oracle():
    prof = BumpProfile(0.05, 0.2, 0.25)
    for phi in (0.3, math.pi / 4, 1.2):
        c = math.sin(phi)
        da, tt, _ = clairaut_exit(prof, phi)
        da_o, tt_o = brute_clairaut(prof, c)
        assert da == pytest.approx(da_o, abs=1e-9)
        assert tt == pytest.approx(tt_o, abs=1e-9)


def test_quadrature_matches_ode(bump0):
    bt = boundary_type(bump0)
    for phi in (math.pi / 6, math.pi / 4, math.pi / 3):
        da, tt, ea = clairaut_exit(bump0.profile, phi)
        b = bt.from_angle(-1, 0.0, phi)
        v, _ = integrate_until_exit(bump0, b)
        assert v.status == "exited"
        assert v.travel_time == pytest.approx(tt, abs=1e-6)
        assert v.exit.point.coords[0] == 1.0
        assert v.exit.point.coords[1] == pytest.approx(da % (2 * math.pi), abs=1e-6)
        # exit angle equals entry angle
        assert math.asin(max(-1, min(1, v.exit.comps[1]))) == pytest.approx(phi, abs=1e-9)


def test_near_grazing_refusal():
    prof = BumpProfile(0.05, 0.2, 0.0)
    with pytest.raises(NearGrazingError):
        clairaut_exit(prof, math.asin(SIN_CAP) + 1e-4)


def test_clairaut_conservation_along_traces(bump0):
    prof = bump0.profile
    bt = boundary_type(bump0)
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(60):
        phi = rng.uniform(-1.25, 1.25)
        end = -1 if rng.random() < 0.5 else 1
        b = bt.from_angle(end, rng.uniform(0, 2 * math.pi), phi)
        v, traj = integrate_until_exit(bump0, b, record=True)
        c0 = math.sin(phi)
        for y in traj.states:
            c = prof.value(y[0]) ** 2 * y[3]
            worst = max(worst, abs(c - c0))
    assert worst < 1e-8


def test_family_invariance_scan_quadrature():
    scan = family_invariance_scan(0.05, 0.2, [-0.5, 0.0, 0.25, 0.5],
                                  np.linspace(0.1, 1.2, 12))
    assert scan.max_deviation < 1e-9
    assert len(scan.rows) == 4 * 12


def test_family_scan_single_shift_is_exact_zero():
    scan = family_invariance_scan(0.05, 0.2, [0.0], [0.4, 0.8])
    assert scan.max_deviation == 0.0


def test_family_scan_rejects_inadmissible_shift():
    with pytest.raises(ContractError):
        family_invariance_scan(0.05, 0.2, [0.7], [0.4])


def test_travel_time_batch_accuracy():
    prof = BumpProfile(0.05, 0.2, 0.0)
    cs = np.array([0.0, 0.3, 0.7, 0.95, 0.999, 0.99999])
    tts = travel_time_batch(prof, cs)
    for c, tt in zip(cs, tts):
        _, tt_ref = clairaut_integrals(prof, float(c))
        assert tt == pytest.approx(tt_ref, rel=1e-8)


def test_curvature_witness_separates_shifts():
    p0 = BumpProfile(0.05, 0.2, 0.0)
    p25 = BumpProfile(0.05, 0.2, 0.25)
    p50 = BumpProfile(0.05, 0.2, 0.5)
    m50 = BumpProfile(0.05, 0.2, -0.5)
    assert nonisometry_witness(p0, p25) > 1e-3
    assert nonisometry_witness(p25, p50) > 1e-3
    # mirror shifts really are isometric via the t-flip, witness vanishes
    assert nonisometry_witness(p50, m50) < 1e-12
    # curvature integrates to zero total turning change on a closed profile
    ts = np.linspace(-1, 1, 4001)
    k = curvature_profile(p0, ts)
    assert k.max() > 0.0 and k.min() < 0.0
