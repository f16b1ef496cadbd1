import json
import math

import numpy as np
import pytest

from lenslab.errors import IdentificationError, NotDifferentiableError
from lenslab.manifold import (
    BumpProfile,
    FlatProduct,
    PerturbedProduct,
    SurfaceOfRevolution,
    boundary_type,
)
from lenslab.scattering import (
    GridSampling,
    MonteCarloSampling,
    compare,
    first_variation_residual,
    flat_oracle_scatter,
    lens_table,
    quadrature_scatter,
    read_lens_csv,
    record_to_json_dict,
    scattering_map,
    write_lens_csv,
)

SQ2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# flat oracle
# ---------------------------------------------------------------------------

def test_oracle_diameter(flat2):
    bt = boundary_type(flat2)
    b = bt.vector(bt.point((1.0, 0.0), 0.0), (-1.0, 0.0, 0.0))
    rec = flat_oracle_scatter(flat2, b)
    assert rec.status == "exited"
    assert rec.travel_time == pytest.approx(2.0, abs=1e-15)
    assert np.allclose(rec.exit.point.coords, (-1.0, 0.0, 0.0))
    assert np.allclose(rec.exit.comps, b.comps)


def test_oracle_slant(flat2):
    bt = boundary_type(flat2)
    b = bt.vector(bt.point((1.0, 0.0), 0.0), (-SQ2 / 2, 0.0, SQ2 / 2))
    rec = flat_oracle_scatter(flat2, b)
    assert rec.travel_time == pytest.approx(2 * SQ2, abs=1e-14)
    assert rec.exit.point.coords[2] == pytest.approx(2.0, abs=1e-14)


def test_oracle_grazing(flat2):
    bt = boundary_type(flat2)
    # horizontal part tangent to the sphere, vertical part arbitrary
    b = bt.vector(bt.point((1.0, 0.0), 0.0), (0.0, 0.8, 0.6))
    rec = flat_oracle_scatter(flat2, b)
    assert rec.status == "grazing"
    assert rec.travel_time == 0.0
    assert rec.exit is b


def test_oracle_vs_ode_examples(flat2):
    bt = boundary_type(flat2)
    rng = np.random.default_rng(101)
    for _ in range(50):
        b = bt.sample(rng)
        oracle = flat_oracle_scatter(flat2, b)
        ode = scattering_map(flat2, b)
        assert oracle.status == ode.status
        if oracle.status != "exited":
            continue
        assert abs(oracle.travel_time - ode.travel_time) < 1e-8
        assert bt.point_distance(oracle.exit.point, ode.exit.point) < 1e-8
        assert bt.vector_angle(oracle.exit, ode.exit) < 1e-8


def test_scatter_maps_into_outward_vectors(flat2, bump0):
    rng = np.random.default_rng(103)
    for spec in (flat2, bump0):
        bt = boundary_type(spec)
        for _ in range(30):
            b = bt.sample(rng)
            rec = scattering_map(spec, b, budget=100.0)
            if rec.status == "exited":
                assert bt.nu(rec.exit) <= 1e-9


def test_flat_cylinder_scatter(flat_cyl):
    bt = boundary_type(flat_cyl)
    b = bt.from_angle(-1, 0.0, math.pi / 4)
    rec = scattering_map(flat_cyl, b)
    assert rec.travel_time == pytest.approx(2 * SQ2, abs=1e-8)
    assert rec.exit.point.coords[1] == pytest.approx(2.0, abs=1e-8)


# ---------------------------------------------------------------------------
# sampling and tables
# ---------------------------------------------------------------------------

def test_grid_shape_and_no_tangentials(flat2):
    tab = lens_table(flat2, GridSampling((10, 10, 10)), route="oracle")
    assert len(tab.records) == 1000
    statuses = {r.status for r in tab.records}
    assert statuses == {"exited"}


def test_grid_includes_explicit_tangentials(flat2):
    bt = boundary_type(flat2)
    b = bt.vector(bt.point((1.0, 0.0), 0.0), (0.0, 1.0, 0.0))
    rec = flat_oracle_scatter(flat2, b)
    assert rec.status == "grazing" and rec.travel_time == 0.0


def test_mc_sampling_deterministic(flat2):
    t1 = lens_table(flat2, MonteCarloSampling(50, seed=9), route="oracle")
    t2 = lens_table(flat2, MonteCarloSampling(50, seed=9), route="oracle")
    for a, b in zip(t1.records, t2.records):
        assert a.entry.point.coords == b.entry.point.coords
        assert a.travel_time == b.travel_time


def test_workers_do_not_change_records(flat2):
    t1 = lens_table(flat2, GridSampling((6, 6, 4)), route="ode", workers=1)
    t2 = lens_table(flat2, GridSampling((6, 6, 4)), route="ode", workers=2)
    for a, b in zip(t1.records, t2.records):
        assert a.entry.point.coords == b.entry.point.coords
        assert a.travel_time == b.travel_time
        assert (a.exit.point.coords if a.exit else None) == \
               (b.exit.point.coords if b.exit else None)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def test_compare_table_with_itself(flat2):
    tab = lens_table(flat2, GridSampling((6, 6, 4)), route="oracle")
    rep = compare(tab, tab)
    assert rep.max_deviation == 0.0
    assert rep.n_status_disagreements == 0


def test_compare_family_members_quadrature():
    samp = GridSampling((1, 5, 20))
    base = lens_table(SurfaceOfRevolution(BumpProfile(0.05, 0.2, 0.0)), samp,
                      route="quadrature")
    for s in (-0.5, 0.25, 0.5):
        other = lens_table(SurfaceOfRevolution(BumpProfile(0.05, 0.2, s)), samp,
                           route="quadrature")
        rep = compare(base, other)
        assert rep.max_deviation < 1e-9
        assert rep.n_status_disagreements == 0


def test_compare_bump_statuses_match_flat_cylinder(flat_cyl, bump0):
    # statuses (not the data) agree even against the profile-free cylinder
    samp = GridSampling((1, 4, 12))
    ta = lens_table(flat_cyl, samp, route="ode", budget=200.0)
    tb = lens_table(bump0, samp, route="ode", budget=200.0)
    assert [r.status for r in ta.records] == [r.status for r in tb.records]


def test_compare_detects_perturbation(flat2):
    pert = PerturbedProduct(FlatProduct(2), 0.3, 0.3, (0.0, 0.0), mode="disc")
    samp = GridSampling((6, 4, 6))
    rep = compare(lens_table(flat2, samp, route="ode"),
                  lens_table(pert, samp, route="ode"))
    assert rep.max_deviation > 1e-4


def test_compare_rejects_mismatched_sampling(flat2):
    ta = lens_table(flat2, GridSampling((4, 4, 4)), route="oracle")
    tb = lens_table(flat2, GridSampling((4, 4, 2)), route="oracle")
    with pytest.raises(IdentificationError):
        compare(ta, tb)


def test_compare_rejects_mismatched_boundary(flat2, bump0):
    ta = lens_table(flat2, GridSampling((4, 4, 4)), route="oracle")
    tb = lens_table(bump0, GridSampling((1, 4, 4)), route="quadrature")
    with pytest.raises(IdentificationError):
        compare(ta, tb)


def test_censored_pairs_reported_separately(flat2):
    # tiny budget forces trapped verdicts on both sides
    samp = GridSampling((4, 2, 8))
    ta = lens_table(flat2, samp, route="ode", budget=0.05)
    tb = lens_table(flat2, samp, route="ode", budget=0.05)
    rep = compare(ta, tb)
    assert rep.n_censored_agreements > 0
    assert rep.n_censored_agreements + rep.n_compared == rep.n_records


# ---------------------------------------------------------------------------
# time reversal on lens records
# ---------------------------------------------------------------------------

def test_time_reversal_of_scattering(flat2, bump0):
    rng = np.random.default_rng(107)
    for spec in (flat2, bump0):
        bt = boundary_type(spec)
        done = 0
        while done < 20:
            b = bt.sample(rng)
            rec = scattering_map(spec, b, budget=60.0)
            if rec.status != "exited":
                continue
            back = scattering_map(spec, rec.exit.reversed(), budget=80.0)
            assert back.status == "exited"
            assert abs(back.travel_time - rec.travel_time) < 1e-6
            assert bt.point_distance(back.exit.point, b.point) < 1e-6
            assert bt.vector_angle(back.exit, b.reversed()) < 1e-6
            done += 1


def test_length_difference_constant_across_family(bump0):
    # the first-variation mechanism: along a path of entries, the difference
    # of travel times between two lens-equivalent members is constant (and
    # equal to zero here); constancy is the claim, not just smallness
    other = SurfaceOfRevolution(BumpProfile(0.05, 0.2, 0.5))
    bta = boundary_type(bump0)
    diffs = []
    for k in range(15):
        phi = 0.1 + k * 0.07
        b = bta.from_angle(-1, 0.3, phi)
        ra = scattering_map(bump0, b)
        rb = scattering_map(other, b)
        diffs.append(ra.travel_time - rb.travel_time)
    assert max(diffs) - min(diffs) < 1e-5
    assert max(abs(d) for d in diffs) < 1e-5


def test_rotational_equivariance_revolution(bump0):
    # shifting the boundary circle angle rotates the exit identically
    bt = boundary_type(bump0)
    shift = 1.1
    for phi in (0.3, 0.8, -0.6):
        a = scattering_map(bump0, bt.from_angle(-1, 0.4, phi))
        b = scattering_map(bump0, bt.from_angle(-1, 0.4 + shift, phi))
        d = (b.exit.point.coords[1] - a.exit.point.coords[1]) % (2 * math.pi)
        assert d == pytest.approx(shift, abs=1e-9)
        assert b.exit.comps == pytest.approx(a.exit.comps, abs=1e-9)


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------

def _flat_angle_curve(flat2):
    bt = boundary_type(flat2)

    def curve(s):
        # rotate the horizontal component of the entry direction
        psi = 0.5 + 0.2 * s
        u = (1.0, 0.0)
        comps = (-math.cos(psi), 0.3 * math.sin(psi), 0.0)
        c = np.asarray(comps)
        c = c / np.linalg.norm(c)
        return bt.vector(bt.point(u, 0.0), tuple(c), normalize=False)

    return curve


def test_first_variation_flat(flat2):
    curve = _flat_angle_curve(flat2)
    res = first_variation_residual(
        flat2, curve, 0.3, scatter=lambda b: flat_oracle_scatter(flat2, b))
    assert res < 1e-6


def test_first_variation_constant_curve(flat2):
    bt = boundary_type(flat2)
    b = bt.vector(bt.point((1.0, 0.0), 0.0), (-0.8, 0.1, 0.59), normalize=True)
    res = first_variation_residual(
        flat2, lambda s: b, 0.0, scatter=lambda v: flat_oracle_scatter(flat2, v))
    assert res < 1e-10


def test_first_variation_bump_quadrature(bump0):
    bt = boundary_type(bump0)

    def curve(s):
        return bt.from_angle(-1, 0.2, 0.6 + 0.1 * s)

    res = first_variation_residual(
        bump0, curve, 0.0, scatter=lambda b: quadrature_scatter(bump0, b))
    assert res < 1e-5


def test_first_variation_detects_status_change(flat2):
    bt = boundary_type(flat2)

    def curve(s):
        # tangential at s = 0, undefined stencil
        return bt.vector(bt.point((1.0, 0.0), 0.0), (0.0, 1.0, 0.0))

    with pytest.raises(NotDifferentiableError):
        first_variation_residual(
            flat2, curve, 0.0, scatter=lambda b: flat_oracle_scatter(flat2, b))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_lens_csv_roundtrip(tmp_path, flat2):
    tab = lens_table(flat2, GridSampling((4, 3, 5)), route="oracle")
    path = tmp_path / "table.csv"
    write_lens_csv(tab, path)
    back = read_lens_csv(path)
    assert back.boundary == tab.boundary
    assert back.sampling == tab.sampling
    assert back.fingerprint == tab.fingerprint
    for a, b in zip(tab.records, back.records):
        assert a.status == b.status
        assert a.travel_time == b.travel_time
        assert a.entry.point.coords == b.entry.point.coords
        assert a.entry.comps == b.entry.comps


def test_lens_csv_roundtrip_revolution(tmp_path, bump0):
    tab = lens_table(bump0, GridSampling((2, 3, 6)), route="quadrature")
    path = tmp_path / "rev.csv"
    write_lens_csv(tab, path)
    back = read_lens_csv(path)
    assert back.boundary == tab.boundary
    rep = compare(tab, back)
    assert rep.max_deviation == 0.0


def test_record_json(flat2):
    bt = boundary_type(flat2)
    b = bt.vector(bt.point((1.0, 0.0), 0.0), (-1.0, 0.0, 0.0))
    rec = flat_oracle_scatter(flat2, b)
    blob = json.dumps(record_to_json_dict(rec), sort_keys=True)
    parsed = json.loads(blob)
    assert parsed["status"] == "exited"
    assert parsed["travel_time"] == pytest.approx(2.0)
