"""Acceptance gate: every numbered check with its pinned tolerance.

Each criterion returns a CriterionResult with deterministic metrics; wall
times are measured for the checks that carry a runtime bound but are never
written into report files, so reports are byte-identical across runs and
worker counts.  ``run_selftest`` executes all criteria in order and the CLI
maps any failure to exit code 2.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .config import PRESETS
from .geodesic import integrate_until_exit
from .integralgeom import (
    busemann_gradient_norm,
    busemann_value,
    flat_trapped_tail_exact,
    santalo_volume,
    trapped_ladder,
)
from .manifold import BumpProfile, SurfaceOfRevolution, boundary_type
from .revolution import family_invariance_scan
from .scattering import (
    GridSampling,
    compare,
    first_variation_residual,
    flat_oracle_scatter,
    lens_table,
    quadrature_scatter,
    scattering_map,
    write_lens_csv,
)


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.detail} ({self.elapsed:.1f}s)"


def _spec(name):
    return PRESETS[name]()


BUMP_SHIFTS = (-0.5, 0.25, 0.5)
BUMP_AMP = 0.05
BUMP_EPS = 0.2


# ---------------------------------------------------------------------------
# 1. flat oracle equivalence
# ---------------------------------------------------------------------------

def criterion_flat_oracle(fast: bool = False) -> CriterionResult:
    n = 1000 if fast else 10_000
    t0 = time.perf_counter()
    worst = {"pos": 0.0, "dir": 0.0, "tt": 0.0}
    for si, name in enumerate(("flat-d2s1", "flat-d3s1")):
        spec = _spec(name)
        bt = boundary_type(spec)
        rng = np.random.default_rng(1000 + si)
        for _ in range(n):
            b = bt.sample(rng)
            oracle = flat_oracle_scatter(spec, b)
            ode = scattering_map(spec, b)
            if oracle.status != ode.status:
                worst["pos"] = math.inf
                continue
            if oracle.status != "exited":
                continue
            worst["pos"] = max(worst["pos"],
                               bt.point_distance(oracle.exit.point, ode.exit.point))
            worst["dir"] = max(worst["dir"], bt.vector_angle(oracle.exit, ode.exit))
            worst["tt"] = max(worst["tt"],
                              abs(oracle.travel_time - ode.travel_time))
    elapsed = time.perf_counter() - t0
    ok = all(v < 1e-8 for v in worst.values()) and elapsed <= 60.0
    detail = (f"{2 * n} traces on flat-d2s1+flat-d3s1, max dev "
              f"pos {worst['pos']:.2e} dir {worst['dir']:.2e} tt {worst['tt']:.2e} "
              f"(tol 1e-8, runtime cap 60s)")
    return CriterionResult("flat oracle equivalence", ok, detail,
                           {"n_per_spec": n, **{k: v for k, v in worst.items()}},
                           elapsed)


# ---------------------------------------------------------------------------
# 2. bump-family scattering invariance
# ---------------------------------------------------------------------------

def _ode_family_tuple(profile, phi):
    spec = SurfaceOfRevolution(profile)
    bt = boundary_type(spec)
    rec = scattering_map(spec, bt.from_angle(-1, 0.0, phi))
    if rec.status != "exited":
        raise AssertionError(f"family trace did not exit at phi={phi}")
    dalpha = rec.exit.point.coords[1]
    exit_angle = math.asin(max(-1.0, min(1.0, rec.exit.comps[1])))
    return dalpha, rec.travel_time, exit_angle


def criterion_family_invariance(fast: bool = False) -> CriterionResult:
    n_angles = 8 if fast else 30
    angles = [(i + 0.5) / n_angles * 1.25 for i in range(n_angles)]
    shifts = (0.0,) + BUMP_SHIFTS
    t0 = time.perf_counter()
    quad_scan = family_invariance_scan(BUMP_AMP, BUMP_EPS, shifts, angles)
    ode_scan = family_invariance_scan(BUMP_AMP, BUMP_EPS, shifts, angles,
                                      scatter=_ode_family_tuple)
    elapsed = time.perf_counter() - t0
    ok = quad_scan.max_deviation < 1e-9 and ode_scan.max_deviation < 1e-4 \
        and elapsed <= 30.0
    detail = (f"shifts {list(shifts)} x {n_angles} angles: quadrature max dev "
              f"{quad_scan.max_deviation:.2e} (tol 1e-9), ODE max dev "
              f"{ode_scan.max_deviation:.2e} (tol 1e-4, runtime cap 30s)")
    return CriterionResult("bump-family scattering invariance", ok, detail,
                           {"quad_dev": quad_scan.max_deviation,
                            "ode_dev": ode_scan.max_deviation}, elapsed)


# ---------------------------------------------------------------------------
# 3. Clairaut conservation along ODE traces
# ---------------------------------------------------------------------------

def criterion_clairaut_conservation(fast: bool = False) -> CriterionResult:
    n = 100 if fast else 1000
    spec = _spec("bump-cylinder")
    profile = spec.profile
    bt = boundary_type(spec)
    rng = np.random.default_rng(3000)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n):
        phi = rng.uniform(-1.25, 1.25)
        end = -1 if rng.random() < 0.5 else 1
        b = bt.from_angle(end, rng.uniform(0.0, 2 * math.pi), phi)
        _, traj = integrate_until_exit(spec, b, record=True)
        c0 = math.sin(phi)
        cs = profile_constants(profile, traj.states)
        worst = max(worst, float(np.max(np.abs(cs - c0))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8
    detail = f"{n} traces, max |F^2 dalpha - c| = {worst:.2e} (tol 1e-8)"
    return CriterionResult("Clairaut conservation", ok, detail,
                           {"n": n, "max_drift": worst}, elapsed)


def profile_constants(profile: BumpProfile, states) -> np.ndarray:
    F = np.array([profile.value(float(y[0])) for y in states])
    va = np.asarray(states)[:, 3]
    return F * F * va


# ---------------------------------------------------------------------------
# 4. reversibility
# ---------------------------------------------------------------------------

def criterion_reversibility(fast: bool = False) -> CriterionResult:
    n = 100 if fast else 1000
    names = ("flat-d2s1", "flat-d3s1", "bump-cylinder", "perturbed-d2s1")
    t0 = time.perf_counter()
    worst = 0.0
    for si, name in enumerate(names):
        spec = _spec(name)
        bt = boundary_type(spec)
        rng = np.random.default_rng(4000 + si)
        done = 0
        while done < n:
            b = bt.sample(rng)
            rec = scattering_map(spec, b, budget=60.0)
            if rec.status != "exited":
                continue
            back = scattering_map(spec, rec.exit.reversed(), budget=80.0)
            if back.status != "exited":
                worst = math.inf
                break
            dev = max(bt.point_distance(back.exit.point, b.point),
                      bt.vector_angle(back.exit, b.reversed()),
                      abs(back.travel_time - rec.travel_time))
            worst = max(worst, dev)
            done += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6
    detail = (f"{n} exited samples per spec on {len(names)} specs, "
              f"max |S(-S(V)) - (-V)| = {worst:.2e} (tol 1e-6)")
    return CriterionResult("reversibility", ok, detail,
                           {"n_per_spec": n, "max_dev": worst}, elapsed)


# ---------------------------------------------------------------------------
# 5. first-variation residual
# ---------------------------------------------------------------------------

def criterion_first_variation(fast: bool = False) -> CriterionResult:
    n = 20 if fast else 100
    t0 = time.perf_counter()
    flat = _spec("flat-d2s1")
    bt = boundary_type(flat)
    rng = np.random.default_rng(5000)
    worst_flat = 0.0
    for _ in range(n):
        a0 = rng.uniform(0.0, 2 * math.pi)
        th0 = rng.uniform(0.0, 2 * math.pi)
        psi0 = rng.uniform(0.15, 1.1)
        chi0 = rng.uniform(0.0, 2 * math.pi)
        dpsi, dchi, da = rng.uniform(-0.3, 0.3, size=3)

        def curve(s, a0=a0, th0=th0, psi0=psi0, chi0=chi0,
                  dpsi=dpsi, dchi=dchi, da=da):
            a = a0 + da * s
            u = (math.cos(a), math.sin(a))
            t1 = (-u[1], u[0])
            psi = psi0 + dpsi * s
            chi = chi0 + dchi * s
            tang = np.array([math.cos(chi) * t1[0], math.cos(chi) * t1[1],
                             math.sin(chi)])
            return bt.from_angles(u, th0, psi, tang)

        res = first_variation_residual(
            flat, curve, 0.0, scatter=lambda b: flat_oracle_scatter(flat, b))
        worst_flat = max(worst_flat, res)

    bump = _spec("bump-cylinder")
    rbt = boundary_type(bump)
    rng = np.random.default_rng(5001)
    worst_bump = 0.0
    for _ in range(n):
        phi0 = rng.uniform(-1.0, 1.0)
        alpha0 = rng.uniform(0.0, 2 * math.pi)
        dphi, dalpha = rng.uniform(-0.3, 0.3, size=2)
        end = -1 if rng.random() < 0.5 else 1

        def curve(s, end=end, alpha0=alpha0, phi0=phi0, dphi=dphi, dalpha=dalpha):
            return rbt.from_angle(end, alpha0 + dalpha * s, phi0 + dphi * s)

        res = first_variation_residual(
            bump, curve, 0.0, scatter=lambda b: quadrature_scatter(bump, b))
        worst_bump = max(worst_bump, res)
    elapsed = time.perf_counter() - t0
    worst = max(worst_flat, worst_bump)
    ok = worst < 1e-5
    detail = (f"{n} curves per spec: max residual flat {worst_flat:.2e}, "
              f"bump {worst_bump:.2e} (tol 1e-5)")
    return CriterionResult("first-variation residual", ok, detail,
                           {"flat": worst_flat, "bump": worst_bump}, elapsed)


# ---------------------------------------------------------------------------
# 6. Santalo volume
# ---------------------------------------------------------------------------

def criterion_santalo(fast: bool = False) -> CriterionResult:
    n_flat = 100_000 if fast else 1_000_000
    n_bump = 50_000 if fast else 200_000
    t0 = time.perf_counter()
    flat = _spec("flat-d2s1")
    est = santalo_volume(flat, n_flat, budget=1e4, seed=6000)
    truth = 2 * math.pi ** 2
    rel = abs(est.volume - truth) / truth

    base = santalo_volume(SurfaceOfRevolution(BumpProfile(BUMP_AMP, BUMP_EPS, 0.0)),
                          n_bump, seed=6100)
    family_ok = True
    worst_z = 0.0
    for k, s in enumerate(BUMP_SHIFTS):
        member = santalo_volume(
            SurfaceOfRevolution(BumpProfile(BUMP_AMP, BUMP_EPS, s)),
            n_bump, seed=6101 + k)
        combined = math.hypot(base.stderr, member.stderr)
        z = abs(member.volume - base.volume) / combined
        worst_z = max(worst_z, z)
        family_ok = family_ok and z < 3.0
    elapsed = time.perf_counter() - t0
    ok = rel < 0.01 and family_ok and elapsed <= 600.0
    detail = (f"flat-d2s1 N={n_flat}: {est.volume:.4f} vs 2*pi^2 = {truth:.4f} "
              f"(rel {rel:.2e}, tol 1e-2); family max |z| = {worst_z:.2f} "
              f"(tol 3 combined sigma, runtime cap 600s)")
    return CriterionResult("Santalo volume", ok, detail,
                           {"flat_rel_err": rel, "family_max_z": worst_z},
                           elapsed)


# ---------------------------------------------------------------------------
# 7. trapped-set decay
# ---------------------------------------------------------------------------

def criterion_trapped_decay(fast: bool = False) -> CriterionResult:
    n = 200_000 if fast else 1_000_000
    budgets = [100.0, 1000.0, 10_000.0]
    spec = _spec("flat-d2s1")
    t0 = time.perf_counter()
    ladder = trapped_ladder(spec, budgets, n, seed=7000)
    fractions = [t.fraction for t in ladder]
    monotone = all(a >= b for a, b in zip(fractions, fractions[1:]))
    decays = fractions[-1] < fractions[0]
    agrees = True
    zs = []
    for t in ladder:
        exact = flat_trapped_tail_exact(spec, t.budget)
        se = math.sqrt(exact * (1.0 - exact) / n)
        z = abs(t.fraction - exact) / se
        zs.append(z)
        agrees = agrees and z <= 3.0
    elapsed = time.perf_counter() - t0
    ok = monotone and decays and agrees
    detail = (f"N={n}, fractions {['%.2e' % f for f in fractions]} vs exact tail, "
              f"max |z| = {max(zs):.2f} (tol 3 sigma), non-increasing={monotone}")
    return CriterionResult("trapped-set decay", ok, detail,
                           {"fractions": fractions, "z": zs}, elapsed)


# ---------------------------------------------------------------------------
# 8. Busemann checks
# ---------------------------------------------------------------------------

def _positive_direction(rng) -> np.ndarray:
    while True:
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        if d[2] > 0.25 and np.linalg.norm(d[:2]) > 0.25:
            return d


def criterion_busemann(fast: bool = False) -> CriterionResult:
    spec = _spec("flat-d2s1")
    t = 1000.0
    t0 = time.perf_counter()

    # gradient norm at exterior probes
    n_grad = 20 if fast else 100
    rng = np.random.default_rng(8000)
    worst_grad = 0.0
    for _ in range(n_grad):
        d = _positive_direction(rng)
        base = np.append(rng.uniform(-1, 1, size=2), rng.uniform(-2, 2))
        x = rng.normal(size=2)
        x *= rng.uniform(1.2, 3.0) / np.linalg.norm(x)
        p = np.append(x, rng.uniform(-3.0, 3.0))
        norm = busemann_gradient_norm(spec, base, d, p, t)
        worst_grad = max(worst_grad, abs(norm - 1.0))
    grad_ok = worst_grad < 1e-3

    # parallel defining vectors differ by a constant
    rng = np.random.default_rng(8100)
    worst_par = 0.0
    for _ in range(5 if fast else 20):
        d = _positive_direction(rng)
        e = np.array([d[1], -d[0], 0.0])
        e /= np.linalg.norm(e)
        b1 = np.append(rng.uniform(-0.5, 0.5, size=2), rng.uniform(-1, 1))
        b2 = b1 + 0.25 * e
        diffs = [
            busemann_value(spec, b1, d, p, t) - busemann_value(spec, b2, d, p, t)
            for p in [np.append(rng.uniform(-1, 1, size=2), rng.uniform(-1, 1))
                      for _ in range(12)]
        ]
        worst_par = max(worst_par, max(diffs) - min(diffs))
    par_ok = worst_par < 1e-3

    # level-set extrema on the compact slab H_W(0) within the core cylinder
    rng = np.random.default_rng(8200)
    worst_ls = 0.0
    n_cfg = 5 if fast else 20
    for _ in range(n_cfg):
        dV = _positive_direction(rng)
        while True:
            dW = _positive_direction(rng)
            if math.acos(min(1.0, abs(float(dV @ dW)))) > 0.2:
                break
        bW = np.append(rng.uniform(-0.3, 0.3, size=2), rng.uniform(-1, 1))
        bV = np.append(rng.uniform(-0.3, 0.3, size=2), rng.uniform(-1, 1))

        def slab_point(x):
            # theta solving <p - bW, dW> = 0, the exact level set of the limit
            th = bW[2] - (x[0] - bW[0]) * dW[0] / dW[2] \
                - (x[1] - bW[1]) * dW[1] / dW[2]
            return np.array([x[0], x[1], th])

        interior, boundary = [], []
        for _ in range(16):
            x = rng.normal(size=2)
            x *= rng.uniform(0.0, 0.97) / np.linalg.norm(x)
            interior.append(slab_point(x))
        for _ in range(24):
            x = rng.normal(size=2)
            x /= np.linalg.norm(x)
            boundary.append(slab_point(x))
        fi = [busemann_value(spec, bV, dV, p, t) for p in interior]
        fb = [busemann_value(spec, bV, dV, p, t) for p in boundary]
        worst_ls = max(worst_ls,
                       max(fi) - max(fb),
                       min(fb) - min(fi))
    ls_ok = worst_ls < 1e-3
    elapsed = time.perf_counter() - t0
    ok = grad_ok and par_ok and ls_ok
    detail = (f"|grad f_t| dev {worst_grad:.2e} at {n_grad} probes; parallel "
              f"difference spread {worst_par:.2e}; level-set extremum excess "
              f"{worst_ls:.2e} over {n_cfg} configs (all tol 1e-3)")
    return CriterionResult("Busemann checks", ok, detail,
                           {"grad": worst_grad, "parallel": worst_par,
                            "levelset": worst_ls}, elapsed)


# ---------------------------------------------------------------------------
# 9. determinism
# ---------------------------------------------------------------------------

def _lens_csv_bytes(workers: int) -> bytes:
    spec = _spec("flat-d2s1")
    table = lens_table(spec, GridSampling((6, 6, 4)), route="ode",
                       workers=workers)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t.csv")
        write_lens_csv(table, path)
        with open(path, "rb") as fh:
            data = fh.read()
        with open(path + ".meta.json", "rb") as fh:
            data += fh.read()
    return data


def criterion_determinism(fast: bool = False, workers: int = 2) -> CriterionResult:
    t0 = time.perf_counter()
    b1 = _lens_csv_bytes(1)
    b2 = _lens_csv_bytes(1)
    bw = _lens_csv_bytes(workers)
    lens_ok = b1 == b2 and b1 == bw

    e1 = santalo_volume(_spec("flat-d2s1"), 20_000, budget=1e4, seed=9000)
    e2 = santalo_volume(_spec("flat-d2s1"), 20_000, budget=1e4, seed=9000)
    vol_blob1 = json.dumps(e1.to_json_dict(), sort_keys=True)
    vol_blob2 = json.dumps(e2.to_json_dict(), sort_keys=True)
    vol_ok = vol_blob1 == vol_blob2

    samp = GridSampling((1, 4, 10))
    rep1 = compare(lens_table(_spec("bump-cylinder"), samp, route="quadrature"),
                   lens_table(SurfaceOfRevolution(BumpProfile(BUMP_AMP, BUMP_EPS, 0.5)),
                              samp, route="quadrature"))
    rep2 = compare(lens_table(_spec("bump-cylinder"), samp, route="quadrature"),
                   lens_table(SurfaceOfRevolution(BumpProfile(BUMP_AMP, BUMP_EPS, 0.5)),
                              samp, route="quadrature"))
    cmp_ok = json.dumps(rep1.to_json_dict(), sort_keys=True) == \
        json.dumps(rep2.to_json_dict(), sort_keys=True)
    elapsed = time.perf_counter() - t0
    ok = lens_ok and vol_ok and cmp_ok
    detail = (f"lens CSV bytes identical across repeated runs and worker "
              f"counts: {lens_ok}; volume JSON identical: {vol_ok}; "
              f"compare JSON identical: {cmp_ok}")
    return CriterionResult("determinism", ok, detail,
                           {"lens": lens_ok, "volume": vol_ok, "compare": cmp_ok},
                           elapsed)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

CRITERIA = [
    criterion_flat_oracle,
    criterion_family_invariance,
    criterion_clairaut_conservation,
    criterion_reversibility,
    criterion_first_variation,
    criterion_santalo,
    criterion_trapped_decay,
    criterion_busemann,
    criterion_determinism,
]


def run_selftest(fast: bool = False, workers: int = 2, echo=print):
    """Run all acceptance criteria; returns (results, all_passed)."""
    results = []
    for fn in CRITERIA:
        if fn is criterion_determinism:
            res = fn(fast=fast, workers=workers)
        else:
            res = fn(fast=fast)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results, all(r.passed for r in results)


def report_dict(results) -> dict:
    """Deterministic selftest report (no wall times)."""
    return {
        "criteria": [
            {"name": r.name, "passed": bool(r.passed), "detail": r.detail,
             "metrics": _plain(r.metrics)}
            for r in results
        ],
        "all_passed": bool(all(r.passed for r in results)),
    }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
