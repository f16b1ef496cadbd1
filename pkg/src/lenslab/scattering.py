"""Scattering maps, lens tables, comparisons, and the first-variation check.

A LensRecord pairs an inward canonical boundary vector with its outward exit
vector and travel time.  Tables of records over a shared sampling spec are
the lens data; two manifolds with the same boundary type are compared
record-by-record under the identity identification of their boundaries, in
canonical coordinates.

Trapped records are censored at the integration budget.  In a comparison,
Trapped-vs-Trapped pairs are reported as censored agreements and contribute
no deviations (a finite budget cannot certify an infinite travel time on
either side); Trapped-vs-Exited pairs count as status disagreements and
their fraction is reported separately.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import spec_fingerprint
from .errors import ContractError, IdentificationError, NotDifferentiableError
from .geodesic import ExitVerdict, angle_period, integrate_until_exit
from .manifold import (
    GRAZING_TOL,
    BoundaryPoint,
    BoundaryVector,
    BoundaryType,
    FlatProduct,
    ManifoldSpec,
    ProductBoundary,
    RevolutionBoundary,
    SurfaceOfRevolution,
    boundary_point_chart,
    boundary_to_chart,
    boundary_type,
    default_trapped_budget,
    metric_inner,
    signed_angle_delta,
)
from .revolution import clairaut_record

STATUS_EXITED = "exited"
STATUS_TRAPPED = "trapped"
STATUS_GRAZING = "grazing"


@dataclass(frozen=True)
class LensRecord:
    entry: BoundaryVector
    status: str
    exit: BoundaryVector | None
    travel_time: float


# ---------------------------------------------------------------------------
# closed-form chord oracle on the flat product
# ---------------------------------------------------------------------------

def flat_oracle_scatter(spec: FlatProduct, bvec: BoundaryVector) -> LensRecord:
    """Closed-form scattering on D^n x S^1: straight chords, no integration.

    The horizontal part of the geodesic is a chord of the disc, the fiber
    coordinate advances linearly, and the direction components never change.
    """
    if not isinstance(spec, FlatProduct):
        raise ContractError("flat_oracle_scatter applies to FlatProduct specs")
    bt = boundary_type(spec)
    nu = bt.nu(bvec)
    if nu < -GRAZING_TOL:
        raise ContractError("entry vector points outward")
    if nu <= GRAZING_TOL:
        return LensRecord(bvec, STATUS_GRAZING, bvec, 0.0)
    n = spec.n
    u = np.asarray(bvec.point.coords[:n])
    theta = bvec.point.coords[n]
    v = np.asarray(bvec.comps)
    v_h = v[:n]
    m2 = float(v_h @ v_h)
    if m2 <= 1e-30:
        # inward with no horizontal motion cannot happen at the boundary;
        # kept as a defensive branch mirroring the trapped vertical fibers
        return LensRecord(bvec, STATUS_TRAPPED, None, math.inf)
    travel_time = 2.0 * spec.disc_radius * nu / m2
    u_exit = u + (travel_time / spec.disc_radius) * v_h
    theta_exit = theta + v[n] * travel_time
    exit_pt = bt.point(u_exit, theta_exit)
    exit_vec = bt.vector(exit_pt, v, normalize=True)
    return LensRecord(bvec, STATUS_EXITED, exit_vec, travel_time)


# ---------------------------------------------------------------------------
# the scattering map (ODE route) and fast routes
# ---------------------------------------------------------------------------

def scattering_map(spec: ManifoldSpec, bvec: BoundaryVector,
                   budget: float | None = None, **ode_kwargs) -> LensRecord:
    """S(V): trace the geodesic and convert the verdict to a lens record."""
    verdict, _ = integrate_until_exit(spec, bvec, budget=budget, **ode_kwargs)
    return record_from_verdict(bvec, verdict)


def record_from_verdict(entry: BoundaryVector, verdict: ExitVerdict) -> LensRecord:
    if verdict.status == "exited":
        return LensRecord(entry, STATUS_EXITED, verdict.exit, verdict.travel_time)
    if verdict.status == "grazing":
        return LensRecord(entry, STATUS_GRAZING, entry, 0.0)
    return LensRecord(entry, STATUS_TRAPPED, None, verdict.travel_time)


def quadrature_scatter(spec: SurfaceOfRevolution, bvec: BoundaryVector) -> LensRecord:
    """Clairaut quadrature route for revolution surfaces."""
    status, exit_vec, tt = clairaut_record(spec, bvec)
    if status == "grazing":
        return LensRecord(bvec, STATUS_GRAZING, bvec, 0.0)
    return LensRecord(bvec, STATUS_EXITED, exit_vec, tt)


def scatter_route(spec: ManifoldSpec, route: str) -> Callable[[BoundaryVector], LensRecord]:
    """Bind a record-producing scatter function for the requested route."""
    if route == "ode":
        return lambda b: scattering_map(spec, b)
    if route == "oracle":
        if not isinstance(spec, FlatProduct):
            raise ContractError("route 'oracle' requires a FlatProduct spec")
        return lambda b: flat_oracle_scatter(spec, b)
    if route == "quadrature":
        if not isinstance(spec, SurfaceOfRevolution):
            raise ContractError("route 'quadrature' requires a revolution surface")
        return lambda b: quadrature_scatter(spec, b)
    raise ContractError(f"unknown route {route!r}; use ode|oracle|quadrature")


# ---------------------------------------------------------------------------
# sampling specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSampling:
    """Product grid over boundary coordinates x inward directions.

    Axis order is the boundary type's ``grid_axes``; nodes are open,
    (i + 1/2)/k of each axis span, so exact tangential vectors never appear.
    Fewer dims than axes leaves the trailing axes at their single midpoint.
    """

    dims: tuple[int, ...]

    def descriptor(self) -> dict:
        return {"kind": "grid", "dims": list(self.dims)}

    def generate(self, bt: BoundaryType) -> list[BoundaryVector]:
        axes = bt.grid_axes()
        if len(self.dims) > len(axes):
            raise ContractError(
                f"grid has {len(self.dims)} dims but the boundary exposes "
                f"{len(axes)} axes ({', '.join(a[0] for a in axes)})"
            )
        dims = list(self.dims) + [1] * (len(axes) - len(self.dims))
        node_values = []
        for (name, start, span), k in zip(axes, dims):
            if name == "end":
                if k > 2:
                    raise ContractError("end axis admits at most 2 nodes")
                vals = [-1.0] if k == 1 else [-1.0, 1.0]
            else:
                vals = [start + (i + 0.5) / k * span for i in range(k)]
            node_values.append(vals)
        out = []
        idx = [0] * len(dims)
        total = int(np.prod(dims))
        for flat_index in range(total):
            rem = flat_index
            for axis in range(len(dims) - 1, -1, -1):
                idx[axis] = rem % dims[axis]
                rem //= dims[axis]
            values = tuple(node_values[a][idx[a]] for a in range(len(dims)))
            out.append(bt.grid_vector(values))
        return out


@dataclass(frozen=True)
class MonteCarloSampling:
    """Seeded uniform sampling: boundary area x inward hemisphere solid angle."""

    n: int
    seed: int = 0

    def descriptor(self) -> dict:
        return {"kind": "mc", "n": self.n, "seed": self.seed}

    def generate(self, bt: BoundaryType) -> list[BoundaryVector]:
        rng = np.random.default_rng(self.seed)
        return [bt.sample(rng) for _ in range(self.n)]


Sampling = GridSampling | MonteCarloSampling


# ---------------------------------------------------------------------------
# lens tables
# ---------------------------------------------------------------------------

@dataclass
class LensTable:
    boundary: BoundaryType
    sampling: dict
    records: list[LensRecord]
    fingerprint: str
    budget: float


def _trace_chunk(args):
    spec, bvecs, budget, route = args
    if route == "ode":
        scatter = lambda b: scattering_map(spec, b, budget=budget)
    else:
        scatter = scatter_route(spec, route)
    return [scatter(b) for b in bvecs]


def lens_table(spec: ManifoldSpec, sampling: Sampling, budget: float | None = None,
               route: str = "ode", workers: int = 1) -> LensTable:
    """Scatter every sample; records are assembled by sample index.

    Sampling is reproducible from its descriptor, and the result is
    independent of the worker count because each record depends only on its
    own sample.
    """
    bt = boundary_type(spec)
    samples = sampling.generate(bt)
    if budget is None:
        budget = default_trapped_budget(spec)
    if workers <= 1 or len(samples) < 4:
        records = _trace_chunk((spec, samples, budget, route))
    else:
        import multiprocessing as mp

        n_chunks = workers * 4
        chunks = [samples[i::n_chunks] for i in range(n_chunks)]
        with mp.Pool(workers) as pool:
            parts = pool.map(
                _trace_chunk, [(spec, ch, budget, route) for ch in chunks]
            )
        records = [None] * len(samples)
        for ci, part in enumerate(parts):
            for k, rec in enumerate(part):
                records[ci + k * n_chunks] = rec
    return LensTable(bt, sampling.descriptor(), records, spec_fingerprint(spec), budget)


# ---------------------------------------------------------------------------
# comparison under the boundary identification
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    n_records: int
    n_compared: int
    n_censored_agreements: int
    n_status_disagreements: int
    n_grazing_pairs: int
    max_position_dev: float
    mean_position_dev: float
    max_direction_dev: float
    mean_direction_dev: float
    max_travel_time_dev: float
    mean_travel_time_dev: float
    per_record: list[tuple[int, str, str, float, float, float]] = field(repr=False,
                                                                        default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max(self.max_position_dev, self.max_direction_dev,
                   self.max_travel_time_dev)

    @property
    def disagreement_fraction(self) -> float:
        return self.n_status_disagreements / self.n_records if self.n_records else 0.0

    def to_json_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_compared": self.n_compared,
            "n_censored_agreements": self.n_censored_agreements,
            "n_status_disagreements": self.n_status_disagreements,
            "n_grazing_pairs": self.n_grazing_pairs,
            "disagreement_fraction": self.disagreement_fraction,
            "max_position_dev": self.max_position_dev,
            "mean_position_dev": self.mean_position_dev,
            "max_direction_dev": self.max_direction_dev,
            "mean_direction_dev": self.mean_direction_dev,
            "max_travel_time_dev": self.max_travel_time_dev,
            "mean_travel_time_dev": self.mean_travel_time_dev,
            "max_deviation": self.max_deviation,
        }

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,status_a,status_b,position_dev,direction_dev,travel_time_dev\n")
            for row in self.per_record:
                i, sa, sb, pd, dd, td = row
                fh.write(f"{i},{sa},{sb},{pd!r},{dd!r},{td!r}\n")


def compare(table_a: LensTable, table_b: LensTable,
            keep_per_record: bool = False) -> ComparisonReport:
    """Pointwise deviations between two lens tables over the same sampling."""
    if table_a.boundary != table_b.boundary:
        raise IdentificationError("tables have different boundary types")
    if table_a.sampling != table_b.sampling:
        raise IdentificationError("tables have different sampling specs")
    if len(table_a.records) != len(table_b.records):
        raise IdentificationError("tables have different record counts")

    bt = table_a.boundary
    pos_devs, dir_devs, tt_devs = [], [], []
    per_record = []
    n_censored = n_disagree = n_grazing = 0
    for i, (ra, rb) in enumerate(zip(table_a.records, table_b.records)):
        if ra.status != rb.status:
            n_disagree += 1
            if keep_per_record:
                per_record.append((i, ra.status, rb.status,
                                   math.nan, math.nan, math.nan))
            continue
        if ra.status == STATUS_TRAPPED:
            n_censored += 1
            if keep_per_record:
                per_record.append((i, ra.status, rb.status, 0.0, 0.0, 0.0))
            continue
        if ra.status == STATUS_GRAZING:
            n_grazing += 1
        pd = bt.point_distance(ra.exit.point, rb.exit.point)
        dd = bt.vector_angle(ra.exit, rb.exit)
        td = abs(ra.travel_time - rb.travel_time)
        pos_devs.append(pd)
        dir_devs.append(dd)
        tt_devs.append(td)
        if keep_per_record:
            per_record.append((i, ra.status, rb.status, pd, dd, td))

    def agg(vals):
        if not vals:
            return 0.0, 0.0
        return max(vals), sum(vals) / len(vals)

    mx_p, mn_p = agg(pos_devs)
    mx_d, mn_d = agg(dir_devs)
    mx_t, mn_t = agg(tt_devs)
    return ComparisonReport(
        n_records=len(table_a.records),
        n_compared=len(pos_devs),
        n_censored_agreements=n_censored,
        n_status_disagreements=n_disagree,
        n_grazing_pairs=n_grazing,
        max_position_dev=mx_p, mean_position_dev=mn_p,
        max_direction_dev=mx_d, mean_direction_dev=mn_d,
        max_travel_time_dev=mx_t, mean_travel_time_dev=mn_t,
        per_record=per_record,
    )


# ---------------------------------------------------------------------------
# first variation of arc length along a curve of entries
# ---------------------------------------------------------------------------

def _chart_delta(spec: ManifoldSpec, pos_p: np.ndarray, pos_m: np.ndarray) -> np.ndarray:
    """pos_p - pos_m with the angle coordinate compared by minimal image."""
    delta = pos_p - pos_m
    delta[-1] = signed_angle_delta(pos_p[-1], pos_m[-1], angle_period(spec))
    return delta


def first_variation_residual(
    spec: ManifoldSpec,
    curve: Callable[[float], BoundaryVector],
    s: float,
    h: float = 1e-4,
    scatter: Callable[[BoundaryVector], LensRecord] | None = None,
) -> float:
    """Residual of dL/ds = <gamma'(L), c_out'> - <gamma'(0), c_in'>.

    The travel-time derivative and the endpoint velocities are central
    differences of the scattered records at s +- h; the inner products use
    the metric at the endpoints.  A status change inside the stencil makes
    the lens data non-differentiable there and raises.
    """
    if scatter is None:
        scatter = lambda b: scattering_map(spec, b)
    rec_c = scatter(curve(s))
    rec_p = scatter(curve(s + h))
    rec_m = scatter(curve(s - h))
    for rec in (rec_c, rec_p, rec_m):
        if rec.status != STATUS_EXITED:
            raise NotDifferentiableError(
                f"status {rec.status!r} inside the variation stencil"
            )
    dL = (rec_p.travel_time - rec_m.travel_time) / (2.0 * h)

    entry_p = boundary_point_chart(spec, rec_p.entry.point)
    entry_m = boundary_point_chart(spec, rec_m.entry.point)
    exit_p = boundary_point_chart(spec, rec_p.exit.point)
    exit_m = boundary_point_chart(spec, rec_m.exit.point)
    cdot_in = _chart_delta(spec, entry_p, entry_m) / (2.0 * h)
    cdot_out = _chart_delta(spec, exit_p, exit_m) / (2.0 * h)

    pos_in, vel_in, _ = boundary_to_chart(spec, rec_c.entry)
    pos_out, vel_out, _ = boundary_to_chart(spec, rec_c.exit)
    term = metric_inner(spec, pos_out, vel_out, cdot_out) \
        - metric_inner(spec, pos_in, vel_in, cdot_in)
    return abs(dL - term)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _boundary_names(bt: BoundaryType) -> tuple[list[str], list[str]]:
    if isinstance(bt, RevolutionBoundary):
        return ["end", "alpha"], ["v_t", "v_alpha"]
    return [f"u{i + 1}" for i in range(bt.n)] + ["theta"], \
           [f"v{i + 1}" for i in range(bt.n)] + ["v_theta"]


def boundary_descriptor(bt: BoundaryType) -> dict:
    if isinstance(bt, RevolutionBoundary):
        return {"type": "revolution", "circle_length": bt.circle_length}
    return {"type": "product", "n": bt.n, "disc_radius": bt.disc_radius,
            "circle_length": bt.circle_length}


def boundary_from_descriptor(d: dict) -> BoundaryType:
    if d["type"] == "revolution":
        return RevolutionBoundary(d["circle_length"])
    return ProductBoundary(d["n"], d["disc_radius"], d["circle_length"])


def write_lens_csv(table: LensTable, path):
    """CSV of records plus a JSON sidecar (<path>.meta.json) for provenance."""
    pnames, vnames = _boundary_names(table.boundary)
    header = [f"entry_{c}" for c in pnames] + [f"entry_{c}" for c in vnames] \
        + ["status"] + [f"exit_{c}" for c in pnames] + [f"exit_{c}" for c in vnames] \
        + ["travel_time"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for rec in table.records:
            row = [repr(float(x)) for x in rec.entry.point.coords]
            row += [repr(float(x)) for x in rec.entry.comps]
            row.append(rec.status)
            if rec.exit is not None:
                row += [repr(float(x)) for x in rec.exit.point.coords]
                row += [repr(float(x)) for x in rec.exit.comps]
            else:
                row += [""] * (len(pnames) + len(vnames))
            row.append(repr(float(rec.travel_time)))
            fh.write(",".join(row) + "\n")
    meta = {
        "boundary": boundary_descriptor(table.boundary),
        "sampling": table.sampling,
        "spec_fingerprint": table.fingerprint,
        "budget": table.budget,
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_lens_csv(path) -> LensTable:
    with open(str(path) + ".meta.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    bt = boundary_from_descriptor(meta["boundary"])
    pnames, vnames = _boundary_names(bt)
    np_, nv = len(pnames), len(vnames)
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            entry_pt = BoundaryPoint(tuple(float(x) for x in row[:np_]))
            entry = BoundaryVector(entry_pt, tuple(float(x) for x in row[np_:np_ + nv]))
            status = row[np_ + nv]
            k = np_ + nv + 1
            if status == STATUS_TRAPPED:
                exit_vec = None
            else:
                exit_pt = BoundaryPoint(tuple(float(x) for x in row[k:k + np_]))
                exit_vec = BoundaryVector(
                    exit_pt, tuple(float(x) for x in row[k + np_:k + np_ + nv]))
            tt = float(row[k + np_ + nv])
            records.append(LensRecord(entry, status, exit_vec, tt))
    return LensTable(bt, meta["sampling"], records, meta["spec_fingerprint"],
                     meta["budget"])


def record_to_json_dict(rec: LensRecord) -> dict:
    out = {
        "entry": {"point": list(rec.entry.point.coords), "comps": list(rec.entry.comps)},
        "status": rec.status,
        "travel_time": rec.travel_time,
    }
    if rec.exit is not None:
        out["exit"] = {"point": list(rec.exit.point.coords), "comps": list(rec.exit.comps)}
    else:
        out["exit"] = None
    return out
