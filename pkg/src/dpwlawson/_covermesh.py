"""Closed-surface mesh over the branched covering of the plane.

Combinatorial model.  The quotient sphere is tiled by m+1 rotated copies of
the sector 0 <= arg z <= 2pi/(m+1); the covering has k+1 sheets glued along
branch cuts placed on the unit-circle arcs from p_{2i} to p_{2i+1}.  The
sheet index changes by +1 when a path crosses a cut arc outward (so a
counterclockwise loop around an odd puncture shifts sheets by +1, around an
even one by -1, matching the inverse branch cycles of the covering).

The fundamental patch owned by one (sector, sheet) copy:

  * a polar grid over the sector in the z chart, with a two-row band
    straddling the unit circle; band cells on the cut arc connect to the
    sheet above,
  * a cap at z = 0 (fan) and a cap at infinity in the u = 1/z chart with
    the shear gauge,
  * holes (polar boxes) around the punctures on the sector boundary and
    center line; each puncture carries a single disk in the branched
    w^{k+1} = z - p_j chart whose boundary winds through all k+1 sheets.

Faces reference neighbours by (sheet, sector) offsets; replication applies
the fitted symmetry generators G1 (sector rotation) and G2 (deck shift) to
the patch positions and resolves references to canonical vertex keys.  The
Euler characteristic of the result certifies the gluing combinatorics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    BranchChart,
    InfinityChart,
    SurfaceMesh,
    SymmetryGenerators,
    VecArc,
    VecSegment,
    ZChart,
    _transport_chart,
    _transport_points,
    density_value,
    fit_generators,
    quaternion_of,
    split_frame,
)
from ._parallel import ordered_map
from .iwasawa import iwasawa_pointwise
from .loops import grid_points
from .monodromy import Arc, Segment
from .potential import PotentialParams


@dataclass
class DiskData:
    parity: int
    boundary: list = field(default_factory=list)
    # boundary[q] = dict(dalpha, beta, i, row, z, w, quat, dens_w)
    ring_w: np.ndarray | None = None        # (nr, Q) chart coords, rings 1..nr
    ring_quat: np.ndarray | None = None     # (nr, Q, 4)
    ring_dens: np.ndarray | None = None     # (nr, Q)
    center_quat: np.ndarray | None = None
    center_dens: float = 0.0


@dataclass
class PatchData:
    params: PotentialParams
    m: int
    k: int
    n_ang: int
    hc: int
    theta: object                            # callable column -> plane angle
    rows: list                               # [("z", r) or ("u", u)] by level
    row_lo: int
    row_hi: int
    sector_vertices: dict = field(default_factory=dict)  # (i,row) -> record
    origin: dict | None = None
    infinity: dict | None = None
    disks: dict = field(default_factory=dict)
    faces_sector: list = field(default_factory=list)
    faces_disk: list = field(default_factory=list)
    generators: SymmetryGenerators | None = None
    band_radii: np.ndarray | None = None      # sub-rows across the circle band
    band_dens: np.ndarray | None = None       # (n_ang, len(band_radii))


GUARD_BAND = 0.06
R_OUT = 2.0
R_ARC = 1.35
U_MIN = 0.12
RING_S_MIN = 0.14
THETA_BOX = 0.06


def _geometric_ratio(s1: float, length: float, n: int) -> float:
    """Ratio g with s1 (g^n - 1)/(g - 1) = length, by bisection."""
    if n == 1:
        return 1.0
    lo, hi = 1.0 + 1e-12, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        tot = s1 * (mid ** n - 1.0) / (mid - 1.0)
        if tot < length:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_theta(m: int, resolution: int):
    """Angular ladder over the sector with cells crowding geometrically
    toward the puncture angles, and a fixed-width uniform box of THETA_BOX
    at each puncture so the sector/disk domain split does not move under
    refinement.  Returns (theta(col), n_ang, n_box); columns extend
    periodically to negative values and neighbouring sectors."""
    Lh = np.pi / (m + 1)
    n_box = max(1, resolution // 4)
    n_side = resolution - n_box          # graded half of the middle
    s1 = THETA_BOX / n_box
    Lmid = Lh - 2.0 * THETA_BOX
    g = _geometric_ratio(s1, Lmid / 2.0, n_side)
    # half-sector ladder 0 .. Lh with 2*resolution cells
    steps = [s1] * n_box
    steps += [s1 * g ** j for j in range(n_side)]
    steps += [s1 * g ** j for j in range(n_side - 1, -1, -1)]
    steps += [s1] * n_box
    half_angles = np.concatenate([[0.0], np.cumsum(steps)])
    half_angles *= Lh / half_angles[-1]          # exact endpoint
    n_half = len(half_angles) - 1                # = 2*resolution
    n_ang = 2 * n_half

    def theta(col: int) -> float:
        base, c = divmod(col, n_ang)
        if c <= n_half:
            val = half_angles[c]
        else:
            val = 2 * Lh - half_angles[n_ang - c]
        return float(val + base * 2 * Lh)

    return theta, n_ang, n_box


def _rows_spec(resolution: int) -> tuple[list, int, int]:
    # The conformal density peaks like dist^(2/(k+1) - 2) toward the unit
    # circle, so the radial rows crowd geometrically onto the band from both
    # sides (distances from the circle in geometric progression).
    n_in = 2 * resolution
    n_out = resolution + 2
    n_u = max(3, resolution // 2 + 1)
    d_in = np.geomspace(0.82, GUARD_BAND, n_in)
    rs_in = 1.0 - d_in
    d_out = np.geomspace(GUARD_BAND, R_OUT - 1.0, n_out)
    rs_out = 1.0 + d_out
    us = np.geomspace(1.0 / R_OUT, U_MIN, n_u)
    rows = [("z", float(r)) for r in rs_in]
    rows += [("z", float(r)) for r in rs_out]
    rows += [("u", float(u)) for u in us[1:]]
    row_lo = n_in - 1
    row_hi = n_in
    return rows, row_lo, row_hi


def _hole_columns(n_ang: int, hc: int, m: int) -> set:
    cols = set()
    for ip in (0, n_ang // 2):
        for d in range(-hc, hc):
            cols.add((ip + d) % n_ang)
    for d in range(-hc, 0):
        cols.add((n_ang + d) % n_ang)   # lower half of the next copy's p0 box
    return cols


def _is_cut_column(i: int, n_ang: int) -> bool:
    """Cut arc = local angles in (0, pi/(m+1)), i.e. columns 0..n_ang/2-1."""
    return 0 <= i < n_ang // 2


# -- patch construction ---------------------------------------------------------


def build_patch_data(params: PotentialParams, m: int, k: int,
                     resolution: int = 6, rtol: float = 1e-11,
                     fit: bool = True, L: int | None = None,
                     NB: int | None = None, side_sub: int = 0) -> PatchData:
    # the reconstruction only needs the unitary frame at lam = +-1 and the
    # first factor coefficients; a modest lambda grid is enough and the
    # factorization cost per vertex drops accordingly
    if L is None:
        L = 48
    if NB is None:
        NB = 10
    lam = grid_points(L)
    rho = params.rho

    theta, n_ang, hc = make_theta(m, resolution)
    rows, row_lo, row_hi = _rows_spec(resolution)

    zchart = ZChart(params, lam)
    uchart = InfinityChart(params, lam)
    theta_cross = 1.5 * np.pi / (m + 1)

    patch = PatchData(params=params, m=m, k=k, n_ang=n_ang, hc=hc, theta=theta,
                      rows=rows, row_lo=row_lo, row_hi=row_hi)

    eye = np.broadcast_to(np.eye(2, dtype=complex), (1, L, 2, 2))

    def record_sample(chart, v, Phi):
        s = split_frame(Phi, chart, v, rho, NB)
        dens = {chart.name: s.density}
        return {"chart": chart.name, "coord": v, "quat": s.f,
                "density": dens, "B0": s.B0, "Phi": Phi}

    # ---- spokes: all angles advance in one batch ----------------------------
    inside_rows = list(range(0, row_lo + 1))
    outside_z_rows = [ell for ell in range(row_hi, len(rows)) if rows[ell][0] == "z"]
    u_rows = [ell for ell in range(len(rows)) if rows[ell][0] == "u"]

    angles = np.array([theta(i) for i in range(n_ang)])
    phase = np.exp(1j * angles)
    L = len(lam)
    eyeZ = np.broadcast_to(np.eye(2, dtype=complex), (n_ang, L, 2, 2))

    Y = eyeZ
    r_prev = np.zeros(n_ang)
    for ell in inside_rows:
        r = rows[ell][1]
        Y = _transport_points(zchart, [VecSegment(r_prev * phase, r * phase)],
                              Y, rtol)
        recs = ordered_map(lambda i: record_sample(zchart, r * phase[i], Y[i]),
                           range(n_ang))
        for i in range(n_ang):
            patch.sector_vertices[(i, ell)] = recs[i]
        r_prev = r * np.ones(n_ang)

    # Density-only sub-rows across the circle band: the band cells have a
    # fixed radial height, so the quadrature needs interior density samples
    # to converge there (monodromy is unitary at solved parameters, so the
    # density does not depend on the sheet and one radial pass suffices).
    n_sub = resolution // 2 + 2
    band_radii = np.linspace(rows[row_lo][1], rows[row_hi][1], n_sub + 2)[1:-1]
    patch.band_radii = band_radii
    patch.band_dens = np.zeros((n_ang, len(band_radii)))
    # Rays through or next to the punctures stay frozen at the rim: their
    # band cells sit inside the holes, so the values are never used and the
    # frozen columns keep the batched march away from the poles.
    holes_set = _hole_columns(n_ang, hc, m)
    def _frozen(i):
        on_puncture_ray = (i % (n_ang // 2) == 0)
        unused = i in holes_set and (i - 1) % n_ang in holes_set
        return on_puncture_ray or unused
    moving = np.array([not _frozen(i) for i in range(n_ang)])
    Yb = Y
    r_prev_b = rows[row_lo][1] * np.ones(n_ang)
    for jb, r in enumerate(band_radii):
        r_next = np.where(moving, r, r_prev_b)
        Yb = _transport_points(zchart, [VecSegment(r_prev_b * phase, r_next * phase)],
                               Yb, rtol)
        for i in range(n_ang):
            if not moving[i]:
                continue
            B, _ = iwasawa_pointwise(Yb[i], rho, NB)
            patch.band_dens[i, jb] = density_value(
                B.coeff(0), zchart.eta_m1_12(r * phase[i]))
        r_prev_b = r_next

    # outside: shared stem to the crossing corridor, arcs to each angle,
    # then radial ladders below and above the safe ring
    stem = _transport_chart(zchart,
                            [Segment(0.0, R_ARC * np.exp(1j * theta_cross))],
                            eye, rtol)
    Y = np.repeat(stem, n_ang, axis=0)
    Y = _transport_points(zchart, [VecArc(R_ARC, np.full(n_ang, theta_cross),
                                          angles)], Y, rtol)
    below = [ell for ell in outside_z_rows if rows[ell][1] < R_ARC][::-1]
    above = [ell for ell in outside_z_rows if rows[ell][1] >= R_ARC]
    vals = {}
    for group in (below, above):
        Y_here = Y
        r_prev = R_ARC
        for ell in group:
            r = rows[ell][1]
            Y_here = _transport_points(
                zchart, [VecSegment(r_prev * phase, r * phase)], Y_here, rtol)
            vals[ell] = Y_here
            r_prev = r
    for ell in outside_z_rows:
        r = rows[ell][1]
        recs = ordered_map(lambda i: record_sample(zchart, r * phase[i], vals[ell][i]),
                           range(n_ang))
        for i in range(n_ang):
            patch.sector_vertices[(i, ell)] = recs[i]

    # gauge switch at R_out and march inward in u
    z_out = R_OUT * phase
    Phi_out = vals[outside_z_rows[-1]]
    Gv = np.zeros((n_ang, L, 2, 2), dtype=complex)
    Gv[..., 0, 0] = z_out[:, None] ** -patch.m
    Gv[..., 0, 1] = (uchart.s_vals[None, :] - 1.0) / params.r
    Gv[..., 1, 1] = z_out[:, None] ** patch.m
    Yh = np.einsum("zlab,zlbc->zlac", Phi_out, Gv)
    u_prev = 1.0 / z_out
    for i in range(n_ang):
        rec_shared = patch.sector_vertices[(i, outside_z_rows[-1])]
        B_hat, _ = iwasawa_pointwise(Yh[i], rho, NB)
        rec_shared["density"]["u"] = density_value(
            B_hat.coeff(0), uchart.eta_m1_12(u_prev[i]))
    for ell in u_rows:
        u = rows[ell][1] * np.exp(-1j * angles)
        Yh = _transport_points(uchart, [VecSegment(u_prev, u)], Yh, rtol)
        recs = ordered_map(lambda i: record_sample(uchart, u[i], Yh[i]),
                           range(n_ang))
        for i in range(n_ang):
            patch.sector_vertices[(i, ell)] = recs[i]
        u_prev = u

    # ---- origin and infinity ------------------------------------------------
    patch.origin = {
        "chart": "z", "coord": 0.0,
        "quat": np.array([1.0, 0.0, 0.0, 0.0]),
        "density": {"z": density_value(np.eye(2), zchart.eta_m1_12(0.0))},
    }
    patch.infinity = _extrapolate_center(
        [patch.sector_vertices[(i, u_rows[-1])] for i in range(n_ang)],
        [patch.sector_vertices[(i, u_rows[-2])] for i in range(n_ang)],
        "u", rows[u_rows[-1]][1], rows[u_rows[-2]][1])

    # ---- sector faces ---------------------------------------------------------
    holes = _hole_columns(n_ang, hc, m)
    Lrows = len(rows)
    for i in range(n_ang):
        i2, dalpha = (i + 1) % n_ang, (i + 1) // n_ang
        # origin fan
        patch.faces_sector.append((("O", 0, 0), ("S", 0, 0, i, 0), ("S", dalpha, 0, i2, 0)))
        # quads
        for ell in range(Lrows - 1):
            band = (ell == row_lo)
            if band and i in holes:
                continue
            dbeta_top = 1 if (band and _is_cut_column(i, n_ang)) else 0
            BL = ("S", 0, 0, i, ell)
            BR = ("S", dalpha, 0, i2, ell)
            TR = ("S", dalpha, dbeta_top, i2, ell + 1)
            TL = ("S", 0, dbeta_top, i, ell + 1)
            patch.faces_sector.append((BL, BR, TR))
            patch.faces_sector.append((BL, TR, TL))
        # infinity fan
        patch.faces_sector.append((("I", 0, 0),
                                   ("S", dalpha, 0, i2, Lrows - 1),
                                   ("S", 0, 0, i, Lrows - 1)))

    # ---- branch disks ---------------------------------------------------------
    for parity in (0, 1):
        patch.disks[parity] = _build_disk(patch, parity, zchart, lam, NB,
                                          resolution, rtol, side_sub)
        if side_sub == 0:
            _emit_disk_faces(patch, parity)

    _orient_sector_faces(patch, m)
    if fit:
        patch.generators = fit_generators(params, m, k, L=L, rtol=rtol)
    return patch


def _extrapolate_center(ring1: list, ring2: list, chart_name: str,
                        r1: float, r2: float) -> dict:
    """Limit value at a chart center from two surrounding rings at radii
    r1 < r2: ring means of a smooth field satisfy mean(r) = f0 + c r^2 + ..."""
    q1 = np.mean([r["quat"] for r in ring1], axis=0)
    q2 = np.mean([r["quat"] for r in ring2], axis=0)
    wgt = r2 ** 2 / (r2 ** 2 - r1 ** 2)
    q = wgt * q1 + (1.0 - wgt) * q2
    q = q / np.linalg.norm(q)
    d1 = np.mean([r["density"][chart_name] for r in ring1])
    d2 = np.mean([r["density"][chart_name] for r in ring2])
    return {"chart": chart_name, "coord": 0.0, "quat": q,
            "density": {chart_name: float(wgt * d1 + (1.0 - wgt) * d2)}}


def _boundary_walk(patch: PatchData, parity: int, side_sub: int = 0):
    """Counterclockwise walk of the puncture box boundary, one full pass:
    [left side out, top row theta+, right side in, bottom row theta-].

    Emits (col, row_or_radius, dbeta_step_before_vertex, ref) per vertex,
    where ref is (col, row) for grid corners and None for the side_sub
    intermediate points splitting the radial side edges.  Intermediate
    points matter for quadrature accuracy: a side edge pulls back to a
    strongly curved arc in the branched chart and a single chord over-covers
    the disk region.
    """
    n_ang, hc = patch.n_ang, patch.hc
    ip = 0 if parity == 0 else n_ang // 2
    lo, hi = patch.row_lo, patch.row_hi
    r_lo, r_hi = patch.rows[lo][1], patch.rows[hi][1]

    def side_points(up: bool):
        rs = np.linspace(r_lo, r_hi, side_sub + 2)[1:-1]
        return list(rs) if up else list(rs[::-1])

    cols = list(range(ip - hc, ip + hc + 1))
    seq = []
    seq.append((cols[0], lo, 0, (cols[0], lo)))
    # left side going out; the sheet shift happens where the side crosses
    # the unit circle, attach it to the first point past r = 1
    db_left = 1 if _is_cut_column_angle(cols[0], n_ang) else 0
    crossed = False
    for r in side_points(up=True):
        db = db_left if (r > 1.0 and not crossed) else 0
        crossed = crossed or r > 1.0
        seq.append((cols[0], r, db, None))
    seq.append((cols[0], hi, 0 if crossed else db_left, (cols[0], hi)))
    for c in cols[1:]:
        seq.append((c, hi, 0, (c, hi)))
    db_right = -1 if _is_cut_column_angle(cols[-1], n_ang) else 0
    crossed = False
    for r in side_points(up=False):
        db = db_right if (r < 1.0 and not crossed) else 0
        crossed = crossed or r < 1.0
        seq.append((cols[-1], r, db, None))
    seq.append((cols[-1], lo, 0 if crossed else db_right, (cols[-1], lo)))
    for c in cols[-2:0:-1]:
        seq.append((c, lo, 0, (c, lo)))
    return seq


def _is_cut_column_angle(col: int, n_ang: int) -> bool:
    """Whether the radial line at column index col crosses the circle on a
    cut arc (local plane angle strictly inside (0, pi/(m+1)) modulo the
    sector); col may be negative before wrapping."""
    cm = col % n_ang
    return 0 < cm < n_ang // 2


def _build_disk(patch: PatchData, parity: int, zchart, lam, NB, resolution,
                rtol, side_sub: int = 0) -> DiskData:
    params = patch.params
    m, k = patch.m, patch.k
    n_ang, hc = patch.n_ang, patch.hc
    theta = patch.theta
    rho = params.rho
    j = parity
    p = params.punctures()[j]
    kp1 = k + 1
    wchart = BranchChart(params, j, k, lam)

    seq = _boundary_walk(patch, parity, side_sub)
    per_pass = len(seq)

    def walk_z(col, row_or_r):
        if isinstance(row_or_r, int):
            return patch.rows[row_or_r][1] * np.exp(1j * theta(col))
        return row_or_r * np.exp(1j * theta(col))

    # Frame at the walk start: a fresh radial path to the plane point at the
    # (possibly negative) walk angle.  The stored patch vertex with the same
    # wrapped column index lives one sector over; agreement through the
    # fitted rotation is exactly what the stitch check verifies, so it must
    # not be assumed here.
    c0, r0, _, _ = seq[0]
    z0 = walk_z(c0, r0)
    L = len(lam)
    eye = np.broadcast_to(np.eye(2, dtype=complex), (1, L, 2, 2))
    Phi = _transport_chart(zchart, [Segment(0.0, z0)], eye, rtol)

    disk = DiskData(parity=parity)
    beta = 0
    arg_prev = np.angle(z0 - p)
    arg_acc = arg_prev
    for s in range(kp1):
        for q in range(per_pass):
            col, row, db, ref = seq[q]
            beta += db
            z = walk_z(col, row)
            if not (s == 0 and q == 0):
                col_prev, row_prev, _, _ = seq[q - 1] if q > 0 else seq[-1]
                z_prev = walk_z(col_prev, row_prev)
                if col == col_prev:
                    piece = Segment(z_prev, z)
                else:
                    piece = Arc(0.0, abs(z), theta(col_prev), theta(col))
                Phi = _transport_chart(zchart, [piece], Phi, rtol)
            ang = np.angle(z - p)
            arg_acc += np.angle(np.exp(1j * (ang - arg_prev)))
            arg_prev = ang
            w = np.abs(z - p) ** (1.0 / kp1) * np.exp(1j * arg_acc / kp1)
            B, Fv = iwasawa_pointwise(Phi[0], rho, NB)
            L = len(lam)
            f = Fv[0] @ np.linalg.inv(Fv[L // 2])
            f = f / np.sqrt(np.linalg.det(f))
            disk.boundary.append({
                "dalpha": col // n_ang,
                "beta": beta % kp1,
                "i": col % n_ang,
                "row": row if isinstance(row, int) else None,
                "z": z, "w": w,
                "quat": quaternion_of(f),
                "dens_w": density_value(B.coeff(0), wchart.eta_m1_12(w)),
                "Phi": Phi[0].copy(),
            })

    Q = len(disk.boundary)
    # interior rings: scaled copies of the boundary curve in the w chart;
    # the disk carries most of the surface area at large k, so its radial
    # resolution tracks the nominal resolution directly
    n_rings = 2 * resolution + 1
    svals = np.linspace(1.0, RING_S_MIN, n_rings + 1)[1:]
    ring_w = np.empty((n_rings, Q), dtype=complex)
    ring_quat = np.empty((n_rings, Q, 4))
    ring_dens = np.empty((n_rings, Q))
    wb = np.array([rec["w"] for rec in disk.boundary])
    Y = np.stack([rec["Phi"] for rec in disk.boundary])
    L = len(lam)
    s_prev = 1.0
    for ell, sv in enumerate(svals):
        Y = _transport_points(wchart, [VecSegment(s_prev * wb, sv * wb)], Y, rtol)

        def ring_entry(q, sv=sv, Y=Y):
            B, Fv = iwasawa_pointwise(Y[q], rho, NB)
            f = Fv[0] @ np.linalg.inv(Fv[L // 2])
            f = f / np.sqrt(np.linalg.det(f))
            return (quaternion_of(f),
                    density_value(B.coeff(0), wchart.eta_m1_12(sv * wb[q])))

        entries = ordered_map(ring_entry, range(Q))
        for q in range(Q):
            ring_w[ell, q] = sv * wb[q]
            ring_quat[ell, q] = entries[q][0]
            ring_dens[ell, q] = entries[q][1]
        s_prev = sv
    disk.ring_w = ring_w
    disk.ring_quat = ring_quat
    disk.ring_dens = ring_dens

    # center by extrapolation from the two innermost rings
    rA = [{"quat": ring_quat[-1, q], "density": {"w": ring_dens[-1, q]}} for q in range(Q)]
    rB = [{"quat": ring_quat[-2, q], "density": {"w": ring_dens[-2, q]}} for q in range(Q)]
    center = _extrapolate_center(rA, rB, "w",
                                 float(np.mean(np.abs(ring_w[-1]))),
                                 float(np.mean(np.abs(ring_w[-2]))))
    disk.center_quat = center["quat"]
    disk.center_dens = center["density"]["w"]

    # release frames except boundary (kept for stitch checks)
    return disk


def _signed_area(coords) -> float:
    a, b, c = coords
    return 0.5 * ((b - a) * np.conj(c - a)).imag


def _emit_disk_faces(patch: PatchData, parity: int):
    """Translate the label triangulation into patch references, orienting
    every face positively in the w chart."""
    disk = patch.disks[parity]
    Q = len(disk.boundary)
    nr = disk.ring_w.shape[0]

    def translate(label):
        if label[0] == "B":
            rec = disk.boundary[label[1] % Q]
            return ("S", rec["dalpha"], rec["beta"], rec["i"], rec["row"])
        if label[0] == "D":
            return ("D", parity, label[1], label[2] % Q)
        return ("DC", parity, 0, 0)

    def coord(label):
        if label[0] == "B":
            return disk.boundary[label[1] % Q]["w"]
        if label[0] == "D":
            return disk.ring_w[label[1], label[2] % Q]
        return 0.0

    for tri in disk_face_labels(Q, nr):
        refs = [translate(lab) for lab in tri]
        if _signed_area([coord(lab) for lab in tri]) < 0:
            refs = [refs[0], refs[2], refs[1]]
        patch.faces_disk.append(tuple(refs))


# -- public entry points -----------------------------------------------------------


def build_patch(params: PotentialParams, m: int, k: int, resolution: int = 6,
                rtol: float = 1e-11, fit: bool = True) -> SurfaceMesh:
    data = build_patch_data(params, m, k, resolution, rtol, fit=fit)
    verts, dens, charts = [], [], []
    index = {}

    def add(key, rec, chart_name):
        if key not in index:
            index[key] = len(verts)
            verts.append(rec["quat"])
            dens.append(rec["density"][chart_name])
            charts.append((chart_name, rec["coord"]))
        return index[key]

    for (i, ell), rec in sorted(data.sector_vertices.items()):
        add(("S", i, ell), rec, rec["chart"])
    add(("O",), data.origin, "z")
    add(("I",), data.infinity, "u")

    faces = []
    for tri in data.faces_sector:
        idx = []
        ok = True
        for ref in tri:
            if ref[0] == "S":
                _, da, db, i, ell = ref
                if da != 0 or db != 0:
                    ok = False
                    break
                idx.append(index[("S", i, ell)])
            elif ref[0] == "O":
                idx.append(index[("O",)])
            else:
                idx.append(index[("I",)])
        if ok:
            faces.append(idx)

    mesh = SurfaceMesh(
        vertices=np.stack(verts), density=np.array(dens),
        faces=np.array(faces, dtype=int) if faces else np.zeros((0, 3), dtype=int),
        provenance={"m": m, "k": k, "t": params.t, "kind": "fundamental-patch",
                    "resolution": resolution},
        chart_points=charts)
    mesh.provenance["_patch"] = data
    return mesh


def replicate(patch: SurfaceMesh, m: int, k: int,
              stitch_tol: float | None = 1e-4) -> SurfaceMesh:
    data: PatchData = patch.provenance["_patch"]
    gens = data.generators
    if gens is None:
        if stitch_tol is None:
            # structural use (combinatorics only): identity motions
            gens = SymmetryGenerators(G1=np.eye(4), G2=np.eye(4),
                                      fit_residual=np.inf, commutator=0.0,
                                      snapped=False)
        else:
            gens = fit_generators(data.params, m, k)
    G1, G2 = gens.G1, gens.G2
    kp1 = k + 1
    mp1 = m + 1

    pow1 = [np.linalg.matrix_power(G1, a) for a in range(mp1)]
    pow2 = [np.linalg.matrix_power(G2, b) for b in range(kp1)]

    verts, dens, charts = [], [], []
    index = {}

    def add(key, quat, den, chart):
        if key not in index:
            index[key] = len(verts)
            verts.append(quat)
            dens.append(den)
            charts.append(chart)
        return index[key]

    # sector copies
    for a in range(mp1):
        for b in range(kp1):
            R = pow1[a] @ pow2[b]
            for (i, ell), rec in data.sector_vertices.items():
                add(("S", a, b, i, ell), R @ rec["quat"],
                    rec["density"][rec["chart"]], (rec["chart"], rec["coord"]))
        for key, rec, nm in ((("O",), data.origin, "z"), (("I",), data.infinity, "u")):
            for b in range(kp1):
                add((key[0], b), pow2[b] @ rec["quat"], rec["density"][nm],
                    (nm, rec["coord"]))

    # disks (one per puncture: alpha copies only)
    for a in range(mp1):
        R = pow1[a]
        for parity, disk in data.disks.items():
            nr, Q = disk.ring_w.shape
            for ell in range(nr):
                for q in range(Q):
                    add(("D", a, parity, ell, q), R @ disk.ring_quat[ell, q],
                        disk.ring_dens[ell, q], ("w", disk.ring_w[ell, q]))
            add(("DC", a, parity), R @ disk.center_quat, disk.center_dens,
                ("w", 0.0))

    faces = []

    def resolve_sector(ref, a, b):
        kind = ref[0]
        if kind == "S":
            _, da, db, i, ell = ref
            return index[("S", (a + da) % mp1, (b + db) % kp1, i, ell)]
        if kind == "O":
            return index[("O", b)]
        return index[("I", b)]

    for a in range(mp1):
        for b in range(kp1):
            for tri in data.faces_sector:
                faces.append([resolve_sector(ref, a, b) for ref in tri])
        for tri in data.faces_disk:
            idx = []
            for ref in tri:
                if ref[0] == "S":
                    _, da, beta, i, ell = ref
                    idx.append(index[("S", (a + da) % mp1, beta % kp1, i, ell)])
                elif ref[0] == "D":
                    _, parity, ell, q = ref
                    idx.append(index[("D", a, parity, ell, q)])
                else:
                    idx.append(index[("DC", a, ref[1])])
            faces.append(idx)

    vertices = np.stack(verts)
    faces = np.array(faces, dtype=int)

    # stitch gap: disk boundary frames against the replicated sector values
    gap = 0.0
    for parity, disk in data.disks.items():
        for rec in disk.boundary:
            key = ("S", rec["dalpha"] % mp1, rec["beta"] % kp1, rec["i"], rec["row"])
            target = verts[index[key]]
            gap = max(gap, float(np.linalg.norm(rec["quat"] - target)))
    # deck equivariance of the disk interior; the boundary of an even disk
    # descends one sheet per pass, an odd one ascends (inverse branch cycles)
    for parity, disk in data.disks.items():
        nr, Q = disk.ring_w.shape
        shift = (Q // kp1) * (1 if parity % 2 == 1 else -1)
        rolled = np.roll(disk.ring_quat, -shift, axis=1)
        moved = disk.ring_quat @ G2.T
        gap = max(gap, float(np.max(np.linalg.norm(moved - rolled, axis=2))))

    mesh = SurfaceMesh(
        vertices=vertices, density=np.array(dens), faces=faces,
        provenance={"m": m, "k": k, "t": data.params.t, "kind": "closed-surface",
                    "fit_residual": gens.fit_residual,
                    "commutator": gens.commutator,
                    "stitch_gap": gap},
        chart_points=charts)
    if stitch_tol is not None and gap > stitch_tol:
        from .geometry import SymmetryFitError

        raise SymmetryFitError(
            f"stitching gap {gap:.3e} above tolerance {stitch_tol:.1e}")
    return mesh


def disk_face_labels(Q: int, nr: int):
    """Disk triangulation in local labels: ("B", q) boundary ring,
    ("D", ell, q) interior rings, ("DC",) center."""
    out = []
    for q in range(Q):
        out.append((("B", q), ("B", q + 1), ("D", 0, (q + 1) % Q)))
        out.append((("B", q), ("D", 0, (q + 1) % Q), ("D", 0, q)))
        for ell in range(nr - 1):
            out.append((("D", ell, q), ("D", ell, (q + 1) % Q),
                        ("D", ell + 1, (q + 1) % Q)))
            out.append((("D", ell, q), ("D", ell + 1, (q + 1) % Q),
                        ("D", ell + 1, q)))
        out.append((("D", nr - 1, q), ("D", nr - 1, (q + 1) % Q), ("DC",)))
    return out


def _sector_face_info(data: PatchData, tri, m: int):
    """Chart name, chart coordinates and vertex records of a sector face."""
    info = []
    for ref in tri:
        kind = ref[0]
        if kind == "S":
            _, da, db, i, ell = ref
            rec = data.sector_vertices[(i, ell)]
            chart, coord = rec["chart"], rec["coord"]
            if da != 0:
                rot = np.exp(2j * np.pi * da / (m + 1))
                coord = coord * (rot if chart == "z" else np.conj(rot))
            info.append((chart, coord, rec))
        elif kind == "O":
            info.append(("z", 0.0, data.origin))
        else:
            info.append(("u", 0.0, data.infinity))
    chart = "u" if any(ch == "u" for ch, _, _ in info) else "z"
    coords, dens = [], []
    for ch, coord, rec in info:
        if ch != chart:
            coord = 1.0 / coord      # shared circle row R_out, z to u
        coords.append(coord)
        dens.append(rec["density"].get(chart, rec["density"].get(ch)))
    return chart, coords, dens


def _orient_sector_faces(data: PatchData, m: int):
    fixed = []
    for tri in data.faces_sector:
        _, coords, _ = _sector_face_info(data, tri, m)
        if _signed_area(coords) < 0:
            tri = (tri[0], tri[2], tri[1])
        fixed.append(tri)
    data.faces_sector = fixed


def quadrature_area(params: PotentialParams, m: int, k: int,
                    resolution: int = 6, rtol: float = 1e-11) -> float:
    """Composite quadrature of the conformal density over the fundamental
    pieces: (m+1)(k+1) sector copies plus (m+1) copies of each branch disk.

    Sector cells are polar rectangles integrated with their exact chart
    areas (triangle chords systematically under-cover curved cells); the
    density enters by corner means.  Disk cells are straight-edge quads in
    the w chart, where the shoelace area is already exact.
    """
    data = build_patch_data(params, m, k, resolution, rtol, fit=False,
                            side_sub=max(2, resolution // 2))
    n_ang, hc = data.n_ang, data.hc
    theta = data.theta
    rows = data.rows
    holes = _hole_columns(n_ang, hc, m)

    def vdens(i, ell, chart):
        rec = data.sector_vertices[(i % n_ang, ell)]
        return rec["density"].get(chart, next(iter(rec["density"].values())))

    total = 0.0
    # polar quads between consecutive rows (z below R_out, u beyond)
    for ell in range(len(rows) - 1):
        kind0, v0 = rows[ell]
        kind1, v1 = rows[ell + 1]
        if kind0 == "z" and kind1 == "z":
            chart, r0, r1 = "z", v0, v1
        else:
            chart = "u"
            r0 = v0 if kind0 == "u" else 1.0 / v0
            r1 = v1 if kind1 == "u" else 1.0 / v1
        band = (ell == data.row_lo)
        for i in range(n_ang):
            if band and i in holes:
                continue
            dth = theta(i + 1) - theta(i)
            if band:
                # radially subdivided: corner densities from the band ladder
                ladder_r = np.concatenate([[r0], data.band_radii, [r1]])
                ladder_d0 = np.concatenate([
                    [vdens(i, ell, chart)], data.band_dens[i % n_ang],
                    [vdens(i, ell + 1, chart)]])
                ladder_d1 = np.concatenate([
                    [vdens(i + 1, ell, chart)], data.band_dens[(i + 1) % n_ang],
                    [vdens(i + 1, ell + 1, chart)]])
                for jb in range(len(ladder_r) - 1):
                    area = 0.5 * abs(ladder_r[jb + 1] ** 2 - ladder_r[jb] ** 2) * dth
                    dens = 0.25 * (ladder_d0[jb] + ladder_d0[jb + 1]
                                   + ladder_d1[jb] + ladder_d1[jb + 1])
                    total += area * dens
                continue
            area = 0.5 * abs(r1 ** 2 - r0 ** 2) * dth
            dens = 0.25 * (vdens(i, ell, chart) + vdens(i + 1, ell, chart)
                           + vdens(i, ell + 1, chart) + vdens(i + 1, ell + 1, chart))
            total += area * dens
    # caps: origin disc sector and infinity disc sector
    r_first = rows[0][1]
    u_last = rows[-1][1]
    for i in range(n_ang):
        dth = theta(i + 1) - theta(i)
        area0 = 0.5 * r_first ** 2 * dth
        d0 = (data.origin["density"]["z"]
              + vdens(i, 0, "z") + vdens(i + 1, 0, "z")) / 3.0
        total += area0 * d0
        area_inf = 0.5 * u_last ** 2 * dth
        di = (data.infinity["density"]["u"]
              + vdens(i, len(rows) - 1, "u") + vdens(i + 1, len(rows) - 1, "u")) / 3.0
        total += area_inf * di
    total *= (m + 1) * (k + 1)

    disk_total = 0.0
    for parity, disk in data.disks.items():
        Q = len(disk.boundary)
        nr = disk.ring_w.shape[0]

        def coord_dens(label):
            if label[0] == "B":
                rec = disk.boundary[label[1] % Q]
                return rec["w"], rec["dens_w"]
            if label[0] == "D":
                return disk.ring_w[label[1], label[2] % Q], \
                    disk.ring_dens[label[1], label[2] % Q]
            return 0.0, disk.center_dens

        for tri in disk_face_labels(Q, nr):
            pairs = [coord_dens(lab) for lab in tri]
            coords = [p[0] for p in pairs]
            dens = [p[1] for p in pairs]
            disk_total += abs(_signed_area(coords)) * np.mean(dens)
    total += disk_total * (m + 1)
    return float(total)
