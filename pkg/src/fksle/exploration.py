"""Loop representation on the medial lattice and exploration paths.

Medial vertices live at edge midpoints in doubled coordinates. A walk
arriving at a midpoint with diagonal velocity (dx, dy) turns by +-pi/2 so as
not to cross the open primal edge or the open dual edge there: it keeps its
side of the horizontal line when the horizontal edge is open (or the vertical
edge closed), and its side of the vertical line otherwise. Walks keep primal
sites on their left.
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .fk import BoundarySpec
from .lattice import arc_between

PAD = 2
DIRS = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=np.int64)


class ExplorationError(RuntimeError):
    pass


@dataclass(eq=False)
class LoopRepresentation:
    kind: str                    # dobrushin | wired
    origin: np.ndarray           # doubled coordinate of array index (0, 0)
    estate: np.ndarray           # int8 edge state at midpoints (1 open); zero elsewhere
    filled: np.ndarray           # bool at plaquette centres inside the domain
    start: tuple                 # a-diamond (array coordinates)
    start_dir: tuple
    end: tuple                   # b-diamond for dobrushin, None when a == b
    loops: list = field(default_factory=list)   # arrays of absolute doubled coords
    interface: np.ndarray | None = None
    domain: object = None

    def to_abs(self, pts):
        return np.asarray(pts, dtype=np.int64) + self.origin

    def to_arr(self, p):
        return (int(p[0] - self.origin[0]), int(p[1] - self.origin[1]))


@dataclass(eq=False)
class ExplorationPath:
    points: np.ndarray           # (n, 2) absolute doubled coordinates
    start: tuple
    target: tuple
    cuts: list = field(default_factory=list)     # steps at which a new loop was cut open
    hit_log: list = field(default_factory=list)  # steps adjacent to the target arc
    mesh: float = 1.0

    def complex_points(self):
        return (self.points[:, 0] + 1j * self.points[:, 1]) * (self.mesh / 2)

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _rule(estate, x, y, dx, dy):
    horiz_edge = (x % 2) == 1
    op = estate[x, y] == 1
    if horiz_edge == op:
        return dx, -dy
    return -dx, dy


@njit(cache=True)
def _dual_face(x, y, dx, dy):
    if x % 2 == 1:
        return x, y + dy
    return x + dx, y


@njit(cache=True)
def _interior(filled, x, y, dx, dy):
    fx, fy = _dual_face(x, y, dx, dy)
    if fx < 0 or fy < 0 or fx >= filled.shape[0] or fy >= filled.shape[1]:
        return False
    return filled[fx, fy]


@njit(cache=True)
def _target_side(estate, filled, trav, seen, gen, qa, qb, ax, ay, bx, by, tx, ty):
    """Flood the untraversed interior medial edges from A and from B, interleaved.

    Returns 0 if A reaches the target or meets B, 1 if A is sealed off
    without the target.
    """
    sa = 2 * gen
    sb = 2 * gen + 1
    if ax == tx and ay == ty:
        return 0
    ha = 0
    ta = 0
    hb = 0
    tb = 0
    qa[ta, 0] = ax
    qa[ta, 1] = ay
    ta += 1
    seen[ax, ay] = sa
    qb[tb, 0] = bx
    qb[tb, 1] = by
    tb += 1
    seen[bx, by] = sb
    b_alive = True
    b_target = bx == tx and by == ty
    while True:
        if ha == ta:
            # A is sealed off without the target
            return 1
        vx = qa[ha, 0]
        vy = qa[ha, 1]
        ha += 1
        for k in range(4):
            dx = 1 if k == 0 or k == 3 else -1
            dy = 1 if k < 2 else -1
            if not _interior(filled, vx, vy, dx, dy):
                continue
            if trav[2 * vx + dx, 2 * vy + dy]:
                continue
            wx = vx + dx
            wy = vy + dy
            s = seen[wx, wy]
            if s == sb:
                return 0
            if s != sa:
                if wx == tx and wy == ty:
                    return 0
                seen[wx, wy] = sa
                qa[ta, 0] = wx
                qa[ta, 1] = wy
                ta += 1
        if b_alive:
            if hb == tb:
                b_alive = False
                if not b_target:
                    return 0
                continue
            vx = qb[hb, 0]
            vy = qb[hb, 1]
            hb += 1
            for k in range(4):
                dx = 1 if k == 0 or k == 3 else -1
                dy = 1 if k < 2 else -1
                if not _interior(filled, vx, vy, dx, dy):
                    continue
                if trav[2 * vx + dx, 2 * vy + dy]:
                    continue
                wx = vx + dx
                wy = vy + dy
                s = seen[wx, wy]
                if s == sa:
                    return 0
                if s != sb:
                    if wx == tx and wy == ty:
                        b_target = True
                    seen[wx, wy] = sb
                    qb[tb, 0] = wx
                    qb[tb, 1] = wy
                    tb += 1


@njit(cache=True)
def _explore(estate, filled, sx, sy, d0x, d0y, tx, ty, switching, max_steps, pts, cuts):
    """Walk from (sx, sy) leaving in direction (d0x, d0y) until (tx, ty).

    Returns (n_points, n_cuts, status). status 0 ok, 1 step limit,
    2 stuck at a revisited vertex, 3 inconsistent flood.
    """
    nx, ny = estate.shape
    trav = np.zeros((2 * nx + 1, 2 * ny + 1), dtype=np.bool_)
    visits = np.zeros((nx, ny), dtype=np.int8)
    seen = np.zeros((nx, ny), dtype=np.int32)
    qa = np.empty((nx * ny, 2), dtype=np.int64)
    qb = np.empty((nx * ny, 2), dtype=np.int64)
    # virtual arrival edge, so the start vertex behaves like any other visited vertex
    if estate[sx, sy] == 1 and (sx % 2) == 1 or estate[sx, sy] == 0 and (sx % 2) == 0:
        ix, iy = d0x, -d0y
    else:
        ix, iy = -d0x, d0y
    trav[2 * sx - ix, 2 * sy - iy] = True
    visits[sx, sy] = 1
    n = 0
    nc = 0
    pts[n, 0] = sx
    pts[n, 1] = sy
    n += 1
    x, y, dx, dy = sx, sy, d0x, d0y
    trav[2 * x + dx, 2 * y + dy] = True
    x += dx
    y += dy
    gen = 0
    while True:
        pts[n, 0] = x
        pts[n, 1] = y
        n += 1
        # an interface reaching the b-diamond from outside the domain has wrapped the
        # last free-arc site and is sent back in; it ends on an arrival from inside
        # (or on its return to the start when the two diamonds coincide)
        if x == tx and y == ty and (switching or (x == sx and y == sy)
                                    or _interior(filled, x - dx, y - dy, dx, dy)):
            return n, nc, 0
        if n >= max_steps:
            return n, nc, 1
        if visits[x, y] >= 1:
            found = 0
            for k in range(4):
                ex = 1 if k == 0 or k == 3 else -1
                ey = 1 if k < 2 else -1
                if not trav[2 * x + ex, 2 * y + ey]:
                    found += 1
                    ox, oy = ex, ey
            if found != 1:
                return n, nc, 2
            dx, dy = ox, oy
            visits[x, y] = 2
        else:
            visits[x, y] = 1
            lx, ly = _rule(estate, x, y, dx, dy)
            if switching and _interior(filled, x, y, lx, ly):
                gen += 1
                trav[2 * x + lx, 2 * y + ly] = True
                side = _target_side(estate, filled, trav, seen, gen, qa, qb, x + lx, y + ly, x, y, tx, ty)
                trav[2 * x + lx, 2 * y + ly] = False
                if side < 0:
                    return n, nc, 3
                if side == 1:
                    # the other turn: reflect the other velocity component
                    if lx == dx:
                        lx, ly = -dx, dy
                    else:
                        lx, ly = dx, -dy
                    cuts[nc] = n - 1
                    nc += 1
            dx, dy = lx, ly
        trav[2 * x + dx, 2 * y + dy] = True
        x += dx
        y += dy


@njit(cache=True)
def _orbit(estate, x, y, dx, dy, trav, out, max_len):
    """Follow the loop rule from the directed edge (x,y)->(x+dx,y+dy) until it closes."""
    x0, y0, dx0, dy0 = x, y, dx, dy
    n = 0
    while True:
        out[n, 0] = x
        out[n, 1] = y
        n += 1
        trav[2 * x + dx, 2 * y + dy] = True
        x += dx
        y += dy
        dx, dy = _rule(estate, x, y, dx, dy)
        if x == x0 and y == y0 and dx == dx0 and dy == dy0:
            return n
        if n >= max_len:
            return -1
        if x <= 0 or y <= 0 or x >= estate.shape[0] - 1 or y >= estate.shape[1] - 1:
            return -2


# ---------------------------------------------------------------- construction

def _arrays(domain, bits):
    lo = domain.sites.min(axis=0) - PAD
    hi = domain.sites.max(axis=0) + PAD
    shape = tuple(2 * (hi - lo) + 1)
    estate = np.zeros(shape, dtype=np.int8)
    s = domain.sites - lo
    mids = 2 * s[domain.edges[:, 0]] + (s[domain.edges[:, 1]] - s[domain.edges[:, 0]])
    estate[mids[:, 0], mids[:, 1]] = np.asarray(bits, dtype=np.int8)
    filled = np.zeros(shape, dtype=np.bool_)
    occ = np.zeros(tuple(hi - lo + 1), dtype=bool)
    occ[s[:, 0], s[:, 1]] = True
    pl = occ[:-1, :-1] & occ[1:, :-1] & occ[:-1, 1:] & occ[1:, 1:]
    px, py = np.nonzero(pl)
    filled[2 * px + 1, 2 * py + 1] = True
    return 2 * lo, estate, filled, mids


def _mid(domain, lo2, i, j):
    return tuple(int(v) for v in (domain.sites[i] + domain.sites[j]) - lo2)


def _left_face(m, d):
    f = (m[0] + d[0], m[1])
    g = (m[0], m[1] + d[1])
    return g if d[0] * d[1] > 0 else f


def _start_direction(domain, lo2, estate, filled, m, site):
    face = tuple(int(v) for v in 2 * domain.sites[site] - lo2)
    best = None
    for d in DIRS:
        d = (int(d[0]), int(d[1]))
        if _left_face(m, d) != face:
            continue
        inside = bool(_interior(filled, m[0], m[1], d[0], d[1]))
        if best is None or (inside and not best[1]):
            best = (d, inside)
    if best is None:
        raise ExplorationError("no admissible start direction at the a-diamond")
    return best[0]


def _edge_index(domain):
    return {(int(u), int(v)): k for k, (u, v) in enumerate(domain.edges)}


def loops_from(config, domain, bc):
    """Loop representation of `config` with the boundary edges fixed by `bc`.

    dobrushin: arc b->a open, arc a->b closed, interface from a-diamond to b-diamond.
    wired (or dobrushin with a == b): every boundary edge open except the one
    between a and its counterclockwise successor, which is cut.
    """
    if isinstance(bc, BoundarySpec):
        kind = bc.kind
    else:
        kind = str(bc)
    if kind not in ("dobrushin", "wired"):
        raise ValueError("loop representation needs dobrushin or wired boundary conditions")
    bits = np.array(config.bits if hasattr(config, "bits") else config, dtype=bool)
    ek = _edge_index(domain)
    cyc = domain.boundary_cycle
    n = len(cyc)
    pa = domain.marks["a"]
    sa, san = int(cyc[pa]), int(cyc[(pa + 1) % n])
    cut_key = (min(sa, san), max(sa, san))
    if kind == "wired" or domain.wired_only:
        kind = "wired"
        for i in range(n):
            u, v = int(cyc[i]), int(cyc[(i + 1) % n])
            k = ek.get((min(u, v), max(u, v)))
            if k is not None:
                bits[k] = True
        bits[ek[cut_key]] = False
    else:
        free = arc_between(domain, "a", "b").sites
        wired = arc_between(domain, "b", "a").sites
        for seq, val in ((free, False), (wired, True)):
            for u, v in zip(seq[:-1], seq[1:]):
                k = ek.get((min(u, v), max(u, v)))
                if k is not None:
                    bits[k] = val
    lo2, estate, filled, _ = _arrays(domain, bits)
    start = _mid(domain, lo2, sa, san)
    d0 = _start_direction(domain, lo2, estate, filled, start, sa)
    end = None
    if kind == "dobrushin":
        pb = domain.marks["b"]
        end = _mid(domain, lo2, int(cyc[(pb - 1) % n]), int(cyc[pb]))
    rep = LoopRepresentation(kind, lo2, estate, filled, start, d0, end, domain=domain)
    _trace_loops(rep)
    return rep


def _trace_loops(rep):
    estate = rep.estate
    nx, ny = estate.shape
    trav = np.zeros((2 * nx + 1, 2 * ny + 1), dtype=np.bool_)
    buf = np.empty((4 * nx * ny, 2), dtype=np.int64)
    if rep.kind == "dobrushin":
        path = _run(rep, rep.end, switching=False)
        rep.interface = rep.to_abs(path[0])
        for (x, y), (x2, y2) in zip(path[0][:-1], path[0][1:]):
            trav[x + x2, y + y2] = True
    fx, fy = np.nonzero(rep.filled)
    for cx, cy in zip(fx.tolist(), fy.tolist()):
        for m, d in _plaquette_edges(cx, cy):
            kx, ky = 2 * m[0] + d[0], 2 * m[1] + d[1]
            if trav[kx, ky]:
                continue
            k = _orbit(estate, m[0], m[1], d[0], d[1], trav, buf, len(buf))
            if k < 0:
                raise ExplorationError("loop rule orbit failed to close")
            rep.loops.append(rep.to_abs(buf[:k].copy()))


def _plaquette_edges(cx, cy):
    # medial edges whose dual face is the plaquette centre (cx, cy)
    out = []
    for m in ((cx + 1, cy), (cx - 1, cy)):          # vertical-edge midpoints
        for dy in (1, -1):
            d = (cx - m[0], dy)
            out.append((m, d))
    return out


def _run(rep, target, switching, max_steps=None):
    nx, ny = rep.estate.shape
    if max_steps is None:
        max_steps = 2 * nx * ny + 16
    pts = np.empty((max_steps + 1, 2), dtype=np.int64)
    cuts = np.empty(max_steps + 1, dtype=np.int64)
    n, nc, status = _explore(rep.estate, rep.filled, rep.start[0], rep.start[1], rep.start_dir[0],
                             rep.start_dir[1], target[0], target[1], switching, max_steps, pts, cuts)
    if status != 0:
        msg = {1: "step limit reached", 2: "stuck at a revisited vertex", 3: "inconsistent flood fill"}[status]
        raise ExplorationError(f"{msg} after {n} steps at {tuple(rep.to_abs(pts[n - 1]))}")
    return pts[:n].copy(), cuts[:nc].tolist()


def explore_dobrushin(rep):
    if rep.interface is None:
        raise ValueError("representation has no interface")
    return _finish(rep, rep.interface, rep.to_abs([rep.end])[0], [])


def explore_wired(rep, domain=None, a=None, target="c"):
    """Clockwise loop-cutting exploration from the a-diamond to the target diamond.

    target: a mark name ('c' or 'b') or absolute doubled coordinates.
    """
    domain = domain or rep.domain
    if rep.kind != "wired":
        raise ValueError("loop-cutting exploration needs the wired representation")
    if isinstance(target, str):
        cyc = domain.boundary_cycle
        n = len(cyc)
        p = domain.marks[target]
        if target == "b" and not domain.wired_only:
            t = _mid(domain, rep.origin, int(cyc[(p - 1) % n]), int(cyc[p]))
        else:
            t = _mid(domain, rep.origin, int(cyc[p]), int(cyc[(p + 1) % n]))
    else:
        t = rep.to_arr(target)
    pts, cuts = _run(rep, t, switching=True)
    return _finish(rep, rep.to_abs(pts), rep.to_abs([t])[0], cuts)


def _finish(rep, pts, target, cuts):
    dom = rep.domain
    path = ExplorationPath(np.asarray(pts), tuple(int(v) for v in pts[0]), tuple(int(v) for v in target),
                           list(cuts), [], dom.mesh if dom is not None else 1.0)
    if dom is not None:
        arc = "bc" if not dom.wired_only else "ac"
        path.hit_log = boundary_hits(path, dom, arc)
    return path


def boundary_hits(path, domain, arc="bc"):
    """Steps at which the path sits on a midpoint of an edge touching the arc."""
    if isinstance(arc, str):
        arc = arc_between(domain, arc[0], arc[1])
    s2 = 2 * domain.sites[np.array(arc.sites, dtype=np.int64)] if len(arc.sites) else np.zeros((0, 2), int)
    keys = set(map(tuple, s2.tolist()))
    pts = path.points
    horiz = (pts[:, 0] % 2) == 1
    e1 = np.where(horiz[:, None], pts - [1, 0], pts - [0, 1])
    e2 = np.where(horiz[:, None], pts + [1, 0], pts + [0, 1])
    return [i for i in range(len(pts)) if tuple(e1[i]) in keys or tuple(e2[i]) in keys]


def edge_faces(m, d):
    """(left, right) faces of the medial edge leaving m in direction d."""
    f = (m[0] + d[0], m[1])
    g = (m[0], m[1] + d[1])
    return (g, f) if d[0] * d[1] > 0 else (f, g)
