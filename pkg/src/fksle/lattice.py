"""Lattice domains on mesh*Z^2, boundary walks, marks and the medial graph.

Sites carry integer coordinates; the physical point is coordinate * mesh.
Medial objects use doubled coordinates: a site (i, j) sits at (2i, 2j), the
midpoint of an edge at the sum of its endpoints and a plaquette centre at
(2i+1, 2j+1).
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class DomainError(ValueError):
    pass


MARK_NAMES = ("a", "b", "c")


@dataclass(frozen=True)
class BoundaryArc:
    start: str
    end: str
    positions: tuple   # indices into the boundary cycle, counterclockwise
    sites: tuple       # site indices


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    mesh: float
    sites: np.ndarray           # (N, 2) integer coordinates
    edges: np.ndarray           # (E, 2) site indices, u < v
    boundary_cycle: np.ndarray  # site indices, counterclockwise
    marks: dict                 # name -> position in boundary_cycle
    shape: dict = field(default_factory=lambda: {"kind": "custom"})

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def wired_only(self):
        return self.marks["a"] == self.marks["b"]

    def mark_site(self, name):
        return int(self.boundary_cycle[self.marks[name]])

    def points(self):
        return self.sites * self.mesh

    def index_grid(self):
        """(grid, origin): grid[x - ox, y - oy] = site index or -1."""
        lo = self.sites.min(axis=0)
        hi = self.sites.max(axis=0)
        grid = -np.ones(hi - lo + 1, dtype=np.int64)
        grid[self.sites[:, 0] - lo[0], self.sites[:, 1] - lo[1]] = np.arange(self.n_sites)
        return grid, lo

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n_sites)

    def boundary_edge_mask(self):
        """Edges joining consecutive entries of the boundary walk."""
        cyc = self.boundary_cycle
        nxt = np.roll(cyc, -1)
        keys = set(zip(np.minimum(cyc, nxt).tolist(), np.maximum(cyc, nxt).tolist()))
        return np.array([(int(u), int(v)) in keys for u, v in self.edges], dtype=bool)

    def to_json(self):
        return {
            "mesh": self.mesh,
            "vertices": self.sites.tolist(),
            "boundary_cycle": self.boundary_cycle.tolist(),
            "marks": {k: int(v) for k, v in self.marks.items()},
            "shape": self.shape,
        }

    def digest(self):
        s = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(s.encode()).hexdigest()[:16]


def _induced_edges(sites):
    lookup = {(int(x), int(y)): k for k, (x, y) in enumerate(sites)}
    edges = []
    for k, (x, y) in enumerate(sites):
        for nb in ((x + 1, y), (x, y + 1)):
            j = lookup.get((int(nb[0]), int(nb[1])))
            if j is not None:
                edges.append((min(k, j), max(k, j)))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _components(n, edges):
    if len(edges) == 0:
        return n, np.arange(n)
    g = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(g, directed=False)


def _plaquettes(sites):
    s = set(map(tuple, sites.tolist()))
    return sum(1 for (x, y) in s if (x + 1, y) in s and (x, y + 1) in s and (x + 1, y + 1) in s)


def boundary_walk(sites):
    """Counterclockwise walk around the outer face (exterior on the right)."""
    s = set(map(tuple, sites.tolist()))
    lookup = {p: k for k, p in enumerate(map(tuple, sites.tolist()))}
    start = min(s, key=lambda p: (p[1], p[0]))
    if len(s) == 1:
        return np.array([lookup[start]])
    walk = []
    cur, d = start, (0, -1)
    first_move = None
    for _ in range(4 * len(s) + 8):
        # prefer right turn, then straight, left, back
        for nd in ((d[1], -d[0]), d, (-d[1], d[0]), (-d[0], -d[1])):
            nxt = (cur[0] + nd[0], cur[1] + nd[1])
            if nxt in s:
                break
        if cur == start and first_move is not None and nd == first_move:
            break
        if first_move is None:
            first_move = nd
        walk.append(lookup[cur])
        cur, d = nxt, nd
    return np.array(walk, dtype=np.int64)


def _snap(domain_pts, cycle, target):
    d2 = ((domain_pts[cycle] - np.asarray(target, dtype=float)) ** 2).sum(axis=1)
    return int(np.argmin(d2))  # first minimum = smallest cycle index


def _finish(sites, mesh, mark_points, shape):
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((sites[:, 1], sites[:, 0]))
    sites = sites[order]
    edges = _induced_edges(sites)
    if len(edges) == 0:
        raise DomainError("domain has an empty edge set")
    ncomp, _ = _components(len(sites), edges)
    if ncomp != 1:
        raise DomainError("edge set does not induce a connected graph")
    if len(sites) - len(edges) + _plaquettes(sites) != 1:
        raise DomainError("domain is not simply connected")
    cycle = boundary_walk(sites)
    pts = sites * mesh
    marks = {}
    for name in MARK_NAMES:
        p = mark_points.get(name)
        if p is None:
            continue
        marks[name] = _snap(pts, cycle, p)
    if "a" not in marks:
        raise DomainError("mark a is required")
    if "b" not in marks:
        marks["b"] = marks["a"]
    elif marks["b"] == marks["a"]:
        raise DomainError("marks a and b snap to the same boundary site; mesh too coarse")
    if "c" in marks:
        if marks["c"] in (marks["a"], marks["b"]):
            raise DomainError("mark c collides with another mark; mesh too coarse")
        n = len(cycle)
        if marks["b"] != marks["a"]:
            if (marks["b"] - marks["a"]) % n > (marks["c"] - marks["a"]) % n:
                raise DomainError("marks are not in counterclockwise order a, b, c")
    else:
        marks["c"] = marks["b"]
    return LatticeDomain(float(mesh), sites, edges, cycle, marks, shape)


def build_rectangle(width, height, mesh, marks=None):
    """[0, width] x [0, height] on mesh*Z^2.

    marks: name -> (x, y). Defaults to a at the bottom middle, b at the top
    middle and c at the middle of the left side. Pass b=None for a == b.
    """
    if mesh <= 0:
        raise DomainError("mesh must be positive")
    if width < mesh or height < mesh:
        raise DomainError("rectangle smaller than one mesh step")
    nx = int(np.floor(width / mesh + 1e-9)) + 1
    ny = int(np.floor(height / mesh + 1e-9)) + 1
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    sites = np.column_stack([xs.ravel(), ys.ravel()])
    w, h = (nx - 1) * mesh, (ny - 1) * mesh
    if marks is None:
        marks = {"a": (w / 2, 0.0), "b": (w / 2, h), "c": (0.0, h / 2)}
    shape = {"kind": "rectangle", "width": w, "height": h, "origin": [0.0, 0.0]}
    return _finish(sites, mesh, dict(marks), shape)


def _prune(sites):
    """Drop sites that are not a corner of any plaquette, then keep the largest component."""
    s = set(map(tuple, sites.tolist()))
    keep = set()
    for (x, y) in s:
        if (x + 1, y) in s and (x, y + 1) in s and (x + 1, y + 1) in s:
            keep.update({(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)})
    out = np.array(sorted(keep), dtype=np.int64).reshape(-1, 2)
    ncomp, lab = _components(len(out), _induced_edges(out))
    if ncomp > 1:
        out = out[lab == np.argmax(np.bincount(lab))]
    return out


def build_disk(radius, mesh, marks=None, prune=False):
    """Largest component of {v in mesh*Z^2 : |v| <= radius}.

    marks: name -> angle (radians). Defaults to a = -pi/2 and c = pi/2 with
    b coinciding with a (fully wired case). prune=True removes pendant sites
    and other sites touching no plaquette, so that every boundary site has a
    face on both sides of the boundary walk.
    """
    if mesh <= 0 or radius <= 0:
        raise DomainError("radius and mesh must be positive")
    r = int(np.floor(radius / mesh + 1e-9))
    xs, ys = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    keep = (xs**2 + ys**2) * mesh**2 <= radius**2 * (1 + 1e-12)
    sites = np.column_stack([xs[keep], ys[keep]])
    edges = _induced_edges(sites)
    ncomp, lab = _components(len(sites), edges)
    if ncomp > 1:
        big = np.argmax(np.bincount(lab))
        sites = sites[lab == big]
    if prune:
        sites = _prune(sites)
        if len(sites) == 0:
            raise DomainError("no plaquette inside the disk")
    if marks is None:
        marks = {"a": -np.pi / 2, "c": np.pi / 2}
    pts = {k: (radius * np.cos(t), radius * np.sin(t)) for k, t in marks.items() if t is not None}
    shape = {"kind": "disk", "radius": float(radius), "center": [0.0, 0.0]}
    return _finish(sites, mesh, pts, shape)


def build_from_sites(sites, mesh, marks):
    """Custom domain from integer coordinates; marks are physical points."""
    return _finish(sites, mesh, dict(marks), {"kind": "custom"})


def domain_from_json(obj):
    sites = np.asarray(obj["vertices"], dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((sites[:, 1], sites[:, 0]))
    if not np.array_equal(order, np.arange(len(sites))):
        raise DomainError("vertices must be sorted lexicographically")
    edges = _induced_edges(sites)
    cycle = np.asarray(obj["boundary_cycle"], dtype=np.int64)
    if not np.array_equal(cycle, boundary_walk(sites)):
        raise DomainError("boundary_cycle does not match the vertex set")
    marks = {k: int(v) for k, v in obj["marks"].items()}
    return LatticeDomain(float(obj["mesh"]), sites, edges, cycle, marks, obj.get("shape", {"kind": "custom"}))


def save_domain(domain, path):
    with open(path, "w") as fh:
        json.dump(domain.to_json(), fh)


def load_domain(path):
    with open(path) as fh:
        return domain_from_json(json.load(fh))


def arc_between(domain, start, end):
    """Counterclockwise boundary arc from mark `start` to mark `end`, endpoints included."""
    n = len(domain.boundary_cycle)
    i, j = domain.marks[start], domain.marks[end]
    if i == j:
        # coincident marks: the arc in mark order is empty, the reverse one is the whole cycle
        if MARK_NAMES.index(start) < MARK_NAMES.index(end):
            pos = ()
        else:
            pos = tuple((i + k) % n for k in range(n))
    else:
        pos = tuple((i + k) % n for k in range((j - i) % n + 1))
    sites = tuple(int(domain.boundary_cycle[p]) for p in pos)
    return BoundaryArc(start, end, pos, sites)


@dataclass(frozen=True, eq=False)
class MedialGraph:
    vertices: np.ndarray      # (M, 2) doubled coordinates, one per primal edge
    edges: np.ndarray         # (K, 2) vertex indices
    black_faces: np.ndarray   # doubled coordinates of primal sites
    white_faces: np.ndarray   # doubled coordinates of dual sites

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=len(self.vertices))


def medial_of(domain):
    s = domain.sites
    mids = s[domain.edges[:, 0]] + s[domain.edges[:, 1]]
    lookup = {(int(x), int(y)): k for k, (x, y) in enumerate(mids)}
    medges = []
    for k, (x, y) in enumerate(mids):
        for dx, dy in ((1, 1), (1, -1)):
            j = lookup.get((int(x) + dx, int(y) + dy))
            if j is not None:
                medges.append((k, j))
    medges = np.array(sorted((min(u, v), max(u, v)) for u, v in medges), dtype=np.int64).reshape(-1, 2)
    white = set()
    for x, y in mids:
        if x % 2:   # horizontal edge: dual sites above and below
            white.update({(int(x), int(y) + 1), (int(x), int(y) - 1)})
        else:
            white.update({(int(x) + 1, int(y)), (int(x) - 1, int(y))})
    white = np.array(sorted(white), dtype=np.int64).reshape(-1, 2)
    return MedialGraph(mids.astype(np.int64), medges, 2 * s, white)
