"""Random-cluster (FK) measures on lattice domains.

Sampling uses the Edwards-Sokal coupling (Swendsen-Wang sweeps). Boundary
wiring is applied by identifying sites into a single node before any bond
is unioned.
"""
from dataclasses import dataclass, field, asdict
from decimal import Decimal, getcontext
from itertools import product

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import arc_between
from .rng import stream


def critical_p(q):
    """Self-dual point sqrt(q) / (1 + sqrt(q))."""
    if q < 1:
        raise ValueError("q must be >= 1")
    getcontext().prec = 40
    s = Decimal(q).sqrt()
    return float(s / (1 + s))


P_C2 = critical_p(2)


@dataclass(frozen=True)
class ModelParams:
    p: float = P_C2
    q: float = 2.0
    seed: int = 0
    warmup: int | None = None   # SW sweeps; None -> default_warmup(domain)
    thin: int = 5               # sweeps between returned samples

    def as_dict(self):
        return asdict(self)


def default_warmup(domain):
    return max(100, 10 * int(np.sqrt(domain.n_sites)))


@dataclass(frozen=True)
class BoundarySpec:
    kind: str                  # free | wired | dobrushin | partition
    groups: tuple = ()         # partition only: tuples of site indices

    def __post_init__(self):
        if self.kind not in ("free", "wired", "dobrushin", "partition"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")

    def as_dict(self):
        return {"kind": self.kind, "groups": [list(g) for g in self.groups]}

    def resolve(self, domain):
        """node_of[site] after identifications, and per-edge fixed state (-1 free, 0 closed, 1 open)."""
        n = domain.n_sites
        node_of = np.arange(n)
        fixed = -np.ones(domain.n_edges, dtype=np.int8)
        if self.kind == "free":
            return node_of, fixed
        if self.kind == "wired":
            groups = [np.unique(domain.boundary_cycle)]
        elif self.kind == "partition":
            groups = [np.asarray(g, dtype=np.int64) for g in self.groups]
        else:
            wired = arc_between(domain, "b", "a")
            groups = [np.unique(np.array(wired.sites, dtype=np.int64))]
            if not domain.wired_only:
                ekey = {(int(u), int(v)): k for k, (u, v) in enumerate(domain.edges)}
                free = arc_between(domain, "a", "b").sites
                for s, t in zip(free[:-1], free[1:]):
                    k = ekey.get((min(s, t), max(s, t)))
                    if k is not None:
                        fixed[k] = 0
                for s, t in zip(wired.sites[:-1], wired.sites[1:]):
                    k = ekey.get((min(s, t), max(s, t)))
                    if k is not None:
                        fixed[k] = 1
        for g in groups:
            if len(g):
                node_of[g] = g.min()
        # compress to 0..m-1
        _, node_of = np.unique(node_of, return_inverse=True)
        return node_of.astype(np.int64), fixed


FREE = BoundarySpec("free")
WIRED = BoundarySpec("wired")
DOBRUSHIN = BoundarySpec("dobrushin")


def partition(*groups):
    return BoundarySpec("partition", tuple(tuple(int(x) for x in g) for g in groups))


@dataclass(eq=False)
class EdgeConfig:
    bits: np.ndarray               # open = True, one per primal edge
    meta: dict = field(default_factory=dict)

    @property
    def dual(self):
        return ~self.bits

    def n_open(self):
        return int(self.bits.sum())


def _clusters(n_nodes, eu, ev, open_mask):
    if not open_mask.any():
        return n_nodes, np.arange(n_nodes)
    g = coo_matrix((np.ones(int(open_mask.sum())), (eu[open_mask], ev[open_mask])), shape=(n_nodes, n_nodes))
    return connected_components(g, directed=False)


def weight(domain, config, bc, params):
    """p^o (1-p)^c q^k with k counted after the boundary identifications."""
    bits = np.asarray(config.bits if isinstance(config, EdgeConfig) else config, dtype=bool)
    if bits.shape != (domain.n_edges,):
        raise ValueError("configuration does not match the edge set")
    node_of, fixed = bc.resolve(domain)
    if np.any((fixed == 0) & bits) or np.any((fixed == 1) & ~bits):
        return 0.0
    o = int(bits.sum())
    c = len(bits) - o
    k, _ = _clusters(node_of.max() + 1, node_of[domain.edges[:, 0]], node_of[domain.edges[:, 1]], bits)
    return params.p**o * (1 - params.p) ** c * params.q**k


def connected(domain, config, bc, A, B):
    """True iff an open path, with boundary identifications, joins A to B."""
    bits = np.asarray(config.bits if isinstance(config, EdgeConfig) else config, dtype=bool)
    node_of, _ = bc.resolve(domain)
    _, lab = _clusters(node_of.max() + 1, node_of[domain.edges[:, 0]], node_of[domain.edges[:, 1]], bits)
    la = set(lab[node_of[np.asarray(list(A), dtype=np.int64)]].tolist())
    lb = lab[node_of[np.asarray(list(B), dtype=np.int64)]]
    return any(x in la for x in lb.tolist())


def exact_law(domain, bc, params, max_free=20):
    """Enumerate every configuration compatible with bc.

    Returns (configs, probs) with configs a boolean (K, E) array.
    """
    _, fixed = bc.resolve(domain)
    free = np.flatnonzero(fixed < 0)
    if len(free) > max_free:
        raise ValueError("too many free edges to enumerate")
    configs = []
    w = []
    for states in product((False, True), repeat=len(free)):
        bits = fixed == 1
        bits[free] = states
        configs.append(bits)
        w.append(weight(domain, bits, bc, params))
    w = np.array(w)
    return np.array(configs, dtype=bool).reshape(-1, domain.n_edges), w / w.sum()


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def _sw_sweep(eu, ev, fixed, spins, p, q, u_edge, u_spin, bonds, parent):
    n = spins.size
    for i in range(n):
        parent[i] = i
    n_open = 0
    for e in range(eu.size):
        a = eu[e]
        b = ev[e]
        if fixed[e] >= 0:
            op = fixed[e] == 1
        else:
            op = spins[a] == spins[b] and u_edge[e] < p
        bonds[e] = op
        if op:
            n_open += 1
            ra = _find(parent, a)
            rb = _find(parent, b)
            if ra != rb:
                parent[ra] = rb
    for i in range(n):
        r = _find(parent, i)
        spins[i] = int(u_spin[r] * q)
    return n_open


@njit(cache=True)
def _sw_block(eu, ev, fixed, spins, p, q, u, thin, bonds, parent, out):
    ne = eu.size
    frac = np.empty(u.shape[0])
    for s in range(u.shape[0]):
        o = _sw_sweep(eu, ev, fixed, spins, p, q, u[s, :ne], u[s, ne:], bonds, parent)
        frac[s] = o / max(ne, 1)
        if (s + 1) % thin == 0:
            out[(s + 1) // thin - 1, :] = bonds
    return frac


@njit(cache=True)
def _sw_block_conn(eu, ev, fixed, spins, p, q, u, thin, bonds, parent, pu, pv, out):
    # out[k, j]: nodes pu[j] and pv[j] in one cluster after the k-th thinned draw
    ne = eu.size
    for s in range(u.shape[0]):
        _sw_sweep(eu, ev, fixed, spins, p, q, u[s, :ne], u[s, ne:], bonds, parent)
        if (s + 1) % thin == 0:
            k = (s + 1) // thin - 1
            for j in range(pu.size):
                out[k, j] = _find(parent, pu[j]) == _find(parent, pv[j])


class FKSampler:
    """Swendsen-Wang chain for the FK measure on `domain` with boundary `bc`.

    Each sweep opens equal-spin edges with probability p, which leaves the
    joint Edwards-Sokal measure invariant; the bond state after a sweep is an
    FK configuration.
    """

    def __init__(self, domain, bc, params=ModelParams(), replica=0):
        q = params.q
        if abs(q - round(q)) > 1e-12 or q < 1:
            raise ValueError("cluster sampler needs an integer q >= 1")
        self.domain, self.bc, self.params, self.replica = domain, bc, params, replica
        node_of, self.fixed = bc.resolve(domain)
        self.n_nodes = int(node_of.max()) + 1
        self.eu = node_of[domain.edges[:, 0]].copy()
        self.ev = node_of[domain.edges[:, 1]].copy()
        self.rng = stream(params.seed, "fk", replica)
        self.spins = np.zeros(self.n_nodes, dtype=np.int64)
        self.bonds = np.zeros(domain.n_edges, dtype=np.bool_)
        self._parent = np.empty(self.n_nodes, dtype=np.int64)
        self.sweeps = 0
        self.trace = []
        self.warm = False

    def sweep(self, n=1):
        ne = len(self.eu)
        for _ in range(n):
            u = self.rng.random(ne + self.n_nodes)
            o = _sw_sweep(self.eu, self.ev, self.fixed, self.spins, self.params.p, int(round(self.params.q)),
                          u[:ne], u[ne:], self.bonds, self._parent)
            self.trace.append(o / max(ne, 1))
            self.sweeps += 1

    def _chunk(self, chunk):
        # cap the uniform block near 2e7 doubles; the stream is the same for any chunking
        per = self.params.thin * (len(self.eu) + self.n_nodes)
        return max(1, min(chunk, int(2e7 // per)))

    def draw_bits(self, n, chunk=4096):
        """n thinned draws as an (n, E) boolean array; same stream as repeated draw()."""
        if not self.warm:
            self.warmup()
        ne, thin = len(self.eu), self.params.thin
        chunk = self._chunk(chunk)
        out = np.empty((n, ne), dtype=np.bool_)
        done = 0
        while done < n:
            k = min(chunk, n - done)
            u = self.rng.random((k * thin, ne + self.n_nodes))
            fr = _sw_block(self.eu, self.ev, self.fixed, self.spins, self.params.p, int(round(self.params.q)),
                           u, thin, self.bonds, self._parent, out[done:done + k])
            self.trace.extend(fr.tolist())
            self.sweeps += k * thin
            done += k
        return out

    def connectivity(self, n, pairs, chunk=1024):
        """(n, len(pairs)) booleans: are the two sites of each pair joined, boundary
        identifications included, in each of n thinned draws."""
        if not self.warm:
            self.warmup()
        node_of, _ = self.bc.resolve(self.domain)
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        pu, pv = node_of[pairs[:, 0]], node_of[pairs[:, 1]]
        ne, thin = len(self.eu), self.params.thin
        chunk = self._chunk(chunk)
        out = np.empty((n, len(pairs)), dtype=np.bool_)
        done = 0
        while done < n:
            k = min(chunk, n - done)
            u = self.rng.random((k * thin, ne + self.n_nodes))
            _sw_block_conn(self.eu, self.ev, self.fixed, self.spins, self.params.p, int(round(self.params.q)),
                           u, thin, self.bonds, self._parent, pu, pv, out[done:done + k])
            self.sweeps += k * thin
            done += k
        return out

    def warmup(self):
        w = self.params.warmup
        self.sweep(default_warmup(self.domain) if w is None else w)
        self.warm = True

    def draw(self):
        if not self.warm:
            self.warmup()
        self.sweep(self.params.thin)
        return EdgeConfig(self.bonds.copy(), {"seed": self.params.seed, "replica": self.replica,
                                              "sweeps": self.sweeps})

    def draws(self, n):
        for _ in range(n):
            yield self.draw()

    def diagnostics(self):
        x = np.asarray(self.trace)
        return {"sweeps": self.sweeps, "mean_open_fraction": float(x.mean()) if len(x) else None,
                "tau_int": integrated_autocorr(x[len(x) // 4:]) if len(x) > 40 else None}


def sample(domain, bc, params=ModelParams(), replica=0):
    """One configuration after warmup."""
    return FKSampler(domain, bc, params, replica).draw()


def integrated_autocorr(x, c=5.0):
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    if n < 4 or not x.any():
        return 0.5
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 0.5
    for m in range(1, n):
        tau += acf[m]
        if m >= c * tau:
            break
    return float(tau)
