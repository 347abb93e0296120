"""Synthetic load-curve worlds: a random geometric metering network and
low-rank + sparse + noise measurements with a Bernoulli sampling mask.

Random streams
--------------
All randomness comes from ``numpy.random.Generator`` over the counter-based
Philox4x64-10 bit generator. A seed is expanded with ``numpy.random.SeedSequence``
and split into independent child streams (one for the graph, one for the
data), so adding draws to one stream never shifts the other. Gaussian
variates use NumPy's ziggurat sampler on that stream, uniform variates the
53-bit ``random()`` transform. A fixed seed therefore reproduces every array
bit for bit with a given NumPy version.
"""

from collections import deque
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import GraphGenerationError, ValidationError

MAX_GRAPH_TRIES = 100


def philox(seed):
    """A Philox-backed generator for an int seed or a ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def child_streams(seed, n):
    return [philox(s) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class MeterGraph:
    """Undirected communication graph between N metering nodes.

    ``edges`` holds sorted pairs ``(i, j)`` with ``i < j``; ``neighbors[n]`` is
    the sorted neighborhood of node n. Positions are kept when the graph was
    drawn geometrically (handy for plotting) but play no role in the solvers.
    """

    n_nodes: int
    edges: tuple
    neighbors: tuple = field(repr=False)
    positions: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def from_edges(cls, n_nodes, edges, positions=None):
        if n_nodes < 1:
            raise ValidationError("a graph needs at least one node")
        seen = set()
        for e in edges:
            i, j = (int(v) for v in e)
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValidationError(f"edge {(i, j)} out of range for {n_nodes} nodes")
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValidationError(f"duplicate edge {key}")
            seen.add(key)
        nbrs = [[] for _ in range(n_nodes)]
        for i, j in seen:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return cls(
            n_nodes=int(n_nodes),
            edges=tuple(sorted(seen)),
            neighbors=tuple(tuple(sorted(x)) for x in nbrs),
            positions=positions,
        )

    def degree(self, n):
        return len(self.neighbors[n])

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g


def is_connected(g):
    """True iff a breadth-first search from node 0 reaches every node."""
    seen = {0}
    queue = deque([0])
    while queue:
        n = queue.popleft()
        for m in g.neighbors[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return len(seen) == g.n_nodes


def geometric_edges(positions, d_c):
    """Pairs of points whose Euclidean distance is strictly below ``d_c``."""
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    i, j = np.nonzero(np.triu(dist < d_c, k=1))
    return list(zip(i.tolist(), j.tolist()))


def random_geometric_graph(N, d_c, seed=0, positions=None, max_tries=MAX_GRAPH_TRIES):
    """Connected random geometric graph on the unit square.

    Nodes are dropped i.i.d. uniformly on [0, 1]^2 and linked when closer
    than ``d_c``. Disconnected draws are discarded and positions redrawn, up
    to ``max_tries`` times; the range ``d_c`` is never enlarged.

    Parameters
    ----------
    N : int
        Number of nodes.
    d_c : float
        Communication range.
    seed : int or numpy.random.Generator
        Seed for a Philox stream, or a generator to draw from directly.
    positions : array_like, optional
        Fixed N x 2 positions. When given, no sampling happens and a
        disconnected result raises immediately.

    Raises
    ------
    GraphGenerationError
        No connected realization within the retry budget.
    """
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    if d_c <= 0:
        raise ValidationError(f"d_c must be positive, got {d_c}")
    if positions is not None:
        positions = np.asarray(positions, dtype=float)
        g = MeterGraph.from_edges(N, geometric_edges(positions, d_c), positions)
        if not is_connected(g):
            raise GraphGenerationError("given positions do not yield a connected graph")
        return g
    rng = seed if isinstance(seed, np.random.Generator) else philox(seed)
    for _ in range(max_tries):
        pos = rng.random((N, 2))
        g = MeterGraph.from_edges(N, geometric_edges(pos, d_c), pos)
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"no connected graph with N={N}, d_c={d_c} after {max_tries} draws"
    )


@dataclass(frozen=True)
class ObservationSet:
    """Partially observed data: ``Y`` is zero wherever ``mask`` is zero."""

    Y: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        mask = np.asarray(self.mask)
        if Y.ndim != 2 or Y.shape != mask.shape:
            raise ValidationError(f"Y {Y.shape} and mask {mask.shape} must be equal 2-D shapes")
        if not np.all(np.isin(mask, (0, 1))):
            raise ValidationError("mask entries must be 0 or 1")
        if not np.all(np.isfinite(Y)):
            raise ValidationError("Y has non-finite entries")
        mask = mask.astype(float)
        if np.any(Y[mask == 0] != 0):
            raise ValidationError("Y must be zero on unobserved entries")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self):
        return self.Y.shape

    @classmethod
    def from_full(cls, Y, mask):
        """Build from an unmasked matrix, zeroing entries outside the mask."""
        mask = np.asarray(mask, dtype=float)
        return cls(np.where(mask > 0, np.asarray(Y, dtype=float), 0.0), mask)


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; defaults reproduce the 25-meter, 600-slot world."""

    N: int = 25
    T: int = 600
    r: int = 3
    sigma2: float = 1e-3
    p_out: float = 0.05
    amplitude: float = 1.0
    p_obs: float = 0.7
    d_c: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.T < 1:
            raise ValidationError("N and T must be positive")
        if not 1 <= self.r <= min(self.N, self.T):
            raise ValidationError(f"r must lie in [1, min(N, T)], got {self.r}")
        if not 0 <= self.p_out <= 0.5:
            raise ValidationError(f"p_out must lie in [0, 0.5], got {self.p_out}")
        if not 0 < self.p_obs <= 1:
            raise ValidationError(f"p_obs must lie in (0, 1], got {self.p_obs}")
        if self.d_c <= 0:
            raise ValidationError("d_c must be positive")
        if self.sigma2 < 0:
            raise ValidationError("sigma2 must be nonnegative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown SynthConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SyntheticDataset:
    X: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    O: np.ndarray
    E: np.ndarray
    mask: np.ndarray
    Y_obs: np.ndarray
    config: SynthConfig

    @property
    def observations(self):
        return ObservationSet(self.Y_obs, self.mask)


def synthesize(config=None):
    """Draw a connected meter graph and a dataset ``P_mask(X + O + E)``.

    ``X = W Z'`` with ``W ~ N(0, 100/N)`` (N x r) and ``Z ~ N(0, 100/T)``
    (T x r); outliers take ``-amplitude`` and ``+amplitude`` with probability
    ``p_out`` each; noise is ``N(0, sigma2)``; the mask is Bernoulli(p_obs).

    Returns
    -------
    (SyntheticDataset, MeterGraph)
    """
    cfg = config or SynthConfig()
    graph_rng, data_rng = child_streams(cfg.seed, 2)
    graph = random_geometric_graph(cfg.N, cfg.d_c, graph_rng)

    N, T, r = cfg.N, cfg.T, cfg.r
    W = data_rng.standard_normal((N, r)) * np.sqrt(100.0 / N)
    Z = data_rng.standard_normal((T, r)) * np.sqrt(100.0 / T)
    X = W @ Z.T
    u = data_rng.random((N, T))
    O = np.zeros((N, T))
    O[u < cfg.p_out] = -cfg.amplitude
    O[(u >= cfg.p_out) & (u < 2 * cfg.p_out)] = cfg.amplitude
    mask = (data_rng.random((N, T)) < cfg.p_obs).astype(float)
    E = data_rng.standard_normal((N, T)) * np.sqrt(cfg.sigma2)
    Y_obs = mask * (X + O + E)
    ds = SyntheticDataset(X=X, W=W, Z=Z, O=O, E=E, mask=mask, Y_obs=Y_obs, config=cfg)
    return ds, graph
