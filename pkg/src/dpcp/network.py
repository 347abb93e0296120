"""Distributed PCP over a network of metering nodes.

Each node n keeps its own measurements and a local copy ``Q_n`` (T x rho)
of the shared temporal factor, its factor row ``p_n``, its outlier vector
``o_n`` and the aggregated dual variable ``S_n``. A round consists of

1. receiving the neighbors' ``Q_m`` from the previous round,
2. the dual ascent ``S_n += c * sum_m (Q_n - Q_m)``,
3. a ridge-type update of ``Q_n`` that decouples across time slots,
4. a ridge update of ``p_n``,
5. soft-thresholding of the masked residual for ``o_n``,

then broadcasting the new ``Q_n``. Nodes never exchange raw measurements.

The simulator is synchronous: all nodes read the same snapshot of the
previous round's broadcasts, so the result does not depend on the order (or
concurrency) in which node updates run within a round.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import ObservationSet, is_connected
from .errors import DivergedError, ProtocolError, ValidationError
from .kernels import apply_mask, soft_threshold, solve_small_spd, spectral_norm

log = logging.getLogger(__name__)

P_REG_CHOICES = ("lambda_star", "one")
INIT_CHOICES = ("gaussian", "local_fit")
DIVERGENCE_LIMIT = 1e12
PLATEAU_WINDOW = 10
_EPS_RIDGE = 1e-12


@dataclass(frozen=True)
class DpcpConfig:
    """Settings for a D-PCP run.

    ``p_reg`` picks the ridge weight in the ``p_n`` update: ``"lambda_star"``
    uses ``lambda_star * I`` (the minimizer of the per-node cost), ``"one"``
    the unit weight ``I``.

    ``init`` selects the starting factors. ``"gaussian"`` draws ``Q_n`` and
    ``p_n`` i.i.d. ``N(0, 1/rho)``. ``"local_fit"`` draws ``p_n`` the same way
    and sets ``Q_n`` to the minimum-norm fit of the node's own observed row,
    ``Q_n = P(y_n) p_n' / ||p_n||^2``; the network average then starts as a
    random sketch of the data row space, which shortens the initial phase.
    Both use only node-local information.
    """

    rho: int
    lambda_star: float
    lambda_1: float
    c: float = 1.0
    max_rounds: int = 3000
    consensus_tol: float = 1e-3
    objective_tol: float = 1e-6
    seed: int = 0
    p_reg: str = "lambda_star"
    init: str = "gaussian"

    def __post_init__(self):
        if self.c <= 0:
            raise ValidationError(f"penalty c must be positive, got {self.c}")
        if self.rho < 1:
            raise ValidationError(f"rho must be >= 1, got {self.rho}")
        if self.lambda_star < 0 or self.lambda_1 < 0:
            raise ValidationError("regularization weights must be nonnegative")
        if self.consensus_tol <= 0 or self.objective_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_rounds < 0:
            raise ValidationError("max_rounds must be nonnegative")
        if self.p_reg not in P_REG_CHOICES:
            raise ValidationError(f"p_reg must be one of {P_REG_CHOICES}")
        if self.init not in INIT_CHOICES:
            raise ValidationError(f"init must be one of {INIT_CHOICES}")

    @property
    def p_ridge(self):
        w = self.lambda_star if self.p_reg == "lambda_star" else 1.0
        return w if w > 0 else _EPS_RIDGE


@dataclass(frozen=True)
class NodeState:
    id: int
    y: np.ndarray
    omega: np.ndarray
    Q: np.ndarray
    p: np.ndarray
    o: np.ndarray
    S: np.ndarray
    neighbors: tuple
    n_nodes: int

    @property
    def x(self):
        """Cleansed load profile of this node, ``Q_n p_n``."""
        return self.Q @ self.p


@dataclass
class RoundTrace:
    k: int
    e_X: float
    e_O: float
    consensus: np.ndarray
    objective: float
    degenerate: bool = False

    @property
    def consensus_max(self):
        return float(np.max(self.consensus))


@dataclass
class DpcpResult:
    states: list
    trace: list = field(default_factory=list)
    stop_reason: str = "max_rounds"

    def __iter__(self):
        return iter((self.states, self.trace, self.stop_reason))


def init_network(obs, g, cfg):
    """Initial node states: zero duals and outliers, random factors.

    Factors are drawn from per-node Philox streams spawned from ``cfg.seed``
    (see `DpcpConfig.init`), so a node's start depends only on the seed and
    its index.
    """
    if not isinstance(obs, ObservationSet):
        obs = ObservationSet(*obs)
    N, T = obs.shape
    if g.n_nodes != N:
        raise ValidationError(f"graph has {g.n_nodes} nodes but data has {N} rows")
    if not is_connected(g):
        raise ValidationError("communication graph is disconnected")
    rho = cfg.rho
    scale = 1.0 / np.sqrt(rho)
    streams = np.random.SeedSequence(cfg.seed).spawn(N)
    states = []
    for n in range(N):
        rng = np.random.Generator(np.random.Philox(streams[n]))
        Q = rng.standard_normal((T, rho)) * scale
        p = rng.standard_normal(rho) * scale
        if cfg.init == "local_fit":
            Q = np.outer(obs.mask[n] * obs.Y[n], p) / max(float(p @ p), _EPS_RIDGE)
        states.append(
            NodeState(
                id=n,
                y=obs.Y[n].copy(),
                omega=obs.mask[n].copy(),
                Q=Q,
                p=p,
                o=np.zeros(T),
                S=np.zeros((T, rho)),
                neighbors=tuple(g.neighbors[n]),
                n_nodes=N,
            )
        )
    return states


def _check_messages(node, neighbor_Q):
    if set(neighbor_Q) != set(node.neighbors):
        missing = sorted(set(node.neighbors) - set(neighbor_Q))
        extra = sorted(set(neighbor_Q) - set(node.neighbors))
        raise ProtocolError(
            f"node {node.id}: missing messages from {missing}, unexpected from {extra}"
        )


def _neighbor_sum(node, neighbor_Q):
    total = np.zeros_like(node.Q)
    for m in node.neighbors:  # fixed order keeps sums reproducible
        total += neighbor_Q[m]
    return total


def s1_dual_update(node, neighbor_Q, c):
    """``S_n + c * sum_m (Q_n - Q_m)`` over the neighborhood."""
    _check_messages(node, neighbor_Q)
    deg = len(node.neighbors)
    return node.S + c * (deg * node.Q - _neighbor_sum(node, neighbor_Q))


def _q_alpha(node, cfg):
    alpha = cfg.lambda_star / node.n_nodes + 2.0 * cfg.c * len(node.neighbors)
    if alpha <= 0:
        raise ValidationError(
            "Q-update is singular: lambda_star/N + 2c|J_n| must be positive "
            f"(node {node.id} has no neighbors and lambda_star=0)"
        )
    return alpha


def _q_rhs(node, neighbor_Q, c):
    """Right-hand side rows ``b_t`` of the per-slot Q systems (T x rho)."""
    resid = node.omega * (node.y - node.o)
    deg = len(node.neighbors)
    return np.outer(resid, node.p) - node.S + c * (deg * node.Q + _neighbor_sum(node, neighbor_Q))


def s2_q_update(node, neighbor_Q, cfg):
    """New local factor copy ``Q_n``.

    Solves, for every time slot t, ``(w_t p p' + alpha I) q_t = b_t`` with
    ``alpha = lambda_star/N + 2c|J_n|``. The rank-one structure gives the
    closed form ``q_t = (b_t - w_t p (p'b_t) / (alpha + w_t ||p||^2)) / alpha``.
    ``node.S`` must already hold this round's dual.
    """
    _check_messages(node, neighbor_Q)
    alpha = _q_alpha(node, cfg)
    B = _q_rhs(node, neighbor_Q, cfg.c)
    p = node.p
    w = node.omega
    coef = w * (B @ p) / (alpha + w * (p @ p))
    return (B - np.outer(coef, p)) / alpha


def s2_q_update_dense(node, neighbor_Q, cfg):
    """Reference Q-update through the full ``rho*T`` Kronecker system.

    Builds ``(p p') kron Omega + alpha I`` explicitly and solves it. Cost is
    cubic in ``rho*T``; meant for checking `s2_q_update` on small instances.
    """
    _check_messages(node, neighbor_Q)
    alpha = _q_alpha(node, cfg)
    T, rho = node.Q.shape
    Omega = np.diag(node.omega)
    p = node.p
    A = np.kron(np.outer(p, p), Omega) + alpha * np.eye(rho * T)
    nbr = cfg.c * sum((node.Q + neighbor_Q[m] for m in node.neighbors), np.zeros_like(node.Q))
    rhs = (
        np.kron(p[:, None], Omega) @ (node.y - node.o)
        - node.S.flatten(order="F")
        + nbr.flatten(order="F")
    )
    return np.linalg.solve(A, rhs).reshape((T, rho), order="F")


def s3_p_update(node, cfg, Q=None):
    """Ridge regression of the node's data on its factor copy.

    ``p = (Q' W Q + r I)^{-1} Q' W (y - o)`` with ``W = diag(omega)`` and
    ``r = cfg.p_ridge``.
    """
    Q = node.Q if Q is None else Q
    WQ = node.omega[:, None] * Q
    G = Q.T @ WQ + cfg.p_ridge * np.eye(Q.shape[1])
    return solve_small_spd(G, WQ.T @ (node.y - node.o))


def s4_o_update(node, lambda_1, Q=None, p=None):
    """Soft-thresholded masked residual; exactly zero off the mask."""
    Q = node.Q if Q is None else Q
    p = node.p if p is None else p
    resid = node.omega * (node.y - Q @ p)
    return np.where(node.omega > 0, soft_threshold(resid, lambda_1), 0.0)


def update_node(node, neighbor_Q, cfg):
    """Apply the dual, Q, p and o updates of one round to a single node."""
    S = s1_dual_update(node, neighbor_Q, cfg.c)
    node = replace(node, S=S)
    Q = s2_q_update(node, neighbor_Q, cfg)
    p = s3_p_update(node, cfg, Q=Q)
    o = s4_o_update(node, cfg.lambda_1, Q=Q, p=p)
    return replace(node, Q=Q, p=p, o=o)


def aggregate_estimate(states):
    """Stack the node estimates into ``(X_hat, O_hat)``."""
    X = np.vstack([s.Q @ s.p for s in states])
    O = np.vstack([s.o for s in states])
    return X, O


def consensus_error(states, return_flag=False):
    """Relative disagreement ``||Q_n - Q_bar||_F / ||Q_bar||_F`` per node.

    When the average ``Q_bar`` is (numerically) zero the absolute distances
    are returned instead and the flag is set.
    """
    Qs = np.stack([s.Q for s in states])
    # Averaging offsets from the first copy keeps identical copies exactly at zero error.
    Qbar = Qs[0] + (Qs - Qs[0]).mean(axis=0)
    dist = np.sqrt(np.sum((Qs - Qbar) ** 2, axis=(1, 2)))
    ref = np.linalg.norm(Qbar)
    degenerate = ref <= np.finfo(float).tiny
    err = dist if degenerate else dist / ref
    return (err, degenerate) if return_flag else err


def local_objective(states, cfg):
    """Separable factorized PCP cost evaluated at the local iterates."""
    N = len(states)
    total = 0.0
    for s in states:
        r = s.omega * (s.y - s.Q @ s.p - s.o)
        total += (
            0.5 * float(r @ r)
            + cfg.lambda_1 * float(np.sum(np.abs(s.o)))
            + cfg.lambda_star / (2 * N) * (N * float(s.p @ s.p) + float(np.sum(s.Q**2)))
        )
    return total


def _relative(a, b):
    nb = np.linalg.norm(b)
    if nb == 0:
        return float("nan")
    return float(np.linalg.norm(a - b) / nb)


def make_trace(k, states, cfg, truth=None):
    err, degenerate = consensus_error(states, return_flag=True)
    e_X = e_O = float("nan")
    if truth is not None:
        X_hat, O_hat = aggregate_estimate(states)
        e_X = _relative(X_hat, truth[0])
        e_O = _relative(O_hat, truth[1])
    return RoundTrace(
        k=k,
        e_X=e_X,
        e_O=e_O,
        consensus=err,
        objective=local_objective(states, cfg),
        degenerate=degenerate,
    )


def run_round(states, g, cfg, k=0, truth=None, executor=None):
    """One synchronous round over every node.

    Parameters
    ----------
    states : list of NodeState
        States after round ``k - 1``; their ``Q`` fields are the broadcasts
        every node receives this round.
    g : MeterGraph
    cfg : DpcpConfig
    k : int
        Index stored in the returned trace.
    truth : (X, O), optional
        Ground truth for the error columns of the trace.
    executor : concurrent.futures.Executor, optional
        Runs node updates concurrently; results are identical to serial.

    Returns
    -------
    (list of NodeState, RoundTrace)
    """
    broadcast = [s.Q for s in states]

    def work(n):
        s = states[n]
        inbox = {m: broadcast[m] for m in g.neighbors[n]}
        return update_node(s, inbox, cfg)

    if executor is None:
        new = [work(n) for n in range(len(states))]
    else:
        new = list(executor.map(work, range(len(states))))
    return new, make_trace(k, new, cfg, truth)


def certificate(states, obs, lambda_star, rtol=1e-6):
    """Global-optimality check for a consensus point of the network.

    With ``P`` the stacked ``p_n``, ``Q`` the network average of the ``Q_n``
    and ``O`` the stacked ``o_n``, the point ``(P Q', O)`` solves the convex
    PCP problem if ``||P_mask(Y - P Q' - O)||_2 < lambda_star``.

    At an exact stationary point with ``P Q' != 0`` the residual ``G``
    satisfies ``G Q = lambda_star P``, so its spectral norm is at least
    ``lambda_star`` and equals it at the optimum. The inequality is therefore
    tested as ``< lambda_star * (1 + rtol)``; pass ``rtol=0`` for the strict
    form.

    Returns
    -------
    (bool, float)
        Whether the inequality holds, and the spectral norm of the residual.
    """
    P = np.vstack([s.p for s in states])
    Qbar = np.mean([s.Q for s in states], axis=0)
    O = np.vstack([s.o for s in states])
    R = apply_mask(obs.Y - P @ Qbar.T - O, obs.mask)
    res = spectral_norm(R)
    return bool(res < lambda_star * (1.0 + rtol)), res


def consensus_estimate(states):
    """``(P Q_bar', O)`` built from the network-average factor."""
    P = np.vstack([s.p for s in states])
    Qbar = np.mean([s.Q for s in states], axis=0)
    O = np.vstack([s.o for s in states])
    return P @ Qbar.T, O


def run(obs, g, cfg, truth=None, executor=None, callback=None):
    """Run D-PCP until convergence or ``cfg.max_rounds`` rounds.

    Convergence means every node's consensus error is below
    ``cfg.consensus_tol`` and the network objective changed by less than
    ``cfg.objective_tol`` (relative) over the last 10 rounds.

    ``callback(trace_row, states)``, if given, is called after every round.

    Returns
    -------
    DpcpResult
        Unpacks as ``(states, trace, stop_reason)``; ``stop_reason`` is
        ``"converged"`` or ``"max_rounds"``.

    Raises
    ------
    DivergedError
        The objective exceeded 1e12 or became non-finite; ``exc.trace`` holds
        the rounds completed.
    """
    states = init_network(obs, g, cfg)
    trace = []
    for k in range(1, cfg.max_rounds + 1):
        states, tr = run_round(states, g, cfg, k=k, truth=truth, executor=executor)
        trace.append(tr)
        if callback is not None:
            callback(tr, states)
        if not np.isfinite(tr.objective) or tr.objective > DIVERGENCE_LIMIT:
            raise DivergedError(f"objective {tr.objective:g} at round {k}", trace)
        if k > PLATEAU_WINDOW and tr.consensus_max < cfg.consensus_tol:
            f_old = trace[-1 - PLATEAU_WINDOW].objective
            if abs(tr.objective - f_old) / max(1.0, abs(f_old)) < cfg.objective_tol:
                log.info("D-PCP converged after %d rounds", k)
                return DpcpResult(states, trace, "converged")
    return DpcpResult(states, trace, "max_rounds")
