"""Centralized stable principal components pursuit.

Minimizes ``0.5*||P(Y - X - O)||_F^2 + lambda_star*||X||_* + lambda_1*||O||_1``
by alternating the exact minimization over ``O`` (entrywise soft-thresholding)
with one proximal-gradient step in ``X`` (singular value thresholding). The
masked quadratic has a gradient with Lipschitz constant 1, so any step in
(0, 1] yields monotone descent.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import ObservationSet, philox
from .errors import ValidationError
from .kernels import apply_mask, nuclear_norm, soft_threshold, spectral_norm, svt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcpConfig:
    lambda_star: float
    lambda_1: float
    max_iters: int = 20000
    tol_rel: float = 1e-9
    step: float = 1.0

    def __post_init__(self):
        if self.lambda_star < 0 or self.lambda_1 < 0:
            raise ValidationError("regularization weights must be nonnegative")
        if not 0 < self.step <= 1:
            raise ValidationError(f"step must lie in (0, 1], got {self.step}")
        if self.tol_rel <= 0:
            raise ValidationError("tol_rel must be positive")
        if self.max_iters < 0:
            raise ValidationError("max_iters must be nonnegative")


@dataclass
class PcpSolution:
    X_hat: np.ndarray
    O_hat: np.ndarray
    objective_trace: list
    iters: int
    converged: bool
    kkt_spectral: float
    kkt_inf: float
    kkt_support: float
    kkt_alignment: float
    spectral_trace: list = field(default_factory=list)
    inf_trace: list = field(default_factory=list)

    @property
    def objective(self):
        return self.objective_trace[-1]


def default_lambdas(sigma2_hat, shape, c1=1.0, scale=1.0):
    """Heuristic weight pair ``(lambda_1, lambda_star)``.

    ``lambda_1 = c1 * sqrt(2 * sigma2_hat) * scale`` and
    ``lambda_star = sqrt(max(N, T)) * lambda_1``. Offered as a starting
    point only; solvers never apply it implicitly.
    """
    lam1 = c1 * math.sqrt(2.0 * sigma2_hat) * scale
    return lam1, math.sqrt(max(shape)) * lam1


def _check_shapes(obs, *mats):
    for M in mats:
        if np.shape(M) != obs.shape:
            raise ValidationError(f"shape {np.shape(M)} does not match data {obs.shape}")


def objective(X, O, obs, cfg):
    """Value of the PCP cost at ``(X, O)``."""
    _check_shapes(obs, X, O)
    R = apply_mask(obs.Y - X - O, obs.mask)
    return float(
        0.5 * np.sum(R**2)
        + cfg.lambda_star * nuclear_norm(X)
        + cfg.lambda_1 * np.sum(np.abs(O))
    )


def o_step(X, obs, lambda_1):
    """Exact minimizer over ``O`` with ``X`` fixed; zero off the mask."""
    _check_shapes(obs, X)
    return apply_mask(soft_threshold(obs.Y - X, lambda_1), obs.mask)


def x_step(X, O, obs, cfg):
    """One proximal-gradient step in ``X``."""
    _check_shapes(obs, X, O)
    G = apply_mask(obs.Y - X - O, obs.mask)
    return svt(X + cfg.step * G, cfg.step * cfg.lambda_star)


def optimality_gap(X, O, obs, cfg):
    """First-order optimality residuals of the convex PCP problem.

    With ``G = P(Y - X - O)`` optimality means ``G`` is a subgradient of
    ``lambda_star*||X||_*`` at X and of ``lambda_1*||O||_1`` at O.

    Returns
    -------
    spectral_gap : float
        ``max(0, ||G||_2 - lambda_star)``.
    inf_gap : float
        ``max(0, max|G| - lambda_1)``.
    support_gap : float
        Largest ``|G - lambda_1*sign(O)|`` over the support of O (0 if empty).
    alignment_gap : float
        ``|<G, X> - lambda_star*||X||_*|`` relative to ``max(1, lambda_star*||X||_*)``.
    """
    _check_shapes(obs, X, O)
    G = apply_mask(obs.Y - X - O, obs.mask)
    spectral_gap = max(0.0, spectral_norm(G) - cfg.lambda_star)
    inf_gap = max(0.0, float(np.max(np.abs(G), initial=0.0)) - cfg.lambda_1)
    supp = O != 0
    if np.any(supp):
        support_gap = float(np.max(np.abs(G[supp] - cfg.lambda_1 * np.sign(O[supp]))))
    else:
        support_gap = 0.0
    nuc = cfg.lambda_star * nuclear_norm(X)
    alignment_gap = abs(float(np.sum(G * X)) - nuc) / max(1.0, nuc)
    return spectral_gap, inf_gap, support_gap, alignment_gap


def solve(obs, cfg, X0=None, record_gaps=False):
    """Solve PCP on ``obs``.

    Iterates until ``|f_k - f_{k-1}| / max(1, f_{k-1}) < cfg.tol_rel`` or
    ``cfg.max_iters`` iterations. Hitting the cap is not an error: the best
    iterate is returned with ``converged=False``.

    Parameters
    ----------
    obs : ObservationSet
    cfg : PcpConfig
    X0 : ndarray, optional
        Warm start; defaults to the observed data ``P(Y)``.
    record_gaps : bool
        Also store the spectral and sup-norm optimality gaps per iteration
        (one extra SVD per iteration).
    """
    X = obs.Y.copy() if X0 is None else np.array(X0, dtype=float)
    _check_shapes(obs, X)
    O = np.zeros(obs.shape)
    trace = [objective(X, O, obs, cfg)]
    spec_trace, inf_trace = [], []
    best = (trace[0], X, O)
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        O = o_step(X, obs, cfg.lambda_1)
        X = x_step(X, O, obs, cfg)
        f = objective(X, O, obs, cfg)
        trace.append(f)
        if record_gaps:
            g = optimality_gap(X, O, obs, cfg)
            spec_trace.append(g[0])
            inf_trace.append(g[1])
        if f <= best[0]:
            best = (f, X, O)
        if abs(trace[-2] - f) / max(1.0, trace[-2]) < cfg.tol_rel:
            converged = True
            break
    _, X, O = best
    # Final exact O-step keeps O consistent with the returned X.
    O = o_step(X, obs, cfg.lambda_1)
    gaps = optimality_gap(X, O, obs, cfg)
    if not converged:
        log.warning("PCP hit max_iters=%d without meeting tol_rel=%g", cfg.max_iters, cfg.tol_rel)
    return PcpSolution(
        X_hat=X,
        O_hat=O,
        objective_trace=trace,
        iters=it,
        converged=converged,
        kkt_spectral=gaps[0],
        kkt_inf=gaps[1],
        kkt_support=gaps[2],
        kkt_alignment=gaps[3],
        spectral_trace=spec_trace,
        inf_trace=inf_trace,
    )


def select_lambdas(obs, lambda_1_grid, ratio_grid, holdout=0.1, seed=0, **solve_kw):
    """Pick ``(lambda_1, lambda_star)`` by validation on held-out observations.

    A random ``holdout`` fraction of the observed entries is hidden, PCP is
    solved on the rest for every pair ``(l1, ratio * l1)`` of the grids, and
    the pair with the smallest mean absolute prediction error on the hidden
    entries wins. The absolute loss keeps the few gross outliers among the
    held-out entries from dominating the score. Only observed data is used.

    Parameters
    ----------
    obs : ObservationSet
    lambda_1_grid, ratio_grid : sequence of float
        Candidate ``lambda_1`` values and ``lambda_star / lambda_1`` ratios.
    holdout : float
        Fraction of observed entries used for validation.
    seed : int
        Seed of the holdout draw.
    **solve_kw
        Extra `PcpConfig` fields (e.g. ``max_iters``, ``tol_rel``).

    Returns
    -------
    (lambda_1, lambda_star, scores)
        ``scores`` maps each ``(lambda_1, lambda_star)`` pair to its error.
    """
    if not 0 < holdout < 1:
        raise ValidationError("holdout must lie in (0, 1)")
    observed = obs.mask > 0
    hold = observed & (philox(seed).random(obs.shape) < holdout)
    if not np.any(hold):
        raise ValidationError("holdout draw selected no observed entries")
    train = ObservationSet.from_full(obs.Y, np.where(hold, 0.0, obs.mask))
    scores = {}
    for lam1 in lambda_1_grid:
        for ratio in ratio_grid:
            cfg = PcpConfig(lambda_star=ratio * lam1, lambda_1=lam1, **solve_kw)
            X = solve(train, cfg).X_hat
            scores[(lam1, ratio * lam1)] = float(np.mean(np.abs(obs.Y[hold] - X[hold])))
    best = min(scores, key=scores.get)
    return best[0], best[1], scores
