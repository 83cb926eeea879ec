"""Gaussian-copula extended-rank-likelihood front end for mixed data.

Observed variables (continuous or integer-coded ordinal, possibly with
missing cells) are mapped to latent Gaussian rows constrained only by the
within-variable orderings of the observations. The chain alternates three
moves per outer iteration: a truncated-normal Gibbs sweep over the latent
matrix, an inverse-Wishart draw of the full latent covariance (kept in
correlation form for identifiability), and one or more blanket sweeps on
the scatter matrix of the current latents.

Marginal distributions are nuisance parameters here and are never
estimated; only ranks enter, which is what makes the procedure invariant
under strictly increasing transforms of the observed variables.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata
from scipy.special import ndtri

from .errors import (ConstantVariable, DimensionMismatch, InvalidParameter,
                     UnknownVariable)
from .linalg import PartitionedCov, SpdMatrix, chol_inverse, cholesky
from .rng import RngStream, sample_truncated_normal, _bartlett_lower
from .sampler import (BlanketState, ChainConfig, ChainOutput, HyperParams,
                      build_structured_precision, gibbs_sweep, initial_state,
                      log_posterior_unnorm)

logger = logging.getLogger(__name__)

VALID_KINDS = ("continuous", "ordinal")


@dataclass(frozen=True)
class MixedDataTable:
    """Variables-by-observations table with NaN for missing cells."""

    values: np.ndarray
    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise InvalidParameter("table must be 2-D with positive shape")
        if len(self.names) != vals.shape[0] or len(self.kinds) != vals.shape[0]:
            raise DimensionMismatch("names/kinds must match the variable count")
        if len(set(self.names)) != len(self.names):
            raise InvalidParameter("variable names must be unique")
        for kind in self.kinds:
            if kind not in VALID_KINDS:
                raise InvalidParameter(f"unknown variable kind {kind!r}")
        for i, name in enumerate(self.names):
            observed = vals[i, ~np.isnan(vals[i])]
            if np.unique(observed).size < 2:
                raise ConstantVariable(
                    f"variable {name!r} has fewer than 2 distinct observed "
                    "values; its latent scale is unidentifiable"
                )

    @property
    def r(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def reordered(self, order: list[int]) -> "MixedDataTable":
        return MixedDataTable(
            values=self.values[order],
            names=tuple(self.names[i] for i in order),
            kinds=tuple(self.kinds[i] for i in order),
        )


@dataclass(frozen=True)
class _VarLayout:
    """Flattened level-group layout of one variable, for vectorized sweeps.

    ``order`` lists observed cell indices grouped by ascending level;
    ``starts``/``sizes`` delimit the groups inside it. Because the sampler
    keeps groups totally ordered (every latent sits strictly between its
    neighbor groups' extremes), a group's bounds are always the max of the
    group just below and the min of the group just above. The per-parity
    arrays (even-indexed groups vs odd-indexed) are precomputed so a sweep
    can redraw each parity class in one vectorized call.
    """

    order: np.ndarray
    starts: np.ndarray
    sizes: np.ndarray
    parity_sel: tuple[np.ndarray, np.ndarray]
    parity_cells: tuple[np.ndarray, np.ndarray]
    parity_sizes: tuple[np.ndarray, np.ndarray]
    parity_starts: tuple[np.ndarray, np.ndarray]

    @property
    def n_groups(self) -> int:
        return self.sizes.size


@dataclass(frozen=True)
class RankBounds:
    """Within-variable ordering constraints, stored structurally.

    For each variable, observation indices are grouped by observed value in
    ascending order; a cell's numeric bounds at any point are the max
    latent over strictly-lower groups and the min over strictly-higher
    groups, evaluated against the current latent matrix. Ties impose no
    mutual constraint, and missing cells are unconstrained.
    """

    groups: tuple[tuple[np.ndarray, ...], ...]
    missing: tuple[np.ndarray, ...]
    shape: tuple[int, int]
    layouts: tuple[_VarLayout, ...]

    def cell_bounds(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Numeric (lo, hi) for every cell against latent matrix x."""
        r, n = self.shape
        lo = np.full((r, n), -np.inf)
        hi = np.full((r, n), np.inf)
        for i in range(r):
            running_max = -np.inf
            for idx in self.groups[i]:
                lo[i, idx] = running_max
                running_max = max(running_max, float(x[i, idx].max()))
            running_min = np.inf
            for idx in reversed(self.groups[i]):
                hi[i, idx] = running_min
                running_min = min(running_min, float(x[i, idx].min()))
        return lo, hi

    def satisfied_by(self, x: np.ndarray) -> bool:
        lo, hi = self.cell_bounds(x)
        return bool(np.all((x > lo) & (x < hi)))


def compute_bounds(table: MixedDataTable) -> RankBounds:
    """Group each variable's observations by level, ascending."""
    groups = []
    missing = []
    layouts = []
    for i in range(table.r):
        row = table.values[i]
        obs = ~np.isnan(row)
        levels = np.unique(row[obs])
        var_groups = tuple(
            np.flatnonzero(obs & (row == level)) for level in levels
        )
        groups.append(var_groups)
        missing.append(np.flatnonzero(~obs))
        sizes = np.array([g.size for g in var_groups], dtype=np.intp)
        g_count = sizes.size
        sels, cells, psizes, pstarts = [], [], [], []
        for parity in (0, 1):
            sel = np.arange(parity, g_count, 2)
            sz = sizes[sel]
            sels.append(sel)
            cells.append(
                np.concatenate([var_groups[g] for g in sel]) if sel.size
                else np.empty(0, dtype=np.intp)
            )
            psizes.append(sz)
            pstarts.append(
                np.concatenate([[0], np.cumsum(sz)[:-1]]).astype(np.intp)
            )
        layouts.append(_VarLayout(
            order=(np.concatenate(var_groups) if var_groups
                   else np.empty(0, dtype=np.intp)),
            starts=np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp),
            sizes=sizes,
            parity_sel=(sels[0], sels[1]),
            parity_cells=(cells[0], cells[1]),
            parity_sizes=(psizes[0], psizes[1]),
            parity_starts=(pstarts[0], pstarts[1]),
        ))
    return RankBounds(
        groups=tuple(groups), missing=tuple(missing),
        shape=table.values.shape, layouts=tuple(layouts),
    )


@dataclass
class LatentMatrix:
    """Current latent Gaussian values, one row per observed variable."""

    x: np.ndarray

    def copy(self) -> "LatentMatrix":
        return LatentMatrix(self.x.copy())


def init_latent(table: MixedDataTable) -> LatentMatrix:
    """Start from normal scores of the mid-ranks, 0 for missing cells."""
    x = np.zeros(table.values.shape)
    for i in range(table.r):
        row = table.values[i]
        obs = ~np.isnan(row)
        n_i = int(obs.sum())
        ranks = rankdata(row[obs], method="average")
        x[i, obs] = ndtri(ranks / (n_i + 1.0))
    return LatentMatrix(x)


def sample_latent(latent: LatentMatrix, sigma: SpdMatrix, bounds: RankBounds,
                  rng: RngStream) -> LatentMatrix:
    """One systematic truncated-normal sweep over all variables, in place.

    Row i's cells are conditionally independent given the other rows, with
    common variance 1/omega_ii and means read off the precision matrix.
    Within a row, level groups are redrawn in two vectorized half-steps
    (even-indexed groups, then odd-indexed): the sampler's invariant keeps
    groups totally ordered, so a group's bounds involve only the adjacent
    groups, which belong to the opposite parity class. Each half-step
    therefore redraws a set of cells that are conditionally independent
    given everything current, with bounds re-evaluated in between.
    """
    x = latent.x
    r, n = x.shape
    if sigma.dim != r:
        raise DimensionMismatch("sigma dimension must match variable count")
    omega = chol_inverse(sigma.factor())
    p_mat = omega @ x
    for i in range(r):
        w_ii = omega[i, i]
        cond_sd = float(np.sqrt(1.0 / w_ii))
        mean = x[i] - p_mat[i] / w_ii
        old_row = x[i].copy()
        layout = bounds.layouts[i]
        g_count = layout.n_groups
        if g_count:
            vals = x[i][layout.order]
            gmax = np.maximum.reduceat(vals, layout.starts)
            gmin = np.minimum.reduceat(vals, layout.starts)
            for parity in (0, 1):
                sel = layout.parity_sel[parity]
                if sel.size == 0:
                    continue
                lo = np.where(sel > 0, gmax[np.maximum(sel - 1, 0)], -np.inf)
                hi = np.where(sel < g_count - 1,
                              gmin[np.minimum(sel + 1, g_count - 1)], np.inf)
                cells = layout.parity_cells[parity]
                sizes = layout.parity_sizes[parity]
                draw = np.asarray(sample_truncated_normal(
                    rng, mean[cells], cond_sd,
                    np.repeat(lo, sizes), np.repeat(hi, sizes),
                ))
                x[i, cells] = draw
                gmax[sel] = np.maximum.reduceat(draw, layout.parity_starts[parity])
                gmin[sel] = np.minimum.reduceat(draw, layout.parity_starts[parity])
        miss = bounds.missing[i]
        if miss.size:
            x[i, miss] = mean[miss] + cond_sd * rng.gen.standard_normal(miss.size)
        delta = x[i] - old_row
        if np.any(delta != 0.0):
            p_mat += np.outer(omega[:, i], delta)
    return latent


@dataclass(frozen=True)
class CopulaConfig:
    """Run-length and prior knobs for the outer copula chain.

    The outer iteration count is the embedded chain schedule's total sweep
    count; the two are deliberately not independent knobs.
    """

    chain: ChainConfig = field(default_factory=ChainConfig)
    inner_sweeps_per_outer: int = 1
    iw_prior_df: float | None = None

    def __post_init__(self):
        if self.inner_sweeps_per_outer < 1:
            raise InvalidParameter("inner_sweeps_per_outer must be >= 1")

    @property
    def outer_iters(self) -> int:
        return self.chain.total_sweeps

    def prior_df(self, r: int) -> float:
        df = self.iw_prior_df if self.iw_prior_df is not None else r + 2.0
        if df <= r - 1:
            raise InvalidParameter(
                f"inverse-Wishart prior df {df} must exceed r-1 = {r - 1}"
            )
        return df


def sample_sigma_full(latent: LatentMatrix, cfg: CopulaConfig, rng: RngStream,
                      rescale: bool = True) -> tuple[SpdMatrix, np.ndarray]:
    """Conjugate inverse-Wishart draw of the full latent covariance.

    Draws from IW(prior_df + n, I + X X') as the inverse of a Wishart
    variate. With ``rescale`` the draw is returned in correlation form
    along with the diagonal scale factors, which the caller must also
    apply to the latent rows (divide row i by factors[i]) to keep the
    joint state consistent; only ranks are identified, so this is pure
    gauge fixing.
    """
    x = latent.x
    r, n = x.shape
    df = cfg.prior_df(r) + n
    scale = np.eye(r) + x @ x.T
    l_g = cholesky((scale + scale.T) / 2.0).lower
    # f f' = inv(scale); any square root works for the Bartlett construction
    f = np.linalg.solve(l_g.T, np.eye(r))
    m = f @ _bartlett_lower(rng, df, r)
    wishart_draw = m @ m.T
    sigma = chol_inverse(cholesky((wishart_draw + wishart_draw.T) / 2.0))
    if not rescale:
        return SpdMatrix(sigma), np.ones(r)
    d = np.sqrt(np.diag(sigma))
    corr = sigma / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return SpdMatrix(corr), d


def run_copula_chain(table: MixedDataTable, query: list[str],
                     hyper: HyperParams | None = None,
                     cfg: CopulaConfig | None = None,
                     rng: RngStream | None = None) -> ChainOutput:
    """Blanket inference on mixed data through the latent Gaussian layer."""
    hyper = hyper if hyper is not None else HyperParams()
    cfg = cfg if cfg is not None else CopulaConfig()
    rng = rng if rng is not None else RngStream(cfg.chain.seed)

    if not query:
        raise InvalidParameter("need at least one query variable")
    name_to_idx = {name: i for i, name in enumerate(table.names)}
    for name in query:
        if name not in name_to_idx:
            raise UnknownVariable(f"query variable {name!r} not in table")
    query_idx = [name_to_idx[name] for name in query]
    other_idx = [i for i in range(table.r) if i not in set(query_idx)]
    if not other_idx:
        raise InvalidParameter("query must not cover every variable")
    ordered = table.reordered(query_idx + other_idx)

    p = len(query_idx)
    q = len(other_idx)
    r, n = ordered.r, ordered.n
    bounds = compute_bounds(ordered)
    latent = init_latent(ordered)
    sigma = SpdMatrix(np.eye(r))
    state = initial_state(p, q)
    chain_cfg = cfg.chain

    keep = chain_cfg.samples
    w11_draws = np.empty((keep, p, p))
    w12_draws = np.empty((keep, p, q))
    log_post = np.empty(keep)
    timings: dict[str, float] = {}
    mh_count = 0
    kept = 0
    total = cfg.outer_iters
    t_start = time.perf_counter()
    for outer in range(1, total + 1):
        t0 = time.perf_counter()
        latent = sample_latent(latent, sigma, bounds, rng)
        t1 = time.perf_counter()
        sigma, d = sample_sigma_full(latent, cfg, rng)
        latent.x /= d[:, None]
        t2 = time.perf_counter()
        timings["latent"] = timings.get("latent", 0.0) + (t1 - t0)
        timings["sigma"] = timings.get("sigma", 0.0) + (t2 - t1)

        x = latent.x
        s_full = x @ x.T
        cov = PartitionedCov(
            s11=s_full[:p, :p], s12=s_full[:p, p:], s22=s_full[p:, p:],
            n=n, query_names=tuple(ordered.names[:p]),
            other_names=tuple(ordered.names[p:]),
        )
        prec = build_structured_precision(cov.s22)
        for _ in range(cfg.inner_sweeps_per_outer):
            mh_count += gibbs_sweep(rng, state, cov, prec, hyper, chain_cfg,
                                    timings)
        after_burn = outer - chain_cfg.burn_in
        if after_burn > 0 and after_burn % chain_cfg.thin == 0:
            w11_draws[kept] = state.w11
            w12_draws[kept] = state.w12
            log_post[kept] = log_posterior_unnorm(state, cov, hyper.gamma)
            kept += 1
        if outer % 100 == 0:
            logger.info("outer %d/%d (kept %d, mh %d)", outer, total, kept,
                        mh_count)
    timings["total"] = time.perf_counter() - t_start
    return ChainOutput(
        w11=w11_draws, w12=w12_draws, log_post=log_post,
        mh_corrected=mh_count, timings=timings,
        query_names=tuple(ordered.names[:p]),
        other_names=tuple(ordered.names[p:]),
        hyper=hyper, config=chain_cfg,
    )
