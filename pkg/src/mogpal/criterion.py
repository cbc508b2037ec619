"""Entropy-based selection objective over the sparse model and its fast gains.

The objective trades off picking target-type tuples that are uncertain given
the latent structure against picking tuples (of any type) that would force
the latent structure to be inferred from the unsampled remainder of the
target pool.  The expensive part of every evaluation, a solve against the
full target candidate pool, is independent of the selected set and is
therefore precomputed once into :class:`CriterionCache`; afterwards each
evaluation costs only the cube of the inducing count plus the cube of the
selected count.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IllConditionedError
from .exact import find_duplicates, joint_entropy
from .kernels import LOG_2PI_E, TupleArray
from .linalg import chol_spd
from .pitc import PitcModel, sparse_cov

__all__ = [
    "CriterionCache", "build_cache", "entropy_given_inducing",
    "mi_inducing_given", "criterion_F", "greedy_gain", "old_criterion",
    "GainEvaluator",
]


@dataclass(frozen=True)
class CriterionCache:
    """One-off precomputation shared by every criterion evaluation.

    ``target_summary`` is the inducing-space information contributed by the
    full target candidate pool; it is the only quantity whose construction
    touches all target candidates.  ``f_constant`` is the additive constant
    that pins the objective to zero at the empty set.  Per-selection
    summaries (the running per-type information blocks) live in
    :class:`GainEvaluator`, which is rebuilt each iteration.
    """

    model: PitcModel = field(repr=False)
    target_summary: np.ndarray
    f_constant: float
    logdet_kuu: float
    logdet_kuu_plus_summary: float
    g_all: np.ndarray = field(repr=False)
    local_index: np.ndarray = field(repr=False)
    target_cols: np.ndarray = field(repr=False)
    aux_cols: np.ndarray = field(repr=False)


def _target_summary(model: PitcModel):
    m = model.n_inducing
    tsum = np.zeros((m, m))
    for t in model.target_types:
        if t not in model.type_slices:
            continue
        w = model.W[t]
        factor = chol_spd(model.R[t], f"type-{t} residual block")
        tsum += w.T @ factor.solve(w)
    return tsum


def build_cache(model: PitcModel) -> CriterionCache:
    """Precompute the target-pool summary and candidate lookup tables."""
    tsum = _target_summary(model)
    logdet_kuu = model.kuu_factor.logdet
    logdet_plus = chol_spd(model.kuu + tsum, "augmented inducing covariance").logdet
    n = len(model.candidates)
    g_all = np.zeros((model.n_inducing, n))
    local_index = np.empty(n, dtype=int)
    for i, rows in model.type_slices.items():
        g_all[:, rows] = model.G[i]
        local_index[rows] = np.arange(rows.size)
    types = model.candidates.types
    is_target = np.isin(types, list(model.target_types))
    return CriterionCache(
        model=model,
        target_summary=tsum,
        f_constant=0.5 * (logdet_plus - logdet_kuu),
        logdet_kuu=logdet_kuu,
        logdet_kuu_plus_summary=logdet_plus,
        g_all=g_all,
        local_index=local_index,
        target_cols=np.flatnonzero(is_target),
        aux_cols=np.flatnonzero(~is_target),
    )


# ---------------------------------------------------------------------------
# set partitioning helpers
# ---------------------------------------------------------------------------

def _as_selection(model, x):
    tuples = list(x.tuples) if isinstance(x, TupleArray) else [
        t if hasattr(t, "type_index") else TupleArray.build([t], model.h).tuples[0]
        for t in x
    ]
    dups = find_duplicates(tuples)
    if dups:
        raise DomainError(f"selection contains duplicate tuples: {dups}")
    model.require_candidates(tuples)
    return tuples


class _SelectedBlocks:
    """Per-type residual factors and inducing information of a selected set."""

    def __init__(self, model, cache, tuples):
        self.by_type = {}
        for t in tuples:
            self.by_type.setdefault(t.type_index, []).append(model.tuple_index[t])
        self.local = {}
        self.w_sub = {}
        self.res_factor = {}
        self.info = {}
        for i, glob in self.by_type.items():
            li = cache.local_index[np.asarray(glob, dtype=int)]
            self.local[i] = li
            self.w_sub[i] = model.W[i][li]
            factor = chol_spd(
                model.R[i][np.ix_(li, li)], f"selected type-{i} residual block"
            )
            self.res_factor[i] = factor
            self.info[i] = self.w_sub[i].T @ factor.solve(self.w_sub[i])

    def info_sum(self, m, types=None):
        total = np.zeros((m, m))
        for i, block in self.info.items():
            if types is None or i in types:
                total += block
        return total

    def target_logdet(self, target_types):
        n, logdet = 0, 0.0
        for i in self.by_type:
            if i in target_types:
                n += len(self.by_type[i])
                logdet += self.res_factor[i].logdet
        return n, logdet


def _mi_logdets(model, cache, blocks, use_cache=True):
    m = model.n_inducing
    aux = set(model.h.aux_types)
    tsum = cache.target_summary if use_cache else _target_summary(model)
    s_x = blocks.info_sum(m)
    s_a = tsum + blocks.info_sum(m, types=aux)
    ld_x = chol_spd(model.kuu + s_x, "conditioned inducing covariance").logdet
    ld_a = chol_spd(model.kuu + s_a, "augmented conditioned inducing covariance").logdet
    return ld_x, ld_a


# ---------------------------------------------------------------------------
# criterion operations
# ---------------------------------------------------------------------------

def entropy_given_inducing(model: PitcModel, x_t):
    """Joint entropy of target-type tuples given the inducing measurements.

    Accepts the empty set (entropy 0 by the empty-determinant convention).
    The residual covariance is block diagonal per type, so the cost is the
    cube of the inducing count plus the cube of the set size.
    """
    from . import kernels

    tuples = list(x_t.tuples) if isinstance(x_t, TupleArray) else list(x_t)
    if not tuples:
        return 0.0
    for t in tuples:
        model.h.validate_tuple(t)
        if t.type_index not in model.target_types:
            raise DomainError(f"{t} is not of a target type {model.target_types}")
    total_n, total_logdet = 0, 0.0
    by_type = {}
    for t in tuples:
        by_type.setdefault(t.type_index, []).append(t)
    for i, sub in by_type.items():
        ta = TupleArray.build(sub, model.h)
        w = kernels.latent_cross_matrix(ta, model.inducing.locations, model.h)
        resid = kernels.cov_matrix(ta, ta, model.h) - w @ model.kuu_factor.solve(w.T)
        total_logdet += chol_spd(resid, f"type-{i} residual block").logdet
        total_n += len(sub)
    return 0.5 * (total_n * LOG_2PI_E + total_logdet)


def mi_inducing_given(model: PitcModel, cache: CriterionCache, x):
    """Information the unsampled target pool still carries about the latent
    measurements once ``x`` has been observed.

    Zero when the target pool is fully selected; nonnegative always (clamped
    against roundoff).  Reuses the cached target-pool summary so the cost
    per call does not grow with the target pool.
    """
    tuples = _as_selection(model, x)
    blocks = _SelectedBlocks(model, cache, tuples)
    ld_x, ld_a = _mi_logdets(model, cache, blocks)
    return max(0.0, 0.5 * (ld_a - ld_x))


def criterion_F(model: PitcModel, cache: CriterionCache, x, use_cache=True):
    """The augmented selection objective.

    Exactly zero at the empty set, and nondecreasing along any selection
    chain whenever every noise variance is at least ``1/(2 pi e)``.
    ``use_cache=False`` recomputes the target-pool summary from scratch
    (used to audit the cached path).
    """
    tuples = _as_selection(model, x)
    blocks = _SelectedBlocks(model, cache, tuples)
    n_t, ld_t = blocks.target_logdet(set(model.target_types))
    h_target = 0.5 * (n_t * LOG_2PI_E + ld_t)
    ld_x, ld_a = _mi_logdets(model, cache, blocks, use_cache=use_cache)
    if use_cache:
        f_const = cache.f_constant
    else:
        tsum = _target_summary(model)
        f_const = 0.5 * (
            chol_spd(model.kuu + tsum, "augmented inducing covariance").logdet
            - model.kuu_factor.logdet
        )
    return h_target - 0.5 * (ld_a - ld_x) + f_const


def greedy_gain(model: PitcModel, cache: CriterionCache, x, candidate):
    """Increase of the objective from adding ``candidate`` to the selection.

    For a target-type candidate this is its posterior entropy given the
    selection; for an auxiliary candidate it is that entropy minus the
    entropy left once the whole unsampled target pool is also conditioned
    on.  Equal to the direct objective difference.
    """
    tuples = _as_selection(model, x)
    if candidate in tuples:
        raise DomainError(f"candidate {candidate} is already selected")
    model.require_candidates([candidate])
    ev = GainEvaluator(model, cache)
    ev.set_state(tuples)
    return ev.gain_of(candidate)


def old_criterion(model: PitcModel, x, use_exact=False):
    """Posterior joint entropy of the unsampled target pool given ``x``.

    The original objective whose direct evaluation scales cubically with
    the target pool; kept as the oracle for equivalence checks.  Evaluated
    under the sparse joint model by default, or under the exact prior with
    ``use_exact=True``.
    """
    from . import kernels

    tuples = _as_selection(model, x)
    selected = set(tuples)
    rest = [
        t for t in model.candidates.tuples
        if t.type_index in model.target_types and t not in selected
    ]
    if not rest:
        return 0.0
    cov = kernels.cov_matrix if use_exact else (
        lambda a, b, h: sparse_cov(model, a, b)
    )
    ta = TupleArray.build(rest, model.h)
    c_ss = cov(ta, ta, model.h)
    if not tuples:
        return joint_entropy(c_ss)
    tx = TupleArray.build(tuples, model.h)
    c_sx = cov(ta, tx, model.h)
    factor = chol_spd(cov(tx, tx, model.h), "observation covariance")
    return joint_entropy(c_ss - c_sx @ factor.solve(c_sx.T))


# ---------------------------------------------------------------------------
# batched gain evaluation
# ---------------------------------------------------------------------------

class GainEvaluator:
    """Vectorized per-iteration gain evaluation over the whole pool.

    ``set_state`` factors the current selection once (inducing-count and
    selection-count cubes); the marginal cost per candidate afterwards is a
    few inducing-sized products, independent of the target-pool size.
    Evaluations for distinct candidates are pure and share no mutable state.
    """

    def __init__(self, model: PitcModel, cache: CriterionCache):
        self.model = model
        self.cache = cache
        self.selected = []
        self._blocks = None
        self._mx = None
        self._ma = None
        self._var_sel = None
        self._var_aug = None

    def set_state(self, selected):
        self.selected = _as_selection(self.model, selected)
        m = self.model.n_inducing
        self._blocks = _SelectedBlocks(self.model, self.cache, self.selected)
        aux = set(self.model.h.aux_types)
        self._mx = chol_spd(
            self.model.kuu + self._blocks.info_sum(m), "selection information"
        )
        self._ma = chol_spd(
            self.model.kuu + self.cache.target_summary + self._blocks.info_sum(m, types=aux),
            "augmented selection information",
        )
        self._var_sel = None
        self._var_aug = None
        return self

    # -- internal batched variance sweeps ---------------------------------
    def _sweep(self, cols, target_blocks, m_factor):
        """Posterior variances of candidates ``cols`` given the conditioning
        set encoded by (selected blocks restricted appropriately, plus the
        full target pool when ``target_blocks`` is set)."""
        model, cache, blocks = self.model, self.cache, self._blocks
        g = cache.g_all[:, cols]
        e1 = np.zeros(cols.size)
        hmat = np.zeros((model.n_inducing, cols.size))
        if target_blocks:
            p = cache.target_summary @ g
            e1 += np.einsum("mc,mc->c", g, p)
            hmat += p
        skip = set(model.target_types) if target_blocks else set()
        col_pos_by_type = {}
        for i in np.unique(model.candidates.types[cols]):
            col_pos_by_type[int(i)] = np.flatnonzero(model.candidates.types[cols] == i)
        for i, li in blocks.local.items():
            if i in skip:
                continue
            w_sub = blocks.w_sub[i]
            b = w_sub @ g
            pos = col_pos_by_type.get(i)
            if pos is not None and pos.size:
                lj = cache.local_index[cols[pos]]
                b[:, pos] = model.C[i][np.ix_(li, lj)]
            u = blocks.res_factor[i].solve(b)
            e1 += np.einsum("rc,rc->c", b, u)
            hmat += w_sub.T @ u
        quad2 = np.einsum("mc,mc->c", hmat, m_factor.solve(hmat))
        return self.model.prior_diag(cols) - (e1 - quad2)

    def var_given_selected(self):
        """Posterior variance of every candidate given the selection."""
        if self._var_sel is None:
            cols = np.arange(len(self.model.candidates))
            self._var_sel = self._sweep(cols, target_blocks=False, m_factor=self._mx)
        return self._var_sel

    def var_given_augmented(self):
        """Posterior variance of auxiliary candidates given the selection
        plus the whole unsampled target pool."""
        if self._var_aug is None:
            self._var_aug = self._sweep(
                self.cache.aux_cols, target_blocks=True, m_factor=self._ma
            )
        return self._var_aug

    def _selected_mask(self):
        mask = np.zeros(len(self.model.candidates), dtype=bool)
        for t in self.selected:
            mask[self.model.tuple_index[t]] = True
        return mask

    def _checked_log(self, var, positions):
        if np.any(var[positions] <= 0):
            raise IllConditionedError("nonpositive posterior variance in gain sweep")
        out = np.full(var.shape, -np.inf)
        out[positions] = np.log(var[positions])
        return out

    def entropies_given_selected(self):
        """Posterior marginal entropy of every unselected candidate
        (selected candidates get -inf)."""
        var = self.var_given_selected()
        free = np.flatnonzero(~self._selected_mask())
        log_var = self._checked_log(var, free)
        out = np.full(var.shape, -np.inf)
        out[free] = 0.5 * (LOG_2PI_E + log_var[free])
        return out

    def gains(self):
        """Objective gain of every unselected candidate; selected ones get -inf."""
        cache = self.cache
        mask = self._selected_mask()
        var_sel = self.var_given_selected()
        out = np.full(len(self.model.candidates), -np.inf)
        free_target = cache.target_cols[~mask[cache.target_cols]]
        log_sel = self._checked_log(var_sel, np.flatnonzero(~mask))
        out[free_target] = 0.5 * (LOG_2PI_E + log_sel[free_target])
        if cache.aux_cols.size:
            free_aux_pos = np.flatnonzero(~mask[cache.aux_cols])
            if free_aux_pos.size:
                var_aug = self.var_given_augmented()
                log_aug = self._checked_log(var_aug, free_aux_pos)
                free_aux = cache.aux_cols[free_aux_pos]
                out[free_aux] = 0.5 * (log_sel[free_aux] - log_aug[free_aux_pos])
        return out

    def gain_of(self, candidate):
        return float(self.gains()[self.model.tuple_index[candidate]])
