"""Sparse multi-output GP through a small set of inducing locations.

The sparse joint model keeps the exact prior covariance within each
measurement type and routes all cross-type covariance through the latent
measurements at the inducing locations.  With a single type it therefore
coincides with the exact model, for any inducing set.  Conditioning on the
inducing measurements makes distinct types independent, which is the
structure the selection criterion exploits.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, IllConditionedError, ModelBuildError
from .exact import GaussianPrediction, find_duplicates
from .kernels import NOISE_FLOOR, Hyperparams, TupleArray
from .linalg import chol_spd

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# inducing-location selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KMeansRun:
    """Provenance of the clustering run that produced an inducing set."""

    seed: int
    iterations: int
    inertia: float


@dataclass(frozen=True)
class InducingSet:
    """Inducing locations plus the provenance of their selection."""

    locations: np.ndarray
    provenance: KMeansRun = None

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=float))
        if loc.shape[0] < 1:
            raise ModelBuildError("inducing set must contain at least one location")
        if np.unique(loc, axis=0).shape[0] != loc.shape[0]:
            raise ModelBuildError("inducing locations must be pairwise distinct")
        loc.setflags(write=False)
        object.__setattr__(self, "locations", loc)

    def __len__(self):
        return self.locations.shape[0]


def _kmeans_pp_init(coords, m, rng):
    n = coords.shape[0]
    centers = np.empty((m, coords.shape[1]))
    centers[0] = coords[rng.integers(n)]
    d2 = np.sum((coords - centers[0]) ** 2, axis=1)
    for k in range(1, m):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with chosen centers
            remaining = np.flatnonzero(d2 == 0)
            centers[k] = coords[remaining[0]]
            continue
        idx = rng.choice(n, p=d2 / total)
        centers[k] = coords[idx]
        d2 = np.minimum(d2, np.sum((coords - centers[k]) ** 2, axis=1))
    return centers


def select_inducing(candidates, m, seed) -> InducingSet:
    """Cluster candidate locations with seeded Lloyd's k-means.

    Exact duplicate coordinates are collapsed before clustering; the run is
    deterministic for a fixed seed (k-means++ initialization, at most 100
    iterations, stopping when the relative inertia change drops below 1e-6).
    """
    coords = np.atleast_2d(np.asarray(candidates, dtype=float))
    unique = list(dict.fromkeys(map(tuple, coords.tolist())))
    coords = np.asarray(unique, dtype=float)
    n = coords.shape[0]
    if m > n:
        raise ConfigError(f"requested {m} inducing locations from {n} distinct candidates")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(coords, m, rng)

    inertia_prev = np.inf
    iterations = 0
    for iterations in range(1, 101):
        d2 = np.sum((coords[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), assign].sum())
        for k in range(m):
            members = assign == k
            if members.any():
                centers[k] = coords[members].mean(axis=0)
            else:
                # deterministic empty-cluster fix: grab the worst-fit point
                far = int(np.argmax(d2[np.arange(n), assign]))
                centers[k] = coords[far]
                assign[far] = k
        if inertia_prev < np.inf and abs(inertia_prev - inertia) <= 1e-6 * max(inertia_prev, 1e-300):
            break
        inertia_prev = inertia

    d2 = np.sum((coords[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    inertia = float(d2.min(axis=1).sum())
    return InducingSet(
        locations=centers,
        provenance=KMeansRun(seed=int(seed), iterations=iterations, inertia=inertia),
    )


# ---------------------------------------------------------------------------
# sparse model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PitcModel:
    """Precomputed sparse model over a fixed candidate pool.

    Candidates are stored sorted by ``(type_index, location)`` so that
    argmax ties downstream break lexicographically.  Per type ``i`` the
    model caches the exact prior block ``C[i]``, the candidate-inducing
    cross covariance ``W[i]``, its inducing-solve ``G[i]`` and the residual
    block ``R[i] = C[i] - W[i] G[i]`` left after conditioning on the
    inducing measurements.
    """

    h: Hyperparams
    inducing: InducingSet
    kuu: np.ndarray
    kuu_factor: object = field(repr=False)
    candidates: TupleArray
    type_slices: dict = field(repr=False)
    W: dict = field(repr=False)
    G: dict = field(repr=False)
    C: dict = field(repr=False)
    R: dict = field(repr=False)
    tuple_index: dict = field(repr=False)

    @property
    def n_inducing(self):
        return len(self.inducing)

    @property
    def target_types(self):
        return self.h.target_types

    def candidate_list(self, types=None):
        if types is None:
            return list(self.candidates.tuples)
        types = set(types)
        return [t for t in self.candidates.tuples if t.type_index in types]

    def require_candidates(self, tuples):
        missing = [t for t in tuples if t not in self.tuple_index]
        if missing:
            raise DomainError(f"tuples not in the candidate pool: {missing}")

    def prior_diag(self, idx=None):
        diag = np.empty(len(self.candidates))
        for i, rows in self.type_slices.items():
            diag[rows] = np.diag(self.C[i])
        return diag if idx is None else diag[idx]


def build_model(h: Hyperparams, inducing: InducingSet, candidates_per_type) -> PitcModel:
    """Assemble and validate the sparse model over a candidate pool.

    ``candidates_per_type`` maps type index -> list of typed tuples (a list
    of lists indexed by type works too).  Fails if the inducing covariance
    is not positive definite after one jitter pass, if any within-type
    candidate appears twice, or if a target type has no candidates.
    """
    if isinstance(candidates_per_type, dict):
        per_type = {int(k): list(v) for k, v in candidates_per_type.items()}
    else:
        per_type = {i: list(v) for i, v in enumerate(candidates_per_type)}

    pool = []
    for i, tuples in sorted(per_type.items()):
        if not 0 <= i < h.n_types:
            raise ConfigError(f"candidate type {i} out of range [0, {h.n_types})")
        for t in tuples:
            h.validate_tuple(t)
            if t.type_index != i:
                raise ConfigError(f"tuple {t} listed under type {i}")
        dups = find_duplicates(tuples)
        if dups:
            raise ModelBuildError(f"duplicate candidates of type {i}: {dups}")
        pool.extend(tuples)
    for t in h.target_types:
        if not per_type.get(t):
            raise ModelBuildError(f"target type {t} has no candidate tuples")

    if inducing.locations.shape[1] != h.dim:
        raise ConfigError(
            f"inducing locations are {inducing.locations.shape[1]}-dimensional, "
            f"model expects {h.dim}"
        )
    if float(np.min(h.noise_var)) < NOISE_FLOOR:
        warnings.warn(
            "smallest noise variance %.4g is below 1/(2 pi e) ~ %.4g; the "
            "selection objective may not be nondecreasing" % (float(np.min(h.noise_var)), NOISE_FLOOR),
            stacklevel=2,
        )

    pool.sort(key=lambda t: t.sort_key)
    cands = TupleArray.build(pool, h)

    kuu = kernels.latent_matrix(inducing.locations, h)
    try:
        kuu_factor = chol_spd(kuu, "inducing covariance")
    except IllConditionedError as exc:
        raise ModelBuildError(f"inducing covariance is singular: {exc}") from None

    type_slices, W, G, C, R = {}, {}, {}, {}, {}
    for i in sorted({int(v) for v in np.unique(cands.types)}):
        idx = cands.indices_of_type(i)
        sub = TupleArray.build([cands.tuples[k] for k in idx], h)
        type_slices[i] = idx
        W[i] = kernels.latent_cross_matrix(sub, inducing.locations, h)
        G[i] = kuu_factor.solve(W[i].T)
        C[i] = kernels.cov_matrix(sub, sub, h)
        R[i] = C[i] - W[i] @ G[i]

    return PitcModel(
        h=h, inducing=inducing, kuu=kuu, kuu_factor=kuu_factor,
        candidates=cands, type_slices=type_slices, W=W, G=G, C=C, R=R,
        tuple_index={t: k for k, t in enumerate(cands.tuples)},
    )


# ---------------------------------------------------------------------------
# covariance assembly under the sparse joint model
# ---------------------------------------------------------------------------

def gamma(model: PitcModel, a, b):
    """Low-rank covariance through the inducing measurements."""
    ta = a if isinstance(a, TupleArray) else TupleArray.build(a, model.h)
    tb = b if isinstance(b, TupleArray) else TupleArray.build(b, model.h)
    w_a = kernels.latent_cross_matrix(ta, model.inducing.locations, model.h)
    w_b = kernels.latent_cross_matrix(tb, model.inducing.locations, model.h)
    return w_a @ model.kuu_factor.solve(w_b.T)


def lambda_blocks(model: PitcModel, a):
    """Per-type residual blocks after conditioning on the inducing measurements.

    Returned as a full matrix whose cross-type entries are exactly zero.
    """
    ta = a if isinstance(a, TupleArray) else TupleArray.build(a, model.h)
    out = np.zeros((len(ta), len(ta)))
    for i in np.unique(ta.types):
        idx = ta.indices_of_type(i)
        sub = TupleArray.build([ta.tuples[k] for k in idx], model.h)
        w = kernels.latent_cross_matrix(sub, model.inducing.locations, model.h)
        out[np.ix_(idx, idx)] = kernels.cov_matrix(sub, sub, model.h) - w @ model.kuu_factor.solve(w.T)
    return out


def sparse_cov(model: PitcModel, a, b):
    """Joint-model covariance: exact within a type, low-rank across types."""
    ta = a if isinstance(a, TupleArray) else TupleArray.build(a, model.h)
    tb = b if isinstance(b, TupleArray) else TupleArray.build(b, model.h)
    out = gamma(model, ta, tb)
    for i in np.unique(ta.types):
        ra = ta.indices_of_type(i)
        rb = tb.indices_of_type(i)
        if rb.size == 0:
            continue
        sub_a = TupleArray.build([ta.tuples[k] for k in ra], model.h)
        sub_b = TupleArray.build([tb.tuples[k] for k in rb], model.h)
        out[np.ix_(ra, rb)] = kernels.cov_matrix(sub_a, sub_b, model.h)
    return out


class _BlockFactors:
    """Woodbury pieces for the inverse of the sparse covariance of a set."""

    def __init__(self, model, tx):
        self.tx = tx
        self.types = [int(i) for i in np.unique(tx.types)]
        self.idx = {i: tx.indices_of_type(i) for i in self.types}
        self.sub = {
            i: TupleArray.build([tx.tuples[k] for k in self.idx[i]], model.h)
            for i in self.types
        }
        self.w = {
            i: kernels.latent_cross_matrix(self.sub[i], model.inducing.locations, model.h)
            for i in self.types
        }
        self.res_factor = {}
        m_info = model.kuu.copy()
        for i in self.types:
            resid = kernels.cov_matrix(self.sub[i], self.sub[i], model.h) - self.w[i] @ model.kuu_factor.solve(self.w[i].T)
            f = chol_spd(resid, f"type-{i} residual block")
            self.res_factor[i] = f
            m_info += self.w[i].T @ f.solve(self.w[i])
        self.m_factor = chol_spd(m_info, "inducing information matrix")

    def inv_apply(self, b):
        """Apply the inverse of (low-rank + block residual) to columns of b."""
        lam_inv_b = np.zeros_like(b)
        for i in self.types:
            lam_inv_b[self.idx[i]] = self.res_factor[i].solve(b[self.idx[i]])
        h = sum(self.w[i].T @ lam_inv_b[self.idx[i]] for i in self.types)
        corr = self.m_factor.solve(h)
        out = lam_inv_b.copy()
        for i in self.types:
            out[self.idx[i]] -= self.res_factor[i].solve(self.w[i] @ corr)
        return out


def pitc_posterior(model: PitcModel, x, y_x, z, method="auto") -> GaussianPrediction:
    """Sparse posterior of the measurements at ``z`` given observations at ``x``.

    ``method`` selects the solve route: "dense" factorizes the full
    observation covariance, "fast" inverts it through the inducing
    low-rank-plus-block structure (cost ``O(|x| (m^2 + (|x|/M)^2))``), and
    "auto" switches to the fast route once ``|x| > 3 m``.  Both routes agree
    to solver precision; the covariance is independent of ``y_x``.
    """
    h = model.h
    tx = x if isinstance(x, TupleArray) else TupleArray.build(x, h)
    tz = z if isinstance(z, TupleArray) else TupleArray.build(z, h)
    y_x = np.asarray(y_x, dtype=float).ravel()
    if y_x.shape[0] != len(tx):
        raise DomainError(f"{len(tx)} observations but {y_x.shape[0]} values")
    if set(tx.tuples) & set(tz.tuples):
        raise DomainError("query tuples overlap the observed tuples")

    c_zz = sparse_cov(model, tz, tz)
    if len(tx) == 0:
        return GaussianPrediction(mean=np.zeros(len(tz)), cov=c_zz)
    dups = find_duplicates(tx.tuples)
    if dups:
        raise IllConditionedError(
            "observation covariance is singular: duplicate tuples "
            + ", ".join(repr(d) for d in dups)
        )

    c_zx = sparse_cov(model, tz, tx)
    if method == "auto":
        method = "fast" if len(tx) > 3 * model.n_inducing else "dense"
    if method == "dense":
        factor = chol_spd(sparse_cov(model, tx, tx), "observation covariance")
        sol_y = factor.solve(y_x)
        sol_c = factor.solve(c_zx.T)
    elif method == "fast":
        blocks = _BlockFactors(model, tx)
        sol_y = blocks.inv_apply(y_x[:, None])[:, 0]
        sol_c = blocks.inv_apply(c_zx.T)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return GaussianPrediction(mean=c_zx @ sol_y, cov=c_zz - c_zx @ sol_c)
