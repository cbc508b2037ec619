"""Brute-force oracles and empirical certificates for the greedy selector.

The greedy selection enjoys a constant-factor guarantee relative to the
exhaustive optimum, degraded by how far the objective is from submodular;
this module measures every quantity in that statement on concrete
instances: the exhaustive optimum, the worst conditional variance reduction
(the relaxation parameter), and the observed diminishing-returns violations.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .criterion import CriterionCache, build_cache, criterion_F
from .errors import ConfigError, EnumerationGuardError
from .kernels import Hyperparams, TupleArray, as_tuple
from .linalg import chol_spd
from .pitc import PitcModel, build_model, select_inducing, sparse_cov
from .selector import select_greedy

__all__ = [
    "GuaranteeReport", "brute_force_optimum", "estimate_epsilon1",
    "check_guarantee", "audit_eps_submodularity", "random_instance",
    "blocked_conditional_var",
]

ENUMERATION_GUARD = 10**6
SUBSET_GUARD = 12


# ---------------------------------------------------------------------------
# seeded instance family
# ---------------------------------------------------------------------------

def random_hyperparams(rng, n_types=2, dim=1, target_types=(0,)):
    """Hyperparameters drawn from ranges that keep instances well behaved:
    noise above the entropy floor, moderate length scales."""
    return Hyperparams(
        signal_var=rng.uniform(0.5, 2.0, size=n_types),
        noise_var=rng.uniform(0.08, 0.35, size=n_types),
        latent_prec_inv=rng.uniform(0.05, 0.4, size=dim),
        smooth_prec_inv=rng.uniform(0.02, 0.3, size=(n_types, dim)),
        target_types=target_types,
    )


def random_instance(seed, n_per_type=(4, 4), dim=1, n_inducing=3,
                    target_types=(0,), spread=1.0):
    """A seeded small model plus its criterion cache, for sweeps and tests."""
    rng = np.random.default_rng(seed)
    n_types = len(n_per_type)
    h = random_hyperparams(rng, n_types=n_types, dim=dim, target_types=target_types)
    cands = {
        i: [as_tuple(rng.uniform(0, spread, size=dim), i) for _ in range(n_per_type[i])]
        for i in range(n_types)
    }
    all_locs = np.array([t.location for tuples in cands.values() for t in tuples])
    inducing = select_inducing(all_locs, n_inducing, seed=seed)
    model = build_model(h, inducing, cands)
    return model, build_cache(model)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def brute_force_optimum(model: PitcModel, cache: CriterionCache, n: int):
    """Exhaustive argmax of the objective over all size-n selections.

    Enumerates candidates in their deterministic (lexicographic) order, so
    exact ties resolve to the lexicographically smallest subset.  Refuses
    enumerations beyond 10^6 subsets.
    """
    cands = model.candidates.tuples
    total = math.comb(len(cands), n)
    if total > ENUMERATION_GUARD:
        raise EnumerationGuardError(
            f"C({len(cands)}, {n}) = {total} subsets exceeds the "
            f"{ENUMERATION_GUARD} enumeration guard"
        )
    best_subset, best_value = None, -np.inf
    for combo in itertools.combinations(cands, n):
        value = criterion_F(model, cache, list(combo))
        if value > best_value:
            best_subset, best_value = combo, value
    return list(best_subset), float(best_value)


def blocked_conditional_var(model: PitcModel, conditioning, z):
    """Posterior variance of tuple ``z`` given a tuple set, under the sparse
    joint model (dense evaluation)."""
    tz = TupleArray.build([z], model.h)
    v_zz = sparse_cov(model, tz, tz)[0, 0]
    if not conditioning:
        return float(v_zz)
    tc = TupleArray.build(list(conditioning), model.h)
    c_cc = sparse_cov(model, tc, tc)
    c_zc = sparse_cov(model, tz, tc)[0]
    factor = chol_spd(c_cc, "conditioning covariance")
    return float(v_zz - c_zc @ factor.solve(c_zc))


class _PreconditionedVar:
    """Variance queries var(z | subset + fixed) with the fixed part solved once."""

    def __init__(self, model, fixed, others):
        self.index = {t: k for k, t in enumerate(others)}
        to = TupleArray.build(others, model.h)
        cond = sparse_cov(model, to, to)
        if fixed:
            tf = TupleArray.build(fixed, model.h)
            c_ff = sparse_cov(model, tf, tf)
            c_of = sparse_cov(model, to, tf)
            cond = cond - c_of @ chol_spd(c_ff, "fixed conditioning").solve(c_of.T)
        self.cond = cond

    def var(self, z, subset):
        zi = self.index[z]
        if not subset:
            return float(self.cond[zi, zi])
        si = [self.index[t] for t in subset]
        c_ss = self.cond[np.ix_(si, si)]
        c_zs = self.cond[zi, si]
        sol = chol_spd(c_ss, "subset conditioning").solve(c_zs)
        return float(self.cond[zi, zi] - c_zs @ sol)


def estimate_epsilon1(model: PitcModel, x, samples=None, seed=0):
    """Worst extra variance reduction from the unexplored part of a selection.

    Maximizes, over subsets of ``x`` and auxiliary candidates outside it,
    the drop in posterior variance between conditioning on the subset plus
    the unsampled target pool and conditioning on all of ``x`` plus the
    unsampled target pool.  Nonnegative by conditioning monotonicity; zero
    when there are no auxiliary candidates.

    Subsets are enumerated exhaustively up to ``|x| <= 12``; beyond that a
    ``samples`` count must be given, and the result is only a lower bound.
    """
    x = list(x)
    model.require_candidates(x)
    target = set(model.target_types)
    x_target = {t for t in x if t.type_index in target}
    x_aux = {t for t in x if t.type_index not in target}
    fixed = [
        t for t in model.candidates.tuples
        if t.type_index in target and t not in x_target
    ]
    aux_candidates = [
        t for t in model.candidates.tuples
        if t.type_index not in target and t not in x_aux
    ]
    if not aux_candidates:
        return 0.0

    if len(x) > SUBSET_GUARD and samples is None:
        raise EnumerationGuardError(
            f"2^{len(x)} subsets exceed the enumeration guard; "
            "pass a sample count for a (lower-bound) estimate"
        )
    if samples is None:
        subsets = [list(c) for k in range(len(x) + 1)
                   for c in itertools.combinations(x, k)]
    else:
        rng = np.random.default_rng(seed)
        subsets = [[]]
        for _ in range(samples):
            mask = rng.integers(0, 2, size=len(x)).astype(bool)
            subsets.append([t for t, keep in zip(x, mask) if keep])

    others = [t for t in model.candidates.tuples if t not in set(fixed)]
    pre = _PreconditionedVar(model, fixed, others)
    worst = 0.0
    full_var = {z: pre.var(z, x) for z in aux_candidates}
    for subset in subsets:
        for z in aux_candidates:
            worst = max(worst, pre.var(z, subset) - full_var[z])
    return worst


@dataclass(frozen=True)
class GuaranteeReport:
    """All quantities of one near-optimality check, plus the verdict.

    ``bound`` is ``(1 - 1/e) (f_opt - budget * epsilon)`` and the check is
    satisfied when the greedy value reaches it (within 1e-9).  ``status``
    is "pass", "fail", or "inconclusive" when the relaxation parameter was
    only sampled (a lower bound can produce spurious violations).
    """

    instance: str
    budget: int
    f_greedy: float
    f_opt: float
    epsilon1_hat: float
    epsilon: float
    bound: float
    satisfied: bool
    status: str

    def to_line(self):
        return (
            f"instance={self.instance} budget={self.budget} "
            f"f_greedy={self.f_greedy:.12g} f_opt={self.f_opt:.12g} "
            f"epsilon1_hat={self.epsilon1_hat:.12g} epsilon={self.epsilon:.12g} "
            f"bound={self.bound:.12g} satisfied={str(self.satisfied).lower()} "
            f"status={self.status}"
        )


def check_guarantee(model: PitcModel, cache: CriterionCache, n: int,
                    instance="adhoc", samples=None, seed=0) -> GuaranteeReport:
    """Run greedy and exhaustive selection and assemble the certificate."""
    greedy = select_greedy(model, cache, n)
    f_greedy = criterion_F(model, cache, greedy.selected)
    _, f_opt = brute_force_optimum(model, cache, n)
    if f_greedy > f_opt + 1e-9:
        raise AssertionError(
            f"greedy value {f_greedy} exceeds exhaustive optimum {f_opt}"
        )
    eps1 = estimate_epsilon1(model, greedy.selected, samples=samples, seed=seed)
    sig2n = float(np.min(model.h.noise_var))
    epsilon = 0.5 * math.log1p(eps1 / sig2n)
    bound = (1.0 - 1.0 / math.e) * (f_opt - n * epsilon)
    satisfied = f_greedy >= bound - 1e-9
    if satisfied:
        status = "pass"
    else:
        status = "inconclusive" if samples is not None else "fail"
    return GuaranteeReport(
        instance=instance, budget=n, f_greedy=f_greedy, f_opt=f_opt,
        epsilon1_hat=eps1, epsilon=epsilon, bound=bound,
        satisfied=satisfied, status=status,
    )


def audit_eps_submodularity(model: PitcModel, cache: CriterionCache,
                            samples: int, seed=0):
    """Sample nested selections and measure diminishing-returns violations.

    Draws pairs ``A within A'`` and an outside candidate ``a``, compares the
    objective gain of ``a`` at both, and records the largest positive
    excess (gain under the larger context beyond gain under the smaller).
    Also measures, for auxiliary candidates, the variance-reduction bound
    that the theory converts into a tolerated excess; returns
    ``(max_excess, epsilon_required)``.
    """
    rng = np.random.default_rng(seed)
    cands = model.candidates.tuples
    n = len(cands)
    target = set(model.target_types)
    max_excess = -np.inf
    worst_eps1 = 0.0
    for _ in range(samples):
        size_big = int(rng.integers(0, min(n - 1, 6) + 1))
        big_idx = rng.choice(n, size=size_big, replace=False)
        big = [cands[i] for i in sorted(big_idx)]
        keep = rng.integers(0, 2, size=size_big).astype(bool)
        small = [t for t, k in zip(big, keep) if k]
        outside = [t for t in cands if t not in set(big)]
        a = outside[int(rng.integers(len(outside)))]

        gain_small = criterion_F(model, cache, small + [a]) - criterion_F(
            model, cache, small
        )
        gain_big = criterion_F(model, cache, big + [a]) - criterion_F(
            model, cache, big
        )
        max_excess = max(max_excess, gain_big - gain_small)

        if a.type_index not in target:
            big_t = {t for t in big if t.type_index in target}
            rest = [
                t for t in cands
                if t.type_index in target and t not in big_t
            ]
            v_small = blocked_conditional_var(model, small + rest, a)
            v_big = blocked_conditional_var(model, big + rest, a)
            worst_eps1 = max(worst_eps1, v_small - v_big)
    sig2n = float(np.min(model.h.noise_var))
    eps_required = 0.5 * math.log1p(worst_eps1 / sig2n)
    return float(max_excess), float(eps_required)
