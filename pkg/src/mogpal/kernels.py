"""Prior covariance of the convolved multi-output GP.

A single latent spatial function is smoothed by one Gaussian kernel per
output type, so the covariance between two typed measurements is a Gaussian
density in their separation whose width adds the latent and per-type
smoothing contributions; observing the same tuple twice additionally shares
the measurement noise.

All precision matrices are diagonal and are stored as their inverses (the
diagonal covariance contributions), since only the inverse sums ever appear.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * math.pi
LOG_2PI_E = math.log(TWO_PI * math.e)

# Below this noise floor the augmented selection objective is no longer
# guaranteed to be nondecreasing (marginal entropies can go negative).
NOISE_FLOOR = 1.0 / (TWO_PI * math.e)


class TypedLocation(NamedTuple):
    """A sampling location paired with a measurement type index.

    ``location`` is a tuple of d float coordinates; equality is exact and
    componentwise.  The deterministic ordering used for tie-breaking sorts
    by ``(type_index, location)``.
    """

    location: tuple
    type_index: int

    @property
    def sort_key(self):
        return (self.type_index, self.location)


def as_location(coords):
    """Canonicalize coordinates to a tuple of floats."""
    if np.isscalar(coords):
        coords = (coords,)
    loc = tuple(float(c) for c in np.asarray(coords).ravel())
    if not all(math.isfinite(c) for c in loc):
        raise DomainError(f"non-finite coordinates: {loc}")
    return loc


def as_tuple(location, type_index):
    return TypedLocation(as_location(location), int(type_index))


@dataclass(frozen=True)
class Hyperparams:
    """All kernel and noise parameters of an M-type model.

    Attributes
    ----------
    signal_var : (M,) array
        Per-type signal variances, strictly positive.
    noise_var : (M,) array
        Per-type measurement noise variances, strictly positive.
    latent_prec_inv : (d,) array
        Diagonal of the inverse precision of the latent spatial function.
    smooth_prec_inv : (M, d) array
        Per-type diagonals of the inverse smoothing-kernel precisions.
    target_types : tuple of int
        Nonempty subset of type indices whose prediction is the goal of
        selection; the remaining types are auxiliary.
    """

    signal_var: np.ndarray
    noise_var: np.ndarray
    latent_prec_inv: np.ndarray
    smooth_prec_inv: np.ndarray
    target_types: tuple = (0,)

    def __post_init__(self):
        sv = np.atleast_1d(np.asarray(self.signal_var, dtype=float))
        nv = np.atleast_1d(np.asarray(self.noise_var, dtype=float))
        lp = np.atleast_1d(np.asarray(self.latent_prec_inv, dtype=float))
        sp = np.atleast_2d(np.asarray(self.smooth_prec_inv, dtype=float))
        object.__setattr__(self, "signal_var", sv)
        object.__setattr__(self, "noise_var", nv)
        object.__setattr__(self, "smooth_prec_inv", sp)
        object.__setattr__(self, "latent_prec_inv", lp)
        object.__setattr__(self, "target_types", tuple(int(t) for t in self.target_types))
        m, d = sv.shape[0], lp.shape[0]
        if nv.shape != (m,) or sp.shape != (m, d):
            raise ConfigError(
                f"inconsistent hyperparameter shapes: signal {sv.shape}, "
                f"noise {nv.shape}, latent diag {lp.shape}, smoothing {sp.shape}"
            )
        for arr, what in ((sv, "signal variances"), (nv, "noise variances"),
                          (lp, "latent precision diagonal"),
                          (sp, "smoothing precision diagonals")):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ConfigError(f"{what} must be finite and strictly positive")
        if not self.target_types:
            raise ConfigError("target_types must be nonempty")
        if any(t < 0 or t >= m for t in self.target_types):
            raise ConfigError(f"target type out of range [0, {m})")
        for arr in (sv, nv, lp, sp):
            arr.setflags(write=False)

    @property
    def n_types(self):
        return self.signal_var.shape[0]

    @property
    def dim(self):
        return self.latent_prec_inv.shape[0]

    @property
    def aux_types(self):
        return tuple(i for i in range(self.n_types) if i not in self.target_types)

    def signal_to_noise(self, i=None):
        """Per-type ratio of signal to noise variance."""
        rho = self.signal_var / self.noise_var
        return rho if i is None else float(rho[i])

    def pair_width(self, i, j):
        """Diagonal covariance of the (i, j) output-output density term.

        Summed in a canonical order so that (i, j) and (j, i) agree bitwise.
        """
        lo, hi = min(i, j), max(i, j)
        return self.latent_prec_inv + self.smooth_prec_inv[lo] + self.smooth_prec_inv[hi]

    def latent_width(self, i):
        """Diagonal covariance of the type-i output-latent density term."""
        return self.latent_prec_inv + self.smooth_prec_inv[i]

    def single_output(self, t):
        """One-type parameters equivalent to type ``t`` in isolation.

        The stationary kernel of type t against itself has width
        ``latent_prec_inv + 2 * smooth_prec_inv[t]``; splitting that evenly
        between the latent and smoothing contributions reproduces it in a
        single-type parameterization.
        """
        width = self.pair_width(t, t)
        return Hyperparams(
            signal_var=self.signal_var[[t]].copy(),
            noise_var=self.noise_var[[t]].copy(),
            latent_prec_inv=0.5 * width,
            smooth_prec_inv=0.25 * width[None, :],
            target_types=(0,),
        )

    def validate_tuple(self, p: TypedLocation):
        if not 0 <= p.type_index < self.n_types:
            raise DomainError(f"type index {p.type_index} out of range [0, {self.n_types})")
        if len(p.location) != self.dim:
            raise DomainError(
                f"location {p.location} has dimension {len(p.location)}, model expects {self.dim}"
            )


def gaussian_density(delta, diag_cov):
    """Multivariate normal density at ``delta`` with diagonal covariance.

    Returns ``(2 pi)^(-d/2) (prod diag_cov)^(-1/2) exp(-0.5 sum delta^2/diag_cov)``.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    diag_cov = np.atleast_1d(np.asarray(diag_cov, dtype=float))
    if delta.shape != diag_cov.shape:
        raise DomainError(f"shape mismatch: delta {delta.shape} vs diag_cov {diag_cov.shape}")
    if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(diag_cov))):
        raise DomainError("non-finite input to gaussian_density")
    if np.any(diag_cov <= 0):
        raise DomainError("diagonal covariance entries must be strictly positive")
    d = delta.shape[0]
    quad = float(np.sum(delta * delta / diag_cov))
    norm = TWO_PI ** (-0.5 * d) * float(np.prod(diag_cov)) ** -0.5
    return norm * math.exp(-0.5 * quad)


def output_cov(p: TypedLocation, q: TypedLocation, h: Hyperparams):
    """Prior covariance between two typed measurements.

    Adds the shared noise variance exactly when both the type indices and
    the coordinates coincide (repeated observation of one tuple).
    """
    h.validate_tuple(p)
    h.validate_tuple(q)
    i, j = p.type_index, q.type_index
    delta = np.asarray(p.location) - np.asarray(q.location)
    val = (
        math.sqrt(h.signal_var[i] * h.signal_var[j])
        * gaussian_density(delta, h.pair_width(i, j))
    )
    if i == j and p.location == q.location:
        val += float(h.noise_var[i])
    return val


def latent_cross_cov(p: TypedLocation, u, h: Hyperparams):
    """Prior covariance between a typed measurement and the latent function at ``u``."""
    h.validate_tuple(p)
    u = as_location(u)
    delta = np.asarray(p.location) - np.asarray(u)
    return math.sqrt(h.signal_var[p.type_index]) * gaussian_density(
        delta, h.latent_width(p.type_index)
    )


def latent_cov(u, u2, h: Hyperparams):
    """Prior covariance of the latent function between two locations."""
    delta = np.asarray(as_location(u)) - np.asarray(as_location(u2))
    return gaussian_density(delta, h.latent_prec_inv)


@dataclass(frozen=True)
class TupleArray:
    """Array view of a list of typed tuples, grouped for vectorized kernels."""

    tuples: tuple
    coords: np.ndarray
    types: np.ndarray
    _by_type: dict = field(repr=False, default=None)

    @classmethod
    def build(cls, tuples, h: Hyperparams = None):
        tuples = tuple(
            t if isinstance(t, TypedLocation) else as_tuple(*t) for t in tuples
        )
        n = len(tuples)
        if h is not None:
            for t in tuples:
                h.validate_tuple(t)
        d = len(tuples[0].location) if n else (h.dim if h is not None else 0)
        coords = np.array([t.location for t in tuples], dtype=float).reshape(n, d)
        types = np.array([t.type_index for t in tuples], dtype=int)
        coords.setflags(write=False)
        types.setflags(write=False)
        by_type = {}
        for i in np.unique(types):
            by_type[int(i)] = np.flatnonzero(types == i)
        return cls(tuples, coords, types, by_type)

    def __len__(self):
        return len(self.tuples)

    def indices_of_type(self, i):
        return self._by_type.get(int(i), np.empty(0, dtype=int))


def _pairwise_density(xa, xb, diag_cov):
    """Matrix of gaussian_density(xa[r] - xb[c], diag_cov) values."""
    diag_cov = np.asarray(diag_cov, dtype=float)
    d = diag_cov.shape[0]
    diff = xa[:, None, :] - xb[None, :, :]
    quad = np.einsum("rcv,v->rc", diff * diff, 1.0 / diag_cov)
    norm = TWO_PI ** (-0.5 * d) * float(np.prod(diag_cov)) ** -0.5
    return norm * np.exp(-0.5 * quad)


def cov_matrix(a, b, h: Hyperparams):
    """Prior covariance matrix between two tuple lists (vectorized).

    Accepts lists of :class:`TypedLocation` or prebuilt :class:`TupleArray`
    views.  When called with the same list twice the result is symmetric by
    construction (the (i, j) and (j, i) blocks are exact transposes).
    """
    ta = a if isinstance(a, TupleArray) else TupleArray.build(a, h)
    tb = b if isinstance(b, TupleArray) else TupleArray.build(b, h)
    out = np.zeros((len(ta), len(tb)))
    for i in np.unique(ta.types):
        ra = ta.indices_of_type(i)
        for j in np.unique(tb.types):
            rb = tb.indices_of_type(j)
            amp = math.sqrt(h.signal_var[i] * h.signal_var[j])
            block = amp * _pairwise_density(
                ta.coords[ra], tb.coords[rb], h.pair_width(i, j)
            )
            if i == j:
                same = np.all(
                    ta.coords[ra][:, None, :] == tb.coords[rb][None, :, :], axis=2
                )
                block = block + same * float(h.noise_var[i])
            out[np.ix_(ra, rb)] = block
    return out


def latent_cross_matrix(a, u_coords, h: Hyperparams):
    """Covariance matrix between typed tuples and latent locations."""
    ta = a if isinstance(a, TupleArray) else TupleArray.build(a, h)
    u_coords = np.atleast_2d(np.asarray(u_coords, dtype=float))
    out = np.zeros((len(ta), u_coords.shape[0]))
    for i in np.unique(ta.types):
        ra = ta.indices_of_type(i)
        out[ra] = math.sqrt(h.signal_var[i]) * _pairwise_density(
            ta.coords[ra], u_coords, h.latent_width(i)
        )
    return out


def latent_matrix(u_coords, h: Hyperparams):
    """Latent-function prior covariance matrix over a set of locations."""
    u_coords = np.atleast_2d(np.asarray(u_coords, dtype=float))
    return _pairwise_density(u_coords, u_coords, h.latent_prec_inv)
