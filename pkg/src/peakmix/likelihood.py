"""Exact mixture likelihoods by per-marker genotype marginalization.

Given a hypothesis, each marker contributes a sum over admissible genotype
pairs of Dirichlet densities weighted by Hardy-Weinberg priors for the
unfixed contributors. Markers are independent given (theta, sigma), so the
joint log likelihood is the sum of marker terms; the sigma-profile
likelihood additionally averages theta over a discrete grid. All sums run
in the log domain via log-sum-exp in canonical enumeration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import (
    all_genotypes,
    beta_from_sigma,
    enumerate_genotype_pairs,
    hw_genotype_log_prior,
)
from .types import (
    DataError,
    FrequencyTable,
    Genotype,
    GenotypeConfig,
    Hypothesis,
    MarkerData,
    MixtureDataset,
    ModelParams,
    NumericError,
)


@dataclass(frozen=True)
class ThetaGrid:
    """Discretized mixture-proportion prior: support points and masses."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise ValueError("points and weights must be matching 1-d arrays")
        if np.any(pts <= 0) or np.any(pts >= 1):
            raise ValueError("grid points must lie in (0, 1)")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(wts <= 0) or abs(wts.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        pts = pts.copy()
        wts = wts.copy()
        pts.flags.writeable = False
        wts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def uniform(cls, step: float = 0.01) -> "ThetaGrid":
        """Uniform grid {step, 2*step, ..., 1 - step}."""
        n = round(1.0 / step) - 1
        if n < 1:
            raise ValueError(f"step {step} leaves no interior points")
        pts = np.arange(1, n + 1, dtype=float) * step
        wts = np.full(n, 1.0 / n)
        return cls(pts, wts / wts.sum())

    @classmethod
    def single(cls, theta: float) -> "ThetaGrid":
        return cls(np.array([theta]), np.array([1.0]))

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class MarkerGenotypeDist:
    """Normalized posterior over genotype pairs at one marker."""

    marker: str
    entries: tuple[tuple[tuple[Genotype, Genotype], float], ...]
    normalized: bool = True

    def probabilities(self) -> list[tuple[tuple[Genotype, Genotype], float]]:
        return [(pair, math.exp(lw)) for pair, lw in self.entries]

    def top(self) -> tuple[Genotype, Genotype]:
        return max(self.entries, key=lambda e: e[1])[0]


class _MarkerTerms:
    """Precomputed arrays for one marker under one hypothesis."""

    __slots__ = ("marker", "alleles", "pairs", "pair_index", "n1", "n2", "log_r", "log_prior")

    def __init__(self, md: MarkerData, h: Hypothesis, freqs: FrequencyTable | None):
        self.marker = md.marker
        self.alleles = md.alleles
        obs = md.allele_set

        g1f = h.known1.genotype(md.marker) if h.known1 is not None else None
        g2f = h.known2.genotype(md.marker) if h.known2 is not None else None

        pairs: list[tuple[Genotype, Genotype]] = []
        log_prior: list[float] = []
        if g1f is not None and g2f is not None:
            if g1f.support() | g2f.support() == obs:
                pairs.append((g1f, g2f))
                log_prior.append(0.0)
        elif g1f is not None or g2f is not None:
            fixed = g1f if g1f is not None else g2f
            if fixed.support() <= obs:
                for g in all_genotypes(md.alleles):
                    if fixed.support() | g.support() == obs:
                        pair = (fixed, g) if g1f is not None else (g, fixed)
                        pairs.append(pair)
                        log_prior.append(hw_genotype_log_prior(g, md.marker, freqs))
        else:
            for g1, g2 in enumerate_genotype_pairs(md.alleles):
                pairs.append((g1, g2))
                log_prior.append(
                    hw_genotype_log_prior(g1, md.marker, freqs)
                    + hw_genotype_log_prior(g2, md.marker, freqs)
                )

        self.pairs = pairs
        self.pair_index = {p: i for i, p in enumerate(pairs)}
        self.n1 = np.array([[g1.count(a) for a in md.alleles] for g1, _ in pairs], dtype=float)
        self.n2 = np.array([[g2.count(a) for a in md.alleles] for _, g2 in pairs], dtype=float)
        self.log_r = np.log(md.rel_sizes)
        self.log_prior = np.array(log_prior, dtype=float)

    def pair_terms(self, thetas: np.ndarray, beta: float) -> np.ndarray:
        """Log density-plus-prior of every pair at every theta; shape (J, P)."""
        if not self.pairs:
            return np.full((thetas.size, 0), -np.inf)
        th = thetas[:, None, None]
        mu = 0.5 * (th * self.n1 + (1.0 - th) * self.n2)
        alpha = beta * mu
        logdd = (
            gammaln(beta)
            - gammaln(alpha).sum(axis=2)
            + ((alpha - 1.0) * self.log_r).sum(axis=2)
        )
        return logdd + self.log_prior


def _check_freqs(h: Hypothesis, freqs: FrequencyTable | None):
    if h.n_unknown > 0 and freqs is None:
        raise DataError("frequency table required when a contributor is unknown")


class MixtureLikelihood:
    """Reusable evaluator: builds per-marker terms once, evaluates many params.

    The functional API below wraps this; fitting, sampling and bootstrap
    code uses it directly to avoid re-enumerating genotype pairs.
    """

    def __init__(self, ds: MixtureDataset, h: Hypothesis, freqs: FrequencyTable | None = None):
        if ds.markers:
            _check_freqs(h, freqs)
        self.ds = ds
        self.h = h
        self.terms = [_MarkerTerms(md, h, freqs) for md in ds.markers]

    @property
    def feasible(self) -> bool:
        return all(t.pairs for t in self.terms)

    def marker_logliks(self, grid_points: np.ndarray, sigma: float) -> np.ndarray:
        """Per-marker log likelihoods at each theta; shape (M, J)."""
        beta = beta_from_sigma(sigma)
        thetas = np.asarray(grid_points, dtype=float)
        out = np.empty((len(self.terms), thetas.size))
        for i, t in enumerate(self.terms):
            tp = t.pair_terms(thetas, beta)
            out[i] = logsumexp(tp, axis=1) if tp.shape[1] else -np.inf
        return out

    def loglik(self, theta: float, sigma: float) -> float:
        return float(self.marker_logliks(np.array([theta]), sigma).sum())

    def loglik_grid(self, grid: ThetaGrid, sigma: float) -> np.ndarray:
        """Joint log likelihood at every grid point; shape (J,)."""
        return self.marker_logliks(grid.points, sigma).sum(axis=0)

    def profile_loglik(self, grid: ThetaGrid, sigma: float) -> float:
        """Log likelihood of sigma with theta averaged over the grid."""
        return float(logsumexp(grid.log_weights + self.loglik_grid(grid, sigma)))

    def marker_pair_terms(self, i: int, theta: float, sigma: float) -> np.ndarray:
        """Unnormalized per-pair log weights for marker i; shape (P,)."""
        return self.terms[i].pair_terms(np.array([theta]), beta_from_sigma(sigma))[0]

    def config_indices(self, cfg: GenotypeConfig) -> np.ndarray | None:
        """Pair index per marker for a configuration, or None if unsupported."""
        idx = np.empty(len(self.terms), dtype=int)
        for i, t in enumerate(self.terms):
            j = t.pair_index.get(cfg.pair(t.marker))
            if j is None:
                return None
            idx[i] = j
        return idx

    def config_from_indices(self, idx: np.ndarray) -> GenotypeConfig:
        return GenotypeConfig(
            tuple(t.marker for t in self.terms),
            tuple(t.pairs[j] for t, j in zip(self.terms, idx)),
        )

    def config_log_prob(self, idx: np.ndarray, theta: float, sigma: float) -> float:
        """Log posterior probability of one configuration at fixed (theta, sigma)."""
        beta = beta_from_sigma(sigma)
        th = np.array([theta])
        total = 0.0
        for i, t in enumerate(self.terms):
            tp = t.pair_terms(th, beta)[0]
            total += tp[idx[i]] - logsumexp(tp)
        return total

    def config_log_prob_profile(self, idx: np.ndarray, grid: ThetaGrid, sigma: float) -> float:
        """Log posterior probability of one configuration with theta on the grid."""
        beta = beta_from_sigma(sigma)
        num = grid.log_weights.copy()
        den = grid.log_weights.copy()
        for i, t in enumerate(self.terms):
            tp = t.pair_terms(grid.points, beta)
            num += tp[:, idx[i]]
            den += logsumexp(tp, axis=1)
        return float(logsumexp(num) - logsumexp(den))


def marker_loglik(
    md: MarkerData,
    h: Hypothesis,
    params: ModelParams,
    freqs: FrequencyTable | None = None,
) -> float:
    """Log likelihood of one marker's relative sizes under a hypothesis.

    Sums Dirichlet densities with concentration beta * mu over all genotype
    pairs consistent with the hypothesis and the observed alleles, each
    weighted by the Hardy-Weinberg prior of its unfixed contributors.
    Returns -inf when no pair can explain the marker.
    """
    _check_freqs(h, freqs)
    t = _MarkerTerms(md, h, freqs)
    tp = t.pair_terms(np.array([params.theta]), params.beta)
    if tp.shape[1] == 0:
        return -math.inf
    return float(logsumexp(tp[0]))


def loglik_joint(
    ds: MixtureDataset,
    h: Hypothesis,
    params: ModelParams,
    freqs: FrequencyTable | None = None,
) -> float:
    """Joint log likelihood of the dataset: sum of marker log likelihoods."""
    return MixtureLikelihood(ds, h, freqs).loglik(params.theta, params.sigma)


def loglik_sigma_profile(
    ds: MixtureDataset,
    h: Hypothesis,
    sigma: float,
    grid: ThetaGrid,
    freqs: FrequencyTable | None = None,
) -> float:
    """Log likelihood of sigma alone, averaging theta over the grid prior."""
    return MixtureLikelihood(ds, h, freqs).profile_loglik(grid, sigma)


def genotype_posterior(
    md: MarkerData,
    h: Hypothesis,
    params: ModelParams,
    freqs: FrequencyTable | None = None,
) -> MarkerGenotypeDist:
    """Posterior distribution over genotype pairs at one marker."""
    _check_freqs(h, freqs)
    t = _MarkerTerms(md, h, freqs)
    tp = t.pair_terms(np.array([params.theta]), params.beta)
    if tp.shape[1] == 0:
        raise NumericError(
            f"marker {md.marker!r}: hypothesis cannot explain the observed alleles"
        )
    lw = tp[0] - logsumexp(tp[0])
    return MarkerGenotypeDist(
        md.marker, tuple((pair, float(w)) for pair, w in zip(t.pairs, lw))
    )


def log10_lr(
    ds: MixtureDataset,
    hp: Hypothesis,
    hd: Hypothesis,
    params_p: ModelParams,
    params_d: ModelParams,
    freqs: FrequencyTable | None = None,
) -> float:
    """Base-10 log likelihood ratio of hp against hd.

    Pass the same params for both hypotheses for shared-MLE evaluation (the
    default reporting convention), or per-hypothesis MLEs.
    """
    lp = loglik_joint(ds, hp, params_p, freqs)
    ld = loglik_joint(ds, hd, params_d, freqs)
    if lp == -math.inf and ld == -math.inf:
        raise NumericError("both hypotheses have zero likelihood")
    return (lp - ld) / math.log(10.0)
