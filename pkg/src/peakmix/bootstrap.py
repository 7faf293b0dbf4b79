"""Parametric bootstrap of parameter estimates and log10 LR.

Each replicate simulates a fresh set of relative peak sizes from the
fitted model (genotype pairs drawn from their posterior at the baseline
MLE, then Dirichlet sizes via normalized gamma draws), refits, and
recomputes the shared-MLE likelihood ratio. Replicates use independent
counter-based substreams so results are reproducible regardless of
execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimate import FitOptions, FitResult, fit_joint
from .likelihood import MixtureLikelihood, log10_lr
from .streams import RNG_ALGORITHM, substream
from .types import (
    FrequencyTable,
    GenotypeConfig,
    Hypothesis,
    MarkerData,
    MixtureDataset,
    ModelParams,
    NumericError,
)

_SIZE_FLOOR = 1e-12


@dataclass(frozen=True)
class BootstrapReport:
    """Replicate estimates, percentile interval and reproducibility metadata."""

    sigma_hat: np.ndarray
    theta_hat: np.ndarray
    log10_lr: np.ndarray
    ci99_log10_lr: tuple[float, float]
    n: int
    n_failed: int
    seed: int
    rng: str
    baseline: FitResult
    baseline_log10_lr: float

    def to_dict(self) -> dict:
        qs = [1, 5, 10, 25, 50, 75, 90, 95, 99]
        histograms = {
            name: {
                "quantiles": dict(zip(qs, np.percentile(vals, qs).tolist())),
                "mean": float(vals.mean()),
                "sd": float(vals.std(ddof=1)) if vals.size > 1 else None,
            }
            for name, vals in (
                ("sigma_hat", self.sigma_hat),
                ("theta_hat", self.theta_hat),
                ("log10_lr", self.log10_lr),
            )
            if vals.size
        }
        return {
            "n": self.n,
            "n_failed": self.n_failed,
            "seed": self.seed,
            "rng": self.rng,
            "baseline_log10_lr": self.baseline_log10_lr,
            "baseline": self.baseline.to_dict(),
            "ci99_log10_lr": list(self.ci99_log10_lr),
            "histograms": histograms,
        }


def simulate_dataset(
    template: MixtureDataset,
    h: Hypothesis,
    params: ModelParams,
    freqs: FrequencyTable | None = None,
    rng: np.random.Generator | None = None,
    genotypes: GenotypeConfig | None = None,
) -> MixtureDataset:
    """Draw one synthetic dataset from the fitted model.

    Per marker, a genotype pair is drawn from its posterior given the
    template's observed sizes (fixed contributors stay fixed), unless a
    full configuration is supplied; relative sizes are then Dirichlet
    draws with concentration beta * mu over the pair's support.
    """
    if rng is None:
        rng = substream(0)
    ev = MixtureLikelihood(template, h, freqs)
    beta = params.beta
    markers = []
    for i, t in enumerate(ev.terms):
        if genotypes is not None:
            g1, g2 = genotypes.pair(t.marker)
        else:
            lw = ev.marker_pair_terms(i, params.theta, params.sigma)
            if lw.size == 0 or not np.isfinite(lw).any():
                raise NumericError(
                    f"marker {t.marker!r}: hypothesis cannot explain the observed alleles"
                )
            probs = np.exp(lw - lw.max())
            probs /= probs.sum()
            g1, g2 = t.pairs[rng.choice(lw.size, p=probs)]
        mf = _mean_fractions_arrays(g1, g2, params.theta)
        support, mu = mf
        w = rng.gamma(shape=beta * mu)
        w = np.maximum(w, _SIZE_FLOOR)
        markers.append(MarkerData(t.marker, support, w / w.sum()))
    return MixtureDataset(tuple(markers))


def _mean_fractions_arrays(g1, g2, theta: float):
    from .model import mean_fractions

    mf = mean_fractions(g1, g2, theta)
    return mf.as_arrays()


def bootstrap_lr(
    ds: MixtureDataset,
    hp: Hypothesis,
    hd: Hypothesis,
    freqs: FrequencyTable | None,
    n: int,
    seed: int = 0,
    opts: FitOptions | None = None,
    genotype_mode: str = "posterior",
) -> BootstrapReport:
    """Parametric bootstrap of (sigma, theta, log10 LR) under hp.

    genotype_mode 'posterior' redraws the genotype configuration from its
    posterior at the baseline MLE for every replicate; 'fixed' conditions
    all replicates on the maximum-posterior configuration.
    """
    if genotype_mode not in ("posterior", "fixed"):
        raise ValueError(f"unknown genotype_mode {genotype_mode!r}")
    baseline = fit_joint(ds, hp, freqs, opts)
    if not baseline.converged:
        raise NumericError("baseline fit did not converge")
    base_params = baseline.params
    baseline_lr = log10_lr(ds, hp, hd, base_params, base_params, freqs)

    fixed_cfg = None
    if genotype_mode == "fixed":
        ev = MixtureLikelihood(ds, hp, freqs)
        idx = np.array(
            [int(np.argmax(ev.marker_pair_terms(i, base_params.theta, base_params.sigma)))
             for i in range(len(ev.terms))]
        )
        fixed_cfg = ev.config_from_indices(idx)

    sig, the, lrs = [], [], []
    n_failed = 0
    for i in range(n):
        rng = substream(seed, i)
        try:
            sim = simulate_dataset(ds, hp, base_params, freqs, rng, genotypes=fixed_cfg)
            refit = fit_joint(sim, hp, freqs, opts)
            if not refit.converged:
                raise NumericError("replicate fit did not converge")
            p = refit.params
            lrs.append(log10_lr(sim, hp, hd, p, p, freqs))
            sig.append(refit.sigma)
            the.append(refit.theta)
        except (NumericError, ValueError):
            n_failed += 1
    if n_failed > 0.1 * n:
        raise NumericError(f"bootstrap aborted: {n_failed}/{n} replicate refits failed")

    lrs_arr = np.asarray(lrs)
    ci = tuple(np.percentile(lrs_arr, [0.5, 99.5]))  # type-7 empirical quantiles
    return BootstrapReport(
        sigma_hat=np.asarray(sig),
        theta_hat=np.asarray(the),
        log10_lr=lrs_arr,
        ci99_log10_lr=(float(ci[0]), float(ci[1])),
        n=n,
        n_failed=n_failed,
        seed=seed,
        rng=RNG_ALGORITHM,
        baseline=baseline,
        baseline_log10_lr=baseline_lr,
    )
