import numpy as np
import pytest

import peakmix.bootstrap as bootstrap_mod
from peakmix.bootstrap import bootstrap_lr, simulate_dataset
from peakmix.streams import RNG_ALGORITHM, substream
from peakmix.types import (
    Genotype,
    GenotypeConfig,
    Hypothesis,
    MarkerData,
    MixtureDataset,
    ModelParams,
    NumericError,
    Profile,
)


@pytest.fixture
def fixed_pair_ds():
    profile1 = Profile({"M1": Genotype("a", "b"), "M2": Genotype("c", "c")})
    profile2 = Profile({"M1": Genotype("a", "a"), "M2": Genotype("c", "c")})
    ds = MixtureDataset(
        (
            MarkerData("M1", ("a", "b"), np.array([0.7, 0.3])),
            MarkerData("M2", ("c",), np.array([1.0])),
        )
    )
    return ds, Hypothesis(known1=profile1, known2=profile2)


class TestSimulateDataset:
    def test_shared_homozygote_stays_degenerate(self, fixed_pair_ds):
        ds, h = fixed_pair_ds
        params = ModelParams(theta=0.6, sigma=0.08)
        for i in range(20):
            sim = simulate_dataset(ds, h, params, None, substream(1, i))
            md = sim.by_marker("M2")
            assert md.alleles == ("c",)
            assert md.rel_sizes[0] == pytest.approx(1.0)

    def test_high_concentration_pins_sizes_to_mu(self, fixed_pair_ds):
        ds, h = fixed_pair_ds
        params = ModelParams(theta=0.6, sigma=0.005)
        # mu at M1: a carries one copy from each contributor -> (1+ (1-.6))/2?
        # c1=(a,b), c2=(a,a): mu_a = (.6*1 + .4*2)/2 = 0.7, mu_b = 0.3
        for i in range(100):
            sim = simulate_dataset(ds, h, params, None, substream(2, i))
            md = sim.by_marker("M1")
            rel = dict(zip(md.alleles, md.rel_sizes))
            assert rel["a"] == pytest.approx(0.7, abs=0.03)
            assert rel["b"] == pytest.approx(0.3, abs=0.03)

    def test_mean_matches_mu(self, fixed_pair_ds):
        ds, h = fixed_pair_ds
        params = ModelParams(theta=0.6, sigma=0.1)
        rng = substream(3)
        draws = np.array(
            [simulate_dataset(ds, h, params, None, rng).by_marker("M1").rel_sizes[0]
             for _ in range(20000)]
        )
        # Var R_a = sigma^2 mu (1 - mu)
        mc_se = np.sqrt(params.sigma**2 * 0.7 * 0.3 / draws.size)
        assert draws.mean() == pytest.approx(0.7, abs=3 * mc_se)

    def test_deterministic_given_stream(self, fixed_pair_ds):
        ds, h = fixed_pair_ds
        params = ModelParams(theta=0.6, sigma=0.08)
        a = simulate_dataset(ds, h, params, None, substream(9, 4))
        b = simulate_dataset(ds, h, params, None, substream(9, 4))
        assert all(
            np.array_equal(x.rel_sizes, y.rel_sizes) and x.alleles == y.alleles
            for x, y in zip(a.markers, b.markers)
        )

    def test_fixed_configuration(self, fixed_pair_ds):
        ds, h = fixed_pair_ds
        cfg = GenotypeConfig(
            ("M1", "M2"),
            ((Genotype("a", "b"), Genotype("a", "a")), (Genotype("c", "c"), Genotype("c", "c"))),
        )
        sim = simulate_dataset(ds, h, ModelParams(0.6, 0.05), None, substream(5), genotypes=cfg)
        assert sim.by_marker("M1").allele_set == {"a", "b"}


class TestBootstrapLr:
    def test_reproducible_and_reports(self, evett_ds, evett_major, evett_freqs_synth):
        hp = Hypothesis(known1=evett_major)
        hd = Hypothesis()
        r1 = bootstrap_lr(evett_ds, hp, hd, evett_freqs_synth, n=6, seed=42)
        r2 = bootstrap_lr(evett_ds, hp, hd, evett_freqs_synth, n=6, seed=42)
        assert np.array_equal(r1.log10_lr, r2.log10_lr)
        assert np.array_equal(r1.sigma_hat, r2.sigma_hat)
        assert r1.rng == RNG_ALGORITHM
        assert r1.n == 6 and r1.n_failed == 0
        assert r1.ci99_log10_lr[0] <= r1.ci99_log10_lr[1]

    def test_seed_changes_replicates(self, evett_ds, evett_major, evett_freqs_synth):
        hp = Hypothesis(known1=evett_major)
        hd = Hypothesis()
        r1 = bootstrap_lr(evett_ds, hp, hd, evett_freqs_synth, n=4, seed=0)
        r2 = bootstrap_lr(evett_ds, hp, hd, evett_freqs_synth, n=4, seed=1)
        assert not np.array_equal(r1.log10_lr, r2.log10_lr)

    def test_percentile_interval_monotone_in_level(self, evett_ds, evett_major, evett_freqs_synth):
        hp = Hypothesis(known1=evett_major)
        report = bootstrap_lr(evett_ds, hp, Hypothesis(), evett_freqs_synth, n=12, seed=3)
        lrs = report.log10_lr
        for lo_level, hi_level in [(90, 95), (95, 99)]:
            narrow = np.percentile(lrs, [(100 - lo_level) / 2, 100 - (100 - lo_level) / 2])
            wide = np.percentile(lrs, [(100 - hi_level) / 2, 100 - (100 - hi_level) / 2])
            assert wide[0] <= narrow[0] and narrow[1] <= wide[1]

    def test_fixed_genotype_mode(self, evett_ds, evett_major, evett_freqs_synth):
        hp = Hypothesis(known1=evett_major)
        report = bootstrap_lr(
            evett_ds, hp, Hypothesis(), evett_freqs_synth, n=4, seed=7, genotype_mode="fixed"
        )
        assert report.n_failed == 0

    def test_bad_mode_rejected(self, evett_ds, evett_major, evett_freqs_synth):
        with pytest.raises(ValueError):
            bootstrap_lr(
                evett_ds, Hypothesis(known1=evett_major), Hypothesis(),
                evett_freqs_synth, n=2, genotype_mode="jackknife",
            )

    def test_aborts_when_refits_fail(self, monkeypatch, evett_ds, evett_major, evett_freqs_synth):
        hp = Hypothesis(known1=evett_major)
        baseline = bootstrap_mod.fit_joint(evett_ds, hp, evett_freqs_synth)
        calls = {"n": 0}

        def flaky_fit(ds, h, freqs=None, opts=None):
            calls["n"] += 1
            if calls["n"] == 1:
                return baseline
            raise NumericError("synthetic failure")

        monkeypatch.setattr(bootstrap_mod, "fit_joint", flaky_fit)
        with pytest.raises(NumericError, match="aborted"):
            bootstrap_lr(evett_ds, hp, Hypothesis(), evett_freqs_synth, n=5, seed=0)
