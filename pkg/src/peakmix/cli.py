"""Batch command-line front end.

Subcommands: fit, evidence, bootstrap, gibbs, deconvolve, simulate.
Reports land in the output directory (flag --out, else $PEAKMIX_OUT, else
the working directory) as fit.json / lr.json / bootstrap.csv / trace.csv /
deconvolution.csv, each embedding the resolved configuration and seed.
Exit codes: 0 success, 2 data error, 3 numerical failure; errors go to
stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import io
from .bootstrap import bootstrap_lr, simulate_dataset
from .deconvolve import certified_topk
from .estimate import fit_joint, fit_sigma
from .gibbs import BetaPrior, bayes_log10_lr, run_chain
from .likelihood import ThetaGrid, log10_lr
from .model import augment_frequencies
from .streams import substream
from .types import (
    DataError,
    FrequencyTable,
    Hypothesis,
    MixtureDataset,
    ModelParams,
    NumericError,
    Profile,
)

OUT_ENV = "PEAKMIX_OUT"


@dataclass
class CaseConfig:
    """Fully resolved run configuration; embedded verbatim in every report."""

    command: str
    peaks: str
    freqs: str | None
    profiles: dict[str, str]
    slots: dict[str, int | None]
    hypothesis: str
    hd: str
    method: str
    theta_grid_step: float
    prior_shape: float
    prior_scale: float
    seed: int
    out_dir: str
    repeat_correct: bool
    repeats: str | None
    augment: list[str]
    db_size: int
    n_boot: int
    boot_genotypes: str
    chain_n: int
    burnin: int
    thin: int
    n_samples: int
    per_hypothesis_mle: bool
    sim_sigma: float | None
    sim_theta: float | None

    def to_dict(self) -> dict:
        return {k: (dict(v) if isinstance(v, dict) else v) for k, v in vars(self).items()}


@dataclass
class _Case:
    cfg: CaseConfig
    ds: MixtureDataset
    freqs: FrequencyTable | None
    profiles: dict[str, Profile]
    hp: Hypothesis
    hd: Hypothesis
    grid: ThetaGrid
    prior: BetaPrior
    out: Path


def _parse_profile_arg(arg: str) -> tuple[str, str, int | None]:
    if "=" not in arg:
        raise DataError(f"--profile expects NAME=PATH[:slot], got {arg!r}")
    name, rest = arg.split("=", 1)
    slot = None
    if rest.endswith((":1", ":2")):
        slot = int(rest[-1])
        rest = rest[:-2]
    if not name or not rest:
        raise DataError(f"--profile expects NAME=PATH[:slot], got {arg!r}")
    return name, rest, slot


def _parse_hypothesis(
    spec: str, profiles: dict[str, Profile], slots: dict[str, int | None]
) -> Hypothesis:
    tokens = [t.strip() for t in spec.split(",") if t.strip()]
    if len(tokens) == 1 and tokens[0] != "unknown":
        name = tokens[0]
        slot = slots.get(name)
        if slot is None:
            raise DataError(
                f"hypothesis {spec!r}: profile {name!r} needs a declared slot "
                "(--profile NAME=PATH:1 or :2) or a two-token spec"
            )
        tokens = [name, "unknown"] if slot == 1 else ["unknown", name]
    if len(tokens) != 2:
        raise DataError(f"hypothesis spec must name two contributors, got {spec!r}")
    fixed = []
    for tok in tokens:
        if tok == "unknown":
            fixed.append(None)
        elif tok in profiles:
            fixed.append(profiles[tok])
        else:
            raise DataError(f"hypothesis {spec!r} references unknown profile {tok!r}")
    return Hypothesis(known1=fixed[0], known2=fixed[1])


def _error(kind: str, message: str):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peakmix",
        description="Two-person DNA mixture analysis from relative peak sizes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--peaks", required=True, help="peak table CSV (marker,allele,area|rel)")
    common.add_argument("--freqs", help="allele frequency CSV (marker,allele,freq)")
    common.add_argument(
        "--profile",
        action="append",
        default=[],
        metavar="NAME=PATH[:slot]",
        help="known profile CSV; optional slot fixes it as contributor 1 or 2",
    )
    common.add_argument(
        "--hypothesis",
        default="unknown,unknown",
        help="comma pair of profile names or 'unknown' (contributor 1 first)",
    )
    common.add_argument("--theta-grid", type=float, default=0.01, metavar="STEP")
    common.add_argument("--prior", default="3.6,49", metavar="SHAPE,SCALE")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--repeat-correct", action="store_true")
    common.add_argument("--repeats", help="repeat-number CSV (allele,repeat)")
    common.add_argument(
        "--augment",
        action="append",
        default=[],
        metavar="NAME",
        help="add this profile to the frequency database before analysis",
    )
    common.add_argument("--db-size", type=int, default=302)

    p = sub.add_parser("fit", parents=[common], help="estimate sigma (and theta)")
    p.add_argument("--method", choices=["mle-sigma", "mle-joint", "bayes"], default="mle-joint")
    _chain_args(p)

    p = sub.add_parser("evidence", parents=[common], help="log10 likelihood ratio")
    p.add_argument("--method", choices=["mle-joint", "bayes"], default="mle-joint")
    p.add_argument("--hd", default="unknown,unknown", help="defence hypothesis spec")
    p.add_argument(
        "--per-hypothesis-mle",
        action="store_true",
        help="use each hypothesis's own MLE instead of the shared one",
    )
    _chain_args(p)

    p = sub.add_parser("bootstrap", parents=[common], help="parametric bootstrap of the LR")
    p.add_argument("--hd", default="unknown,unknown")
    p.add_argument("--n", type=int, default=2000, help="replicate count")
    p.add_argument("--boot-genotypes", choices=["posterior", "fixed"], default="posterior")

    p = sub.add_parser("gibbs", parents=[common], help="posterior sampling of (sigma, theta)")
    _chain_args(p)

    p = sub.add_parser("deconvolve", parents=[common], help="certified top-k profile pairs")
    p.add_argument("--method", choices=["mle", "bayes"], default="mle")
    p.add_argument("--n-samples", type=int, default=100_000)
    _chain_args(p)

    p = sub.add_parser("simulate", parents=[common], help="simulate peak sizes from the model")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)

    return parser


def _chain_args(p: argparse.ArgumentParser):
    p.add_argument("--chain-n", type=int, default=55_000)
    p.add_argument("--burnin", type=int, default=5_000)
    p.add_argument("--thin", type=int, default=5)


def _resolve(args: argparse.Namespace) -> CaseConfig:
    try:
        shape_s, scale_s = args.prior.split(",")
        shape, scale = float(shape_s), float(scale_s)
    except ValueError:
        raise DataError(f"--prior expects SHAPE,SCALE, got {args.prior!r}") from None
    profiles: dict[str, str] = {}
    slots: dict[str, int | None] = {}
    for arg in args.profile:
        name, path, slot = _parse_profile_arg(arg)
        profiles[name] = path
        slots[name] = slot
    out_dir = args.out or os.environ.get(OUT_ENV) or "."
    return CaseConfig(
        command=args.command,
        peaks=args.peaks,
        freqs=args.freqs,
        profiles=profiles,
        slots=slots,
        hypothesis=args.hypothesis,
        hd=getattr(args, "hd", "unknown,unknown"),
        method=getattr(args, "method", "mle-joint"),
        theta_grid_step=args.theta_grid,
        prior_shape=shape,
        prior_scale=scale,
        seed=args.seed,
        out_dir=out_dir,
        repeat_correct=args.repeat_correct,
        repeats=args.repeats,
        augment=list(args.augment),
        db_size=args.db_size,
        n_boot=getattr(args, "n", 0),
        boot_genotypes=getattr(args, "boot_genotypes", "posterior"),
        chain_n=getattr(args, "chain_n", 55_000),
        burnin=getattr(args, "burnin", 5_000),
        thin=getattr(args, "thin", 5),
        n_samples=getattr(args, "n_samples", 100_000),
        per_hypothesis_mle=getattr(args, "per_hypothesis_mle", False),
        sim_sigma=getattr(args, "sigma", None),
        sim_theta=getattr(args, "theta", None),
    )


def _load_case(cfg: CaseConfig) -> _Case:
    repeats = io.read_repeat_numbers(cfg.repeats) if cfg.repeats else None
    ds = io.read_peaks(cfg.peaks, cfg.repeat_correct, repeats)
    profiles = {name: io.read_profile(path) for name, path in cfg.profiles.items()}
    freqs = io.read_frequencies(cfg.freqs) if cfg.freqs else None
    if cfg.augment:
        if freqs is None:
            raise DataError("--augment requires --freqs")
        missing = [n for n in cfg.augment if n not in profiles]
        if missing:
            raise DataError(f"--augment references unknown profiles: {missing}")
        freqs = augment_frequencies(
            freqs, [profiles[n] for n in cfg.augment], weight=1.0, db_size=cfg.db_size
        )
    hp = _parse_hypothesis(cfg.hypothesis, profiles, cfg.slots)
    hd = _parse_hypothesis(cfg.hd, profiles, cfg.slots)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _Case(
        cfg=cfg,
        ds=ds,
        freqs=freqs,
        profiles=profiles,
        hp=hp,
        hd=hd,
        grid=ThetaGrid.uniform(cfg.theta_grid_step),
        prior=BetaPrior(cfg.prior_shape, cfg.prior_scale),
        out=out,
    )


def run_case(cfg: CaseConfig) -> list[Path]:
    """Execute the configured pipeline; returns the report paths written."""
    case = _load_case(cfg)
    handler = {
        "fit": _run_fit,
        "evidence": _run_evidence,
        "bootstrap": _run_bootstrap,
        "gibbs": _run_gibbs,
        "deconvolve": _run_deconvolve,
        "simulate": _run_simulate,
    }[cfg.command]
    return handler(case)


def _config_json(case: _Case) -> str:
    return json.dumps(case.cfg.to_dict(), sort_keys=True)


def _run_fit(case: _Case) -> list[Path]:
    cfg = case.cfg
    paths = []
    if cfg.method == "mle-sigma":
        fit = fit_sigma(case.ds, case.hp, case.grid, case.freqs)
        payload = {"method": cfg.method, "fit": fit.to_dict()}
    elif cfg.method == "mle-joint":
        fit = fit_joint(case.ds, case.hp, case.freqs)
        payload = {"method": cfg.method, "fit": fit.to_dict()}
    else:
        samples, summary = run_chain(
            case.ds, case.hp, case.grid, case.prior, case.freqs,
            cfg.chain_n, cfg.burnin, cfg.thin, cfg.seed,
        )
        payload = {"method": cfg.method, "fit": summary.to_dict()}
        trace = case.out / "trace.csv"
        io.write_trace_csv(samples, trace, comment=_config_json(case))
        paths.append(trace)
    payload["config"] = case.cfg.to_dict()
    out = case.out / "fit.json"
    io.write_json_report(payload, out)
    return [out, *paths]


def _run_evidence(case: _Case) -> list[Path]:
    cfg = case.cfg
    if cfg.method == "bayes":
        result = bayes_log10_lr(
            case.ds, case.hp, case.hd, case.grid, case.prior, case.freqs,
            cfg.chain_n, cfg.burnin, cfg.thin, cfg.seed,
        )
        payload = {
            "method": cfg.method,
            "log10_lr": result.log10_lr,
            "mc_se": result.se,
            "n_samples": result.n_samples,
        }
    else:
        fit_p = fit_joint(case.ds, case.hp, case.freqs)
        if cfg.per_hypothesis_mle:
            fit_d = fit_joint(case.ds, case.hd, case.freqs)
            value = log10_lr(case.ds, case.hp, case.hd, fit_p.params, fit_d.params, case.freqs)
            fits = {"hp": fit_p.to_dict(), "hd": fit_d.to_dict()}
        else:
            value = log10_lr(case.ds, case.hp, case.hd, fit_p.params, fit_p.params, case.freqs)
            fits = {"hp": fit_p.to_dict()}
        payload = {
            "method": cfg.method,
            "log10_lr": value,
            "shared_mle": not cfg.per_hypothesis_mle,
            "fits": fits,
        }
    payload["config"] = case.cfg.to_dict()
    out = case.out / "lr.json"
    io.write_json_report(payload, out)
    return [out]


def _run_bootstrap(case: _Case) -> list[Path]:
    cfg = case.cfg
    report = bootstrap_lr(
        case.ds, case.hp, case.hd, case.freqs,
        n=cfg.n_boot, seed=cfg.seed, genotype_mode=cfg.boot_genotypes,
    )
    table = case.out / "bootstrap.csv"
    io.write_bootstrap_csv(report, table, comment=_config_json(case))
    payload = report.to_dict()
    payload["config"] = case.cfg.to_dict()
    lr = case.out / "lr.json"
    io.write_json_report(payload, lr)
    return [table, lr]


def _run_gibbs(case: _Case) -> list[Path]:
    cfg = case.cfg
    samples, summary = run_chain(
        case.ds, case.hp, case.grid, case.prior, case.freqs,
        cfg.chain_n, cfg.burnin, cfg.thin, cfg.seed,
    )
    trace = case.out / "trace.csv"
    io.write_trace_csv(samples, trace, comment=_config_json(case))
    payload = {"method": "bayes", "fit": summary.to_dict(), "config": case.cfg.to_dict()}
    out = case.out / "fit.json"
    io.write_json_report(payload, out)
    return [out, trace]


def _run_deconvolve(case: _Case) -> list[Path]:
    cfg = case.cfg
    ranked = certified_topk(
        case.ds, case.hp, case.freqs,
        mode=cfg.method,
        grid=case.grid,
        prior=case.prior,
        chain_n=cfg.chain_n,
        chain_burnin=cfg.burnin,
        chain_thin=cfg.thin,
        n_samples=cfg.n_samples,
        seed=cfg.seed,
    )
    out = case.out / "deconvolution.csv"
    io.write_deconvolution_csv(ranked, out, comment=_config_json(case))
    summary = {
        "mode": ranked.mode,
        "total_mass": ranked.total_mass,
        "certified_k": ranked.certified_k,
        "n_discovered": len(ranked.entries),
        "config": case.cfg.to_dict(),
    }
    summary_path = case.out / "deconvolution.json"
    io.write_json_report(summary, summary_path)
    return [out, summary_path]


def _run_simulate(case: _Case) -> list[Path]:
    cfg = case.cfg
    params = ModelParams(theta=cfg.sim_theta, sigma=cfg.sim_sigma)
    rng = substream(cfg.seed)
    sim = simulate_dataset(case.ds, case.hp, params, case.freqs, rng)
    out = case.out / "sim_peaks.csv"
    io.write_peaks(sim, out, comment=_config_json(case))
    return [out]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        run_case(cfg)
    except DataError as exc:
        _error("data", str(exc))
        return 2
    except NumericError as exc:
        _error("numeric", str(exc))
        return 3
    except (ValueError, OSError) as exc:
        _error("data", str(exc))
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
