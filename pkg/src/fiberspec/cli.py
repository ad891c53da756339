"""Command-line entry point.

Subcommands:

* ``spectrum``  - unperturbed-map diagnostics: invariant density samples,
  fitted decay rate, expanding-constant bound.
* ``stability`` - noise-level sweep checking density stability and the
  decay-rate bound; writes report.csv + report.json.
* ``corr``      - correlation sequence with its fitted exponential envelope.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 stability-report failure (the report is still written).
"""

import argparse
import json
import os
import sys

import numpy as np

from .bases import ShiftBase, base_from_json_dict
from .correlations import backward_corr_all, fit_decay_rate, fit_envelope, max_ratio
from .experiments import (
    ExperimentConfig,
    SweepError,
    _atomic_write,
    _fmt,
    rng_for_epsilon,
    run_deterministic_baseline,
    run_stability_sweep,
    write_report,
)
from .fiber import FiberFunction
from .maps import CircleMap, NewtonConvergenceError
from .skew import DensityError, RandomMapFamily, skew_fixed_density
from .spectral import ConvergenceError

NUMERICAL_ERRORS = (
    ConvergenceError,
    DensityError,
    SweepError,
    NewtonConvergenceError,
    np.linalg.LinAlgError,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fiberspec",
        description="Transfer-operator numerics for randomly perturbed "
                    "expanding circle maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    spectrum = sub.add_parser(
        "spectrum", help="unperturbed-map diagnostics (density, tau0, Lambda_r)"
    )
    spectrum.add_argument("config", help="JSON configuration file")
    spectrum.add_argument("--out", default=".", help="output directory")

    stability = sub.add_parser(
        "stability", help="noise sweep: density stability and rate bound"
    )
    stability.add_argument("config", help="JSON configuration file")
    stability.add_argument("--out", default=".", help="output directory")
    stability.add_argument("--seed", type=int, default=None,
                           help="override the sampling seed")

    corr = sub.add_parser(
        "corr", help="correlation sequence and fitted decay envelope"
    )
    corr.add_argument("config", help="JSON configuration file")
    corr.add_argument("--out", default=".", help="output directory")
    group = corr.add_mutually_exclusive_group()
    group.add_argument("--omega", default=None,
                       help="evaluation point (float, or comma-separated "
                            "symbols for shift bases)")
    group.add_argument("--samples", type=int, default=None,
                       help="average |sequence| over this many sampled points")
    corr.add_argument("--nmax", type=int, default=None,
                      help="override the sequence length")
    return parser


def _load_json(path):
    with open(path) as handle:
        return json.load(handle)


def _config_seed(doc, flag_seed):
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("FIBERSPEC_SEED")
    if env is not None:
        return int(env)
    return doc.get("seed", 0)


def _observables(doc, trunc):
    obs = doc.get("observables", {})
    phi = FiberFunction.cosine(obs.get("phi_mode", 1), trunc)
    u = FiberFunction.cosine(obs.get("u_mode", 2), trunc)
    return phi, u


def cmd_spectrum(args):
    try:
        doc = _load_json(args.config)
        circle_map = CircleMap.from_json_dict(doc["map"])
        trunc = doc.get("fourier_n", 64)
        n_max = doc.get("n_max", 12)
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        baseline = run_deterministic_baseline(circle_map, trunc, n_max)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    xs = np.arange(512) / 512
    values = baseline.rho0.evaluate(xs).real
    lines = ["x,value"]
    lines += [f"{_fmt(x)},{_fmt(v)}" for x, v in zip(xs, values)]
    _atomic_write(os.path.join(args.out, "density.csv"), "\n".join(lines) + "\n")
    print(json.dumps({
        "rho0_norm": baseline.rho0.c1_norm(),
        "tau0": baseline.tau0,
        "lambda_r": baseline.lambda_r,
    }, sort_keys=True))
    return 0


def cmd_stability(args):
    try:
        doc = _load_json(args.config)
        doc["seed"] = _config_seed(doc, args.seed)
        cfg = ExperimentConfig.from_json_dict(doc)
        if not cfg.epsilons:
            raise ValueError("config needs a non-empty 'epsilons' list")
        for eps in cfg.epsilons:
            cfg.family(eps)  # validates eps < eps_max up front
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_stability_sweep(cfg)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    csv_path, json_path = write_report(report, args.out)
    print(json.dumps({"status": report.status, "csv": csv_path,
                      "sidecar": json_path}, sort_keys=True))
    if report.status != "PASS":
        for clause in report.violations:
            print(f"violated: {clause}", file=sys.stderr)
        return 4
    return 0


def _parse_omega(text, base):
    if isinstance(base, ShiftBase):
        return tuple(int(s) for s in text.split(","))
    return float(text)


def cmd_corr(args):
    try:
        doc = _load_json(args.config)
        circle_map = CircleMap.from_json_dict(doc["map"])
        base = base_from_json_dict(doc["base"])
        noise = doc.get("noise", {})
        profile = noise.get("profile")
        if profile is None:
            profile = "levels" if isinstance(base, ShiftBase) else "cosine"
        epsilon = doc.get("epsilon")
        if epsilon is None:
            eps_list = doc.get("epsilons", [0.0])
            epsilon = eps_list[0] if eps_list else 0.0
        fam = RandomMapFamily(
            f0=circle_map,
            noise_kind=noise.get("kind", "additive"),
            epsilon=float(epsilon),
            coeff_index=noise.get("coeff_index", 0),
            profile=profile,
            levels=tuple(noise.get("levels", (1.0, -1.0))),
        )
        trunc = doc.get("fourier_n", 64)
        depth = doc.get("cylinder_depth", 6)
        n_max = args.nmax if args.nmax is not None else doc.get("n_max", 12)
        if n_max < 4:
            raise ValueError("n_max must be >= 4")
        seed = _config_seed(doc, None)
        phi, u = _observables(doc, trunc)
        omega = _parse_omega(args.omega, base) if args.omega is not None else None
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        rho, _ = skew_fixed_density(fam, base, trunc=trunc, depth=depth)
        seqs = backward_corr_all(fam, base, rho, phi, u, n_max, depth=depth)
        if omega is not None:
            if isinstance(base, ShiftBase):
                idx = base.word_index(omega, depth=depth)
            else:
                idx = base.nearest_index(omega)
            seq = seqs[:, idx]
        elif args.samples is not None:
            rng = rng_for_epsilon(seed, 0)
            cols = rng.choice(seqs.shape[1], size=min(args.samples, seqs.shape[1]),
                              replace=False)
            seq = np.mean(np.abs(seqs[:, cols]), axis=1)
        else:
            seq = np.mean(np.abs(seqs), axis=1)
        tau, coef = fit_decay_rate(seq)
        env_tau, env_coef = fit_envelope(seq)
        ratio = max_ratio(seq)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    lines = ["n,value,envelope"]
    for n, value in enumerate(seq, start=1):
        envelope = env_coef * env_tau**n if env_tau > 0 else 0.0
        lines.append(f"{n},{_fmt(value)},{_fmt(envelope)}")
    _atomic_write(os.path.join(args.out, "correlations.csv"),
                  "\n".join(lines) + "\n")
    print(json.dumps({
        "C": coef,
        "tau": tau,
        "tau_ratio": ratio,
        "rate_disagreement_flag": bool(abs(tau - ratio) > 0.1),
    }, sort_keys=True))
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "spectrum":
        return cmd_spectrum(args)
    if args.command == "stability":
        return cmd_stability(args)
    if args.command == "corr":
        return cmd_corr(args)
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
