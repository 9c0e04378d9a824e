"""Command-line interface: validate | propagate | experiment | compare-moments
| calibrate-ks.

Every run reads a schema-validated JSON config, embeds the config hash,
seed, and package version in all outputs, and writes byte-identical files
on reruns (timestamps live only in the sidecar run.log). Exit codes:
0 success, 1 runtime failure, 2 config/schema error.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    build_ensemble,
    build_grid,
    build_medium,
    build_regime,
    build_source,
    config_hash,
    load_config,
    medium_d,
)
from .errors import ParseError, PxspkError, SchemaError
from .io import write_csv, write_json, write_snapshot
from .moments import m11_diffusive, m11_kinetic, m11_prelimit
from .propagate import (
    SourceSpec,
    free_space_field,
    make_source,
    propagate_ito,
    propagate_paraxial,
    set_fft_workers,
)
from .rng import PURPOSE_SYNTH, SeedPath, generator
from .scaling import RegimeKind, validate_assumptions
from .stats import (
    EnsembleConfig,
    SolverKind,
    circularity_test,
    estimate_moment,
    independence_test,
    ks_exponential,
    merge_ensembles,
    run_ensemble,
    scintillation_index,
)


def _add_common(sub):
    sub.add_argument("--config", required=True, help="JSON config path")
    sub.add_argument("--seed", type=int, default=None, help="override ensemble seed")
    sub.add_argument("--threads", type=int, default=None,
                     help="FFT worker threads (fallback: PXSPK_THREADS)")
    sub.add_argument("--out", default="pxspk_out", help="output directory")


def _setup(args):
    threads = args.threads
    if threads is None and os.environ.get("PXSPK_THREADS"):
        threads = int(os.environ["PXSPK_THREADS"])
    set_fft_workers(threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log(out: Path, message: str):
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(out / "run.log", "a") as fh:
        fh.write(f"{stamp} {message}\n")


def _provenance(cfg, seed) -> dict:
    return {"config": config_hash(cfg), "seed": seed, "version": __version__}


def cmd_validate(args) -> int:
    out = _setup(args)
    cfg = load_config(args.config)
    medium = build_medium(cfg)
    regime = build_regime(cfg)
    print(f"resolved: theta={regime.theta!r} epsilon={regime.epsilon!r} "
          f"eta={regime.eta!r} beta={regime.beta!r} kind={regime.kind.value}")
    if "physical" in cfg["regime"]:
        print("physical scenario mapped through theta=1/(k0 l0), eps=l0/w0, "
              "eta=Z/(k0 w0)")
    if medium is None:
        print("[PASS] medium disabled (sigma_c = 0): free-space propagation")
        _log(out, f"validate {args.config} PASS (free space)")
        return 0
    report = validate_assumptions(medium, regime)
    for name, ok, detail in report.checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    print(f"metric theta^alpha*exp(C/eta^2) (alpha=1, C=1): "
          f"{report.metrics['theta_alpha_exp_c_over_eta2']!r}")
    _log(out, f"validate {args.config} {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def cmd_propagate(args) -> int:
    out = _setup(args)
    cfg = load_config(args.config)
    medium = build_medium(cfg)
    regime = build_regime(cfg)
    grid = build_grid(cfg, medium_d(cfg))
    source = build_source(cfg)
    seed = args.seed if args.seed is not None else cfg.get("ensemble", {}).get("seed", 0)

    snaps = sorted(args.snapshot_at or [])
    if snaps:
        z_final = snaps[-1]
    elif "ensemble" in cfg:
        z_final = cfg["ensemble"]["checkpoints"][-1]
    else:
        raise SchemaError("need --snapshot-at depths or an ensemble.checkpoints list")

    u0 = make_source(source, regime, grid)
    solver = propagate_paraxial if args.solver == "paraxial" else propagate_ito
    result = solver(u0, medium, regime, z_final, SeedPath(seed, 0, 0),
                    snapshot_at=snaps)

    prov = _provenance(cfg, seed)
    for snap in result.snapshots:
        write_snapshot(out / f"snapshot_z{snap.z:.6g}.pxfld", snap)
    write_csv(out / "norms.csv", ["z", "norm_ratio_minus_1"],
              [(z, drift) for z, drift in result.norm_log], preamble=prov)
    print(f"norm_drift_max={result.max_norm_drift!r} "
          f"boundary_mass={result.boundary_mass!r}")
    if medium is None:
        oracle = free_space_field(source, regime, grid, result.field.z)
        err = (np.sqrt(np.sum(np.abs(result.field.values - oracle.values) ** 2))
               / np.sqrt(np.sum(np.abs(oracle.values) ** 2)))
        print(f"max_rel_l2_err_vs_oracle={float(err)!r}")
    _log(out, f"propagate {args.config} solver={args.solver} seed={seed}")
    return 0


def _run_sharded(cfg, ens: EnsembleConfig, medium, regime, source, grid, out: Path):
    """Run the ensemble in resumable shards persisted under out/shards."""
    shard_size = cfg.get("ensemble", {}).get("shard_size", ens.n_realizations)
    shard_dir = out / "shards"
    shard_dir.mkdir(exist_ok=True)
    prov = _provenance(cfg, ens.seed)
    merged = None
    offset = 0
    while offset < ens.n_realizations:
        count = min(shard_size, ens.n_realizations - offset)
        tag = f"shard_{offset:08d}_{count}"
        data_path = shard_dir / f"{tag}.npy"
        meta_path = shard_dir / f"{tag}.json"
        shard_cfg = EnsembleConfig(
            n_realizations=count, seed=ens.seed, solver=ens.solver,
            probes=ens.probes, checkpoints=ens.checkpoints,
            batch_size=ens.batch_size)
        if data_path.exists() and meta_path.exists():
            import json as _json
            meta = _json.loads(meta_path.read_text())
            if meta.get("config") != prov["config"] or meta.get("seed") != ens.seed:
                raise PxspkError(f"{tag}: existing shard from a different config")
            samples = np.load(data_path)
            from .stats import EnsembleResult
            shard = EnsembleResult(
                samples=samples, checkpoints=ens.checkpoints, probes=ens.probes,
                seed=ens.seed, solver=ens.solver, realization_offset=offset,
                max_norm_drift=meta.get("max_norm_drift", 0.0),
                max_boundary_mass=meta.get("max_boundary_mass", 0.0))
        else:
            shard = run_ensemble(shard_cfg, medium, regime, source, grid,
                                 realization_offset=offset)
            np.save(data_path, shard.samples)
            write_json(meta_path, {**prov, "offset": offset, "count": count,
                                   "max_norm_drift": shard.max_norm_drift,
                                   "max_boundary_mass": shard.max_boundary_mass})
        merged = shard if merged is None else merge_ensembles(merged, shard)
        offset += count
    return merged


def cmd_experiment(args) -> int:
    out = _setup(args)
    cfg = load_config(args.config)
    medium = build_medium(cfg)
    regime = build_regime(cfg)
    grid = build_grid(cfg, medium_d(cfg))
    source = build_source(cfg)
    ens = build_ensemble(cfg, args.seed)
    est = cfg.get("estimators", {})
    prov = _provenance(cfg, ens.seed)

    result = _run_sharded(cfg, ens, medium, regime, source, grid, out)
    payload = {"meta": {**prov, "n_realizations": result.n_realizations,
                        "max_norm_drift": result.max_norm_drift,
                        "max_boundary_mass": result.max_boundary_mass},
               "checkpoints": list(result.checkpoints)}

    if est.get("scintillation", True):
        rows = []
        for ci, z in enumerate(result.checkpoints):
            inten = np.abs(result.at(ci)[:, 0]) ** 2
            s = scintillation_index(inten)
            rows.append((z, s.value, s.stderr, s.n_samples))
        write_csv(out / "scintillation.csv", ["z", "S", "stderr", "n"], rows,
                  preamble=prov)
        payload["scintillation"] = [
            {"z": z, "S": v, "stderr": e, "n": n} for z, v, e, n in rows]

    last = len(result.checkpoints) - 1
    if est.get("ks_exponential", True):
        ks = ks_exponential(np.abs(result.at(last)[:, 0]) ** 2)
        write_csv(out / "ks.csv", ["z", "statistic", "p_value", "n"],
                  [(result.checkpoints[last], ks.statistic, ks.p_value, ks.n)],
                  preamble=prov)
        payload["ks_exponential"] = {"z": result.checkpoints[last],
                                     "statistic": ks.statistic,
                                     "p_value": ks.p_value, "n": ks.n,
                                     "meta": ks.meta}

    if est.get("circularity", True):
        ct = circularity_test(result.at(last)[:, 0])
        payload["circularity"] = {"z": result.checkpoints[last],
                                  "statistic": ct.statistic, "p_value": ct.p_value,
                                  "n": ct.n}

    for pair in est.get("independence_pairs", []):
        it = independence_test(result.at(last)[:, pair[0]],
                               result.at(last)[:, pair[1]])
        payload.setdefault("independence", []).append(
            {"points": list(pair), "corr": it.statistic, "p_value": it.p_value,
             "n": it.n})

    mom_rows = []
    for pair in est.get("moment_pairs", []):
        for ci, z in enumerate(result.checkpoints):
            m = estimate_moment(result.at(ci), 1, 1, ([pair[0]], [pair[1]]))
            mom_rows.append(("mc_mu11", 1, 1, z, pair[0], pair[1],
                             m.value.real, m.value.imag, m.stderr))
    if mom_rows:
        write_csv(out / "moments_mc.csv",
                  ["formula", "p", "q", "z", "point_i", "point_j", "re", "im",
                   "stderr"], mom_rows, preamble=prov)

    write_json(out / "results.json", payload)
    _log(out, f"experiment {args.config} n={result.n_realizations}")
    return 0


def _limit_m11(medium, regime, source, z, probe, off_i, off_j):
    if medium is None:
        return None
    if regime.kind == RegimeKind.DIFFUSIVE:
        return m11_diffusive(medium, regime, source, z, probe.r,
                             off_i, off_j), "diffusive_m11"
    if regime.eta == 1.0:
        return m11_kinetic(medium, regime, source, z, probe.r,
                           off_i, off_j), "kinetic_m11"
    return None


def cmd_compare_moments(args) -> int:
    out = _setup(args)
    cfg = load_config(args.config)
    medium = build_medium(cfg)
    regime = build_regime(cfg)
    grid = build_grid(cfg, medium_d(cfg))
    source = build_source(cfg)
    ens = build_ensemble(cfg, args.seed)
    prov = _provenance(cfg, ens.seed)

    result = _run_sharded(cfg, ens, medium, regime, source, grid, out)
    probe = result.probes[0]
    offsets = [np.asarray(o) for o in probe.offsets]
    pairs = cfg.get("estimators", {}).get("moment_pairs")
    if not pairs:
        pairs = [[0, j] for j in range(len(offsets))]

    rows = []
    all_pass = True
    for ci, z in enumerate(result.checkpoints):
        for i, j in pairs:
            mc = estimate_moment(result.at(ci), 1, 1, ([i], [j]))
            pre = None
            if medium is not None:
                pre = m11_prelimit(medium, regime, source, z, probe.r, probe.r,
                                   offsets[i], offsets[j])
            lim = _limit_m11(medium, regime, source, z, probe, offsets[i],
                             offsets[j])
            if pre is not None:
                ok = abs(mc.value - pre.value) <= 3.0 * mc.stderr
                all_pass = all_pass and ok
            else:
                ok = True
            rows.append((z, _fmt_vec(probe.r), _fmt_vec(offsets[i]),
                         _fmt_vec(offsets[j]),
                         mc.value.real, mc.value.imag, mc.stderr,
                         pre.value.real if pre else float("nan"),
                         pre.value.imag if pre else float("nan"),
                         pre.quadrature_error if pre else float("nan"),
                         lim[0].real if lim else float("nan"),
                         lim[0].imag if lim else float("nan"),
                         lim[1] if lim else "none", ok))
    write_csv(out / "comparison.csv",
              ["z", "r", "x", "y", "mc_re", "mc_im", "mc_stderr",
               "prelimit_re", "prelimit_im", "prelimit_quaderr",
               "limit_re", "limit_im", "limit_formula", "within_3se"],
              rows, preamble=prov)

    payload = {"meta": prov, "all_within_3se": all_pass}

    sweep = cfg.get("compare", {}).get("theta_sweep")
    if sweep and medium is not None:
        payload["theta_sweep"] = _theta_sweep(cfg, medium, regime, source, grid,
                                              ens, result, pairs, offsets, out, prov)
    write_json(out / "compare.json", payload)
    print(f"all_within_3se={all_pass}")
    _log(out, f"compare-moments {args.config}")
    return 0


def _theta_sweep(cfg, medium, regime, source, grid, ens, ito_result, pairs,
                 offsets, out, prov):
    """Paraxial-vs-Ito max moment discrepancy across a theta sweep."""
    from .scaling import ScalingRegime

    last = len(ito_result.checkpoints) - 1
    rows = []
    discs = []
    for theta in sorted(cfg["compare"]["theta_sweep"], reverse=True):
        reg_theta = ScalingRegime(theta=theta, epsilon=regime.epsilon,
                                  eta=regime.eta, beta=regime.beta,
                                  kind=RegimeKind.CUSTOM)
        par_cfg = EnsembleConfig(
            n_realizations=ens.n_realizations, seed=ens.seed,
            solver=SolverKind.PARAXIAL, probes=ens.probes,
            checkpoints=ens.checkpoints, batch_size=ens.batch_size)
        par = run_ensemble(par_cfg, medium, reg_theta, source, grid)
        max_disc = 0.0
        max_err = 0.0
        for i, j in pairs:
            a = estimate_moment(par.at(last), 1, 1, ([i], [j]))
            b = estimate_moment(ito_result.at(last), 1, 1, ([i], [j]))
            max_disc = max(max_disc, abs(a.value - b.value))
            max_err = max(max_err, np.hypot(a.stderr, b.stderr))
        rows.append((theta, max_disc, max_err))
        discs.append(max_disc)
    write_csv(out / "trend.csv", ["theta", "max_discrepancy", "combined_stderr"],
              rows, preamble=prov)
    nonincreasing = all(discs[k + 1] <= discs[k] + 1e-15
                        for k in range(len(discs) - 1))
    return {"rows": [{"theta": t, "max_discrepancy": d, "combined_stderr": e}
                     for t, d, e in rows],
            "nonincreasing": nonincreasing}


def _fmt_vec(v) -> str:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    return ";".join(repr(float(x)) for x in arr)


def cmd_calibrate_ks(args) -> int:
    out = _setup(args)
    gen = generator(SeedPath(args.seed or 0, 0, 0), PURPOSE_SYNTH)
    stats = []
    for _ in range(args.trials):
        x = gen.exponential(scale=1.0, size=args.n)
        mean = x.mean()
        xs = np.sort(x)
        cdf = 1.0 - np.exp(-xs / mean)
        grid_hi = np.arange(1, args.n + 1) / args.n
        grid_lo = np.arange(0, args.n) / args.n
        stats.append(max(np.max(grid_hi - cdf), np.max(cdf - grid_lo)))
    stats = np.sort(np.asarray(stats))
    from scipy import special
    rows = []
    for level in (0.80, 0.90, 0.95, 0.99):
        crit = float(np.quantile(stats, level))
        asym_p = float(special.kolmogorov(np.sqrt(args.n) * crit))
        rows.append((level, crit, asym_p))
    write_csv(out / "ks_calibration.csv",
              ["level", "critical_value", "asymptotic_p_at_critical"], rows,
              preamble={"seed": args.seed or 0, "n": args.n,
                        "trials": args.trials, "version": __version__})
    print(f"wrote {out / 'ks_calibration.csv'}")
    _log(out, f"calibrate-ks n={args.n} trials={args.trials}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pxspk",
        description="Monte Carlo and analytic moments for beams in random media")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check config and medium assumptions")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("propagate", help="run one realization, write snapshots")
    _add_common(p)
    p.add_argument("--solver", choices=["ito", "paraxial"], default="ito")
    p.add_argument("--snapshot-at", type=float, nargs="*", default=None)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("experiment", help="full ensemble with estimators")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("compare-moments",
                       help="Monte Carlo vs quadrature vs limit moments")
    _add_common(p)
    p.set_defaults(func=cmd_compare_moments)

    p = sub.add_parser("calibrate-ks", help="simulate the estimated-mean KS null")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="pxspk_out")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_calibrate_ks)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PxspkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
