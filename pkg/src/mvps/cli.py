"""Command-line interface: ``mvps <subcommand> --config FILE [overrides]``.

Every subcommand writes ``<subcommand>.json`` (report, with a ``timestamp``
field) and ``<subcommand>.csv`` (data) to the output directory, chosen as
``--out``, else ``output.directory`` in the config, else ``$MVPS_OUT``, else
``./mvps_out``.

Exit codes: 0 all checks passed, 1 a check failed (files still written),
2 invalid input.
"""

import argparse
import dataclasses
import datetime
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, exactlaw, kernel, prior, urn
from .calibration import CALIBRATION
from .config import ExperimentConfig
from .errors import MVPSError, NegativeEntries
from .general import check_atom_preservation, halfline, mc_kernel_check
from .measure import TOL
from .report import REPORT_SCHEMA_VERSION, CheckReport, combine, write_csv, write_json

EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


@dataclasses.dataclass
class Result:
    passed: bool
    payload: dict
    header: list
    rows: list
    trajectory: object = None


def _tol(cfg):
    return TOL if cfg.task.tol is None else cfg.task.tol


def _z(cfg, default):
    return default if cfg.task.z_max is None else cfg.task.z_max


def _finite(cfg, what):
    if not cfg.model.is_finite:
        raise MVPSError(f"{what} needs a finite kernel matrix in model.kernel")
    return cfg.model.spec()


def _report_rows(reports):
    return [[r.name, r.passed, r.max_residual, r.tol] for r in reports]


def cmd_simulate(cfg):
    t = cfg.task
    spec = cfg.model.spec()
    if spec.is_finite:
        traj = urn.simulate(spec, t.n, t.seed)
        labels = spec.space.labels
        header = ["step", "draw"] + [f"p_{a}" for a in labels]
        rows = [[i, traj.labels[i - 1] if i else ""] + traj.snapshots[i].tolist() for i in range(t.n + 1)]
        draws = list(traj.labels)
    else:
        traj = urn.general_simulate(spec, t.n, t.seed)
        header, rows = ["step", "point"], [[i + 1, p] for i, p in enumerate(traj.draws)]
        draws = list(traj.draws)
    payload = {"spec_hash": spec.hash(), "n": t.n, "kind": traj.kind, "draws": draws}
    return Result(True, payload, header, rows, traj)


def cmd_check_exchangeable(cfg):
    spec = _finite(cfg, "check-exchangeable")
    rep = exactlaw.check_exchangeable(spec, cfg.task.depth, _tol(cfg))
    law = exactlaw.joint_law(spec, cfg.task.depth)
    header = [f"x{i + 1}" for i in range(law.depth)] + ["probability"]
    rows = [list(tup) + [p] for tup, p in law.table.items()]
    return Result(rep.passed, {"report": rep.to_dict()}, header, rows)


def cmd_check_cid(cfg):
    spec = _finite(cfg, "check-cid")
    rep = exactlaw.check_cid(spec, cfg.task.depth, _tol(cfg))
    rows = sorted(rep.details["per_history_length"].items())
    return Result(rep.passed, {"report": rep.to_dict()}, ["history_length", "max_residual"], rows)


def _finite_kernel_checks(cfg):
    m, tol = cfg.model, _tol(cfg)
    checks = cfg.task.checks
    raw = m.kernel_matrix()
    reports = []
    if "non_negative" in checks:
        reports.append(kernel.detect_negative(raw, tol))
    if np.any(raw < 0):
        skipped = [c for c in checks if c != "non_negative"]
        return reports, {"skipped_negative_kernel": skipped}
    K, nu = m.finite_kernel(), m.nu_vector()
    atoms = kernel.atoms_of_kernel(K, tol)
    if "balanced" in checks:
        reports.append(kernel.check_balanced(K, nu, tol))
    if "stationary" in checks:
        reports.append(kernel.check_scaled_stationarity(K, nu, tol=tol))
    if "self_averaging" in checks:
        reports.append(kernel.check_self_averaging(K, nu, tol))
    if "proper" in checks:
        part = m.partition_obj() or atoms
        reports.append(kernel.check_proper(K, nu, part, tol))
    return reports, {"atoms": atoms.label_blocks()}


def cmd_check_kernel(cfg):
    if cfg.model.is_finite:
        reports, extra = _finite_kernel_checks(cfg)
    else:
        t = cfg.task
        K = cfg.model.general_kernel()
        sets = {f"(-inf,{x:g}]": halfline(x) for x in t.test_sets}
        reports = [mc_kernel_check(K, sets, t.replicates, t.seed, _z(cfg, CALIBRATION.z_max))]
        if K.atom_map is not None:
            reports.append(check_atom_preservation(K, t.replicates, t.seed))
        extra = {}
    total = combine("check_kernel", reports)
    payload = {"report": total.to_dict(), **extra}
    return Result(total.passed, payload, ["check", "passed", "max_residual", "tol"], _report_rows(reports))


def cmd_decompose(cfg):
    _finite(cfg, "decompose")
    dec = kernel.decompose_blocks(cfg.model.finite_kernel(), cfg.model.nu_vector(), _tol(cfg))
    payload = {"report": dec.report.to_dict(), "blocks": dec.label_blocks(include_null=False)}
    if dec.null_block is not None:
        payload["null_set"] = dec.partition.label_blocks()[dec.null_block]
    rows = []
    if dec.partition is not None:
        names = dec.partition.names
        labels = dec.partition.space.labels
        for i, b in enumerate(dec.partition.block_of):
            rows.append([labels[i], "Z" if b == dec.null_block else names[b]])
    return Result(dec.passed, payload, ["state", "block"], rows)


def cmd_structure_cid(cfg):
    _finite(cfg, "structure-cid")
    rep = exactlaw.check_cid_structure(cfg.model.finite_kernel(), cfg.model.nu_vector(), _tol(cfg))
    rows = [["|".join(r["block"]), r["mass"], r["nu_mass"], r["nu_mass_given_block"]] for r in rep.details.get("mass_table", [])]
    return Result(rep.passed, {"report": rep.to_dict()}, ["block", "mass", "nu_mass", "nu_mass_given_block"], rows)


def cmd_project_atoms(cfg):
    spec = _finite(cfg, "project-atoms")
    part = cfg.model.partition_obj() or kernel.atoms_of_kernel(spec.kernel)
    _, rep = exactlaw.project_atoms_law(spec, part, cfg.task.depth, _tol(cfg))
    rows = [["|".join(tup), p, ref] for tup, p, ref in rep.details["table"]]
    return Result(rep.passed, {"report": rep.to_dict()}, ["labels", "projected", "reference"], rows)


def _J(cfg, theta):
    t = cfg.task
    if t.J is not None or t.epsilon is None:
        return t.J
    return prior.truncation_level(theta, t.epsilon)[0]


def _prior_kernel(cfg):
    return cfg.model.finite_kernel() if cfg.model.is_finite else cfg.model.general_kernel()


def _draw_result(draw, mean_rep):
    payload = {"draw": draw.to_dict()}
    passed = True
    if mean_rep is not None:
        payload["report"] = mean_rep.to_dict()
        passed = mean_rep.passed
    return Result(passed, payload, ["atom", "weight"], draw.csv_rows())


def cmd_sample_prior(cfg):
    t, m = cfg.task, cfg.model
    K = _prior_kernel(cfg)
    nu = m.nu_vector() if m.is_finite else None
    draw = prior.sample_kernel_sb(m.theta, nu, K, _J(cfg, m.theta), t.seed)
    mean_rep = None
    if m.is_finite:
        samples = prior.sample_kernel_sb_batch(m.theta, nu, K, t.replicates, _J(cfg, m.theta), t.seed + 1)
        mean_rep = diagnostics.mean_check(samples, nu.weights, _z(cfg, CALIBRATION.z_mean), list(nu.space.labels), "prior_mean")
    return _draw_result(draw, mean_rep)


def cmd_sample_posterior(cfg):
    t, m = cfg.task, cfg.model
    K = _prior_kernel(cfg)
    if m.is_finite:
        nu = m.nu_vector()
        data = [str(x) for x in t.data]
        J = _J(cfg, m.theta + len(data))
        draw = prior.sample_posterior(m.theta, nu, K, data, J, t.seed)
        samples = prior.sample_posterior_batch(m.theta, nu, K, data, t.replicates, J, t.seed + 1)
        target = urn.predictive_after(m.spec(), data).weights
        mean_rep = diagnostics.mean_check(samples, target, _z(cfg, CALIBRATION.z_mean), list(nu.space.labels), "posterior_mean")
        return _draw_result(draw, mean_rep)
    draw = prior.sample_posterior(m.theta, None, K, [float(x) for x in t.data], _J(cfg, m.theta + len(t.data)), t.seed)
    return _draw_result(draw, None)


def _partition_or_fail(cfg):
    part = cfg.model.partition_obj()
    if part is None:
        raise MVPSError("this subcommand needs model.partition")
    return part


def _two_point_rows(rep):
    return rep.details["table"]


def cmd_sample_hierarchical(cfg):
    t, m = cfg.task, cfg.model
    if not m.is_finite:
        raise MVPSError("sample-hierarchical needs a finite space")
    nu, part = m.nu_vector(), _partition_or_fail(cfg)
    labels = list(nu.space.labels)
    p, X = prior.sample_hierarchical_batch(m.theta, nu, part, 2, t.replicates, _J(cfg, m.theta), t.seed)
    spec = urn.UrnSpec(m.theta, nu, kernel.exchangeable_kernel_from_partition(nu, part))
    exact = exactlaw.joint_law(spec, 2).probs
    rep = diagnostics.two_point_check(X, exact, _z(cfg, CALIBRATION.z_max), labels)
    moment = prior.hierarchical_two_point_law(m.theta, nu, part)
    moment_rep = CheckReport("moment_oracle", float(np.abs(moment - exact).max()), _tol(cfg))
    consistent = bool(np.all(part.block_of[X] == p))
    block_rep = CheckReport("block_consistency", 0.0 if consistent else 1.0, 0.0)
    total = combine("sample_hierarchical", [rep, moment_rep, block_rep])
    single = prior.sample_hierarchical(m.theta, nu, part, t.n, _J(cfg, m.theta), t.seed)
    payload = {"report": total.to_dict(), "sample": single.to_dict(nu.space, part)}
    return Result(total.passed, payload, ["x1", "x2", "empirical", "exact", "se", "z"], _two_point_rows(rep))


def cmd_sample_null(cfg):
    t, m = cfg.task, cfg.model
    if not m.is_finite or not m.null_set:
        raise MVPSError("sample-null needs a finite space and model.null_set")
    nu, part = m.nu_vector(), _partition_or_fail(cfg)
    labels = list(nu.space.labels)
    z_max, z_mean = _z(cfg, CALIBRATION.z_max), CALIBRATION.z_mean
    p, xi, X = prior.sample_null_mixture_batch(m.theta, nu, part, m.null_set, 2, t.replicates, _J(cfg, m.theta), t.seed)
    spec = urn.UrnSpec(m.theta, nu, kernel.exchangeable_kernel_from_partition(nu, part, m.null_set))
    exact = exactlaw.joint_law(spec, 2).probs
    rep = diagnostics.two_point_check(X, exact, z_max, labels)
    in_z = np.zeros(nu.space.k, dtype=bool)
    in_z[nu.space.indices(m.null_set)] = True
    nu_z = float(nu.weights[in_z].sum())
    freq_rep = diagnostics.mean_check(in_z[X[:, :1]], [nu_z], z_mean, ["Z"], "null_frequency")
    xz = X[in_z[X]]
    onehot = np.zeros((len(xz), in_z.sum()))
    zidx = np.flatnonzero(in_z)
    onehot[np.arange(len(xz)), np.searchsorted(zidx, xz)] = 1.0
    cond_rep = diagnostics.mean_check(onehot, nu.weights[zidx] / nu_z, z_max, [labels[i] for i in zidx], "null_conditional")
    total = combine("sample_null", [rep, freq_rep, cond_rep])
    single = prior.sample_null_mixture(m.theta, nu, part, m.null_set, t.n, _J(cfg, m.theta), t.seed)
    payload = {"report": total.to_dict(), "sample": single.to_dict(nu.space)}
    return Result(total.passed, payload, ["x1", "x2", "empirical", "exact", "se", "z"], _two_point_rows(rep))


def _default_checkpoints(n):
    cps = sorted({0, n} | {int(x) for x in np.unique(np.geomspace(1, max(n, 1), 12).round()) if x <= n})
    return cps


def cmd_diagnose(cfg):
    t, spec = cfg.task, cfg.model.spec()
    if spec.is_finite:
        traj = urn.simulate(spec, t.n, t.seed)
        cps = list(t.checkpoints) if t.checkpoints else _default_checkpoints(t.n)
        tv = diagnostics.tv_predictive_trace(traj, cps)
        ev = diagnostics.empirical_vs_predictive(traj, cps)
        emp = dict(zip(ev.steps, ev["tv"]))
        rows = [[s, float(v), emp.get(s, "")] for s, v in zip(tv.steps, tv["tv"])]
        rep = diagnostics.martingale_increment_check(spec, depth=t.depth, tol=_tol(cfg))
        payload = {"report": rep.to_dict(), "proxy_checkpoint": tv.meta["proxy_checkpoint"]}
        return Result(rep.passed, payload, ["step", "tv_to_last", "tv_empirical"], rows)
    sets = {f"(-inf,{x:g}]": halfline(x) for x in t.test_sets}
    rep = diagnostics.martingale_increment_check(
        spec, test_sets=sets, tol=_z(cfg, CALIBRATION.z_max), n=t.n, replicates=t.replicates, seed=t.seed
    )
    rows = [[r["A"], r["B"], r["step"], r["estimate"], r["se"], r["z"]] for r in rep.details["estimates"]]
    return Result(rep.passed, {"report": rep.to_dict()}, ["A", "B", "step", "estimate", "se", "z"], rows)


COMMANDS = {
    "simulate": cmd_simulate,
    "check-exchangeable": cmd_check_exchangeable,
    "check-cid": cmd_check_cid,
    "check-kernel": cmd_check_kernel,
    "decompose": cmd_decompose,
    "structure-cid": cmd_structure_cid,
    "project-atoms": cmd_project_atoms,
    "sample-prior": cmd_sample_prior,
    "sample-posterior": cmd_sample_posterior,
    "sample-hierarchical": cmd_sample_hierarchical,
    "sample-null": cmd_sample_null,
    "diagnose": cmd_diagnose,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mvps", description="Measure-valued Polya sequences: checks and samplers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override task.seed")
        p.add_argument("--out", help="output directory (default: output.directory, $MVPS_OUT, ./mvps_out)")
        p.add_argument("--tol", type=float, help="override task.tol for exact checks")
        p.add_argument("--replicates", type=int, help="override task.replicates")
        p.add_argument("--depth", type=int, help="override task.depth")
    return parser


def apply_overrides(cfg, args):
    changes = {k: getattr(args, k) for k in ("seed", "tol", "replicates", "depth") if getattr(args, k) is not None}
    if any(v < 0 for v in changes.values()) or changes.get("depth", 1) < 1 or changes.get("replicates", 1) < 1:
        raise MVPSError(f"invalid override in {changes}")
    return dataclasses.replace(cfg, task=dataclasses.replace(cfg.task, **changes))


def output_dir(cfg, args):
    return Path(args.out or cfg.output.directory or os.environ.get("MVPS_OUT") or "mvps_out")


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = apply_overrides(ExperimentConfig.load(args.config), args)
        out = output_dir(cfg, args)
        result = COMMANDS[args.command](cfg)
    except NegativeEntries as exc:
        print(f"mvps {args.command}: invalid input: {exc} (run check-kernel to locate it)", file=sys.stderr)
        return EXIT_INVALID
    except MVPSError as exc:
        print(f"mvps {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out.mkdir(parents=True, exist_ok=True)
    stem = args.command
    payload = {
        "command": args.command,
        "schema_version": REPORT_SCHEMA_VERSION,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": cfg.task.seed,
        "passed": result.passed,
        **result.payload,
    }
    if "json" in cfg.output.formats:
        write_json(payload, out / f"{stem}.json")
    if "csv" in cfg.output.formats:
        write_csv(result.header, result.rows, out / f"{stem}.csv")
    if result.trajectory is not None:
        urn.write_trajectory(result.trajectory, out / f"{stem}.traj")
    status = "PASS" if result.passed else "FAIL"
    print(f"mvps {args.command}: {status} -> {out}")
    return EXIT_PASS if result.passed else EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
