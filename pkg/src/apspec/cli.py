"""Configuration-driven command line front end.

Subcommands: conditions | zones | gauge | ids | oracle | converge |
propagate.  One JSON configuration file drives all of them; unknown fields
are rejected at load.  Every run writes a ``manifest.json`` with the fully
resolved parameters (defaults made explicit) next to its tables, numbers
are written with 12 significant digits, and identical configurations
produce byte-identical table bodies.

Exit codes: 0 success, then one category per error class — 2 configuration,
3 small divisor, 4 convergence, 5 resource limit, 6 quadrature,
7 inconsistency, 8 unsupported configuration, 9 other pipeline error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .errors import (ApspecError, ConfigurationError, ConvergenceError,
                     InconsistencyError, QuadratureError, ResourceLimitError,
                     SmallDivisorError, UnsupportedConfigurationError)

__all__ = ["main", "build_parser"]

_EXIT_CODES = [
    (ConfigurationError, 2),
    (SmallDivisorError, 3),
    (ConvergenceError, 4),
    (ResourceLimitError, 5),
    (QuadratureError, 6),
    (InconsistencyError, 7),
    (UnsupportedConfigurationError, 8),
    (ApspecError, 9),
]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".12g")
    if isinstance(v, int):
        return str(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in header))
    path.write_text("\n".join(lines) + "\n")


def _write_manifest(out: Path, command: str, cfg, overrides: dict) -> None:
    from .config import _to_jsonable
    record = {
        "command": command,
        "overrides": overrides,
        "resolved_config": _to_jsonable(cfg),
    }
    (out / "manifest.json").write_text(json.dumps(record, indent=2) + "\n")


def _combos(cfg):
    for h in cfg.h:
        for eps in cfg.eps:
            for tau in cfg.tau:
                yield h, eps, tau


def _pipeline_kwargs(cfg) -> dict:
    kw = {"M": cfg.M, "c_gamma": cfg.zones.c_gamma}
    if cfg.zones.delta1 > 0:
        kw["delta1"] = cfg.zones.delta1
    if cfg.zones.sumset_K > 0:
        kw["sumset_K"] = cfg.zones.sumset_K
    return kw


# ---------------------------------------------------------------------------
# commands

def cmd_conditions(cfg, out: Path) -> None:
    from .config import build_module
    from .freqgeom import check_conditions

    module = build_module(cfg)
    report = check_conditions(module, cfg.conditions.K, cfg.conditions.omega,
                              L=cfg.conditions.L)
    rows = [r.to_dict() for r in report.records]
    for row in rows:
        row["witness"] = json.dumps(row["witness"]) if row["witness"] is not None else ""
        row["margin"] = row["margin"] if row["margin"] is not None else float("nan")
    _write_csv(out / "conditions.csv",
               ["condition", "status", "margin", "witness", "note"], rows)
    summary = [f"omega = {_fmt(report.omega)}, K = {report.K}"]
    for r in report.records:
        summary.append(f"  {r.condition}: {r.status}"
                       + (f" ({r.note})" if r.note else ""))
    summary.append("overall: " + ("pass" if report.all_pass() else "fail"))
    (out / "conditions_summary.txt").write_text("\n".join(summary) + "\n")
    print("\n".join(summary))


def cmd_zones(cfg, out: Path) -> None:
    from .config import build_base, build_perturbation
    from .spectra import _zone_setup

    base = build_base(cfg)
    pert = build_perturbation(cfg)
    kw = _pipeline_kwargs(cfg)
    sumset_K = kw.get("sumset_K", max(2, 2 * max(cfg.K, default=2)))
    for h, eps, tau in _combos(cfg):
        params, shell, theta_k, decomp = _zone_setup(
            base, pert, eps, tau, h, sumset_K, kw.get("delta1"),
            cfg.zones.c_gamma)
        rows = decomp.to_rows()
        header = ([f"xi{j}" for j in range(cfg.dimension)]
                  + ["label", "level", "component", "subspace"])
        name = f"zones_h{_fmt(h)}_eps{_fmt(eps)}_tau{_fmt(tau)}.csv"
        _write_csv(out / name, header, rows)
        n_res = sum(1 for r in rows if r["label"] == "resonant")
        print(f"h={_fmt(h)} eps={_fmt(eps)} tau={_fmt(tau)}: "
              f"{len(rows)} shell cells, {n_res} resonant, "
              f"{len(decomp.components)} component(s), "
              f"{len(decomp.failures)} failure(s)")
        if decomp.failures:
            (out / name.replace(".csv", "_failures.txt")).write_text(
                "\n".join(decomp.failures) + "\n")


def cmd_gauge(cfg, out: Path) -> None:
    from .config import build_base, build_perturbation
    from .gauge import eliminate
    from .spectra import _zone_setup

    base = build_base(cfg)
    pert = build_perturbation(cfg)
    kw = _pipeline_kwargs(cfg)
    steps_max = max(cfg.K, default=2) or 1
    sumset_K = kw.get("sumset_K", max(2, 2 * steps_max))
    rows = []
    for h, eps, tau in _combos(cfg):
        params, shell, theta_k, decomp = _zone_setup(
            base, pert, eps, tau, h, sumset_K, kw.get("delta1"),
            cfg.zones.c_gamma)
        region = shell.centers[decomp.nonresonant_indices()]
        chain = eliminate(base, pert, eps, h, params.gamma(1), region,
                          M=cfg.M, theta_k=theta_k,
                          delta1=kw.get("delta1"), k_max=steps_max,
                          min_steps=steps_max, require_target=False)
        for srow in chain.summary_rows():
            srow.update(h=h, epsilon=eps, tau=tau,
                        remainder_bound=chain.remainder_bound,
                        target=chain.target)
            rows.append(srow)
        print(f"h={_fmt(h)} eps={_fmt(eps)} tau={_fmt(tau)}: "
              f"{len(chain.steps)} step(s), remainder bound "
              f"{_fmt(chain.remainder_bound)}, target {_fmt(chain.target)}")
    _write_csv(out / "gauge_chains.csv",
               ["h", "epsilon", "tau", "step", "gamma", "eps_k", "eliminated",
                "residual_norm", "remainder_proxy", "ad_order",
                "remainder_bound", "target"], rows)


def cmd_ids(cfg, out: Path) -> None:
    from .config import build_base, build_perturbation
    from .spectra import ids_pipeline

    base = build_base(cfg)
    pert = build_perturbation(cfg)
    kw = _pipeline_kwargs(cfg)
    rows = []
    zone_cols: set[str] = set()
    for h, eps, tau in _combos(cfg):
        for k in cfg.K:
            value, breakdown = ids_pipeline(base, pert, eps, tau, h,
                                            gauge_steps=k, **kw)
            row = {"h": h, "epsilon": eps, "tau": tau, "K": k,
                   "n_pipeline": value}
            row.update(breakdown)
            zone_cols.update(breakdown)
            rows.append(row)
            print(f"h={_fmt(h)} eps={_fmt(eps)} tau={_fmt(tau)} K={k}: "
                  f"N = {_fmt(value)}")
    header = ["h", "epsilon", "tau", "K", "n_pipeline"] + sorted(zone_cols)
    _write_csv(out / "ids.csv", header, rows)


def cmd_oracle(cfg, out: Path) -> None:
    from .config import build_base, build_perturbation
    from .oracle import ids_oracle

    base = build_base(cfg)
    pert = build_perturbation(cfg)
    rows = []
    for h, eps, tau in _combos(cfg):
        value = ids_oracle(base, pert, tau, h, eps, nk=cfg.oracle.nk,
                           radius=cfg.oracle.radius,
                           exact_bands=cfg.oracle.exact_bands
                           if cfg.dimension == 1 else False)
        rows.append({"h": h, "epsilon": eps, "tau": tau, "n_oracle": value})
        print(f"h={_fmt(h)} eps={_fmt(eps)} tau={_fmt(tau)}: "
              f"N_oracle = {_fmt(value)}")
    _write_csv(out / "oracle.csv", ["h", "epsilon", "tau", "n_oracle"], rows)


def cmd_converge(cfg, out: Path) -> None:
    from .config import build_base, build_perturbation
    from .spectra import convergence_study

    base = build_base(cfg)
    pert = build_perturbation(cfg)
    kw = _pipeline_kwargs(cfg)
    h0, eps0 = cfg.h[0], cfg.eps[0]

    def eps_of_h(hv: float) -> float:
        return eps0 * (hv / h0) ** cfg.theta_exp

    table = convergence_study(base, pert, cfg.tau[0], cfg.h, cfg.K, eps_of_h,
                              oracle_nk=cfg.oracle.nk, **kw)
    table.to_csv(out / "study.csv")
    _write_csv(out / "slopes.csv", ["K", "slope", "slope_increment"],
               table.slope_records())
    for rec in table.slope_records():
        print(", ".join(f"{k} = {_fmt(v)}" for k, v in rec.items()))


def cmd_propagate(cfg, out: Path) -> None:
    from .config import build_base, build_perturbation
    from .oracle import propagation_norm
    from .zones import CutoffSymbol

    base = build_base(cfg)
    pert = build_perturbation(cfg)
    p = cfg.propagate

    def box(center):
        return tuple((c - p.q_width, c + p.q_width) for c in center)

    q1 = CutoffSymbol(box(p.q1_center), p.q1_margin)
    q2 = CutoffSymbol(box(p.q2_center), p.q2_margin)
    rows = []
    for h in cfg.h:
        for eps in cfg.eps:
            norm = propagation_norm(base, pert, q1, q2, p.T, h, eps,
                                    k_samples=p.k_samples,
                                    radius=cfg.oracle.radius)
            rows.append({"h": h, "epsilon": eps, "T": p.T, "norm": norm})
            print(f"h={_fmt(h)} eps={_fmt(eps)} T={_fmt(p.T)}: "
                  f"norm = {_fmt(norm)}")
    _write_csv(out / "propagation.csv", ["h", "epsilon", "T", "norm"], rows)


_COMMANDS = {
    "conditions": cmd_conditions,
    "zones": cmd_zones,
    "gauge": cmd_gauge,
    "ids": cmd_ids,
    "oracle": cmd_oracle,
    "converge": cmd_converge,
    "propagate": cmd_propagate,
}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apspec",
        description="Semiclassical integrated-density-of-states pipeline for "
                    "almost-periodic perturbations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration")
        sp.add_argument("--out", default=None,
                        help="output directory (default: config output_dir)")
        sp.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/OpenMP thread pools")
        sp.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted-path config override, repeatable")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        from .config import apply_overrides, load_config
        cfg = load_config(args.config)
        overrides = {}
        for item in args.override:
            if "=" not in item:
                raise ConfigurationError(
                    f"override {item!r}: expected KEY=VALUE")
            key, _, value = item.partition("=")
            overrides[key] = value
        if overrides:
            cfg = apply_overrides(cfg, overrides)
        out = Path(args.out) if args.out else Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(out, args.command, cfg, overrides)
        _COMMANDS[args.command](cfg, out)
    except ApspecError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        for cls, code in _EXIT_CODES:
            if isinstance(exc, cls):
                return code
        return 9
    return 0


if __name__ == "__main__":
    sys.exit(main())
