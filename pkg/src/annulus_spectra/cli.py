"""Command line driver: ``annulus-spectra <subcommand> [--flags]``.

Reports go to stdout (or --output) as JSON with sorted keys, or as CSV. When
writing to a file, run metadata such as the timestamp goes to a sibling
``.meta.json`` so the report itself is reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from decimal import Decimal, InvalidOperation

import numpy as np

from . import __version__
from .certifier import (
    AUDIT_IDS,
    COEFFICIENT_BOUNDS,
    DEFAULT_GRIDS,
    DEFAULT_SEED,
    IDENTITY_IDS,
    audit_inequality,
    coefficient_bound_audit,
    cs_defect_identity,
    cs_lower_bound,
    gn_audit,
    identity_audit,
    kernel_check,
    log_mode_bound,
    _clean,
)
from .domain import AnnulusDomain, make_annulus
from .operators import FAMILIES, THRESHOLDS, conformal_threshold, paper_constants

EXIT_OK = 0
EXIT_VIOLATED = 2
EXIT_INCONCLUSIVE = 3
EXIT_BAD_CONFIG = 64

SUBCOMMANDS = ("constants", "kernel-check", "audit", "cs", "gn", "willmore", "thresholds")
INFORMATIONAL = "informational"


class ConfigError(ValueError):
    pass


def parse_decimal(text: str) -> float:
    """Decimal literal with optional exponent, e.g. 0.5, 1e-3, -2.5E+2."""
    s = str(text).strip()
    if not re.fullmatch(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?", s):
        raise ConfigError(f"not a decimal number: {text!r}")
    try:
        return float(Decimal(s))
    except InvalidOperation as exc:  # pragma: no cover - regex already filters
        raise ConfigError(f"not a decimal number: {text!r}") from exc


def parse_int_list(text: str) -> list[int]:
    """'0..6' or '129,257,513' or a mix like '0..2,5'."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif re.fullmatch(r"-?\d+", part):
            out.append(int(part))
        else:
            raise ConfigError(f"bad integer list {text!r}")
    if not out:
        raise ConfigError("empty integer list")
    return out


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)  # decimal strings
    format: str = "json"
    output: str | None = None
    seed: int = DEFAULT_SEED
    grids: list = field(default_factory=lambda: list(DEFAULT_GRIDS))
    jobs: int = 1
    plot: str | None = None

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if any(n < 16 for n in self.grids):
            raise ConfigError("grid sizes must be at least 16")

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def num(self, key, default=None):
        v = self.params.get(key)
        if v is None:
            if default is None:
                raise ConfigError(f"--{key} is required")
            return default
        return parse_decimal(v)

    def opt(self, key):
        v = self.params.get(key)
        return None if v is None else parse_decimal(v)


# --------------------------------------------------------------------------
# subcommands; each returns a list of report rows (dicts with anchor and status)


def _domain(cfg: RunConfig) -> AnnulusDomain:
    if cfg.params.get("modulus") is not None:
        return AnnulusDomain.from_modulus(cfg.num("modulus"), cfg.num("b", 1.0))
    return make_annulus(cfg.num("a"), cfg.num("b", 1.0))


def run_constants(cfg):
    rows = []
    for key, anchor in (("m0", "m0_root"), ("cubic_roots", "cubic_roots"), ("f_of_2", "f_of_2")):
        c = paper_constants(key)
        rows.append({"anchor": anchor, "id": key, "status": INFORMATIONAL, **_clean(c)})
    return rows


def run_thresholds(cfg):
    m = cfg.num("m")
    extra = {k: cfg.num(k) for k in ("beta", "gamma", "n") if cfg.params.get(k) is not None}
    ids = cfg.params.get("ids")
    ids = [s for s in ids.split(",") if s] if ids else list(THRESHOLDS)
    rows = []
    for tid in ids:
        if tid not in THRESHOLDS:
            raise ConfigError(f"unknown threshold id {tid!r}")
        e = THRESHOLDS[tid]
        kw = {k: (int(v) if k == "n" else v) for k, v in extra.items() if k in e.params}
        if tid == "additional_conformal_class1" and "n" not in kw:
            kw["n"] = 1
        try:
            val = conformal_threshold(tid, m, **kw)
            status = INFORMATIONAL
        except ValueError as exc:
            val, status = None, f"out-of-range: {exc}"
        rows.append({"anchor": tid, "id": tid, "m": m, "params": kw, "value": val,
                     "formula": e.description, "status": INFORMATIONAL if val is not None else "inconclusive",
                     "note": status if val is None else ""})
    return rows


def _kernel_task(args):
    family, m, n, grids = args
    return kernel_check(family, m, n, tuple(grids))


def run_kernel_check(cfg):
    family = cfg.params.get("operator")
    if family not in FAMILIES:
        raise ConfigError(f"unknown operator {family!r}")
    m = cfg.num("m")
    modes = parse_int_list(cfg.params.get("modes", "0..6"))
    tasks = [(family, m, n, cfg.grids) for n in modes]
    results = _map(_kernel_task, tasks, cfg.jobs)
    rows = []
    for res in results:
        rows.append({"anchor": f"kernel:{family}", "id": f"{family}-n{res['n']}",
                     "status": INFORMATIONAL, **_clean(res)})
    return rows


def run_audit(cfg):
    ids = [s for s in cfg.params.get("id", "").split(",") if s]
    if not ids:
        raise ConfigError("--id is required")
    m = cfg.num("m")
    rows = []
    for id_ in ids:
        if id_ in AUDIT_IDS:
            rep = audit_inequality(id_, m, _domain(cfg), cfg.opt("alpha"), cfg.opt("beta"), cfg.opt("gamma"),
                                   grid_sizes=tuple(cfg.grids), seed=cfg.seed)
        elif id_ in IDENTITY_IDS:
            dom = _domain(cfg) if (cfg.params.get("a") or cfg.params.get("modulus")) else None
            rep = identity_audit(id_, m, dom, nodes=max(cfg.grids), seed=cfg.seed,
                                 alpha=cfg.num("alpha", 0.0))
        elif id_ in COEFFICIENT_BOUNDS:
            dom = _domain(cfg) if (cfg.params.get("a") or cfg.params.get("modulus")) else None
            rep = coefficient_bound_audit(int(m), id_, dom, trials=int(cfg.num("trials", 1000)), seed=cfg.seed,
                                          beta=cfg.opt("beta"))
        else:
            raise ConfigError(f"unknown audit id {id_!r}")
        rows.append(rep.to_json())
    return rows


def run_cs(cfg):
    rng = np.random.default_rng(cfg.seed)
    trials = int(cfg.num("trials", 1000))
    n = int(cfg.num("n", 64))
    worst_defect, worst_margin = 0.0, math.inf
    for _ in range(trials):
        k = int(rng.integers(2, n + 1))
        f1 = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        f2 = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        w = rng.uniform(0.1, 2.0, k)
        lhs, rhs = cs_defect_identity(f1, f2, w)
        worst_defect = max(worst_defect, abs(lhs - rhs) / lhs)
        l1, l2 = rng.standard_normal(2)
        m = cs_lower_bound(f1, f2, l1, l2, w)
        scale = float(np.sum(w * np.abs(l1 * f1 + l2 * f2) ** 2))
        worst_margin = min(worst_margin, m / scale)
    ok = worst_defect <= 1e-12 and worst_margin >= -1e-12
    rows = [{"anchor": "cauchy_schwarz_defect", "id": "cs", "trials": trials, "max_length": n,
             "seed": cfg.seed, "max_relative_defect_error": worst_defect,
             "min_relative_margin": worst_margin, "status": "certified" if ok else "violated"}]
    if cfg.params.get("gamma") is not None:
        lm = log_mode_bound(cfg.num("gamma"), cfg.num("lam", 1.0), cfg.num("a"), cfg.num("b", math.exp(-1)))
        status = "certified" if all(lm["holds"].values()) else "violated"
        rows.append({"anchor": "log_estimate_sum", "id": "log_mode_bound", "status": status, **_clean(lm)})
    return rows


def run_gn(cfg):
    rep = gn_audit(cfg.num("m"), cfg.num("beta"), cfg.num("gamma"), seed=cfg.seed)
    return [rep.to_json()]


def run_willmore(cfg):
    from .willmore import fmu_report, plane_chart, sphere_chart, total_curvature, willmore_energy
    family = cfg.params.get("family", "fmu")
    nodes = (int(cfg.num("nodes-r", 160)), int(cfg.num("nodes-theta", 192)))
    if family == "fmu":
        row = fmu_report(cfg.num("mu"), nodes)
        row["anchor"] = "is a family of Willmore spheres"
    elif family in ("sphere", "plane"):
        imm = sphere_chart(cfg.num("radius", 1.0)) if family == "sphere" else plane_chart()
        W, K = willmore_energy(imm, nodes), total_curvature(imm, nodes)
        row = {"family": family, "mu": None, "energy": W.value, "total_curvature": K.value,
               "mesh_cells": W.mesh_cells, "est_error": max(W.est_error, K.est_error),
               "flags": sorted(set(W.flags) | set(K.flags)), "anchor": "willmore_energy"}
    else:
        raise ConfigError(f"unknown family {family!r}")
    row["id"] = f"willmore-{family}"
    row["status"] = INFORMATIONAL if not row["flags"] else "inconclusive"
    return [_clean(row)]


RUNNERS = {
    "constants": run_constants,
    "kernel-check": run_kernel_check,
    "audit": run_audit,
    "cs": run_cs,
    "gn": run_gn,
    "willmore": run_willmore,
    "thresholds": run_thresholds,
}


def _map(fn, tasks, jobs):
    if jobs == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))  # map keeps task order


# --------------------------------------------------------------------------
# output


def exit_code(rows) -> int:
    statuses = [r.get("status") for r in rows]
    if "violated" in statuses:
        return EXIT_VIOLATED
    if "inconclusive" in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def to_json(rows) -> str:
    return json.dumps(_clean(rows), sort_keys=True, indent=2) + "\n"


def to_csv(rows) -> str:
    buf = io.StringIO()
    cols = ["anchor", "id", "status", "computed_ratio", "paper_constant", "margin", "data"]
    w = csv.writer(buf, lineterminator="\r\n")  # RFC 4180 line endings
    w.writerow(cols)
    for r in rows:
        rest = {k: v for k, v in r.items() if k not in cols}
        w.writerow([_cell(r.get(c)) for c in cols[:-1]] + [json.dumps(_clean(rest), sort_keys=True)])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def plot_rows(report: dict):
    """Columns for plotting: residual sweeps give (N, residual, order), ratio sweeps (x, ratio)."""
    if "conventions" in report:
        blocks = []
        for name, conv in report["conventions"].items():
            for el in conv["elements"]:
                rows = []
                for i, (N, res) in enumerate(zip(el["nodes"], el["residuals"])):
                    order = el["orders"][i - 1] if i else float("nan")
                    rows.append((N, res, order))
                blocks.append((f"{name} {el['candidate']}", rows))
        return blocks
    if "details" in report and isinstance(report["details"], dict) and "sweep" in report["details"]:
        blocks = []
        for name, rows in report["details"]["sweep"].items():
            pts = [(r["modulus"], r["ratio"]) for r in rows if r.get("ratio") is not None]
            if pts:
                blocks.append((name, pts))
        return blocks
    if report.get("grid_trend"):
        trend = report["grid_trend"]
        if isinstance(trend[0], dict):
            return [("grid trend", [(r["nodes"], r["ratio"]) for r in trend])]
    return []


def emit_plot_data(report: dict, path=None) -> str:
    """Whitespace separated columns, blocks separated by blank lines."""
    blocks = plot_rows(report)
    if not blocks or not any(rows for _, rows in blocks):
        raise ValueError("report contains no sweep")
    out = []
    for title, rows in blocks:
        out.append(f"# {title}")
        for row in rows:
            out.append(" ".join(_fmt(v) for v in row))
        out.append("")
    text = "\n".join(out)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _fmt(v):
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v) if v != int(v) or abs(v) > 1e15 else str(int(v))


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    rows = RUNNERS[cfg.subcommand](cfg)
    text = to_json(rows) if cfg.format == "json" else to_csv(rows)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
        meta = {"subcommand": cfg.subcommand, "seed": cfg.seed, "version": __version__,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        with open(cfg.output + ".meta.json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)
    else:
        stdout.write(text)
    if cfg.plot:
        emit_plot_data(rows[0], cfg.plot)
    return exit_code(rows)


# --------------------------------------------------------------------------
# argument parsing

_PARAMS = {
    "constants": (),
    "thresholds": ("m", "beta", "gamma", "n", "ids"),
    "kernel-check": ("operator", "m", "modes"),
    "audit": ("id", "m", "alpha", "beta", "gamma", "a", "b", "modulus", "trials"),
    "cs": ("trials", "n", "gamma", "lam", "a", "b"),
    "gn": ("m", "beta", "gamma"),
    "willmore": ("family", "mu", "radius", "nodes-r", "nodes-theta"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="annulus-spectra", allow_abbrev=False,
                description="Audits of weighted inequalities on annuli and related computations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, allow_abbrev=False)
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--output")
        s.add_argument("--seed", type=int)
        s.add_argument("--grids", default=",".join(map(str, DEFAULT_GRIDS)))
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--plot")
        for key in _PARAMS[name]:
            s.add_argument(f"--{key}", dest=f"param:{key}")
    return p


def config_from_args(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    params = {k.split(":", 1)[1]: v for k, v in ns.items() if k.startswith("param:") and v is not None}
    seed = ns["seed"] if ns["seed"] is not None else DEFAULT_SEED
    env = os.environ.get("SPECTRA_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"SPECTRA_SEED must be an integer, got {env!r}") from exc
    return RunConfig.from_mapping({
        "subcommand": ns["subcommand"], "params": params, "format": ns["format"], "output": ns["output"],
        "seed": seed, "grids": parse_int_list(ns["grids"]), "jobs": ns["jobs"], "plot": ns["plot"],
    })


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except (ConfigError, KeyError) as exc:
        print(f"annulus-spectra: bad configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except ValueError as exc:
        print(f"annulus-spectra: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
