"""Command-line front end.

Commands: exact, asym, simulate, whiten, hist, compare.  Every output file
embeds the full effective configuration (defaults included), contains no
timestamps, and is therefore byte-identical across runs with the same
config.  Outputs are staged to a temp file and atomically renamed; nothing
partial is ever left at the target path.

Exit codes: 0 success, 2 usage/validation, 3 numeric failure
(truncation/positive-definiteness/guards), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import asym, exact, mc
from .errors import RatioSpecMismatch, TrieMomentsError

_MAX_NMAX = 30_000


def _cfg_line(cfg: dict) -> str:
    return "# config: " + " ".join(f"{k}={cfg[k]}" for k in sorted(cfg))


def _emit(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    target = os.path.abspath(out)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".stage-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _flat_kv_csv(doc: dict, cfg: dict) -> str:
    lines = [_cfg_line(cfg), "key,value"]

    def walk(prefix, v):
        if isinstance(v, dict):
            for k in v:
                walk(f"{prefix}.{k}" if prefix else str(k), v[k])
        elif isinstance(v, (list, tuple)):
            for i, item in enumerate(v):
                walk(f"{prefix}[{i}]", item)
        else:
            lines.append(f"{prefix},{v!r}" if isinstance(v, float)
                         else f"{prefix},{v}")

    walk("", doc)
    return "\n".join(lines) + "\n"


def _parse_ratio(args) -> asym.RatioSpec | str | None:
    if getattr(args, "irrational", False):
        return asym.IRRATIONAL
    spec = getattr(args, "ratio", None)
    if spec is None:
        return None
    try:
        r, l = spec.split("/")
        return asym.RatioSpec(int(r), int(l))
    except (ValueError, TypeError) as e:
        raise ValueError(f"--ratio must look like r/l: {e}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_exact(args) -> str:
    if not (2 <= args.nmax <= _MAX_NMAX):
        raise ValueError(f"nmax must be in [2, {_MAX_NMAX}]")
    table = exact.compute(args.p, args.nmax, args.precision)
    cfg = {"command": "exact", "p": args.p, "n_max": args.nmax,
           "precision": args.precision, "format": args.format}
    if args.format == "csv":
        return table.to_csv(extra_config=cfg)
    return table.to_json(extra_config=cfg) + "\n"


def _cmd_asym(args) -> str:
    model = asym.params(args.p, _parse_ratio(args))
    trunc = asym.Truncation(ell_max=args.lmax, j_max=args.jmax)
    cfg = {"command": "asym", "p": args.p, "kmax": args.kmax,
           "lmax": args.lmax, "jmax": args.jmax, "points": args.points,
           "emit_F": args.emit_F, "format": args.format,
           "ratio": f"{model.ratio.r}/{model.ratio.l}" if model.ratio else "irrational",
           "ratio_source": model.ratio_source}

    symmetric = abs(args.p - 0.5) <= 1e-15 and model.rational
    if args.emit_F:
        if not symmetric:
            raise ValueError("--emit-F requires p = 0.5")
        x, f = asym.F_profile(points=args.points, k_max=args.kmax, trunc=trunc)
        lines = [_cfg_line(cfg), "log2n,F"]
        lines += [f"{float(xi)!r},{float(fi)!r}" for xi, fi in zip(x, f)]
        return "\n".join(lines) + "\n"

    families = []
    doc = {"config": cfg, "h": model.h, "lambda": model.lam,
           "lambda_alt": ((model.p * math.log(model.p) ** 2
                           + model.q * math.log(model.q) ** 2)
                          - model.h ** 2) / model.h ** 3}
    if symmetric:
        tabs = [asym.sym_coeffs(f, args.kmax, trunc) for f in ("g1", "g2", "g3")]
        families = [t.to_json_dict() for t in tabs]
        g10 = tabs[0].value(0).real
        g20 = tabs[1].value(0).real
        g30 = tabs[2].value(0).real
        doc["F_average"] = g20 / math.sqrt(g10 * g30)
    else:
        cov = asym.cov_coeffs(model, args.kmax, trunc)
        families = [cov.to_json_dict()]
        doc["g1"] = "unavailable (general p)"
        doc["g3"] = "unavailable (general p)"
    doc["families"] = families
    if args.format == "csv":
        rows = [_cfg_line(cfg), "family,k,re,im"]
        for fam in families:
            for c in fam["coefficients"]:
                rows.append(f"{fam['family']},{c['k']},{c['re']!r},{c['im']!r}")
        return "\n".join(rows) + "\n"
    return json.dumps(doc) + "\n"


def _cmd_simulate(args) -> str:
    cfg = {"command": "simulate", "p": args.p, "n": args.n,
           "trials": args.trials, "seed": args.seed, "threads": args.threads,
           "format": args.format}
    raw = io.StringIO() if args.dump_raw else None
    if raw is not None:
        raw.write("trial,S,K,N\n")
    summary = mc.run(args.n, args.p, args.trials, args.seed,
                     parallelism=args.threads, raw_dump=raw)
    if raw is not None:
        _emit(raw.getvalue(), args.dump_raw)
    if args.format == "csv":
        return _flat_kv_csv(json.loads(summary.to_json()), cfg)
    return summary.to_json(extra_config=cfg) + "\n"


def _cmd_whiten(args) -> str:
    cfg = {"command": "whiten", "p": args.p, "n": args.n,
           "trials": args.trials, "seed": args.seed, "source": args.source,
           "threads": args.threads, "format": args.format}
    report = mc.whiten(args.n, args.p, args.trials, args.seed,
                       source=args.source, parallelism=args.threads)
    if args.format == "csv":
        return _flat_kv_csv(json.loads(report.to_json()), cfg)
    return report.to_json(extra_config=cfg) + "\n"


def _cmd_hist(args) -> str:
    cfg = {"command": "hist", "p": args.p, "n": args.n, "trials": args.trials,
           "seed": args.seed, "bins": args.bins, "threads": args.threads,
           "format": args.format}
    h = mc.joint_histogram(args.n, args.p, args.trials, args.seed,
                           bins=args.bins, parallelism=args.threads)
    if args.format == "csv":
        lines = [_cfg_line(cfg), f"rho,{h.rho!r}"]
        lines.append("s_edges," + ",".join(repr(float(v)) for v in h.s_edges))
        lines.append("k_edges," + ",".join(repr(float(v)) for v in h.k_edges))
        lines.append("counts")
        for row in h.counts:
            lines.append(",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"
    return h.to_json(extra_config=cfg) + "\n"


def _cmd_compare(args) -> str:
    grid = sorted({int(v) for v in args.n_grid.split(",")})
    if grid[0] < 2:
        raise ValueError("n-grid values must be >= 2")
    if grid[-1] > _MAX_NMAX:
        raise ValueError(f"n-grid values must be <= {_MAX_NMAX}")
    cfg = {"command": "compare", "p": args.p, "n_grid": args.n_grid,
           "trials": args.trials, "seed": args.seed,
           "precision": args.precision, "format": args.format}
    model = asym.params(args.p)
    table = exact.compute(args.p, grid[-1], args.precision)
    symmetric = abs(args.p - 0.5) <= 1e-15

    rows = []
    if symmetric:
        c1, c2, c3 = (asym.sym_coeffs(f) for f in ("g1", "g2", "g3"))
        header = ("n,covSK_over_n,fluct_g2,diff_g2,varS_over_n,fluct_g1,"
                  "diff_g1,varK_over_n,fluct_g3,diff_g3,rho_exact,rho_mc")
        for n in grid:
            cover = table.cov_SK(n) / n
            vsover = table.var_S(n) / n
            vkover = table.var_K(n) / n
            f1, f2, f3 = (asym.fluct_eval(c, n) for c in (c1, c2, c3))
            rho_mc = float("nan")
            if args.trials:
                rho_mc = mc.run(n, args.p, args.trials, args.seed).rho("S", "K")
            rows.append([n, cover, f2, abs(cover - f2), vsover, f1,
                         abs(vsover - f1), vkover, f3, abs(vkover - f3),
                         table.rho_SK(n), rho_mc])
        summary = {"g2_0": c2.value(0).real}
    else:
        g20 = asym.g2_general(model, 0).real
        header = ("n,covSK_over_n,g2_0,diff_g2,varK_over_n,ln_n,"
                  "rho_exact,rho_mc")
        xs, ys = [], []
        for n in grid:
            cover = table.cov_SK(n) / n
            vkover = table.var_K(n) / n
            xs.append(math.log(n))
            ys.append(vkover)
            rho_mc = float("nan")
            if args.trials:
                rho_mc = mc.run(n, args.p, args.trials, args.seed).rho("S", "K")
            rows.append([n, cover, g20, abs(cover - g20), vkover,
                         math.log(n), table.rho_SK(n), rho_mc])
        slope = float(np.polyfit(xs, ys, 1)[0]) if len(grid) >= 2 else float("nan")
        summary = {"lambda": model.lam, "varK_slope": slope,
                   "slope_rel_err": abs(slope - model.lam) / model.lam}

    if args.format == "csv":
        lines = [_cfg_line(cfg), header]
        for row in rows:
            lines.append(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]))
        for k in sorted(summary):
            lines.append(f"# {k}={summary[k]!r}")
        return "\n".join(lines) + "\n"
    return json.dumps({"config": cfg, "columns": header.split(","),
                       "rows": rows, "summary": summary}) + "\n"


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="triemoments",
        description="Exact, asymptotic and Monte-Carlo moments of random tries")
    sub = top.add_subparsers(dest="command", required=True)

    def common(sp, mc_flags=False):
        sp.add_argument("--p", type=float, required=True,
                        help="bit probability, in (0,1)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        if mc_flags:
            sp.add_argument("--n", type=int, required=True)
            sp.add_argument("--trials", type=int, required=True)
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("exact", help="exact moment table as CSV/JSON")
    common(sp)
    sp.add_argument("--nmax", type=int, required=True)
    sp.add_argument("--precision", choices=("standard", "extended"),
                    default="standard")
    sp.set_defaults(fn=_cmd_exact)

    sp = sub.add_parser("asym", help="fluctuation coefficients, lambda, F(n)")
    common(sp)
    sp.set_defaults(format="json")
    sp.add_argument("--kmax", type=int, default=5)
    sp.add_argument("--lmax", type=int, default=None)
    sp.add_argument("--jmax", type=int, default=40)
    sp.add_argument("--ratio", default=None, help="log p/log q as r/l")
    sp.add_argument("--irrational", action="store_true")
    sp.add_argument("--emit-F", dest="emit_F", action="store_true",
                    help="emit (log2n, F) samples over one period (p=1/2)")
    sp.add_argument("--points", type=int, default=512)
    sp.set_defaults(fn=_cmd_asym)

    sp = sub.add_parser("simulate", help="Monte-Carlo moment summary")
    common(sp, mc_flags=True)
    sp.set_defaults(format="json")
    sp.add_argument("--dump-raw", dest="dump_raw", default=None,
                    help="also write per-trial (trial,S,K,N) CSV to this path")
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("whiten", help="whitened-covariance CLT check")
    common(sp, mc_flags=True)
    sp.set_defaults(format="json")
    sp.add_argument("--source", choices=("exact", "sample", "asymptotic"),
                    default="exact")
    sp.set_defaults(fn=_cmd_whiten)

    sp = sub.add_parser("hist", help="joint histogram of standardized (S,K)")
    common(sp, mc_flags=True)
    sp.set_defaults(format="json")
    sp.add_argument("--bins", type=int, default=50)
    sp.set_defaults(fn=_cmd_hist)

    sp = sub.add_parser("compare", help="exact vs asymptotic vs Monte-Carlo")
    common(sp)
    sp.add_argument("--n-grid", dest="n_grid", default="256,512,1024,2048,4096")
    sp.add_argument("--trials", type=int, default=0,
                    help="MC trials per grid point (0 = skip MC column)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--precision", choices=("standard", "extended"),
                    default="standard")
    sp.set_defaults(fn=_cmd_compare)
    return top


def _apply_config_file(argv: list[str]) -> list[str]:
    """Inline --config key=value file contents as flags (flags override)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    flags: list[str] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if v.lower() in ("true", "yes", "1") and k in ("irrational", "emit-F"):
                flags.append(f"--{k}")
            elif v.lower() in ("false", "no", "0") and k in ("irrational", "emit-F"):
                continue
            else:
                flags.extend([f"--{k}", v])
    if not rest:
        return flags
    # keep the subcommand first; user flags come after config flags so they win
    return rest[:1] + flags + rest[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
        args = _build_parser().parse_args(argv)
        if not (0.0 < args.p < 1.0):
            raise ValueError("p must be in (0,1)")
        text = args.fn(args)
        _emit(text, args.out)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except (ValueError, RatioSpecMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TrieMomentsError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
