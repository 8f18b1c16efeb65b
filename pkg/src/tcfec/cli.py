"""``tcfec`` command line: code info, simulation, bounds, turbo design and
spectrum checks. Exit codes: 0 success, 2 usage or configuration error,
3 I/O error."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


# --- helpers ---

def parse_grid(spec) -> list[float]:
    """``"a:b:step"`` (inclusive), a comma list, or a JSON list."""
    if spec is None:
        raise UsageError("no Eb/N0 grid given")
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        pts = [float(x) for x in spec]
    else:
        s = str(spec).strip()
        try:
            if ":" in s:
                a, b, st = (float(x) for x in s.split(":"))
                if st <= 0:
                    raise UsageError("grid step must be positive")
                cnt = int(np.floor((b - a) / st + 1e-9)) + 1
                pts = [round(a + i * st, 10) for i in range(max(cnt, 0))]
            else:
                pts = [float(x) for x in s.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"cannot parse Eb/N0 grid {spec!r}") from None
    if not pts:
        raise UsageError("empty Eb/N0 grid")
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise UsageError("Eb/N0 grid must be strictly increasing")
    return pts


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return cfg


def merged(args, cfg: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    return cfg.get(key, default)


def write_text(path, text: str, append: bool = False) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        p = Path(path)
        if append and p.exists() and p.stat().st_size:
            text = text.split("\n", 1)[1]  # drop the header
            with p.open("a") as fh:
                fh.write(text)
        else:
            p.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


# --- code info ---

def _select_code(args):
    from . import block_codes as bc
    from . import ldpc as L

    if args.bch:
        return bc.find_bch(*args.bch)
    if args.ebch:
        return bc.find_bch(*args.ebch)
    if args.ldpc:
        if args.ldpc == "ccsds":
            return L.ccsds_tc_ldpc()
        if args.ldpc == "mscmpc":
            return L.build_mscmpc(128, 64, [16, 16, 16, 16], 1)
        raise UsageError(f"unknown LDPC code {args.ldpc!r}; expected ccsds or mscmpc")
    if args.alist:
        try:
            return L.load_alist(args.alist)
        except OSError as exc:
            raise OutputError(str(exc)) from None
    if args.ptc:
        from .simulator import ptc_spec

        return ptc_spec({"interleaver": args.interleaver, "puncturing": args.puncturing})
    if args.code:
        table = {"bch63": ("bch", 63, 56), "ebch128": ("bch", 128, 64)}
        if args.code in table:
            return bc.find_bch(*table[args.code][1:])
        if args.code in ("ldpc_ccsds", "ldpc_mscmpc"):
            args.ldpc = args.code.split("_")[1]
            return _select_code(args)
        if args.code == "ptc":
            args.ptc = True
            return _select_code(args)
        raise UsageError(f"unknown code {args.code!r}")
    raise UsageError("select a code (--bch, --ebch, --ldpc, --alist, --ptc or --code)")


def cmd_code_info(args) -> int:
    from .block_codes import BinaryLinearCode, CodeError, ebch128_spectrum, spectrum_bruteforce
    from .ldpc import LdpcCode
    from .turbo import TurboCodeSpec, distance_search

    try:
        code = _select_code(args)
    except CodeError as exc:
        raise UsageError(str(exc)) from None
    info = {"n": code.n, "k": code.k, "rate": code.k / code.n}
    if isinstance(code, BinaryLinearCode):
        info["name"] = code.name
        if code.algebraic:
            info["t"] = code.algebraic.t
            info["variant"] = code.algebraic.variant
            info["generator"] = bin(code.algebraic.generator)
        spec = None
        if code.n == 128 and code.k == 64:
            spec = ebch128_spectrum()
            info["spectrum_source"] = "data file (truncated)"
        elif min(code.k, code.n - code.k) <= 28:
            spec = spectrum_bruteforce(code)
        if spec is not None:
            info["d_min"] = spec.min_distance
            info["spectrum_head"] = [[w, str(a)] for w, a in spec.entries[:6]]
    elif isinstance(code, LdpcCode):
        info["name"] = code.name
        info["construction"] = code.construction
        info["column_degrees"] = {int(d): int(c) for d, c in enumerate(np.bincount(code.column_degrees)) if c}
        info["row_degrees"] = {int(d): int(c) for d, c in enumerate(np.bincount(code.row_degrees)) if c}
    elif isinstance(code, TurboCodeSpec):
        info["n_unpunctured"] = code.n_unpunctured
        info["interleaver"] = code.interleaver.kind
        rep = distance_search(code, args.w_max)
        info["d_min_upper"] = rep.d_min_upper
        info["A_at_d"] = rep.A_at_d
        info["w_max_searched"] = rep.w_max_searched
    if args.json:
        print(json.dumps(info, indent=1))
    else:
        for key, val in info.items():
            print(f"{key}: {val}")
    return EXIT_OK


# --- simulate ---

SIM_PARAM_KEYS = ("order", "iterations", "max_iterations", "min_sum_scale", "candidate_limit",
                  "early_termination", "n", "k", "counts", "perm_seed", "alist", "interleaver", "puncturing")


def _get(run: dict, key: str, default):
    val = run.get(key)
    return default if val is None else val


def _sim_rows(run: dict, workers: int, quiet: bool):
    from .simulator import SimError, StopRule, run_sweep

    code = run.get("code")
    decoder = run.get("decoder")
    if not code or not decoder:
        raise UsageError("simulation needs 'code' and 'decoder'")
    grid = parse_grid(run.get("ebn0"))
    params = dict(run.get("params") or {})
    for key in SIM_PARAM_KEYS:
        if run.get(key) is not None and key not in params:
            params[key] = run[key]
    try:
        stop = StopRule(int(_get(run, "min_errors", 100)), int(_get(run, "max_frames", 10_000_000)),
                        run.get("max_seconds"), int(_get(run, "block_size", 1000)))
        progress = None if quiet else (lambda p: print(
            f"# {p.code} {p.decoder} {p.ebn0_db:g} dB: {p.frame_errors}/{p.frames} cer={p.cer:.3g}",
            file=sys.stderr))
        rep = run_sweep(code, decoder, grid, stop, int(_get(run, "seed", 0)), workers, params,
                        run.get("cer_floor"), progress)
    except (SimError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    except OSError as exc:
        raise OutputError(str(exc)) from None
    return rep.rows()


def _bound_rows(run: dict):
    from . import bounds as B
    from .block_codes import CodeError, load_spectrum
    from .simulator import bound_rows

    kind = run.get("kind")
    grid_pts = parse_grid(run.get("ebn0"))
    try:
        if kind == "sp59":
            n, k = int(run["n"]), int(run["k"])
            curve = B.sp59(n, k, B.SnrGrid(grid_pts, k / n))
            label = f"({n},{k})"
        elif kind == "tub":
            if not run.get("spectrum"):
                raise UsageError("tub needs a spectrum file")
            try:
                spec = load_spectrum(_resolve_data(run["spectrum"]))
            except OSError as exc:
                raise OutputError(f"cannot read spectrum: {exc}") from None
            dstar = int(run.get("dstar", spec.max_weight))
            curve = B.tub(spec, dstar, B.SnrGrid(grid_pts, spec.k / spec.n))
            label = f"({spec.n},{spec.k}) d*={dstar}"
        elif kind == "analytic_hd":
            n, k, t = int(run["n"]), int(run["k"]), int(run["t"])
            curve = B.analytic_hard_bch(n, t, k / n, B.SnrGrid(grid_pts, k / n))
            label = f"({n},{k}) t={t}"
        else:
            raise UsageError(f"unknown bound kind {kind!r}; expected sp59, tub or analytic_hd")
    except KeyError as exc:
        raise UsageError(f"bound {kind} is missing parameter {exc}") from None
    except (B.BoundError, CodeError) as exc:
        raise UsageError(str(exc)) from None
    return bound_rows(curve, run.get("label", label))


def _resolve_data(name: str) -> str:
    from .block_codes import data_path

    p = Path(name)
    if p.exists():
        return str(p)
    d = data_path(p.name)
    return str(d) if d.exists() else str(p)


def cmd_simulate(args) -> int:
    from .simulator import CSV_COLUMNS, default_workers, rows_to_csv

    cfg = load_config(args.config)
    workers = int(merged(args, cfg, "workers", default_workers()))
    if workers < 1:
        raise UsageError("workers must be >= 1")
    runs = cfg.get("curves")
    if runs is None:
        run = {key: merged(args, cfg, key) for key in (
            "code", "decoder", "ebn0", "min_errors", "max_frames", "max_seconds", "seed", "cer_floor",
            "block_size", *SIM_PARAM_KEYS)}
        run["params"] = cfg.get("params")
        runs = [dict(run, type="simulate")]
    elif args.ebn0 is not None or args.seed is not None:
        # flags override every curve of a figure config
        runs = [dict(r, **{k: v for k, v in (("ebn0", args.ebn0), ("seed", args.seed)) if v is not None})
                for r in runs]
    out = merged(args, cfg, "out")
    if out not in (None, "-"):
        parent = Path(out).parent
        if not parent.exists():
            raise OutputError(f"output directory {parent} does not exist")
    t0 = time.time()
    rows = []
    for run in runs:
        if run.get("type", "simulate") == "bounds":
            rows += _bound_rows(run)
        else:
            if args.max_seconds is not None:
                run = dict(run, max_seconds=args.max_seconds)
            rows += _sim_rows(run, workers, args.quiet)
    write_text(out, rows_to_csv(rows), append=args.append)
    if out not in (None, "-"):
        meta = {"columns": list(CSV_COLUMNS), "runs": runs, "workers": workers, "rows": len(rows),
                "wall_seconds": round(time.time() - t0, 3)}
        write_text(str(out) + ".json", json.dumps(meta, indent=1, default=str) + "\n")
    return EXIT_OK


# --- bounds ---

def cmd_bounds(args) -> int:
    from .simulator import rows_to_csv

    cfg = load_config(args.config)
    kinds = [k for k, flag in (("sp59", args.sp59), ("tub", args.tub), ("analytic_hd", args.hard)) if flag]
    if not kinds and cfg.get("kind"):
        kinds = [cfg["kind"]]
    if not kinds:
        raise UsageError("choose at least one of --sp59, --tub, --hard")
    rows = []
    for kind in kinds:
        run = {key: merged(args, cfg, key) for key in ("n", "k", "t", "spectrum", "dstar", "ebn0")}
        if run["ebn0"] is None:
            run["ebn0"] = "0:8:0.25"
        run["kind"] = kind
        rows += _bound_rows(run)
    write_text(merged(args, cfg, "out"), rows_to_csv(rows))
    return EXIT_OK


# --- design ptc ---

def cmd_design_ptc(args) -> int:
    from . import turbo as T

    cfg = load_config(args.config)
    k = int(merged(args, cfg, "k", 64))
    count = int(merged(args, cfg, "candidates", 500))
    budget = merged(args, cfg, "budget")
    kind = merged(args, cfg, "kind", "drp")
    seed = int(merged(args, cfg, "seed", 0))
    period = int(merged(args, cfg, "period", 17))
    zeros = int(merged(args, cfg, "zeros", 2))
    w_max = int(merged(args, cfg, "w_max", 4))
    top = int(merged(args, cfg, "top", 5))
    workers = int(merged(args, cfg, "workers", 1))
    pattern_count = merged(args, cfg, "pattern_count")
    refine = int(merged(args, cfg, "refine_top", 0))
    out_dir = Path(merged(args, cfg, "out_dir", "ptc_design"))
    if budget is not None and int(budget) < 1:
        raise UsageError("budget must be >= 1")
    if count < 1:
        raise UsageError("candidates must be >= 1")
    try:
        ils = T.generate_interleavers(kind, k, count, seed)
        pats = T.periodic_patterns(k, period, zeros, pattern_count, seed)
        extra = T.refinement_patterns(k) if refine > 0 else None
        ranked = T.design_search(ils, pats, w_max, int(budget) if budget else None, k, workers=workers,
                                 top=top, refine_patterns=extra, refine_top=refine)
    except (T.TurboError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out_dir}: {exc}") from None
    lines = ["rank,candidate,d_min_upper,A_at_d,w_max,interleaver_file,puncturing_file"]
    for r, res in enumerate(ranked):
        il_file = out_dir / f"interleaver_{r}.txt"
        pat_file = out_dir / f"puncturing_{r}.txt"
        try:
            T.save_interleaver(res.interleaver, il_file)
            T.save_pattern(res.puncturing, pat_file)
        except OSError as exc:
            raise OutputError(str(exc)) from None
        lines.append(f"{r},{res.candidate_index},{res.report.d_min_upper},{res.report.A_at_d},"
                     f"{res.report.w_max_searched},{il_file.name},{pat_file.name}")
    report = "\n".join(lines) + "\n"
    write_text(out_dir / "report.csv", report)
    print(report, end="")
    return EXIT_OK


# --- spectrum check ---

def cmd_spectrum_check(args) -> int:
    from .block_codes import SpectrumParseError, load_spectrum

    try:
        spec = load_spectrum(args.path)
    except OSError as exc:
        raise OutputError(f"cannot read {args.path}: {exc}") from None
    except SpectrumParseError as exc:
        raise UsageError(str(exc)) from None
    print(f"n={spec.n} k={spec.k} entries={len(spec.entries)} complete={spec.complete} "
          f"max_weight={spec.max_weight} d_min={spec.min_distance}")
    if spec.complete and spec.total() != 2 ** spec.k:
        print(f"warning: multiplicities sum to {spec.total()}, expected 2^{spec.k}")
        return EXIT_USAGE
    return EXIT_OK


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tcfec", description="Short-block FEC workbench (BPSK/AWGN).")
    sub = p.add_subparsers(dest="command", required=True)

    code = sub.add_parser("code", help="code construction and summaries")
    code_sub = code.add_subparsers(dest="code_command", required=True)
    info = code_sub.add_parser("info", help="print n, k, rate and distance data")
    info.add_argument("--bch", nargs=2, type=int, metavar=("N", "K"))
    info.add_argument("--ebch", nargs=2, type=int, metavar=("N", "K"))
    info.add_argument("--ldpc", metavar="NAME", help="ccsds or mscmpc")
    info.add_argument("--alist", metavar="PATH")
    info.add_argument("--ptc", action="store_true")
    info.add_argument("--code", metavar="NAME", help="bch63, ebch128, ldpc_ccsds, ldpc_mscmpc or ptc")
    info.add_argument("--interleaver", metavar="PATH")
    info.add_argument("--puncturing", metavar="PATH")
    info.add_argument("--w-max", type=int, default=4, dest="w_max")
    info.add_argument("--json", action="store_true")
    info.set_defaults(func=cmd_code_info)

    sim = sub.add_parser("simulate", help="Monte Carlo error-rate curves")
    sim.add_argument("--config", metavar="JSON")
    sim.add_argument("--code", help="uncoded, bch, ebch, ldpc_ccsds, ldpc_mscmpc, ldpc_alist, ptc")
    sim.add_argument("--decoder", help="hard, viterbi, bcjr, bcjr_maxlog, ml, mrb, spa, minsum, log_map, max_log_map")
    sim.add_argument("--ebn0", help="grid 'start:stop:step' or comma list (dB)")
    sim.add_argument("--min-errors", type=int, dest="min_errors")
    sim.add_argument("--max-frames", type=int, dest="max_frames")
    sim.add_argument("--max-seconds", type=float, dest="max_seconds")
    sim.add_argument("--block-size", type=int, dest="block_size")
    sim.add_argument("--cer-floor", type=float, dest="cer_floor")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--order", type=int)
    sim.add_argument("--iterations", type=int)
    sim.add_argument("--max-iterations", type=int, dest="max_iterations")
    sim.add_argument("--min-sum-scale", type=float, dest="min_sum_scale")
    sim.add_argument("--candidate-limit", type=int, dest="candidate_limit")
    sim.add_argument("--n", type=int)
    sim.add_argument("--k", type=int)
    sim.add_argument("--alist")
    sim.add_argument("--interleaver")
    sim.add_argument("--puncturing")
    sim.add_argument("--out", help="CSV path ('-' for stdout); metadata goes to PATH.json")
    sim.add_argument("--append", action="store_true", help="append rows to an existing CSV")
    sim.add_argument("--quiet", action="store_true")
    sim.set_defaults(func=cmd_simulate, early_termination=None, counts=None, perm_seed=None)

    bnd = sub.add_parser("bounds", help="analytic curves (SP59, TUB, hard-decision BCH)")
    bnd.add_argument("--config", metavar="JSON")
    bnd.add_argument("--sp59", action="store_true")
    bnd.add_argument("--tub", action="store_true")
    bnd.add_argument("--hard", action="store_true", help="analytic hard-decision CER")
    bnd.add_argument("--n", type=int)
    bnd.add_argument("--k", type=int)
    bnd.add_argument("--t", type=int)
    bnd.add_argument("--spectrum")
    bnd.add_argument("--dstar", type=int)
    bnd.add_argument("--ebn0")
    bnd.add_argument("--out")
    bnd.set_defaults(func=cmd_bounds)

    des = sub.add_parser("design", help="code design searches")
    des_sub = des.add_subparsers(dest="design_command", required=True)
    ptc = des_sub.add_parser("ptc", help="joint interleaver / puncturing search for the (128,64) turbo code")
    ptc.add_argument("--config", metavar="JSON")
    ptc.add_argument("--k", type=int)
    ptc.add_argument("--kind", choices=("drp", "random", "spread"))
    ptc.add_argument("--candidates", type=int)
    ptc.add_argument("--budget", type=int)
    ptc.add_argument("--seed", type=int)
    ptc.add_argument("--period", type=int)
    ptc.add_argument("--zeros", type=int)
    ptc.add_argument("--pattern-count", type=int, dest="pattern_count")
    ptc.add_argument("--w-max", type=int, dest="w_max")
    ptc.add_argument("--top", type=int)
    ptc.add_argument("--refine-top", type=int, dest="refine_top",
                     help="re-score this many best candidates over a wider pattern pool (0 = off)")
    ptc.add_argument("--workers", type=int)
    ptc.add_argument("--out-dir", dest="out_dir")
    ptc.set_defaults(func=cmd_design_ptc)

    spc = sub.add_parser("spectrum", help="weight-spectrum files")
    spc_sub = spc.add_subparsers(dest="spectrum_command", required=True)
    chk = spc_sub.add_parser("check", help="validate a spectrum file")
    chk.add_argument("path")
    chk.set_defaults(func=cmd_spectrum_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tcfec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OutputError as exc:
        print(f"tcfec: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
