"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .io.manifest import ManifestError, RunManifest, workers_from_env
from .io.snapshots import SnapshotError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="z2perc", description="Percolation of Z2 electric strings: sampling and analysis.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, manifest_required=True):
        p.add_argument("--manifest", type=Path, required=manifest_required)
        p.add_argument("--out", type=Path, help="output directory (overrides the manifest)")
        p.add_argument("--seed", type=int, help="master seed (overrides the manifest)")

    for name, helptext in (("classical", "run a classical Monte Carlo grid"),
                           ("qmc", "run a quantum Monte Carlo grid")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--snapshots", action="store_true", help="persist equal-time snapshots")
        p.add_argument("--slice-every", type=int, default=1, help="keep every K-th snapshot")

    p = sub.add_parser("ed", help="exact diagonalization of a tiny torus")
    common(p, manifest_required=False)
    p.add_argument("--L", type=int)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=0.0)

    p = sub.add_parser("percolate", help="percolation reports for snapshot files")
    common(p, manifest_required=False)
    p.add_argument("files", nargs="*", type=Path)

    p = sub.add_parser("analyze", help="Binder ratios, crossings, collapse fits, autocorrelation")
    common(p, manifest_required=False)
    p.add_argument("--task", choices=("binder", "cross", "collapse", "autocorr"))
    p.add_argument("--x", help="swept parameter (inferred when unique)")
    p.add_argument("inputs", nargs="*", type=Path, help="run output directories or runs.jsonl files")
    return ap


def _load(args) -> RunManifest | None:
    if args.manifest is None:
        return None
    m = RunManifest.load(args.manifest)
    if args.seed is not None:
        m.seed = args.seed
        m.__post_init__()
    return m


def _out_dir(args, manifest):
    if args.out is not None:
        return args.out
    if manifest is not None:
        return Path(manifest.outputs.get("dir", "out"))
    return None


def _run(args) -> int:
    from .io import runner

    runner.configure_logging(args.verbose)
    m = _load(args)
    cmd = args.command
    if cmd in ("classical", "qmc"):
        if m.module != cmd:
            raise ManifestError(f"manifest is for module {m.module!r}, not {cmd!r}")
        workers = args.workers if args.workers is not None else workers_from_env(1)
        if workers < 1:
            raise UsageError("--workers must be positive")
        out = runner.run_grid(m, _out_dir(args, m), workers, args.snapshots, args.slice_every)
        print(out)
    elif cmd == "ed":
        if m is None:
            if args.L is None:
                raise UsageError("ed needs --manifest or --L")
            m = RunManifest("ed-cli", "ed", grid={"L": [args.L]},
                            fixed={"beta": args.beta, "mu": args.mu, "J": args.J, "h": args.h,
                                   "lam": args.lam})
        try:
            rows = runner.run_ed(m, _out_dir(args, m) if args.manifest or args.out else None)
        except ValueError as exc:
            raise ManifestError(str(exc)) from None
        for r in rows:
            print(json.dumps(r, sort_keys=True))
    elif cmd == "percolate":
        files = list(args.files) or (list(m.inputs) if m is not None else [])
        if not files:
            raise UsageError("percolate needs snapshot files")
        rows = runner.percolate_files(files, _out_dir(args, m), m.hash if m else "")
        if _out_dir(args, m) is None:
            for r in rows:
                print(json.dumps(r, sort_keys=True))
    elif cmd == "analyze":
        inputs = list(args.inputs) or (list(m.inputs) if m is not None else [])
        task = args.task or (m.task if m is not None else None)
        if not inputs or task is None:
            raise UsageError("analyze needs --task and run directories")
        opts = dict(m.fixed) if m is not None else {}
        reports = runner.analyze_runs(inputs, task, args.x or opts.pop("x", None),
                                      _out_dir(args, m), m.seed if m else 0, opts)
        for r in reports:
            print(json.dumps(r, sort_keys=True))
    else:
        raise UsageError("a subcommand is required")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (classical, qmc, percolate, analyze, ed)")
        return _run(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # output piped into a reader that closed early (e.g. head)
        sys.stderr.close()
        return EXIT_OK
    except (ManifestError, SnapshotError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # chain failures, unwritable outputs
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
