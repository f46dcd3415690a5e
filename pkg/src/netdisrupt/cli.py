"""Command line front end.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
The thread count for permutation kernels comes from ``--threads`` or the
``NETDISRUPT_NUM_THREADS`` environment variable.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import _kernels
from .adjust import adjusted_overlap_bounds
from .bounds import dpo_bounds, dte_bounds, pair_count_factor
from .exceptions import NetworkValidationError, NumericalError
from .netmat import DIAGONAL_POLICIES, FORMATS, load_network
from .oracle import sharp_destroyed_created, sharp_overlap_set
from .pipeline import _json_ready, load_config, load_manifest, run_report
from .ste import disruption_lower_bound, ste_field

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
ORACLE_FULL_SET_MAX_N = 8


def _parse_denoise(text):
    if text is None or text == "none":
        return None
    if text == "svt":
        return "auto"
    if text.startswith("svt:"):
        tau = float(text[4:])
        if not tau > 0:
            raise NetworkValidationError(f"SVT threshold must be positive, got {tau}")
        return tau
    raise NetworkValidationError(f"--denoise must be none, svt, or svt:TAU, got {text!r}")


def _add_pair_args(p):
    p.add_argument("--net1", required=True, help="treated-arm network file")
    p.add_argument("--net0", required=True, help="control-arm network file")
    p.add_argument("--format", default="edge_list", choices=FORMATS)
    p.add_argument("--labels1", help="label manifest for net1 (edge lists)")
    p.add_argument("--labels0", help="label manifest for net0 (edge lists)")
    p.add_argument("--diagonal", default="zero", choices=DIAGONAL_POLICIES)


def _load_pair(args):
    net1 = load_network(args.net1, args.format, labels_path=args.labels1, diagonal=args.diagonal, group=1)
    net0 = load_network(args.net0, args.format, labels_path=args.labels0, diagonal=args.diagonal, group=0)
    return net1, net0


def _emit(obj):
    sys.stdout.write(json.dumps(_json_ready(obj), indent=2, sort_keys=True) + "\n")


def _cmd_bounds_dpo(args):
    net1, net0 = _load_pair(args)
    denoise = _parse_denoise(args.denoise)
    if args.adjust == "reduction":
        iv = adjusted_overlap_bounds(net1, net0, args.y1, args.y0, variant=args.variant, denoise=denoise)
    else:
        iv = dpo_bounds(net1, net0, args.y1, args.y0, denoise=denoise)
    out = iv.to_dict(y1=args.y1, y0=args.y0)
    if net1.is_binary() and net0.is_binary():
        f = pair_count_factor(net0)
        out["pair_counts"] = {"lower": iv.lower * f, "upper": iv.upper * f}
    _emit(out)


def _cmd_bounds_dte(args):
    net1, net0 = _load_pair(args)
    denoise = _parse_denoise(args.denoise)
    rows = []
    for y in args.y:
        iv = dte_bounds(net1, net0, y, denoise=denoise)
        d = iv.to_dict(y=y)
        d["lower_at"], d["upper_at"] = iv.lower_at, iv.upper_at
        rows.append(d)
    _emit(rows)


def _cmd_ste(args):
    net1, net0 = _load_pair(args)
    field = ste_field(net1, net0, args.basis)
    if args.csv:
        field.to_csv(args.csv)
    _emit({"basis": field.basis, "l2_squared": field.l2_squared(), "degenerate": field.degenerate,
           "disruption_lower_bound": disruption_lower_bound(net1, net0),
           "histogram": field.histogram(args.bins)})


def _cmd_oracle(args):
    net1, net0 = _load_pair(args)
    full = net1.n <= ORACLE_FULL_SET_MAX_N
    if args.y1 is None and args.y0 is None:
        d, c = sharp_destroyed_created(net1, net0)
        _emit({"destroyed": d.to_dict(full), "created": c.to_dict(full)})
    elif args.y1 is None or args.y0 is None:
        raise NetworkValidationError("give both --y1 and --y0, or neither for destroyed/created counts")
    else:
        s = sharp_overlap_set(net1, net0, args.y1, args.y0)
        _emit(s.to_dict(full) | {"y1": args.y1, "y0": args.y0})


def _cmd_report(args):
    if (args.config is None) == (args.manifest is None):
        raise NetworkValidationError("give exactly one of --config or --manifest")
    cfg = load_config(args.config) if args.config else load_manifest(args.manifest)
    if args.adjust is not None:
        cfg.adjust = args.adjust
    if args.denoise is not None:
        cfg.denoise = _parse_denoise(args.denoise)
    manifest = run_report(cfg, args.out)
    _emit({"out": str(args.out), "files": manifest["files"]})


def build_parser():
    parser = argparse.ArgumentParser(prog="netdisrupt", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help="threads for permutation kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds-dpo", help="bounds on F(y1, y0)")
    _add_pair_args(p)
    p.add_argument("--y1", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--adjust", choices=("reduction", "none"), default="none")
    p.add_argument("--variant", choices=("rowmean", "offdiag"), default="rowmean")
    p.add_argument("--denoise", default="none", help="none, svt, or svt:TAU")
    p.set_defaults(func=_cmd_bounds_dpo)

    p = sub.add_parser("bounds-dte", help="bounds on the distribution of treatment effects")
    _add_pair_args(p)
    p.add_argument("--y", type=float, nargs="+", required=True)
    p.add_argument("--denoise", default="none", help="none, svt, or svt:TAU")
    p.set_defaults(func=_cmd_bounds_dte)

    p = sub.add_parser("ste", help="spectral treatment effects")
    _add_pair_args(p)
    p.add_argument("--basis", choices=("treated", "untreated"), default="treated")
    p.add_argument("--csv", help="write the effect matrix here")
    p.add_argument("--bins", type=int, default=40)
    p.set_defaults(func=_cmd_ste)

    p = sub.add_parser("oracle", help="exact sharp sets for small networks (n <= 10)")
    _add_pair_args(p)
    p.add_argument("--y1", type=float)
    p.add_argument("--y0", type=float)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("report", help="full report from a config file or a previous manifest")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--adjust", choices=("reduction", "none"))
    p.add_argument("--denoise", help="none, svt, or svt:TAU")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads or os.environ.get("NETDISRUPT_NUM_THREADS")
    try:
        if threads:
            _kernels.set_num_threads(int(threads))
        args.func(args)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        # LinAlgError subclasses ValueError, so it must be caught first.
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (NetworkValidationError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
