"""Command-line interface covering every pipeline stage.

Exit codes: 0 success, 1 usage error (stderr message names the offending
flag), 2 runtime error (divergence, bad files, aborted fits). All outputs
are byte-deterministic given the flags and seeds.
"""

from __future__ import annotations

import argparse
import sys

from . import runners
from .errors import NanovoidError


class _UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"argument {flag}: {message}")
        self.flag = flag


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures reported as exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(flag):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if v < 1:
            raise argparse.ArgumentTypeError("must be >= 1")
        return v
    parse.__name__ = flag
    return parse


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _step_list(text):
    try:
        steps = [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not steps:
        raise argparse.ArgumentTypeError("needs at least one step")
    if any(b <= a for a, b in zip(steps, steps[1:])) or steps[0] < 0:
        raise argparse.ArgumentTypeError("steps must be non-negative and strictly increasing")
    return steps


def build_parser() -> _Parser:
    parser = _Parser(prog="nanovoid",
                     description="Nano-void phase-field simulation, learning and annotation.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("synth", parents=[], help="synthesize a two-void trajectory with masks")
    p.add_argument("--out", required=True, help="output trajectory directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=_positive_int("--steps"), required=True)
    p.add_argument("--snapshot-every", type=_positive_int("--snapshot-every"), required=True)
    p.add_argument("--params", default=None, help="parameter JSON (default: built-in)")
    p.add_argument("--dt", type=_positive_float, default=None,
                   help="time step (default: half the stability bound)")

    p = sub.add_parser("simulate", help="integrate from a .pfs initial state")
    p.add_argument("--params", required=True)
    p.add_argument("--init", required=True, help="initial state .pfs")
    p.add_argument("--dt", type=_positive_float, required=True)
    p.add_argument("--steps", type=_positive_int("--steps"), required=True)
    p.add_argument("--snapshot-every", type=_positive_int("--snapshot-every"), required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("learn", help="fit parameters to annotated frame pairs")
    p.add_argument("--data", required=True, help="directory with pairs.json and masks")
    p.add_argument("--bounds", default=None, help="bounds JSON (default: unbounded)")
    p.add_argument("--lambda1", type=_nonneg_float, default=1e3)
    p.add_argument("--lambda2", type=_nonneg_float, default=1e3)
    p.add_argument("--lr", type=_positive_float, default=0.05)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--grad", choices=("central_fd", "adjoint"), default="adjoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="fitted parameter JSON")
    p.add_argument("--history", default=None,
                   help="loss table CSV; a .png loss figure lands next to it")
    p.add_argument("--init", default=None, help="initial parameter JSON "
                   "(default: box midpoints, 1.0 for unbounded)")

    p = sub.add_parser("segment", help="SLIC superpixels for a grayscale PNG")
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=_positive_int("--k"), required=True)
    p.add_argument("--m", type=_positive_float, default=20.0)
    p.add_argument("--iters", type=_positive_int("--iters"), default=10)
    p.add_argument("--out", required=True, help="superpixel map JSON")

    p = sub.add_parser("compose", help="compose an annotation into a mask PNG")
    p.add_argument("--superpixels", required=True)
    p.add_argument("--annotation", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="forward-predict masks from an annotated frame")
    p.add_argument("--params", required=True)
    p.add_argument("--init-annotation", required=True)
    p.add_argument("--superpixels", required=True)
    p.add_argument("--dt", type=_positive_float, required=True)
    p.add_argument("--steps", type=_step_list, required=True,
                   help="comma-separated step indices, e.g. 0,50,100")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="render trajectory snapshots to PNG frames")
    p.add_argument("--traj", required=True)
    p.add_argument("--channel", choices=("cv", "ci", "eta"), required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="IOU and pixel accuracy between mask directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--figures", default=None,
                   help="optional PNG path for a per-frame score chart")

    p = sub.add_parser("serve", help="run the HTTP annotation and job service")
    p.add_argument("--data", required=True, help="data root directory")
    p.add_argument("--port", type=_positive_int("--port"), default=8000)
    p.add_argument("--workers", type=_positive_int("--workers"), default=None,
                   help="concurrent job workers (default: cores / 2)")
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _cmd_synth(args):
    runners.run_synth(args.out, args.seed, args.steps, args.snapshot_every,
                      params_path=args.params, dt=args.dt)
    return 0


def _cmd_simulate(args):
    runners.run_simulate(args.params, args.init, args.dt, args.steps,
                         args.snapshot_every, args.out)
    return 0


def _cmd_learn(args):
    if args.iters < 0:
        raise _UsageError("--iters", "must be >= 0")
    runners.run_learn(args.data, args.out, bounds_path=args.bounds,
                      lambda1=args.lambda1, lambda2=args.lambda2,
                      learning_rate=args.lr, iterations=args.iters,
                      gradient_mode=args.grad, seed=args.seed,
                      history_path=args.history, init_path=args.init)
    return 0


def _cmd_segment(args):
    runners.run_segment(args.image, args.k, args.m, args.iters, args.out)
    return 0


def _cmd_compose(args):
    runners.run_compose(args.superpixels, args.annotation, args.out)
    return 0


def _cmd_predict(args):
    runners.run_predict(args.params, args.init_annotation, args.superpixels,
                        args.dt, args.steps, args.threshold, args.out)
    return 0


def _cmd_render(args):
    runners.run_render(args.traj, args.channel, args.out)
    return 0


def _cmd_metrics(args):
    rows, mean_iou, mean_acc = runners.run_metrics(args.pred, args.truth)
    sys.stdout.write(runners.metrics_to_csv(rows, mean_iou, mean_acc))
    if args.figures:
        from .report import save_metrics_figure
        save_metrics_figure(rows, args.figures)
    return 0


def _cmd_serve(args):
    import uvicorn

    from .service import create_app
    app = create_app(args.data, n_workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "simulate": _cmd_simulate,
    "learn": _cmd_learn,
    "segment": _cmd_segment,
    "compose": _cmd_compose,
    "predict": _cmd_predict,
    "render": _cmd_render,
    "metrics": _cmd_metrics,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"nanovoid {args.command}: error: {e}", file=sys.stderr)
        return 1
    except NanovoidError as e:
        print(f"nanovoid {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"nanovoid {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
