"""
ddvm command line.

    ddvm gen-data --kind flow_layers --n 512 --sparsity 0.3 --seed 7 --out data/flow
    ddvm train    --config run.json --set train.steps=2000
    ddvm sample   --config run.json --set sample.n_samples=8
    ddvm refine   --config run.json --set refine.preset=kitti
    ddvm impute   --config run.json
    ddvm evaluate --config run.json [--key bicubic] [--crop 0,64,0,64]
    ddvm viz      --config run.json

Exit code 0 on success, 1 after a logged error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ddvm.cli import commands
from ddvm.cli.config import RunConfig, load_config
from ddvm.errors import DDVMError
from ddvm.numeric.tensor import set_default_dtype
from ddvm.synthgen.scene import SCENE_KINDS, SceneSpec

logger = logging.getLogger("ddvm")

CONFIG_COMMANDS = ("train", "sample", "refine", "impute", "evaluate", "viz")


def _crop(text: str):
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"crop must be top,bottom,left,right integers: {text}") from e
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"crop needs four values, got {len(parts)}")
    return parts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddvm", description="Diffusion models for depth and optical flow")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic dataset")
    gen.add_argument("--kind", choices=SCENE_KINDS, required=True)
    gen.add_argument("--n", type=int, default=64, help="number of examples")
    gen.add_argument("--out", type=Path, default=Path("data"))
    gen.add_argument("--height", type=int, default=64)
    gen.add_argument("--width", type=int, default=64)
    gen.add_argument("--sparsity", type=float, default=0.0, help="fraction of ground-truth pixels dropped")
    gen.add_argument("--noise-sigma", type=float, default=0.0, help="Student-t label noise scale")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-layers", type=int, default=None)
    gen.add_argument("--max-motion", type=float, default=0.2)
    gen.add_argument("--d-max", type=float, default=SceneSpec.d_max)
    gen.add_argument("--force", action="store_true", help="write into a non-empty directory")

    for name in CONFIG_COMMANDS:
        cmd = sub.add_parser(name, help=f"{name} using a run configuration")
        cmd.add_argument("--config", type=Path, default=None, help="JSON run configuration")
        cmd.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                         help="override one configuration key (repeatable)")
        if name in ("evaluate", "viz"):
            cmd.add_argument("--key", default="pred", help="prediction file key (pred, bicubic)")
        else:
            cmd.add_argument("--force", action="store_true", help="write into a non-empty directory")
        if name == "evaluate":
            cmd.add_argument("--crop", type=_crop, default=None, help="top,bottom,left,right evaluation window")
    return parser


def _run_config_command(args: argparse.Namespace, cfg: RunConfig, progress: bool) -> None:
    if args.command == "train":
        commands.cmd_train(cfg, force=args.force, progress=progress)
    elif args.command == "sample":
        commands.cmd_sample(cfg, force=args.force, progress=progress)
    elif args.command == "refine":
        commands.cmd_refine(cfg, force=args.force, progress=progress)
    elif args.command == "impute":
        commands.cmd_impute(cfg, force=args.force, progress=progress)
    elif args.command == "evaluate":
        commands.cmd_evaluate(cfg, key=args.key, crop=args.crop)
    else:
        commands.cmd_viz(cfg, key=args.key)


def run(args: argparse.Namespace) -> None:
    progress = not args.quiet
    if args.command == "gen-data":
        spec = SceneSpec(args.kind, args.height, args.width, args.sparsity, args.noise_sigma, args.seed,
                         args.n_layers, args.max_motion, args.d_max)
        commands.cmd_gen_data(spec, args.n, args.out, force=args.force, progress=progress)
        return
    cfg = load_config(args.config, args.overrides)
    set_default_dtype(cfg.numeric.dtype)
    try:
        _run_config_command(args, cfg, progress)
    finally:
        set_default_dtype("float64")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
    try:
        run(args)
    except DDVMError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
