"""Command-line entry point.

Stages of an experiment run individually (`synth`, `featurize`, ...,
`report`) against a shared output directory, or all at once with `run`.
`abx-serve` hosts the listening test over HTTP.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import AdvsvError
from .harness import ExperimentState, load_experiment_config, render_report, run_experiment


def _load_config(args):
    if not args.config:
        raise AdvsvError("--config is required for this command")
    return load_experiment_config(args.config, seed_override=args.seed)


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    return Path("runs") / cfg.config_hash()[:12]


def _stage_command(stage_name: str):
    def handler(args) -> int:
        cfg = _load_config(args)
        state = ExperimentState(cfg, _out_dir(args, cfg))
        state.ensure_out_dir()
        getattr(state, f"stage_{stage_name}")()
        print(f"[{stage_name}] done -> {state.out}")
        return 0

    return handler


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    bundle = run_experiment(cfg, out)
    print(render_report(bundle, "markdown"))
    print(f"artifacts -> {out}")
    return 0


def _cmd_report(args) -> int:
    cfg = _load_config(args)
    state = ExperimentState(cfg, _out_dir(args, cfg))
    bundle = state.stage_report()
    print(render_report(bundle, args.format))
    return 0


def _cmd_abx_serve(args) -> int:
    import uvicorn

    from .abx_app import create_app

    app = create_app(args.pool, args.state, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advsv",
        description="Train a neural speaker verifier, attack it with FGSM, "
        "reconstruct adversarial audio, and serve ABX listening tests.",
    )
    parser.add_argument("--config", "-c", help="experiment TOML file")
    parser.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    parser.add_argument("--out", "-o", help="output directory (default: runs/<config-hash>)")
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in ("synth", "featurize", "trials", "train", "evaluate", "attack", "reconstruct", "transfer"):
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.set_defaults(handler=_stage_command(stage))

    p = sub.add_parser("report", help="assemble the report bundle and render it")
    p.add_argument("--format", choices=("markdown", "json"), default="markdown")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("run", help="run every stage of the experiment")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("abx-serve", help="serve ABX listening-test sessions over HTTP")
    p.add_argument("--pool", required=True, help="pair-pool manifest (pair_id,clean,adv)")
    p.add_argument("--state", required=True, help="directory for session event logs")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui", default=None, help="static directory with the browser UI bundle")
    p.set_defaults(handler=_cmd_abx_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except AdvsvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
