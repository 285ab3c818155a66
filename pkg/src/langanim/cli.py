"""``langanim`` command line: train, animate, chain, evaluate, check-backend.

Exit codes: 0 success, 2 configuration error, 3 backend contract failure,
4 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .backends import BackendContractError, check_backends, load_backends
from .backends.loading import resolve_backend_spec
from .backends.toy import VocabularyError
from .config import ConfigError, parse_config, serialize_config
from .core import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_BACKEND, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("langanim")


def _overrides(pairs: Sequence[str]) -> dict:
    """``section.key=value`` strings to a nested override dict."""
    out: dict[str, dict[str, str]] = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        out.setdefault(section.strip(), {})[name.strip()] = value.strip()
    return out


def _config(args):
    overrides = _overrides(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("train", {})["seed"] = str(args.seed)
    return parse_config(args.config, overrides)


# verbs ------------------------------------------------------------------------

def cmd_train(args) -> int:
    from .checkpoint import Checkpoint
    from .trainer import Trainer

    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(serialize_config(cfg))
    if args.checkpoint:
        trainer = Trainer.from_checkpoint(Checkpoint.load(args.checkpoint), config=cfg)
    else:
        trainer = Trainer(cfg)
    trainer.fit(checkpoint_dir=out)
    print(trainer.last_checkpoint)
    return EXIT_OK


def _source(args):
    if (args.image is None) == (args.sample_seed is None):
        raise ConfigurationError("give exactly one of --image or --sample-seed")
    return args.sample_seed if args.image is None else args.image


def _animation(args, verb: str) -> int:
    from .workflows import AnimationRequest, animate, chain, replay

    if args.replay:
        result = replay(args.replay, args.out)
    else:
        if not args.checkpoint:
            raise ConfigurationError("--checkpoint is required")
        if not args.text:
            raise ConfigurationError("--text is required")
        req = AnimationRequest(_source(args), args.text, args.checkpoint, args.out,
                               frames_per_prompt=args.frames, seed=args.seed or 0,
                               contact_sheet=args.contact_sheet)
        result = (animate if verb == "animate" else chain)(req)
    print(result.manifest)
    return EXIT_OK


def cmd_animate(args) -> int:
    return _animation(args, "animate")


def cmd_chain(args) -> int:
    return _animation(args, "chain")


def cmd_evaluate(args) -> int:
    from .workflows import evaluate, write_report

    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    backends = None
    if args.config:
        b = parse_config(args.config).backend
        backends = load_backends(resolve_backend_spec(b.backend), seed=b.synth_seed)
    report = evaluate(args.gen_dir, args.ref, metrics, backends=backends, cache_dir=args.cache)
    if args.out:
        write_report(report, args.out)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_check_backend(args) -> int:
    b = _config(args).backend
    spec = resolve_backend_spec(b.backend)
    bundle = load_backends(spec, check=False, seed=b.synth_seed, finetune_text=b.finetune_text,
                           share_critic=b.share_critic)
    reports = check_backends(bundle)
    print(f"backend: {spec}")
    for r in reports:
        print(r.format())
    return EXIT_OK if all(r.ok for r in reports) else EXIT_BACKEND


# parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="langanim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def config_flags(sp):
        sp.add_argument("--config", help="INI file with [train] [loss] [model] [backend] sections")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable; wins over --config")

    t = sub.add_parser("train", help="fit the motion generator and mappers")
    config_flags(t)
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--checkpoint", help="resume from this checkpoint")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    for verb, func, text_help in (("animate", cmd_animate, "prompt"),
                                  ("chain", cmd_chain, "prompt; repeat for each segment in order")):
        a = sub.add_parser(verb, help=f"{verb} a face from a trained checkpoint")
        a.add_argument("--checkpoint")
        a.add_argument("--image", help="source face image (real-image checkpoints)")
        a.add_argument("--sample-seed", type=int, help="content seed (sampled-mode checkpoints)")
        a.add_argument("--text", action="append", help=text_help)
        a.add_argument("--frames", type=int, default=16, help="frames per prompt")
        a.add_argument("--out", required=True, help="output directory for frames and manifest")
        a.add_argument("--seed", type=int, default=0)
        a.add_argument("--contact-sheet", action="store_true")
        a.add_argument("--replay", metavar="MANIFEST", help="regenerate the run recorded in a manifest")
        a.set_defaults(func=func)

    e = sub.add_parser("evaluate", help="FID and ACD over directories of frames")
    e.add_argument("gen_dir", help="generated frames, one subdirectory per video")
    e.add_argument("--ref", help="reference frames for FID")
    e.add_argument("--metrics", default="fid,acd")
    e.add_argument("--config", help="config selecting the embedder backend")
    e.add_argument("--cache", help="embedding cache directory")
    e.add_argument("--out", help="write the JSON report here")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("check-backend", help="run the backend contract checks")
    config_flags(c)
    c.set_defaults(func=cmd_check_backend, seed=None)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.verb == "train" else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, VocabularyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendContractError as exc:
        print(exc, file=sys.stderr)
        return EXIT_BACKEND
    except Exception as exc:  # noqa: BLE001 - map every other failure to one exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
