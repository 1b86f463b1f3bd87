"""Command-line interface."""

import os
import sys
import logging
import argparse
import pathlib
import typing as t

from . import _common
from . import _neural
from . import _theory
from . import _network
from . import _trainer
from . import _exceptions
from . import _objectives
from . import _experiments
from . import _simulation
from . import _tomography

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "PLATONT_SEED"


def _seed(value: int) -> int:
    override = os.environ.get(SEED_ENV_VAR)
    if override is None:
        return value
    try:
        return int(override)
    except ValueError:
        raise _exceptions.ValidationError(
            f"{SEED_ENV_VAR} must be an integer: '{override}'"
        ) from None


def _manifest_path(out: t.Union[str, pathlib.Path]) -> pathlib.Path:
    out = pathlib.Path(out)
    if out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


def _arguments(args: argparse.Namespace) -> t.Dict[str, t.Any]:
    skip = {"handler", "verbose", "quiet", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def gen_topo(args: argparse.Namespace) -> int:
    seed = _seed(args.seed)
    net = _network.generate_random_tree(args.nodes, seed)
    _network.save_topology(net, args.out)
    _experiments.write_manifest(
        _manifest_path(args.out), "gen-topo", _arguments(args), [seed]
    )
    logger.info(f"Wrote {args.nodes}-node tree to '{args.out}'")
    return 0


def simulate(args: argparse.Namespace) -> int:
    seed = _seed(args.seed)
    net = _network.load_topology(args.topo)
    pairs = _network.default_probe_pairs(net, seed=seed, max_paths=args.max_paths)
    paths = _network.enumerate_paths(net, pairs)
    dataset = _simulation.build_dataset(
        net,
        paths,
        args.horizon,
        clean_fraction=args.clean_fraction,
        noise_level=args.noise,
        noise_kind=args.noise_kind,
        seed=seed,
        workers=args.workers,
    )
    _simulation.save_dataset(dataset, args.out)
    _experiments.write_manifest(
        _manifest_path(args.out), "simulate", _arguments(args), [seed]
    )
    logger.info(f"Wrote {dataset.size} samples over {len(paths)} paths to '{args.out}'")
    return 0


def train(args: argparse.Namespace) -> int:
    dataset = _simulation.load_dataset(args.data)
    if args.config:
        config, weights, model_config = _trainer.load_config(args.config)
    else:
        config = _trainer.TrainConfig()
        weights = _objectives.LossWeights()
        model_config = _neural.ModelConfig()
    if args.seed is not None:
        config.seed = args.seed
    config.seed = _seed(config.seed)
    if args.no_attention:
        model_config.use_attention = False

    result = _trainer.train(
        dataset,
        config=config,
        weights=weights,
        model_config=model_config,
        log_path=args.log,
    )
    extra = {
        "train": config.to_data(),
        "loss": weights.to_data(),
        "best_loss": result.best_loss,
        "diverged": result.diverged,
        "topology_hash": dataset.network.topology_hash(),
    }
    _neural.save_checkpoint(result.model, args.out, extra=extra)
    arguments = _arguments(args)
    arguments["config_data"] = {
        "train": config.to_data(),
        "loss": weights.to_data(),
        "model": model_config.to_data(),
    }
    _experiments.write_manifest(
        _manifest_path(args.out), "train", arguments, [config.seed]
    )
    logger.info(f"Wrote checkpoint (best loss {result.best_loss:.6g})")
    return 0


def evaluate(args: argparse.Namespace) -> int:
    dataset = _simulation.load_dataset(args.data)
    model = None
    if args.ckpt:
        model, _ = _neural.load_checkpoint(args.ckpt)
    elif args.pipeline == _experiments.Pipeline.platont.value:
        raise _exceptions.InvalidArgumentError("The 'platont' pipeline needs --ckpt")
    tasks = _experiments.ALL_TASKS if args.task == "all" else [args.task]
    result = _experiments.evaluate_pipeline(dataset, args.pipeline, tasks, model=model)
    _common.write_json(
        args.out,
        {
            "schema_version": _experiments.RESULTS_SCHEMA_VERSION,
            "dataset": dataset.header(),
            "results": [result.to_data()],
        },
    )
    _experiments.write_manifest(
        _manifest_path(args.out), "eval", _arguments(args), [dataset.seed]
    )
    logger.info(f"Wrote '{args.pipeline}' scores to '{args.out}'")
    return 0


def theory(args: argparse.Namespace) -> int:
    seed = _seed(args.seed)
    results = {}
    failures = 0
    if args.suite in ("theorem1", "all"):
        records = _theory.run_theorem1_suite(args.trials, seed, workers=args.workers)
        failures += sum(not r["shift_certified"] for r in records)
        failures += sum(r["unshifted_certified"] is False for r in records)
        results["theorem1"] = records
    if args.suite in ("proposition1", "all"):
        records = _theory.run_proposition1_suite(
            args.trials, seed, workers=args.workers
        )
        failures += sum(not r["holds"] for r in records)
        results["proposition1"] = records
    _common.write_json(args.out, results)
    _experiments.write_manifest(
        _manifest_path(args.out), "theory", _arguments(args), [seed]
    )
    if failures:
        logger.error(f"{failures} theory checks failed")
        return 1
    return 0


def matrix(args: argparse.Namespace) -> int:
    data = _common.read_json(args.config) if args.config else {}
    config = _experiments.RunConfig.from_data(data)
    if args.workers is not None:
        config.workers = args.workers
    if os.environ.get(SEED_ENV_VAR) is not None:
        config.seeds = [_seed(0)]
    bundle = _experiments.run_experiment_matrix(config)
    out = pathlib.Path(args.out)
    _experiments.write_tables(bundle, out)
    (out / "report.md").write_text(_experiments.report(bundle) + "\n")
    arguments = _arguments(args)
    arguments["config_data"] = config.to_data()
    _experiments.write_manifest(
        out / "manifest.json", "matrix", arguments, config.seeds
    )
    failed = len(bundle["summary"]["failed"])
    if failed:
        logger.error(f"{failed} of {len(bundle['cells'])} cells failed")
        return 1
    return 0


def report(args: argparse.Namespace) -> int:
    path = pathlib.Path(args.results)
    if path.is_dir():
        path = path / "results.json"
    bundle = _common.read_json(path)
    text = _experiments.report(bundle) + "\n"
    if args.out:
        pathlib.Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _logging_parent(suppress: bool) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("logging options")
    group.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=argparse.SUPPRESS if suppress else 0,
        help="more logging (repeatable)",
    )
    group.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="errors only",
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    """Command-line argument parser.

    Logging options are accepted before or after the subcommand; subcommand
    defaults never reset options given before it.
    """

    parser = argparse.ArgumentParser(
        prog="platont",
        description="Network tomography workbench",
        parents=[_logging_parent(suppress=False)],
    )
    common = _logging_parent(suppress=True)
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser(
        "gen-topo", help="generate a random tree", parents=[common]
    )
    p.add_argument("--nodes", type=int, required=True, help="node count")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", required=True, help="topology JSON file")
    p.set_defaults(handler=gen_topo)

    p = subparsers.add_parser("simulate", help="simulate a dataset", parents=[common])
    p.add_argument("--topo", required=True, help="topology JSON file")
    p.add_argument("--horizon", type=int, default=_experiments.DEFAULT_HORIZON)
    p.add_argument("--noise", type=float, default=0.1, help="noise level")
    p.add_argument(
        "--noise-kind",
        choices=[k.value for k in _simulation.NoiseKind],
        default=_simulation.NoiseKind.channel.value,
    )
    p.add_argument(
        "--clean-fraction", type=float, default=_simulation.DEFAULT_CLEAN_FRACTION
    )
    p.add_argument("--max-paths", type=int, default=_network.MAX_PROBE_PATHS)
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--out", required=True, help="dataset JSON file")
    p.set_defaults(handler=simulate)

    p = subparsers.add_parser("train", help="train a model", parents=[common])
    p.add_argument("--data", required=True, help="dataset JSON file")
    p.add_argument("--config", help="configuration JSON file")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument(
        "--no-attention",
        action="store_true",
        help="decode each channel from its own latent",
    )
    p.add_argument("--out", required=True, help="checkpoint file")
    p.add_argument("--log", help="per-step CSV loss log")
    p.set_defaults(handler=train)

    p = subparsers.add_parser("eval", help="evaluate a pipeline", parents=[common])
    p.add_argument("--data", required=True, help="dataset JSON file")
    p.add_argument("--ckpt", help="checkpoint file (platont pipeline)")
    p.add_argument(
        "--task", choices=[x.value for x in _tomography.Task] + ["all"], default="all"
    )
    p.add_argument(
        "--pipeline",
        choices=[x.value for x in _experiments.Pipeline],
        default=_experiments.Pipeline.platont.value,
    )
    p.add_argument("--out", required=True, help="results JSON file")
    p.set_defaults(handler=evaluate)

    p = subparsers.add_parser(
        "theory", help="run theory check suites", parents=[common]
    )
    p.add_argument(
        "--suite", choices=["theorem1", "proposition1", "all"], default="all"
    )
    p.add_argument("--trials", type=int, default=1000, help="trials per suite")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--out", required=True, help="results JSON file")
    p.set_defaults(handler=theory)

    p = subparsers.add_parser(
        "matrix", help="run the experiment matrix", parents=[common]
    )
    p.add_argument("--config", help="run configuration JSON file")
    p.add_argument("--workers", type=int, help="concurrent cells")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=matrix)

    p = subparsers.add_parser("report", help="summarise results", parents=[common])
    p.add_argument("--results", required=True, help="results JSON file or directory")
    p.add_argument("--out", help="markdown file (default: standard output)")
    p.set_defaults(handler=report)

    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s [%(levelname)8s] %(name)s: %(message)s"
    )


def main(argv: t.Sequence[str] = None) -> int:
    """Run the command line.

    Args:
        argv: arguments, default from ``sys.argv``

    Returns:
        exit code: 0 on success (for "matrix", when every cell completed)
    """

    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except _exceptions.PlatontError as e:
        logger.error(f"{e.code}: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 1
