"""``mcmc-bench`` command line entry point.

Exit codes: 0 on success, 1 when ``verify`` finds a failing kernel, 2 for
configuration errors, 3 for numerical degeneracy.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigurationError, DegenerateWeightsError, SingularKernelError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .oracle import stationarity_report

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="mcmc-bench", description="Multiple-try and particle MCMC benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, samplers in EXPERIMENTS.items():
        p = sub.add_parser(name, help=f"{name} experiment ({', '.join(samplers)})")
        p.add_argument("--sampler", choices=samplers)
        p.add_argument("--n", type=int, nargs="+", dest="N", help="number of candidates or particles (sweep)")
        p.add_argument("--t", type=int, nargs="+", dest="T", help="iterations (sweep)")
        p.add_argument("--sigma", type=float, nargs="+", help="proposal scale (sweep)")
        p.add_argument("--d", type=int, dest="D", help="dimension")
        p.add_argument("--c", type=int, dest="C", help="number of recovered chains")
        p.add_argument("--eta", type=float)
        p.add_argument("--runs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out")
        p.add_argument("--burn-in", type=float, dest="burn_in", help="fraction of each chain discarded")
        p.add_argument("--budget", type=int, help="fixed E = N*T; T is derived per N")
        p.add_argument("--grid-size", type=int, dest="grid_size")
        p.add_argument("--data-seed", type=int, dest="data_seed")
        p.add_argument("--sigma-p", type=float, dest="sigma_p", help="step scale of the sequential proposal")
        p.add_argument("--paper-scale", action="store_true", default=None, dest="paper_scale")
        p.add_argument("--config", help="YAML or JSON file with ExperimentConfig fields")
    v = sub.add_parser("verify", help="check enumerated kernels for stationarity on random discrete instances")
    v.add_argument("--instances", type=int, default=20)
    v.add_argument("--k", type=int, default=4, dest="K", help="number of states")
    v.add_argument("--n", type=int, default=2, dest="N", help="number of tries")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-10)
    return parser


def cmd_verify(args):
    if not (2 <= args.K <= 6 and 1 <= args.N <= 3 and args.instances >= 1):
        raise ConfigurationError("verify needs 2 <= K <= 6, 1 <= N <= 3 and at least one instance")
    ok = True
    for label, dev, row in stationarity_report(args.instances, args.K, args.N, args.seed):
        passed = dev <= args.tol and row <= 1e-12
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {label}: max |pi P - pi| = {dev:.3g}, max row error = {row:.3g}")
    return EXIT_OK if ok else EXIT_FAIL


def load_config_file(path):
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a mapping of config fields")
    return data


def config_from_args(args):
    """Merge file settings with command line flags (flags win)."""
    fields = dict(load_config_file(args.config)) if args.config else {}
    fields.pop("experiment", None)
    for key, value in vars(args).items():
        if key in ("experiment", "config", "verbose") or value is None:
            continue
        fields[key] = value
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = sorted(set(fields) - known)
    if unknown:
        raise ConfigurationError(f"unknown config fields {unknown}")
    try:
        return ExperimentConfig(args.experiment, **fields)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def write_outputs(result, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.config.experiment}_{result.config.sampler}.csv"
    csv_path.write_text(result.to_csv())
    summary_path = out / "summary.json"
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
    summary[csv_path.stem] = result.summary()
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return csv_path


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.experiment == "verify":
            return cmd_verify(args)
        cfg = config_from_args(args)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            result = run_experiment(cfg)
        path = write_outputs(result, cfg.out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateWeightsError, SingularKernelError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for row in result.rows:
        print(f"{row['param_name']}={row['param_value']} N={row['N']} T={row['T']} "
              f"mse={row['mse']:.6g} stderr={row['stderr']:.3g} ar={row['ar']:.3f} E={row['E']:g}")
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
