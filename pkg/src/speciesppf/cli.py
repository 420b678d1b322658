"""Command-line interface.

Exit codes: 0 success, 1 method-level failure (a validation that does not
hold, an estimation error), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from pathlib import Path

from . import io
from ._random import as_seed_sequence
from .datasets import PRESETS, SARCOMA_SUBTYPES
from .exceptions import PathDependent, SpeciesSamplingError
from .gibbs import BinomialModelConfig, NormalModelConfig, PartitionPriorSpec, run_chain, summarize
from .partitions import (
    DEFAULT_BOUND,
    Composition,
    as_composition,
    check_balance,
    check_label_symmetry,
    dp_ppf,
    eppf_from_ppf,
    linear_f_ppf,
    polynomial_f_ppf,
)
from .predictive import EstimatedPpf, ppf_curve, simulate_sss
from .weights import sample_weights, weight_model_from_dict

# config key for each shared flag
FLAG_KEYS = {"seed": "seed", "out": "out", "preset": "preset", "iters": "iters", "burn_in": "burn_in", "workers": "workers"}
DEFAULTS = {"seed": 0, "out": ".", "preset": None, "iters": 1000, "burn_in": 100, "workers": 1}


class ConfigError(Exception):
    pass


_TERM = re.compile(r"^([+-]?\d*\.?\d*)\*?(m(?:\^(\d+))?)?$")


def parse_polynomial(text: str) -> list[float]:
    """Ascending coefficients of a polynomial in ``m`` such as ``"m^2+1"`` or ``"0.5*m"``."""
    expr = text.replace(" ", "").replace("**", "^")
    if not expr:
        raise ConfigError("empty polynomial")
    terms = [t for t in re.split(r"(?=[+-])", expr) if t]
    coefficients: dict[int, float] = {}
    for term in terms:
        match = _TERM.match(term)
        if not match or term in ("+", "-"):
            raise ConfigError(f"cannot parse polynomial term {term!r} in {text!r}")
        number, var, power = match.groups()
        if number in ("", "+", "-"):
            if var is None:
                raise ConfigError(f"cannot parse polynomial term {term!r} in {text!r}")
            number += "1"
        degree = 0 if var is None else int(power or 1)
        coefficients[degree] = coefficients.get(degree, 0.0) + float(number)
    return [coefficients.get(p, 0.0) for p in range(max(coefficients) + 1)]


def _checked(build, *args, **kwargs):
    """Run a config-object constructor, reporting bad values as configuration errors."""
    try:
        return build(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{getattr(build, '__name__', build)}: {exc}") from None


def build_ppf(spec: dict):
    if not isinstance(spec, dict):
        raise ConfigError("'ppf' must be an object")
    family = spec.get("family")
    theta = float(spec.get("theta", 1.0))
    if family == "dp":
        return dp_ppf(theta)
    if family == "linear-f":
        slope, intercept = float(spec.get("slope", 1.0)), float(spec.get("intercept", 0.0))
        return linear_f_ppf(lambda m: slope * m + intercept, theta, name=f"linear-f({slope:g}*m+{intercept:g})")
    if family == "polynomial-f":
        coefficients = spec.get("coefficients")
        if coefficients is None:
            coefficients = parse_polynomial(str(spec.get("f", "")))
        return polynomial_f_ppf(coefficients, theta)
    raise ConfigError(f"unknown ppf family {family!r}; expected dp, linear-f or polynomial-f")


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    return config


def resolve(args, config: dict) -> dict:
    """Merge flags with the config file.  Setting both to different values is an error."""
    merged = {}
    for attr, key in FLAG_KEYS.items():
        flag = getattr(args, attr)
        if attr == "out" and flag is not None:
            flag = str(flag)
        if flag is not None and key in config and config[key] != flag:
            raise ConfigError(f"--{attr.replace('_', '-')}={flag!r} conflicts with config {key}={config[key]!r}")
        merged[attr] = flag if flag is not None else config.get(key, DEFAULTS[attr])
    if not isinstance(merged["seed"], int) or merged["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if merged["workers"] < 1:
        raise ConfigError("workers must be positive")
    return merged


def _validate_ppf(config, opts, out: Path):
    ppf = _checked(build_ppf, config.get("ppf"))
    bound = _checked(int, config.get("bound", DEFAULT_BOUND))
    if bound < 1:
        raise ConfigError("bound must be >= 1")
    balance = check_balance(ppf, bound)
    symmetry = check_label_symmetry(ppf, bound)
    outputs = [
        io.write_balance_report(out / "balance.json", balance),
        io.write_balance_report(out / "label_symmetry.json", symmetry),
    ]
    failures = []
    for report in (balance, symmetry):
        if not report.holds:
            v = report.violations[0]
            failures.append(f"{report.check}: {len(report.violations)} violation(s), first at {v.to_dict()}")
    return outputs, failures


def _derive_eppf(config, opts, out: Path):
    ppf = _checked(build_ppf, config.get("ppf"))
    bound = _checked(int, config.get("bound", DEFAULT_BOUND))
    if bound < 1:
        raise ConfigError("bound must be >= 1")
    try:
        table = eppf_from_ppf(ppf, bound)
    except PathDependent as exc:
        witness = {
            "composition": "-".join(map(str, exc.composition)),
            "canonical": exc.canonical,
            "alternate": exc.alternate,
            "canonical_path": list(exc.canonical_path),
            "alternate_path": list(exc.alternate_path),
        }
        return [io.write_json(out / "path_dependence.json", witness)], [str(exc)]
    return [io.write_eppf(out / "eppf.csv", table)], []


def _scenarios(config, base: Path):
    scenarios = config.get("scenarios")
    if isinstance(scenarios, str):
        path = Path(scenarios)
        return _checked(io.read_scenarios, path if path.is_absolute() else base / path)
    if isinstance(scenarios, list) and scenarios:
        return _checked(lambda: [Composition.from_key(s) if isinstance(s, str) else as_composition(s) for s in scenarios])
    raise ConfigError("'scenarios' must be a file path or a nonempty list")


def _estimate_ppf(config, opts, out: Path):
    model = _checked(weight_model_from_dict, config.get("weights", {"kind": "logistic-normal"}))
    draws = int(config.get("draws", 10000))
    curve = ppf_curve(model, _scenarios(config, opts["config_dir"]), draws, opts["seed"], opts["workers"])
    return [io.write_ppf_curve(out / "ppf.csv", curve)], []


def _simulate(config, opts, out: Path):
    length = int(config.get("length", 10))
    reps = int(config.get("replicates", 1))
    if "ppf" in config:
        ppf = _checked(build_ppf, config["ppf"])
    else:
        model = _checked(weight_model_from_dict, config.get("weights", {"kind": "logistic-normal"}))
        ppf = EstimatedPpf(model, int(config.get("draws", 2000)), as_seed_sequence(opts["seed"], 1), opts["workers"])
    rows = []
    for r in range(reps):
        labels = simulate_sss(ppf, length, as_seed_sequence(opts["seed"], 0, r))
        rows.extend((r, i, label) for i, label in enumerate(labels))
    return [io.write_csv(out / "sequences.csv", ["replicate", "i", "label"], rows)], []


def _sample_weights(config, opts, out: Path):
    model = _checked(weight_model_from_dict, config.get("weights", {"kind": "logistic-normal"}))
    draw = sample_weights(model, opts["seed"])
    path = io.write_weights(out / "weights.csv", draw.weights)
    meta = io.write_json(out / "weights_meta.json", {"model": model.to_dict(), "tail_mass": draw.tail_mass, "horizon": draw.horizon})
    return [path, meta], []


def _fit(config, opts, out: Path):
    preset = opts["preset"]
    likelihood = config.get("likelihood")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        expected = "normal" if preset == "grid" else "binomial"
        if likelihood is not None and likelihood != expected:
            raise ConfigError(f"preset {preset} needs likelihood {expected}, config says {likelihood}")
        likelihood = expected
        if "data" in config:
            raise ConfigError("give either a preset or a data file, not both")
        data = PRESETS[preset]()
    else:
        if "data" not in config:
            raise ConfigError("fit needs --preset or a 'data' CSV in the config")
        likelihood = likelihood or "normal"
        path = Path(config["data"])
        try:
            data = io.read_data(path if path.is_absolute() else opts["config_dir"] / path, likelihood)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    model = config.get("model", {})
    if likelihood == "normal":
        cfg = _checked(NormalModelConfig, **model)
    elif likelihood == "binomial":
        cfg = _checked(BinomialModelConfig, **model)
    else:
        raise ConfigError(f"unknown likelihood {likelihood!r}")
    prior = _checked(PartitionPriorSpec.from_dict, config.get("prior", {"kind": "dp", "theta": 2.83}))
    iters, burn_in = int(opts["iters"]), int(opts["burn_in"])
    if not iters > burn_in >= 0:
        raise ConfigError("need iters > burn-in >= 0")
    chain = run_chain(data, cfg, prior, iters, burn_in, opts["seed"])
    summary = summarize(chain)
    names = SARCOMA_SUBTYPES if preset == "sarcoma" else None
    outputs = io.write_summary(out, summary, names)
    outputs.append(io.write_states(out / "states.txt", chain.states))
    outputs.append(io.write_csv(out / "log_scores.csv", ["state", "log_score"], enumerate(chain.log_scores)))
    return outputs, []


COMMANDS = {
    "validate-ppf": (_validate_ppf, "check balance and label symmetry of a built-in PPF family"),
    "derive-eppf": (_derive_eppf, "derive the EPPF table implied by a PPF"),
    "estimate-ppf": (_estimate_ppf, "Monte Carlo PPF estimates for a weight model over scenarios"),
    "simulate": (_simulate, "simulate species sampling sequences"),
    "sample-weights": (_sample_weights, "draw one truncated weight sequence"),
    "fit": (_fit, "collapsed Gibbs fit of a conjugate mixture"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help="root seed (nonnegative integer)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--preset", choices=sorted(PRESETS), help="built-in dataset for fit")
    common.add_argument("--iters", type=int, help="Gibbs sweeps")
    common.add_argument("--burn-in", dest="burn_in", type=int, help="sweeps discarded")
    common.add_argument("--workers", type=int, help="threads for Monte Carlo estimation")
    parser = argparse.ArgumentParser(prog="speciesppf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command][0]
    started = time.perf_counter()
    try:
        config = load_config(args.config)
        opts = resolve(args, config)
        opts["config_dir"] = args.config.parent if args.config else Path(".")
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        outputs, failures = handler(config, opts, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TypeError, KeyError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (SpeciesSamplingError, ValueError, ZeroDivisionError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    io.write_manifest(
        out, args.command, args.config, opts["seed"], outputs, round(time.perf_counter() - started, 3),
        extra={"status": "failed" if failures else "ok", "failures": failures},
    )
    for line in failures:
        print(f"failure: {line}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
