"""File formats: CSV tables, JSON reports, scenario lists and run manifests.

CSV output is comma-separated with a header row and LF line endings.  Floats
are written with ``repr`` (shortest round-tripping form), so equal values
give equal bytes on every platform.
"""

from __future__ import annotations

import csv
import json
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

from .partitions import BalanceReport, Composition, EppfTable

MANIFEST_NAME = "manifest.json"


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_eppf(path, table: EppfTable) -> Path:
    rows = sorted(table.log_values.items(), key=lambda kv: (kv[0].n, kv[0].sizes))
    return write_csv(path, ["composition", "log_probability"], [(c.key, v) for c, v in rows])


def read_eppf(path) -> EppfTable:
    values = {Composition.from_key(r["composition"]): float(r["log_probability"]) for r in read_csv(path)}
    return EppfTable(max(c.n for c in values), values, origin=str(path))


def write_balance_report(path, report: BalanceReport) -> Path:
    return write_json(path, report.to_dict())


def write_weights(path, weights) -> Path:
    weights = np.asarray(weights, dtype=float)
    ranked = np.sort(weights)[::-1]
    return write_csv(path, ["h", "weight", "sorted"], zip(range(1, len(weights) + 1), weights, ranked))


def write_ppf_curve(path, curve) -> Path:
    header = ["composition", "j", "estimate", "stderr", "L", "ess", "seed"]
    rows = [(r["composition"], r["j"], r["estimate"], r["stderr"], r["draws"], r["ess"], r["seed"]) for r in curve.rows]
    return write_csv(path, header, rows)


def read_scenarios(path) -> list[Composition]:
    """One dash-separated composition per line; blank lines and ``#`` comments are skipped."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(Composition.from_key(line))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad composition {line!r}: {exc}") from None
    return out


def read_data(path, likelihood: str) -> np.ndarray:
    """Column ``y`` for the normal model, columns ``y, n`` for the binomial model."""
    rows = read_csv(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    try:
        if likelihood == "normal":
            return np.array([float(r["y"]) for r in rows])
        return np.array([[int(r["y"]), int(r["n"])] for r in rows])
    except KeyError as exc:
        raise ValueError(f"{path}: missing column {exc}") from None


def write_states(path, states) -> Path:
    """One state per line as space-separated integer labels."""
    path = Path(path)
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        for state in states:
            fh.write(" ".join(map(str, state)) + "\n")
    return path


def read_states(path) -> list[tuple[int, ...]]:
    return [tuple(map(int, line.split())) for line in Path(path).read_text().splitlines() if line.strip()]


def write_summary(out_dir, summary, names=None) -> list[Path]:
    """Co-clustering matrix, ``k_n`` and ``n_(1)`` distributions, predictive density."""
    out_dir = Path(out_dir)
    n = summary.cocluster.shape[0]
    names = list(names) if names is not None else [str(i) for i in range(n)]
    paths = [
        write_csv(out_dir / "cocluster.csv", ["item", *names], ([names[i], *summary.cocluster[i]] for i in range(n))),
        write_csv(out_dir / "k_dist.csv", ["k", "probability"], enumerate(summary.k_dist)),
        write_csv(out_dir / "nmax_dist.csv", ["nmax", "probability"], enumerate(summary.nmax_dist)),
    ]
    if summary.predictive is not None:
        grid, density = summary.predictive
        paths.append(write_csv(out_dir / "predictive.csv", ["y", "density"], zip(grid, density)))
    return paths


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def write_manifest(out_dir, command, config_path, seed, outputs, wall_clock, extra=None) -> Path:
    """Record of one run.  ``wall_clock`` is the only field expected to vary between reruns."""
    out_dir = Path(out_dir)
    payload = {
        "command": command,
        "config": None if config_path is None else str(config_path),
        "seed": seed,
        "out": str(out_dir),
        "outputs": sorted(Path(p).name for p in outputs),
        "wall_clock_seconds": wall_clock,
        "version": package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        payload.update(extra)
    return write_json(out_dir / MANIFEST_NAME, payload)
