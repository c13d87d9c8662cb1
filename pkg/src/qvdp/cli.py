"""Command-line experiment runner.

Usage:

    qvdp run --experiment wigner-panels --out-dir results/fig2 [--set key=value ...]
    qvdp run --config cfg.json [--set key=value ...]
    qvdp validate --experiment zeno-spectrum [--set key=value ...]

``--config`` accepts either a plain config JSON or a previously written
run manifest (its embedded config is reused, which replays the run).
Flag overrides win over the file. Every run writes ``manifest.json``
echoing the fully resolved config, the package version, wall time and a
sha256 digest per output file; re-running a manifest reproduces the
digests byte for byte, for any worker count.

Exit codes: 0 success, 2 usage error (unknown experiment/key, bad value),
3 numerical guard (schedule finer than the step, truncation overflow,
trace drift).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time

from qvdp import __version__
from qvdp.errors import ConfigError, QvdpError
from qvdp.experiments import EXPERIMENTS, resolve_config, run_experiment, validate_config
from qvdp.sde_core import set_workers

USAGE_EXIT = 2
NUMERICAL_EXIT = 3


def _parse_value(text: str):
    """Parse a ``--set`` value: JSON if possible, with inf/none conveniences."""
    low = text.lower()
    if low in ("inf", "infinity"):
        return math.inf
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config_file(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if "config" in data and isinstance(data["config"], dict):
        return dict(data["config"])  # manifest replay
    return dict(data)


def _gather_config(args) -> dict:
    raw: dict = {}
    if args.config:
        raw.update(_load_config_file(args.config))
    if args.experiment:
        raw["experiment"] = args.experiment
    if args.out_dir:
        raw["out_dir"] = args.out_dir
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.n_traj is not None:
        raw["n_traj"] = args.n_traj
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.published_scale:
        raw["published_scale"] = True
    if args.quiet:
        raw["quiet"] = True
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = _parse_value(value.strip())
    return raw


def _atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".qvdp-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_command(raw: dict) -> dict:
    """Resolve, execute and persist one experiment; returns the manifest."""
    cfg = resolve_config(raw)
    out_dir = cfg.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    workers = set_workers(cfg.get("workers"))
    t0 = time.time()
    outputs = run_experiment(cfg)
    wall = time.time() - t0
    entries = []
    for name in sorted(outputs):
        data = outputs[name].encode()
        path = os.path.join(out_dir, name)
        _atomic_write(path, data)
        entries.append({"path": name, "bytes": len(data),
                        "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {
        "config": {k: v for k, v in cfg.items() if k != "workers"},
        "seed": cfg["seed"],
        "version": __version__,
        "workers": workers,
        "wall_time_s": round(wall, 3),
        "outputs": entries,
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  (json.dumps(manifest, indent=2, sort_keys=True,
                              default=_json_default) + "\n").encode())
    return manifest


def _json_default(x):
    import numpy as np

    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    raise TypeError(f"not JSON serializable: {x!r}")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qvdp",
                                 description="van der Pol measurement experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--experiment", metavar="|".join(EXPERIMENTS))
        p.add_argument("--config", help="config JSON or manifest to replay")
        p.add_argument("--out-dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--n-traj", type=int, dest="n_traj")
        p.add_argument("--workers", type=int)
        p.add_argument("--published-scale", action="store_true",
                       help="use published trajectory counts instead of desk scale")
        p.add_argument("--quiet", action="store_true",
                       help="suppress stderr progress lines")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config key (JSON-parsed value)")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = _gather_config(args)
        if args.command == "validate":
            cfg = resolve_config(raw)
            violations = validate_config(cfg)
            report = {"experiment": cfg["experiment"], "ok": not violations,
                      "violations": violations}
            print(json.dumps(report, indent=2))
            return 0
        manifest = run_command(raw)
        if not raw.get("quiet"):
            print(json.dumps({"outputs": [e["path"] for e in manifest["outputs"]],
                              "wall_time_s": manifest["wall_time_s"]}, indent=2))
        return 0
    except ConfigError as exc:
        print(f"qvdp: usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except QvdpError as exc:
        print(f"qvdp: numerical guard: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
