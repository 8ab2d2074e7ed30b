"""Command-line front end: train / eval / surface / sweep.

Configuration is a flat key=value text file; flags override file values
and file values override defaults. Every run directory receives a
manifest (same key=value format, written before training), a log.csv
with one row per episode, and the final actor weights as a little-endian
float64 blob with a shape header and a crc32 checksum.
"""

from __future__ import annotations

import argparse
import csv
import os
import struct
import sys
import zlib
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .envs import env_names, make_env
from .net import Mlp, ACTIVATIONS
from .surrogate import (METHODS, SurrogateConfig, a_tilde_rpe, negative_loss,
                        relative_ratio, threshold_ratios)
from .trainer import TrainerConfig, evaluate, run_training

WEIGHTS_MAGIC = b"PPRW"
WEIGHTS_VERSION = 1


class WeightsError(Exception):
    """Raised for unreadable, mismatched, or corrupted weight files."""


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip
    return str(value)


def parse_kv(text):
    """Parse flat key=value lines; blank lines and # comments allowed."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


# canonical key order shared by config files and manifests
CONFIG_KEYS = (
    "env", "method", "epsilon", "beta", "eta", "log_ratio_clamp",
    "episodes", "steps_per_update", "batch", "capacity", "alpha", "gamma",
    "baseline_polyak", "target_polyak", "entropy_bonus", "hidden",
    "lambda", "kappa", "delta_lower", "seed",
)


def config_to_kv(config: TrainerConfig):
    s = config.surrogate
    return {
        "env": config.env,
        "method": s.method,
        "epsilon": _fmt(s.epsilon),
        "beta": _fmt(s.beta),
        "eta": _fmt(s.eta),
        "log_ratio_clamp": _fmt(s.log_ratio_clamp),
        "episodes": _fmt(config.episodes),
        "steps_per_update": _fmt(config.steps_per_update),
        "batch": _fmt(config.batch_size),
        "capacity": _fmt(config.capacity),
        "alpha": _fmt(config.learning_rate),
        "gamma": _fmt(config.gamma),
        "baseline_polyak": _fmt(config.baseline_polyak),
        "target_polyak": _fmt(config.target_polyak),
        "entropy_bonus": _fmt(config.entropy_bonus),
        "hidden": ",".join(str(n) for n in config.hidden_sizes),
        "lambda": _fmt(config.lam),
        "kappa": _fmt(config.kappa),
        "delta_lower": _fmt(config.delta_lower),
        "seed": _fmt(config.seed),
    }


def kv_to_config(kv) -> TrainerConfig:
    unknown = set(kv) - set(CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    base = config_to_kv(TrainerConfig())
    base.update(kv)
    surrogate = SurrogateConfig(
        method=base["method"],
        beta=float(base["beta"]),
        epsilon=float(base["epsilon"]),
        eta=float(base["eta"]),
        log_ratio_clamp=float(base["log_ratio_clamp"]),
    )
    return TrainerConfig(
        env=base["env"],
        surrogate=surrogate,
        episodes=int(base["episodes"]),
        steps_per_update=int(base["steps_per_update"]),
        batch_size=int(base["batch"]),
        capacity=int(base["capacity"]),
        learning_rate=float(base["alpha"]),
        gamma=float(base["gamma"]),
        baseline_polyak=float(base["baseline_polyak"]),
        target_polyak=float(base["target_polyak"]),
        entropy_bonus=float(base["entropy_bonus"]),
        hidden_sizes=tuple(int(n) for n in base["hidden"].split(",") if n),
        lam=float(base["lambda"]),
        kappa=float(base["kappa"]),
        delta_lower=float(base["delta_lower"]),
        seed=int(base["seed"]),
    )


def save_weights(path, net: Mlp):
    blob = bytearray()
    blob += WEIGHTS_MAGIC
    blob += struct.pack("<I", WEIGHTS_VERSION)
    act = net.activation.encode("ascii")
    blob += struct.pack("<I", len(act)) + act
    blob += struct.pack("<I", len(net.layer_sizes))
    blob += struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes)
    for p in net.params():
        blob += np.ascontiguousarray(p, dtype="<f8").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


def load_weights(path) -> Mlp:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise WeightsError(f"cannot read weights file {path}: {exc}") from exc
    if len(blob) < 4 or not blob.startswith(WEIGHTS_MAGIC):
        raise WeightsError(f"{path} is not a weights file (bad magic)")
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise WeightsError(f"{path}: checksum mismatch, file is corrupted")
    off = 4
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != WEIGHTS_VERSION:
        raise WeightsError(f"{path}: unsupported weights version {version}")
    (act_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    activation = blob[off:off + act_len].decode("ascii")
    off += act_len
    if activation not in ACTIVATIONS:
        raise WeightsError(f"{path}: unknown activation {activation!r}")
    (n_layers,) = struct.unpack_from("<I", blob, off)
    off += 4
    sizes = list(struct.unpack_from(f"<{n_layers}I", blob, off))
    off += 4 * n_layers
    net = Mlp(sizes, activation)
    for p in net.params():
        nbytes = p.size * 8
        if off + nbytes > len(blob) - 4:
            raise WeightsError(f"{path}: truncated weights payload")
        p[...] = np.frombuffer(blob, dtype="<f8", count=p.size, offset=off).reshape(p.shape)
        off += nbytes
    if off != len(blob) - 4:
        raise WeightsError(f"{path}: trailing bytes in weights payload")
    return net


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _record_row(record):
    return [
        _fmt(record.episode),
        _fmt(float(record.episode_return)),
        _fmt(float(record.epsilon_mean)),
        _fmt(float(record.pearson_divergence)),
        _fmt(float(record.actor_loss)),
        _fmt(float(record.critic_loss)),
    ]


LOG_HEADER = ["episode", "return", "epsilon_mean", "pearson_divergence",
              "actor_loss", "critic_loss"]


def write_log(path, records):
    _write_csv(path, LOG_HEADER, [_record_row(r) for r in records])


def write_manifest(path, config: TrainerConfig, out_dir):
    kv = dict(config_to_kv(config))
    kv["version"] = f"pporpe-{__version__}"
    kv["created"] = datetime.now(timezone.utc).isoformat()
    kv["out"] = str(out_dir)
    lines = [f"{k}={kv[k]}" for k in (*CONFIG_KEYS, "version", "created", "out")]
    Path(path).write_text("\n".join(lines) + "\n")


def _base_out(args):
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get("PPORPE_OUT", "runs"))


def _resolve_config(args):
    kv = {}
    if getattr(args, "config", None):
        kv.update(parse_kv(Path(args.config).read_text()))
    flag_map = {
        "env": "env", "method": "method", "epsilon": "epsilon", "beta": "beta",
        "eta": "eta", "episodes": "episodes", "steps_per_update": "steps_per_update",
        "batch": "batch", "capacity": "capacity", "alpha": "alpha",
        "gamma": "gamma", "entropy_bonus": "entropy_bonus",
        "lam": "lambda", "kappa": "kappa", "delta_lower": "delta_lower",
        "seed": "seed", "hidden": "hidden",
        "baseline_polyak": "baseline_polyak", "target_polyak": "target_polyak",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            kv[key] = str(value)
    return kv_to_config(kv)


def _train_with_weights(config: TrainerConfig, out_dir: Path):
    """Train and persist manifest, per-episode log, and final actor."""
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir / "manifest.txt", config, out_dir)
    records, actor = run_training(config)
    write_log(out_dir / "log.csv", records)
    save_weights(out_dir / "weights.bin", actor)
    return records


def cmd_train(args):
    try:
        config = _resolve_config(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = _base_out(args) / make_env(config.env).spec.name / config.surrogate.method / str(config.seed)
    records = _train_with_weights(config, out_dir)
    if records:
        tail = [r.episode_return for r in records[-30:]]
        print(f"trained {config.env}/{config.surrogate.method} seed {config.seed}: "
              f"mean return (last {len(tail)}) = {np.mean(tail):.3f} -> {out_dir}")
    else:
        print(f"no episodes requested -> {out_dir}")
    return 0


def cmd_eval(args):
    path = Path(args.weights)
    if not path.exists():
        print(f"weights file not found: {path}", file=sys.stderr)
        return 1
    try:
        actor = load_weights(path)
    except WeightsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        config = TrainerConfig(env=args.env, seed=args.seed)
        stats = evaluate(config, actor, n_episodes=args.episodes)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "eval.csv", ["episode", "return"],
               [[_fmt(i), _fmt(float(r))] for i, r in enumerate(stats.returns)])
    print(f"median={_fmt(stats.median)} q1={_fmt(stats.lower_quartile)} "
          f"q3={_fmt(stats.upper_quartile)} over {args.episodes} episodes")
    return 0


def cmd_surface(args):
    if not (0.0 < args.rho_min < args.rho_max) or args.points < 2:
        print("invalid grid: need 0 < rho-min < rho-max and points >= 2",
              file=sys.stderr)
        return 2
    adv = float(args.advantage)
    sigma = 1.0 if adv >= 0 else -1.0
    try:
        cfg_clip = SurrogateConfig(method="ppo_clip", epsilon=args.epsilon, eta=0.0)
        cfg_rb = SurrogateConfig(method="ppo_rb", epsilon=args.epsilon, eta=args.eta)
        cfg_rpe = SurrogateConfig(method="rpe_fixed", beta=args.beta, epsilon=args.epsilon)
        _, rho_eps = threshold_ratios(args.epsilon, sigma, args.beta)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    grid = np.linspace(args.rho_min, args.rho_max, args.points)
    markers = [m for m in (1.0 + sigma * args.epsilon, rho_eps)
               if args.rho_min <= m <= args.rho_max]
    rho = np.unique(np.concatenate([grid, markers]))
    marker_set = set(markers)

    rows = []
    for r in rho:
        rows.append([
            _fmt(float(r)),
            _fmt(float(relative_ratio(r, args.beta))),
            _fmt(float(negative_loss(r, adv, cfg_clip, args.epsilon))),
            _fmt(float(negative_loss(r, adv, cfg_rb, args.epsilon))),
            _fmt(float(negative_loss(r, adv, cfg_rpe, args.epsilon))),
            _fmt(float(a_tilde_rpe(r, adv, args.epsilon, args.beta))),
            "1" if float(r) in marker_set else "0",
        ])
    out = Path(args.out) if args.out else Path("surface.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["rho", "rho_beta", "neg_loss_ppo_clip", "neg_loss_ppo_rb",
                     "neg_loss_rpe", "a_tilde_rpe", "is_threshold"], rows)
    print(f"wrote {len(rows)} rows -> {out}")
    return 0


def cmd_sweep(args):
    try:
        config = _resolve_config(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError:
        print(f"invalid seed list: {args.seeds!r}", file=sys.stderr)
        return 2
    if not seeds:
        print("no seeds given", file=sys.stderr)
        return 2
    env_name = make_env(config.env).spec.name
    method_dir = _base_out(args) / env_name / config.surrogate.method
    per_seed = {}
    for seed in seeds:
        cfg = replace(config, seed=seed)
        per_seed[seed] = _train_with_weights(cfg, method_dir / str(seed))
    n = len(seeds)
    episodes = min(len(r) for r in per_seed.values())
    rows = []
    for ep in range(episodes):
        returns = np.array([per_seed[s][ep].episode_return for s in sorted(per_seed)])
        mean = float(np.mean(returns))
        ci = 0.0 if n < 2 else float(1.96 * np.std(returns, ddof=1) / np.sqrt(n))
        rows.append([_fmt(ep), _fmt(mean), _fmt(ci)])
    method_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(method_dir / "aggregate.csv", ["episode", "return_mean", "return_ci95"], rows)
    print(f"swept {n} seeds -> {method_dir / 'aggregate.csv'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pporpe",
        description="Ratio-regularized policy optimization on desk-scale control tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(p):
        p.add_argument("--config", help="key=value config file (flags win)")
        p.add_argument("--env", choices=sorted(set(env_names())
                       | {"cartpole", "pendulum", "double_integrator"}))
        p.add_argument("--method", choices=list(METHODS))
        p.add_argument("--epsilon", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--delta-lower", dest="delta_lower", type=float)
        p.add_argument("--episodes", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--batch", type=int)
        p.add_argument("--capacity", type=int)
        p.add_argument("--steps-per-update", dest="steps_per_update", type=int)
        p.add_argument("--entropy-bonus", dest="entropy_bonus", type=float)
        p.add_argument("--baseline-polyak", dest="baseline_polyak", type=float)
        p.add_argument("--target-polyak", dest="target_polyak", type=float)
        p.add_argument("--hidden", help="comma-separated hidden sizes, e.g. 64,64")
        p.add_argument("--out", help="output base directory (default $PPORPE_OUT or runs/)")

    p_train = sub.add_parser("train", help="train one run and write log/weights")
    add_train_flags(p_train)
    p_train.add_argument("--seed", type=int)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="roll out saved weights with the mean action")
    p_eval.add_argument("--weights", required=True)
    p_eval.add_argument("--env", required=True)
    p_eval.add_argument("--episodes", "-n", type=int, default=100)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_surface = sub.add_parser("surface", help="export objective curves over a rho grid")
    p_surface.add_argument("--beta", type=float, default=0.5)
    p_surface.add_argument("--epsilon", type=float, default=0.1)
    p_surface.add_argument("--eta", type=float, default=0.3)
    p_surface.add_argument("--advantage", type=float, default=1.0)
    p_surface.add_argument("--rho-min", dest="rho_min", type=float, default=0.05)
    p_surface.add_argument("--rho-max", dest="rho_max", type=float, default=3.0)
    p_surface.add_argument("--points", type=int, default=1000)
    p_surface.add_argument("--out")
    p_surface.set_defaults(func=cmd_surface)

    p_sweep = sub.add_parser("sweep", help="train several seeds and aggregate")
    add_train_flags(p_sweep)
    p_sweep.add_argument("--seeds", required=True, help="comma-separated seed list")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
