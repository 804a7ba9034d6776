"""Command-line experiment harness.

    sagd <subcommand> --config <path> --seed <u64> --out <path> [--threads N]

Config files are flat ``key = value`` lines with ``#`` comments. Unknown
keys are errors. Output is CSV with ``\\n`` line endings and every float
printed with 17 significant digits, so identical (config, seed) pairs give
byte-identical files whatever the thread count.

Exit codes: 0 success, 2 config error, 3 numeric divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import em, genmodel
from .core_math import RngStream
from .langevin import ChainDivergence, ChainState, LangevinConfig, bias_scan, run_chain
from .metrics import Cdf1D
from .optimizer import AdamRule, SagdConfig, SagdDivergence, Schedule
from .potentials import gaussian_potential

log = logging.getLogger("sagd")

EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 2, 3, 4


class ConfigError(ValueError):
    pass


# key -> (default, help). The default's type is the parsed type; lists are
# comma-separated.
KEYS = {
    "sample": {
        "potential": ("gaussian", "builtin target; only 'gaussian' (identity covariance)"),
        "dim": (2, "dimension r"),
        "mean": ([0.0], "target mean, one value or r comma-separated values"),
        "gamma": (2.0, "friction"),
        "delta": (0.05, "step size; gamma*delta must be < 1"),
        "steps": (1000, "observed steps K"),
        "burn_in": (0, "discarded leading steps"),
        "thin": (1, "write every thin-th observed state"),
    },
    "em-gamma": {
        "n": (100, "number of observations"),
        "true_a": (2.0, "data-generating a"),
        "true_b": (0.5, "data-generating b"),
        "data_seed": (1, "seed of the simulated data set (kept apart from --seed)"),
        "a0": (0.0, "initial a"),
        "b0": (1.0, "initial b"),
        "alpha": (0.2, "constant M-step learning rate"),
        "T": (100, "gradient updates per M-step"),
        "msteps": (3, "number of M-steps"),
        "c1": (0.1, "delta_t = c1/sqrt(t)"),
        "c2": (1.0, "K_t = ceil(c2 t) + k0"),
        "k0": (20, "additive chain-length offset"),
        "burn_in": (100, "Langevin burn-in at the start of each M-step"),
        "gamma": (2.0, "friction"),
        "modes": (["sagd", "exact_gd"], "any of sagd, exact_gd"),
    },
    "genfit": {
        "latent": ("exponential", "true latent law: normal | exponential | mixture"),
        "n": (1000, "number of observations"),
        "epochs": (200, "training epochs"),
        "alpha": (0.01, "learning rate"),
        "alpha_decay": (0.0, "alpha_k = alpha / (1 + alpha_decay * k)"),
        "delta": (0.02, "Langevin step size"),
        "gamma": (10.0, "friction; gamma*delta must be < 1"),
        "steps": (20, "Langevin steps per observation per update"),
        "burn_in": (500, "initial burn-in of the per-observation chains"),
        "batch_size": (100, "minibatch size"),
        "hidden": (16, "hidden width of the generator"),
        "noise_var": (1.0, "observation noise variance"),
        "update": ("adam", "adam | plain"),
        "eval_size": (100000, "generator sample size used for KS / W1"),
        "sample_out": ("", "final sample file; default <out stem>_sample.csv"),
    },
    "bias-scan": {
        "dim": (2, "dimension r of the standard normal target"),
        "gamma": (2.0, "friction"),
        "deltas": ([0.2, 0.1, 0.05, 0.025], "step sizes"),
        "kdelta": (10000.0, "K = kdelta / delta when 'ks' is not given"),
        "ks": ([], "explicit chain lengths, one per delta"),
        "reps": (20, "independent replications per delta"),
        "burn_in": (0, "discarded leading steps"),
    },
}

LATENTS = {
    "normal": lambda: Cdf1D.normal(1.0, 0.5),
    "exponential": lambda: Cdf1D.exponential(2.0),
    "mixture": lambda: Cdf1D.normal_mixture([0.4, 0.6], [0.0, 3.0], [0.5, 0.5]),
}


def _convert(raw, default, key):
    try:
        if isinstance(default, list):
            if raw.strip() == "":
                return []
            kind = type(default[0]) if default else float
            return [kind(v.strip()) for v in raw.split(",")]
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        return type(default)(raw.strip())
    except ValueError as err:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from err


def parse_config(text: str, command: str) -> dict:
    spec = KEYS[command]
    cfg = {k: v[0] for k, v in spec.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in spec:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for {command}")
        cfg[key] = _convert(raw, spec[key][0], key)
    return cfg


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# subcommands

def cmd_sample(cfg, seed, out, threads=1):
    if cfg["potential"] != "gaussian":
        raise ConfigError(f"unknown potential {cfg['potential']!r}")
    dim = cfg["dim"]
    mean = cfg["mean"]
    if len(mean) not in (1, dim):
        raise ConfigError("mean needs 1 or dim values")
    if cfg["thin"] < 1:
        raise ConfigError("thin must be >= 1")
    try:
        lcfg = LangevinConfig(cfg["gamma"], cfg["delta"], cfg["steps"], cfg["burn_in"])
    except ValueError as err:
        raise ConfigError(str(err)) from err
    pot = gaussian_potential(np.array(mean), dim)
    rows = []
    sums = np.zeros(2 * dim)
    k = 0

    def observe(xi, rho):
        nonlocal k, sums
        k += 1
        sums += np.concatenate([xi, rho])
        if k % cfg["thin"] == 0:
            rows.append(("step", k, *xi, *rho))

    run_chain(pot, lcfg, ChainState.zeros(dim), RngStream(seed), observe)
    rows.append(("mean", k, *(sums / k)))
    header = ["kind", "step"] + [f"xi_{j}" for j in range(dim)] + [f"rho_{j}" for j in range(dim)]
    write_csv(out, header, rows)


def cmd_em_gamma(cfg, seed, out, threads=1):
    for m in cfg["modes"]:
        if m not in ("sagd", "exact_gd"):
            raise ConfigError(f"unknown mode {m!r}")
    model = em.simulate_gamma_data(cfg["n"], cfg["true_a"], cfg["true_b"], RngStream(cfg["data_seed"]))
    inner = SagdConfig(
        T=cfg["T"],
        schedule=Schedule("convex", c1=cfg["c1"], c2=cfg["c2"], alpha0=cfg["alpha"],
                          k0=cfg["k0"], constant_alpha=True),
        gamma=cfg["gamma"], burn_in=cfg["burn_in"], return_average=False)
    theta0 = (cfg["a0"], cfg["b0"])

    def run(mode):
        ecfg = em.EmConfig(outer_steps=cfg["msteps"], inner=inner, mode=mode)
        return em_result_rows(mode, em.em_run(model, theta0, ecfg, RngStream(seed)))

    results = _pmap(run, cfg["modes"], threads)
    rows = [r for res in results for r in res[0]]
    rows += [(f"final_{mode}", res[1][0], res[1][1], *res[1][2:]) for mode, res in zip(cfg["modes"], results)]
    write_csv(out, ["mode", "mstep", "update", "a", "b", "loglik"], rows)


def em_result_rows(mode, res: em.EmResult):
    rows = []
    for i in range(1, len(res.theta_path)):
        rows.append((mode, int(res.mstep[i]), i, *res.theta_path[i], res.loglik_path[i]))
    if mode == "exact_gd":
        ends = [res.loglik_path[res.mstep == k][-1] for k in np.unique(res.mstep)]
        if np.any(np.diff(ends) < -1e-6):
            log.warning("exact-GD log-likelihood decreased across M-steps: %s", ends)
    last = len(res.theta_path) - 1
    return rows, (int(res.mstep[-1]), last, *res.theta_path[-1], res.loglik_path[-1])


def cmd_genfit(cfg, seed, out, threads=1):
    if cfg["latent"] not in LATENTS:
        raise ConfigError(f"unknown latent {cfg['latent']!r}; choose from {sorted(LATENTS)}")
    if cfg["update"] not in ("adam", "plain"):
        raise ConfigError("update must be adam or plain")
    truth = LATENTS[cfg["latent"]]()
    rng = RngStream(seed)
    z = truth.draw(rng.substream(10), cfg["n"])
    x = z + np.sqrt(cfg["noise_var"]) * rng.substream(11).normal(cfg["n"])
    try:
        fit = genmodel.GeneratorFitConfig(
            epochs=cfg["epochs"], alpha=cfg["alpha"], alpha_decay=cfg["alpha_decay"],
            delta=cfg["delta"], steps=cfg["steps"], burn_in=cfg["burn_in"], gamma=cfg["gamma"],
            batch_size=cfg["batch_size"], noise_var=cfg["noise_var"], hidden=cfg["hidden"],
            update_rule=AdamRule() if cfg["update"] == "adam" else None)
        fit.langevin(1)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    net0 = genmodel.warm_start(x, fit.hidden, fit.noise_var, rng.substream(12))
    last = {}

    def keep(rec, sample):
        last["sample"] = sample

    res = genmodel.train_debiased(x, net0, fit, rng.substream(13), truth=truth,
                                  eval_size=cfg["eval_size"], on_epoch=keep)
    write_csv(out, ["epoch", "ks", "w1", "probe_loglik"],
              [(r.epoch, r.ks, r.w1, r.loglik) for r in res.trace])
    sample_path = cfg["sample_out"] or str(Path(out).with_name(Path(out).stem + "_sample.csv"))
    write_csv(sample_path, ["z"], [(v,) for v in last["sample"]])


def cmd_bias_scan(cfg, seed, out, threads=1):
    deltas = cfg["deltas"]
    ks = cfg["ks"] or [int(round(cfg["kdelta"] / d)) for d in deltas]
    if len(ks) != len(deltas):
        raise ConfigError("ks needs one entry per delta")
    if cfg["reps"] < 1:
        raise ConfigError("reps must be >= 1")
    for d in deltas:
        if cfg["gamma"] * d >= 1 or d <= 0:
            raise ConfigError(f"delta={d} violates 0 < gamma*delta < 1")
    rng = RngStream(seed)

    def one(i):
        row = bias_scan([deltas[i]], [ks[i]], cfg["reps"], rng.substream(i),
                        dim=cfg["dim"], gamma=cfg["gamma"], burn_in=cfg["burn_in"])
        return row[0]

    rows = _pmap(one, range(len(deltas)), threads)
    write_csv(out, ["delta", "K", "bias", "mse", "reps"], rows)


COMMANDS = {
    "sample": cmd_sample,
    "em-gamma": cmd_em_gamma,
    "genfit": cmd_genfit,
    "bias-scan": cmd_bias_scan,
}


def _key_help(command):
    lines = ["config keys:"]
    for k, (default, text) in KEYS[command].items():
        d = ",".join(fmt(v) for v in default) if isinstance(default, list) else fmt(default)
        lines.append(f"  {k} (default {d}): {text}")
    return "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(prog="sagd", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, epilog=_key_help(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", required=True, type=int, help="unsigned 64-bit seed")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as err:
        print(f"sagd: cannot read config: {err}", file=sys.stderr)
        return EXIT_IO
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = parse_config(text, args.command)
        COMMANDS[args.command](cfg, args.seed, args.out, args.threads)
    except ConfigError as err:
        print(f"sagd: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ChainDivergence, SagdDivergence) as err:
        print(f"sagd: diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as err:
        print(f"sagd: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
