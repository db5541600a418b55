"""
Experiment orchestration: Monte-Carlo sweeps over SNR or codebook size.

Each realization draws its channel and its SAA sample set from substreams
keyed by ``(seed, tag, realization)``, so results are identical for any
worker count. The pixel-antenna hardware is drawn once per experiment (or
read from an antenna data file) and shared by all users and realizations.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import (ALGORITHM, CHANNEL, ERRORS, HARDWARE, TRAINING, ScenarioConfig,
                      draw_sample_set, draw_true_channel, substream, synth_pixel_hardware)
from .codebook import (Codebook, SumRateEvaluator, load_codebook, lloyd_train,
                       online_select, save_codebook)
from .em_model import PatternCoderBank, read_antenna_file
from .exceptions import ConfigError, MissingCodebook
from .rsma import coded_rows, rs_zf_svd_precoder, sample_average_rates
from .sebo import SeboConfig
from .wmmse import OuterLoopConfig, alternating_optimize, initial_precoder

__all__ = [
    "SCHEMES", "ExperimentSpec", "ResultRow", "parse_config", "load_config",
    "spec_from_config", "build_hardware", "run_experiment", "write_results",
    "read_results", "train_codebook", "train_codebook_cmd", "worker_count",
]

log = logging.getLogger(__name__)

SCHEMES = ("rsma-wmmse-sebo", "sdma-wmmse-sebo", "rsma-codebook-zf",
           "sdma-codebook-zf", "conv-rs-zf-svd", "conv-sdma-zf")
CODEBOOK_SCHEMES = ("rsma-codebook-zf", "sdma-codebook-zf")

CSV_HEADER = "scheme,snr_db,M,Q,sum_rate,stderr,realizations,seed,wall_time_s"

# key -> (parser, default)
_INT, _FLOAT, _STR = int, float, str


def _ints(v):
    return [int(x) for x in v.replace(",", " ").split()]


def _floats(v):
    return [float(x) for x in v.replace(",", " ").split()]


def _names(v):
    return [x for x in v.replace(",", " ").split()]


CONFIG_KEYS = {
    "N": (_INT, 2), "K": (_INT, 2), "Q": (_INT, 11), "Ns": (_INT, 32),
    "snr_db": (_floats, [20.0]), "alpha": (_FLOAT, 0.5), "beta": (_FLOAT, 1.0),
    "S": (_INT, 20), "seed": (_INT, 0), "realizations": (_INT, 100),
    "sebo_J": (_INT, 8), "sebo_I": (_INT, 5), "sebo_flips": (_INT, 0),
    "sebo_restarts": (_INT, 2), "outer_tol": (_FLOAT, 1e-4),
    "outer_max_iters": (_INT, 50), "inner_tol": (_FLOAT, 1e-5),
    "inner_max_iters": (_INT, 200),
    "scheme": (_names, ["rsma-wmmse-sebo"]), "M": (_ints, [64]), "D": (_INT, 200),
    "train_S": (_INT, 0), "lloyd_tol": (_FLOAT, 1e-3), "lloyd_max_iters": (_INT, 30),
    "online_max_passes": (_INT, 10), "grid_points": (_INT, 101),
    "codebook": (_STR, ""), "antenna_file": (_STR, ""),
}


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into typed values."""
    cfg = {key: default for key, (_, default) in CONFIG_KEYS.items()}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "schemes":
            key = "scheme"
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        try:
            cfg[key] = CONFIG_KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {value!r}") from exc
    for name in cfg["scheme"]:
        if name not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {name!r}")
    for key in ("N", "K", "Q", "Ns", "S", "realizations", "D"):
        if cfg[key] < 1:
            raise ConfigError(key, "must be >= 1")
    if not 0 <= cfg["alpha"] <= 1:
        raise ConfigError("alpha", "must lie in [0, 1]")
    return cfg


def load_config(path) -> dict:
    """Read and parse a config file; an unreadable file raises ``OSError``."""
    return parse_config(Path(path).read_text())


def sebo_config(cfg: dict) -> SeboConfig:
    J = min(cfg["sebo_J"], cfg["Q"])
    try:
        return SeboConfig(J=J, I=cfg["sebo_I"], flips_per_kick=cfg["sebo_flips"] or None,
                          restarts=cfg["sebo_restarts"], seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError("sebo_J", str(exc)) from exc


def outer_config(cfg: dict) -> OuterLoopConfig:
    return OuterLoopConfig(rel_tol=cfg["outer_tol"], max_outer_iters=cfg["outer_max_iters"],
                           inner_tol=cfg["inner_tol"], inner_max_iters=cfg["inner_max_iters"])


@dataclass(frozen=True)
class ExperimentSpec:
    """One scheme swept over SNR points (and codebook sizes for codebook schemes).

    ``realizations`` defaults to the config value.
    """
    scheme: str
    config: dict
    snr_db: tuple = (20.0,)
    M: tuple = (-1,)
    realizations: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.realizations is None:
            object.__setattr__(self, "realizations", self.config["realizations"])
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}")
        if self.realizations < 1:
            raise ConfigError("realizations", "must be >= 1")


def spec_from_config(cfg: dict, output=None) -> list:
    specs = []
    for scheme in cfg["scheme"]:
        M = tuple(cfg["M"]) if scheme in CODEBOOK_SCHEMES else (-1,)
        specs.append(ExperimentSpec(scheme, cfg, tuple(cfg["snr_db"]), M,
                                    cfg["realizations"], output))
    return specs


@dataclass
class ResultRow:
    scheme: str
    snr_db: float
    M: int
    Q: int
    sum_rate: float
    stderr: float
    realizations: int
    seed: int
    wall_time_s: float
    values: np.ndarray | None = field(default=None, repr=False, compare=False)


def scenario(cfg: dict, snr_db: float) -> ScenarioConfig:
    return ScenarioConfig.from_snr_db(
        snr_db, N=cfg["N"], K=cfg["K"], Q=cfg["Q"], Ns=cfg["Ns"], alpha=cfg["alpha"],
        beta=cfg["beta"], S=cfg["S"], seed=cfg["seed"])


def build_hardware(cfg: dict) -> PatternCoderBank:
    if cfg["antenna_file"]:
        try:
            net, patterns = read_antenna_file(cfg["antenna_file"])
        except ValueError as exc:
            raise ConfigError("antenna_file", str(exc)) from exc
        if net.Q != cfg["Q"]:
            raise ConfigError("Q", f"antenna file has Q={net.Q}")
    else:
        net, patterns = synth_pixel_hardware(scenario(cfg, 0.0),
                                             substream(cfg["seed"], HARDWARE))
    return PatternCoderBank(net, patterns)


def worker_count() -> int:
    env = os.environ.get("PIXEL_RSMA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("PIXEL_RSMA_THREADS", f"bad value {env!r}") from exc
    return os.cpu_count() or 1


def _draw_realization(cfg: dict, sc: ScenarioConfig, bank, index: int, tag=CHANNEL):
    H = draw_true_channel(sc, bank.r, substream(cfg["seed"], tag, index, CHANNEL))
    return draw_sample_set(sc, H, substream(cfg["seed"], tag, index, ERRORS))


def run_scheme(scheme: str, samples, bank: PatternCoderBank, sc: ScenarioConfig, cfg: dict,
               codebook: Codebook | None = None, rng=None) -> float:
    """Sum-rate objective of one scheme on one sample set."""
    K = sc.K
    if scheme.endswith("wmmse-sebo"):
        res = alternating_optimize(samples, bank, sc.P_t, sc.sigma2, outer_config(cfg),
                                   sebo_config(cfg), common=scheme.startswith("rsma"),
                                   rng=rng)
        return res.report.objective
    if scheme in CODEBOOK_SCHEMES:
        res = online_select(codebook, samples, bank, sc.P_t, sc.sigma2,
                            precoder=scheme[:4], max_passes=cfg["online_max_passes"],
                            rng=rng, grid_points=cfg["grid_points"])
        return res.report.objective
    W = bank(np.zeros((K, bank.Q), np.uint8))
    est = coded_rows(samples.estimate, W)
    if scheme == "conv-rs-zf-svd":
        P = rs_zf_svd_precoder(est, sc.P_t, sc.sigma2, cfg["grid_points"])
    else:
        P = initial_precoder(est, sc.P_t, sc.sigma2, common=False)
    return sample_average_rates(samples, W, P, sc.sigma2).objective


_BANK_CACHE = {}


def _realization_task(args):
    scheme, cfg, snr_db, index, codewords = args
    key = (cfg["seed"], cfg["Q"], cfg["Ns"], cfg["antenna_file"])
    if key not in _BANK_CACHE:
        _BANK_CACHE.clear()
        _BANK_CACHE[key] = build_hardware(cfg)
    bank = _BANK_CACHE[key]
    sc = scenario(cfg, snr_db)
    samples = _draw_realization(cfg, sc, bank, index)
    codebook = Codebook(codewords) if codewords is not None else None
    rng = substream(cfg["seed"], ALGORITHM, index)
    return run_scheme(scheme, samples, bank, sc, cfg, codebook, rng)


def training_set(cfg: dict, sc: ScenarioConfig, bank: PatternCoderBank) -> list:
    train_S = cfg["train_S"] or sc.S
    sc_train = replace(sc, S=train_S)
    return [_draw_realization(cfg, sc_train, bank, d, tag=TRAINING) for d in range(cfg["D"])]


def train_codebook(cfg: dict, snr_db: float, M: int, precoder="rsma",
                   bank: PatternCoderBank | None = None):
    """Lloyd-train a codebook on a seeded training set; returns the LloydResult."""
    bank = bank or build_hardware(cfg)
    sc = scenario(cfg, snr_db)
    evaluator = SumRateEvaluator(training_set(cfg, sc, bank), bank, sc.P_t, sc.sigma2,
                                 precoder, cfg["grid_points"])
    return lloyd_train(evaluator, M, sebo_config(cfg), cfg["lloyd_tol"],
                       cfg["lloyd_max_iters"], substream(cfg["seed"], TRAINING, M))


def _codebook_for(spec: ExperimentSpec, snr_db, M, bank):
    cfg = spec.config
    if cfg["codebook"]:
        try:
            cb = load_codebook(cfg["codebook"])
        except FileNotFoundError as exc:
            raise MissingCodebook(cfg["codebook"]) from exc
        except ValueError as exc:
            raise ConfigError("codebook", str(exc)) from exc
        if cb.Q != bank.Q:
            raise ConfigError("codebook", f"codebook has Q={cb.Q}, hardware has Q={bank.Q}")
        return cb
    if M < 1:
        raise MissingCodebook("codebook scheme needs M >= 1 or a codebook file")
    return train_codebook(cfg, snr_db, M, spec.scheme[:4], bank).codebook


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list:
    """Run every sweep point of ``spec``; one ResultRow per point.

    ``workers`` defaults to :func:`worker_count`. Realizations are reduced in
    index order, so the output does not depend on the worker count.
    """
    cfg = spec.config
    workers = worker_count() if workers is None else workers
    bank = build_hardware(cfg) if spec.scheme in CODEBOOK_SCHEMES else None
    rows = []
    for snr_db in spec.snr_db:
        for M in spec.M:
            start = time.perf_counter()
            codewords = None
            if spec.scheme in CODEBOOK_SCHEMES:
                codebook = _codebook_for(spec, snr_db, M, bank)
                codewords, M = codebook.codewords, codebook.M
            tasks = [(spec.scheme, cfg, snr_db, i, codewords)
                     for i in range(spec.realizations)]
            n_workers = min(workers, spec.realizations)
            if n_workers > 1:
                with ProcessPoolExecutor(n_workers) as pool:
                    values = list(pool.map(_realization_task, tasks, chunksize=4))
            else:
                values = [_realization_task(t) for t in tasks]
            values = np.array(values)
            n = values.size
            stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            rows.append(ResultRow(spec.scheme, float(snr_db), int(M), cfg["Q"],
                                  float(values.mean()), stderr, n, cfg["seed"],
                                  time.perf_counter() - start, values))
            log.info("%s snr=%g M=%d: %.4f +/- %.4f", spec.scheme, snr_db, M,
                     rows[-1].sum_rate, stderr)
    return rows


def write_results(rows, path, timing: bool = True) -> None:
    """Write result rows as CSV with six decimals per number.

    With ``timing=False`` the wall-time column is written as zero so the file
    depends only on the inputs.
    """
    lines = [CSV_HEADER]
    for r in rows:
        wall = r.wall_time_s if timing else 0.0
        lines.append(f"{r.scheme},{r.snr_db:.6f},{r.M},{r.Q},{r.sum_rate:.6f},"
                     f"{r.stderr:.6f},{r.realizations},{r.seed},{wall:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_results(path) -> list:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: not a results file")
    rows = []
    for line in lines[1:]:
        f = line.split(",")
        rows.append(ResultRow(f[0], float(f[1]), int(f[2]), int(f[3]), float(f[4]),
                              float(f[5]), int(f[6]), int(f[7]), float(f[8])))
    return rows


def train_codebook_cmd(config_path, out_path, echo=print) -> Codebook:
    """Train a codebook from a config file and save it; prints the average-rate trace."""
    cfg = load_config(config_path)
    precoder = "sdma" if cfg["scheme"] and cfg["scheme"][0].startswith("sdma") else "rsma"
    result = train_codebook(cfg, cfg["snr_db"][0], cfg["M"][0], precoder)
    for it, value in enumerate(result.trace):
        echo(f"iter {it:3d}  R_avg = {value:.6f}")
    save_codebook(result.codebook, out_path)
    return result.codebook
