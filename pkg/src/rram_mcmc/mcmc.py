"""Metropolis-Hastings training over a crossbar.

Each row of the array holds one accepted model.  Proposals are generated
physically by :meth:`CrossbarArray.propose_row`; rejections bump the
counter of the current row, acceptances move the chain one row down.
"""

from __future__ import annotations

import abc
import enum
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .crossbar import CrossbarArray

# per-point log terms never drop below this (saturated logistics)
LOG_FLOOR = math.log(1e-300)


class StuckChainError(RuntimeError):
    def __init__(self, row: int, rejects: int):
        super().__init__(f"chain stuck at row {row} after {rejects} consecutive rejections")
        self.row = row
        self.rejects = rejects
        self.run: int | None = None

    def __reduce__(self):
        # survives the trip back from worker processes, run index included
        return (type(self), (self.row, self.rejects), self.__dict__)


class InferenceError(RuntimeError):
    pass


class VariabilityMode(str, enum.Enum):
    CYCLE_AND_D2D = "cycle_and_d2d"
    CYCLE_ONLY = "cycle_only"


@dataclass
class McmcConfig:
    sigma_prior: float
    scale_S: float
    burn_in: int
    mu_prior: float = 0.0
    reject_cap: int = 1000
    seed: int = 0
    variability_mode: VariabilityMode = VariabilityMode.CYCLE_AND_D2D

    def __post_init__(self):
        self.variability_mode = VariabilityMode(self.variability_mode)
        if not self.sigma_prior > 0:
            raise ValueError("sigma_prior must be > 0")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.reject_cap < 1:
            raise ValueError("reject_cap must be >= 1")

    @property
    def d2d(self) -> bool:
        return self.variability_mode is VariabilityMode.CYCLE_AND_D2D

    def to_dict(self) -> dict:
        out = asdict(self)
        out["variability_mode"] = self.variability_mode.value
        return out


class LikelihoodModel(abc.ABC):
    """Pluggable likelihood: ``evaluate_log`` plus the row function ``f``."""

    @abc.abstractmethod
    def evaluate_log(self, g: np.ndarray, data) -> float: ...

    @abc.abstractmethod
    def row_function(self, x): ...

    def row_metric(self, g: np.ndarray, data) -> float:
        """Per-row quantity recorded in the training trace."""
        return self.evaluate_log(g, data)


@dataclass
class RunRecord:
    """Per-row trace of one chain plus the acceptance sequence.

    ``trace`` holds one 0/1 entry per accept/reject decision, the
    initialisation of row 0 included as an acceptance.
    """

    config: dict
    rows: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def accepts(self) -> int:
        return sum(self.trace)

    @property
    def rejects(self) -> int:
        return len(self.trace) - sum(self.trace)

    def metrics(self) -> np.ndarray:
        return np.array([r["accepted_metric"] for r in self.rows], dtype=float)

    def to_json(self, include_timing: bool = True) -> str:
        doc = {"config": self.config, "rows": self.rows, "trace": self.trace}
        if include_timing:
            doc["wall_clock"] = self.wall_clock
        return json.dumps(doc, separators=(",", ":"))


def log_prior(g, cfg: McmcConfig) -> float:
    """Sum of independent normal log-densities over the parameters."""
    g = np.asarray(g, dtype=float)
    s = cfg.sigma_prior
    norm = -math.log(s * math.sqrt(2 * math.pi))
    return float(g.size * norm - np.sum((g - cfg.mu_prior) ** 2) / (2 * s * s))


def log_acceptance_ratio(logL_p, logPrior_p, logL_c, logPrior_c) -> float:
    vals = (logL_p, logPrior_p, logL_c, logPrior_c)
    if not all(math.isfinite(v) for v in vals):
        raise FloatingPointError(f"non-finite term in acceptance ratio: {vals}")
    return (logPrior_p + logL_p) - (logPrior_c + logL_c)


def accept_decision(log_a: float, rng: np.random.Generator) -> bool:
    """Accept iff ``log_a >= ln u`` with ``u ~ U(0, 1]``; one uniform per call."""
    u = 1.0 - rng.random()
    return log_a >= math.log(u)


def train(
    array: CrossbarArray,
    model: LikelihoodModel,
    data,
    cfg: McmcConfig,
    rng: np.random.Generator,
) -> RunRecord:
    """Fill every row of ``array`` with the Metropolis-Hastings chain."""
    N = array.rows
    if N < cfg.burn_in + 2:
        raise ValueError(f"{N} rows cannot hold burn-in {cfg.burn_in} plus a posterior")
    t0 = time.perf_counter()
    array.reset_all()
    array.initialize_row(rng, 0)
    array.counters[0] = 1

    record = RunRecord(config=cfg.to_dict())
    rejects = np.zeros(N, dtype=np.int64)
    metrics = np.zeros(N)
    record.trace.append(1)

    g_c = array.read_row(0)
    logL_c = model.evaluate_log(g_c, data)
    logP_c = log_prior(g_c, cfg)
    metrics[0] = model.row_metric(g_c, data)

    n = 0
    while n < N - 1:
        array.propose_row(n, n + 1, rng)
        g_p = array.read_row(n + 1)
        logL_p = model.evaluate_log(g_p, data)
        logP_p = log_prior(g_p, cfg)
        log_a = log_acceptance_ratio(logL_p, logP_p, logL_c, logP_c)
        if accept_decision(log_a, rng):
            record.trace.append(1)
            array.counters[n + 1] += 1
            n += 1
            logL_c, logP_c = logL_p, logP_p
            metrics[n] = model.row_metric(g_p, data)
        else:
            record.trace.append(0)
            array.erase_row(n + 1)
            array.counters[n] += 1
            rejects[n] += 1
            if rejects[n] >= cfg.reject_cap:
                raise StuckChainError(n, int(rejects[n]))

    record.rows = [
        {
            "row": i,
            "accepted_metric": float(metrics[i]),
            "counter": int(array.counters[i]),
            "rejects": int(rejects[i]),
        }
        for i in range(N)
    ]
    record.wall_clock = time.perf_counter() - t0
    return record


def posterior_weights(array: CrossbarArray, burn_in: int) -> np.ndarray:
    """Counter weights of rows >= burn_in normalised to sum 1."""
    c = array.counters[burn_in:].astype(float)
    tot = c.sum()
    if tot <= 0:
        raise InferenceError("no counter weight after burn-in; array is untrained")
    return c / tot


def infer(array: CrossbarArray, model: LikelihoodModel, v, cfg: McmcConfig) -> float:
    """Counter-weighted mean of the row function over post-burn-in rows."""
    v = np.asarray(v, dtype=float)
    if v.shape != (array.cols,):
        raise ValueError(f"input length {v.shape} does not match {array.cols} columns")
    return float(infer_batch(array, model, v[None, :], cfg)[0])


def infer_batch(array: CrossbarArray, model: LikelihoodModel, V, cfg: McmcConfig) -> np.ndarray:
    """:func:`infer` for each row of ``V`` (shape (P, M))."""
    w = posterior_weights(array, cfg.burn_in)
    G = array.weights()[cfg.burn_in:]
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != array.cols:
        raise ValueError(f"input width {V.shape[1]} does not match {array.cols} columns")
    return model.row_function(V @ G.T) @ w
