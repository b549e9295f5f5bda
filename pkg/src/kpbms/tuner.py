"""Hyperparameter search over saliency/box settings, maximizing ``F * q``.

Two optimizers share one trial loop: uniform random search, and a small
Tree-structured Parzen Estimator (TPE). TPE splits the trial history at
the ``gamma`` quantile of the objective, fits independent Parzen densities
per dimension to the good and bad groups (truncated normal kernels for
numeric dimensions, smoothed frequencies for categorical ones) and picks, among
``n_candidates`` draws from the good density, the one with the largest
good/bad density ratio.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import truncnorm

from .generation import generate
from .metrics import EvalReport, aggregate, evaluate
from .saliency import SaliencyConfig

__all__ = [
    "SearchSpace",
    "Trial",
    "evaluate_config",
    "objective",
    "random_search",
    "tpe_search",
    "write_trial_log",
]


@dataclass(frozen=True)
class SearchSpace:
    alpha_range: tuple[float, float] = (0.0, 1.0)
    n_range: tuple[int, int] = (4, 64)
    blob_fraction_range: tuple[float, float] = (0.05, 1.0)
    connectivity_choices: tuple[int, ...] = (4, 8)

    def __post_init__(self):
        a_lo, a_hi = self.alpha_range
        if not 0.0 <= a_lo <= a_hi <= 1.0:
            raise ValueError(f"alpha_range must be a non-empty interval in [0, 1], got {self.alpha_range}")
        n_lo, n_hi = self.n_range
        if not 1 <= n_lo <= n_hi or int(n_lo) != n_lo or int(n_hi) != n_hi:
            raise ValueError(f"n_range must be a non-empty integer interval >= 1, got {self.n_range}")
        b_lo, b_hi = self.blob_fraction_range
        if not 0.0 < b_lo <= b_hi <= 1.0:
            raise ValueError(f"blob_fraction_range must be a non-empty interval in (0, 1], got {self.blob_fraction_range}")
        if not self.connectivity_choices or not set(self.connectivity_choices) <= {4, 8}:
            raise ValueError("connectivity_choices must be a non-empty subset of {4, 8}")

    @property
    def dims(self):
        return (
            ("alpha", "float", self.alpha_range),
            ("n_thresholds", "int", self.n_range),
            ("blob_fraction", "float", self.blob_fraction_range),
            ("connectivity", "cat", tuple(self.connectivity_choices)),
        )

    def sample(self, rng: np.random.Generator) -> dict:
        params = {}
        for name, kind, dom in self.dims:
            if kind == "float":
                params[name] = float(rng.uniform(dom[0], dom[1]))
            elif kind == "int":
                params[name] = int(rng.integers(dom[0], dom[1] + 1))
            else:
                params[name] = dom[int(rng.integers(len(dom)))]
        return params

    def contains(self, config: SaliencyConfig) -> bool:
        return (
            self.alpha_range[0] <= config.alpha <= self.alpha_range[1]
            and self.n_range[0] <= config.n_thresholds <= self.n_range[1]
            and self.blob_fraction_range[0] <= config.blob_fraction <= self.blob_fraction_range[1]
            and config.connectivity in self.connectivity_choices
        )


@dataclass
class Trial:
    number: int
    config: SaliencyConfig
    objective: float
    summary: dict = field(default_factory=dict)
    timestamp: Optional[float] = None

    def to_record(self) -> dict:
        c = self.config
        return {
            "number": self.number,
            "config": {
                "alpha": c.alpha,
                "n_thresholds": c.n_thresholds,
                "blob_fraction": c.blob_fraction,
                "connectivity": "eight" if c.connectivity == 8 else "four",
                "sampling": c.sampling,
                "seed": c.seed,
            },
            "objective": self.objective,
            "summary": self.summary,
            "timestamp": self.timestamp,
        }


def _items(dataset):
    for i, item in enumerate(dataset):
        if len(item) == 3:
            yield item
        else:
            yield (f"img{i}", *item)


def evaluate_config(dataset, config: SaliencyConfig, jobs: int = 1) -> EvalReport:
    """Generate boxes for every image with deterministic sampling and pool the reports."""
    items = list(_items(dataset))
    if not items:
        raise ValueError("dataset is empty")
    config = config.deterministic()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            reports = list(pool.map(_evaluate_one, items, [config] * len(items)))
    else:
        reports = [_evaluate_one(item, config) for item in items]
    return aggregate(reports)


def _evaluate_one(item, config):
    image_id, image, keypoints = item
    return evaluate(generate(image, keypoints, config, image_id), keypoints)


def objective(dataset, config: SaliencyConfig, jobs: int = 1) -> float:
    """``F * q`` of the pooled report over ``dataset``."""
    report = evaluate_config(dataset, config, jobs)
    return report.f_score * report.q


Objective = Callable[[SaliencyConfig], "float | tuple[float, dict]"]


def _make_objective(dataset, objective_fn: Optional[Objective]):
    if objective_fn is not None:
        return objective_fn

    def run(config):
        report = evaluate_config(dataset, config)
        return report.f_score * report.q, report.summary()

    return run


def _run_trial(fn, number, config, stamp) -> Trial:
    out = fn(config)
    value, summary = out if isinstance(out, tuple) else (out, {})
    return Trial(number, config, float(value), summary, time.time() if stamp else None)


def _best(trials: Sequence[Trial]) -> Trial:
    # first trial wins ties
    return max(trials, key=lambda t: t.objective)


def _search(space, dataset, budget, seed, base, objective_fn, initial, propose, timestamps):
    if budget < 1:
        raise ValueError("budget must be >= 1")
    base = base or SaliencyConfig()
    fn = _make_objective(dataset, objective_fn)
    rng = np.random.default_rng(seed)
    trials: list[Trial] = []
    for config in list(initial)[:budget]:
        trials.append(_run_trial(fn, len(trials), config, timestamps))
    while len(trials) < budget:
        params = propose(rng, trials)
        config = replace(base, **params)
        trials.append(_run_trial(fn, len(trials), config, timestamps))
    return _best(trials), trials


def random_search(
    space: SearchSpace,
    dataset,
    budget: int,
    seed: int = 0,
    base: Optional[SaliencyConfig] = None,
    objective_fn: Optional[Objective] = None,
    initial: Sequence[SaliencyConfig] = (),
    timestamps: bool = False,
) -> tuple[Trial, list[Trial]]:
    """Uniform random search; returns ``(best trial, trial log)``.

    ``initial`` configs are evaluated first and count against ``budget``.
    ``objective_fn`` replaces the dataset objective (useful for synthetic
    surfaces); it receives a config and returns a value or ``(value, summary)``.
    """
    return _search(space, dataset, budget, seed, base, objective_fn, initial,
                   lambda rng, trials: space.sample(rng), timestamps)


# TPE ---------------------------------------------------------------------

def _bandwidths(mus: np.ndarray, lo: float, hi: float) -> np.ndarray:
    width = hi - lo
    order = np.argsort(mus, kind="stable")
    s = mus[order]
    gaps = np.diff(s)
    left = np.concatenate([[s[0] - lo], gaps])
    right = np.concatenate([gaps, [hi - s[-1]]])
    sig = np.maximum(left, right)
    sig = np.clip(sig, width / min(100.0, 1.0 + len(mus)), width)
    out = np.empty_like(sig)
    out[order] = sig
    return out


class _NumericParzen:
    """Mixture of truncated normals at the observations plus a wide prior kernel."""

    def __init__(self, obs, lo, hi):
        self.lo, self.hi = lo, hi
        mus = np.concatenate([np.asarray(obs, dtype=float), [(lo + hi) / 2.0]])
        sig = _bandwidths(mus, lo, hi)
        sig[-1] = hi - lo
        self.mus, self.sig = mus, sig
        self.a = (lo - mus) / sig
        self.b = (hi - mus) / sig

    def sample(self, rng, size):
        comp = rng.integers(len(self.mus), size=size)
        return truncnorm.rvs(self.a[comp], self.b[comp], loc=self.mus[comp], scale=self.sig[comp], random_state=rng)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)[:, None]
        dens = truncnorm.pdf(x, self.a, self.b, loc=self.mus, scale=self.sig).mean(axis=1)
        return np.log(np.maximum(dens, 1e-300))


class _CategoricalParzen:
    def __init__(self, obs, choices):
        counts = np.array([sum(1 for o in obs if o == c) for c in choices], dtype=float)
        self.choices = choices
        self.p = (counts + 1.0) / (counts.sum() + len(choices))

    def sample(self, rng, size):
        return np.array([self.choices[i] for i in rng.choice(len(self.choices), size=size, p=self.p)])

    def logpdf(self, x):
        idx = [self.choices.index(v) for v in x]
        return np.log(self.p[idx])


def _parzen(kind, dom, obs):
    if kind == "cat":
        return _CategoricalParzen(obs, dom)
    lo, hi = dom
    if kind == "int":
        lo, hi = lo - 0.5, hi + 0.5
    return _NumericParzen(obs, lo, hi)


def _tpe_proposer(space: SearchSpace, gamma: float, startup: int, n_candidates: int):
    def propose(rng, trials):
        if len(trials) < startup:
            return space.sample(rng)
        y = np.array([t.objective for t in trials])
        order = np.argsort(-y, kind="stable")
        n_good = min(max(1, math.ceil(gamma * len(trials))), len(trials) - 1)
        good, bad = order[:n_good], order[n_good:]
        params = {}
        score = np.zeros(n_candidates)
        draws = {}
        for name, kind, dom in space.dims:
            values = [getattr(t.config, name) for t in trials]
            if kind != "cat" and dom[0] == dom[1]:
                draws[name] = np.full(n_candidates, dom[0])
                continue
            if kind == "cat" and len(dom) == 1:
                draws[name] = np.array([dom[0]] * n_candidates)
                continue
            l_est = _parzen(kind, dom, [values[i] for i in good])
            g_est = _parzen(kind, dom, [values[i] for i in bad])
            x = l_est.sample(rng, n_candidates)
            if kind == "int":
                x = np.clip(np.round(x), dom[0], dom[1])
            elif kind == "float":
                x = np.clip(x, dom[0], dom[1])
            draws[name] = x
            score += l_est.logpdf(x) - g_est.logpdf(x)
        best = int(np.argmax(score))
        for name, kind, dom in space.dims:
            v = draws[name][best]
            params[name] = int(v) if kind in ("int", "cat") else float(v)
        return params

    return propose


def tpe_search(
    space: SearchSpace,
    dataset,
    budget: int,
    seed: int = 0,
    gamma: float = 0.25,
    startup: int = 10,
    n_candidates: int = 24,
    base: Optional[SaliencyConfig] = None,
    objective_fn: Optional[Objective] = None,
    initial: Sequence[SaliencyConfig] = (),
    timestamps: bool = False,
) -> tuple[Trial, list[Trial]]:
    """TPE search; the first ``startup`` trials are identical to :func:`random_search`."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if startup < 2 or budget < startup:
        raise ValueError("need budget >= startup >= 2")
    return _search(space, dataset, budget, seed, base, objective_fn, initial,
                   _tpe_proposer(space, gamma, startup, n_candidates), timestamps)


def write_trial_log(path, trials: Sequence[Trial]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_record(), sort_keys=True) + "\n")
