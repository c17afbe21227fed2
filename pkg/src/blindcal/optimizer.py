"""Ask-tell optimizers driven by one scalar cost evaluation per step.

The calibration loop evaluates exactly one parameter vector per protocol
iteration, so every optimizer here is written as a state machine with a
``propose / observe`` cycle rather than a closed minimisation loop:

* ``spsa``: simultaneous-perturbation stochastic approximation.  Each update
  consumes two evaluations, at phi + c_k * delta and phi - c_k * delta with a
  Rademacher delta, and steps along the estimated gradient with gain
  a_k = a / (A + k + 1)**alpha_exp; the perturbation size decays as
  c_k = c / (k + 1)**gamma_exp.
* ``exact_gradient_descent``: central finite differences coordinate by
  coordinate (2 * dim evaluations per update).  Only sensible for noise-free
  costs.
* ``nelder_mead``: the standard reflect/expand/contract/shrink simplex,
  which is naturally sequential.

All three evaluate the unperturbed starting point first, so the first cost
in a session is the cost of the initial parameters, and a constant cost
leaves every optimizer stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

OPTIMIZER_KINDS = ("spsa", "exact_gradient_descent", "nelder_mead")


@dataclass
class OptimizerConfig:
    kind: str = "spsa"
    a: float = 0.3
    c: float = 0.15
    big_a: float = 10.0
    alpha_exp: float = 0.602
    gamma_exp: float = 0.101
    step_size: float = 0.5

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}; expected one of {OPTIMIZER_KINDS}")
        for name in ("a", "c", "step_size"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.big_a < 0.0:
            raise ValueError(f"big_a must be non-negative, got {self.big_a}")
        for name in ("alpha_exp", "gamma_exp"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {value}")


def spsa_gains(config: OptimizerConfig, k: int) -> tuple[float, float]:
    """(a_k, c_k) for update index k (0-based)."""
    a_k = config.a / (config.big_a + k + 1.0) ** config.alpha_exp
    c_k = config.c / (k + 1.0) ** config.gamma_exp
    return a_k, c_k


class _Spsa:
    def __init__(self, config: OptimizerConfig, x0: np.ndarray, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.center = x0.copy()
        self.k = 0
        self._phase = "baseline"
        self._delta = None
        self._f_plus = None
        self._query = x0.copy()

    def propose(self) -> np.ndarray:
        return self._query

    def observe(self, cost: float):
        cfg = self.config
        if self._phase == "baseline":
            self._start_pair()
        elif self._phase == "plus":
            self._f_plus = cost
            _, c_k = spsa_gains(cfg, self.k)
            self._query = self.center - c_k * self._delta
            self._phase = "minus"
        else:
            a_k, c_k = spsa_gains(cfg, self.k)
            grad = (self._f_plus - cost) / (2.0 * c_k) * self._delta
            self.center = self.center - a_k * grad
            self.k += 1
            self._start_pair()

    def _start_pair(self):
        _, c_k = spsa_gains(self.config, self.k)
        self._delta = self.rng.integers(0, 2, size=self.center.size) * 2.0 - 1.0
        self._query = self.center + c_k * self._delta
        self._phase = "plus"


class _FiniteDifferenceDescent:
    def __init__(self, config: OptimizerConfig, x0: np.ndarray, rng):
        self.config = config
        self.center = x0.copy()
        self.dim = x0.size
        self._grad = np.zeros(self.dim)
        self._coord = 0
        self._sign = 0  # 0 -> baseline, +1 -> forward point, -1 -> backward point
        self._f_forward = 0.0
        self._query = x0.copy()

    def propose(self) -> np.ndarray:
        return self._query

    def _point(self, coord: int, sign: int) -> np.ndarray:
        x = self.center.copy()
        x[coord] += sign * self.config.c
        return x

    def observe(self, cost: float):
        if self._sign == 0:
            self._coord = 0
            self._sign = 1
            self._query = self._point(0, 1)
            return
        if self._sign == 1:
            self._f_forward = cost
            self._sign = -1
            self._query = self._point(self._coord, -1)
            return
        self._grad[self._coord] = (self._f_forward - cost) / (2.0 * self.config.c)
        self._coord += 1
        if self._coord == self.dim:
            self.center = self.center - self.config.step_size * self._grad
            self._coord = 0
        self._sign = 1
        self._query = self._point(self._coord, 1)


class _NelderMead:
    """Sequential simplex search (reflection 1, expansion 2, contractions 0.5)."""

    def __init__(self, config: OptimizerConfig, x0: np.ndarray, rng):
        self.config = config
        self.dim = x0.size
        self.points = [x0.copy()] + [
            x0 + config.c * np.eye(self.dim)[j] for j in range(self.dim)
        ]
        self.values = [math.inf] * (self.dim + 1)
        self._phase = "init"
        self._pending = 0
        self._query = self.points[0].copy()
        self._trial = None
        self._trial_kind = ""

    @property
    def center(self) -> np.ndarray:
        best = int(np.argmin(self.values))
        return self.points[best]

    def propose(self) -> np.ndarray:
        return self._query

    def _order(self):
        order = np.argsort(self.values, kind="stable")
        self.points = [self.points[i] for i in order]
        self.values = [self.values[i] for i in order]

    def _begin_reflection(self):
        self._order()
        centroid = np.mean(self.points[:-1], axis=0)
        self._centroid = centroid
        self._trial = centroid + (centroid - self.points[-1])
        self._trial_kind = "reflect"
        self._phase = "await"
        self._query = self._trial

    def observe(self, cost: float):
        if self._phase == "init":
            self.values[self._pending] = cost
            self._pending += 1
            if self._pending <= self.dim:
                self._query = self.points[self._pending].copy()
                return
            self._begin_reflection()
            return
        if self._phase == "shrink":
            self.values[self._pending] = cost
            self._pending += 1
            if self._pending <= self.dim:
                self._query = self.points[self._pending].copy()
                return
            self._begin_reflection()
            return
        # phase == "await": cost belongs to self._trial
        kind = self._trial_kind
        if kind == "reflect":
            if cost < self.values[0]:
                self._reflected = (self._trial, cost)
                self._trial = self._centroid + 2.0 * (self._centroid - self.points[-1])
                self._trial_kind = "expand"
                self._query = self._trial
                return
            if cost < self.values[-2]:
                self._accept(self._trial, cost)
                return
            self._reflected = (self._trial, cost)
            if cost < self.values[-1]:
                self._trial = self._centroid + 0.5 * (self._centroid - self.points[-1])
                self._trial_kind = "contract_out"
            else:
                self._trial = self._centroid - 0.5 * (self._centroid - self.points[-1])
                self._trial_kind = "contract_in"
            self._query = self._trial
            return
        if kind == "expand":
            ref_point, ref_cost = self._reflected
            if cost < ref_cost:
                self._accept(self._trial, cost)
            else:
                self._accept(ref_point, ref_cost)
            return
        if kind == "contract_out":
            ref_point, ref_cost = self._reflected
            if cost <= ref_cost:
                self._accept(self._trial, cost)
            else:
                self._begin_shrink()
            return
        if kind == "contract_in":
            if cost < self.values[-1]:
                self._accept(self._trial, cost)
            else:
                self._begin_shrink()
            return
        raise RuntimeError(f"unexpected simplex phase {kind!r}")

    def _accept(self, point: np.ndarray, cost: float):
        self.points[-1] = point
        self.values[-1] = cost
        self._begin_reflection()

    def _begin_shrink(self):
        self._order()
        best = self.points[0]
        for j in range(1, self.dim + 1):
            self.points[j] = best + 0.5 * (self.points[j] - best)
            self.values[j] = math.inf
        self._pending = 1
        self._phase = "shrink"
        self._query = self.points[1].copy()


_KIND_TO_STATE = {
    "spsa": _Spsa,
    "exact_gradient_descent": _FiniteDifferenceDescent,
    "nelder_mead": _NelderMead,
}


class AskTellOptimizer:
    """Uniform wrapper: ``ask`` for the next query point, ``tell`` its cost.

    Tracks the best (lowest observed cost) parameter vector separately from
    the optimizer's own moving iterate, which is exposed as ``center``.
    """

    def __init__(self, config: OptimizerConfig, initial_params: np.ndarray, rng: np.random.Generator):
        x0 = np.asarray(initial_params, dtype=float).copy()
        if x0.ndim != 1 or x0.size == 0:
            raise ValueError(f"initial parameters must be a non-empty vector, got shape {x0.shape}")
        if not np.all(np.isfinite(x0)):
            raise ValueError("initial parameters must be finite")
        self.config = config
        self.dim = x0.size
        self._state = _KIND_TO_STATE[config.kind](config, x0, rng)
        self._awaiting_tell = False
        self.evaluations = 0
        self.best_params = x0.copy()
        self.best_cost = math.inf

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self._state.center, dtype=float).copy()

    def ask(self) -> np.ndarray:
        self._awaiting_tell = True
        return np.asarray(self._state.propose(), dtype=float).copy()

    def tell(self, cost: float):
        if not self._awaiting_tell:
            raise RuntimeError("tell() called before ask()")
        if not math.isfinite(cost):
            raise ValueError(f"cost must be finite, got {cost}")
        query = np.asarray(self._state.propose(), dtype=float).copy()
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_params = query
        self._state.observe(cost)
        self.evaluations += 1
        self._awaiting_tell = False
