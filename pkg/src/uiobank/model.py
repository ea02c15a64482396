"""Plant model, attack scenarios, configuration loading and the ground-truth simulator.

Indices are 1-based in configuration files and 0-based everywhere in code.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

# spawn-key prefixes for the per-channel random streams
_ACTUATOR_STREAM = 1
_SENSOR_STREAM = 2
_INPUT_STREAM = 3
_X0_STREAM = 4


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configurations."""


def _sine(coeffs, x):
    return coeffs * np.sin(x)


# name -> (f(coeffs, x), per-coordinate Lipschitz constants of f)
NONLINEARITIES = {
    "sine": (_sine, np.abs),
}


def _matrix(value, name):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a numeric matrix") from exc
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SystemModel:
    """x+ = A x + f(x) + B (u + a_u),  y = C x + a_y  with f_i(x) = c_i sin(x_i)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    coeffs: np.ndarray
    nonlinearity: str = "sine"

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        C = _matrix(self.C, "C")
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise ConfigError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ConfigError(f"C has {C.shape[1]} columns, expected {n}")
        if coeffs.shape != (n,):
            raise ConfigError(f"expected {n} nonlinearity coefficients, got {coeffs.size}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {self.nonlinearity!r}")
        sv = np.linalg.svd(B, compute_uv=False)
        if B.shape[1] > n or sv.min() <= 1e-9 * sv.max():
            raise ConfigError("B not full column rank")
        for name, arr in (("A", A), ("B", B), ("C", C), ("coeffs", coeffs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    @cached_property
    def slopes(self):
        """Per-coordinate Lipschitz constants of the elementwise nonlinearity."""
        return NONLINEARITIES[self.nonlinearity][1](self.coeffs)

    @property
    def gamma(self):
        return float(self.slopes.max())

    @cached_property
    def B_pinv(self):
        return np.linalg.pinv(self.B)

    def f(self, x):
        return NONLINEARITIES[self.nonlinearity][0](self.coeffs, x)


def step_plant(model, x, u, a_u, a_y_next):
    """Advance the plant one step; returns (x(k+1), y(k+1))."""
    x_next = model.A @ x + model.f(x) + model.B @ (u + a_u)
    y_next = model.C @ x_next + a_y_next
    return x_next, y_next


def stream(seed, key):
    """Independent PCG64 stream for one channel; adding channels never shifts others."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"uniform bounds need lo < hi, got ({self.lo}, {self.hi})")


@dataclass(frozen=True)
class Scripted:
    """Replays a fixed sequence; zero once the sequence is exhausted."""

    values: tuple


@dataclass(frozen=True, eq=False)
class AttackScenario:
    n_u: int
    n_y: int
    W_u: frozenset
    W_y: frozenset
    generators: dict
    seed: int = 0
    _draws: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "W_u", frozenset(int(i) for i in self.W_u))
        object.__setattr__(self, "W_y", frozenset(int(i) for i in self.W_y))
        for name, W, size in (("W_u", self.W_u, self.n_u), ("W_y", self.W_y, self.n_y)):
            bad = [i for i in W if not 0 <= i < size]
            if bad:
                raise ConfigError(f"{name} index out of range: {sorted(i + 1 for i in bad)}")
        for channel in self.generators:
            kind, i = channel
            W = self.W_u if kind == "u" else self.W_y
            if i not in W:
                raise ConfigError(f"generator for unattacked channel {kind}{i + 1}")
        for kind, W in (("u", self.W_u), ("y", self.W_y)):
            missing = [i + 1 for i in sorted(W) if (kind, i) not in self.generators]
            if missing:
                raise ConfigError(f"no generator for attacked channels {kind}{missing}")

    def _value(self, channel, k):
        gen = self.generators[channel]
        if isinstance(gen, Scripted):
            return float(gen.values[k]) if k < len(gen.values) else 0.0
        draws = self._draws.get(channel)
        if draws is None or len(draws) <= k:
            size = max(64, 2 * (k + 1))
            kind, i = channel
            prefix = _ACTUATOR_STREAM if kind == "u" else _SENSOR_STREAM
            draws = stream(self.seed, (prefix, i)).uniform(gen.lo, gen.hi, size=size)
            self._draws[channel] = draws
        return float(draws[k])


def generate_signals(scenario, k):
    """Attack vectors (a_u(k), a_y(k)); entries outside W_u / W_y are exactly zero."""
    a_u = np.zeros(scenario.n_u)
    a_y = np.zeros(scenario.n_y)
    for i in scenario.W_u:
        a_u[i] = scenario._value(("u", i), k)
    for i in scenario.W_y:
        a_y[i] = scenario._value(("y", i), k)
    return a_u, a_y


@dataclass(frozen=True)
class RunSettings:
    horizon: int = 100
    seed: int = 0
    input_lo: float = -5.0
    input_hi: float = 5.0
    x0: object = "standard_normal"
    xhat0: object = None
    epsilon: float = 0.1
    window: int = 10
    bank: str = "complete"
    q: int = 1
    q1: int = 1
    q2: int = 1

    def __post_init__(self):
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")
        if not self.input_lo < self.input_hi:
            raise ConfigError("input bounds need lo < hi")
        if self.epsilon <= 0 or self.window < 1:
            raise ConfigError("isolation needs epsilon > 0 and window >= 1")
        if self.bank not in ("complete", "partial"):
            raise ConfigError(f"unknown bank kind {self.bank!r}")

    def initial_state(self, n):
        if isinstance(self.x0, str):
            if self.x0 != "standard_normal":
                raise ConfigError(f"unknown x0 distribution {self.x0!r}")
            return stream(self.seed, (_X0_STREAM,)).standard_normal(n)
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (n,):
            raise ConfigError(f"x0 must have length {n}")
        return x0

    def initial_estimate(self, n):
        if self.xhat0 is None:
            return np.zeros(n)
        xhat0 = np.array(self.xhat0, dtype=float)
        if xhat0.shape != (n,):
            raise ConfigError(f"xhat0 must have length {n}")
        return xhat0

    def inputs(self, n_u):
        """Known-input sequence u(0..horizon-1), one independent stream per actuator."""
        cols = [
            stream(self.seed, (_INPUT_STREAM, i)).uniform(self.input_lo, self.input_hi, self.horizon)
            for i in range(n_u)
        ]
        return np.column_stack(cols) if cols else np.zeros((self.horizon, 0))


def _indices(values, size, name):
    out = []
    for v in values:
        if not isinstance(v, int) or not 1 <= v <= size:
            raise ConfigError(f"{name} index out of range: {v}")
        out.append(v - 1)
    return frozenset(out)


def _generator(spec, name):
    kind = spec.get("type", "uniform")
    if kind == "uniform":
        return Uniform(float(spec["lo"]), float(spec["hi"]))
    if kind == "scripted":
        return Scripted(tuple(float(v) for v in spec["values"]))
    raise ConfigError(f"{name}: unknown generator type {kind!r}")


def parse_config(data):
    """Build (SystemModel, AttackScenario, RunSettings) from a decoded JSON document."""
    try:
        system = data["system"]
        model = SystemModel(
            A=system["A"],
            B=system["B"],
            C=system["C"],
            coeffs=system["sine_coeffs"],
        )
        attack = data.get("attack", {})
        W_u = _indices(attack.get("W_u", []), model.n_u, "W_u")
        W_y = _indices(attack.get("W_y", []), model.n_y, "W_y")
        raw = dict(attack.get("generators", {}))
        default = raw.pop("default", None)
        generators = {}
        for kind, W in (("u", W_u), ("y", W_y)):
            for i in sorted(W):
                spec = raw.pop(f"{kind}{i + 1}", default)
                if spec is None:
                    raise ConfigError(f"no generator for attacked channel {kind}{i + 1}")
                generators[(kind, i)] = _generator(spec, f"{kind}{i + 1}")
        if raw:
            raise ConfigError(f"generators for unattacked channels: {sorted(raw)}")
        seed = int(attack.get("seed", 0))
        scenario = AttackScenario(model.n_u, model.n_y, W_u, W_y, generators, seed)

        run = data.get("run", {})
        estimator = data.get("estimator", {})
        input_dist = run.get("input_dist", {"lo": -5.0, "hi": 5.0})
        settings = RunSettings(
            horizon=int(run.get("horizon", 100)),
            seed=seed,
            input_lo=float(input_dist["lo"]),
            input_hi=float(input_dist["hi"]),
            x0=run.get("x0_dist", "standard_normal"),
            xhat0=run.get("xhat0"),
            epsilon=float(run.get("epsilon", 0.1)),
            window=int(run.get("window", 10)),
            bank=estimator.get("kind", "complete"),
            q=int(estimator.get("q", max(1, (model.n_y - 1) // 2))),
            q1=int(estimator.get("q1", 1)),
            q2=int(estimator.get("q2", 1)),
        )
        settings.initial_estimate(model.n)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from exc
    except (TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    return model, scenario, settings


def load_config(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data)


def bundled_config(name):
    """Path of a configuration shipped with the package, e.g. ``example1``."""
    return Path(__file__).parent / "configs" / f"{name}.json"
