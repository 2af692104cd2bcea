"""Stochastic reaction-diffusion on a proximity graph.

Each node carries two species ``(u_i, v_i)`` with node-local reaction terms
(Lotka-Volterra or FitzHugh-Nagumo), graph-Laplacian diffusion and additive
white noise, integrated with Euler-Maruyama::

    u' = u + (R_u(u, v) - D_u L u) dt + sigma_u sqrt(dt) z_u
    v' = v + (R_v(u, v) - D_v L v) dt + sigma_v sqrt(dt) z_v

with independent standard normals ``z_u``, ``z_v`` per node and step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DivergenceError, ShapeError
from .proximity import ProximityGraph

PARAM_NAMES = {
    "LV": ("alpha", "beta", "delta", "gamma"),
    "FHN": ("epsilon", "a", "b"),
}
PARAM_RANGE = (0.2, 1.0)
DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class ReactionParams:
    """Per-node reaction parameters, one row per node in ``PARAM_NAMES[model]`` order."""

    model: str
    values: np.ndarray

    def __post_init__(self):
        if self.model not in PARAM_NAMES:
            raise DataError(f"unknown reaction model {self.model!r}")
        v = np.asarray(self.values, dtype=np.float64)
        k = len(PARAM_NAMES[self.model])
        if v.ndim != 2 or v.shape[1] != k:
            raise ShapeError(f"{self.model} needs an N x {k} parameter matrix, got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DataError("reaction parameters must be finite and non-negative")
        object.__setattr__(self, "values", v)

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.model]


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    horizon: float = 100.0
    diffusivity: tuple[float, float] = (0.05, 0.05)
    noise: tuple[float, float] = (0.0, 0.0)
    seed: int = 0
    # Project states onto [0, inf) after each step (truncated Euler scheme).
    # Off by default; only meaningful for population models such as LV.
    nonnegative: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be at least dt")
        if min(self.diffusivity) < 0 or min(self.noise) < 0:
            raise ValueError("diffusivity and noise must be non-negative")

    @property
    def steps(self) -> int:
        # tolerate T/dt landing a hair below an integer
        return int(np.floor(self.horizon / self.dt + 1e-9))


@dataclass
class Trajectory:
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    params: ReactionParams
    meta: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return self.u.shape[1]

    def paths(self) -> np.ndarray:
        """Node paths ``(u_i(t), v_i(t))`` stacked as ``(N, K, 2)``."""
        return np.stack([self.u.T, self.v.T], axis=-1)


def lv_reaction(u, v, alpha, beta, delta, gamma):
    """Lotka-Volterra reaction rates ``(alpha u - beta u v, delta u v - gamma v)``."""
    return alpha * u - beta * u * v, delta * u * v - gamma * v


def fhn_reaction(u, v, epsilon, a, b):
    """FitzHugh-Nagumo reaction rates ``(u - u^3/3 - v, epsilon (u + a - b v))``."""
    return u - u**3 / 3 - v, epsilon * (u + a - b * v)


def reaction(model: str, u, v, params: np.ndarray):
    if model == "LV":
        return lv_reaction(u, v, *params.T)
    if model == "FHN":
        return fhn_reaction(u, v, *params.T)
    raise DataError(f"unknown reaction model {model!r}")


def diffusion_term(state, graph: ProximityGraph | np.ndarray, diffusivity: float) -> np.ndarray:
    """``-D * L @ state``; accepts a graph or a precomputed Laplacian."""
    lap = graph.laplacian() if isinstance(graph, ProximityGraph) else np.asarray(graph)
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (lap.shape[0],):
        raise ShapeError(f"state of shape {state.shape} does not fit {lap.shape[0]} nodes")
    return -diffusivity * (lap @ state)


def euler_maruyama_step(u, v, params: ReactionParams, graph, config: SimConfig, noise_draw, step=None):
    """One explicit step. ``noise_draw`` is a ``2 x N`` array of standard normals.

    ``graph`` may be a ``ProximityGraph`` or its Laplacian.
    """
    lap = graph.laplacian() if isinstance(graph, ProximityGraph) else graph
    ru, rv = reaction(params.model, u, v, params.values)
    du_diff = -config.diffusivity[0] * (lap @ u)
    dv_diff = -config.diffusivity[1] * (lap @ v)
    sq = np.sqrt(config.dt)
    u_new = u + (ru + du_diff) * config.dt + config.noise[0] * sq * noise_draw[0]
    v_new = v + (rv + dv_diff) * config.dt + config.noise[1] * sq * noise_draw[1]
    if config.nonnegative:
        u_new = np.maximum(u_new, 0.0)
        v_new = np.maximum(v_new, 0.0)
    if not (
        np.all(np.isfinite(u_new))
        and np.all(np.isfinite(v_new))
        and np.max(np.abs(u_new)) <= DIVERGENCE_BOUND
        and np.max(np.abs(v_new)) <= DIVERGENCE_BOUND
    ):
        where = "" if step is None else f" at step {step}"
        raise DivergenceError(f"{params.model} state diverged{where}", step=step)
    return u_new, v_new


def simulate(graph: ProximityGraph, params: ReactionParams, config: SimConfig) -> Trajectory:
    """Integrate from uniform [0, 1] initial conditions drawn from ``config.seed``."""
    n = graph.node_count
    if params.node_count != n:
        raise ShapeError(f"{params.node_count} parameter rows for {n} nodes")
    rng = np.random.default_rng(config.seed)
    k = config.steps
    u = np.empty((k + 1, n))
    v = np.empty((k + 1, n))
    u[0] = rng.uniform(0.0, 1.0, n)
    v[0] = rng.uniform(0.0, 1.0, n)
    lap = graph.laplacian()
    for step in range(k):
        u[step + 1], v[step + 1] = euler_maruyama_step(
            u[step], v[step], params, lap, config, rng.standard_normal((2, n)), step=step
        )
    times = np.arange(k + 1) * config.dt
    return Trajectory(times, u, v, params)


def sample_parameters(model: str, n: int, seed: int) -> ReactionParams:
    """I.i.d. uniform parameters on ``PARAM_RANGE``."""
    if n < 1:
        raise ValueError("need at least one node")
    if model not in PARAM_NAMES:
        raise DataError(f"unknown reaction model {model!r}")
    rng = np.random.default_rng(seed)
    lo, hi = PARAM_RANGE
    return ReactionParams(model, rng.uniform(lo, hi, size=(n, len(PARAM_NAMES[model]))))


def export_trajectory(traj: Trajectory, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>`` with columns ``node_id,t,u,v`` and ``<stem>_params.csv``.

    The sidecar has ``node_id`` followed by the model's parameter names
    (``alpha,beta,delta,gamma`` for LV, ``epsilon,a,b`` for FHN).
    """
    path = Path(path)
    side = path.with_name(path.stem + "_params.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "t", "u", "v"])
        for i in range(traj.node_count):
            for t, a, b in zip(traj.times, traj.u[:, i], traj.v[:, i]):
                w.writerow([i, repr(float(t)), repr(float(a)), repr(float(b))])
    with open(side, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", *traj.params.names])
        for i, row in enumerate(traj.params.values):
            w.writerow([i, *(repr(float(x)) for x in row)])
    return path, side


def load_trajectory(path: str | Path) -> Trajectory:
    """Read a trajectory written by :func:`export_trajectory`."""
    path = Path(path)
    side = path.with_name(path.stem + "_params.csv")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        with open(side) as fh:
            header = fh.readline().strip().split(",")
        pvals = np.loadtxt(side, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read trajectory {path}: {exc}") from exc
    names = tuple(header[1:])
    model = next((m for m, p in PARAM_NAMES.items() if p == names), None)
    if model is None:
        raise DataError(f"{side}: unrecognised parameter columns {names}")
    ids = data[:, 0].astype(int)
    n = ids.max() + 1
    order = np.lexsort((data[:, 1], ids))
    data = data[order]
    k = data.shape[0] // n
    if k * n != data.shape[0]:
        raise DataError(f"{path}: nodes have unequal sample counts")
    times = data[:k, 1]
    u = data[:, 2].reshape(n, k).T
    v = data[:, 3].reshape(n, k).T
    prow = pvals[np.argsort(pvals[:, 0])][:, 1:]
    return Trajectory(times, u, v, ReactionParams(model, prow))
