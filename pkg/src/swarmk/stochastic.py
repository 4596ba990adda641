"""Stochastic ground truth for the mean-field models.

Three engines: exact transient solution of the configuration-level master
equation (small state spaces), Gillespie sampling of the same chain, and
a per-agent simulator for the stick-pulling system with deterministic
gripping timers (which breaks the memoryless property and therefore
cannot be reduced to a configuration chain).
"""
from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, StateSpaceTooLarge
from .expr import EvalContext, compile_expr, eval_expr, has_history_terms
from .integrate import Trajectory

CONFIG_CAP = 100_000


def _require_memoryless(diagram):
    for tr in diagram.transitions:
        if has_history_terms(tr.rate):
            raise ModelError(
                "delayed terms are not allowed in the configuration chain "
                f"(transition {tr.source} -> {tr.target})")


def _integer_bindings(diagram, config):
    names = diagram.state_names + diagram.env_names
    b = diagram.base_bindings()
    b["t"] = 0.0
    for name, v in zip(names, config):
        b[name] = float(v)
    return b


@dataclass
class ConfigurationSpace:
    """Reachable integer occupation vectors and the jumps between them."""
    diagram: object
    configs: list                 # list of tuples (states + env counters)
    index: dict                   # config tuple -> row index
    jumps: list                   # (from_idx, to_idx, rate) with rate > 0

    @property
    def size(self):
        return len(self.configs)

    @classmethod
    def build(cls, diagram, cap=CONFIG_CAP):
        """Breadth-first enumeration from the initial configuration."""
        _require_memoryless(diagram)
        state_names = diagram.state_names
        env_names = diagram.env_names
        ns = len(state_names)
        init = diagram.initial_vector()
        start = tuple(int(round(v)) for v in init)
        if any(abs(v - round(v)) > 1e-9 for v in init):
            raise ModelError("initial counts must be integers for the "
                             "configuration chain")

        rate_fns = [compile_expr(tr.rate) for tr in diagram.transitions]
        moves = []
        for tr in diagram.transitions:
            si = state_names.index(tr.source)
            ti = state_names.index(tr.target)
            effs = [(ns + env_names.index(n), compile_expr(e))
                    for n, e in tr.env_effects]
            moves.append((si, ti, effs))

        configs = [start]
        index = {start: 0}
        jumps = []
        queue = deque([0])
        while queue:
            i = queue.popleft()
            cfg = configs[i]
            b = _integer_bindings(diagram, cfg)
            ctx = EvalContext(b, None)
            for (si, ti, effs), fn in zip(moves, rate_fns):
                if si != ti and cfg[si] < 1:
                    continue
                rate = fn(ctx)
                if rate <= 0.0:
                    continue
                nxt = list(cfg)
                if si != ti:
                    nxt[si] -= 1
                    nxt[ti] += 1
                for ei, eff_fn in effs:
                    dv = eff_fn(ctx)
                    if abs(dv - round(dv)) > 1e-9:
                        raise ModelError(
                            "environment effects must be integer-valued in "
                            f"the configuration chain (got {dv!r})")
                    nxt[ei] += int(round(dv))
                nxt = tuple(nxt)
                j = index.get(nxt)
                if j is None:
                    j = len(configs)
                    if j >= cap:
                        raise StateSpaceTooLarge(j + 1, cap)
                    index[nxt] = j
                    configs.append(nxt)
                    queue.append(j)
                jumps.append((i, j, rate))
        return cls(diagram, configs, index, jumps)


@dataclass
class MasterTable:
    """Probability of each configuration at each output time."""
    times: np.ndarray
    probs: np.ndarray  # shape (nt, n_configs)
    space: ConfigurationSpace


def master_exact(diagram, t_end=10.0, dt=0.005, dt_out=None, cap=CONFIG_CAP):
    """Exact transient probabilities and expected occupation numbers.

    Integrates dP/dt = W P with classical RK4 on the enumerated
    configuration space and returns (MasterTable, expectation Trajectory).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt_out is None:
        dt_out = dt
    stride = max(1, int(round(dt_out / dt)))
    space = ConfigurationSpace.build(diagram, cap=cap)
    n = space.size

    w = np.zeros((n, n))
    for i, j, rate in space.jumps:
        w[j, i] += rate
        w[i, i] -= rate

    p = np.zeros(n)
    p[0] = 1.0
    nsteps = int(round(t_end / dt))
    out_times = [0.0]
    out_probs = [p.copy()]
    for k in range(nsteps):
        k1 = w @ p
        k2 = w @ (p + 0.5 * dt * k1)
        k3 = w @ (p + 0.5 * dt * k2)
        k4 = w @ (p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        total = float(p.sum())
        if abs(total - 1.0) > 1e-9:
            raise ModelError(
                f"master-equation normalization drifted to {total!r}; reduce dt")
        if float(p.min()) < -1e-12:
            raise ModelError(
                f"master-equation probability went negative ({p.min()!r}); "
                "reduce dt")
        if (k + 1) % stride == 0:
            out_times.append((k + 1) * dt)
            out_probs.append(p.copy())

    times = np.array(out_times)
    probs = np.vstack(out_probs)
    cfg_matrix = np.array(space.configs, dtype=float)  # (n_configs, dim)
    expectations = probs @ cfg_matrix
    traj = Trajectory(times, expectations, diagram.state_names,
                      diagram.env_names,
                      {"model": diagram.name, "engine": "master", "dt": dt})
    return MasterTable(times, probs, space), traj


def ssa_run(diagram, t_end=10.0, seed=0):
    """One Gillespie sample path of the configuration-level chain.

    Exponential waiting times with the total rate, jump category chosen
    proportionally to individual rates; fully determined by the seed.
    Returns a piecewise-constant Trajectory sampled at the jump times.
    """
    _require_memoryless(diagram)
    rng = np.random.default_rng(seed)
    state_names = diagram.state_names
    env_names = diagram.env_names
    ns = len(state_names)
    y = diagram.initial_vector()
    if any(abs(v - round(v)) > 1e-9 for v in y):
        raise ModelError("initial counts must be integers for Gillespie runs")
    y = np.array([int(round(v)) for v in y], dtype=float)

    rate_fns = [compile_expr(tr.rate) for tr in diagram.transitions]
    moves = []
    for tr in diagram.transitions:
        si = state_names.index(tr.source)
        ti = state_names.index(tr.target)
        effs = [(ns + env_names.index(nm), compile_expr(e))
                for nm, e in tr.env_effects]
        moves.append((si, ti, effs))

    base = diagram.base_bindings()
    times = [0.0]
    rows = [y.copy()]
    t = 0.0
    rates = np.empty(len(moves))
    while True:
        b = dict(base)
        b["t"] = t
        for i, name in enumerate(state_names):
            b[name] = y[i]
        for j, name in enumerate(env_names):
            b[name] = y[ns + j]
        ctx = EvalContext(b, None)
        for i, ((si, ti, _), fn) in enumerate(zip(moves, rate_fns)):
            if si != ti and y[si] < 1:
                rates[i] = 0.0
            else:
                rates[i] = max(0.0, fn(ctx))
        total = float(rates.sum())
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t >= t_end:
            break
        pick = rng.random() * total
        acc = 0.0
        chosen = len(moves) - 1
        for i, r in enumerate(rates):
            acc += r
            if pick < acc:
                chosen = i
                break
        si, ti, effs = moves[chosen]
        if si != ti:
            y[si] -= 1
            y[ti] += 1
        for ei, eff_fn in effs:
            y[ei] += round(eff_fn(ctx))
        times.append(t)
        rows.append(y.copy())
    times.append(t_end)
    rows.append(y.copy())
    return Trajectory(np.array(times), np.vstack(rows), state_names,
                      env_names, {"model": diagram.name, "engine": "ssa",
                                  "seed": seed})


def semimarkov_run(n0, m0, alpha, r_g, tau, t_end=10.0, seed=0,
                   replacement=True):
    """Per-agent stick pulling with deterministic gripping countdowns.

    Searching agents grip free sticks at rate alpha per (agent, stick)
    pair and find gripping agents at rate r_g*alpha per pair.  A helped
    gripper and its helper both return to searching (the stick is pulled
    out and, in replacement mode, re-inserted); an unhelped gripper
    releases exactly tau after gripping.
    """
    if n0 < 1 or m0 < 1:
        raise ValueError("n0 and m0 must be >= 1")
    if tau < 0 or alpha <= 0 or not 0 < r_g <= 1:
        raise ValueError("invalid rate parameters")
    rng = np.random.default_rng(seed)
    n_search = n0
    deadlines = []          # one entry per gripping agent
    sticks = m0             # free sticks
    successes = 0
    t = 0.0
    times = [0.0]
    rows = [(float(n_search), 0.0)]

    def record():
        times.append(t)
        rows.append((float(n_search), float(len(deadlines))))

    while t < t_end:
        grip_rate = alpha * n_search * sticks
        help_rate = r_g * alpha * n_search * len(deadlines)
        total = grip_rate + help_rate
        next_deadline = min(deadlines) if deadlines else math.inf
        if total > 0.0:
            t_stoch = t + rng.exponential(1.0 / total)
        else:
            t_stoch = math.inf
        if next_deadline == math.inf and t_stoch == math.inf:
            break
        if next_deadline <= t_stoch:
            # unaided release at timer expiry
            if next_deadline >= t_end:
                break
            t = next_deadline
            deadlines.remove(next_deadline)
            n_search += 1
            sticks += 1
            record()
            continue
        if t_stoch >= t_end:
            break
        t = t_stoch
        if rng.random() * total < grip_rate:
            n_search -= 1
            sticks -= 1
            if tau == 0.0:
                # releases immediately: never observed gripping
                n_search += 1
                sticks += 1
            else:
                deadlines.append(t + tau)
        else:
            # success: pick a gripper uniformly; both return to searching
            k = int(rng.integers(len(deadlines)))
            deadlines.pop(k)
            n_search += 1  # the gripper (the helper never left searching
            #                as a count: one searcher leaves, two return)
            successes += 1
            if replacement:
                sticks += 1
        assert 0 <= n_search <= n0 and 0 <= len(deadlines) <= n0
        assert n_search + len(deadlines) == n0
        record()
    t = t_end
    record()
    return Trajectory(np.array(times),
                      np.array(rows, dtype=float),
                      ["s", "g"], [],
                      {"engine": "semimarkov", "seed": seed,
                       "successes": successes, "n0": n0, "m0": m0})


@dataclass
class EnsembleStats:
    """Per-time mean and standard error over independent runs."""
    times: np.ndarray
    mean: np.ndarray     # shape (nt, dim)
    stderr: np.ndarray   # shape (nt, dim)
    columns: list
    n_runs: int
    master_seed: int
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        j = self.columns.index(name)
        return self.mean[:, j], self.stderr[:, j]


def sample_path(traj, grid):
    """Piecewise-constant resampling of an event-time trajectory."""
    grid = np.asarray(grid, dtype=float)
    idx = np.searchsorted(traj.times, grid, side="right") - 1
    idx = np.clip(idx, 0, len(traj.times) - 1)
    return traj.data[idx]


def _worker_count():
    v = os.environ.get("SWARMK_THREADS", "")
    try:
        return max(1, int(v))
    except ValueError:
        return 1


def ensemble(run, n_runs, master_seed, t_grid, threads=None):
    """Aggregate ``run(seed) -> Trajectory`` over derived per-run seeds.

    Seeds are spawned deterministically from the master seed, so the
    result does not depend on execution order or on the worker count.
    """
    if n_runs < 2:
        raise ValueError("n_runs must be >= 2")
    t_grid = np.asarray(t_grid, dtype=float)
    seeds = np.random.SeedSequence(master_seed).spawn(n_runs)
    if threads is None:
        threads = _worker_count()

    def one(i):
        try:
            traj = run(seeds[i])
        except Exception as exc:
            raise RuntimeError(f"ensemble run {i} failed: {exc}") from exc
        return traj, sample_path(traj, t_grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_runs)))
    else:
        results = [one(i) for i in range(n_runs)]

    columns = results[0][0].columns
    samples = np.stack([s for _, s in results])  # (runs, nt, dim)
    mean = samples.mean(axis=0)
    std = samples.std(axis=0, ddof=1)
    stderr = std / math.sqrt(n_runs)
    return EnsembleStats(t_grid, mean, stderr, columns, n_runs,
                         master_seed, {"engine": results[0][0].metadata.get(
                             "engine", "unknown")})
