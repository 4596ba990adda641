"""Deterministic time evolution of compiled rate systems.

Three flavors share one module: classical fixed-step RK4 for ordinary
systems, method of steps (same RK4 core, stored history, linear
interpolation, grid-aligned delays) for delayed systems, and a
synchronous stepper for finite-difference systems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConservationDrift, DelayMisaligned, IntegrationError,
                     NegativePopulation, NonFinite)
from .expr import EvalContext

CONSERVATION_BUDGET = 1e-6   # hard failure threshold, relative to N0
NEGATIVE_TOLERANCE = 1e-9    # clamped-to-zero reporting band


@dataclass
class Trajectory:
    """Uniform-grid time series of occupation values."""
    times: np.ndarray
    data: np.ndarray  # shape (nt, n_states + n_env)
    state_names: list
    env_names: list
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        names = self.state_names + self.env_names
        try:
            return self.data[:, names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def final(self):
        names = self.state_names + self.env_names
        return dict(zip(names, self.data[-1]))

    @property
    def columns(self):
        return self.state_names + self.env_names


class HistoryAccessor:
    """Past samples of one trajectory, with linear interpolation.

    Values for t earlier than the first sample equal the initial
    condition (constant pre-history).  Queries beyond the newest sample
    are errors, except for the explicit stage-overhang path in
    ``window_integral``.  In ``discrete`` mode times are step indices,
    reads are exact, and window integrals become sums over whole steps.
    """

    def __init__(self, state_names, env_names, base_bindings, t0, dt, y0,
                 discrete=False):
        self.state_names = list(state_names)
        self.env_names = list(env_names)
        self.base = dict(base_bindings)
        self.t0 = t0
        self.dt = dt
        self.discrete = discrete
        self.times = [t0]
        self.rows = [np.asarray(y0, dtype=float)]
        self._caches = {}  # key -> {'fn': fn, 'vals': [...], 'cum': [...]}

    # -- sample management ----------------------------------------------

    def append(self, t, row):
        self.times.append(t)
        self.rows.append(np.asarray(row, dtype=float))
        for cache in self._caches.values():
            self._extend_cache(cache)

    def register_integrand(self, key, fn):
        if key not in self._caches:
            cache = {"fn": fn, "vals": [], "cum": [0.0]}
            self._caches[key] = cache
            self._extend_cache(cache)

    def _row_bindings(self, i):
        b = dict(self.base)
        b["t"] = self.times[i]
        row = self.rows[i]
        for j, name in enumerate(self.state_names):
            b[name] = row[j]
        ns = len(self.state_names)
        for j, name in enumerate(self.env_names):
            b[name] = row[ns + j]
        return b

    def _extend_cache(self, cache):
        fn = cache["fn"]
        vals, cum = cache["vals"], cache["cum"]
        while len(vals) < len(self.rows):
            i = len(vals)
            v = fn(EvalContext(self._row_bindings(i), self))
            vals.append(v)
            if i > 0:
                if self.discrete:
                    cum.append(cum[-1] + vals[i - 1])
                else:
                    h = self.times[i] - self.times[i - 1]
                    cum.append(cum[-1] + 0.5 * h * (vals[i - 1] + vals[i]))

    # -- reads ----------------------------------------------------------

    def _locate(self, t):
        """Fractional index of time t on the stored uniform grid."""
        return (t - self.t0) / self.dt

    def bindings_at(self, t):
        if t <= self.t0:
            b = self._row_bindings(0)
            b["t"] = t
            return b
        x = self._locate(t)
        i = int(math.floor(x + 1e-9))
        if i >= len(self.rows):
            raise IntegrationError(
                f"history query at t={t!r} is beyond the stored window")
        frac = x - i
        if frac <= 1e-9 or i + 1 >= len(self.rows):
            row = self.rows[i]
        else:
            row = (1.0 - frac) * self.rows[i] + frac * self.rows[i + 1]
        b = dict(self.base)
        b["t"] = t
        for j, name in enumerate(self.state_names):
            b[name] = row[j]
        ns = len(self.state_names)
        for j, name in enumerate(self.env_names):
            b[name] = row[ns + j]
        return b

    def window_integral(self, key, fn, t_lo, t_hi, now_bindings):
        if key not in self._caches:
            self.register_integrand(key, fn)
        cache = self._caches[key]
        self._extend_cache(cache)
        if self.discrete:
            return self._window_sum(cache, t_lo, t_hi)
        return self._cumulative(cache, t_hi, now_bindings) \
            - self._cumulative(cache, t_lo, now_bindings)

    def _window_sum(self, cache, t_lo, t_hi):
        # sum of integrand over whole steps j in [t_lo, t_hi)
        vals = cache["vals"]
        i0 = int(round(t_lo - self.t0))
        i1 = int(round(t_hi - self.t0))
        total = 0.0
        if i0 < 0:
            total += vals[0] * (min(i1, 0) - i0)
            i0 = 0
        if i1 > len(vals):
            raise IntegrationError("discrete history window exceeds stored steps")
        for j in range(i0, i1):
            total += vals[j]
        return total

    def _cumulative(self, cache, t, now_bindings):
        """Integral of the cached integrand from t0 to t (trapezoid)."""
        vals, cum = cache["vals"], cache["cum"]
        if t <= self.t0:
            return (t - self.t0) * vals[0]
        x = self._locate(t)
        i = int(math.floor(x + 1e-9))
        last = len(vals) - 1
        if i >= last:
            # stage overhang past the newest stored sample: close the
            # interval with the integrand at the caller's current state
            fn = cache["fn"]
            f_now = fn(EvalContext(now_bindings, self))
            h = t - self.times[last]
            return cum[last] + 0.5 * h * (vals[last] + f_now)
        frac = x - i
        if frac <= 1e-9:
            return cum[i]
        f_mid = (1.0 - frac) * vals[i] + frac * vals[i + 1]
        h = t - self.times[i]
        return cum[i] + 0.5 * h * (vals[i] + f_mid)


def _check_finite(t, y):
    if not np.all(np.isfinite(y)):
        raise NonFinite(t)


def _check_conservation(t, y, n_states, n0):
    if n0 <= 0:
        return
    drift = abs(float(y[:n_states].sum()) - n0)
    if drift > CONSERVATION_BUDGET * n0:
        raise ConservationDrift(t, drift, CONSERVATION_BUDGET * n0)


def _check_negative(t, y, n_states, n0):
    floor = -NEGATIVE_TOLERANCE * max(1.0, n0)
    worst = float(y[:n_states].min()) if n_states else 0.0
    if worst < floor:
        raise IntegrationError(
            f"state count {worst!r} at t={t!r} below tolerance; reduce dt")


def _report(data):
    """Clamp the tolerated negative band to zero for reporting."""
    out = np.asarray(data)
    return np.where((out < 0) & (out > -1e-6), 0.0, out)


def _resolve_init(system, init):
    from .diagram import OccupationVector

    if init is None:
        return system.diagram.initial_vector()
    if isinstance(init, OccupationVector):
        return init.as_array(system.state_names, system.env_names)
    return np.asarray(init, dtype=float)


def _metadata(system, dt, extra=None):
    md = {"model": system.diagram.name, "params": dict(system.diagram.params),
          "dt": dt, "flavor": system.flavor}
    if extra:
        md.update(extra)
    return md


def integrate(system, init=None, t_end=10.0, dt=0.01):
    """Fixed-step classical RK4 for an ODE-flavored system."""
    if system.flavor != "ode":
        raise IntegrationError(f"integrate() needs an ode system, got {system.flavor}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    y = _resolve_init(system, init)
    n_states = len(system.state_names)
    n0 = system.diagram.n0
    rhs = system.rhs
    nsteps = int(round(t_end / dt))
    times = np.empty(nsteps + 1)
    data = np.empty((nsteps + 1, len(y)))
    times[0] = 0.0
    data[0] = y
    t = 0.0
    for k in range(nsteps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * dt
        _check_finite(t, y)
        _check_conservation(t, y, n_states, n0)
        _check_negative(t, y, n_states, n0)
        times[k + 1] = t
        data[k + 1] = y
    return Trajectory(times, _report(data), system.state_names,
                      system.env_names, _metadata(system, dt))


def integrate_delayed(system, init=None, t_end=10.0, dt=0.01):
    """Method of steps for a delayed system: RK4 core, linear-interpolated
    history reads, trapezoid history integrals, constant pre-history."""
    if system.flavor != "dde":
        raise IntegrationError(
            f"integrate_delayed() needs a dde system, got {system.flavor}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    for delay in system.delay_values:
        if delay <= 0:
            continue
        ratio = delay / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise DelayMisaligned(delay, dt)
    y = _resolve_init(system, init)
    n_states = len(system.state_names)
    n0 = system.diagram.n0
    rhs = system.rhs
    history = HistoryAccessor(system.state_names, system.env_names,
                              system.diagram.base_bindings(), 0.0, dt, y)
    for key, fn in system.histint_integrands:
        history.register_integrand(key, fn)
    nsteps = int(round(t_end / dt))
    times = np.empty(nsteps + 1)
    data = np.empty((nsteps + 1, len(y)))
    times[0] = 0.0
    data[0] = y
    t = 0.0
    for k in range(nsteps):
        k1 = rhs(t, y, history)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1, history)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2, history)
        k4 = rhs(t + dt, y + dt * k3, history)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * dt
        _check_finite(t, y)
        _check_conservation(t, y, n_states, n0)
        _check_negative(t, y, n_states, n0)
        history.append(t, y)
        times[k + 1] = t
        data[k + 1] = y
    return Trajectory(times, _report(data), system.state_names,
                      system.env_names, _metadata(system, dt))


def iterate_difference(system, init=None, k_steps=100):
    """Synchronous stepper: all states advance from step k to k+1 at once;
    delayed terms read stored whole-step values."""
    if system.flavor != "difference":
        raise IntegrationError(
            f"iterate_difference() needs a difference system, got {system.flavor}")
    if k_steps < 0:
        raise ValueError("k_steps must be non-negative")
    y = _resolve_init(system, init)
    n_states = len(system.state_names)
    n0 = system.diagram.n0
    rhs = system.rhs
    history = HistoryAccessor(system.state_names, system.env_names,
                              system.diagram.base_bindings(), 0.0, 1.0, y,
                              discrete=True)
    for key, fn in system.histint_integrands:
        history.register_integrand(key, fn)
    times = np.arange(k_steps + 1, dtype=float)
    data = np.empty((k_steps + 1, len(y)))
    data[0] = y
    for k in range(k_steps):
        y = y + rhs(float(k), y, history)
        _check_finite(k + 1, y)
        for i in range(n_states):
            if y[i] < 0:
                raise NegativePopulation(k + 1, system.state_names[i], float(y[i]))
        _check_conservation(k + 1, y, n_states, n0)
        history.append(float(k + 1), y)
        data[k + 1] = y
    return Trajectory(times, data, system.state_names, system.env_names,
                      _metadata(system, 1.0))
