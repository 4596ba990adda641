"""Steady states, optima, critical ratios, sweeps and scaling fits.

Closed forms where they exist (quadratic steady state, optimal release
rate, critical robots-to-sticks ratio), bracketed root finding for the
delayed steady state, and trajectory post-processing (completion times,
scaling exponents, steady-state detection).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, NoRoot, NotReached
from .integrate import integrate, integrate_delayed, iterate_difference

QUADRATIC_RESIDUAL = 1e-12
TRANSCENDENTAL_RESIDUAL = 1e-10


@dataclass(frozen=True)
class SteadyStateResult:
    """A steady-state searching fraction with its defining residual."""
    n: float
    branch: str  # 'unique' | 'boundary'
    residual: float

    def __float__(self):
        return self.n


@dataclass
class SweepTable:
    """One observable row per grid value of a swept parameter."""
    param: str
    grid: tuple
    observables: tuple          # column names
    rows: tuple                 # tuple per grid value (None entries on failure)
    errors: tuple = ()          # per-row error message or None
    provenance: dict = field(default_factory=dict)

    def column(self, name):
        j = self.observables.index(name)
        return np.array([math.nan if r is None or r[j] is None else r[j]
                         for r in self.rows])


def beta_critical(r_g):
    """Critical robots-to-sticks ratio 2/(1+R_G)."""
    if not r_g > 0:
        raise ValueError("r_g must be positive")
    return 2.0 / (1.0 + r_g)


def collaboration_rate(n, beta, r_g):
    """Steady-state rate of successful two-robot extractions."""
    if not 0.0 <= n <= 1.0:
        raise ValueError("n must be a fraction in [0, 1]")
    return beta * (r_g * beta) * n * (1.0 - n)


def steady_state_simple(beta, gamma, r_g):
    """Steady searching fraction of the simplified (release-rate) model.

    Root in (0, 1] of (beta+bt) n^2 + (1+gamma-beta-bt) n - gamma = 0
    with bt = r_g*beta; for gamma=0 the non-negative physical branch.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    a = beta + r_g * beta
    if gamma == 0.0:
        n = max(0.0, (a - 1.0) / a)
        branch = "boundary" if n == 0.0 else "unique"
    else:
        # sign-robust positive quadratic root: avoids cancellation both
        # for large gamma (n -> 1) and for small gamma with a > 1
        b = 1.0 + gamma - a
        disc = math.sqrt(b * b + 4.0 * a * gamma)
        if b > 0.0:
            n = 2.0 * gamma / (b + disc)
        else:
            n = (disc - b) / (2.0 * a)
        branch = "unique"
    residual = abs(a * n * n + (1.0 + gamma - a) * n - gamma)
    # normalize the residual against the dominant coefficient so huge
    # gamma does not inflate round-off
    residual /= max(1.0, abs(gamma))
    return SteadyStateResult(min(max(n, 0.0), 1.0), branch, residual)


def _delayed_f(beta, tau, r_g):
    bt = r_g * beta

    def f(n):
        return (-1.0 + (beta + bt) * (1.0 - n)
                + (1.0 - beta * (1.0 - n)) * math.exp(-bt * tau * n))

    return f


def steady_state_delayed(beta, tau, r_g):
    """Steady searching fraction of the gripping-timer model.

    Bracketed bisection on [0, 1] followed by a Newton polish of
    f(n) = -1 + (beta+bt)(1-n) + (1 - beta(1-n)) exp(-bt*tau*n).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0.0:
        return SteadyStateResult(1.0, "boundary", 0.0)
    f = _delayed_f(beta, tau, r_g)
    lo, hi = 0.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return SteadyStateResult(0.0, "boundary", 0.0)
    if f_hi == 0.0:
        return SteadyStateResult(1.0, "boundary", 0.0)
    if f_lo * f_hi > 0:
        raise NoRoot(f_lo, f_hi)
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if f_lo * f_mid < 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    n = 0.5 * (lo + hi)
    for _ in range(20):
        fn = f(n)
        if abs(fn) <= 1e-14:
            break
        h = 1e-7
        dfn = (f(n + h) - f(n - h)) / (2.0 * h)
        if dfn == 0.0:
            break
        step = fn / dfn
        if not 0.0 <= n - step <= 1.0:
            break
        n -= step
    return SteadyStateResult(n, "unique", abs(f(n)))


def gamma_opt(beta, r_g):
    """Optimal release rate 1 - (beta+bt)/2, or None past the critical ratio."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    val = 1.0 - beta * (1.0 + r_g) / 2.0
    if val < -1e-12:
        return None
    return max(val, 0.0)


def tau_opt(beta, r_g):
    """Optimal gripping time (2/bt) ln[(1-beta/2)/(1-(beta+bt)/2)], or None
    past the critical ratio (where the log argument stops being positive)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    bt = r_g * beta
    if 1.0 - (beta + bt) / 2.0 <= 0.0:
        return None
    # log1p keeps precision for very small beta (both arguments near 1)
    return (2.0 / bt) * (math.log1p(-beta / 2.0) - math.log1p(-(beta + bt) / 2.0))


def completion_time(traj, counter, mode="deplete", threshold=None):
    """Time at which an environment counter crosses a threshold.

    ``deplete`` mode: first time the counter falls to ``threshold`` or
    below.  ``reach`` mode: first time it rises to ``threshold`` or above.
    Linear interpolation between the bracketing samples.
    """
    if threshold is None:
        raise ValueError("threshold is required")
    col = np.asarray(traj.column(counter), dtype=float)
    times = np.asarray(traj.times, dtype=float)
    if mode == "deplete":
        hit = col <= threshold
    elif mode == "reach":
        hit = col >= threshold
    else:
        raise ValueError(f"unknown mode {mode!r}")
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        raise NotReached(float(col[-1]))
    i = int(idx[0])
    if i == 0:
        return float(times[0])
    y0, y1 = col[i - 1], col[i]
    if y1 == y0:
        return float(times[i])
    frac = (threshold - y0) / (y1 - y0)
    return float(times[i - 1] + frac * (times[i] - times[i - 1]))


def scaling_exponent(points):
    """Least-squares slope of log T against log N, with its standard error."""
    pts = [(float(n), float(t)) for n, t in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(n <= 0 or t <= 0 for n, t in pts):
        raise ValueError("all points must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([t for _, t in pts])
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate abscissae: all N equal")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = len(pts) - 2
    s2 = float(np.sum(resid ** 2)) / dof if dof else 0.0
    stderr = math.sqrt(s2 / sxx)
    return slope, stderr


def efficiency_per_robot(t_complete, n0, m0):
    """Delivered tasks per robot per unit time, M0/(N0*T)."""
    if not t_complete > 0:
        raise ValueError("completion time must be positive")
    return m0 / (n0 * t_complete)


def steady_state_of_trajectory(traj, name, window=0.1, tol=1e-5):
    """Mean of a column over the last ``window`` fraction of the run.

    The mean must move less than ``tol`` relative to the preceding window
    of the same width, otherwise the trajectory has not settled.
    """
    col = np.asarray(traj.column(name), dtype=float)
    nt = len(col)
    k = max(2, int(round(nt * window)))
    last = float(col[nt - k:].mean())
    prev = float(col[max(0, nt - 2 * k):nt - k].mean())
    if abs(last - prev) >= tol:
        raise IntegrationError(
            f"column {name!r} still moving ({abs(last - prev):.3e} between "
            "windows); integrate longer")
    return last


def _steady_observables(diagram, want):
    """Analytic steady-state observables for the stick-pulling diagrams."""
    p = diagram.params
    beta, r_g = p["beta"], p["rg"]
    if "gamma" in p:
        res = steady_state_simple(beta, p["gamma"], r_g)
    elif "tau" in p:
        res = steady_state_delayed(beta, p["tau"], r_g)
    else:
        raise ValueError("model has neither a release rate nor a gripping time")
    out = []
    for name in want:
        if name == "nstar":
            out.append(res.n)
        elif name == "R":
            out.append(collaboration_rate(res.n, beta, r_g))
        elif name == "residual":
            out.append(res.residual)
        else:
            raise ValueError(f"unknown steady observable {name!r}")
    return tuple(out)


def _run_to_trajectory(diagram, t_end, dt, k_steps):
    from .diagram import compile_rhs

    system = compile_rhs(diagram)
    if system.flavor == "ode":
        return integrate(system, t_end=t_end, dt=dt)
    if system.flavor == "dde":
        return integrate_delayed(system, t_end=t_end, dt=dt)
    return iterate_difference(system, k_steps=k_steps)


def sweep(model, param, grid, observables=("nstar", "R"), *, t_end=100.0,
          dt=0.01, k_steps=1000, counter=None, mode="deplete", threshold=None):
    """Evaluate observables over a parameter grid.

    ``model`` is a StateDiagram (the swept name must be one of its
    parameters) or a callable mapping a grid value to a StateDiagram.
    Observables: ``nstar`` and ``R`` use the analytic steady state of the
    stick-pulling models; ``T`` integrates the model and interpolates the
    crossing time of ``counter`` (``deplete``/``reach`` at ``threshold``);
    ``steady:<col>`` averages a settled trajectory column.  Rows that fail
    are recorded with their error message instead of aborting the sweep.
    """
    grid = tuple(float(v) for v in grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("grid must be strictly monotone")
    observables = tuple(observables)

    if callable(model):
        make = model
        provenance = {"model": "<factory>"}
    else:
        def make(value):
            return model.with_params(**{param: value})
        provenance = {"model": model.name, "params": dict(model.params)}
    provenance.update({"observables": list(observables)})

    steady_names = [o for o in observables if o in ("nstar", "R", "residual")]
    rows, errors = [], []
    for value in grid:
        try:
            d = make(value)
            row = {}
            if steady_names:
                vals = _steady_observables(d, steady_names)
                row.update(zip(steady_names, vals))
            needs_traj = [o for o in observables if o not in row]
            if needs_traj:
                traj = _run_to_trajectory(d, t_end, dt, k_steps)
                for o in needs_traj:
                    if o == "T":
                        row[o] = completion_time(traj, counter, mode, threshold)
                    elif o.startswith("steady:"):
                        row[o] = steady_state_of_trajectory(traj, o[7:])
                    elif o.startswith("final:"):
                        row[o] = traj.final()[o[6:]]
                    else:
                        raise ValueError(f"unknown observable {o!r}")
            rows.append(tuple(row[o] for o in observables))
            errors.append(None)
        except Exception as exc:  # failed rows are data, not crashes
            rows.append(tuple(None for _ in observables))
            errors.append(f"{type(exc).__name__}: {exc}")
    return SweepTable(param=param, grid=grid, observables=observables,
                      rows=tuple(rows), errors=tuple(errors),
                      provenance=provenance)
