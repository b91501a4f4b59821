"""Generator-based control with per-input linear surrogates.

For each admissible constant input u the generator of the controlled system
is estimated once; the lifted state z = psi(x) then evolves by the linear
system z' = M_u z.  Model predictive control searches exhaustively over
short input sequences, and switching-time optimization tunes the times at
which a fixed cyclic input sequence switches.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .dictionaries import Dictionary, evaluate
from .errors import ConfigError, InputError, StabilityError
from .generator import (
    DEFAULT_SVD_CUTOFF,
    GeneratorEstimate,
    gedmd_deterministic,
    gedmd_stochastic,
)
from .models import SampleSet, _rng

__all__ = [
    "SurrogateFamily",
    "fit_surrogates",
    "predict",
    "ControlProblem",
    "MpcResult",
    "mpc",
    "SwitchingSchedule",
    "sto_objective_and_gradient",
    "switching_time_optimize",
    "schedule_input",
    "schedule_trajectory",
    "ControlledOUPlant",
    "BurgersPlant",
]

MAX_MPC_HORIZON = 6  # exhaustive search grows as n_c**q; keep it exact and cheap


@dataclass
class SurrogateFamily:
    """Per-input surrogate matrices sharing one dictionary.

    Attributes
    ----------
    inputs : tuple of float
        The admissible constant inputs u^1 ... u^{n_c}.
    matrices : (n_c, n, n) ndarray
        M_u per input; the lifted state evolves as z' = M_u z.
    dictionary : Dictionary
    readout : (r, n) ndarray
        Rows extracting the tracked observables from z.
    estimates : tuple of GeneratorEstimate
    """

    inputs: tuple
    matrices: np.ndarray
    dictionary: Dictionary = field(repr=False)
    readout: np.ndarray = field(repr=False)
    estimates: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self._propagators: dict = {}

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def size(self) -> int:
        return self.matrices.shape[1]

    def lift(self, points) -> np.ndarray:
        """psi(x) per point, shape (m, n)."""
        return evaluate(self.dictionary, points).values.T

    def propagator(self, index: int, dt: float) -> np.ndarray:
        """expm(M_u dt), cached per (input index, dt)."""
        key = (int(index), float(dt))
        if key not in self._propagators:
            self._propagators[key] = scipy.linalg.expm(self.matrices[index] * dt)
        return self._propagators[key]


def fit_surrogates(
    dictionary: Dictionary,
    inputs,
    samples,
    *,
    readout: np.ndarray | None = None,
    svd_cutoff: float = DEFAULT_SVD_CUTOFF,
) -> SurrogateFamily:
    """Estimate one generator matrix per admissible input.

    Parameters
    ----------
    dictionary : Dictionary
    inputs : sequence of float
    samples : sequence of SampleSet
        Training data per input, aligned with ``inputs``; stochastic
        estimation is used when diffusion data is present.
    readout : (r, n) ndarray, optional
        Defaults to the transpose of the full-state selector, so the
        tracked observables are the state coordinates.
    """
    if len(inputs) != len(samples):
        raise InputError(f"{len(inputs)} inputs but {len(samples)} sample sets")
    estimates = []
    for sample in samples:
        if sample.diffusion_samples is not None:
            estimates.append(gedmd_stochastic(dictionary, sample, svd_cutoff=svd_cutoff))
        else:
            estimates.append(gedmd_deterministic(dictionary, sample, svd_cutoff=svd_cutoff))
    if readout is None:
        readout = dictionary.full_state_selector().T
    return SurrogateFamily(
        inputs=tuple(float(u) for u in inputs),
        matrices=np.stack([est.M for est in estimates]),
        dictionary=dictionary,
        readout=np.asarray(readout, dtype=float),
        estimates=tuple(estimates),
    )


def predict(family: SurrogateFamily, index: int, z0, T: float, dt: float):
    """Evolve the lifted state under one input by matrix exponentials.

    Returns
    -------
    times : (steps + 1,) ndarray
    trajectory : (steps + 1, n) ndarray
    """
    if dt <= 0:
        raise InputError("dt must be positive")
    steps = int(round(T / dt))
    E = family.propagator(index, dt)
    out = np.empty((steps + 1, family.size))
    out[0] = np.asarray(z0, dtype=float)
    for k in range(steps):
        out[k + 1] = E @ out[k]
    return np.arange(steps + 1) * dt, out


# ---------------------------------------------------------------------------
# model predictive control


@dataclass(frozen=True)
class ControlProblem:
    """Tracking problem: follow a readout reference over a horizon.

    The stage cost at time t is ||C z - r(t)||^2 + alpha u^2, with C the
    surrogate family's readout rows and r the reference.

    Attributes
    ----------
    surrogates : SurrogateFamily
    reference : callable t -> (r,) array
    horizon : (t0, te)
    h : float
        Control step; one input is held constant per step.
    q : int
        Prediction-horizon length in steps (at most 6; the exhaustive
        search over input sequences has n_c**q branches).
    alpha : float
        Input penalty weight.
    reference_derivative : callable, optional
        dr/dt, needed by switching-time optimization.
    """

    surrogates: SurrogateFamily
    reference: callable = field(repr=False)
    horizon: tuple
    h: float
    q: int = 3
    alpha: float = 0.0
    reference_derivative: callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigError("control step h must be positive")
        if self.horizon[1] <= self.horizon[0]:
            raise ConfigError("horizon must have positive length")
        if self.alpha < 0:
            raise ConfigError("input penalty must be >= 0")


@dataclass(frozen=True)
class MpcResult:
    """Closed-loop record: states, applied inputs, and realized stage costs.

    Arrays keep a leading realization axis only when the initial state had
    one; ``states`` has one more time entry than ``inputs``.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    stage_costs: np.ndarray
    references: np.ndarray


def _sequence_costs(problem: ControlProblem, z: np.ndarray, t: float) -> np.ndarray:
    """Predicted cost of every input sequence of length q from lifted states z.

    Returns an (n_c**q, R) array; sequences are enumerated in
    itertools.product order over input indices.
    """
    fam = problem.surrogates
    C = fam.readout
    n_c = fam.n_inputs
    q = problem.q
    E = [fam.propagator(i, problem.h) for i in range(n_c)]
    refs = [np.atleast_1d(problem.reference(t + (j + 1) * problem.h)) for j in range(q)]
    # depth-first over the sequence tree, sharing prefix propagations
    costs = np.empty((n_c**q, z.shape[0]))
    row = 0

    def descend(depth, z_cur, acc):
        nonlocal row
        if depth == q:
            costs[row] = acc
            row += 1
            return
        for i in range(n_c):
            z_next = z_cur @ E[i].T
            err = z_next @ C.T - refs[depth]
            stage = np.einsum("lr,lr->l", err, err) + problem.alpha * fam.inputs[i] ** 2
            descend(depth + 1, z_next, acc + stage)

    descend(0, z, np.zeros(z.shape[0]))
    return costs


def mpc(problem: ControlProblem, plant, x0, *, seed=None) -> MpcResult:
    """Closed-loop model predictive control against a plant.

    At every step of length h the exhaustive search picks the input sequence
    of length q minimizing the predicted cost, the first input is applied to
    the plant, and the lifted state is re-initialized from the plant: for
    stochastic plants as the dictionary average over the sub-states of the
    last step (the recent window of length h), for deterministic plants from
    the current state.

    Parameters
    ----------
    problem : ControlProblem
    plant : object
        Needs ``advance(states, u, h, rng) -> (new_states, window)`` with
        vectorized states (R, d) and window (R, k, d), plus a
        ``stochastic`` attribute.
    x0 : (d,) or (R, d) array_like
        Initial state; a leading axis runs independent closed loops.
    seed : optional
        Drives the plant noise, if any.
    """
    fam = problem.surrogates
    n_c = fam.n_inputs
    if problem.q > MAX_MPC_HORIZON:
        raise ConfigError(
            f"prediction horizon q={problem.q} exceeds {MAX_MPC_HORIZON}; "
            f"the exhaustive search would enumerate {n_c**problem.q} sequences"
        )
    x0 = np.asarray(x0, dtype=float)
    batched = x0.ndim == 2
    states = x0 if batched else x0[np.newaxis, :]
    R = states.shape[0]
    t0, te = problem.horizon
    steps = int(round((te - t0) / problem.h))
    rng = _rng(seed)

    first_inputs = np.array(
        [seq[0] for seq in itertools.product(range(n_c), repeat=problem.q)]
    )
    traj = np.empty((steps + 1, R, states.shape[1]))
    traj[0] = states
    applied = np.empty((steps, R))
    stage = np.empty((steps, R))
    refs = []
    z = fam.lift(states)
    inputs_arr = np.asarray(fam.inputs)
    for k in range(steps):
        t = t0 + k * problem.h
        costs = _sequence_costs(problem, z, t)
        choice = first_inputs[np.argmin(costs, axis=0)]
        u = inputs_arr[choice]
        states, window = plant.advance(states, u, problem.h, rng)
        traj[k + 1] = states
        applied[k] = u
        r_next = np.atleast_1d(problem.reference(t + problem.h))
        refs.append(r_next)
        y = fam.lift(states) @ fam.readout.T
        err = y - r_next
        stage[k] = np.einsum("lr,lr->l", err, err) + problem.alpha * u**2
        if getattr(plant, "stochastic", False):
            flat = window.reshape(-1, window.shape[-1])
            z = fam.lift(flat).reshape(R, window.shape[1], fam.size).mean(axis=1)
        else:
            z = fam.lift(states)
    if not batched:
        traj = traj[:, 0]
        applied = applied[:, 0]
        stage = stage[:, 0]
    return MpcResult(
        times=t0 + np.arange(steps + 1) * problem.h,
        states=traj,
        inputs=applied,
        stage_costs=stage,
        references=np.array(refs),
    )


# ---------------------------------------------------------------------------
# switching-time optimization


@dataclass(frozen=True)
class SwitchingSchedule:
    """Switch times for a cyclic input sequence.

    ``times[0]`` is the horizon start; segment j runs over
    [times[j], times[j+1]] (the last segment ends at the horizon end) and
    uses input index j mod n_c.
    """

    times: np.ndarray
    horizon: tuple
    n_inputs: int
    objective: float | None = None
    converged: bool = True

    @property
    def p(self) -> int:
        return self.times.shape[0] - 1

    def boundaries(self) -> np.ndarray:
        """All segment boundaries including the horizon end."""
        return np.concatenate([self.times, [self.horizon[1]]])

    def input_index(self, j: int) -> int:
        return j % self.n_inputs

    def validate(self):
        t0, te = self.horizon
        if self.times[0] != t0:
            raise InputError("schedule must start at the horizon start")
        if np.any(np.diff(self.boundaries()) < 0):
            raise InputError("switch times must be nondecreasing within the horizon")

    def to_list(self) -> list:
        return [float(t) for t in self.times]


def _trapezoid_weights(k: int) -> np.ndarray:
    w = np.ones(k + 1)
    w[0] = w[-1] = 0.5
    return w


def sto_objective_and_gradient(
    problem: ControlProblem, z0, tau, *, sub_intervals: int = 4
):
    """Tracking objective of a switching schedule and its exact gradient.

    The integral of ||C z(t) - r(t)||^2 over the horizon is discretized by
    the trapezoid rule on ``sub_intervals`` panels per segment; the gradient
    with respect to the free switch times tau_1..tau_p is the exact
    derivative of that discretization, computed with forward sensitivities.
    Requires ``problem.reference_derivative``.

    Parameters
    ----------
    problem : ControlProblem
    z0 : (n,) array_like
        Lifted initial state.
    tau : (p,) array_like
        Nondecreasing interior switch times.

    Returns
    -------
    objective : float
    gradient : (p,) ndarray
    """
    if problem.reference_derivative is None:
        raise InputError("switching-time optimization needs reference_derivative")
    fam = problem.surrogates
    C = fam.readout
    t0, te = problem.horizon
    tau = np.asarray(tau, dtype=float)
    p = tau.shape[0]
    K = int(sub_intervals)
    w = _trapezoid_weights(K)
    bounds = np.concatenate([[t0], tau, [te]])
    z = np.asarray(z0, dtype=float).copy()
    S = np.zeros((z.shape[0], p))  # sensitivities dz/dtau_l at segment starts
    J = 0.0
    grad = np.zeros(p)
    for j in range(p + 1):
        left, right = bounds[j], bounds[j + 1]
        li, ri = j - 1, j  # free-variable indices of the boundaries (-1/p = fixed)
        delta = right - left
        M = fam.matrices[j % fam.n_inputs]
        u = fam.inputs[j % fam.n_inputs]
        F = scipy.linalg.expm(M * (delta / K))
        zk = z
        g_sum = 0.0  # sum of w_k g_k
        bnd_l = 0.0
        bnd_r = 0.0
        cotangents = []
        for k in range(K + 1):
            if k > 0:
                zk = F @ zk
            frac = k / K
            t_k = left + frac * delta
            err = C @ zk - np.atleast_1d(problem.reference(t_k))
            g_sum += w[k] * (err @ err)
            ce = 2.0 * w[k] * (C.T @ err)
            cotangents.append(ce)
            mz = ce @ (M @ zk)
            rdot = 2.0 * w[k] * (err @ np.atleast_1d(problem.reference_derivative(t_k)))
            bnd_l += -frac * mz - (1.0 - frac) * rdot
            bnd_r += frac * mz - frac * rdot
        # state channel v = sum_k (F^T)^k c_k, assembled Horner-style
        v = cotangents[-1]
        for ce in reversed(cotangents[:-1]):
            v = F.T @ v + ce
        J += (delta / K) * g_sum + problem.alpha * u**2 * delta
        if li >= 0:
            grad[li] += -(1.0 / K) * g_sum + (delta / K) * bnd_l
            grad[li] += -problem.alpha * u**2
        if ri < p:
            grad[ri] += (1.0 / K) * g_sum + (delta / K) * bnd_r
            grad[ri] += problem.alpha * u**2
        if p:
            grad += (delta / K) * (S.T @ v)
        # advance the segment: z_{j+1} = F^K z_j and sensitivity update
        E = np.linalg.matrix_power(F, K)
        z_next = E @ z
        S = E @ S
        if li >= 0:
            S[:, li] += -(M @ z_next)
        if ri < p:
            S[:, ri] += M @ z_next
        z = z_next
    return float(J), grad


def _project_schedule(tau: np.ndarray, t0: float, te: float) -> np.ndarray:
    iso = scipy.optimize.isotonic_regression(tau).x
    return np.clip(iso, t0, te)


def switching_time_optimize(
    problem: ControlProblem,
    p: int,
    initial_schedule=None,
    *,
    x0,
    sub_intervals: int = 4,
    max_iter: int = 300,
    tol: float = 1e-9,
) -> SwitchingSchedule:
    """Optimize the switch times of a cyclic input sequence.

    Projected gradient descent with Barzilai-Borwein steps and backtracking;
    the projection (isotonic regression, then clipping to the horizon) keeps
    every iterate a feasible nondecreasing schedule.

    Parameters
    ----------
    problem : ControlProblem
        Must carry ``reference_derivative``.
    p : int
        Number of passes through the cyclic input sequence; the schedule
        carries ``n_inputs * p`` free switch times.
    initial_schedule : (n_inputs * p,) array_like, optional
        Defaults to a uniform grid over the horizon.
    x0 : (d,) array_like
        Plant initial state, lifted through the dictionary.

    Warns
    -----
    UserWarning
        If not converged after ``max_iter`` iterations; the best-found
        schedule is returned with ``converged=False``.
    """
    if p < 1:
        raise ConfigError("need at least one pass through the input sequence")
    t0, te = problem.horizon
    n_free = problem.surrogates.n_inputs * p
    z0 = problem.surrogates.lift(np.asarray(x0, dtype=float)[np.newaxis, :])[0]
    if initial_schedule is None:
        tau = np.linspace(t0, te, n_free + 2)[1:-1]
    else:
        tau = np.asarray(initial_schedule, dtype=float)
        if tau.shape != (n_free,):
            raise InputError(
                f"initial schedule must have {n_free} switch times, got {tau.shape}"
            )
        tau = _project_schedule(tau, t0, te)
    J, g = sto_objective_and_gradient(problem, z0, tau, sub_intervals=sub_intervals)
    best = (J, tau.copy())
    step = 0.1 * (te - t0) / (n_free * max(np.abs(g).max(), 1e-12))
    converged = False
    for _ in range(max_iter):
        improved = False
        s = step
        for _ in range(40):
            cand = _project_schedule(tau - s * g, t0, te)
            Jc, gc = sto_objective_and_gradient(
                problem, z0, cand, sub_intervals=sub_intervals
            )
            if Jc < J - 1e-10 * abs(J):
                improved = True
                break
            s *= 0.5
        if not improved:
            converged = True
            break
        d_tau = cand - tau
        d_g = gc - g
        tau, J, g = cand, Jc, gc
        if J < best[0]:
            best = (J, tau.copy())
        denom = d_g @ d_g
        step = abs(d_tau @ d_g) / denom if denom > 0 else s
        if not np.isfinite(step) or step <= 0:
            step = s
        if np.abs(d_tau).max() <= tol * (te - t0):
            converged = True
            break
    if not converged:
        warnings.warn(
            f"switching-time optimization did not converge in {max_iter} "
            "iterations; returning the best schedule found",
            stacklevel=2,
        )
    J_best, tau_best = best
    return SwitchingSchedule(
        times=np.concatenate([[t0], tau_best]),
        horizon=(t0, te),
        n_inputs=problem.surrogates.n_inputs,
        objective=J_best,
        converged=converged,
    )


def schedule_input(schedule: SwitchingSchedule, t: float) -> int:
    """Input index active at time t under a switching schedule."""
    b = schedule.boundaries()
    j = int(np.searchsorted(b, t, side="right") - 1)
    return schedule.input_index(min(max(j, 0), schedule.p))


def schedule_trajectory(
    family: SurrogateFamily, schedule: SwitchingSchedule, z0, dt: float
):
    """Lifted open-loop trajectory under a switching schedule.

    Sampled on the uniform grid t0, t0+dt, ...; switch times falling inside
    a sampling step are honored exactly by splitting the step at every
    boundary, so sub-grid switching is not quantized away.

    Returns (times, trajectory (steps+1, n)).
    """
    t0, te = schedule.horizon
    bounds = schedule.boundaries()
    steps = int(round((te - t0) / dt))
    times = t0 + np.arange(steps + 1) * dt
    out = np.empty((steps + 1, family.size))
    z = np.asarray(z0, dtype=float).copy()
    out[0] = z
    seg = 0
    t = t0
    for k in range(steps):
        target = times[k + 1]
        while t < target - 1e-12:
            while seg < schedule.p and bounds[seg + 1] <= t + 1e-12:
                seg += 1
            stop = min(target, bounds[seg + 1])
            if stop > t:
                z = family.propagator(schedule.input_index(seg), stop - t) @ z
                t = stop
        out[k + 1] = z
        t = target
    return times, out


# ---------------------------------------------------------------------------
# ground-truth plants


@dataclass
class ControlledOUPlant:
    """dX = -alpha (X - u) dt + sqrt(2/beta) dW; the input shifts the mean.

    With ``noise=False`` the plant is the deterministic relaxation ODE.
    """

    alpha: float = 1.0
    beta: float = 2.0
    dt: float = 0.005
    noise: bool = True

    dimension = 1

    @property
    def stochastic(self) -> bool:
        return self.noise

    def drift(self, x: np.ndarray, u) -> np.ndarray:
        u_col = np.reshape(u, (-1, 1)) if np.ndim(u) else u
        return -self.alpha * (x - u_col)

    def advance(self, states, u, h, rng):
        """Euler-Maruyama sub-steps; returns (new_states, window (R, k, 1))."""
        x = np.asarray(states, dtype=float)
        nsub = max(1, int(round(h / self.dt)))
        dt = h / nsub
        amp = np.sqrt(2.0 / self.beta * dt) if self.noise else 0.0
        u_col = np.broadcast_to(np.asarray(u, dtype=float), (x.shape[0],))[:, None]
        window = np.empty((x.shape[0], nsub, 1))
        for k in range(nsub):
            x = x + (-self.alpha * (x - u_col)) * dt
            if self.noise:
                x = x + amp * rng.standard_normal(x.shape)
            window[:, k, :] = x
        return x, window

    def sample_set(self, u: float, box, m: int, seed) -> SampleSet:
        """Exact training data for the constant-input system."""
        from .models import sample_uniform

        points = sample_uniform(box, m, seed=seed)
        drift = -self.alpha * (points - u)
        if not self.noise:
            return SampleSet(
                points=points, drift_samples=drift, source="exact",
                measure_note=f"uniform box, input u={u}",
            )
        a = np.full((m, 1, 1), 2.0 / self.beta)
        return SampleSet(
            points=points, drift_samples=drift, diffusion_samples=a,
            source="exact", measure_note=f"uniform box, input u={u}",
        )

    def simulate_switched(
        self, x0: float, inputs, schedule: SwitchingSchedule, dt: float,
        realizations: int, seed,
    ) -> np.ndarray:
        """Realizations under a switching schedule, sampled every dt.

        Uses the exact Gaussian transition of the constant-input process on
        each sub-interval, splitting steps at the switch times, so neither
        the integrator nor input quantization biases the paths.

        Returns an (steps + 1, realizations) array of states.
        """
        t0, te = schedule.horizon
        bounds = schedule.boundaries()
        steps = int(round((te - t0) / dt))
        times = t0 + np.arange(steps + 1) * dt
        rng = _rng(seed)
        x = np.full(realizations, float(x0))
        out = np.empty((steps + 1, realizations))
        out[0] = x
        seg = 0
        t = t0
        for k in range(steps):
            target = times[k + 1]
            while t < target - 1e-12:
                while seg < schedule.p and bounds[seg + 1] <= t + 1e-12:
                    seg += 1
                stop = min(target, bounds[seg + 1])
                if stop > t:
                    u = inputs[schedule.input_index(seg)]
                    decay = np.exp(-self.alpha * (stop - t))
                    x = u + (x - u) * decay
                    if self.noise:
                        std = np.sqrt(
                            (1.0 - decay**2) / (self.alpha * self.beta)
                        )
                        x = x + std * rng.standard_normal(realizations)
                    t = stop
            out[k + 1] = x
            t = target
        return out


class BurgersPlant:
    """Viscous 1D Burgers flow on a periodic grid with a bump-shaped input.

    y' = nu y_xx - y y_x + u(t) chi(x) on [0, 1) with ``nodes`` equidistant
    points, central differences, and classic fourth-order Runge-Kutta in
    time.  chi is a Gaussian bump of unit amplitude centered mid-domain with
    width an eighth of the domain.
    """

    stochastic = False

    def __init__(self, nu: float = 0.05, nodes: int = 25, dt: float = 0.005):
        self.nu = float(nu)
        self.nodes = int(nodes)
        self.dt = float(dt)
        self.length = 1.0
        self.grid = np.arange(self.nodes) * (self.length / self.nodes)
        self.spacing = self.length / self.nodes
        width = self.length / 8.0
        self.chi = np.exp(-0.5 * ((self.grid - 0.5 * self.length) / width) ** 2)
        self.dimension = self.nodes

    def check_stability(self, dt: float, y: np.ndarray):
        """Explicit-step bound: diffusion plus advection rates must fit."""
        rate = 4.0 * self.nu / self.spacing**2 + 2.0 * np.abs(y).max() / self.spacing
        if dt * rate > 2.5:
            raise StabilityError(
                f"time step {dt} violates the stability bound "
                f"{2.5 / rate:.3e} for the current state"
            )

    def rhs(self, y: np.ndarray, u) -> np.ndarray:
        """Semi-discretized right-hand side; vectorized over (R, nodes)."""
        up = np.roll(y, -1, axis=-1)
        dn = np.roll(y, 1, axis=-1)
        lap = (up - 2.0 * y + dn) / self.spacing**2
        adv = y * (up - dn) / (2.0 * self.spacing)
        force = np.multiply.outer(np.asarray(u, dtype=float), self.chi) if np.ndim(u) else u * self.chi
        return self.nu * lap - adv + force

    def _rk4(self, y: np.ndarray, u, dt: float) -> np.ndarray:
        k1 = self.rhs(y, u)
        k2 = self.rhs(y + 0.5 * dt * k1, u)
        k3 = self.rhs(y + 0.5 * dt * k2, u)
        k4 = self.rhs(y + dt * k3, u)
        return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def advance(self, states, u, h, rng=None):
        y = np.asarray(states, dtype=float)
        nsub = max(1, int(round(h / self.dt)))
        dt = h / nsub
        self.check_stability(dt, y)
        for _ in range(nsub):
            y = self._rk4(y, u, dt)
        return y, y[:, np.newaxis, :]

    def simulate(self, y0, input_fn, T: float, dt: float | None = None):
        """Trajectory under u = input_fn(t); returns (times, states)."""
        dt = self.dt if dt is None else float(dt)
        steps = int(round(T / dt))
        out = np.empty((steps + 1, self.nodes))
        out[0] = np.asarray(y0, dtype=float)
        for k in range(steps):
            self.check_stability(dt, out[k])
            out[k + 1] = self._rk4(out[k], float(input_fn(k * dt)), dt)
        return np.arange(steps + 1) * dt, out

    def energy(self, y: np.ndarray) -> np.ndarray:
        """Discrete energy 1/2 sum y^2 dx along a trajectory."""
        return 0.5 * np.sum(np.asarray(y) ** 2, axis=-1) * self.spacing

    def random_states(
        self, count: int, seed, amplitude: float = 0.1, modes: int | None = None
    ):
        """Smooth random fields: superposed sine/cosine modes, 1/k decay.

        The default mode count spans the whole grid space, so dictionary
        value matrices over these states have full rank.
        """
        rng = _rng(seed)
        if modes is None:
            modes = self.nodes // 2
        theta = 2.0 * np.pi * self.grid / self.length
        y = np.zeros((count, self.nodes))
        for k in range(1, modes + 1):
            coeff = amplitude * rng.standard_normal((count, 2)) / k
            y += coeff[:, :1] * np.sin(k * theta) + coeff[:, 1:] * np.cos(k * theta)
        y += amplitude * rng.standard_normal((count, 1)) * 0.5  # mean offsets
        return y

    def sample_set(self, u: float, m: int, seed, amplitude: float = 0.1) -> SampleSet:
        """Exact drift data at random smooth states for a constant input."""
        y = self.random_states(m, seed, amplitude=amplitude)
        return SampleSet(
            points=y,
            drift_samples=self.rhs(y, u),
            source="exact",
            measure_note=f"random smooth fields, input u={u}",
        )
