"""Time integration of the stochastic dynamics in the operator eigenbasis.

The linear part is treated exactly: each eigenmode is an Ornstein-Uhlenbeck
process whose transition kernel we sample directly, so the free dynamics
preserves its Gaussian invariant measure to machine precision and any
invariance-test failure isolates nonlinear-term bias. The Wick drift is
explicit (exponential Euler) and evaluated pseudo-spectrally on a
zero-padded lattice sized by the polynomial degree, which removes aliasing
entirely.

Conventions shared by every stepper: one standard normal vector of length
op.dim is consumed per time step, so trajectories with the same seed are
couplable across schemes; a state whose L2 norm passes 1e6 is declared
blown up.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb, floor, pi

import numpy as np

from .anderson import AndersonOperator, padded_variance_values
from .errors import NumericalError, ValidationError
from .gibbs import GibbsConfig, gff_coefficients
from .grid import Field, chi_symbol
from .noise import as_generator
from .wick import coefficient_tuple, derivative_tuple, eval_f_diamond, hermite

TWO_PI = 2.0 * pi
BLOWUP_NORM = 1.0e6
MAX_STEPS = 10 ** 7
_CACHE_LIMIT = 1 << 25  # floats; larger drift workspaces stream in chunks


@dataclass(frozen=True)
class SimConfig:
    """Step size, horizon, scheme and the potential configuration."""

    dt: float = 5e-4
    t_max: float = 1.0
    scheme: str = "exp_euler"
    cfg: GibbsConfig = field(default_factory=GibbsConfig)
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.t_max > 0:
            raise ValidationError("t_max must be positive")
        if self.scheme != "exp_euler":
            raise ValidationError("unknown scheme %r" % (self.scheme,))
        if self.record_every < 1:
            raise ValidationError("record_every must be at least 1")
        if self.t_max / self.dt > MAX_STEPS:
            raise ValidationError("t_max/dt exceeds %d steps" % MAX_STEPS)

    def n_steps(self) -> int:
        return int(floor(self.t_max / self.dt + 1e-9))


@dataclass
class Trajectory:
    """Recorded time series; halted runs carry the blow-up diagnostics."""

    times: np.ndarray
    snapshots: list
    observables: dict
    seeds: str
    halt_time: float | None = None
    halt_norm: float | None = None

    @property
    def halted(self) -> bool:
        return self.halt_time is not None


def _warn_stiff_dt(op: AndersonOperator, simcfg: SimConfig) -> None:
    limit = 0.1 / op.eigenvalues[-1]
    if simcfg.dt > limit:
        warnings.warn("dt = %g exceeds the recommended 0.1/lambda_max = %g"
                      % (simcfg.dt, limit))


def _linear_weights(op: AndersonOperator, dt: float, noise_scale: float):
    """Exact per-mode OU decay and noise amplitude over one step."""
    lam = op.eigenvalues
    decay = np.exp(-lam * dt)
    amp = noise_scale * np.sqrt(-np.expm1(-2.0 * lam * dt) / lam)
    return decay, amp


def init_stationary_convolution(op: AndersonOperator, rng) -> Field:
    """Stationary marginal of the linear equation, identical in law to the
    free measure: per-mode variance 1/lambda_n. Consumes exactly op.dim
    normals, matching the initial draw inside solve_dpd."""
    return op.synthesize(gff_coefficients(op, rng))


class _Propagator:
    """Precomputed exponential Euler update for one (op, cfg, dt) triple.

    Works on coefficient arrays of shape (..., D) so single trajectories
    and replica batches share the same code. truncated=True inserts the
    compactly supported spectral cutoff on both sides of the drift.
    """

    def __init__(self, op, cfg: GibbsConfig, dt: float, truncated: bool,
                 noise_scale: float = 1.0):
        if truncated and cfg.M is None:
            raise ValidationError("spectral truncation requires cfg.M")
        self.op = op
        self.cfg = cfg
        self.decay, self.amp = _linear_weights(op, dt, noise_scale)
        self.phi = -np.expm1(-op.eigenvalues * dt) / op.eigenvalues
        f_coeffs = derivative_tuple(cfg.poly)
        self.has_drift = any(abs(c) > 0 for c in f_coeffs)
        if not self.has_drift:
            return
        self.poly = coefficient_tuple(cfg.poly)
        pad = max(1, (len(f_coeffs) + 1) // 2)
        self.sigma_sq = padded_variance_values(op, cfg.N, pad)
        m = op.grid.n * pad
        self.cell = (TWO_PI / m) ** 2
        if truncated:
            self.chi = chi_symbol().weights(op.eigenvalues, cfg.M)
            self.active = np.nonzero(self.chi > 0)[0]
        else:
            self.chi = None
            self.active = np.arange(op.dim)
        self.pad = pad
        if len(self.active) * m * m <= _CACHE_LIMIT:
            self.w = op.smoothed_eigenfunction_values(cfg.N, pad)[self.active]
        else:
            self.w = None

    def drift(self, a):
        """Projection <f_diamond(P_N v), P_N phi_n> with v the (truncated)
        state; shape follows the input, zero rows off the active block."""
        a = np.asarray(a, dtype=np.float64)
        if not self.has_drift:
            return np.zeros_like(a)
        scaled = a * self.chi if self.chi is not None else a
        out = np.zeros_like(a)
        if self.w is not None:
            x = scaled[..., self.active] @ self.w
            g = eval_f_diamond(self.poly, x, self.sigma_sq)
            out[..., self.active] = (g @ self.w.T) * self.cell
        else:
            # two passes over the streamed eigenfunction blocks: synthesis,
            # then projection of the nonlinearity
            x = None
            for lo, hi, vals in self.op._smoothed_chunks(self.cfg.N, self.pad):
                part = scaled[..., lo:hi] @ vals
                x = part if x is None else x + part
            g = eval_f_diamond(self.poly, x, self.sigma_sq)
            for lo, hi, vals in self.op._smoothed_chunks(self.cfg.N, self.pad):
                out[..., lo:hi] = (g @ vals.T) * self.cell
        if self.chi is not None:
            out *= self.chi
        return out

    def step(self, a, gen):
        noise = self.amp * gen.standard_normal(np.shape(a))
        if self.has_drift:
            return self.decay * a - self.phi * self.drift(a) + noise
        return self.decay * a + noise


def _one_field_step(op, u, prop, rng):
    gen = as_generator(rng)
    a = prop.step(op.coefficients(u), gen)
    norm = float(np.linalg.norm(a))
    if not np.isfinite(norm) or norm > BLOWUP_NORM:
        raise NumericalError("state norm %.3g exceeds the blow-up bound %.1g"
                             % (norm, BLOWUP_NORM))
    return op.synthesize(a)


def step_ou(op: AndersonOperator, state: Field, dt: float, rng,
            noise_scale: float = 1.0) -> Field:
    """One exact Ornstein-Uhlenbeck transition of every eigenmode.

    noise_scale is a test hook: 0 gives the pure semigroup decay while
    still consuming the step's normal draw, preserving stream alignment.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    gen = as_generator(rng)
    decay, amp = _linear_weights(op, dt, noise_scale)
    a = decay * op.coefficients(state) + amp * gen.standard_normal(op.dim)
    return op.synthesize(a)


def step_full(op: AndersonOperator, u: Field, simcfg: SimConfig, rng,
              noise_scale: float = 1.0) -> Field:
    """One exponential Euler step of the frequency-truncated equation."""
    prop = _Propagator(op, simcfg.cfg, simcfg.dt, truncated=False,
                       noise_scale=noise_scale)
    return _one_field_step(op, u, prop, rng)


def step_finite_dim(op: AndersonOperator, u: Field, simcfg: SimConfig, rng,
                    noise_scale: float = 1.0) -> Field:
    """One step of the doubly truncated SDE; modes outside the compact
    cutoff support feel no drift and evolve as pure OU."""
    prop = _Propagator(op, simcfg.cfg, simcfg.dt, truncated=True,
                       noise_scale=noise_scale)
    return _one_field_step(op, u, prop, rng)


def evolve(op: AndersonOperator, simcfg: SimConfig, u0: Field, rng,
           noise_scale: float = 1.0) -> Trajectory:
    """Integrate from u0, recording every record_every-th step.

    Uses the doubly truncated drift when cfg.M is set, the frequency-only
    drift otherwise. A blow-up halts the run; the truncated trajectory
    records the halt time and norm.
    """
    _warn_stiff_dt(op, simcfg)
    gen = as_generator(rng)
    prop = _Propagator(op, simcfg.cfg, simcfg.dt,
                       truncated=simcfg.cfg.M is not None,
                       noise_scale=noise_scale)
    a = op.coefficients(u0)
    times = [0.0]
    snaps = [op.synthesize(a)]
    norms = [float(np.linalg.norm(a))]
    halt_time = halt_norm = None
    for k in range(1, simcfg.n_steps() + 1):
        a = prop.step(a, gen)
        norm = float(np.linalg.norm(a))
        if not np.isfinite(norm) or norm > BLOWUP_NORM:
            halt_time, halt_norm = k * simcfg.dt, norm
            break
        if k % simcfg.record_every == 0:
            times.append(k * simcfg.dt)
            snaps.append(op.synthesize(a))
            norms.append(norm)
    return Trajectory(times=np.array(times), snapshots=snaps,
                      observables={"l2_norm": np.array(norms)},
                      seeds=repr(rng), halt_time=halt_time,
                      halt_norm=halt_norm)


def evolve_batch(op: AndersonOperator, simcfg: SimConfig, coeffs, rng,
                 noise_scale: float = 1.0):
    """Advance a (replicas, D) coefficient block to t_max in lockstep.

    Returns (final_coeffs, halt) where halt is None or a dict with the
    time, norm and replica index of the first blow-up. One normal block
    per step, so replica r sees a fixed noise path given the seed.
    """
    _warn_stiff_dt(op, simcfg)
    gen = as_generator(rng)
    prop = _Propagator(op, simcfg.cfg, simcfg.dt,
                       truncated=simcfg.cfg.M is not None,
                       noise_scale=noise_scale)
    a = np.array(coeffs, dtype=np.float64)
    for k in range(1, simcfg.n_steps() + 1):
        a = prop.step(a, gen)
        norms = np.linalg.norm(a, axis=-1)
        bad = ~np.isfinite(norms) | (norms > BLOWUP_NORM)
        if np.any(bad):
            idx = int(np.argmax(bad))
            return a, {"time": k * simcfg.dt, "norm": float(norms[idx]),
                       "replica": idx}
    return a, None


def _binomial_drift_values(f_coeffs, x, z, sigma_sq):
    """f_diamond(x + z) expanded around the Gaussian part z: plain powers
    of x times Wick powers of z. Equals eval_f_diamond at x + z."""
    out = np.zeros(np.broadcast(x, z).shape)
    for k, b in enumerate(f_coeffs):
        if b == 0.0:
            continue
        term = np.zeros_like(out)
        for p in range(k + 1):
            term += comb(k, p) * x ** (k - p) * hermite(p, z, sigma_sq)
        out += b * term
    return out


def solve_dpd(op: AndersonOperator, simcfg: SimConfig, u0: Field, rng,
              noise_scale: float = 1.0):
    """Split integration u = (stochastic convolution) + w.

    The convolution part advances by the exact OU transition; w solves the
    remainder equation with the expanded nonlinearity, whose Gaussian Wick
    powers are recomputed from the freshly advanced convolution each step
    instead of being stored as a path. Frequency truncation only; the
    compact cutoff plays no role in the remainder equation. Returns
    (trajectory of u, trajectory of w); a blow-up of w halts both.
    """
    _warn_stiff_dt(op, simcfg)
    cfg = simcfg.cfg
    gen = as_generator(rng)
    loli = gff_coefficients(op, gen)
    w = op.coefficients(u0) - loli
    decay, amp = _linear_weights(op, simcfg.dt, noise_scale)
    phi = -np.expm1(-op.eigenvalues * simcfg.dt) / op.eigenvalues
    f_coeffs = derivative_tuple(cfg.poly)
    has_drift = any(abs(c) > 0 for c in f_coeffs)
    if has_drift:
        pad = max(1, (len(f_coeffs) + 1) // 2)
        sigma_sq = padded_variance_values(op, cfg.N, pad)
        wmat = op.smoothed_eigenfunction_values(cfg.N, pad)
        cell = (TWO_PI / (op.grid.n * pad)) ** 2

    def record(store, t, a):
        store[0].append(t)
        store[1].append(op.synthesize(a))
        store[2].append(float(np.linalg.norm(a)))

    u_store = ([], [], [])
    w_store = ([], [], [])
    record(u_store, 0.0, loli + w)
    record(w_store, 0.0, w)
    halt_time = halt_norm = None
    for k in range(1, simcfg.n_steps() + 1):
        loli = decay * loli + amp * gen.standard_normal(op.dim)
        if has_drift:
            x = w @ wmat
            z = loli @ wmat
            g = _binomial_drift_values(f_coeffs, x, z, sigma_sq)
            w = decay * w - phi * ((wmat @ g) * cell)
        else:
            w = decay * w
        norm = float(np.linalg.norm(w))
        if not np.isfinite(norm) or norm > BLOWUP_NORM:
            halt_time, halt_norm = k * simcfg.dt, norm
            break
        if k % simcfg.record_every == 0:
            record(u_store, k * simcfg.dt, loli + w)
            record(w_store, k * simcfg.dt, w)

    def pack(store):
        return Trajectory(times=np.array(store[0]), snapshots=store[1],
                          observables={"l2_norm": np.array(store[2])},
                          seeds=repr(rng), halt_time=halt_time,
                          halt_norm=halt_norm)

    return pack(u_store), pack(w_store)


def energy_monitor(op: AndersonOperator, trajectory: Trajectory,
                   simcfg: SimConfig) -> np.ndarray:
    """Lyapunov-type series over a recorded remainder trajectory:
    half the squared norm of the sharply projected state plus the leading
    drift coefficient times the running time integral of the (2m)-th power
    of the doubly smoothed state, accumulated trapezoidally."""
    cfg = simcfg.cfg
    if cfg.M is None:
        raise ValidationError("the energy monitor needs cfg.M")
    poly_c = coefficient_tuple(cfg.poly)
    degree = len(poly_c) - 1
    times = np.asarray(trajectory.times, dtype=np.float64)
    coeffs = np.array([op.coefficients(s) for s in trajectory.snapshots])
    proj = op.eigenvalues <= cfg.M ** 2
    psi = 0.5 * np.sum(coeffs[:, proj] ** 2, axis=1)
    if degree < 1:
        return psi
    b_lead = derivative_tuple(cfg.poly)[-1]
    pad = max(1, (degree + 2) // 2)
    cell = (TWO_PI / (op.grid.n * pad)) ** 2
    chi_w = chi_symbol().weights(op.eigenvalues, cfg.M)
    integrand = np.empty(len(times))
    for i, a in enumerate(coeffs):
        vals = op.padded_field_values(a * proj * chi_w, cfg.N, pad)
        integrand[i] = np.sum(vals ** degree) * cell
    acc = 0.0
    for i in range(1, len(times)):
        acc += 0.5 * (integrand[i] + integrand[i - 1]) * (times[i] - times[i - 1])
        psi[i] += b_lead * acc
    return psi


def path_diagnostic(op: AndersonOperator, trajectory: Trajectory,
                    eps: float = 0.5, sigma: float = 1.0) -> float:
    """Qualitative solution-space norm: sup over recorded t > 0 of
    t^{(sigma+eps)/2} times the operator Sobolev norm of order sigma."""
    from .anderson import dH_norm
    best = 0.0
    for t, snap in zip(trajectory.times, trajectory.snapshots):
        if t <= 0:
            continue
        best = max(best, t ** (0.5 * (sigma + eps)) * dH_norm(op, snap, sigma))
    return best
