"""Gaussian reference measure and Wick-renormalized Gibbs measures.

The reference measure is the centered Gaussian with covariance H^{-1},
sampled exactly in the eigenbasis. Gibbs measures reweight it by
exp(-energy) where energy is the integrated Wick potential; two samplers
are provided, self-normalized importance sampling (exact, for small
systems and as an oracle) and a preconditioned Crank-Nicolson chain whose
acceptance ratio involves only the potential.

All quadrature of the polynomial potential happens on a zero-padded
lattice sized by the polynomial degree, so energies are exact integrals
of band-limited integrands rather than aliased grid sums.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .anderson import AndersonOperator, padded_variance_values
from .errors import NumericalError, ValidationError
from .grid import Field, chi_symbol, pad_coefficients, psi_symbol, to_fourier
from .noise import as_generator
from .wick import coefficient_tuple, eval_F_diamond

TWO_PI = 2.0 * pi
ENERGY_UNDERFLOW = -700.0
_CACHE_LIMIT = 1 << 25  # floats; above this the energy path streams FFTs


@dataclass(frozen=True)
class GibbsConfig:
    """Potential and smoothing parameters of a truncated Gibbs measure.

    poly is a WickPolynomial (production), None (free measure), or a bare
    coefficient tuple for degenerate diagnostics. N sets the frequency
    smoothing of the potential; M, when present, inserts the compactly
    supported spectral cutoff so the interacting block is the finite set
    of eigenmodes with lambda_n < M^2.
    """

    poly: object = None
    N: float = 8.0
    M: float | None = None
    sampler: str = "importance"
    beta: float = 0.2
    burn_in: int = 2000
    thin: int = 10

    def __post_init__(self):
        coefficient_tuple(self.poly)  # validates degenerate forms early
        if not self.N >= 1:
            raise ValidationError("N must be at least 1")
        if self.M is not None and not self.M > 0:
            raise ValidationError("M must be positive when present")
        if self.sampler not in ("importance", "pcn"):
            raise ValidationError("sampler must be 'importance' or 'pcn', got %r"
                                  % (self.sampler,))
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError("pcn beta must be in (0, 1]")
        if self.burn_in < 0 or self.thin < 1:
            raise ValidationError("burn_in must be >= 0 and thin >= 1")


@dataclass
class SampleBatch:
    """Samples plus the bookkeeping needed to weight and audit them."""

    fields: list
    weights: np.ndarray
    acceptance_rate: float | None
    ess: float
    provenance: dict = field(default_factory=dict)


def _check_truncation(op: AndersonOperator, cfg: GibbsConfig) -> None:
    if cfg.M is not None and cfg.M ** 2 > op.eigenvalues[-1]:
        raise ValidationError(
            "M^2 = %g exceeds the top eigenvalue %g; the cutoff is degenerate"
            % (cfg.M ** 2, op.eigenvalues[-1]))


def pad_factor_for(poly) -> int:
    """Zero-padding factor ceil((deg + 1) / 2) for exact quadrature."""
    deg = len(coefficient_tuple(poly)) - 1
    return max(1, (deg + 2) // 2)


def gff_coefficients(op: AndersonOperator, rng, size: int | None = None):
    """Eigenbasis coefficients of free-field draws: gamma_n / sqrt(lambda_n)."""
    gen = as_generator(rng)
    shape = op.dim if size is None else (size, op.dim)
    return gen.standard_normal(shape) / np.sqrt(op.eigenvalues)


def sample_gff(op: AndersonOperator, rng) -> Field:
    """One draw of the Gaussian field with covariance H^{-1}."""
    return op.synthesize(gff_coefficients(op, rng))


def _energy_batch(op: AndersonOperator, cfg: GibbsConfig,
                  coeffs: np.ndarray) -> np.ndarray:
    """Energies of span fields given as eigen-coefficient rows, exactly."""
    a = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    poly_c = coefficient_tuple(cfg.poly)
    if len(poly_c) == 1:
        return np.full(a.shape[0], poly_c[0] * TWO_PI ** 2)
    pad = pad_factor_for(cfg.poly)
    sigma_sq = padded_variance_values(op, cfg.N, pad)
    cell = (TWO_PI / (op.grid.n * pad)) ** 2
    if cfg.M is not None:
        chi_w = chi_symbol().weights(op.eigenvalues, cfg.M)
        a = a * chi_w[None, :]
        active = np.nonzero(chi_w > 0)[0]
    else:
        active = np.arange(op.dim)
    out = np.empty(a.shape[0])
    m2 = sigma_sq.size
    if len(active) * m2 <= _CACHE_LIMIT:
        w = op.smoothed_eigenfunction_values(cfg.N, pad)[active]
        block = max(1, (1 << 24) // m2)
        for lo in range(0, a.shape[0], block):
            hi = min(lo + block, a.shape[0])
            x = a[lo:hi, active] @ w
            out[lo:hi] = eval_F_diamond(poly_c, x,
                                        sigma_sq[None, :]).sum(axis=1) * cell
    else:
        for i in range(a.shape[0]):
            x = op.padded_field_values(a[i], cfg.N, pad)
            out[i] = np.sum(eval_F_diamond(poly_c, x, sigma_sq)) * cell
    return out


def energy(op: AndersonOperator, cfg: GibbsConfig, u: Field) -> float:
    """Integrated Wick potential of the smoothed field.

    Fields inside the Galerkin span take the batched coefficient route;
    with no spectral truncation, arbitrary band-limited fields go through
    their full Fourier expansion so nothing outside the span is dropped.
    """
    _check_truncation(op, cfg)
    poly_c = coefficient_tuple(cfg.poly)
    if len(poly_c) == 1:
        return float(poly_c[0] * TWO_PI ** 2)
    if cfg.M is not None:
        return float(_energy_batch(op, cfg, op.coefficients(u)[None, :])[0])
    pad = pad_factor_for(cfg.poly)
    m = op.grid.n * pad
    c = pad_coefficients(to_fourier(u), pad)
    freq_sq = np.fft.fftfreq(m, 1.0 / m).astype(np.int64) ** 2
    lam = (freq_sq[:, None] + freq_sq[None, :]).astype(np.float64)
    c *= psi_symbol().weights(lam, float(cfg.N))
    x = (np.fft.ifft2(c).real * m ** 2).ravel()
    sigma_sq = padded_variance_values(op, cfg.N, pad)
    cell = (TWO_PI / m) ** 2
    return float(np.sum(eval_F_diamond(poly_c, x, sigma_sq)) * cell)


def estimate_partition(op: AndersonOperator, cfg: GibbsConfig,
                       n_samples: int, rng):
    """Monte Carlo mean and standard error of exp(-energy) over free draws."""
    if n_samples < 100:
        raise ValidationError("n_samples must be at least 100")
    _check_truncation(op, cfg)
    gen = as_generator(rng)
    coeffs = gff_coefficients(op, gen, n_samples)
    e = _energy_batch(op, cfg, coeffs)
    if np.min(e) < ENERGY_UNDERFLOW:
        raise NumericalError(
            "energy %.3g underflows exp(-energy); partition estimate invalid"
            % np.min(e))
    w = np.exp(-e)
    z = float(np.mean(w))
    stderr = float(np.std(w, ddof=1) / np.sqrt(n_samples))
    return z, stderr


def _pcn_chain(op, cfg, n_samples, gen):
    lam_sqrt = np.sqrt(op.eigenvalues)
    state = gen.standard_normal(op.dim) / lam_sqrt
    e_state = _energy_batch(op, cfg, state[None, :])[0]
    root = np.sqrt(1.0 - cfg.beta ** 2)
    total = cfg.burn_in + n_samples * cfg.thin
    kept = np.empty((n_samples, op.dim))
    n_kept = 0
    accepted = 0
    after_burn = 0
    for step in range(total):
        prop = root * state + cfg.beta * (gen.standard_normal(op.dim) / lam_sqrt)
        e_prop = _energy_batch(op, cfg, prop[None, :])[0]
        take = np.log(gen.random()) < e_state - e_prop
        if take:
            state, e_state = prop, e_prop
        if step >= cfg.burn_in:
            after_burn += 1
            accepted += int(take)
            if (step - cfg.burn_in) % cfg.thin == cfg.thin - 1:
                kept[n_kept] = state
                n_kept += 1
    rate = accepted / max(1, after_burn)
    if not 0.05 <= rate <= 0.95:
        warnings.warn("pcn acceptance rate %.3f outside [0.05, 0.95]; "
                      "retune beta" % rate)
    return kept[:n_kept], rate


def sample_gibbs_coefficients(op: AndersonOperator, cfg: GibbsConfig,
                              n_samples: int, rng):
    """Coefficient-space sampler: (coeffs, weights, acceptance_rate, ess).

    The workhorse behind sample_gibbs, exposed for pipelines that stay in
    the eigenbasis (batched dynamics, verification suites).
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be positive")
    _check_truncation(op, cfg)
    gen = as_generator(rng)
    if cfg.sampler == "importance":
        coeffs = gff_coefficients(op, gen, n_samples)
        e = _energy_batch(op, cfg, coeffs)
        if np.min(e) < ENERGY_UNDERFLOW:
            raise NumericalError("energy %.3g underflows the importance weight"
                                 % np.min(e))
        w = np.exp(-e)
        zhat = np.mean(w)
        if not zhat > 0:
            raise NumericalError("all importance weights vanished")
        weights = w / zhat
        ess = float(np.sum(w) ** 2 / np.sum(w ** 2))
        rate = None
    else:
        coeffs, rate = _pcn_chain(op, cfg, n_samples, gen)
        weights = np.ones(len(coeffs))
        ess = float(len(coeffs))
    return coeffs, weights, rate, ess


def sample_gibbs(op: AndersonOperator, cfg: GibbsConfig, n_samples: int,
                 rng) -> SampleBatch:
    """Draw n_samples from the reweighted measure.

    Importance mode returns free-field draws with self-normalized weights
    exp(-energy)/Z-hat (mean weight 1); pcn mode returns a thinned Markov
    chain with unit weights. Since the potential sees the field only
    through the smoothed, truncated combination, the Gaussian factor on
    the complementary modes is sampled exactly in both modes.
    """
    coeffs, weights, rate, ess = sample_gibbs_coefficients(
        op, cfg, n_samples, rng)
    meta = {"sampler": cfg.sampler, "N": cfg.N, "M": cfg.M,
            "n_samples": n_samples, "rng": repr(rng)}
    if cfg.sampler == "pcn":
        meta.update(beta=cfg.beta, burn_in=cfg.burn_in, thin=cfg.thin)
    fields = [op.synthesize(c) for c in coeffs]
    return SampleBatch(fields=fields, weights=weights, acceptance_rate=rate,
                       ess=ess, provenance=meta)
