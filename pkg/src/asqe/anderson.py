"""The renormalized Schrodinger operator -Delta + xi - c on the Galerkin span.

The Galerkin space is spanned by normalized plane waves e_k(x) = e^{ik.x}/2pi
for integer modes inside the Euclidean ball |k| <= K, listed in lexicographic
order. In that basis the operator is the D x D Hermitian matrix

    A[k, k'] = |k|^2 delta_{kk'} + xihat_{k-k'} - c_K delta_{kk'},

which we diagonalize densely. A positivity shift -mu_0 + 1 is applied so the
reported spectrum starts exactly at 1; the shift value is recorded.

The eigensolve runs in a real orthonormal basis (zero mode, then cosine/sine
combinations of each +-k pair). Conjugating by that unitary costs O(D^2),
keeps eigenvectors of degenerate clusters free of arbitrary complex phases,
and guarantees the synthesized eigenfunctions are exactly real.
"""

from __future__ import annotations

from math import pi, sqrt

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError
from .grid import (
    Field,
    SpectralSymbol,
    TorusGrid,
    from_fourier,
    psi_symbol,
    chi_symbol,
    to_fourier,
)

TWO_PI = 2.0 * pi
HERMITICITY_TOL = 1e-12


def ball_modes(cutoff_K: int) -> np.ndarray:
    """Integer modes with |k| <= K (Euclidean), lexicographically ordered."""
    r = np.arange(-cutoff_K, cutoff_K + 1)
    k1, k2 = np.meshgrid(r, r, indexing="ij")
    keep = k1 ** 2 + k2 ** 2 <= cutoff_K ** 2
    modes = np.stack([k1[keep], k2[keep]], axis=1)
    order = np.lexsort((modes[:, 1], modes[:, 0]))
    return modes[order].astype(np.int64)


def counterterm_value(cutoff_K: int) -> float:
    """Diagonal renormalization constant (2pi)^{-2} sum_{0<|k|<=K} |k|^{-2}.

    Grows like (log K)/(2pi); the finite part is a convention, absorbed by
    the positivity shift.
    """
    modes = ball_modes(cutoff_K)
    ksq = (modes ** 2).sum(axis=1)
    return float(np.sum(1.0 / ksq[ksq > 0]) / TWO_PI ** 2)


def assemble_matrix(grid: TorusGrid, xi: Field, cutoff_K: int,
                    counterterm: float) -> np.ndarray:
    """Galerkin matrix of -Delta + xi - c in the normalized plane-wave basis.

    Entries read the exact Fourier coefficients of xi at the difference
    modes; differences beyond the grid's resolvable band (|k - k'|_inf
    >= n/2) contribute zero, consistent with xi being the band-limited
    field actually sampled. For n >= 4K + 2 no difference is clipped.
    """
    modes = ball_modes(cutoff_K)
    n = grid.n
    xhat = to_fourier(xi)
    d1 = modes[:, 0][:, None] - modes[:, 0][None, :]
    d2 = modes[:, 1][:, None] - modes[:, 1][None, :]
    band = n // 2 - 1
    inside = (np.abs(d1) <= band) & (np.abs(d2) <= band)
    a = np.where(inside, xhat[d1 % n, d2 % n], 0.0)
    ksq = (modes ** 2).sum(axis=1).astype(np.float64)
    a[np.arange(len(modes)), np.arange(len(modes))] += ksq - counterterm
    return a


class AndersonOperator:
    """Eigendecomposition of the renormalized operator, plus calculus on it.

    Attributes
    ----------
    eigenvalues : ndarray
        Shifted spectrum, ascending; eigenvalues[0] == 1 exactly.
    vectors : ndarray, complex, shape (D, D)
        Column n holds the coefficients of eigenfunction phi_n over the
        lexicographic ball modes, in the normalized plane-wave basis; the
        synthesized phi_n are real and L^2-orthonormal.
    shift : float
        1 - mu_0 where mu_0 is the raw bottom eigenvalue.
    """

    def __init__(self, grid, cutoff_K, modes, eigenvalues, vectors,
                 counterterm, shift, xi):
        self.grid = grid
        self.cutoff_K = int(cutoff_K)
        self.modes = modes
        self.eigenvalues = eigenvalues
        self.vectors = vectors
        self.counterterm = float(counterterm)
        self.shift = float(shift)
        self.xi = xi
        self.dim = len(eigenvalues)
        self._mode_rows = modes[:, 0] % grid.n
        self._mode_cols = modes[:, 1] % grid.n
        self._pn_cache = {}
        self._sigma_cache = {}

    # -- basis changes ------------------------------------------------------

    def coefficients(self, f: Field) -> np.ndarray:
        """Eigenbasis coefficients <f, phi_n> of the projection onto the span."""
        fhat = to_fourier(f)
        fvec = fhat[self._mode_rows, self._mode_cols]
        return TWO_PI * (self.vectors.conj().T @ fvec).real

    def synthesize(self, coeffs: np.ndarray) -> Field:
        """Field sum_n coeffs[n] phi_n from eigenbasis coefficients."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape != (self.dim,):
            raise ValidationError("expected %d eigen-coefficients, got shape %r"
                                  % (self.dim, coeffs.shape))
        fvec = (self.vectors @ coeffs) / TWO_PI
        n = self.grid.n
        c = np.zeros((n, n), dtype=complex)
        c[self._mode_rows, self._mode_cols] = fvec
        return from_fourier(self.grid, c)

    def eigenfunction(self, n: int) -> Field:
        e = np.zeros(self.dim)
        e[n] = 1.0
        return self.synthesize(e)

    def eigenfunction_values_at(self, x, fourier_weights=None) -> np.ndarray:
        """Vector (phi_n(x))_n at an arbitrary point, exact plane-wave sum.

        Optional per-mode Fourier weights implement smoothed variants such
        as (psi(N^{-2}Delta) phi_n)(x) without touching the grid.
        """
        x = np.asarray(x, dtype=np.float64)
        phase = np.exp(1j * (self.modes[:, 0] * x[0] + self.modes[:, 1] * x[1]))
        if fourier_weights is not None:
            phase = phase * fourier_weights
        return (phase @ self.vectors).real / TWO_PI

    def mode_laplacian(self) -> np.ndarray:
        """|k|^2 over the ball modes, aligned with the rows of vectors."""
        return (self.modes ** 2).sum(axis=1).astype(np.float64)

    def _smoothed_chunks(self, N, pad_factor: int):
        """Yield (lo, hi, values) blocks of psi(N^{-2}Delta) phi_n samples.

        values has shape (hi - lo, m*m) with m = pad_factor * n. Sampling on
        the finer lattice evaluates the same band-limited functions, which
        is what exact quadrature of polynomial nonlinearities needs.
        """
        if pad_factor < 1:
            raise ValidationError("pad_factor must be >= 1")
        m = self.grid.n * pad_factor
        weights = None
        if N is not None:
            weights = psi_symbol().weights(self.mode_laplacian(), float(N))
        rows = self.modes[:, 0] % m
        cols = self.modes[:, 1] % m
        chunk = max(1, (1 << 22) // (m * m))
        for lo in range(0, self.dim, chunk):
            hi = min(lo + chunk, self.dim)
            fvec = self.vectors[:, lo:hi] / TWO_PI
            if weights is not None:
                fvec = fvec * weights[:, None]
            c = np.zeros((hi - lo, m, m), dtype=complex)
            c[np.arange(hi - lo)[:, None], rows[None, :], cols[None, :]] = fvec.T
            yield lo, hi, (np.fft.ifft2(c, axes=(1, 2)).real * m ** 2).reshape(
                hi - lo, -1)

    def smoothed_eigenfunction_values(self, N: float | None,
                                      pad_factor: int = 1) -> np.ndarray:
        """Samples of psi(N^{-2}Delta) phi_n for every n, shape (D, m*m).

        Cached per (N, pad_factor); N = None skips the smoothing. The cache
        is meant for small operators (batched sampling, active-block
        dynamics); large-D callers should stream _smoothed_chunks instead.
        """
        key = (N, int(pad_factor))
        if key not in self._pn_cache:
            out = np.empty((self.dim, (self.grid.n * pad_factor) ** 2))
            for lo, hi, vals in self._smoothed_chunks(N, pad_factor):
                out[lo:hi] = vals
            self._pn_cache[key] = out
        return self._pn_cache[key]

    def padded_field_values(self, coeffs: np.ndarray, N,
                            pad_factor: int = 1) -> np.ndarray:
        """Samples of psi(N^{-2}Delta) sum_n coeffs[n] phi_n, flat (m*m,).

        One scatter plus one FFT; no per-operator cache, so it stays cheap
        in memory at any dimension.
        """
        if pad_factor < 1:
            raise ValidationError("pad_factor must be >= 1")
        m = self.grid.n * pad_factor
        fvec = (self.vectors @ np.asarray(coeffs, dtype=np.float64)) / TWO_PI
        if N is not None:
            fvec = fvec * psi_symbol().weights(self.mode_laplacian(), float(N))
        c = np.zeros((m, m), dtype=complex)
        c[self.modes[:, 0] % m, self.modes[:, 1] % m] = fvec
        return (np.fft.ifft2(c).real * m ** 2).ravel()

    def __repr__(self):
        return ("AndersonOperator(K=%d, dim=%d, n=%d, lambda_max=%.4g)"
                % (self.cutoff_K, self.dim, self.grid.n, self.eigenvalues[-1]))


def _realification_index(modes: np.ndarray):
    """Index of the zero mode and aligned arrays of +k / -k partner rows."""
    index = {(int(k1), int(k2)): i for i, (k1, k2) in enumerate(modes)}
    i_zero = index[(0, 0)]
    pos, neg = [], []
    for i, (k1, k2) in enumerate(modes):
        if k1 > 0 or (k1 == 0 and k2 > 0):
            pos.append(i)
            neg.append(index[(-int(k1), -int(k2))])
    return i_zero, np.asarray(pos), np.asarray(neg)


def _real_symmetric_form(a: np.ndarray, i_zero, pos, neg) -> np.ndarray:
    """Conjugate the Hermitian matrix into the real cosine/sine basis."""
    d = a.shape[0]
    s = 1.0 / sqrt(2.0)
    t = np.empty((d, d), dtype=complex)
    t[:, 0] = a[:, i_zero]
    t[:, 1::2] = (a[:, pos] + a[:, neg]) * s
    t[:, 2::2] = (a[:, pos] - a[:, neg]) * (-1j * s)
    b = np.empty((d, d), dtype=complex)
    b[0, :] = t[i_zero, :]
    b[1::2, :] = (t[pos, :] + t[neg, :]) * s
    b[2::2, :] = (t[pos, :] - t[neg, :]) * (1j * s)
    imag = np.max(np.abs(b.imag))
    if imag > 1e-9 * max(1.0, np.max(np.abs(b.real))):
        raise NumericalError("real basis conjugation left imaginary residue %.3g"
                             % imag)
    br = b.real
    return (br + br.T) / 2.0


def _fix_column_signs(beta: np.ndarray) -> np.ndarray:
    colmax = np.max(np.abs(beta), axis=0)
    lead = np.argmax(np.abs(beta) > 1e-9 * colmax[None, :], axis=0)
    signs = np.sign(beta[lead, np.arange(beta.shape[1])])
    signs[signs == 0] = 1.0
    return beta * signs[None, :]


def build_operator(grid: TorusGrid, xi: Field, cutoff_K: int,
                   counterterm_mode="auto") -> AndersonOperator:
    """Assemble and diagonalize the renormalized operator.

    counterterm_mode is "auto" (the lattice-sum value for this K) or an
    explicit number. Deterministic given (xi, cutoff_K, counterterm):
    identical inputs give bit-identical spectra.
    """
    cutoff_K = int(cutoff_K)
    if cutoff_K < 1:
        raise ValidationError("cutoff_K must be a positive integer")
    if 3 * cutoff_K > grid.n:
        raise ValidationError(
            "cutoff_K must satisfy 3K <= n_per_dim (K=%d, n=%d)"
            % (cutoff_K, grid.n))
    if xi.grid.n != grid.n:
        raise ValidationError("xi must be sampled on the operator grid")
    if counterterm_mode == "auto":
        c = counterterm_value(cutoff_K)
    else:
        c = float(counterterm_mode)

    a = assemble_matrix(grid, xi, cutoff_K, c)
    asym = np.max(np.abs(a - a.conj().T))
    if asym > HERMITICITY_TOL:
        raise NumericalError("assembled matrix is not Hermitian: asymmetry %.3g"
                             % asym)
    a = (a + a.conj().T) / 2.0

    modes = ball_modes(cutoff_K)
    i_zero, pos, neg = _realification_index(modes)
    b = _real_symmetric_form(a, i_zero, pos, neg)
    try:
        raw, beta = scipy.linalg.eigh(b)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("eigensolve failed: %s" % exc) from exc
    beta = _fix_column_signs(beta)

    s = 1.0 / sqrt(2.0)
    vectors = np.empty((len(modes), len(modes)), dtype=complex)
    vectors[i_zero, :] = beta[0, :]
    vectors[pos, :] = (beta[1::2, :] - 1j * beta[2::2, :]) * s
    vectors[neg, :] = (beta[1::2, :] + 1j * beta[2::2, :]) * s

    shift = 1.0 - raw[0]
    eigenvalues = raw + shift
    eigenvalues[0] = 1.0
    return AndersonOperator(grid, cutoff_K, modes, eigenvalues, vectors,
                            c, shift, xi)


# ---------------------------------------------------------------------------
# Calculus on the operator

def functional_calculus(op: AndersonOperator, symbol: SpectralSymbol,
                        scale: float, f: Field) -> Field:
    """sum_n symbol(scale^{-2} lambda_n) <f, phi_n> phi_n.

    The identity symbol gives the L^2 projection onto the Galerkin span;
    everything outside the span is discarded.
    """
    a = op.coefficients(f)
    w = symbol.weights(op.eigenvalues, scale)
    return op.synthesize(w * a)


def sharp_projector(op: AndersonOperator, M: float, f: Field) -> Field:
    """Orthogonal projection onto span{phi_n : lambda_n <= M}."""
    a = op.coefficients(f)
    return op.synthesize(np.where(op.eigenvalues <= M, a, 0.0))


def _smoothing_weights(op: AndersonOperator, spec):
    """Per-mode Fourier weights and per-eigenvalue weights of a smoothing.

    spec is None, ("psi", N), ("chi", M), or ("psi_chi", N, M): "psi" is the
    Schwartz frequency cutoff acting on the grid Laplacian, "chi" the
    compactly supported bump acting on operator eigenvalues.
    """
    fourier = None
    eigen = None
    if spec is None:
        return fourier, eigen
    kind = spec[0]
    if kind == "psi":
        fourier = psi_symbol().weights(op.mode_laplacian(), float(spec[1]))
    elif kind == "chi":
        eigen = chi_symbol().weights(op.eigenvalues, float(spec[1]))
    elif kind == "psi_chi":
        fourier = psi_symbol().weights(op.mode_laplacian(), float(spec[1]))
        eigen = chi_symbol().weights(op.eigenvalues, float(spec[2]))
    else:
        raise ValidationError("unknown smoothing spec %r" % (spec,))
    return fourier, eigen


def green_function(op: AndersonOperator, left_smoothing, right_smoothing,
                   x, y) -> float:
    """Smoothed Green value sum_n (A phi_n)(x) (B phi_n)(y) / lambda_n.

    A and B are smoothings per _smoothing_weights; points are arbitrary
    (plane waves are evaluated exactly, no grid snapping). Symmetric under
    swapping (x, A) with (y, B).
    """
    fl, el = _smoothing_weights(op, left_smoothing)
    fr, er = _smoothing_weights(op, right_smoothing)
    ax = op.eigenfunction_values_at(x, fl)
    by = op.eigenfunction_values_at(y, fr)
    if el is not None:
        ax = ax * el
    if er is not None:
        by = by * er
    return float(np.sum(ax * by / op.eigenvalues))


def translation_averaged_green(op: AndersonOperator, N: float) -> Field:
    """Average of the P_N-smoothed Green kernel over translations.

    The value at grid offset h is (2pi)^{-2} int G_{N,N}(x, x+h) dx, i.e.
    the mean over all base points of the two-point kernel at displacement
    h; radially binned it feeds the log-divergence fit with far smaller
    variance than individual point pairs.
    """
    lam_k = op.mode_laplacian()
    psi_sq = psi_symbol().weights(lam_k, float(N)) ** 2
    s = (np.abs(op.vectors) ** 2 / op.eigenvalues[None, :]).sum(axis=1)
    n = op.grid.n
    c = np.zeros((n, n), dtype=complex)
    c[op._mode_rows, op._mode_cols] = psi_sq * s / TWO_PI ** 2
    return from_fourier(op.grid, c)


class VarianceField:
    """Pointwise variance of the P_N-smoothed free field.

    sigma_sq(x) = sum_n (psi(N^{-2}Delta) phi_n)(x)^2 / lambda_n, the
    diagonal of the smoothed Green kernel; nonnegative by construction.
    """

    def __init__(self, sigma_sq: Field, N: float):
        if np.min(sigma_sq.values) < 0:
            raise NumericalError("variance field went negative: %.3g"
                                 % np.min(sigma_sq.values))
        self.sigma_sq = sigma_sq
        self.N = float(N)

    def __repr__(self):
        return "VarianceField(N=%g, mean=%.4g)" % (
            self.N, float(np.mean(self.sigma_sq.values)))


def padded_variance_values(op: AndersonOperator, N: float,
                           pad_factor: int = 1) -> np.ndarray:
    """sigma_N^2 sampled on the pad_factor-times-finer lattice, flat (m*m,).

    The variance field has Fourier modes up to 2K, beyond what the base
    grid resolves, so quadrature grids must evaluate it in place rather
    than interpolate the base-grid samples. Streamed in chunks; only the
    m*m result is cached.
    """
    if not N >= 1:
        raise ValidationError("N must be at least 1")
    key = (float(N), int(pad_factor))
    if key not in op._sigma_cache:
        m = op.grid.n * pad_factor
        acc = np.zeros(m * m)
        inv_lam = 1.0 / op.eigenvalues
        for lo, hi, vals in op._smoothed_chunks(float(N), pad_factor):
            acc += (vals ** 2).T @ inv_lam[lo:hi]
        op._sigma_cache[key] = acc
    return op._sigma_cache[key]


def sigma_field(op: AndersonOperator, N: float) -> VarianceField:
    """Variance field of P_N u under the Gaussian measure with covariance
    H^{-1}; equals green_function(op, psi_N, psi_N, x, x) pointwise."""
    vals = padded_variance_values(op, N, 1)
    field = Field(op.grid, vals.reshape(op.grid.n, op.grid.n), check=False)
    return VarianceField(field, float(N))


def dH_norm(op: AndersonOperator, f: Field, sigma: float) -> float:
    """Operator Sobolev norm (sum_n lambda_n^sigma <f, phi_n>^2)^{1/2}.

    f is implicitly projected onto the Galerkin span. The weight is a plain
    power of lambda_n, legitimate since the shifted spectrum starts at 1.
    """
    a = op.coefficients(f)
    return float(np.sqrt(np.sum(op.eigenvalues ** sigma * a ** 2)))
