"""Flat-torus geometry, FFT transforms, spectral multipliers and norms.

The domain is fixed to the flat torus [0, 2pi)^2. Fourier coefficients follow
the synthesis convention

    f(x) = sum_k fhat_k exp(i k.x),

so fhat_0 is the mean value of f and Parseval reads
(2pi)^2 sum_k |fhat_k|^2 = int |f|^2 dx. Wavenumbers are the integer lattice
in FFT order, -n/2 <= k_i < n/2 for an n-point grid.
"""

from __future__ import annotations

from math import pi

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * pi
AREA = TWO_PI ** 2


class TorusGrid:
    """Uniform n x n sampling of [0, 2pi)^2.

    Parameters
    ----------
    n_per_dim : int
        Grid points per dimension. Must be a power of two and at least 8,
        so FFT round trips stay exact to rounding and the dyadic block
        ladder terminates exactly at the Nyquist ring.

    Attributes
    ----------
    spacing : float
        Mesh width 2pi/n.
    cell_area : float
        Quadrature weight spacing**2; cell_area * n**2 == (2pi)**2.
    laplacian_symbol : ndarray
        |k|^2 on the FFT-ordered wavenumber lattice, shape (n, n).
    """

    def __init__(self, n_per_dim: int):
        n = int(n_per_dim)
        if n < 8 or n & (n - 1):
            raise ValidationError(
                "n_per_dim must be a power of two and >= 8, got %r" % (n_per_dim,))
        self.n = n
        self.spacing = TWO_PI / n
        self.cell_area = self.spacing ** 2
        freq = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        self.k1, self.k2 = np.meshgrid(freq, freq, indexing="ij")
        self.laplacian_symbol = (self.k1 ** 2 + self.k2 ** 2).astype(np.float64)
        self.points_1d = np.arange(n) * self.spacing

    def meshgrid(self):
        return np.meshgrid(self.points_1d, self.points_1d, indexing="ij")

    def __repr__(self):
        return "TorusGrid(n_per_dim=%d)" % self.n


class Field:
    """Real scalar field sampled on a TorusGrid.

    Values are stored as an (n, n) array; the row-major flattening is the
    canonical serialization order.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: TorusGrid, values, check: bool = True):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValidationError(
                "field shape %r does not match grid %r" % (values.shape, grid))
        if check and not np.all(np.isfinite(values)):
            raise ValidationError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "Field":
        return cls(grid, np.zeros((grid.n, grid.n)), check=False)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "Field":
        x1, x2 = grid.meshgrid()
        return cls(grid, np.asarray(fn(x1, x2), dtype=np.float64))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), check=False)

    def __repr__(self):
        return "Field(n=%d, sup=%.3g)" % (self.grid.n, np.max(np.abs(self.values)))


def to_fourier(f: Field) -> np.ndarray:
    """Fourier coefficients of f, FFT-ordered, synthesis convention.

    Hermitian symmetry fhat_{-k} = conj(fhat_k) holds to rounding because
    the input is real.
    """
    if not np.all(np.isfinite(f.values)):
        raise ValidationError("cannot transform a non-finite field")
    return np.fft.fft2(f.values) / f.grid.n ** 2


def from_fourier(grid: TorusGrid, coeffs: np.ndarray, check: bool = False) -> Field:
    """Synthesize a real field from FFT-ordered coefficients."""
    values = np.fft.ifft2(coeffs).real * grid.n ** 2
    return Field(grid, values, check=check)


# ---------------------------------------------------------------------------
# Spectral symbols

def _smooth_step(u: np.ndarray) -> np.ndarray:
    # 1 for u <= 1/2, 0 for u >= 1, smooth and monotone between.
    u = np.asarray(u, dtype=np.float64)
    lo = np.clip(1.0 - u, 0.0, None)
    hi = np.clip(u - 0.5, 0.0, None)
    with np.errstate(divide="ignore", over="ignore"):
        glo = np.where(lo > 0, np.exp(-1.0 / np.where(lo > 0, lo, 1.0)), 0.0)
        ghi = np.where(hi > 0, np.exp(-1.0 / np.where(hi > 0, hi, 1.0)), 0.0)
    return glo / (glo + ghi)


def _psi0(r: np.ndarray) -> np.ndarray:
    """Base dyadic bump: 1 on [-1/2, 1/2], supported in [-1, 1]."""
    return _smooth_step(np.abs(np.asarray(r, dtype=np.float64)))


def _bump(r: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) on |r| < 1, zero outside."""
    r = np.asarray(r, dtype=np.float64)
    inside = np.abs(r) < 1.0
    rsq = np.where(inside, r * r, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.exp(1.0 - 1.0 / (1.0 - rsq))
    return np.where(inside, vals, 0.0)


_KINDS = ("schwartz_psi", "bump_chi", "dyadic_block", "fractional_power",
          "heat", "identity")


class SpectralSymbol:
    """Scalar symbol evaluated on a nonnegative spectral variable.

    Multipliers and functional calculus apply the weight s(scale**-2 * lam),
    with one exception: for kind "heat" the scale argument is the time t >= 0
    and the weight is exp(-t * lam).
    """

    __slots__ = ("kind", "param")

    def __init__(self, kind: str, param: float | None = None):
        if kind not in _KINDS:
            raise ValidationError("unknown symbol kind %r" % (kind,))
        self.kind = kind
        self.param = param

    def weights(self, lam: np.ndarray, scale: float = 1.0) -> np.ndarray:
        lam = np.asarray(lam, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(lam)
        if self.kind == "heat":
            if scale < 0:
                raise ValidationError("heat time must be nonnegative")
            return np.exp(-scale * lam)
        if not scale > 0:
            raise ValidationError("symbol scale must be positive")
        r = lam / scale ** 2
        if self.kind == "schwartz_psi":
            return np.exp(-r * r)
        if self.kind == "bump_chi":
            return _bump(r)
        if self.kind == "fractional_power":
            return (1.0 + r) ** (0.5 * self.param)
        # dyadic_block
        m = self.param
        if m == 0:
            return _psi0(r)
        return _psi0(r / (2.0 * m) ** 2) - _psi0(r / float(m) ** 2)

    def __repr__(self):
        if self.param is None:
            return "SpectralSymbol(%r)" % self.kind
        return "SpectralSymbol(%r, %r)" % (self.kind, self.param)


def psi_symbol() -> SpectralSymbol:
    """Schwartz cutoff psi(r) = exp(-r^2); psi(0) = 1."""
    return SpectralSymbol("schwartz_psi")


def chi_symbol() -> SpectralSymbol:
    """Compactly supported bump chi(r) = exp(1 - 1/(1-r^2)) on (-1, 1)."""
    return SpectralSymbol("bump_chi")


def dyadic_symbol(m: int) -> SpectralSymbol:
    """Littlewood-Paley block: psi0(lam/(2m)^2) - psi0(lam/m^2), or psi0 at m=0."""
    if m != 0 and (m < 1 or m & (m - 1)):
        raise ValidationError("dyadic block index must be 0 or a power of two")
    return SpectralSymbol("dyadic_block", m)


def fractional_symbol(s: float) -> SpectralSymbol:
    """Bessel-type weight (1 + r)^{s/2}."""
    return SpectralSymbol("fractional_power", float(s))


def heat_symbol() -> SpectralSymbol:
    return SpectralSymbol("heat")


def identity_symbol() -> SpectralSymbol:
    return SpectralSymbol("identity")


def dyadic_blocks(grid: TorusGrid) -> list[int]:
    """Block labels resolvable on the grid: 0, 1, 2, ..., n/2."""
    labels = [0]
    m = 1
    while m <= grid.n // 2:
        labels.append(m)
        m *= 2
    return labels


# ---------------------------------------------------------------------------
# Operations

def apply_multiplier(f: Field, symbol: SpectralSymbol, scale: float = 1.0) -> Field:
    """Apply the Fourier multiplier symbol(scale**-2 |k|^2) to f.

    The identity symbol returns the input values bit-identically.
    """
    if symbol.kind == "identity":
        return Field(f.grid, f.values.copy(), check=False)
    w = symbol.weights(f.grid.laplacian_symbol, scale)
    return from_fourier(f.grid, w * to_fourier(f))


def integrate(f: Field) -> float:
    """Quadrature of f over the torus; exact for band-limited integrands."""
    if not np.all(np.isfinite(f.values)):
        raise ValidationError("cannot integrate a non-finite field")
    return float(f.grid.cell_area * f.values.sum())


def l2_inner(f: Field, g: Field) -> float:
    if f.grid is not g.grid:
        raise ValidationError("fields must share a grid")
    return float(f.grid.cell_area * np.vdot(f.values, g.values).real)


def lp_norm(f: Field, p: float) -> float:
    """Grid L^p norm, p in [1, inf]."""
    if p < 1:
        raise ValidationError("p must be at least 1")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.cell_area * (a ** p).sum()) ** (1.0 / p))


def besov_norm(f: Field, s: float, p: float, q: float) -> float:
    """Besov norm (sum_M <M>^{qs} |Q_M f|_{L^p}^q)^{1/q} over dyadic blocks.

    Blocks run over M = 0, 1, 2, ..., n/2, which reconstruct band-limited
    fields exactly; <M> = (1 + M^2)^{1/2}.
    """
    coeffs = to_fourier(f)
    lam = f.grid.laplacian_symbol
    terms = []
    for m in dyadic_blocks(f.grid):
        w = dyadic_symbol(m).weights(lam)
        block = from_fourier(f.grid, w * coeffs)
        terms.append((1.0 + m * m) ** (0.5 * s) * lp_norm(block, p))
    terms = np.asarray(terms)
    if np.isinf(q):
        return float(terms.max())
    return float((terms ** q).sum() ** (1.0 / q))


def torus_distance(x, y) -> np.ndarray | float:
    """Geodesic distance on the torus: per-coordinate wraparound, then Euclidean."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = np.abs(x - y) % TWO_PI
    d = np.minimum(d, TWO_PI - d)
    out = np.sqrt((d * d).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def pad_coefficients(coeffs: np.ndarray, factor: int) -> np.ndarray:
    """Embed FFT-ordered coefficients into a factor-times-finer lattice."""
    if factor == 1:
        return coeffs.copy()
    n = coeffs.shape[0]
    n_big = n * factor
    big = np.zeros((n_big, n_big), dtype=complex)
    lo = (n_big - n) // 2
    big[lo:lo + n, lo:lo + n] = np.fft.fftshift(coeffs)
    return np.fft.ifftshift(big)


def truncate_coefficients(coeffs: np.ndarray, n_small: int) -> np.ndarray:
    """Inverse of pad_coefficients: keep the centered n_small block."""
    n_big = coeffs.shape[0]
    if n_big == n_small:
        return coeffs.copy()
    lo = (n_big - n_small) // 2
    small = np.fft.fftshift(coeffs)[lo:lo + n_small, lo:lo + n_small]
    return np.fft.ifftshift(small)
