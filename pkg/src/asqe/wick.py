"""Hermite algebra for Wick-ordered polynomial nonlinearities.

Hermite polynomials carry an explicit variance parameter,

    H_0 = 1,  H_1 = x,  H_{k+1}(x, v) = x H_k(x, v) - k v H_{k-1}(x, v),

so H_k(x, 0) = x^k and H_k(., v) is the Wick power of order k with respect
to a centered Gaussian of variance v. The variance may vary over the grid.

Field-level operations accept either a Field or a bare array and return the
same kind; the variance argument may be a VarianceField, a Field, an array,
or a scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import ValidationError
from .grid import Field

MAX_DEGREE = 16


def hermite(k: int, x, sigma_sq=1.0):
    """Variance-parametrized Hermite polynomial H_k(x, sigma_sq), elementwise."""
    if k < 0 or k > MAX_DEGREE:
        raise ValidationError("hermite order must be in [0, %d], got %r"
                              % (MAX_DEGREE, k))
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(sigma_sq, dtype=np.float64)
    h_prev = np.ones(np.broadcast(x, v).shape)
    if k == 0:
        return h_prev
    h = x * h_prev
    for j in range(1, k):
        h, h_prev = x * h - j * v * h_prev, h
    return h + np.zeros(np.broadcast(x, v).shape)


def hermite_binomial(k: int, x, y):
    """H_k(x + y) via the unit-variance binomial rule sum_p C(k,p) x^{k-p} H_p(y).

    Only the y-argument carries the Gaussian structure, which is why plain
    powers of x appear; this is the translation identity the split dynamics
    relies on, kept here as an independent route against hermite(k, x+y, 1).
    """
    if k < 0 or k > MAX_DEGREE:
        raise ValidationError("hermite order must be in [0, %d], got %r"
                              % (MAX_DEGREE, k))
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for p in range(k + 1):
        total = total + comb(k, p) * x ** (k - p) * hermite(p, y, 1.0)
    return total


@dataclass(frozen=True)
class WickPolynomial:
    """Even polynomial potential in Wick form.

    coeffs[p] multiplies H_p(u, sigma_sq); the leading coefficient must be
    positive and attached to an even degree between 2 and MAX_DEGREE, so
    the potential is bounded below after renormalization.
    """

    coeffs: tuple = field(default=())

    def __post_init__(self):
        c = tuple(float(a) for a in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if len(c) < 3:
            raise ValidationError("potential needs degree >= 2; got coefficients %r"
                                  % (list(c),))
        deg = len(c) - 1
        if deg % 2 or deg > MAX_DEGREE:
            raise ValidationError("potential degree must be even and <= %d, got %d"
                                  % (MAX_DEGREE, deg))
        if not c[-1] > 0:
            raise ValidationError("leading coefficient must be positive, got %r"
                                  % (c[-1],))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def derivative_coeffs(self) -> tuple:
        """Coefficients of f = F' in the Hermite basis: b_p = (p+1) a_{p+1}.

        Differentiation lowers Hermite order by one, d/dx H_p = p H_{p-1},
        so the Wick-ordered derivative keeps the same simple form. Always
        recomputed from coeffs, never stored.
        """
        a = self.coeffs
        return tuple((p + 1) * a[p + 1] for p in range(len(a) - 1))


def coefficient_tuple(poly) -> tuple:
    """Hermite-basis coefficients of a potential-like object.

    None means the zero potential; a WickPolynomial contributes its strict,
    validated coefficients; a bare sequence is accepted for degenerate
    diagnostics (constants, test stubs) without the evenness constraints.
    """
    if poly is None:
        return (0.0,)
    if isinstance(poly, WickPolynomial):
        return poly.coeffs
    c = tuple(float(a) for a in poly)
    if not c:
        return (0.0,)
    if not all(np.isfinite(c)):
        raise ValidationError("potential coefficients must be finite")
    return c


def derivative_tuple(poly) -> tuple:
    a = coefficient_tuple(poly)
    if len(a) == 1:
        return (0.0,)
    return tuple((p + 1) * a[p + 1] for p in range(len(a) - 1))


def _unwrap(obj):
    # Field -> (values, grid); VarianceField -> its field's (values, grid);
    # anything else -> (asarray, None).
    obj = getattr(obj, "sigma_sq", obj)
    if isinstance(obj, Field):
        return obj.values, obj.grid
    return np.asarray(obj, dtype=np.float64), None


def _pointwise(coeffs, f, var):
    x, grid_f = _unwrap(f)
    v, grid_v = _unwrap(var)
    if grid_f is not None and grid_v is not None and grid_f.n != grid_v.n:
        raise ValidationError("field and variance live on different grids")
    out = _eval_series(coeffs, x, v)
    if grid_f is not None:
        return Field(grid_f, out, check=False)
    return out


def _eval_series(coeffs, x, v):
    """sum_p coeffs[p] H_p(x, v) in one pass of the recursion."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    shape = np.broadcast(x, v).shape
    h_prev = np.ones(shape)
    total = coeffs[0] * h_prev
    if len(coeffs) == 1:
        return total
    h = x + np.zeros(shape)
    total = total + coeffs[1] * h
    for j in range(1, len(coeffs) - 1):
        h, h_prev = x * h - j * v * h_prev, h
        total = total + coeffs[j + 1] * h
    return total


def wick_power(f, k: int, var):
    """Renormalized power :f^k: = H_k(f(x), sigma_sq(x)) pointwise."""
    if k < 0 or k > MAX_DEGREE:
        raise ValidationError("wick power order must be in [0, %d], got %r"
                              % (MAX_DEGREE, k))
    coeffs = (0.0,) * k + (1.0,)
    return _pointwise(coeffs, f, var)


def eval_F_diamond(poly, f, var):
    """Wick-ordered potential sum_p a_p H_p(f(x), sigma_sq(x)) pointwise."""
    return _pointwise(coefficient_tuple(poly), f, var)


def eval_f_diamond(poly, f, var):
    """Wick-ordered derivative sum_p a_p p H_{p-1}(f, sigma_sq) pointwise."""
    return _pointwise(derivative_tuple(poly), f, var)
