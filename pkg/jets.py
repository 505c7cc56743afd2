"""
Truncated multivariate Taylor jets in the four spacetime coordinates.

A Jet stores normalized Taylor coefficients c_alpha = (d^alpha f)(center) / alpha!
for every multi-index |alpha| <= order, optionally with a trailing value shape
(a spinor jet has value shape (4,)). Monomials are sorted by total degree, so
the basis of a lower order is a prefix of the basis of a higher one.
"""
import functools
import math

import numpy as np

from config import JET_MAX_ORDER
from errors import JetOrderError

NVARS = 4


class _Basis:
    """Monomial exponents of total degree <= order"""

    def __init__(self, order):
        exps = [e for e in np.ndindex(*(order + 1,) * NVARS) if sum(e) <= order]
        exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
        self.order = order
        self.exponents = np.array(exps, dtype=np.int64).reshape(-1, NVARS)
        self.degrees = self.exponents.sum(axis=1)
        self.index = {tuple(int(x) for x in e): i for i, e in enumerate(self.exponents)}
        self.size = len(exps)
        self.factorials = np.array(
            [math.prod(math.factorial(int(x)) for x in e) for e in self.exponents], dtype=float)
        # dense lookup: code(e) = sum e_k (order+1)^k
        self._radix = order + 1
        self._weights = self._radix ** np.arange(NVARS)
        lookup = np.full(self._radix ** NVARS, -1, dtype=np.int64)
        lookup[self.exponents @ self._weights] = np.arange(self.size)
        self._lookup = lookup

    def indices_of(self, exps):
        """Basis positions of an (m, 4) array of exponents (all degrees <= order)"""
        return self._lookup[np.asarray(exps) @ self._weights]


@functools.lru_cache(maxsize=None)
def monomial_basis(order):
    if order < 0 or order > JET_MAX_ORDER:
        raise JetOrderError(f"jet order must be in 0..{JET_MAX_ORDER}, got {order}")
    return _Basis(order)


@functools.lru_cache(maxsize=None)
def _product_table(order):
    """Pairs (i, j) with deg_i + deg_j <= order, sorted by target, plus segment starts"""
    basis = monomial_basis(order)
    deg = basis.degrees
    ii, jj = np.nonzero(deg[:, None] + deg[None, :] <= order)
    targets = basis.indices_of(basis.exponents[ii] + basis.exponents[jj])
    perm = np.argsort(targets, kind='stable')
    ii, jj, targets = ii[perm], jj[perm], targets[perm]
    starts = np.flatnonzero(np.r_[True, targets[1:] != targets[:-1]])
    return ii, jj, starts


@functools.lru_cache(maxsize=None)
def _derivative_table(order, axis):
    """For d/dx^axis: source positions in basis(order) for each monomial of basis(order-1)"""
    lower = monomial_basis(order - 1)
    upper = monomial_basis(order)
    shifted = lower.exponents.copy()
    shifted[:, axis] += 1
    return upper.indices_of(shifted), (lower.exponents[:, axis] + 1).astype(float)


@functools.lru_cache(maxsize=None)
def _antiderivative_table(order, axis):
    """For the antiderivative along axis vanishing on the plane x^axis = center"""
    upper = monomial_basis(order + 1)
    lower = monomial_basis(order)
    targets = np.flatnonzero(upper.exponents[:, axis] >= 1)
    src = upper.exponents[targets].copy()
    src[:, axis] -= 1
    return targets, lower.indices_of(src), upper.exponents[targets, axis].astype(float)


def _lift(coeffs, ndim):
    """Insert singleton value axes so coeffs broadcast against a value shape of rank ndim"""
    extra = ndim - (coeffs.ndim - 1)
    if extra <= 0:
        return coeffs
    return coeffs.reshape((coeffs.shape[0],) + (1,) * extra + coeffs.shape[1:])


class Jet:
    """Truncated Taylor expansion of a (possibly array-valued) field at a point"""

    __slots__ = ('coeffs', 'order', 'center')
    __array_ufunc__ = None

    def __init__(self, coeffs, order, center=None):
        coeffs = np.asarray(coeffs)
        if coeffs.dtype.kind not in 'fc':
            coeffs = coeffs.astype(float)
        size = monomial_basis(order).size
        if coeffs.shape[0] != size:
            raise ValueError(f"order {order} jet needs {size} coefficients, got {coeffs.shape[0]}")
        self.coeffs = coeffs
        self.order = order
        self.center = None if center is None else tuple(float(x) for x in center)

    # ------------------------------------------------------------------ construction
    @classmethod
    def constant(cls, value, order, center=None):
        value = np.asarray(value, dtype=np.result_type(np.asarray(value).dtype, float))
        coeffs = np.zeros((monomial_basis(order).size,) + value.shape, dtype=value.dtype)
        coeffs[0] = value
        return cls(coeffs, order, center)

    @classmethod
    def variable(cls, axis, center, order):
        """The coordinate x^axis expanded at center"""
        basis = monomial_basis(order)
        coeffs = np.zeros(basis.size)
        coeffs[0] = center[axis]
        if order >= 1:
            unit = [0] * NVARS
            unit[axis] = 1
            coeffs[basis.index[tuple(unit)]] = 1.0
        return cls(coeffs, order, center)

    @classmethod
    def coordinates(cls, center, order):
        """Jet of the coordinate 4-vector x^mu (value shape (4,))"""
        return cls.stack([cls.variable(mu, center, order) for mu in range(NVARS)])

    @staticmethod
    def stack(jets, axis=-1):
        jets = list(jets)
        order = min(j.order for j in jets)
        size = monomial_basis(order).size
        parts = [j.coeffs[:size] for j in jets]
        value_axis = axis if axis < 0 else axis + 1
        return Jet(np.stack(parts, axis=value_axis), order, jets[0].center)

    # ------------------------------------------------------------------ access
    @property
    def value(self):
        return self.coeffs[0]

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coeffs[(slice(None),) + idx], self.order, self.center)

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def coefficient(self, exponent):
        return self.coeffs[monomial_basis(self.order).index[tuple(exponent)]]

    def derivative(self, exponent):
        """Value of the partial derivative d^exponent at the center"""
        exponent = tuple(int(x) for x in exponent)
        if sum(exponent) > self.order:
            raise JetOrderError(f"derivative {exponent} exceeds jet order {self.order}")
        return self.coefficient(exponent) * math.prod(math.factorial(x) for x in exponent)

    def gradient(self):
        """First partials at the center, shape (4,) + value shape"""
        if self.order < 1:
            raise JetOrderError("gradient needs a jet of order >= 1")
        return np.stack([self.derivative(np.eye(NVARS, dtype=int)[mu]) for mu in range(NVARS)])

    # ------------------------------------------------------------------ order handling
    def truncate(self, order):
        if order > self.order:
            raise JetOrderError(f"cannot truncate an order {self.order} jet to order {order}")
        return Jet(self.coeffs[:monomial_basis(order).size], order, self.center)

    def spatial_part(self):
        """Drop every coefficient carrying a power of x^0"""
        mask = monomial_basis(self.order).exponents[:, 0] == 0
        coeffs = self.coeffs * _lift(mask.astype(float), self.coeffs.ndim - 1)
        return Jet(coeffs, self.order, self.center)

    def time_truncated(self, max_time_order):
        """Drop coefficients with more than max_time_order powers of x^0"""
        mask = monomial_basis(self.order).exponents[:, 0] <= max_time_order
        coeffs = self.coeffs * _lift(mask.astype(float), self.coeffs.ndim - 1)
        return Jet(coeffs, self.order, self.center)

    # ------------------------------------------------------------------ calculus
    def partial(self, axis):
        """d/dx^axis as a jet one order lower"""
        if self.order < 1:
            raise JetOrderError(f"order exhausted: cannot differentiate an order 0 jet along x^{axis}")
        src, factor = _derivative_table(self.order, axis)
        coeffs = self.coeffs[src] * _lift(factor, self.coeffs.ndim - 1)
        return Jet(coeffs, self.order - 1, self.center)

    def antiderivative(self, axis):
        """Primitive along x^axis that vanishes where x^axis equals the center value"""
        if self.order + 1 > JET_MAX_ORDER:
            raise JetOrderError("antiderivative would exceed the maximum jet order")
        targets, src, factor = _antiderivative_table(self.order, axis)
        coeffs = np.zeros((monomial_basis(self.order + 1).size,) + self.shape, dtype=self.coeffs.dtype)
        coeffs[targets] = self.coeffs[src] / _lift(factor, self.coeffs.ndim - 1)
        return Jet(coeffs, self.order + 1, self.center)

    # ------------------------------------------------------------------ arithmetic
    def _check_center(self, other):
        if self.center is not None and other.center is not None and self.center != other.center:
            raise ValueError(f"jets expanded at different centers: {self.center} vs {other.center}")

    def _align(self, other):
        self._check_center(other)
        order = min(self.order, other.order)
        size = monomial_basis(order).size
        a, b = self.coeffs[:size], other.coeffs[:size]
        ndim = max(a.ndim, b.ndim) - 1
        return _lift(a, ndim), _lift(b, ndim), order, self.center or other.center

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b, order, center = self._align(other)
            return Jet(a + b, order, center)
        other = np.asarray(other)
        coeffs = _lift(self.coeffs, other.ndim) + np.zeros((1,) + other.shape)
        coeffs = coeffs.astype(np.result_type(coeffs.dtype, other.dtype))
        coeffs[0] = coeffs[0] + other
        return Jet(coeffs, self.order, self.center)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.order, self.center)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b, order, center = self._align(other)
            ii, jj, starts = _product_table(order)
            terms = a[ii] * b[jj]
            return Jet(np.add.reduceat(terms, starts, axis=0), order, center)
        other = np.asarray(other)
        return Jet(_lift(self.coeffs, other.ndim) * other, self.order, self.center)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 0:
            return self.power(n)
        result = Jet.constant(np.ones(self.shape), self.order, self.center)
        for _ in range(int(n)):
            result = result * self
        return result

    # ------------------------------------------------------------------ elementwise functions
    def compose(self, taylor):
        """
        Apply an elementwise function through its Taylor coefficients at the value
        Args:
            taylor: sequence of arrays t_k = f^(k)(value) / k!, k = 0..order
        Returns:
            Jet: f(self) truncated at the jet order
        """
        h = self - self.value
        result = Jet.constant(taylor[self.order], self.order, self.center)
        for k in range(self.order - 1, -1, -1):
            result = result * h + taylor[k]
        return result

    def reciprocal(self):
        x0 = self.value
        if np.any(x0 == 0):
            raise ZeroDivisionError("jet reciprocal of a zero value")
        return self.compose([(-1.0) ** k * x0 ** (-k - 1.0) for k in range(self.order + 1)])

    def power(self, p):
        x0 = self.value
        taylor = []
        coef = 1.0
        for k in range(self.order + 1):
            taylor.append(coef * x0 ** (p - k))
            coef = coef * (p - k) / (k + 1)
        return self.compose(taylor)

    def sqrt(self):
        if np.any(np.asarray(self.value) <= 0):
            raise ValueError("jet sqrt needs a positive value")
        return self.power(0.5)

    def exp(self):
        x0 = self.value
        return self.compose([np.exp(x0) / math.factorial(k) for k in range(self.order + 1)])

    def sin(self):
        x0 = self.value
        return self.compose([np.sin(x0 + k * np.pi / 2) / math.factorial(k) for k in range(self.order + 1)])

    def cos(self):
        x0 = self.value
        return self.compose([np.cos(x0 + k * np.pi / 2) / math.factorial(k) for k in range(self.order + 1)])

    # ------------------------------------------------------------------ value-axis algebra
    def sum(self, axis=-1):
        axis = axis if axis < 0 else axis + 1
        return Jet(self.coeffs.sum(axis=axis), self.order, self.center)

    def matvec(self, matrix):
        """Apply a matrix to the last value axis"""
        return Jet(self.coeffs @ np.asarray(matrix).T, self.order, self.center)

    def dot(self, other):
        """Euclidean contraction over the last value axis"""
        return (self * other).sum(axis=-1)

    def quadratic_form(self, matrix, other=None):
        """self^T M other over the last value axis (other defaults to self)"""
        other = self if other is None else other
        return (self * other.matvec(matrix)).sum(axis=-1)

    def real(self):
        return Jet(self.coeffs.real.copy(), self.order, self.center)

    def __repr__(self):
        return f"Jet(order={self.order}, shape={self.shape}, value={self.value!r})"


def minkowski_dot(a, b):
    """a.b with metric (+,-,-,-) for 4-vector jets"""
    return a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]


def directional(vector, f, spatial_only=False):
    """
    X^nu d_nu f for a 4-vector jet X and a jet f (one order lower than f)
    Args:
        vector: Jet with value shape (4,)
        f: Jet of any value shape
        spatial_only: skip the nu = 0 term (used when X^0 vanishes identically)
    """
    axes = (1, 2, 3) if spatial_only else (0, 1, 2, 3)
    total = None
    for nu in axes:
        term = vector[nu] * f.partial(nu)
        total = term if total is None else total + term
    return total
