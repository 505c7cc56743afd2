"""
Fields evaluated as Taylor jets, free-Dirac propagation, Majorana plane waves
and finite-difference jets on lattices
"""
import logging
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
import pandas as pd

from clifford import CURRENT_FORMS, DIRAC_MASS, DIRAC_OPERATOR, DIRAC_SPATIAL, gamma
from config import DEFAULT_STENCIL_ORDER, STENCIL_ORDERS
from errors import BoundaryTooCloseError, JetOrderError, ZeroAmplitudeError
from jets import Jet, directional, monomial_basis

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------- fields
class Field:
    """
    A field given by an evaluation rule on the coordinate jet
    Args:
        fn: callable mapping the coordinate Jet (value shape (4,)) to a Jet
        value_shape: shape of the field value, () for scalars
        name: label used in logs and reports
    """

    value_shape = None
    is_current = False

    def __init__(self, fn, value_shape=None, name=''):
        self.fn = fn
        if value_shape is not None:
            self.value_shape = tuple(value_shape)
        self.name = name or type(self).__name__

    def evaluate(self, point, order):
        """Jet of the field at point, truncated at order"""
        coords = Jet.coordinates(point, order)
        result = self.fn(coords)
        if not isinstance(result, Jet):
            result = Jet.constant(result, order, point)
        if self.value_shape is not None and result.shape != self.value_shape:
            raise ValueError(f"{self.name}: expected value shape {self.value_shape}, got {result.shape}")
        return result

    def value(self, point):
        return self.evaluate(point, 0).value

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class ScalarField(Field):
    value_shape = ()


class VectorField(Field):
    value_shape = (4,)


class SpinorField(Field):
    value_shape = (4,)


class JetRuleField(Field):
    """Field whose jets come from a rule (point, order) -> Jet"""

    def __init__(self, rule, value_shape=None, name=''):
        super().__init__(None, value_shape, name)
        self.rule = rule

    def evaluate(self, point, order):
        result = self.rule(point, order)
        if self.value_shape is not None and result.shape != self.value_shape:
            raise ValueError(f"{self.name}: expected value shape {self.value_shape}, got {result.shape}")
        return result


def constant_field(value, cls=Field):
    value = np.asarray(value, dtype=float)
    return cls(lambda X: Jet.constant(value, X.order, X.center), value.shape, name='constant')


def directional_derivative(f, X, at, order=1):
    """
    X^nu d_nu f at a point
    Args:
        f: Field
        X: VectorField
        at: spacetime point
        order: jet order of f; the result has order - 1
    Returns:
        Jet: the contraction, one order lower than f's jet
    """
    if order < 1:
        raise JetOrderError("order exhausted: a directional derivative needs order >= 1")
    return directional(X.evaluate(at, order - 1), f.evaluate(at, order))


# ---------------------------------------------------------------------- free Dirac
def dirac_step(phi_jet, params):
    """d0 Phi = sum_l DIRAC_SPATIAL[l] dl Phi + m DIRAC_MASS Phi, one order lower"""
    out = phi_jet.truncate(phi_jet.order - 1).matvec(params.m * DIRAC_MASS)
    for l in range(3):
        out = out + phi_jet.partial(l + 1).matvec(DIRAC_SPATIAL[l])
    return out


def dirac_time_derivatives(phi_data, params, upto):
    """
    Rebuild the full spacetime jet of a free Majorana field from its hyperplane data
    Args:
        phi_data: spinor Jet; only its spatial coefficients are used
        params: object with a mass attribute m
        upto: highest time order to fill in
    Returns:
        Jet: same order as phi_data, time coefficients above upto are zero
    """
    if upto > phi_data.order:
        raise JetOrderError(f"need spatial order >= {upto}, data has order {phi_data.order}")
    order = phi_data.order
    target = monomial_basis(order)
    coeffs = np.zeros((target.size,) + phi_data.shape, dtype=phi_data.coeffs.dtype)
    current = phi_data.spatial_part()
    for a in range(upto + 1):
        basis = monomial_basis(order - a)
        rows = np.flatnonzero(basis.exponents[:, 0] == 0)
        exps = basis.exponents[rows].copy()
        exps[:, 0] = a
        coeffs[target.indices_of(exps)] = current.coeffs[rows] / math.factorial(a)
        if a < upto:
            current = dirac_step(current, params)
    return Jet(coeffs, order, phi_data.center)


def dirac_residual(phi_jet, params):
    """sum_mu (i gamma^mu) d_mu Phi - m Phi, as a jet one order lower"""
    out = -params.m * phi_jet.truncate(phi_jet.order - 1)
    for mu in range(4):
        out = out + phi_jet.partial(mu).matvec(DIRAC_OPERATOR[mu])
    return out


def current_jet(phi_jet):
    """Jet of J^mu = Phi^T (gamma0 gamma^mu) Phi for a real spinor jet"""
    return Jet.stack([phi_jet.quadratic_form(CURRENT_FORMS[mu]) for mu in range(4)])


def current_values(phi):
    """J^mu for an array of real spinors (last axis = spinor index)"""
    return np.einsum('...i,mij,...j->...m', phi, CURRENT_FORMS, phi)


def current_conservation_residual(field, point, order=2):
    """d_mu J^mu of a spinor field at a point, evaluated from jets"""
    J = current_jet(field.evaluate(point, order))
    return float(sum(J[mu].partial(mu).value for mu in range(4)))


# ---------------------------------------------------------------------- plane waves
def _on_shell_operator(momentum, m):
    omega = math.sqrt(float(np.dot(momentum, momentum)) + m * m)
    K = omega * gamma(0).matrix
    for k in range(3):
        K = K - momentum[k] * gamma(k + 1).matrix
    return omega, K


@dataclass(frozen=True)
class PlaneWaveMode:
    """Complex solution chi exp(-i(omega t - p.x)) of the free Dirac equation"""

    momentum: tuple
    seed: tuple
    omega: float
    chi: np.ndarray = dc_field(repr=False, compare=False)

    @classmethod
    def build(cls, momentum, seed, m):
        momentum = np.asarray(momentum, dtype=float)
        seed = np.asarray(seed, dtype=float)
        if not np.all(np.isfinite(momentum)):
            raise ValueError(f"momentum must be finite, got {momentum}")
        omega, K = _on_shell_operator(momentum, m)
        # (K - m)(K + m) = k.k - m^2 = 0, so K + m projects onto solutions
        chi = (K + m * np.eye(4)) @ seed
        if np.linalg.norm(chi) <= 1e-12 * max(np.linalg.norm(seed), 1e-300) * (omega + m):
            raise ZeroAmplitudeError(f"seed {seed} is annihilated by the projector for momentum {momentum}")
        return cls(tuple(momentum), tuple(seed), omega, chi)

    def phase_jet(self, X):
        p = self.momentum
        return self.omega * X[0] - p[0] * X[1] - p[1] * X[2] - p[2] * X[3]


class MajoranaMatter(SpinorField):
    """
    Real superposition of free Majorana plane waves, evaluable as jets or on arrays
    Args:
        modes: list of PlaneWaveMode
        params: object with mass attribute m
    """

    def __init__(self, modes, params, name='majorana-matter'):
        self.modes = list(modes)
        self.params = params
        super().__init__(self._jet_rule, (4,), name)

    def _jet_rule(self, X):
        total = None
        for mode in self.modes:
            theta = mode.phase_jet(X)
            term = theta.cos() * mode.chi.real + theta.sin() * mode.chi.imag
            total = term if total is None else total + term
        return total

    def values(self, t, x, y, z, time_order=0, derivative=None):
        """
        Field or one of its partial derivatives on broadcast coordinate arrays
        Args:
            time_order: number of time derivatives (ignored when derivative is given)
            derivative: multi-index (a, b, c, d) of d0^a d1^b d2^c d3^d
        Returns:
            np.ndarray: shape (..., 4)
        """
        t, x, y, z = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (t, x, y, z)))
        a, b, c, d = derivative if derivative is not None else (time_order, 0, 0, 0)
        out = np.zeros(t.shape + (4,))
        for mode in self.modes:
            p = mode.momentum
            theta = mode.omega * t - p[0] * x - p[1] * y - p[2] * z
            factor = (-1j * mode.omega) ** a * (1j * p[0]) ** b * (1j * p[1]) ** c * (1j * p[2]) ** d
            out += np.real(factor * mode.chi * np.exp(-1j * theta)[..., None])
        return out

    def superpose(self, other):
        return MajoranaMatter(self.modes + other.modes, self.params, self.name)


def majorana_plane_wave(momentum, seed, params):
    """Single-mode free Majorana field"""
    return MajoranaMatter([PlaneWaveMode.build(momentum, seed, params.m)], params, name='plane-wave')


def random_matter(rng, params, n_modes=3, momentum_scale=1.0):
    """Random superposition of plane waves"""
    modes = []
    while len(modes) < n_modes:
        try:
            modes.append(PlaneWaveMode.build(rng.normal(scale=momentum_scale, size=3), rng.normal(size=4), params.m))
        except ZeroAmplitudeError:
            continue
    return MajoranaMatter(modes, params, name=f'random-{n_modes}-modes')


def matter_from_modes(mode_specs, params):
    """Build matter from (momentum, seed) pairs"""
    return MajoranaMatter([PlaneWaveMode.build(p, s, params.m) for p, s in mode_specs], params)


# ---------------------------------------------------------------------- finite differences
def fd_weights_on(offsets, derivative):
    """Weights w_j with sum_j w_j f(x + o_j h) ~ h^n f^(n)(x)"""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    if derivative >= n:
        raise ValueError(f"{n} points cannot resolve derivative order {derivative}")
    powers = np.arange(n)
    V = offsets[None, :] ** powers[:, None] / np.array([math.factorial(k) for k in powers])[:, None]
    rhs = np.zeros(n)
    rhs[derivative] = 1.0
    return np.linalg.solve(V, rhs)


def stencil_radius(derivative, accuracy):
    if derivative == 0:
        return 0
    return (derivative + 1) // 2 - 1 + accuracy // 2


@dataclass(frozen=True)
class Stencil:
    offsets: np.ndarray
    weights: np.ndarray

    @classmethod
    def central(cls, derivative, accuracy=DEFAULT_STENCIL_ORDER):
        if accuracy not in STENCIL_ORDERS:
            raise ValueError(f"stencil accuracy must be one of {STENCIL_ORDERS}, got {accuracy}")
        r = stencil_radius(derivative, accuracy)
        offsets = np.arange(-r, r + 1)
        return cls(offsets, fd_weights_on(offsets, derivative))

    @property
    def radius(self):
        return int(np.max(np.abs(self.offsets)))


def central_difference(fn, point, axis, h=1e-3, richardson=True):
    """
    First partial of a scalar-or-array function by central differences
    Args:
        fn: callable on a 4-point
        richardson: combine steps h and h/2 to cancel the h^2 term
    """
    point = np.asarray(point, dtype=float)
    e = np.zeros(4)
    e[axis] = 1.0

    def diff(step):
        return (np.asarray(fn(point + step * e)) - np.asarray(fn(point - step * e))) / (2 * step)

    if not richardson:
        return diff(h)
    return (4 * diff(h / 2) - diff(h)) / 3


def observed_order(errors, spacings):
    """Convergence order measured between consecutive refinement levels"""
    errors = np.asarray(errors, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(spacings[:-1] / spacings[1:])


# ---------------------------------------------------------------------- lattices
@dataclass
class LatticeGrid:
    """
    Uniform 3D lattice of field values at a fixed time
    Args:
        values: array of shape (nx, ny, nz, *value_shape)
        origin: coordinates of index (0, 0, 0)
        spacing: (hx, hy, hz)
        time: x^0 of the snapshot
    """

    values: np.ndarray
    origin: tuple = (0.0, 0.0, 0.0)
    spacing: tuple = (1.0, 1.0, 1.0)
    time: float = 0.0
    names: tuple = ()

    @property
    def shape(self):
        return self.values.shape[:3]

    @property
    def value_shape(self):
        return self.values.shape[3:]

    def axis_coordinates(self, axis):
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def point(self, index):
        """Spacetime point (t, x, y, z) of a lattice index"""
        return (self.time,) + tuple(self.origin[a] + self.spacing[a] * index[a] for a in range(3))

    def mesh(self):
        return np.meshgrid(*(self.axis_coordinates(a) for a in range(3)), indexing='ij')

    def column_names(self):
        count = int(np.prod(self.value_shape)) if self.value_shape else 1
        if self.names and len(self.names) == count:
            return list(self.names)
        return [f'v{c}' for c in range(count)]

    def to_frame(self):
        idx = np.indices(self.shape).reshape(3, -1).T
        data = {'i': idx[:, 0], 'j': idx[:, 1], 'k': idx[:, 2]}
        for a, name in enumerate(('x', 'y', 'z')):
            data[name] = self.origin[a] + self.spacing[a] * idx[:, a]
        flat = self.values.reshape(len(idx), -1)
        for c, name in enumerate(self.column_names()):
            data[name] = flat[:, c]
        return pd.DataFrame(data)

    def to_csv(self, path):
        """One row per point: indices, coordinates, values"""
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        frame = self.to_frame()
        frame.insert(0, 't', self.time)
        frame.to_csv(path, index=False, float_format='%.17g')
        logger.debug(f"Wrote {len(frame)} grid rows to {path}")

    @classmethod
    def from_csv(cls, path, value_shape=None):
        frame = pd.read_csv(path, float_precision='round_trip')
        frame = frame.sort_values(['i', 'j', 'k'])
        shape = tuple(int(frame[c].max()) + 1 for c in ('i', 'j', 'k'))
        value_cols = [c for c in frame.columns if c not in ('t', 'i', 'j', 'k', 'x', 'y', 'z')]
        values = frame[value_cols].to_numpy().reshape(shape + ((len(value_cols),) if value_shape is None else tuple(value_shape)))
        if value_shape == ():
            values = values.reshape(shape)
        origin = tuple(float(frame[c].iloc[0]) for c in ('x', 'y', 'z'))
        spacing = []
        for a, col in enumerate(('x', 'y', 'z')):
            spacing.append(float(frame[col].iloc[-1] - origin[a]) / (shape[a] - 1) if shape[a] > 1 else 1.0)
        time = float(frame['t'].iloc[0]) if 't' in frame.columns else 0.0
        return cls(values, origin, tuple(spacing), time, tuple(value_cols))


def lattice_jet(grid, index, order, accuracy=DEFAULT_STENCIL_ORDER):
    """
    Spatial Taylor jet of lattice data by tensor-product central stencils
    Args:
        grid: LatticeGrid
        index: (i, j, k) lattice point
        order: total jet order; coefficients with a time power stay zero
        accuracy: stencil order (4 or 6)
    Returns:
        Jet: expanded at grid.point(index)
    """
    basis = monomial_basis(order)
    stencils = [Stencil.central(n, accuracy) for n in range(order + 1)]
    radius = max(s.radius for s in stencils)
    for a in range(3):
        if index[a] - radius < 0 or index[a] + radius >= grid.shape[a]:
            raise BoundaryTooCloseError(
                f"point {tuple(index)} is closer than {radius} cells to the boundary along axis {a + 1}")
    coeffs = np.zeros((basis.size,) + grid.value_shape)
    block = grid.values[tuple(slice(index[a] - radius, index[a] + radius + 1) for a in range(3))]
    for row, exps in enumerate(basis.exponents):
        if exps[0] != 0:
            continue
        deriv = block
        for a in range(3):
            n = int(exps[a + 1])
            w = np.zeros(2 * radius + 1)
            s = stencils[n]
            w[s.offsets + radius] = s.weights / grid.spacing[a] ** n
            deriv = np.tensordot(w, deriv, axes=([0], [0]))
        coeffs[row] = deriv / basis.factorials[row]
    return Jet(coeffs, order, grid.point(index))


class CurrentField(JetRuleField):
    """Vector field holding a current J^mu; consumers take it as J instead of a spinor"""

    is_current = True

    def __init__(self, rule, name='current'):
        super().__init__(rule, (4,), name)


def current_field_of(spinor_field):
    """The current of a real spinor field, exposed only through its jets"""
    return CurrentField(lambda point, order: current_jet(spinor_field.evaluate(point, order)),
                        name=f'J[{spinor_field.name}]')
