"""
Cauchy problem for the potential B with Majorana matter.

The spatial components B^k obey (upper indices, box = d0^2 - Laplacian)

    B''^k = Lap B^k - d_k (B'^0 + div B) + e J^k

with B^0 eliminated algebraically by J.B = 0, i.e. B^0 = J^k B^k / J^0, and
the mu = 0 component is the Gauss-type constraint

    C = -Lap B^0 - d_k B'^k - e J^0 = 0.

The matter field is an analytic free-Dirac solution and never sees B.
On the lattice Lap is built as sum_k D_k D_k from the same first-derivative
stencil D_k, so the semi-discrete constraint obeys dC/dt = -e (J'^0 + D_k J^k).
"""
import copy
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np
import pandas as pd
from numpy.polynomial import hermite

from clifford import CURRENT_FORMS, METRIC
from config import (CFL_SAFETY, DEFAULT_SEED, DEFAULT_STENCIL_ORDER, EVOLVE_LOG_EVERY,
                    FOURTH_DERIV_JET_ORDER, INITIAL_CONSTRAINT_TOL, INSTABILITY_GROWTH,
                    QUADRATURE_NODES, STENCIL_ORDERS, TIME_STENCIL_POINTS, UNIT_CIRCLE_TOL_LATTICE)
from errors import (BoundaryTooCloseError, ConfigError, ConstraintViolatedError, DegeneratePointError,
                    InstabilityError, JetOrderError, VanishingDensityError)
from jets import Jet, monomial_basis
from phase_recovery import fix_signs, recover_at_point
from spinor_ops import PhysParams, gauge_shift
from taylor_fields import (LatticeGrid, ScalarField, Stencil, VectorField, central_difference, constant_field,
                           current_jet, current_values, dirac_time_derivatives, fd_weights_on, lattice_jet,
                           matter_from_modes, observed_order)
from utils import parse_float_list, read_config_file

logger = logging.getLogger(__name__)

DEFAULT_MODES = (
    ((0.3, 0.1, -0.2), (1.0, 0.0, 0.5, 0.0)),
    ((-0.1, 0.25, 0.15), (0.0, 1.0, 0.0, -0.4)),
    ((0.2, -0.3, 0.1), (0.3, 0.0, 1.0, 0.2)),
)


# ---------------------------------------------------------------------- configuration
def _parse_int_tuple(raw, n=3):
    values = [int(round(x)) for x in parse_float_list(raw)]
    if len(values) == 1:
        values = values * n
    if len(values) != n:
        raise ValueError(f"expected {n} integers, got {raw!r}")
    return tuple(values)


def _parse_float_tuple(raw, n=3):
    values = parse_float_list(raw)
    if len(values) != n:
        raise ValueError(f"expected {n} numbers, got {raw!r}")
    return tuple(values)


def parse_modes(raw):
    """'px,py,pz,s1,s2,s3,s4; ...' (or a list of 7-number lists) -> ((p, seed), ...)"""
    groups = raw if isinstance(raw, (list, tuple)) else [g for g in str(raw).split(';') if g.strip()]
    modes = []
    for group in groups:
        numbers = parse_float_list(group)
        if len(numbers) != 7:
            raise ValueError(f"a mode needs 3 momentum and 4 seed numbers, got {group!r}")
        modes.append((tuple(numbers[:3]), tuple(numbers[3:])))
    if not modes:
        raise ValueError("at least one matter mode is required")
    return tuple(modes)


def _parse_bool(raw):
    text = str(raw).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_free_data(raw):
    text = str(raw).strip().lower()
    if text not in ('bumps', 'zero'):
        raise ValueError(f"free_data must be 'bumps' or 'zero', got {raw!r}")
    return text


@dataclass
class SimConfig:
    """Lattice, time stepping, matter and free-data settings of a Cauchy run"""

    shape: tuple = (24, 24, 24)
    h: float = 0.1
    origin: tuple = None
    dt: float = 0.02
    steps: int = 10
    m: float = 1.0
    e: float = 1.0
    modes: tuple = DEFAULT_MODES
    stencil_order: int = DEFAULT_STENCIL_ORDER
    margin: int = 6
    free_data: str = 'bumps'
    bump_amplitude: float = 0.1
    bump_width: float = 0.6
    seed: int = DEFAULT_SEED
    snapshot_every: int = 0
    probe: tuple = None
    quadrature_nodes: int = QUADRATURE_NODES
    csv_every: int = 0
    strict_margin: bool = False
    drift_tol: float = 1e-4
    convergence_levels: int = 0

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        if self.origin is None:
            self.origin = tuple(-0.5 * self.h * (n - 1) for n in self.shape)
        self.origin = tuple(float(x) for x in self.origin)
        if self.probe is None:
            self.probe = tuple(n // 2 for n in self.shape)
        self.probe = tuple(int(i) for i in self.probe)
        self.validate()

    _PARSERS = {
        'shape': _parse_int_tuple,
        'h': float,
        'origin': _parse_float_tuple,
        'dt': float,
        'steps': lambda raw: int(float(raw)),
        'm': float,
        'e': float,
        'modes': parse_modes,
        'stencil_order': lambda raw: int(float(raw)),
        'margin': lambda raw: int(float(raw)),
        'free_data': _parse_free_data,
        'bump_amplitude': float,
        'bump_width': float,
        'seed': lambda raw: int(float(raw)),
        'snapshot_every': lambda raw: int(float(raw)),
        'probe': _parse_int_tuple,
        'quadrature_nodes': lambda raw: int(float(raw)),
        'csv_every': lambda raw: int(float(raw)),
        'strict_margin': _parse_bool,
        'drift_tol': float,
        'convergence_levels': lambda raw: int(float(raw)),
    }

    @classmethod
    def from_file(cls, path):
        """
        Load a config from a key-value file (or JSON)
        Raises:
            ConfigError: with path:line for unknown keys and bad values
        """
        raw, lines = read_config_file(path)
        kwargs = {}
        for key, value in raw.items():
            where = f"{path}:{lines.get(key, 0)}"
            if key not in cls._PARSERS:
                raise ConfigError(f"{where}: unknown key '{key}'")
            if value is None:
                raise ConfigError(f"{where}: key '{key}' has no value")
            try:
                kwargs[key] = cls._PARSERS[key](value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{where}: bad value for '{key}': {e}") from e
        try:
            return cls(**kwargs)
        except ConfigError as e:
            raise ConfigError(f"{path}: {e}") from e

    @property
    def params(self):
        return PhysParams(self.m, self.e)

    @property
    def radius(self):
        """Half-width of the first-derivative stencil"""
        return Stencil.central(1, self.stencil_order).radius

    @property
    def frozen_width(self):
        """Boundary strip where B'' is held at zero (reach of D_k applied twice)"""
        return 2 * self.radius

    @property
    def causal_margin(self):
        return self.frozen_width + self.radius + int(math.ceil(self.steps * self.dt / self.h))

    def validate(self):
        if len(self.shape) != 3 or min(self.shape) < 3:
            raise ConfigError(f"shape must be three sizes >= 3, got {self.shape}")
        if self.h <= 0 or self.dt <= 0:
            raise ConfigError(f"h and dt must be positive, got h={self.h}, dt={self.dt}")
        if self.dt > CFL_SAFETY * self.h:
            raise ConfigError(f"dt = {self.dt} violates dt <= {CFL_SAFETY} * h = {CFL_SAFETY * self.h}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.stencil_order not in STENCIL_ORDERS:
            raise ConfigError(f"stencil_order must be one of {STENCIL_ORDERS}, got {self.stencil_order}")
        if self.m < 0:
            raise ConfigError(f"m must be non-negative, got {self.m}")
        if self.bump_width <= 0:
            raise ConfigError(f"bump_width must be positive, got {self.bump_width}")
        if self.quadrature_nodes < 1:
            raise ConfigError(f"quadrature_nodes must be >= 1, got {self.quadrature_nodes}")
        if self.margin < self.frozen_width + self.radius:
            raise ConfigError(f"margin {self.margin} must be at least {self.frozen_width + self.radius} cells")
        if 2 * self.margin >= min(self.shape):
            raise ConfigError(f"margin {self.margin} leaves no interior in a {self.shape} grid")
        if self.strict_margin and self.margin < self.causal_margin:
            raise ConfigError(f"margin {self.margin} is below the causal margin {self.causal_margin}")
        parse_modes([list(p) + list(s) for p, s in self.modes])

    def as_dict(self):
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out['modes'] = [list(p) + list(s) for p, s in self.modes]
        return out

    def refined(self, factor=2):
        """Same physical box with h and dt divided by factor"""
        shape = tuple((n - 1) * factor + 1 for n in self.shape)
        probe = tuple(i * factor for i in self.probe)
        return replace(self, shape=shape, h=self.h / factor, dt=self.dt / factor, steps=self.steps * factor,
                       margin=self.margin * factor, probe=probe)


# ---------------------------------------------------------------------- free data
class BumpSum(ScalarField):
    """
    Sum of Gaussian bumps A exp(-|x - c|^2 / width^2) in the spatial coordinates
    Args:
        bumps: list of (amplitude, center (3,), width)
        axes: spatial axes (1..3) the bumps depend on
    """

    def __init__(self, bumps, axes=(1, 2, 3), name='bumps'):
        self.bumps = [(float(a), tuple(float(x) for x in c), float(w)) for a, c, w in bumps]
        self.axes = tuple(axes)
        super().__init__(self._jet_rule, (), name)

    def _jet_rule(self, X):
        total = Jet.constant(0.0, X.order, X.center)
        for amplitude, center, width in self.bumps:
            arg = None
            for a in self.axes:
                d = X[a] - center[a - 1]
                arg = d * d if arg is None else arg + d * d
            total = total + amplitude * (arg * (-1.0 / width ** 2)).exp()
        return total

    def values(self, x, y, z, derivative=(0, 0, 0)):
        """Bump sum or a spatial partial derivative on broadcast arrays"""
        coords = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (x, y, z)))
        out = np.zeros(coords[0].shape)
        for amplitude, center, width in self.bumps:
            term = np.full(coords[0].shape, amplitude)
            for a in range(3):
                n = derivative[a]
                if a + 1 not in self.axes:
                    if n:
                        term = term * 0.0
                    continue
                u = (coords[a] - center[a]) / width
                term = term * (-1.0 / width) ** n * hermite.hermval(u, [0] * n + [1]) * np.exp(-u * u)
            out += term
        return out


@dataclass
class FreeData:
    """Arbitrary data on x^0 = 0: B^1..3, B'^1, B'^2 and B'^3 on the plane x^3 = z0"""

    B: tuple
    Bdot12: tuple
    Bdot3_line: BumpSum
    z0: float = 0.0

    @classmethod
    def zero(cls, z0=0.0):
        empty = BumpSum([])
        return cls((empty, empty, empty), (empty, empty), BumpSum([], axes=(1, 2)), z0)

    @classmethod
    def random_bumps(cls, rng, amplitude, width, center_spread, z0=0.0):
        def one(axes=(1, 2, 3)):
            center = rng.uniform(-center_spread, center_spread, size=3)
            return BumpSum([(amplitude * rng.normal(), center, width)], axes=axes)

        return cls((one(), one(), one()), (one(), one()), one(axes=(1, 2)), z0)

    @classmethod
    def from_config(cls, cfg):
        z0 = cfg.origin[2]
        if cfg.free_data == 'zero' or cfg.bump_amplitude == 0:
            return cls.zero(z0)
        extent = min(cfg.h * (n - 1) for n in cfg.shape)
        return cls.random_bumps(np.random.default_rng(cfg.seed), cfg.bump_amplitude, cfg.bump_width,
                                0.15 * extent, z0)


# ---------------------------------------------------------------------- lattice operators
class DiscreteOps:
    """
    Central first-derivative stencil D_k on the trailing three axes of an array,
    and the composite Laplacian sum_k D_k D_k. Values within radius (or 2*radius
    for the Laplacian) of an edge are left at zero.
    """

    def __init__(self, shape, h, accuracy=DEFAULT_STENCIL_ORDER):
        stencil = Stencil.central(1, accuracy)
        self.shape = tuple(shape)
        self.h = float(h)
        self.radius = stencil.radius
        self.terms = [(int(o), float(w)) for o, w in zip(stencil.offsets, stencil.weights) if w != 0.0]

    def d(self, f, axis):
        """D_axis f for axis in 0..2 (spatial x^1..x^3)"""
        ax = f.ndim - 3 + axis
        n, r = f.shape[ax], self.radius
        out = np.zeros_like(f)
        target = [slice(None)] * f.ndim
        target[ax] = slice(r, n - r)
        source = [slice(None)] * f.ndim
        for offset, weight in self.terms:
            source[ax] = slice(r + offset, n - r + offset)
            out[tuple(target)] += weight * f[tuple(source)]
        return out / self.h

    def div(self, F):
        """sum_k D_k F[k] for F of shape (3, nx, ny, nz)"""
        return sum(self.d(F[k], k) for k in range(3))

    def laplacian(self, f):
        return sum(self.d(self.d(f, a), a) for a in range(3))

    def interior(self, width):
        """Slices of the trailing axes that stay width cells away from every edge"""
        return (Ellipsis,) + tuple(slice(width, n - width) for n in self.shape)

    def strip_mask(self, width):
        """True on the boundary strip of the given width"""
        mask = np.ones(self.shape, dtype=bool)
        mask[tuple(slice(width, n - width) for n in self.shape)] = False
        return mask


def matter_currents(matter, X, Y, Z, t):
    """
    J and its time derivative on a grid, component axis first
    Returns:
        tuple: (J, Jdot), each of shape (4, nx, ny, nz)
    """
    phi = matter.values(t, X, Y, Z)
    phidot = matter.values(t, X, Y, Z, time_order=1)
    J = current_values(phi)
    Jdot = (np.einsum('...i,mij,...j->...m', phidot, CURRENT_FORMS, phi)
            + np.einsum('...i,mij,...j->...m', phi, CURRENT_FORMS, phidot))
    return np.moveaxis(J, -1, 0), np.moveaxis(Jdot, -1, 0)


def _require_density(J0, where):
    low = float(np.min(J0))
    if not low > 0:
        raise VanishingDensityError(f"J^0 = {low:.3g} <= 0 on the grid {where}")


def eliminate_b0(J, B):
    """B^0 = J^k B^k / J^0, so that J.B = 0 (leading axis = components)"""
    return np.einsum('k...,k...->...', J[1:], B) / J[0]


def eliminate_b0_dot(J, Jdot, B, Bdot):
    """Time derivative of J^k B^k / J^0"""
    N = np.einsum('k...,k...->...', J[1:], B)
    Ndot = np.einsum('k...,k...->...', Jdot[1:], B) + np.einsum('k...,k...->...', J[1:], Bdot)
    return Ndot / J[0] - N * Jdot[0] / J[0] ** 2


# ---------------------------------------------------------------------- state
@dataclass
class CauchyState:
    """
    Snapshot of B^k and B'^k on the lattice with the analytic matter behind it
    Args:
        B, Bdot: arrays of shape (3, nx, ny, nz)
        time: x^0 of the snapshot
        matter: MajoranaMatter (free-Dirac, never updated from B)
        origin, h: lattice geometry
    """

    B: np.ndarray
    Bdot: np.ndarray
    time: float
    matter: object
    origin: tuple
    h: float
    step: int = 0

    @property
    def shape(self):
        return self.B.shape[1:]

    def mesh(self):
        axes = [self.origin[a] + self.h * np.arange(n) for a, n in enumerate(self.shape)]
        return np.meshgrid(*axes, indexing='ij')

    def currents(self):
        return matter_currents(self.matter, *self.mesh(), self.time)

    def b0(self):
        J, _ = self.currents()
        _require_density(J[0], f"at t = {self.time}")
        return eliminate_b0(J, self.B)

    def constraint(self, ops, e):
        """C = -Lap B^0 - D_k B'^k - e J^0 on the lattice"""
        J, _ = self.currents()
        _require_density(J[0], f"at t = {self.time}")
        return -ops.laplacian(eliminate_b0(J, self.B)) - ops.div(self.Bdot) - e * J[0]

    def norm(self):
        return float(np.sqrt(np.sum(self.B ** 2) + np.sum(self.Bdot ** 2)))

    def to_grid(self):
        """LatticeGrid with columns B1..B3, Bdot1..Bdot3, B0"""
        values = np.concatenate([self.B, self.Bdot, self.b0()[None]], axis=0)
        return LatticeGrid(np.moveaxis(values, 0, -1), self.origin, (self.h,) * 3, self.time,
                           ('B1', 'B2', 'B3', 'Bdot1', 'Bdot2', 'Bdot3', 'B0'))

    def to_csv(self, directory):
        path = os.path.join(directory, f"cauchy_step{self.step:05d}.csv")
        self.to_grid().to_csv(path)
        return path


# ---------------------------------------------------------------------- initial data
def _matter_derivatives(matter, x, y, z, t=0.0):
    """
    J, dJ/dx^a and d^2J/(dx^a)^2 at points (component axis last)
    Returns:
        tuple: (J, dJ, d2J) with dJ, d2J of shape (3, ..., 4)
    """
    def phi(a=0, b=0, c=0, d=0):
        return matter.values(t, x, y, z, derivative=(a, b, c, d))

    def form(p, q):
        return np.einsum('...i,mij,...j->...m', p, CURRENT_FORMS, q)

    base = phi()
    J = form(base, base)
    dJ, d2J = [], []
    for a in range(3):
        unit = [0, 0, 0, 0]
        unit[a + 1] = 1
        first = phi(*unit)
        unit[a + 1] = 2
        second = phi(*unit)
        dJ.append(form(first, base) + form(base, first))
        d2J.append(2 * form(first, first) + form(second, base) + form(base, second))
    return J, np.array(dJ), np.array(d2J)


def laplacian_b0(free, matter, x, y, z):
    """Analytic Lap (J^k B^k / J^0) on x^0 = 0 by the quotient rule"""
    J, dJ, d2J = _matter_derivatives(matter, x, y, z)
    Bk = [f.values(x, y, z) for f in free.B]
    N, D = sum(J[..., k + 1] * Bk[k] for k in range(3)), J[..., 0]
    lap = 0.0
    for a in range(3):
        unit = [0, 0, 0]
        unit[a] = 1
        dB = [f.values(x, y, z, tuple(unit)) for f in free.B]
        unit[a] = 2
        d2B = [f.values(x, y, z, tuple(unit)) for f in free.B]
        dN = sum(dJ[a][..., k + 1] * Bk[k] + J[..., k + 1] * dB[k] for k in range(3))
        d2N = sum(d2J[a][..., k + 1] * Bk[k] + 2 * dJ[a][..., k + 1] * dB[k] + J[..., k + 1] * d2B[k]
                  for k in range(3))
        dD, d2D = dJ[a][..., 0], d2J[a][..., 0]
        lap = lap + d2N / D - 2 * dN * dD / D ** 2 - N * d2D / D ** 2 + 2 * N * dD ** 2 / D ** 3
    return lap


def gauss_source(free, matter, params, x, y, z):
    """F = -Lap B^0 - d1 B'^1 - d2 B'^2 - e J^0, so the constraint reads d3 B'^3 = F"""
    J0 = current_values(matter.values(0.0, x, y, z))[..., 0]
    _require_density(J0, "on the initial hyperplane")
    return (-laplacian_b0(free, matter, x, y, z)
            - free.Bdot12[0].values(x, y, z, (1, 0, 0))
            - free.Bdot12[1].values(x, y, z, (0, 1, 0))
            - params.e * J0)


def bdot3_at(free, matter, params, points, h, nodes=QUADRATURE_NODES):
    """
    B'^3 at arbitrary spatial points: line value plus Gauss-Legendre panels from z0
    Args:
        points: (n, 3) spatial coordinates
        h: panel length bound
    """
    xi, wq = np.polynomial.legendre.leggauss(nodes)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(points))
    for i, (x, y, z) in enumerate(points):
        length = z - free.z0
        panels = max(1, int(math.ceil(abs(length) / h)))
        edges = free.z0 + length * np.arange(panels + 1) / panels
        half = 0.5 * (edges[1:] - edges[:-1])
        zq = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * xi[None, :]
        F = gauss_source(free, matter, params, np.full(zq.shape, x), np.full(zq.shape, y), zq)
        out[i] = free.Bdot3_line.values(x, y, free.z0) + float(np.sum(half[:, None] * wq[None, :] * F))
    return out


def initial_constraint_residual(free, matter, params, point, h, nodes=QUADRATURE_NODES, fd_step=1e-3):
    """
    d3 B'^3 by Richardson central differences of the quadrature minus F
    Args:
        point: spatial point (x, y, z)
    """
    x, y, z = (float(c) for c in point)

    def bdot3(p4):
        return bdot3_at(free, matter, params, [p4[1:]], h, nodes)[0]

    d3 = central_difference(bdot3, (0.0, x, y, z), 3, h=fd_step)
    return float(d3 - gauss_source(free, matter, params, x, y, z))


def make_initial_data(cfg, free=None, matter=None, check_points=None):
    """
    Constraint-satisfying data on x^0 = 0
    Args:
        cfg: SimConfig
        free: FreeData (default from cfg)
        matter: MajoranaMatter (default from cfg.modes)
        check_points: spatial points where the constraint is checked by finite
            differences (default: the probe)
    Returns:
        CauchyState
    Raises:
        VanishingDensityError: J^0 <= 0 somewhere on the grid
        ConstraintViolatedError: quadrature residual above INITIAL_CONSTRAINT_TOL
    """
    params = cfg.params
    free = FreeData.from_config(cfg) if free is None else free
    matter = matter_from_modes(cfg.modes, params) if matter is None else matter
    state = CauchyState(np.zeros((3,) + cfg.shape), np.zeros((3,) + cfg.shape), 0.0, matter,
                        cfg.origin, cfg.h)
    X, Y, Z = state.mesh()
    J, _ = matter_currents(matter, X, Y, Z, 0.0)
    _require_density(J[0], "on the initial hyperplane")

    B = np.array([f.values(X, Y, Z) for f in free.B])
    Bdot = np.empty_like(B)
    Bdot[0] = free.Bdot12[0].values(X, Y, Z)
    Bdot[1] = free.Bdot12[1].values(X, Y, Z)

    # per-cell Gauss-Legendre integrals of F along x^3, accumulated from z0
    xi, wq = np.polynomial.legendre.leggauss(cfg.quadrature_nodes)
    zq = Z[..., :-1, None] + 0.5 * cfg.h * (1 + xi)
    F = gauss_source(free, matter, params, X[..., :-1, None], Y[..., :-1, None], zq)
    cells = 0.5 * cfg.h * np.einsum('...q,q->...', F, wq)
    line = free.Bdot3_line.values(X[..., 0], Y[..., 0], Z[..., 0])
    integral = np.concatenate([np.zeros(cfg.shape[:2] + (1,)), np.cumsum(cells, axis=-1)], axis=-1)
    Bdot[2] = line[..., None] + integral
    if abs(free.z0 - cfg.origin[2]) > 1e-12 * max(1.0, abs(free.z0)):
        Bdot[2] = bdot3_at(free, matter, params, np.stack([X, Y, Z], -1).reshape(-1, 3), cfg.h,
                           cfg.quadrature_nodes).reshape(cfg.shape)

    state = replace(state, B=B, Bdot=Bdot)
    if check_points is None:
        check_points = [tuple(float(axis[cfg.probe]) for axis in state.mesh())]
    for point in check_points:
        residual = initial_constraint_residual(free, matter, params, point, cfg.h, cfg.quadrature_nodes)
        scale = max(1.0, abs(params.e) * float(np.max(J[0])))
        if abs(residual) > INITIAL_CONSTRAINT_TOL * scale:
            raise ConstraintViolatedError(
                f"Gauss constraint residual {residual:.3g} at {tuple(point)} exceeds {INITIAL_CONSTRAINT_TOL * scale:.3g}")
    logger.info(f"✓ Initial data on {cfg.shape} grid, h = {cfg.h}, constraint checked at {len(check_points)} point(s)")
    return state


# ---------------------------------------------------------------------- evolution
class CauchyEvolver:
    """
    Method-of-lines integrator for (B, B') with classical RK4
    Args:
        cfg: SimConfig
        matter: the analytic matter carried by the states
    """

    def __init__(self, cfg, matter):
        self.cfg = cfg
        self.matter = matter
        self.e = cfg.e
        self.ops = DiscreteOps(cfg.shape, cfg.h, cfg.stencil_order)
        self.frozen = self.ops.strip_mask(cfg.frozen_width)
        axes = [cfg.origin[a] + cfg.h * np.arange(n) for a, n in enumerate(cfg.shape)]
        self.mesh = np.meshgrid(*axes, indexing='ij')

    def acceleration(self, B, Bdot, t):
        """B''^k = Lap B^k - D_k (B'^0 + D.B) + e J^k, zero on the frozen strip"""
        J, Jdot = matter_currents(self.matter, *self.mesh, t)
        _require_density(J[0], f"at t = {t:.6g}")
        g = eliminate_b0_dot(J, Jdot, B, Bdot) + self.ops.div(B)
        acc = self.ops.laplacian(B) - np.array([self.ops.d(g, k) for k in range(3)]) + self.e * J[1:]
        acc[:, self.frozen] = 0.0
        return acc

    def step(self, state):
        """One RK4 step; returns a new state and leaves the input untouched"""
        dt, t = self.cfg.dt, state.time
        B, V = state.B, state.Bdot
        k1B, k1V = V, self.acceleration(B, V, t)
        k2B = V + 0.5 * dt * k1V
        k2V = self.acceleration(B + 0.5 * dt * k1B, k2B, t + 0.5 * dt)
        k3B = V + 0.5 * dt * k2V
        k3V = self.acceleration(B + 0.5 * dt * k2B, k3B, t + 0.5 * dt)
        k4B = V + dt * k3V
        k4V = self.acceleration(B + dt * k3B, k4B, t + dt)
        B_new = B + dt / 6 * (k1B + 2 * k2B + 2 * k3B + k4B)
        V_new = V + dt / 6 * (k1V + 2 * k2V + 2 * k3V + k4V)
        return replace(state, B=B_new, Bdot=V_new, time=t + dt, step=state.step + 1)

    def states(self, state, steps=None):
        """
        Yield the state after every step
        Raises:
            InstabilityError: non-finite values or norm growth beyond INSTABILITY_GROWTH
        """
        steps = self.cfg.steps if steps is None else steps
        reference = max(state.norm(), 1.0)
        for _ in range(steps):
            state = self.step(state)
            norm = state.norm()
            if not math.isfinite(norm) or norm > INSTABILITY_GROWTH * reference:
                raise InstabilityError(f"field norm {norm:.3g} at step {state.step} (initial {reference:.3g})")
            yield state

    def constraint(self, state):
        return state.constraint(self.ops, self.e)


@dataclass
class EvolutionRun:
    """Outcome of an evolution: kept snapshots and the per-step diagnostics"""

    config: SimConfig
    snapshots: list
    times: list = field(default_factory=list)
    drift: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    jb_max: float = 0.0
    causally_shielded: bool = True
    csv_files: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def max_drift(self):
        return max(self.drift) if self.drift else 0.0

    def to_frame(self):
        return pd.DataFrame({'time': self.times, 'constraint_drift': self.drift, 'norm': self.norms})

    def summary(self):
        return {
            'steps': self.config.steps,
            'final_time': self.times[-1] if self.times else 0.0,
            'max_constraint_drift': self.max_drift,
            'constraint_drift': list(self.drift),
            'times': list(self.times),
            'norms': list(self.norms),
            'jb_max': self.jb_max,
            'causally_shielded': self.causally_shielded,
            'causal_margin': self.config.causal_margin,
            'margin': self.config.margin,
            'csv_files': list(self.csv_files),
            'wall_time': self.wall_time,
        }


def _jb_residual(state):
    J, _ = state.currents()
    B0 = eliminate_b0(J, state.B)
    return float(np.max(np.abs(J[0] * B0 - np.einsum('k...,k...->...', J[1:], state.B))))


def evolve(state, cfg, csv_dir=None, keep_all=False):
    """
    Advance a Cauchy state and monitor the Gauss constraint on the interior
    Args:
        state: CauchyState at the initial time
        cfg: SimConfig (steps, dt, snapshot_every, csv_every, margin)
        csv_dir: directory for CSV snapshots when cfg.csv_every > 0
        keep_all: keep every state, not only every snapshot_every-th one
    Returns:
        EvolutionRun: drift[n] = max |C(t_n) - C(0)| over the interior
    """
    start = time.time()
    evolver = CauchyEvolver(cfg, state.matter)
    inner = evolver.ops.interior(cfg.margin)
    shielded = cfg.margin >= cfg.causal_margin
    if not shielded:
        logger.warning(f"⚠️ Margin {cfg.margin} is below the causal margin {cfg.causal_margin}; "
                       f"interior values may feel the open boundary")

    logger.info(f"{'='*80}")
    logger.info(f"CAUCHY EVOLUTION: {cfg.shape} grid, h = {cfg.h}, dt = {cfg.dt}, {cfg.steps} steps")
    logger.info(f"{'='*80}")

    C0 = evolver.constraint(state)[inner]
    run = EvolutionRun(cfg, [state], [state.time], [0.0], [state.norm()], _jb_residual(state), shielded)
    if csv_dir and cfg.csv_every > 0:
        run.csv_files.append(state.to_csv(csv_dir))

    for current in evolver.states(state):
        drift = float(np.max(np.abs(evolver.constraint(current)[inner] - C0)))
        run.times.append(current.time)
        run.drift.append(drift)
        run.norms.append(current.norm())
        last = current.step == cfg.steps
        if keep_all or last or (cfg.snapshot_every > 0 and current.step % cfg.snapshot_every == 0):
            run.snapshots.append(current)
            run.jb_max = max(run.jb_max, _jb_residual(current))
        if csv_dir and cfg.csv_every > 0 and (current.step % cfg.csv_every == 0 or last):
            run.csv_files.append(current.to_csv(csv_dir))
        if current.step % EVOLVE_LOG_EVERY == 0:
            logger.info(f"  step {current.step}/{cfg.steps}: t = {current.time:.4f}, drift = {drift:.3e}")

    run.wall_time = time.time() - start
    logger.info(f"✓ Evolution done in {run.wall_time:.1f}s, max constraint drift {run.max_drift:.3e}")
    return run


def constraint_convergence(cfg, levels=2, factor=2, free=None):
    """
    Constraint drift at the final time under simultaneous h and dt refinement
    Returns:
        dict: spacings, drifts, observed orders and the nominal order
    """
    spacings, drifts = [], []
    level_cfg = cfg
    for level in range(levels):
        state = make_initial_data(level_cfg, free=free)
        run = evolve(state, level_cfg)
        spacings.append(level_cfg.h)
        drifts.append(run.drift[-1])
        logger.info(f"  level {level}: h = {level_cfg.h}, final drift {run.drift[-1]:.3e}")
        level_cfg = level_cfg.refined(factor)
    orders = observed_order(drifts, spacings) if levels > 1 else np.array([])
    return {
        'spacings': spacings,
        'drifts': drifts,
        'orders': [float(o) for o in orders],
        'nominal_order': cfg.stencil_order,
    }


# ---------------------------------------------------------------------- jet-level Cauchy problem
def extract_J_from_B(B, params):
    """
    J^mu = (box B^mu - g^{mu mu} d_mu (d_nu B^nu)) / e from a 4-vector jet of B
    Args:
        B: Jet with value shape (4,), upper components, order >= 2
        params: PhysParams with e != 0
    Returns:
        Jet: current, two orders lower
    """
    e = params.require_charge()
    if B.order < 2:
        raise JetOrderError(f"current extraction needs B jets of order >= 2, got {B.order}")
    div = sum(B[nu].partial(nu) for nu in range(4))
    components = []
    for mu in range(4):
        first = [B[mu].partial(a) for a in range(4)]
        box = first[0].partial(0) - sum(first[l].partial(l) for l in range(1, 4))
        sign = 1.0 if mu == 0 else -1.0
        components.append((box - sign * div.partial(mu)) / e)
    return Jet.stack(components)


def _gauss_source_jet(free, matter, params, center, order):
    """Spatial jet of F = -Lap B^0 - d1 B'^1 - d2 B'^2 - e J^0 on x^0 = 0"""
    J = current_jet(matter.evaluate(center, order + 2)).spatial_part()
    B = [f.evaluate(center, order + 2) for f in free.B]
    B0 = (J[1] * B[0] + J[2] * B[1] + J[3] * B[2]) / J[0]
    lap = sum(B0.partial(a).partial(a) for a in range(1, 4))
    d1 = free.Bdot12[0].evaluate(center, order + 1).partial(1)
    d2 = free.Bdot12[1].evaluate(center, order + 1).partial(2)
    return (-lap - d1 - d2 - params.e * J[0]).truncate(order).spatial_part()


def _line_integral_jet(free, matter, params, point, order, nodes=QUADRATURE_NODES, panel=0.1):
    """Jet in (x^1, x^2) of the x^3-integral of F from z0 to the point's x^3"""
    basis = monomial_basis(order)
    keep = (basis.exponents[:, 0] == 0) & (basis.exponents[:, 3] == 0)
    coeffs = np.zeros(basis.size)
    length = point[3] - free.z0
    if length != 0.0:
        xi, wq = np.polynomial.legendre.leggauss(nodes)
        panels = max(1, int(math.ceil(abs(length) / panel)))
        edges = free.z0 + length * np.arange(panels + 1) / panels
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            for x, w in zip(0.5 * (lo + hi) + half * xi, wq):
                F = _gauss_source_jet(free, matter, params, (0.0, point[1], point[2], x), order)
                coeffs += half * w * F.coeffs * keep
    return Jet(coeffs, order, point)


def initial_data_jets(free, matter, params, point, order, nodes=QUADRATURE_NODES):
    """
    Jets of B^k and B'^k on x^0 = 0 at a point, with B'^3 fixed by the Gauss constraint
    Returns:
        tuple: (B_data, Bdot_data), spatial jets with value shape (3,)
    """
    point = tuple(float(x) for x in point)
    if point[0] != 0.0:
        raise DegeneratePointError(f"initial data lives on x^0 = 0, got x^0 = {point[0]}")
    B_data = Jet.stack([f.evaluate(point, order) for f in free.B]).spatial_part()
    bdot3 = (free.Bdot3_line.evaluate(point, order)
             + _line_integral_jet(free, matter, params, point, order, nodes)
             + _gauss_source_jet(free, matter, params, point, order - 1).antiderivative(3))
    Bdot_data = Jet.stack([free.Bdot12[0].evaluate(point, order), free.Bdot12[1].evaluate(point, order),
                           bdot3]).spatial_part()
    return B_data, Bdot_data


def formal_cauchy_jet(point, free, matter, params, order=FOURTH_DERIV_JET_ORDER, nodes=QUADRATURE_NODES):
    """
    Taylor jet of the Cauchy solution around a point of x^0 = 0
    Time orders are filled in by Picard iteration of
    B^k = data + x^0 B'^k data + double x^0-primitive of (Lap B^k - d_k(B'^0 + div B) + e J^k)
    with B^0 = J^k B^k / J^0 and J from the analytic matter.
    Returns:
        Jet: (B^0, B^1, B^2, B^3), exact through the given order
    """
    B_data, Bdot_data = initial_data_jets(free, matter, params, point, order, nodes)
    J = current_jet(matter.evaluate(point, order))
    if float(J[0].value) <= 0:
        raise VanishingDensityError(f"J^0 = {float(J[0].value):.3g} at {point}")
    t = Jet.variable(0, B_data.center, order)
    base = B_data + t * Bdot_data
    B = base
    for _ in range(order + 1):
        B0 = (J[1] * B[0] + J[2] * B[1] + J[3] * B[2]) / J[0]
        g = B0.partial(0) + sum(B[k].partial(k + 1) for k in range(3))
        rhs = []
        for k in range(3):
            lap = sum(B[k].partial(a).partial(a) for a in range(1, 4))
            rhs.append(lap - g.partial(k + 1) + params.e * J[k + 1].truncate(order - 2))
        update = base + Jet.stack(rhs).antiderivative(0).antiderivative(0)
        if np.array_equal(update.coeffs, B.coeffs):
            break
        B = update
    B0 = (J[1] * B[0] + J[2] * B[1] + J[3] * B[2]) / J[0]
    return Jet.stack([B0, B[0], B[1], B[2]])


@dataclass
class FourthDerivative:
    """Fourth time derivatives of B at a point with the recovery that produced them"""

    point: tuple
    Bk: np.ndarray
    B0: float
    current: np.ndarray
    phi: np.ndarray
    phase: float
    det: float

    @property
    def vector(self):
        return np.concatenate([[self.B0], self.Bk])

    def compare(self, reference, rel_tol):
        """Per-component table against a reference (B^0, B^1, B^2, B^3)"""
        reference = np.asarray(reference, dtype=float)
        scale = max(float(np.max(np.abs(reference))), 1e-300)
        computed = self.vector
        table = pd.DataFrame({
            'component': ['B0', 'B1', 'B2', 'B3'],
            'computed': computed,
            'reference': reference,
        })
        table['abs_error'] = np.abs(table['computed'] - table['reference'])
        table['rel_error'] = table['abs_error'] / scale
        table['passed'] = table['rel_error'] <= rel_tol
        return table


def _fourth_from_tower(B, tower, params):
    """
    B^{k(IV)} from the twice time-differentiated field equation and B^{0(IV)}
    from the fourth time derivative of J.B = 0
    Args:
        B: 4-vector jet of order >= 4 whose time coefficients up to 3 are known
        tower: spinor jet of order 4 with all time derivatives from the Dirac equation
    """
    Jm = current_jet(tower)
    Bs = B[1:].truncate(4)
    B0 = (Jm[1] * Bs[0] + Jm[2] * Bs[1] + Jm[3] * Bs[2]) / Jm[0]

    def d(jet, t, spatial=(0, 0, 0)):
        return float(jet.derivative((t,) + tuple(spatial)))

    units = [tuple(int(a == b) for b in range(3)) for a in range(3)]
    Bk4 = np.empty(3)
    for k in range(3):
        lap = sum(d(Bs[k], 2, 2 * np.array(units[a])) for a in range(3))
        grad_div = sum(d(Bs[l], 2, np.add(units[l], units[k])) for l in range(3))
        Bk4[k] = lap - d(B0, 3, units[k]) - grad_div + params.e * d(Jm[k + 1], 2)

    Bt = [[d(B0, n)] + [d(Bs[k], n) for k in range(3)] for n in range(4)]
    Jt = [[d(Jm[mu], n) for mu in range(4)] for n in range(5)]
    total = sum(Jt[0][k + 1] * Bk4[k] for k in range(3))
    for n in range(1, 5):
        total -= math.comb(4, n) * (Jt[n][0] * Bt[4 - n][0]
                                    - sum(Jt[n][k + 1] * Bt[4 - n][k + 1] for k in range(3)))
    return Bk4, total / Jt[0][0], np.array([Jt[0][mu] for mu in range(4)])


def fourth_derivative_B(B, params, tol=UNIT_CIRCLE_TOL_LATTICE, point=None):
    """
    Fourth time derivatives of B at a point of x^0 = 0 from B's jets up to time order 3
    Args:
        B: 4-vector jet of order >= 9 (coefficients above time order 3 are ignored)
        params: PhysParams with e != 0
        tol: unit-circle tolerance for the phase recovery
    Returns:
        FourthDerivative
    Raises:
        DegeneratePointError: no matter at the point
    """
    if B.order < FOURTH_DERIV_JET_ORDER:
        raise JetOrderError(f"fourth derivatives need B jets of order >= {FOURTH_DERIV_JET_ORDER}, got {B.order}")
    Bt = B.time_truncated(3)
    J = extract_J_from_B(Bt, params)
    if float(J[0].value) <= 0:
        raise DegeneratePointError(f"extracted J^0 = {float(J[0].value):.3g}; no matter at this point")
    rec = recover_at_point(J, params, tol, point)
    tower = dirac_time_derivatives(rec.phi_jet.truncate(4).spatial_part(), params, upto=4)
    Bk4, B04, J_value = _fourth_from_tower(Bt, tower, params)
    return FourthDerivative(rec.point, Bk4, B04, J_value, rec.phi_spinor, rec.solution.phi, rec.solution.det)


def formal_fourth_derivative_check(free, matter, params, point, rel_tol=1e-8):
    """fourth_derivative_B on the formal Cauchy jet against its own fourth time coefficients"""
    B = formal_cauchy_jet(point, free, matter, params, FOURTH_DERIV_JET_ORDER)
    reference = np.array([float(B[mu].derivative((4, 0, 0, 0))) for mu in range(4)])
    result = fourth_derivative_B(B, params, point=point)
    table = result.compare(reference, rel_tol)
    return result, table


# ---------------------------------------------------------------------- lattice fourth derivative
class SnapshotStack:
    """
    TIME_STENCIL_POINTS consecutive states; time derivatives at the middle one
    by centered finite differences
    """

    def __init__(self, states, dt):
        if len(states) != TIME_STENCIL_POINTS:
            raise ValueError(f"need {TIME_STENCIL_POINTS} consecutive snapshots, got {len(states)}")
        self.states = list(states)
        self.dt = dt
        self.half = TIME_STENCIL_POINTS // 2
        self.offsets = np.arange(-self.half, self.half + 1)
        self.B = np.array([s.B for s in self.states])
        self.B0 = np.array([s.b0() for s in self.states])

    @property
    def center(self):
        return self.states[self.half]

    def derivative(self, n):
        """(d^n B^k, d^n B^0) at the middle time"""
        w = fd_weights_on(self.offsets, n) / self.dt ** n
        return np.tensordot(w, self.B, axes=1), np.tensordot(w, self.B0, axes=1)

    def gauge_shifted(self, theta, params):
        """
        Copy with every snapshot moved by gauge_shift: B_mu -> B_mu + theta_{,mu} / e
        on covariant components, sampled at the lattice points
        Args:
            theta: ScalarField
            params: PhysParams with e != 0
        """
        shift = gauge_shift(constant_field(np.zeros(4), VectorField), theta, params)
        out = copy.copy(self)
        out.B, out.B0 = self.B.copy(), self.B0.copy()
        for n, state in enumerate(self.states):
            for idx in np.ndindex(*state.shape):
                point = (state.time,) + tuple(state.origin[a] + state.h * idx[a] for a in range(3))
                upper = METRIC @ shift.evaluate(point, 0).value
                out.B0[(n,) + idx] += upper[0]
                out.B[(n, slice(None)) + idx] += upper[1:]
        return out


def lattice_currents(stack, ops, params):
    """
    J and J' on the lattice at the middle time of a snapshot stack,
    J^mu = (box B^mu - g^{mu mu} D_mu (B'^0 + D.B)) / e with time derivatives from the stack
    Returns:
        tuple: (J, Jdot), arrays of shape (4, nx, ny, nz)
    """
    e = params.require_charge()
    B, B0 = stack.derivative(0)
    B1, B01 = stack.derivative(1)
    B2, B02 = stack.derivative(2)
    B3, _ = stack.derivative(3)

    def current(Bk, Bk2, B0_, B0_1, Bk_1):
        # Bk, its second time derivative, B^0, its first time derivative, B'^k
        J0 = -ops.laplacian(B0_) - ops.div(Bk_1)
        g = B0_1 + ops.div(Bk)
        Jk = [Bk2[k] - ops.laplacian(Bk[k]) + ops.d(g, k) for k in range(3)]
        return np.array([J0] + Jk) / e

    J = current(B, B2, B0, B01, B1)
    Jdot = current(B1, B3, B01, B02, B2)
    return J, Jdot


def _with_time_slope(J, Jdot):
    """Put the spatial coefficients of Jdot on the x^0-linear monomials of J"""
    basis = monomial_basis(J.order)
    low = monomial_basis(Jdot.order)
    rows = np.flatnonzero(low.exponents[:, 0] == 0)
    exps = low.exponents[rows].copy()
    exps[:, 0] = 1
    coeffs = J.coeffs.copy()
    coeffs[basis.indices_of(exps)] = Jdot.coeffs[rows]
    return Jet(coeffs, J.order, J.center)


def _lattice_b_jet(stack, index, accuracy):
    """4-vector jet of B at a lattice point: time coefficients from the stack, spatial from stencils"""
    state = stack.center
    basis = monomial_basis(4)
    coeffs = np.zeros((basis.size, 4))
    for n in range(4):
        Bn, B0n = stack.derivative(n)
        values = np.moveaxis(np.concatenate([B0n[None], Bn]), 0, -1)
        grid = LatticeGrid(values, state.origin, (state.h,) * 3, state.time)
        spatial = lattice_jet(grid, index, 4 - n, accuracy)
        low = monomial_basis(4 - n)
        rows = np.flatnonzero(low.exponents[:, 0] == 0)
        exps = low.exponents[rows].copy()
        exps[:, 0] = n
        coeffs[basis.indices_of(exps)] = spatial.coeffs[rows] / math.factorial(n)
    return Jet(coeffs, 4, grid.point(index))


def fourth_derivative_on_lattice(stack, cfg, index=None, neighbourhood=None):
    """
    End-to-end extraction at a lattice point of the middle snapshot:
    lattice J from B, phase recovery on a neighbourhood, lattice jet of the
    recovered field, Dirac time tower and the fourth-derivative formulas
    Returns:
        tuple: (FourthDerivative, reference (B^0..B^3) from the snapshot stack)
    """
    params = cfg.params
    index = tuple(cfg.probe if index is None else index)
    if neighbourhood is None:
        neighbourhood = Stencil.central(4, cfg.stencil_order).radius
    ops = DiscreteOps(cfg.shape, cfg.h, cfg.stencil_order)
    reach = 2 * ops.radius + Stencil.central(3, cfg.stencil_order).radius + neighbourhood
    for a in range(3):
        if index[a] < reach or index[a] >= cfg.shape[a] - reach:
            raise BoundaryTooCloseError(f"probe {index} needs {reach} cells to every edge")

    J, Jdot = lattice_currents(stack, ops, params)
    state = stack.center
    spacing = (cfg.h,) * 3
    J_grid = LatticeGrid(np.moveaxis(J, 0, -1), state.origin, spacing, state.time)
    Jdot_grid = LatticeGrid(np.moveaxis(Jdot, 0, -1), state.origin, spacing, state.time)

    points, spinors, at_probe = [], [], None
    offsets = range(-neighbourhood, neighbourhood + 1)
    for di in offsets:
        for dj in offsets:
            for dk in offsets:
                idx = (index[0] + di, index[1] + dj, index[2] + dk)
                jet = _with_time_slope(lattice_jet(J_grid, idx, 3, cfg.stencil_order),
                                       lattice_jet(Jdot_grid, idx, 2, cfg.stencil_order))
                rec = recover_at_point(jet, params, UNIT_CIRCLE_TOL_LATTICE, J_grid.point(idx))
                points.append(rec.point)
                spinors.append(rec.phi_spinor)
                if idx == index:
                    at_probe = rec
    fixed = fix_signs(points, spinors)
    n = 2 * neighbourhood + 1
    corner = J_grid.point(tuple(i - neighbourhood for i in index))[1:]
    phi_grid = LatticeGrid(fixed.reshape(n, n, n, 4), corner, spacing, state.time)
    phi_data = lattice_jet(phi_grid, (neighbourhood,) * 3, 4, cfg.stencil_order)
    B = _lattice_b_jet(stack, index, cfg.stencil_order)
    # same point, possibly a different rounding of its coordinates
    phi_data = Jet(phi_data.coeffs, phi_data.order, B.center)
    tower = dirac_time_derivatives(phi_data, params, upto=4)

    Bk4, B04, J_value = _fourth_from_tower(B, tower, params)
    result = FourthDerivative(at_probe.point, Bk4, B04, J_value, at_probe.phi_spinor,
                              at_probe.solution.phi, at_probe.solution.det)
    B4, B04_ref = stack.derivative(4)
    reference = np.concatenate([[B04_ref[index]], B4[(slice(None),) + index]])
    return result, reference


def lattice_fourth_derivative_check(cfg, at_step=None, free=None, rel_tol=1e-2):
    """
    Evolve the configured data and compare the extracted fourth derivatives with the
    snapshot-stack reference at the probe
    Args:
        at_step: middle step of the stack (default: half the stencil)
    Returns:
        dict: comparison table records, max relative error and pass flag
    """
    half = TIME_STENCIL_POINTS // 2
    at_step = half if at_step is None else int(at_step)
    if at_step < half:
        raise ConfigError(f"the time stencil needs at least {half} steps before the probe time")
    steps = at_step + half
    run_cfg = replace(cfg, steps=steps)
    state = make_initial_data(run_cfg, free=free)
    run = evolve(state, run_cfg, keep_all=True)
    stack = SnapshotStack(run.snapshots[at_step - half:at_step + half + 1], cfg.dt)
    result, reference = fourth_derivative_on_lattice(stack, run_cfg)
    table = result.compare(reference, rel_tol)
    logger.info(f"Fourth derivative at step {at_step} (t = {stack.center.time:.4f}):\n{table.to_string(index=False)}")
    return {
        'time': stack.center.time,
        'probe': list(cfg.probe),
        'table': table.to_dict(orient='records'),
        'max_rel_error': float(table['rel_error'].max()),
        'passed': bool(table['passed'].all()),
        'determinant': result.det,
        'phase': result.phase,
    }
