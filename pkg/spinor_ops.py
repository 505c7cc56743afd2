"""
Pointwise spinor constructions: currents, phase decomposition, reconstruction
of a Majorana spinor from its current, chiral rotations, the ghost field and
gauge shifts
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from clifford import (CHIRAL_GENERATOR, CURRENT_FORMS, METRIC, U_FORMS, V_FORMS,
                      bilinear, dirac_adjoint, gamma)
from config import DEFAULT_TOL, DEGENERATE_AXIS_EPS
from errors import (AxialCurrentNonzeroError, ConstraintViolatedError, CurrentMismatchError,
                    DegenerateAxisError, NonpositiveDensityError, NotNullError, ZeroChargeError,
                    ZeroSpinorError)
from jets import Jet
from taylor_fields import JetRuleField

logger = logging.getLogger(__name__)

AXIAL_FORMS = np.array([(gamma(0) @ gamma('five') @ gamma(mu)).matrix for mu in range(4)])


@dataclass(frozen=True)
class PhysParams:
    """Mass m >= 0 and charge e in natural units"""

    m: float = 1.0
    e: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.m) and math.isfinite(self.e)):
            raise ValueError(f"non-finite parameters m={self.m}, e={self.e}")
        if self.m < 0:
            raise ValueError(f"mass must be non-negative, got {self.m}")

    def require_charge(self):
        if self.e == 0:
            raise ZeroChargeError("operation divides by the charge e, which is zero")
        return self.e


@dataclass(frozen=True)
class PhaseDecomposition:
    """s = exp(i theta) phi_spinor; (theta + pi, -phi_spinor) is the same decomposition"""

    theta: float
    phi_spinor: np.ndarray

    def reconstruct(self):
        return np.exp(1j * self.theta) * self.phi_spinor

    def alternate(self):
        return PhaseDecomposition(self.theta + math.pi, -self.phi_spinor)


def dot(a, b):
    """Minkowski contraction a.b over the last axis"""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3]


def lower(v):
    return np.asarray(v) @ METRIC


def vector_current(s):
    """J^mu = s-bar gamma^mu s (real; also accepts a stack of spinors)"""
    s = np.asarray(s, dtype=complex)
    return np.real(np.einsum('...i,mij,...j->...m', s.conj(), CURRENT_FORMS, s))


def axial_current(s):
    """j_a^mu = s-bar gamma5 gamma^mu s"""
    s = np.asarray(s, dtype=complex)
    return np.real(np.einsum('...i,mij,...j->...m', s.conj(), AXIAL_FORMS, s))


def frame_currents(phi):
    """V^mu = Phi^T (i gamma^mu) Phi and U^mu = Phi^T (gamma5 gamma^mu) Phi for real Phi"""
    phi = np.asarray(phi, dtype=float)
    V = np.einsum('...i,mij,...j->...m', phi, V_FORMS, phi)
    U = np.einsum('...i,mij,...j->...m', phi, U_FORMS, phi)
    return V, U


def decompose_phase(s, tol=DEFAULT_TOL):
    """
    Split a spinor with vanishing axial current into exp(i theta) * real
    Args:
        s: Dirac spinor (4 complex components)
        tol: relative tolerance for the axial current (against s^dagger s)
    Returns:
        PhaseDecomposition: theta in [0, pi)
    """
    s = np.asarray(s, dtype=complex)
    density = float(np.real(np.vdot(s, s)))
    if density == 0.0:
        raise ZeroSpinorError("cannot decompose the zero spinor")

    ja = axial_current(s)
    if np.max(np.abs(ja)) > tol * density:
        raise AxialCurrentNonzeroError(f"axial current {ja} is not zero (density {density:.6g})")

    norm = math.sqrt(density)
    lead = int(np.argmax(np.abs(s[:2])))
    if abs(s[lead]) <= tol * norm:
        lead = 2 + int(np.argmax(np.abs(s[2:])))
    theta = float(np.angle(s[lead])) % (2 * math.pi)

    rotated = np.exp(-1j * theta) * s
    leftover = float(np.linalg.norm(rotated.imag))
    if leftover > math.sqrt(tol) * norm:
        raise AxialCurrentNonzeroError(f"spinor is not a phase times a real spinor (residual {leftover:.3g})")
    phi = rotated.real

    if theta >= math.pi:
        theta -= math.pi
        phi = -phi
    if theta >= math.pi:
        # 2pi - eps rounded onto the wrap-around
        theta, phi = 0.0, -phi
    return PhaseDecomposition(theta, phi)


def _check_null(J, tol):
    J = np.asarray(J, dtype=float)
    if J[0] <= 0:
        raise NonpositiveDensityError(f"J^0 must be positive, got {J[0]}")
    if abs(dot(J, J)) > tol * J[0] ** 2:
        raise NotNullError(f"J.J = {dot(J, J):.3g} exceeds {tol} * (J^0)^2; no Majorana spinor has this current")
    return J


def reconstruct_from_current(J, tol=DEFAULT_TOL, eps=DEGENERATE_AXIS_EPS, fallback=True):
    """
    Canonical Majorana spinor with current J, normalized to psi^T psi = J^0
    Args:
        J: null future-pointing 4-vector
        tol: relative null tolerance
        eps: below J^0 + J^2 < eps * J^0 the complementary chart is used
        fallback: raise DegenerateAxisError instead of switching charts
    Returns:
        np.ndarray: psi
    """
    J0, J1, J2, J3 = _check_null(J, tol)
    a = J0 + J2
    if a >= eps * J0:
        return np.array([0.0, a, -J1, J3]) / math.sqrt(2 * a)
    if not fallback:
        raise DegenerateAxisError(f"J^0 + J^2 = {a:.3g} is degenerate for J = {tuple(J)}")
    b = J0 - J2
    logger.debug(f"J^0 + J^2 = {a:.3g}; using the complementary chart")
    return np.array([-J3, -J1, b, 0.0]) / math.sqrt(2 * b)


def reconstruct_jet_from_current(J, eps=DEGENERATE_AXIS_EPS):
    """Canonical psi as a jet, with the chart chosen from the value of J"""
    J0, J1, J2, J3 = J[0], J[1], J[2], J[3]
    if float(J0.value) <= 0:
        raise NonpositiveDensityError(f"J^0 must be positive, got {J0.value}")
    zero = J0 * 0.0
    a = J0 + J2
    if float(a.value) >= eps * float(J0.value):
        return Jet.stack([zero, a, -J1, J3]) / (2 * a).sqrt()
    b = J0 - J2
    return Jet.stack([-J3, -J1, b, zero]) / (2 * b).sqrt()


def apply_chiral_rotation(s, phi):
    """exp(i gamma5 phi) s = cos(phi) s + sin(phi) (i gamma5) s; s and phi may be jets"""
    if isinstance(phi, Jet) or isinstance(s, Jet):
        c = phi.cos() if isinstance(phi, Jet) else math.cos(phi)
        sn = phi.sin() if isinstance(phi, Jet) else math.sin(phi)
        rotated = s.matvec(CHIRAL_GENERATOR) if isinstance(s, Jet) else CHIRAL_GENERATOR @ np.asarray(s)
        return c * s + sn * rotated
    s = np.asarray(s, dtype=float)
    return math.cos(phi) * s + math.sin(phi) * (CHIRAL_GENERATOR @ s)


def chiral_phase_between(target, reference, tol=DEFAULT_TOL):
    """
    Angle phi in [0, pi) with apply_chiral_rotation(reference, phi) = +-target
    Args:
        target, reference: real spinors with the same current
        tol: relative tolerance on the current comparison
    """
    target = np.asarray(target, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if not target.any() or not reference.any():
        raise ZeroSpinorError("chiral phase needs two nonzero spinors")
    Jt, Jr = vector_current(target), vector_current(reference)
    if np.max(np.abs(Jt - Jr)) > tol * max(Jt[0], Jr[0]):
        raise CurrentMismatchError(f"currents differ: {Jt} vs {Jr}")
    phi = math.atan2(float(target @ (CHIRAL_GENERATOR @ reference)), float(target @ reference))
    phi = phi % math.pi
    return 0.0 if phi >= math.pi else phi


def ghost_field(B, phi, params, tol=DEFAULT_TOL):
    """
    D = -e [(B.V) U - (B.U) V] / (V.V), which solves (-e B-slash + i gamma5 D-slash) Phi = 0
    Args:
        B: 4-vector with J.B = 0
        phi: real spinor
        params: PhysParams
    """
    B = np.asarray(B, dtype=float)
    phi = np.asarray(phi, dtype=float)
    V, U = frame_currents(phi)
    VV = dot(V, V)
    if VV == 0.0:
        raise ZeroSpinorError("V.V vanishes; the spinor is zero")
    J = vector_current(phi)
    JB = dot(J, B)
    if abs(JB) > tol * J[0] * max(np.linalg.norm(B), 1.0):
        raise ConstraintViolatedError(f"J.B = {JB:.3g} is not zero")
    return -params.e * (dot(B, V) * U - dot(B, U) * V) / VV


def slash(X):
    """X_mu gamma^mu as a complex 4x4 matrix (X given with upper indices)"""
    Xl = lower(X)
    return sum(Xl[mu] * gamma(mu).matrix for mu in range(4))


def ghost_residual(B, D, phi, params):
    """(-e B-slash + i gamma5 D-slash) Phi and the scale |e B-slash Phi|"""
    phi = np.asarray(phi, dtype=complex)
    g5 = gamma('five').matrix
    lhs = (-params.e * slash(B) + 1j * g5 @ slash(D)) @ phi
    scale = float(np.linalg.norm(params.e * slash(B) @ phi))
    return lhs, scale


def ghost_field_check(B, phi, params):
    """
    Left-multiply the ghost-field equation by Phi-bar
    Returns:
        tuple: (Phi-bar (-e B-slash + i gamma5 D-slash) Phi, -e J.B)
    """
    D = ghost_field(B, phi, params, tol=np.inf)
    g5 = gamma('five').matrix
    op = -params.e * slash(B) + 1j * g5 @ slash(D)
    projected = bilinear(phi, op, phi)
    return projected, -params.e * float(dot(vector_current(phi), B))


def gauge_shift(A, theta, params):
    """
    e B_mu = e A_mu + theta_{,mu} on covariant components
    Args:
        A: VectorField of covariant components
        theta: ScalarField
        params: PhysParams with e != 0
    Returns:
        JetRuleField: B
    """
    e = params.require_charge()

    def rule(point, order):
        grad = Jet.stack([theta.evaluate(point, order + 1).partial(mu) for mu in range(4)])
        return A.evaluate(point, order) + grad / e

    return JetRuleField(rule, (4,), name=f'gauge-shift({A.name})')


def majorana_bar_check(phi):
    """Phi-bar Phi and Phi-bar gamma5 Phi for a real spinor (both vanish)"""
    phi = np.asarray(phi, dtype=complex)
    return complex(dirac_adjoint(phi) @ phi), bilinear(phi, gamma('five'), phi)
