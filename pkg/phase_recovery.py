"""
Chiral phase recovery: from jets of a null current J, build the canonical
spinor psi and its frame (v, u, w, t, s; q, r, p), solve the linear system
for sin 2phi and cos 2phi, and rotate psi into the Majorana field Phi.

Every quantity is carried as a jet so that the derivative scalars (w.dq,
v.dp, ...) come out of the same arithmetic. v, u and w have identically
vanishing time components, so only spatial derivatives enter the frame
derivatives; this is checked on every jet.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from clifford import CHIRAL_GENERATOR, U_FORMS, V_FORMS
from config import (DET_FLOOR_FACTOR, FRAME_COND_MAX, RECOVERY_JET_ORDER, STRUCTURAL_ZERO_TOL,
                    UNIT_CIRCLE_TOL_ANALYTIC)
from errors import (DegenerateFrameError, DegeneratePointError, FieldTheoryError, JetOrderError,
                    PointError, SignAmbiguityError, UnitCircleViolationError,
                    VanishingDensityError, VanishingDeterminantError)
from jets import NVARS, Jet, directional, monomial_basis
from spinor_ops import apply_chiral_rotation, reconstruct_jet_from_current, vector_current
from taylor_fields import current_jet, dirac_residual

logger = logging.getLogger(__name__)


@dataclass
class FrameData:
    """Frame vectors and scalars at one point (time components of v, u, w, t, s are zero)"""

    v: np.ndarray
    u: np.ndarray
    w: np.ndarray
    t: np.ndarray
    s: np.ndarray
    q: float
    r: float
    p: float

    def as_dict(self):
        return {name: getattr(self, name) for name in ('v', 'u', 'w', 't', 's', 'q', 'r', 'p')}


@dataclass
class FrameExpansion:
    """t = a1 v + a2 u + a3 w, s = b1 v + b2 u + b3 w"""

    a: np.ndarray
    b: np.ndarray
    cond: float = float('nan')
    residual: float = 0.0


@dataclass
class PhaseSolution:
    sin2phi: float
    cos2phi: float
    residual_unit: float
    phi: float
    det: float


# ---------------------------------------------------------------------- frame quantities
def _density(psi):
    """psi^T psi as a jet (or float)"""
    if isinstance(psi, Jet):
        n = psi.dot(psi)
        value = float(n.value)
    else:
        n = float(np.dot(psi, psi))
        value = n
    if value <= 0.0:
        raise VanishingDensityError("psi vanishes at the point")
    return n


def frame_vectors(psi):
    """
    v^mu = psi^T (i gamma^mu) psi / psi^T psi and u^mu = psi^T (gamma5 gamma^mu) psi / psi^T psi
    Args:
        psi: real spinor or spinor Jet
    Returns:
        tuple: (v, u), arrays or vector jets
    """
    n = _density(psi)
    if isinstance(psi, Jet):
        v = Jet.stack([psi.quadratic_form(V_FORMS[mu]) for mu in range(4)])
        u = Jet.stack([psi.quadratic_form(U_FORMS[mu]) for mu in range(4)])
        inv = n.reciprocal()
        return v * inv, u * inv
    psi = np.asarray(psi, dtype=float)
    v = np.einsum('i,mij,j->m', psi, V_FORMS, psi) / n
    u = np.einsum('i,mij,j->m', psi, U_FORMS, psi) / n
    return v, u


def scalars_qr(psi):
    """
    q = psi^T gamma5 gamma^mu psi_{,mu} / psi^T psi, r = -psi^T (i gamma^mu) psi_{,mu} / psi^T psi
    Args:
        psi: spinor Jet with first derivatives in all four coordinates
    Returns:
        tuple: (q, r) scalar jets one order lower
    """
    if psi.order < 1:
        raise JetOrderError("q and r need first derivatives of psi")
    inv = _density(psi).reciprocal()
    base = psi.truncate(psi.order - 1)
    q = None
    r = None
    for mu in range(4):
        d = psi.partial(mu)
        qt = base.quadratic_form(U_FORMS[mu], d)
        rt = base.quadratic_form(V_FORMS[mu], d)
        q = qt if q is None else q + qt
        r = rt if r is None else r + rt
    return q * inv, -(r * inv)


def require_spatial(vec, name):
    """Check that the time component of a vector jet vanishes identically"""
    scale = max(1.0, float(np.max(np.abs(vec.coeffs))))
    worst = float(np.max(np.abs(vec.coeffs[:, 0])))
    if worst > STRUCTURAL_ZERO_TOL * scale:
        raise DegeneratePointError(f"{name}^0 is not identically zero (max coefficient {worst:.3g})")
    return vec


def _along(X, f):
    return directional(X, f, spatial_only=True)


def vector_w(v, u, q, r):
    """w^mu = u.d v^mu - v.d u^mu + 2 r u^mu + 2 q v^mu"""
    require_spatial(v, 'v')
    require_spatial(u, 'u')
    return _along(u, v) - _along(v, u) + 2 * r * u + 2 * q * v


def scalar_p(q, r, v, u, params):
    """p = u.dq - v.dr + 2 r^2 + 2 q^2 - 2 m^2"""
    return _along(u, q) - _along(v, r) + 2 * r * r + 2 * q * q - 2 * params.m ** 2


def vectors_ts(w, v, u):
    """t^mu = w.d v^mu - v.d w^mu, s^mu = w.d u^mu - u.d w^mu"""
    require_spatial(w, 'w')
    return _along(w, v) - _along(v, w), _along(w, u) - _along(u, w)


def _spatial_matrix(v, u, w):
    return np.column_stack([np.asarray(v)[1:], np.asarray(u)[1:], np.asarray(w)[1:]])


def expand_in_frame(t, s, v, u, w, cond_max=FRAME_COND_MAX):
    """
    Coordinates of t and s in the (v, u, w) basis
    Args:
        t, s, v, u, w: 4-vectors with zero time components
        cond_max: frames with a larger condition number count as degenerate
    Returns:
        FrameExpansion
    """
    M = _spatial_matrix(v, u, w)
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > cond_max:
        raise DegenerateFrameError(f"v, u, w are linearly dependent (condition number {cond:.3g})")
    rhs = np.column_stack([np.asarray(t)[1:], np.asarray(s)[1:]])
    sol = np.linalg.solve(M, rhs)
    residual = float(np.max(np.abs(M @ sol - rhs)))
    return FrameExpansion(sol[:, 0], sol[:, 1], cond, residual)


def _det3(M):
    return (M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
            - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
            + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]))


def expand_in_frame_jet(t, s, v, u, w, cond_max=FRAME_COND_MAX):
    """
    Jet version of expand_in_frame by Cramer's rule
    Returns:
        tuple: (a, b) lists of scalar jets and the FrameExpansion of the values
    """
    checked = expand_in_frame(t.value, s.value, v.value, u.value, w.value, cond_max)
    cols = [v, u, w]
    M = [[cols[j][i + 1] for j in range(3)] for i in range(3)]
    inv = _det3(M).reciprocal()

    def solve(rhs):
        out = []
        for j in range(3):
            Mj = [[rhs[i + 1] if jj == j else M[i][jj] for jj in range(3)] for i in range(3)]
            out.append(_det3(Mj) * inv)
        return out

    return solve(t), solve(s), checked


# ---------------------------------------------------------------------- phase system
def phase_system(a, b, p, params):
    """Coefficient matrix of the (sin 2phi, cos 2phi) system"""
    m = params.m
    return [[-m * a[0], m * a[1] + 2 * m * p],
            [-m * b[0] + 2 * m * p, m * b[1]]]


def phase_rhs(a, b, q, r, p, dq_w, dp_v, dr_w, dp_u):
    return [dq_w - dp_v - a[0] * q - a[1] * r - a[2] * p,
            dr_w - dp_u - b[0] * q - b[1] * r - b[2] * p]


def solve_phase(frame, expansion, dq_w, dp_v, dr_w, dp_u, params, tol=UNIT_CIRCLE_TOL_ANALYTIC):
    """
    Solve for sin 2phi and cos 2phi
    Args:
        frame: FrameData (uses q, r, p)
        expansion: FrameExpansion
        dq_w, dp_v, dr_w, dp_u: w.dq, v.dp, w.dr, u.dp at the point
        params: PhysParams
        tol: allowed |sin^2 + cos^2 - 1|
    Returns:
        PhaseSolution
    """
    A = np.array(phase_system(expansion.a, expansion.b, frame.p, params), dtype=float)
    rhs = np.array(phase_rhs(expansion.a, expansion.b, frame.q, frame.r, frame.p,
                             dq_w, dp_v, dr_w, dp_u), dtype=float)
    det = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    if abs(det) <= DET_FLOOR_FACTOR * params.m ** 2:
        raise VanishingDeterminantError(f"phase-system determinant {det:.3g} is below the floor")
    S, C = np.linalg.solve(A, rhs)
    residual = abs(S * S + C * C - 1.0)
    if residual > tol:
        raise UnitCircleViolationError(f"sin^2 + cos^2 - 1 = {residual:.3g} exceeds {tol}")
    phi = (0.5 * math.atan2(S, C)) % math.pi
    return PhaseSolution(float(S), float(C), float(residual), 0.0 if phi >= math.pi else phi, det)


def jet_phase_solution(A, rhs):
    """Cramer's rule on jets for the 2x2 phase system; returns (S, C) jets"""
    inv = (A[0][0] * A[1][1] - A[0][1] * A[1][0]).reciprocal()
    S = (rhs[0] * A[1][1] - A[0][1] * rhs[1]) * inv
    C = (A[0][0] * rhs[1] - rhs[0] * A[1][0]) * inv
    return S, C


def half_angle_jets(S, C):
    """
    cos(phi) and sin(phi) jets from jets of sin 2phi and cos 2phi, after projecting onto the unit circle
    """
    rho = (S * S + C * C).sqrt()
    s, c = S / rho, C / rho
    theta0 = math.atan2(float(s.value), float(c.value))
    x = c * math.cos(theta0) + s * math.sin(theta0)
    y = s * math.cos(theta0) - c * math.sin(theta0)
    cos_d = ((1 + x) * 0.5).sqrt()
    sin_d = y / (2 * cos_d)
    h = theta0 / 2
    return math.cos(h) * cos_d - math.sin(h) * sin_d, math.sin(h) * cos_d + math.cos(h) * sin_d


def phase_angle_jet(S, C, phi):
    """First-order jet of phi: dphi = (C dS - S dC) / 2(S^2 + C^2)"""
    s0, c0 = float(S.value), float(C.value)
    grad = (c0 * S.gradient() - s0 * C.gradient()) / (2 * (s0 * s0 + c0 * c0))
    basis = monomial_basis(1)
    coeffs = np.zeros(basis.size)
    coeffs[0] = phi
    for mu in range(NVARS):
        unit = [0] * NVARS
        unit[mu] = 1
        coeffs[basis.index[tuple(unit)]] = grad[mu]
    return Jet(coeffs, 1, S.center)


def transport_residuals(psi, phi, params):
    """
    Residuals of v.dphi = q - m sin 2phi, u.dphi = r + m cos 2phi and w.dphi = p
    Args:
        psi: spinor Jet (order >= 3) with Phi = exp(i gamma5 phi) psi a free solution
        phi: scalar Jet of the chiral phase, order >= 1
    Returns:
        tuple: three floats
    """
    v, u = frame_vectors(psi)
    q, r = scalars_qr(psi)
    w = vector_w(v, u, q, r)
    p = scalar_p(q, r, v, u, params)
    m = params.m
    two_phi = 2 * float(phi.value)
    grad = phi.gradient()
    res_v = float(np.dot(v.value, grad)) - (float(q.value) - m * math.sin(two_phi))
    res_u = float(np.dot(u.value, grad)) - (float(r.value) + m * math.cos(two_phi))
    res_w = float(np.dot(w.value, grad)) - float(p.value)
    return res_v, res_u, res_w


# ---------------------------------------------------------------------- per-point pipeline
@dataclass
class PointRecovery:
    point: tuple
    psi: np.ndarray
    phi_spinor: np.ndarray
    frame: FrameData
    expansion: FrameExpansion
    solution: PhaseSolution
    phi_jet: Jet = field(repr=False, default=None)
    angle_jet: Jet = field(repr=False, default=None)
    dirac_residual: float = float('nan')
    current_error: float = float('nan')

    def summary(self):
        return {
            'point': list(self.point),
            'phi': self.solution.phi,
            'sin2phi': self.solution.sin2phi,
            'cos2phi': self.solution.cos2phi,
            'residual_unit': self.solution.residual_unit,
            'det': self.solution.det,
            'frame_cond': self.expansion.cond,
            'dirac_residual': self.dirac_residual,
            'current_error': self.current_error,
        }


def recover_at_point(J, params, tol=UNIT_CIRCLE_TOL_ANALYTIC, point=None):
    """
    Run the frame pipeline on a current jet at one point
    Args:
        J: vector Jet of the current, order >= 3 including time derivatives
        params: PhysParams
        tol: unit-circle tolerance
    Returns:
        PointRecovery
    """
    if J.order < 3:
        raise JetOrderError(f"phase recovery needs current jets of order >= 3, got {J.order}")
    point = tuple(J.center or (0.0,) * 4) if point is None else tuple(point)

    psi = reconstruct_jet_from_current(J)
    v, u = frame_vectors(psi)
    q, r = scalars_qr(psi)
    w = vector_w(v, u, q, r)
    p = scalar_p(q, r, v, u, params)
    t, s = vectors_ts(w, v, u)
    a, b, checked = expand_in_frame_jet(t, s, v, u, w)

    dq_w, dr_w = _along(w, q), _along(w, r)
    dp_v, dp_u = _along(v, p), _along(u, p)

    frame = FrameData(v.value, u.value, w.value, t.value, s.value,
                      float(q.value), float(r.value), float(p.value))
    a_val = np.array([float(x.value) for x in a])
    b_val = np.array([float(x.value) for x in b])
    expansion = FrameExpansion(a_val, b_val, checked.cond, checked.residual)
    solution = solve_phase(frame, expansion, float(dq_w.value), float(dp_v.value),
                           float(dr_w.value), float(dp_u.value), params, tol)

    A = phase_system(a, b, p, params)
    rhs = phase_rhs(a, b, q, r, p, dq_w, dp_v, dr_w, dp_u)
    S, C = jet_phase_solution(A, rhs)
    cos_phi, sin_phi = half_angle_jets(S, C)
    psi_low = psi.truncate(S.order)
    phi_jet = cos_phi * psi_low + sin_phi * psi_low.matvec(CHIRAL_GENERATOR)
    angle_jet = phase_angle_jet(S, C, solution.phi) if S.order >= 1 else None

    phi_spinor = apply_chiral_rotation(psi.value, solution.phi)
    current_error = float(np.max(np.abs(vector_current(phi_spinor) - J.value)))
    residual = float('nan')
    if phi_jet.order >= 1:
        residual = float(np.max(np.abs(dirac_residual(phi_jet, params).value)))
    return PointRecovery(point, psi.value, phi_spinor, frame, expansion, solution,
                         phi_jet, angle_jet, residual, current_error)


# ---------------------------------------------------------------------- sign continuity
def fix_signs(points, spinors, tol=1e-12):
    """
    Choose the sign of each spinor by continuity from the first point
    Args:
        points: (n, 4) coordinates
        spinors: (n, 4) spinors, each defined up to sign
    Returns:
        np.ndarray: sign-fixed copy
    """
    points = np.asarray(points, dtype=float)
    out = np.array(spinors, dtype=float)
    n = len(out)
    if n == 0:
        return out
    base = out[0]
    scale = np.max(np.abs(base))
    lead = np.flatnonzero(np.abs(base) > tol * scale)
    if lead.size and base[lead[0]] < 0:
        out[0] = -base
    fixed = [0]
    remaining = set(range(1, n))
    while remaining:
        rem = np.array(sorted(remaining))
        dist = np.linalg.norm(points[rem][:, None, :] - points[fixed][None, :, :], axis=-1)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        target, neighbour = rem[i], fixed[j]
        score = float(out[target] @ out[neighbour])
        norm = float(np.linalg.norm(out[target]) * np.linalg.norm(out[neighbour]))
        if abs(score) <= tol * norm:
            raise SignAmbiguityError(
                f"spinor at {tuple(points[target])} is orthogonal to its neighbour at {tuple(points[neighbour])}")
        if score < 0:
            out[target] = -out[target]
        fixed.append(target)
        remaining.discard(target)
    return out


class RecoveryPipeline:
    """
    Region-level recovery: current jets -> canonical psi -> frame -> phase -> Phi,
    then a sign-continuity sweep
    """

    def __init__(self, params, order=RECOVERY_JET_ORDER, tol=UNIT_CIRCLE_TOL_ANALYTIC):
        self.params = params
        self.order = order
        self.tol = tol

    def current_at(self, source, point):
        """Current jet at a point from a current field or a spinor field"""
        jet = source.evaluate(point, self.order)
        if getattr(source, 'is_current', False):
            return jet
        return current_jet(jet)

    def recover_points(self, source, points):
        """
        Per-point pipeline with errors recorded instead of raised
        Returns:
            tuple: (list of PointRecovery or None, list of report entries)
        """
        logger.info(f"{'='*80}")
        logger.info(f"PHASE RECOVERY: {len(points)} points, jet order {self.order}, m = {self.params.m}")
        logger.info(f"{'='*80}")
        results, entries = [], []
        for point in points:
            point = tuple(float(x) for x in point)
            try:
                rec = recover_at_point(self.current_at(source, point), self.params, self.tol, point)
                results.append(rec)
                entries.append(dict(rec.summary(), status='ok'))
                logger.debug(f"✓ {point}: phi = {rec.solution.phi:.6f}, det = {rec.solution.det:.4g}")
            except (DegenerateFrameError, VanishingDeterminantError) as e:
                results.append(None)
                entries.append({'point': list(point), 'status': 'skipped', 'error': type(e).__name__,
                                'message': str(e)})
                logger.warning(f"⚠️ Atypical point {point} skipped: {e}")
            except FieldTheoryError as e:
                wrapped = PointError(point, e)
                results.append(None)
                entries.append({'point': list(point), 'status': 'error', 'error': wrapped.kind,
                                'message': str(wrapped)})
                logger.warning(f"⚠️ {wrapped}")
        ok = sum(1 for r in results if r is not None)
        logger.info(f"✓ Recovered {ok}/{len(points)} points")
        return results, entries

    def run(self, source, points):
        """
        Recover Phi over a set of points
        Returns:
            tuple: ((n, 4) array of sign-fixed spinors, NaN where skipped; report dict)
        """
        results, entries = self.recover_points(source, points)
        good = [i for i, r in enumerate(results) if r is not None]
        spinors = np.full((len(points), 4), np.nan)
        if good:
            fixed = fix_signs([results[i].point for i in good], [results[i].phi_spinor for i in good])
            spinors[good] = fixed
            for k, i in enumerate(good):
                entries[i]['phi_spinor'] = fixed[k]
        report = {
            'mass': self.params.m,
            'jet_order': self.order,
            'unit_circle_tol': self.tol,
            'recovered': len(good),
            'points': entries,
        }
        return spinors, report


def recover_majorana(source, points, params, tol=UNIT_CIRCLE_TOL_ANALYTIC, order=RECOVERY_JET_ORDER):
    """Recover the Majorana field (up to one global sign) at the given points"""
    return RecoveryPipeline(params, order, tol).run(source, points)
