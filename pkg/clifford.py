"""
Majorana-representation gamma matrices and spinor bilinears.

Every gamma^mu is i times an integer matrix, so the algebra is checked in
exact integer arithmetic (real and imaginary parts kept as int64 arrays).

Canonical representation (rows listed top to bottom, gamma = i * G):

    G0 = [[ 0, 0, 0, 1],      G1 = diag(-1, 1, -1, 1)
          [ 0, 0,-1, 0],
          [ 0, 1, 0, 0],      G2 = [[ 0, 0, 0,-1],     G3 = [[0, 1, 0, 0],
          [-1, 0, 0, 0]]            [ 0, 0, 1, 0],           [1, 0, 0, 0],
                                    [ 0, 1, 0, 0],           [0, 0, 0, 1],
                                    [-1, 0, 0, 0]]           [0, 0, 1, 0]]

    gamma5 = i gamma0 gamma1 gamma2 gamma3 = -i [[ 0, 1, 0, 0],
                                                 [-1, 0, 0, 0],
                                                 [ 0, 0, 0,-1],
                                                 [ 0, 0, 1, 0]]

With these matrices gamma0 gamma^k is real symmetric, the axial-current
components are j_a^0 = 2 Im(P1 P2* + P4 P3*), j_a^1 = 2 Im(P3 P1* + P2 P4*),
j_a^2 = 2 Im(P1 P2* + P3 P4*), j_a^3 = 2 Im(P1 P4* + P2 P3*), and the current
of a real spinor obeys |xi1|^2 = (J0+J2)/2, |xi2|^2 = (J0-J2)/2,
xi1 xi2 = -(J3 + i J1)/2 with xi1 = P1 + i P2, xi2 = P3 + i P4.
The gamma0 gamma^k are fixed by the xi relations and the axial formulas
then fix the overall sign of gamma0, so no freedom is left except
relabelings that would break one of those formulas.
"""
from dataclasses import dataclass

import numpy as np

from errors import InvalidIndexError

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])
METRIC_INT = np.diag([1, -1, -1, -1]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class GammaMatrix:
    """4x4 Gaussian-integer matrix stored as exact real and imaginary parts"""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.array(self.re, dtype=np.int64)
        im = np.array(self.im, dtype=np.int64)
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, 're', re)
        object.__setattr__(self, 'im', im)

    @property
    def matrix(self):
        return self.re.astype(float) + 1j * self.im.astype(float)

    def __matmul__(self, other):
        return GammaMatrix(self.re @ other.re - self.im @ other.im,
                           self.re @ other.im + self.im @ other.re)

    def __add__(self, other):
        return GammaMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return GammaMatrix(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return GammaMatrix(-self.re, -self.im)

    def scale(self, k):
        """Multiply by an integer k or by the imaginary unit (k = 1j)"""
        if k == 1j:
            return GammaMatrix(-self.im, self.re)
        if k == -1j:
            return GammaMatrix(self.im, -self.re)
        return GammaMatrix(int(k) * self.re, int(k) * self.im)

    def dagger(self):
        return GammaMatrix(self.re.T, -self.im.T)

    def __eq__(self, other):
        return (isinstance(other, GammaMatrix)
                and np.array_equal(self.re, other.re)
                and np.array_equal(self.im, other.im))

    def __hash__(self):
        return hash((self.re.tobytes(), self.im.tobytes()))

    def is_zero(self):
        return not self.re.any() and not self.im.any()

    def is_purely_imaginary(self):
        return not self.re.any()


_ZERO = np.zeros((4, 4), dtype=np.int64)

IDENTITY = GammaMatrix(np.eye(4, dtype=np.int64), _ZERO)

_G = (
    [[0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
    [[-1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, 1]],
    [[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
    [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
)

_GAMMAS = tuple(GammaMatrix(_ZERO, g) for g in _G)
_GAMMA5 = (_GAMMAS[0] @ _GAMMAS[1] @ _GAMMAS[2] @ _GAMMAS[3]).scale(1j)


def gamma(index):
    """
    Return a representation matrix
    Args:
        index: 0..3 for gamma^mu, or "five" (also 5) for gamma5
    Returns:
        GammaMatrix: the fixed matrix (same object on every call)
    """
    if index in ("five", 5, "5"):
        return _GAMMA5
    if isinstance(index, (int, np.integer)) and not isinstance(index, bool) and 0 <= index <= 3:
        return _GAMMAS[int(index)]
    raise InvalidIndexError(f"gamma index must be 0..3 or 'five', got {index!r}")


def anticommutator(a, b):
    return a @ b + b @ a


def clifford_identity_failures():
    """
    List every violated identity of the representation (empty when exact)
    Returns:
        list: (description, offending matrix) pairs
    """
    failures = []
    for mu in range(4):
        for nu in range(4):
            expected = IDENTITY.scale(2 * int(METRIC_INT[mu, nu]))
            if anticommutator(gamma(mu), gamma(nu)) != expected:
                failures.append((f"{{g{mu}, g{nu}}} != 2 g^{mu}{nu}", anticommutator(gamma(mu), gamma(nu))))
        if not anticommutator(_GAMMA5, gamma(mu)).is_zero():
            failures.append((f"{{g5, g{mu}}} != 0", anticommutator(_GAMMA5, gamma(mu))))
        if not gamma(mu).is_purely_imaginary():
            failures.append((f"g{mu} has a real part", gamma(mu)))
    if _GAMMA5 @ _GAMMA5 != IDENTITY:
        failures.append(("g5^2 != I", _GAMMA5 @ _GAMMA5))
    if gamma(0).dagger() != gamma(0):
        failures.append(("g0 not Hermitian", gamma(0)))
    for k in (1, 2, 3):
        if gamma(k).dagger() != -gamma(k):
            failures.append((f"g{k} not anti-Hermitian", gamma(k)))
    return failures


def _as_matrix(m):
    return m.matrix if isinstance(m, GammaMatrix) else np.asarray(m, dtype=complex)


def dirac_adjoint(s):
    """Row covector s^dagger gamma0"""
    s = np.asarray(s, dtype=complex)
    return s.conj() @ gamma(0).matrix


def bilinear(s, m, t):
    """
    Evaluate s-bar m t
    Args:
        s, t: Dirac spinors (4 complex components)
        m: GammaMatrix or 4x4 array (a product of representation matrices)
    Returns:
        complex: the bilinear
    """
    return complex(dirac_adjoint(s) @ _as_matrix(m) @ np.asarray(t, dtype=complex))


def batch_bilinear(spinors, m):
    """s-bar m s for an (n, 4) stack of spinors"""
    psi = np.asarray(spinors, dtype=complex)
    form = gamma(0).matrix @ _as_matrix(m)
    return np.einsum('ni,ij,nj->n', psi.conj(), form, psi)


def charge_conjugate(s):
    """Charge conjugation, which is complex conjugation in this representation"""
    return np.conj(np.asarray(s, dtype=complex))


def axial_component_formulas(s):
    """The closed-form axial-current components written out in the derivation"""
    p1, p2, p3, p4 = np.asarray(s, dtype=complex)
    return np.array([
        2 * np.imag(p1 * np.conj(p2) + p4 * np.conj(p3)),
        2 * np.imag(p3 * np.conj(p1) + p2 * np.conj(p4)),
        2 * np.imag(p1 * np.conj(p2) + p3 * np.conj(p4)),
        2 * np.imag(p1 * np.conj(p4) + p2 * np.conj(p3)),
    ])


def _real_part(gm):
    assert not gm.im.any()
    return gm.re.astype(float)


# Real matrices used by the Majorana-spinor pipelines.
# For real Phi: J^mu = Phi^T CURRENT_FORMS[mu] Phi, V^mu = Phi^T V_FORMS[mu] Phi,
# U^mu = Phi^T U_FORMS[mu] Phi.
CURRENT_FORMS = np.array([_real_part(gamma(0) @ gamma(mu)) for mu in range(4)])
V_FORMS = np.array([_real_part(gamma(mu).scale(1j)) for mu in range(4)])
U_FORMS = np.array([_real_part(_GAMMA5 @ gamma(mu)) for mu in range(4)])

# i gamma5: generator of chiral rotations, real, antisymmetric, squares to -I
CHIRAL_GENERATOR = _real_part(_GAMMA5.scale(1j))

# Free Dirac equation solved for the time derivative:
# d0 Phi = sum_l DIRAC_SPATIAL[l] dl Phi + m * DIRAC_MASS Phi
DIRAC_SPATIAL = np.array([-CURRENT_FORMS[l] for l in (1, 2, 3)])
DIRAC_MASS = _real_part(gamma(0).scale(-1j))

# i gamma^mu, real; the free Dirac operator on real spinors is sum_mu DIRAC_OPERATOR[mu] d_mu - m
DIRAC_OPERATOR = V_FORMS
