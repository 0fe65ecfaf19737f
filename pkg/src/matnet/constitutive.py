"""Base-phase constitutive laws: orthotropic elasticity and J2 plasticity.

Every law exposes ``update(states, deps)`` working on a batch of material
points and returning ``(dsig, new_states, C_tan)``.  States are never mutated
in place; the caller decides when to commit.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConvergenceError

_DEV = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
_SHEAR_WEIGHT = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


@dataclass(frozen=True)
class ElasticOrthotropic:
    E11: float
    E22: float
    E33: float
    G12: float
    G13: float
    G23: float
    nu12: float
    nu13: float
    nu23: float

    @classmethod
    def isotropic(cls, E, nu):
        G = E / (2.0 * (1.0 + nu))
        return cls(E, E, E, G, G, G, nu, nu, nu)

    def compliance(self):
        S = np.zeros((6, 6))
        S[0, 0] = 1.0 / self.E11
        S[1, 1] = 1.0 / self.E22
        S[2, 2] = 1.0 / self.E33
        S[0, 1] = S[1, 0] = -self.nu12 / self.E11
        S[0, 2] = S[2, 0] = -self.nu13 / self.E11
        S[1, 2] = S[2, 1] = -self.nu23 / self.E22
        S[3, 3] = 1.0 / self.G23
        S[4, 4] = 1.0 / self.G13
        S[5, 5] = 1.0 / self.G12
        return S


def stiffness_of(mat):
    """Invert the orthotropic compliance after checking admissibility."""
    S = mat.compliance()
    names = ["S11", "S11-S22 block", "S11-S22-S33 block"]
    for k in range(1, 4):
        if np.linalg.det(S[:k, :k]) <= 0.0:
            raise AdmissibilityError(
                f"compliance not positive definite: leading minor {names[k - 1]} "
                f"= {np.linalg.det(S[:k, :k]):.3e}")
    for k, label in zip(range(3, 6), ("G23", "G13", "G12")):
        if S[k, k] <= 0.0:
            raise AdmissibilityError(f"compliance not positive definite: {label} <= 0")
    C = np.linalg.inv(S)
    return 0.5 * (C + C.T)


def isotropic_stiffness(E, nu):
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.arange(3), np.arange(3)] = lam + 2.0 * mu
    C[np.arange(3, 6), np.arange(3, 6)] = mu
    return C


@dataclass
class MaterialState:
    """History of a batch of material points, one row per point."""
    stress: np.ndarray
    strain: np.ndarray
    plastic_strain: np.ndarray
    eq_plastic_strain: np.ndarray

    @classmethod
    def virgin(cls, n=1):
        return cls(np.zeros((n, 6)), np.zeros((n, 6)), np.zeros((n, 6)), np.zeros(n))

    def __len__(self):
        return len(self.eq_plastic_strain)

    def take(self, idx):
        return MaterialState(self.stress[idx], self.strain[idx],
                             self.plastic_strain[idx], self.eq_plastic_strain[idx])

    def copy(self):
        return MaterialState(self.stress.copy(), self.strain.copy(),
                             self.plastic_strain.copy(), self.eq_plastic_strain.copy())

    def put(self, idx, other):
        """Return a copy with rows ``idx`` replaced by ``other``."""
        out = self.copy()
        out.stress[idx] = other.stress
        out.strain[idx] = other.strain
        out.plastic_strain[idx] = other.plastic_strain
        out.eq_plastic_strain[idx] = other.eq_plastic_strain
        return out


@dataclass(frozen=True)
class LinearElastic:
    """Linear elastic law with a fixed stiffness."""
    C: np.ndarray = field(repr=False)

    @classmethod
    def from_constants(cls, mat):
        return cls(stiffness_of(mat))

    def elastic_stiffness(self):
        return self.C

    def update(self, states, deps):
        deps = np.atleast_2d(deps)
        dsig = deps @ self.C.T
        new = MaterialState(states.stress + dsig, states.strain + deps,
                            states.plastic_strain.copy(), states.eq_plastic_strain.copy())
        return dsig, new, np.broadcast_to(self.C, (len(deps), 6, 6)).copy()


@dataclass(frozen=True)
class J2Plasticity:
    """Small-strain von Mises plasticity with linear + exponential hardening.

    Yield stress: sy0 + H_lin * p + K_exp * (1 - exp(-m_exp * p)).
    """
    E: float
    nu: float
    sy0: float
    H_lin: float = None
    K_exp: float = None
    m_exp: float = 100.0
    max_local_iter: int = 50

    def __post_init__(self):
        if self.H_lin is None:
            object.__setattr__(self, "H_lin", self.E / 50.0)
        if self.K_exp is None:
            object.__setattr__(self, "K_exp", self.sy0)
        if not self.E > 0:
            raise AdmissibilityError("E must be positive")
        if not -1.0 < self.nu < 0.5:
            raise AdmissibilityError("nu must lie in (-1, 0.5)")
        if not self.sy0 > 0:
            raise AdmissibilityError("initial yield stress must be positive")
        if self.H_lin < 0 or self.K_exp < 0 or self.m_exp < 0:
            raise AdmissibilityError("hardening parameters must be non-negative")

    @property
    def shear_modulus(self):
        return self.E / (2.0 * (1.0 + self.nu))

    def elastic_stiffness(self):
        return isotropic_stiffness(self.E, self.nu)

    def yield_stress(self, p):
        return self.sy0 + self.H_lin * p + self.K_exp * (1.0 - np.exp(-self.m_exp * p))

    def hardening_slope(self, p):
        return self.H_lin + self.K_exp * self.m_exp * np.exp(-self.m_exp * p)

    def update(self, states, deps):
        deps = np.atleast_2d(np.asarray(deps, dtype=float))
        n = len(deps)
        Ce = self.elastic_stiffness()
        mu = self.shear_modulus

        trial = states.stress + deps @ Ce.T
        s = trial - _DEV * (trial[:, :3].mean(axis=1))[:, None]
        s_norm = np.sqrt(np.einsum("ni,ni,i->n", s, s, _SHEAR_WEIGHT))
        q = np.sqrt(1.5) * s_norm
        p0 = states.eq_plastic_strain
        f = q - self.yield_stress(p0)

        stress = trial.copy()
        p = p0.copy()
        eps_p = states.plastic_strain.copy()
        C_tan = np.broadcast_to(Ce, (n, 6, 6)).copy()

        plastic = f > 0.0
        if plastic.any():
            qp, sp, pp = q[plastic], s[plastic], p0[plastic]
            dgam = f[plastic] / (3.0 * mu + self.hardening_slope(pp))
            for _ in range(self.max_local_iter):
                res = qp - 3.0 * mu * dgam - self.yield_stress(pp + dgam)
                if np.all(np.abs(res) <= 1e-13 * max(self.sy0, 1.0)):
                    break
                dgam -= res / (-3.0 * mu - self.hardening_slope(pp + dgam))
            else:
                res = qp - 3.0 * mu * dgam - self.yield_stress(pp + dgam)
                raise ConvergenceError(
                    f"return mapping did not converge, residual {np.abs(res).max():.3e}")
            flow = sp / qp[:, None]
            stress[plastic] = trial[plastic] - 3.0 * mu * dgam[:, None] * flow
            p[plastic] = pp + dgam
            eps_p[plastic] += 1.5 * dgam[:, None] * flow * _SHEAR_WEIGHT

            # consistent tangent
            N = sp / (np.sqrt(2.0 / 3.0) * qp)[:, None]
            hs = self.hardening_slope(pp + dgam)
            a = 6.0 * mu ** 2 * dgam / qp
            b = 6.0 * mu ** 2 * (dgam / qp - 1.0 / (3.0 * mu + hs))
            C_tan[plastic] = (Ce - a[:, None, None] * _I_DEV
                              + b[:, None, None] * np.einsum("ni,nj->nij", N, N))

        new = MaterialState(stress, states.strain + deps, eps_p, p)
        return stress - states.stress, new, C_tan


# deviatoric projector mapping engineering strain to stress-like Voigt
_I_DEV = np.diag([1.0, 1.0, 1.0, 0.5, 0.5, 0.5])
_I_DEV[:3, :3] -= 1.0 / 3.0


def von_mises(stress):
    stress = np.atleast_2d(stress)
    s = stress - _DEV * (stress[:, :3].mean(axis=1))[:, None]
    return np.sqrt(1.5 * np.einsum("ni,ni,i->n", s, s, _SHEAR_WEIGHT))
