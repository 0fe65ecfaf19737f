"""Voigt-notation algebra for stress, strain and stiffness.

Ordering is (11, 22, 33, 23, 13, 12).  Stresses are plain Voigt vectors,
strains carry engineering shear (gamma = 2 * eps_ij), so ``eps @ sig`` is the
energy density.  Euler angles follow the intrinsic Z-X-Z convention.
"""
import numpy as np

VOIGT_ORDER = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
EULER_CONVENTION = "intrinsic-ZXZ"

# P[k, l, J] = 1 where tensor slot (k, l) maps to Voigt index J
_PAIR = np.zeros((3, 3, 6))
for _J, (_k, _l) in enumerate(VOIGT_ORDER):
    _PAIR[_k, _l, _J] = 1.0
    _PAIR[_l, _k, _J] = 1.0
_ROW_A = np.array([p[0] for p in VOIGT_ORDER])
_ROW_B = np.array([p[1] for p in VOIGT_ORDER])


def stress_to_tensor(sig):
    sig = np.asarray(sig, dtype=float)
    return np.einsum("klJ,J->kl", _PAIR, sig)


def tensor_to_stress(t):
    t = np.asarray(t, dtype=float)
    return np.array([t[i, j] for i, j in VOIGT_ORDER])


def strain_to_tensor(eps):
    eps = np.asarray(eps, dtype=float)
    t = np.diag(eps[:3]).astype(float)
    for J, (i, j) in enumerate(VOIGT_ORDER[3:], start=3):
        t[i, j] = t[j, i] = 0.5 * eps[J]
    return t


def tensor_to_strain(t):
    t = np.asarray(t, dtype=float)
    return np.array([t[0, 0], t[1, 1], t[2, 2],
                     2.0 * t[1, 2], 2.0 * t[0, 2], 2.0 * t[0, 1]])


def stiffness_to_tensor(C):
    """Expand a 6x6 engineering-Voigt stiffness into the 3x3x3x3 tensor."""
    C = np.asarray(C, dtype=float)
    T = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            I = _voigt_index(i, j)
            for k in range(3):
                for l in range(3):
                    T[i, j, k, l] = C[I, _voigt_index(k, l)]
    return T


def tensor_to_stiffness(T):
    T = np.asarray(T, dtype=float)
    return np.array([[T[i, j, k, l] for (k, l) in VOIGT_ORDER]
                     for (i, j) in VOIGT_ORDER])


def _voigt_index(i, j):
    if i == j:
        return i
    return 6 - i - j


def normal_from_angles(theta, phi):
    """Unit normal parameterised by two scalars (periodic in both)."""
    st, ct = np.sin(2 * np.pi * theta), np.cos(2 * np.pi * theta)
    sp, cp = np.sin(np.pi * phi), np.cos(np.pi * phi)
    return np.array([ct * sp, st * sp, cp])


def normal_jacobian(theta, phi):
    """Return d n / d(theta, phi) as a 3x2 matrix."""
    st, ct = np.sin(2 * np.pi * theta), np.cos(2 * np.pi * theta)
    sp, cp = np.sin(np.pi * phi), np.cos(np.pi * phi)
    return np.array([
        [-2 * np.pi * st * sp, np.pi * ct * cp],
        [2 * np.pi * ct * sp, np.pi * st * cp],
        [0.0, -np.pi * sp],
    ])


def h_matrix(n):
    """6x3 interface orientation matrix.

    ``H.T @ sig`` is the traction on the plane with normal ``n`` and ``H @ b``
    is the engineering strain of sym(b (x) n).
    """
    n1, n2, n3 = n
    return np.array([
        [n1, 0.0, 0.0],
        [0.0, n2, 0.0],
        [0.0, 0.0, n3],
        [0.0, n3, n2],
        [n3, 0.0, n1],
        [n2, n1, 0.0],
    ])


def h_matrix_vjp(gH):
    """Pull a gradient w.r.t. H back onto the normal vector."""
    return np.array([
        gH[0, 0] + gH[4, 2] + gH[5, 1],
        gH[1, 1] + gH[3, 2] + gH[5, 0],
        gH[2, 2] + gH[3, 1] + gH[4, 0],
    ])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _drz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def _drx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def rotation_3(angles):
    """3x3 rotation Q = Rz(alpha) Rx(beta) Rz(gamma)."""
    a, b, g = angles
    return _rz(a) @ _rx(b) @ _rz(g)


def rotation_3_jacobian(angles):
    """dQ/d(alpha, beta, gamma), stacked along the first axis."""
    a, b, g = angles
    Za, Xb, Zg = _rz(a), _rx(b), _rz(g)
    return np.stack([_drz(a) @ Xb @ Zg, Za @ _drx(b) @ Zg, Za @ Xb @ _drz(g)])


def inverse_angles(angles):
    a, b, g = angles
    return np.array([-g, -b, -a])


def bond_from_q(Q):
    """Stress transformation matrix T with T @ sig == voigt(Q^T S Q)."""
    return np.einsum("ka,lb,klJ->abJ", Q, Q, _PAIR)[_ROW_A, _ROW_B, :]


def bond_from_q_vjp(Q, gT):
    """Gradient of <gT, bond_from_q(Q)> with respect to Q."""
    G = np.zeros((3, 3, 6))
    G[_ROW_A, _ROW_B, :] = gT
    # d/dQ[k,a] of Q[k,a] Q[l,b] P[k,l,J]
    return (np.einsum("abJ,lb,klJ->ka", G, Q, _PAIR)
            + np.einsum("baJ,lb,lkJ->ka", G, Q, _PAIR))


def rotation_6(angles):
    """6x6 stress rotation R with R @ sig == voigt(Q^T S Q)."""
    return bond_from_q(rotation_3(angles))


def rotation_6_vjp(angles, gR):
    """Gradient of <gR, rotation_6(angles)> with respect to the three angles."""
    gQ = bond_from_q_vjp(rotation_3(angles), gR)
    dQ = rotation_3_jacobian(angles)
    return np.einsum("ij,aij->a", gQ, dQ)


def rotate_stress(angles, sig):
    return rotation_6(angles) @ np.asarray(sig, dtype=float)


def rotate_strain(angles, eps):
    """Engineering strain rotated with the same Q as :func:`rotate_stress`."""
    R = rotation_6(angles)
    return np.linalg.solve(R.T, np.asarray(eps, dtype=float))


def rotate_stiffness(angles, C):
    """Rotate a stiffness consistently with :func:`rotate_stress`.

    Equal to the component-wise 4th-order rotation
    C'_ijkl = Q_pi Q_qj Q_rk Q_sl C_pqrs, i.e. ``R @ C @ R.T``.
    """
    R = rotation_6(angles)
    return R @ np.asarray(C, dtype=float) @ R.T


def is_symmetric(C, rtol=1e-12):
    C = np.asarray(C)
    scale = max(np.abs(C).max(), 1e-300)
    return np.abs(C - C.T).max() <= rtol * scale


def is_psd(C, rtol=1e-10):
    C = np.asarray(C)
    if not is_symmetric(C, rtol=1e-10):
        return False
    ev = np.linalg.eigvalsh(0.5 * (C + C.T))
    return ev.min() >= -rtol * max(ev.max(), 0.0)


def _batched_q(angles):
    """Rotation matrices and their angle derivatives for a (K, 3) array."""
    angles = np.asarray(angles, dtype=float).reshape(-1, 3)
    c, s = np.cos(angles), np.sin(angles)
    K = len(angles)

    def rz(ci, si, deriv=False):
        M = np.zeros((K, 3, 3))
        if deriv:
            ci, si = -si, ci
        else:
            M[:, 2, 2] = 1.0
        M[:, 0, 0] = ci
        M[:, 0, 1] = -si
        M[:, 1, 0] = si
        M[:, 1, 1] = ci
        return M

    def rx(ci, si, deriv=False):
        M = np.zeros((K, 3, 3))
        if deriv:
            ci, si = -si, ci
        else:
            M[:, 0, 0] = 1.0
        M[:, 1, 1] = ci
        M[:, 1, 2] = -si
        M[:, 2, 1] = si
        M[:, 2, 2] = ci
        return M

    Za, Xb, Zg = rz(c[:, 0], s[:, 0]), rx(c[:, 1], s[:, 1]), rz(c[:, 2], s[:, 2])
    XZ = Xb @ Zg
    Q = Za @ XZ
    dQ = np.stack([rz(c[:, 0], s[:, 0], True) @ XZ,
                   Za @ rx(c[:, 1], s[:, 1], True) @ Zg,
                   (Za @ Xb) @ rz(c[:, 2], s[:, 2], True)], axis=1)
    return Q, dQ


_PAIR_FLAT = _PAIR.reshape(9, 6)


def rotations_6(angles):
    """Vectorised :func:`rotation_6` over a (K, 3) array of angles."""
    Q, _ = _batched_q(angles)
    K = len(Q)
    # QQ[n, a, b, k, l] = Q[n, k, a] Q[n, l, b]
    QQ = np.einsum("nka,nlb->nabkl", Q, Q).reshape(K, 9, 9)
    return (QQ @ _PAIR_FLAT).reshape(K, 3, 3, 6)[:, _ROW_A, _ROW_B, :]


def rotations_6_vjp(angles, gR):
    """Vectorised :func:`rotation_6_vjp`; ``gR`` has shape (K, 6, 6)."""
    Q, dQ = _batched_q(angles)
    K = len(Q)
    G = np.zeros((K, 3, 3, 6))
    G[:, _ROW_A, _ROW_B, :] = gR
    GP = (G.reshape(K, 9, 6) @ _PAIR_FLAT.T).reshape(K, 3, 3, 3, 3)  # [n, a, b, k, l]
    gQ = np.einsum("nabkl,nlb->nka", GP, Q) + np.einsum("nbalk,nlb->nka", GP, Q)
    return np.einsum("nij,naij->na", gQ, dQ)
