"""Binary-tree material networks: topology, parameters and homogenization.

Nodes are stored in heap order: node ``k`` has children ``2k+1`` and
``2k+2``; the first ``2**N - 1`` entries are parents (this is also the order
of the IMN interface parameters) and the last ``2**N`` are base nodes.  Base
node ``m`` (0-based) carries phase 1 when ``m`` is even and phase 2 when odd.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateNetworkError, SingularInterfaceError
from .voigt import (h_matrix, h_matrix_vjp, normal_from_angles, normal_jacobian,
                    rotations_6, rotations_6_vjp)

E3 = np.array([0.0, 0.0, 1.0])
H_E3 = h_matrix(E3)


@dataclass(frozen=True)
class Topology:
    depth: int

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def n_base(self):
        return 2 ** self.depth

    @property
    def n_parents(self):
        return 2 ** self.depth - 1

    @property
    def n_nodes(self):
        return 2 ** (self.depth + 1) - 1

    def base_node(self, m):
        return self.n_parents + m

    def children(self, k):
        return 2 * k + 1, 2 * k + 2

    def layer_of(self, k):
        return int(np.floor(np.log2(k + 1)))

    def base_phase(self, m):
        """1 or 2; odd 1-based base indices carry phase 1."""
        return 1 if m % 2 == 0 else 2


@dataclass
class DmnParams:
    depth: int
    z: np.ndarray
    angles: np.ndarray = field(repr=False)
    model_type = "dmn"

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float).reshape(-1, 3)
        topo = Topology(self.depth)
        if self.z.shape != (topo.n_base,) or self.angles.shape != (topo.n_nodes, 3):
            raise ValueError("parameter shapes do not match depth")

    @property
    def topology(self):
        return Topology(self.depth)

    @property
    def n_params(self):
        return self.z.size + self.angles.size

    def to_vector(self):
        return np.concatenate([self.z, self.angles.ravel()])

    def with_vector(self, v):
        nb = self.z.size
        return DmnParams(self.depth, v[:nb].copy(), v[nb:].reshape(-1, 3).copy())

    def copy(self):
        return self.with_vector(self.to_vector())


@dataclass
class ImnParams:
    depth: int
    z: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    model_type = "imn"

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        topo = Topology(self.depth)
        if (self.z.shape != (topo.n_base,) or self.theta.shape != (topo.n_parents,)
                or self.phi.shape != (topo.n_parents,)):
            raise ValueError("parameter shapes do not match depth")

    @property
    def topology(self):
        return Topology(self.depth)

    @property
    def n_params(self):
        return self.z.size + self.theta.size + self.phi.size

    def normals(self):
        return np.array([normal_from_angles(t, p) for t, p in zip(self.theta, self.phi)])

    def to_vector(self):
        return np.concatenate([self.z, self.theta, self.phi])

    def with_vector(self, v):
        nb, npar = self.z.size, self.theta.size
        return ImnParams(self.depth, v[:nb].copy(), v[nb:nb + npar].copy(),
                         v[nb + npar:].copy())

    def copy(self):
        return self.with_vector(self.to_vector())


def dmn_param_count(depth):
    return 7 * 2 ** depth - 3


def imn_param_count(depth):
    return 3 * 2 ** depth - 2


@dataclass
class WeightField:
    w: np.ndarray
    f1: np.ndarray  # per parent; NaN where the parent weight is zero

    @property
    def top(self):
        return self.w[0]

    def f2(self):
        return 1.0 - self.f1


def propagate_weights(z, topology=None):
    """ReLU-activate base activations and sum weights up the tree."""
    z = np.asarray(z, dtype=float)
    topo = topology or Topology(int(np.log2(z.size)))
    if z.size != topo.n_base:
        raise ValueError("activation count does not match topology")
    w = np.zeros(topo.n_nodes)
    w[topo.n_parents:] = np.maximum(z, 0.0)
    if w[topo.n_parents:].sum() <= 0.0:
        raise DegenerateNetworkError("all base-node weights are zero")
    f1 = np.full(topo.n_parents, np.nan)
    for k in range(topo.n_parents - 1, -1, -1):
        l, r = topo.children(k)
        w[k] = w[l] + w[r]
        if w[k] > 0.0:
            f1[k] = w[l] / w[k]
    return WeightField(w, f1)


def _interface_inverse(M):
    scale = np.abs(M).max()
    if scale == 0.0 or np.linalg.cond(M) > 1e14:
        raise SingularInterfaceError("interface matrix H^T (f2 C1 + f1 C2) H is singular")
    return np.linalg.inv(M)


def laminate_block(C1, C2, f1, n):
    """Homogenize two phases across an interface with unit normal ``n``.

    Returns ``(Ch, B)`` where ``B`` maps the parent strain to the interface
    jump vector ``b``; child strains are ``eps +/- H b / f``.
    """
    C1, C2 = np.asarray(C1, dtype=float), np.asarray(C2, dtype=float)
    f2 = 1.0 - f1
    H = h_matrix(n)
    if f1 * f2 == 0.0:
        return (C1.copy() if f1 == 1.0 else C2.copy()), np.zeros((3, 6))
    Minv = _interface_inverse(H.T @ (f2 * C1 + f1 * C2) @ H)
    B = f1 * f2 * Minv @ H.T @ (C2 - C1)
    Ch = f1 * C1 + f2 * C2 - (C2 - C1) @ H @ B
    return 0.5 * (Ch + Ch.T), B


def laminate_block_affine(C1, C2, ds1, ds2, f1, n):
    """Laminate for affine laws ``sig_k = C_k eps_k + ds_k``.

    Returns ``(Ch, ds_h, B, b_delta)``; the jump is ``b = B eps_h + b_delta``.
    """
    C1, C2 = np.asarray(C1, dtype=float), np.asarray(C2, dtype=float)
    ds1, ds2 = np.asarray(ds1, dtype=float), np.asarray(ds2, dtype=float)
    f2 = 1.0 - f1
    H = h_matrix(n)
    if f1 * f2 == 0.0:
        keep = (C1, ds1) if f1 == 1.0 else (C2, ds2)
        return keep[0].copy(), keep[1].copy(), np.zeros((3, 6)), np.zeros(3)
    Minv = _interface_inverse(H.T @ (f2 * C1 + f1 * C2) @ H)
    B = f1 * f2 * Minv @ H.T @ (C2 - C1)
    b_delta = f1 * f2 * Minv @ H.T @ (ds2 - ds1)
    Ch = f1 * C1 + f2 * C2 - (C2 - C1) @ H @ B
    ds_h = f1 * ds1 + f2 * ds2 + (C1 - C2) @ H @ b_delta
    return Ch, ds_h, B, b_delta


# --------------------------------------------------------------------------
# batched forward / reverse pass used by training and evaluation

class _Tape:
    __slots__ = ("C", "ops", "weights", "R", "H")

    def __init__(self):
        self.C = {}
        self.ops = []


def _as_batch(C):
    C = np.ascontiguousarray(C, dtype=float)
    return C[None] if C.ndim == 2 else C


def forward_batch(params, Cp1, Cp2, tape=False, backend=None):
    """Top-node stiffness for a batch of phase pairs (S, 6, 6) each.

    With ``tape=True`` also returns the record needed by :func:`backward_batch`.
    """
    kern = backend or kernels
    Cp1, Cp2 = _as_batch(Cp1), _as_batch(Cp2)
    topo = params.topology
    wf = propagate_weights(params.z, topo)
    w = wf.w
    is_dmn = params.model_type == "dmn"
    rec = _Tape() if tape else None
    C = {}
    R = None
    if is_dmn:
        R = np.ascontiguousarray(rotations_6(params.angles))
    else:
        normals = params.normals()
        Hs = {k: h_matrix(normals[k]) for k in range(topo.n_parents)}

    for m in range(topo.n_base):
        k = topo.base_node(m)
        if w[k] <= 0.0:
            continue
        base = Cp1 if m % 2 == 0 else Cp2
        if is_dmn:
            C[k] = kern.rotate_forward(R[k], base)
            if tape:
                rec.ops.append(("rot", k, base))
        else:
            C[k] = base
    for k in range(topo.n_parents - 1, -1, -1):
        if w[k] <= 0.0:
            continue
        l, r = topo.children(k)
        if w[l] > 0.0 and w[r] > 0.0:
            H = H_E3 if is_dmn else Hs[k]
            Ch, X, G = kern.block_forward(C[l], C[r], wf.f1[k], H)
            if tape:
                rec.ops.append(("block", k, (l, r, H, X, G)))
        else:
            Ch = C[l] if w[l] > 0.0 else C[r]
            if tape:
                rec.ops.append(("pass", k, l if w[l] > 0.0 else r))
        if is_dmn:
            pre = Ch
            Ch = kern.rotate_forward(R[k], pre)
            if tape:
                rec.ops.append(("rot", k, pre))
        C[k] = Ch
    # round-off in long chains leaves ~1e-12 asymmetry; the reverse pass
    # already symmetrizes incoming gradients, so this costs nothing there
    top = 0.5 * (C[0] + np.swapaxes(C[0], -1, -2))
    if tape:
        rec.C = C
        rec.weights = wf
        rec.R = R
        rec.H = None if is_dmn else Hs
        return top, rec
    return top


def backward_batch(params, rec, gtop, backend=None):
    """Gradient of ``<gtop, C_top>`` summed over the batch, as a flat vector."""
    kern = backend or kernels
    topo = params.topology
    wf = rec.weights
    w = wf.w
    is_dmn = params.model_type == "dmn"
    g = {0: gtop}
    gw = np.zeros(topo.n_nodes)
    g_R = np.zeros((topo.n_nodes, 6, 6)) if is_dmn else None
    g_H = {} if not is_dmn else None

    # ops were recorded bottom-up; walk them in reverse
    for kind, k, data in reversed(rec.ops):
        if kind == "rot":
            gC, gR = kern.rotate_backward(rec.R[k], data, np.ascontiguousarray(g[k]))
            g_R[k] += gR
            g[k] = gC
        elif kind == "pass":
            g[data] = g.pop(k)
        else:
            l, r, H, X, G = data
            gk = np.ascontiguousarray(g.pop(k))
            gC1, gC2, gf1, gH = kern.block_backward(gk, rec.C[l], rec.C[r], wf.f1[k], H, X, G)
            g[l], g[r] = gC1, gC2
            wsum = w[l] + w[r]
            gw[l] += gf1 * w[r] / wsum ** 2
            gw[r] -= gf1 * w[l] / wsum ** 2
            if not is_dmn:
                g_H[k] = gH

    # the parent weight w_k = w_l + w_r only enters through its own parent's f1
    for k in range(topo.n_parents):
        l, r = topo.children(k)
        gw[l] += gw[k]
        gw[r] += gw[k]
    z = params.z
    gz = np.where(z > 0.0, gw[topo.n_parents:], 0.0)
    if is_dmn:
        g_ang = rotations_6_vjp(params.angles, g_R)
        return np.concatenate([gz, g_ang.ravel()])
    g_theta = np.zeros(topo.n_parents)
    g_phi = np.zeros(topo.n_parents)
    for k, gH in g_H.items():
        gn = h_matrix_vjp(gH)
        dn = normal_jacobian(params.theta[k], params.phi[k])
        g_theta[k], g_phi[k] = gn @ dn
    return np.concatenate([gz, g_theta, g_phi])


def forward_dmn(params, Cp1, Cp2):
    """Homogenized stiffness of a DMN (rotation + e3 laminate per node)."""
    out = forward_batch(params, Cp1, Cp2)
    return out[0] if np.ndim(Cp1) == 2 else out


def forward_imn(params, Cp1, Cp2):
    """Homogenized stiffness of an IMN (interface normal per parent)."""
    out = forward_batch(params, Cp1, Cp2)
    return out[0] if np.ndim(Cp1) == 2 else out


def forward(params, Cp1, Cp2):
    if params.model_type == "dmn":
        return forward_dmn(params, Cp1, Cp2)
    return forward_imn(params, Cp1, Cp2)


def count_active_nodes(params):
    return int(np.count_nonzero(np.asarray(params.z) > 0.0))
