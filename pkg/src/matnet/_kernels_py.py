"""Pure numpy block kernels, batched over samples.

Mirrors the compiled ``_ckernels`` module function for function.  Arrays are
(S, 6, 6) stacks of stiffness matrices; ``f1`` and ``H`` are shared across
the batch.
"""
import numpy as np

BACKEND = "numpy"


def block_forward(C1, C2, f1, H):
    """Laminate two phases across an interface with orientation matrix ``H``.

    Returns ``(Ch, X, G)`` with ``G = H^T (C2 - C1)`` and ``X = M^-1 G`` where
    ``M = H^T (f2 C1 + f1 C2) H``; the strain-jump operator is ``f1 f2 X``.
    """
    f2 = 1.0 - f1
    E = f2 * C1 + f1 * C2
    M = H.T @ E @ H
    G = H.T @ (C2 - C1)
    X = np.linalg.solve(M, G)
    Ch = f1 * C1 + f2 * C2 - (f1 * f2) * (np.swapaxes(G, -1, -2) @ X)
    return Ch, X, G


def block_backward(gCh, C1, C2, f1, H, X, G):
    f2 = 1.0 - f1
    c = f1 * f2
    S = 0.5 * (gCh + np.swapaxes(gCh, -1, -2))
    XS = X @ S
    gG = -2.0 * c * XS
    gM = c * (XS @ np.swapaxes(X, -1, -2))
    HgMHt = H @ gM @ H.T
    HgG = H @ gG

    gC1 = f1 * S + f2 * HgMHt - HgG
    gC2 = f2 * S + f1 * HgMHt + HgG

    GtX = np.swapaxes(G, -1, -2) @ X
    gf1 = (np.einsum("sij,sij->", S, C1 - C2)
           - (1.0 - 2.0 * f1) * np.einsum("sij,sij->", S, GtX)
           + np.einsum("sij,sij->", gM, G @ H))

    E = f2 * C1 + f1 * C2
    D = C2 - C1
    gH = (2.0 * (E @ H @ gM) + D @ np.swapaxes(gG, -1, -2)).sum(axis=0)
    return gC1, gC2, gf1, gH


def rotate_forward(R, C):
    return R @ C @ R.T


def rotate_backward(R, C, gCr):
    S = 0.5 * (gCr + np.swapaxes(gCr, -1, -2))
    gC = R.T @ S @ R
    gR = 2.0 * (S @ R @ C).sum(axis=0)
    return gC, gR
