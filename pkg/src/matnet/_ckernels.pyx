# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled block kernels, batched over samples.

Same contract as ``matnet._kernels_py``; every sample is handled with
fixed-size stack arrays and an explicit 3x3 inverse.
"""
import numpy as np
cimport numpy as cnp

from .errors import SingularInterfaceError

cnp.import_array()

BACKEND = "cython"


cdef inline int inv3(double[3][3] M, double[3][3] out) nogil:
    cdef double det
    out[0][0] = M[1][1] * M[2][2] - M[1][2] * M[2][1]
    out[0][1] = M[0][2] * M[2][1] - M[0][1] * M[2][2]
    out[0][2] = M[0][1] * M[1][2] - M[0][2] * M[1][1]
    out[1][0] = M[1][2] * M[2][0] - M[1][0] * M[2][2]
    out[1][1] = M[0][0] * M[2][2] - M[0][2] * M[2][0]
    out[1][2] = M[0][2] * M[1][0] - M[0][0] * M[1][2]
    out[2][0] = M[1][0] * M[2][1] - M[1][1] * M[2][0]
    out[2][1] = M[0][1] * M[2][0] - M[0][0] * M[2][1]
    out[2][2] = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    det = M[0][0] * out[0][0] + M[0][1] * out[1][0] + M[0][2] * out[2][0]
    if det == 0.0:
        return 1
    cdef int i, j
    for i in range(3):
        for j in range(3):
            out[i][j] /= det
    return 0


def block_forward(double[:, :, ::1] C1, double[:, :, ::1] C2, double f1,
                  double[:, ::1] H):
    cdef Py_ssize_t S = C1.shape[0]
    Ch_a = np.empty((S, 6, 6))
    X_a = np.empty((S, 3, 6))
    G_a = np.empty((S, 3, 6))
    cdef double[:, :, ::1] Ch = Ch_a
    cdef double[:, :, ::1] X = X_a
    cdef double[:, :, ::1] G = G_a
    cdef double f2 = 1.0 - f1
    cdef double c = f1 * f2
    cdef double[6][6] E
    cdef double[3][6] EH_t
    cdef double[3][3] M
    cdef double[3][3] Mi
    cdef double acc
    cdef Py_ssize_t s, i, j, k, a, b
    cdef int bad = 0
    with nogil:
        for s in range(S):
            for i in range(6):
                for j in range(6):
                    E[i][j] = f2 * C1[s, i, j] + f1 * C2[s, i, j]
            # EH_t = (E H)^T, 3x6
            for a in range(3):
                for i in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + E[i][k] * H[k, a]
                    EH_t[a][i] = acc
            for a in range(3):
                for b in range(3):
                    acc = 0.0
                    for i in range(6):
                        acc = acc + H[i, a] * EH_t[b][i]
                    M[a][b] = acc
            for a in range(3):
                for j in range(6):
                    acc = 0.0
                    for i in range(6):
                        acc = acc + H[i, a] * (C2[s, i, j] - C1[s, i, j])
                    G[s, a, j] = acc
            if inv3(M, Mi):
                bad = 1
                break
            for a in range(3):
                for j in range(6):
                    acc = 0.0
                    for b in range(3):
                        acc = acc + Mi[a][b] * G[s, b, j]
                    X[s, a, j] = acc
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for a in range(3):
                        acc = acc + G[s, a, i] * X[s, a, j]
                    Ch[s, i, j] = f1 * C1[s, i, j] + f2 * C2[s, i, j] - c * acc
    if bad:
        raise SingularInterfaceError("singular interface matrix in laminate block")
    return Ch_a, X_a, G_a


def block_backward(double[:, :, ::1] gCh, double[:, :, ::1] C1,
                   double[:, :, ::1] C2, double f1, double[:, ::1] H,
                   double[:, :, ::1] X, double[:, :, ::1] G):
    cdef Py_ssize_t S = C1.shape[0]
    gC1_a = np.empty((S, 6, 6))
    gC2_a = np.empty((S, 6, 6))
    gH_a = np.zeros((6, 3))
    cdef double[:, :, ::1] gC1 = gC1_a
    cdef double[:, :, ::1] gC2 = gC2_a
    cdef double[:, ::1] gH = gH_a
    cdef double f2 = 1.0 - f1
    cdef double c = f1 * f2
    cdef double gf1 = 0.0
    cdef double[6][6] Sm
    cdef double[3][6] XS
    cdef double[3][6] gG
    cdef double[3][3] gM
    cdef double[6][3] HgM
    cdef double[6][6] HgMHt
    cdef double[6][6] HgG
    cdef double[6][3] EH
    cdef double acc, d, e, gtx
    cdef Py_ssize_t s, i, j, k, a, b
    with nogil:
        for s in range(S):
            for i in range(6):
                for j in range(6):
                    Sm[i][j] = 0.5 * (gCh[s, i, j] + gCh[s, j, i])
            for a in range(3):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + X[s, a, k] * Sm[k][j]
                    XS[a][j] = acc
                    gG[a][j] = -2.0 * c * acc
            for a in range(3):
                for b in range(3):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + XS[a][k] * X[s, b, k]
                    gM[a][b] = c * acc
            for i in range(6):
                for b in range(3):
                    acc = 0.0
                    for a in range(3):
                        acc = acc + H[i, a] * gM[a][b]
                    HgM[i][b] = acc
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for b in range(3):
                        acc = acc + HgM[i][b] * H[j, b]
                    HgMHt[i][j] = acc
                    acc = 0.0
                    for a in range(3):
                        acc = acc + H[i, a] * gG[a][j]
                    HgG[i][j] = acc
            for i in range(6):
                for j in range(6):
                    gC1[s, i, j] = f1 * Sm[i][j] + f2 * HgMHt[i][j] - HgG[i][j]
                    gC2[s, i, j] = f2 * Sm[i][j] + f1 * HgMHt[i][j] + HgG[i][j]
            # df1: <S, C1 - C2> - (1 - 2 f1) <S, G^T X> + <gM, G H>
            for i in range(6):
                for j in range(6):
                    gtx = 0.0
                    for a in range(3):
                        gtx = gtx + G[s, a, i] * X[s, a, j]
                    gf1 = gf1 + Sm[i][j] * (C1[s, i, j] - C2[s, i, j]) \
                        - (1.0 - 2.0 * f1) * Sm[i][j] * gtx
            for a in range(3):
                for b in range(3):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + G[s, a, k] * H[k, b]
                    gf1 = gf1 + gM[a][b] * acc
            # gH += 2 E H gM + D gG^T
            for i in range(6):
                for b in range(3):
                    acc = 0.0
                    for k in range(6):
                        e = f2 * C1[s, i, k] + f1 * C2[s, i, k]
                        acc = acc + e * H[k, b]
                    EH[i][b] = acc
            for i in range(6):
                for b in range(3):
                    acc = 0.0
                    for a in range(3):
                        acc = acc + EH[i][a] * gM[a][b]
                    for k in range(6):
                        d = C2[s, i, k] - C1[s, i, k]
                        acc = acc + 0.5 * d * gG[b][k]
                    gH[i, b] += 2.0 * acc
    return gC1_a, gC2_a, gf1, gH_a


def rotate_forward(double[:, ::1] R, double[:, :, ::1] C):
    cdef Py_ssize_t S = C.shape[0]
    out_a = np.empty((S, 6, 6))
    cdef double[:, :, ::1] out = out_a
    cdef double[6][6] RC
    cdef double acc
    cdef Py_ssize_t s, i, j, k
    with nogil:
        for s in range(S):
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + R[i, k] * C[s, k, j]
                    RC[i][j] = acc
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + RC[i][k] * R[j, k]
                    out[s, i, j] = acc
    return out_a


def rotate_backward(double[:, ::1] R, double[:, :, ::1] C, double[:, :, ::1] gCr):
    cdef Py_ssize_t S = C.shape[0]
    gC_a = np.empty((S, 6, 6))
    gR_a = np.zeros((6, 6))
    cdef double[:, :, ::1] gC = gC_a
    cdef double[:, ::1] gR = gR_a
    cdef double[6][6] Sm
    cdef double[6][6] T
    cdef double[6][6] SR
    cdef double acc
    cdef Py_ssize_t s, i, j, k
    with nogil:
        for s in range(S):
            for i in range(6):
                for j in range(6):
                    Sm[i][j] = 0.5 * (gCr[s, i, j] + gCr[s, j, i])
            # gC = R^T S R
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + Sm[i][k] * R[k, j]
                    SR[i][j] = acc
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + R[k, i] * SR[k][j]
                    gC[s, i, j] = acc
            # gR += 2 S R C
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc = acc + SR[i][k] * C[s, k, j]
                    gR[i, j] += 2.0 * acc
    return gC_a, gR_a
