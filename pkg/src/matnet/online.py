"""Online nonlinear prediction at one macroscopic material point.

Four schemes share one interface, ``predict_step(model, materials, states,
deps_macro, cfg)``:

``dmn_residual`` / ``dmn_no_residual``
    fixed-point forward homogenization / backward de-homogenization through a
    DMN, with or without the affine residual-stress term;
``imn_fixed_point``
    the same for an IMN, stiffness only;
``imn_newton``
    Newton iteration on the stacked interface jump vector of an IMN.

Strains are engineering Voigt increments.  Base-node states are committed by
the caller (see :func:`run_loading_path`) only after a step converges.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .constitutive import MaterialState
from .errors import ConvergenceError, MatNetError, SingularInterfaceError
from .network import laminate_block_affine, propagate_weights
from .voigt import h_matrix, rotations_6

SCHEMES = ("dmn_residual", "dmn_no_residual", "imn_fixed_point", "imn_newton")
_TINY = 1e-14


class AssemblyError(MatNetError, ValueError):
    """The interaction matrix cannot be assembled consistently."""


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 100
    scheme: str = "imn_newton"

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("need tol > 0 and max_iter >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")


@dataclass
class PredictionStepResult:
    dsig_macro: np.ndarray
    iterations: int
    states: MaterialState
    converged: bool
    deps_nodes: np.ndarray = field(repr=False, default=None)
    dsig_nodes: np.ndarray = field(repr=False, default=None)
    counters: dict = field(default_factory=dict)


class OnlineModel:
    """Pruned tree structure of a trained network for online use."""

    def __init__(self, params):
        self.params = params
        self.topology = topo = params.topology
        self.model_type = params.model_type
        self.weights = wf = propagate_weights(params.z, topo)
        w = wf.w
        self.active = np.flatnonzero(w[topo.n_parents:] > 0.0)
        self.phase = np.where(self.active % 2 == 0, 1, 2)
        self.base_weights = w[topo.n_parents + self.active]
        # heap index -> row in the active list
        self.row = {topo.base_node(m): i for i, m in enumerate(self.active)}
        self.retained = [k for k in range(topo.n_parents)
                         if w[2 * k + 1] > 0.0 and w[2 * k + 2] > 0.0]
        self.alive = [k for k in range(topo.n_nodes) if w[k] > 0.0]
        if self.model_type == "dmn":
            self.R = rotations_6(params.angles)
            self.normals = None
        else:
            self.R = None
            self.normals = params.normals()

    @property
    def n_active(self):
        return len(self.active)

    def normal(self, k):
        return np.array([0.0, 0.0, 1.0]) if self.normals is None else self.normals[k]

    def initial_states(self):
        return MaterialState.virgin(self.n_active)


def _as_model(model):
    return model if isinstance(model, OnlineModel) else OnlineModel(model)


def evaluate_materials(model, materials, states, deps):
    """Run each active base node's law; returns ``(dsig, new_states, C_tan)``."""
    dsig = np.empty_like(deps)
    C_tan = np.empty((len(deps), 6, 6))
    new = states.copy()
    for p, law in ((1, materials[0]), (2, materials[1])):
        idx = np.flatnonzero(model.phase == p)
        if idx.size == 0:
            continue
        d, st, C = law.update(states.take(idx), deps[idx])
        dsig[idx] = d
        C_tan[idx] = C
        new = new.put(idx, st)
    return dsig, new, C_tan


def _secant(C_ref, dsig, deps):
    """Rank-one update of ``C_ref`` so that ``C_s @ deps == dsig`` exactly.

    Any such matrix gives the same converged strains (traction continuity
    holds for the true stress increments); starting from the elastic
    stiffness keeps the iteration stable through elastic-plastic switches.
    """
    r = dsig - np.einsum("nij,nj->ni", C_ref, deps)
    nrm2 = np.einsum("ni,ni->n", deps, deps)
    C = C_ref.copy()
    ok = nrm2 > _TINY ** 2
    C[ok] += np.einsum("ni,nj->nij", r[ok], deps[ok]) / nrm2[ok, None, None]
    return C


def _rel_change(new, old):
    diff = np.linalg.norm(new - old)
    ref = np.linalg.norm(old)
    return diff / ref if ref >= _TINY else diff


# -- IMN Newton ---------------------------------------------------------------

def assemble_A(topology, weights, normals, return_structure=False):
    """Weighted orientation matrix mapping jump vectors to base-node strains.

    Rows are grouped by active base node (6 each), columns by retained parent
    (3 each); ``eps_nodes - eps_macro == A @ a`` with ``a_p = w_p b_p``.
    """
    w = weights.w
    topo = topology
    for k in range(topo.n_parents):
        l, r = topo.children(k)
        if not np.isclose(w[k], w[l] + w[r], rtol=1e-12, atol=0.0):
            raise AssemblyError(f"weight of parent {k} is not the sum of its children")
    normals = np.asarray(normals, dtype=float)
    if normals.shape != (topo.n_parents, 3):
        raise AssemblyError("need one interface normal per parent node")
    active = np.flatnonzero(w[topo.n_parents:] > 0.0)
    retained = [k for k in range(topo.n_parents)
                if w[2 * k + 1] > 0.0 and w[2 * k + 2] > 0.0]
    col = {k: j for j, k in enumerate(retained)}
    A = np.zeros((6 * len(active), 3 * len(retained)))
    for i, m in enumerate(active):
        node = topo.base_node(m)
        while node > 0:
            parent = (node - 1) // 2
            if parent in col:
                sign = 1.0 if node == 2 * parent + 1 else -1.0
                j = col[parent]
                A[6 * i:6 * i + 6, 3 * j:3 * j + 3] = sign * h_matrix(normals[parent]) / w[node]
            node = parent
    for j in range(len(retained)):
        if not np.any(A[:, 3 * j:3 * j + 3]):
            raise AssemblyError(f"orphan column for parent {retained[j]}")
    if return_structure:
        return A, active, retained
    return A


def newton_predict(model, materials, states, deps_macro, cfg=SolverConfig()):
    model = _as_model(model)
    if model.model_type != "imn":
        raise ValueError("Newton iterations need an IMN")
    A = _newton_matrix(model)
    M = model.n_active
    w = model.base_weights
    deps_macro = np.asarray(deps_macro, dtype=float)
    a = np.zeros(A.shape[1])
    scale = max(np.abs(law.elastic_stiffness()).max() for law in materials)
    floor = _TINY * scale * max(np.linalg.norm(deps_macro), 1.0)
    r0 = None
    iters = 0
    while True:
        deps = deps_macro[None, :] + (A @ a).reshape(M, 6)
        dsig, new_states, K = evaluate_materials(model, materials, states, deps)
        R = A.T @ (w[:, None] * dsig).ravel()
        rn = np.linalg.norm(R)
        if r0 is None:
            r0 = rn
        if A.shape[1] == 0 or (iters >= 1 and rn <= max(cfg.tol * r0, floor)):
            break
        if iters >= cfg.max_iter:
            raise ConvergenceError(f"Newton iterations exceeded {cfg.max_iter}, "
                                   f"residual {rn:.3e}", residual=rn, iterations=iters)
        Ab = A.reshape(M, 6, -1)
        KA = np.einsum("nij,njp->nip", K, Ab)
        J = np.einsum("nip,n,niq->pq", Ab, w, KA)
        try:
            a = a - np.linalg.solve(J, R)
        except np.linalg.LinAlgError as exc:
            raise SingularInterfaceError(
                f"singular Newton Jacobian (parents {model.retained})") from exc
        iters += 1
    iters = max(iters, 1)
    dsig_macro = (w[:, None] * dsig).sum(axis=0) / w.sum()
    counters = {"material_evals": (iters + 1) * M, "block_ops": iters * len(model.retained)}
    return PredictionStepResult(dsig_macro, iters, new_states, True, deps, dsig, counters)


def _newton_matrix(model):
    A = getattr(model, "_A", None)
    if A is None:
        A = assemble_A(model.topology, model.weights, model.normals)
        model._A = A
    return A


# -- tree passes for the fixed-point schemes ----------------------------------------

def _dehomogenize(model, blocks, deps_macro):
    """Push the macro strain down through stored block operators.

    ``blocks[k] = (B, b_delta)`` for retained parents.  Returns base-node
    strains in each node's own (pre-rotation) frame.
    """
    topo = model.topology
    w = model.weights.w
    R = model.R
    eps = {0: np.asarray(deps_macro, dtype=float)}
    out = np.empty((model.n_active, 6))
    for k in model.alive:
        e = eps.pop(k)
        if R is not None:
            e = R[k].T @ e
        if k >= topo.n_parents:
            out[model.row[k]] = e
            continue
        l, r = topo.children(k)
        if k in blocks:
            B, bd = blocks[k]
            f1 = model.weights.f1[k]
            Hb = h_matrix(model.normal(k)) @ (B @ e + bd)
            eps[l] = e + Hb / f1
            eps[r] = e - Hb / (1.0 - f1)
        else:
            eps[l if w[l] > 0.0 else r] = e
    return out


def _homogenize(model, C_nodes, ds_nodes):
    """Forward pass of (stiffness, residual stress) to the top node."""
    topo = model.topology
    w = model.weights.w
    R = model.R
    C, ds, blocks = {}, {}, {}
    for i, m in enumerate(model.active):
        k = topo.base_node(m)
        if R is not None:
            C[k] = R[k] @ C_nodes[i] @ R[k].T
            ds[k] = R[k] @ ds_nodes[i]
        else:
            C[k], ds[k] = C_nodes[i], ds_nodes[i]
    for k in reversed(model.alive):
        if k >= topo.n_parents:
            continue
        l, r = topo.children(k)
        if w[l] > 0.0 and w[r] > 0.0:
            Ch, dsh, B, bd = laminate_block_affine(C.pop(l), C.pop(r), ds.pop(l), ds.pop(r),
                                                   model.weights.f1[k], model.normal(k))
            blocks[k] = (B, bd)
        else:
            c = l if w[l] > 0.0 else r
            Ch, dsh = C.pop(c), ds.pop(c)
        if R is not None:
            Ch = R[k] @ Ch @ R[k].T
            dsh = R[k] @ dsh
        C[k], ds[k] = Ch, dsh
    return C[0], ds[0], blocks


def average_stress(model, sig_nodes):
    """Rule-of-mixtures stress at the top node from base-node stresses."""
    topo = model.topology
    w = model.weights.w
    R = model.R
    sig = {}
    for i, m in enumerate(model.active):
        k = topo.base_node(m)
        sig[k] = R[k] @ sig_nodes[i] if R is not None else sig_nodes[i]
    for k in reversed(model.alive):
        if k >= topo.n_parents:
            continue
        l, r = topo.children(k)
        s = sum(w[c] * sig.pop(c) for c in (l, r) if w[c] > 0.0) / w[k]
        sig[k] = R[k] @ s if R is not None else s
    return sig[0]


def _fixed_point(model, materials, states, deps_macro, cfg, use_residual):
    M = model.n_active
    deps_macro = np.asarray(deps_macro, dtype=float)
    deps = np.zeros((M, 6))
    zero = np.zeros((M, 6))
    C_el = np.array([materials[p - 1].elastic_stiffness() for p in model.phase])
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        dsig, _, Ct = evaluate_materials(model, materials, states, deps)
        if use_residual:
            C_nodes = Ct
            ds_nodes = dsig - np.einsum("nij,nj->ni", Ct, deps)
        else:
            C_nodes = _secant(C_el, dsig, deps)
            ds_nodes = zero
        _, _, blocks = _homogenize(model, C_nodes, ds_nodes)
        new = _dehomogenize(model, blocks, deps_macro)
        change = _rel_change(new, deps)
        deps = new
        if not model.retained or change <= cfg.tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"fixed-point iterations exceeded {cfg.max_iter}, "
                               f"relative change {change:.3e}", residual=change,
                               iterations=it)
    dsig, new_states, _ = evaluate_materials(model, materials, states, deps)
    dsig_macro = average_stress(model, dsig)
    counters = {"material_evals": (it + 1) * M, "block_ops": it * len(model.retained)}
    return PredictionStepResult(dsig_macro, it, new_states, True, deps, dsig, counters)


def fixed_point_predict_imn(model, materials, states, deps_macro, cfg=SolverConfig()):
    model = _as_model(model)
    if model.model_type != "imn":
        raise ValueError("expected an IMN")
    return _fixed_point(model, materials, states, deps_macro, cfg, use_residual=False)


def fixed_point_predict_dmn(model, materials, states, deps_macro, cfg=SolverConfig(),
                            use_residual=True):
    model = _as_model(model)
    if model.model_type != "dmn":
        raise ValueError("expected a DMN")
    return _fixed_point(model, materials, states, deps_macro, cfg, use_residual)


def predict_step(model, materials, states, deps_macro, cfg=SolverConfig()):
    if cfg.scheme == "imn_newton":
        return newton_predict(model, materials, states, deps_macro, cfg)
    if cfg.scheme == "imn_fixed_point":
        return fixed_point_predict_imn(model, materials, states, deps_macro, cfg)
    return fixed_point_predict_dmn(model, materials, states, deps_macro, cfg,
                                   use_residual=cfg.scheme == "dmn_residual")


# -- loading paths ---------------------------------------------------------------

PATH_NAMES = ("e11", "e22", "e33", "e12", "e23", "e31")
_PATH_COMPONENT = {"e11": 0, "e22": 1, "e33": 2, "e12": 5, "e23": 3, "e31": 4}


def six_paths(amplitude=0.02, steps=20):
    """Strain-increment sequences for three uniaxial and three shear cases."""
    paths = {}
    for name in PATH_NAMES:
        inc = np.zeros((steps, 6))
        inc[:, _PATH_COMPONENT[name]] = amplitude / steps
        paths[name] = inc
    return paths


@dataclass
class LoadingResult:
    strain: np.ndarray
    stress: np.ndarray
    iterations: np.ndarray
    active_nodes: int
    elapsed_ns: np.ndarray
    states: MaterialState
    counters: dict
    plastic: np.ndarray = None  # True where some base node yielded during the step

    @property
    def total_iterations(self):
        return int(self.iterations.sum())


class PathError(ConvergenceError):
    def __init__(self, message, step, partial):
        super().__init__(message)
        self.step = step
        self.partial = partial


def run_loading_path(model, materials, path, cfg=SolverConfig(), states=None):
    """Apply a sequence of macro strain increments, committing after each step."""
    model = _as_model(model)
    path = np.atleast_2d(np.asarray(path, dtype=float))
    states = model.initial_states() if states is None else states
    eps = np.zeros(6)
    sig = np.zeros(6)
    strains, stresses, iters, times, plastic = [], [], [], [], []
    counters = {"material_evals": 0, "block_ops": 0}

    def partial():
        return LoadingResult(np.array(strains).reshape(-1, 6), np.array(stresses).reshape(-1, 6),
                             np.array(iters, dtype=int), model.n_active,
                             np.array(times, dtype=np.int64), states, dict(counters),
                             np.array(plastic, dtype=bool))

    for step, deps in enumerate(path, start=1):
        t0 = time.perf_counter_ns()
        try:
            res = predict_step(model, materials, states, deps, cfg)
        except ConvergenceError as exc:
            raise PathError(f"step {step}: {exc}", step, partial()) from exc
        times.append(time.perf_counter_ns() - t0)
        plastic.append(bool(np.any(res.states.eq_plastic_strain > states.eq_plastic_strain)))
        states = res.states
        eps = eps + deps
        sig = sig + res.dsig_macro
        strains.append(eps)
        stresses.append(sig)
        iters.append(res.iterations)
        for key, val in res.counters.items():
            counters[key] += val
    return partial()
