"""Offline training of material networks on linear-elastic stiffness data."""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidSampleError, TrainingError
from .network import DmnParams, ImnParams, Topology, backward_batch, forward_batch

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class LossConfig:
    eta: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if self.eta < 0 or not self.xi > 0:
            raise ValueError("need eta >= 0 and xi > 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10000
    batch_size: int = 40
    initial_lr: float = 1e-2
    lr_factor: float = 0.8
    patience: int = 50
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must be positive")
        if not (self.initial_lr > 0 and 0 < self.lr_factor < 1):
            raise ValueError("need initial_lr > 0 and 0 < lr_factor < 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    e_C: list = field(default_factory=list)
    e_C_train: list = field(default_factory=list)
    lr: list = field(default_factory=list)

    def append(self, epoch, train_loss, val_loss, e_C, e_C_train, lr):
        self.epoch.append(epoch)
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.e_C.append(e_C)
        self.e_C_train.append(e_C_train)
        self.lr.append(lr)

    def rows(self):
        return list(zip(self.epoch, self.train_loss, self.val_loss, self.e_C,
                        self.e_C_train, self.lr))

    def __len__(self):
        return len(self.epoch)


@dataclass
class TrainResult:
    params: object
    final_params: object
    history: TrainHistory
    initial_e_C: float
    initial_val_loss: float
    best_epoch: int


# -- loss -------------------------------------------------------------------

def _relative_sq_errors(C, Chat):
    norms = np.einsum("sij,sij->s", C, C)
    if np.any(norms == 0.0):
        raise InvalidSampleError("target stiffness with zero norm")
    diff = C - Chat
    return np.einsum("sij,sij->s", diff, diff) / norms, diff, norms


def _regularizer(z, cfg):
    gap = np.maximum(z, 0.0).sum() - cfg.xi
    return cfg.eta * gap ** 2, 2.0 * cfg.eta * gap * (z > 0.0)


def loss(params, batch, cfg=LossConfig()):
    if len(batch) == 0:
        raise ValueError("empty batch")
    rel2, _, _ = _relative_sq_errors(batch.C, forward_batch(params, batch.Cp1, batch.Cp2))
    return rel2.sum() / (2 * len(batch)) + _regularizer(params.z, cfg)[0]


def loss_and_grad(params, batch, cfg=LossConfig(), backend=None):
    """Return ``(loss, gradient, per-sample squared relative errors)``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    Chat, tape = forward_batch(params, batch.Cp1, batch.Cp2, tape=True, backend=backend)
    rel2, diff, norms = _relative_sq_errors(batch.C, Chat)
    n = len(batch)
    reg, greg = _regularizer(params.z, cfg)
    gtop = -diff / (n * norms)[:, None, None]
    grad = backward_batch(params, tape, np.ascontiguousarray(gtop), backend=backend)
    grad[: params.z.size] += greg
    return rel2.sum() / (2 * n) + reg, grad, rel2


def grad_loss(params, batch, cfg=LossConfig()):
    return loss_and_grad(params, batch, cfg)[1]


def mean_relative_error(params, dataset):
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    rel2, _, _ = _relative_sq_errors(dataset.C,
                                     forward_batch(params, dataset.Cp1, dataset.Cp2))
    return float(np.sqrt(rel2).mean())


# -- optimizer --------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(state, x, grad, lr):
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    return x - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), AdamState(m, v, t)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs
    without a strict improvement of the monitored loss."""

    def __init__(self, lr, factor=0.8, patience=50):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, value):
        if value < self.best:
            self.best = value
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr


# -- initialization and training loop ------------------------------------------

def init_params(model_type, topology, rng):
    """Random start with every base node active and activations summing to ~1."""
    nb = topology.n_base
    z = rng.uniform(2.0 / (3.0 * nb), 4.0 / (3.0 * nb), nb)
    if model_type == "dmn":
        return DmnParams(topology.depth, z, rng.uniform(-np.pi, np.pi, (topology.n_nodes, 3)))
    if model_type == "imn":
        return ImnParams(topology.depth, z, rng.uniform(0.0, 1.0, topology.n_parents),
                         rng.uniform(0.0, 1.0, topology.n_parents))
    raise ValueError(f"unknown model type {model_type!r}")


def init_teacher(model_type, topology, seed, inactive_fraction=0.5):
    """Hidden reference network with a fraction of its base nodes switched off.

    Trained networks end up with pruned nodes, so a teacher that already has
    some is a realistic target and leaves the student spare capacity.
    """
    if not 0.0 <= inactive_fraction < 1.0:
        raise ValueError("inactive_fraction must lie in [0, 1)")
    params = init_params(model_type, topology, np.random.default_rng(seed))
    nb = topology.n_base
    off = np.random.default_rng(seed).permutation(nb)[:int(round(inactive_fraction * nb))]
    params.z[off] *= -1.0
    return params


def _revive(vec, nb):
    z = vec[:nb]
    if np.all(z <= 0.0):
        z[np.argmax(z)] = 1.0 / nb
    return vec


def train(model_type, topology, dataset, cfg=TrainConfig(), loss_cfg=LossConfig(),
          init=None, backend=None, progress=None):
    """Fit network parameters to ``dataset``; returns a :class:`TrainResult`.

    The best parameters by validation loss are returned alongside the final
    ones.  ``progress`` is called as ``progress(epoch, history)`` if given.
    """
    if isinstance(topology, int):
        topology = Topology(topology)
    train_set, val_set = dataset.split(cfg.validation_fraction)
    rng = np.random.default_rng(cfg.seed)
    params = init if init is not None else init_params(model_type, topology, rng)
    nb = topology.n_base
    x = params.to_vector()
    opt = AdamState.zeros(x.size)
    sched = PlateauScheduler(cfg.initial_lr, cfg.lr_factor, cfg.patience)

    init_val_loss = loss(params, val_set, loss_cfg)
    init_e_C = mean_relative_error(params, val_set)
    best = (init_val_loss, params.copy(), 0)
    hist = TrainHistory()
    n = len(train_set)

    for epoch in range(1, cfg.epochs + 1):
        lr = sched.lr
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        tot_loss = 0.0
        tot_err = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch_loss, grad, rel2 = loss_and_grad(params, train_set.subset(idx), loss_cfg,
                                                   backend=backend)
            if not np.isfinite(batch_loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            tot_loss += batch_loss * len(idx)
            tot_err += np.sqrt(rel2).sum()
            x, opt = adam_step(opt, x, grad, lr)
            x = _revive(x, nb)
            params = params.with_vector(x)

        val_loss = loss(params, val_set, loss_cfg)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        e_val = mean_relative_error(params, val_set)
        hist.append(epoch, tot_loss / n, val_loss, e_val, tot_err / n, lr)
        if val_loss < best[0]:
            best = (val_loss, params.copy(), epoch)
        sched.step(val_loss)
        if progress is not None:
            progress(epoch, hist)

    log.debug("training finished: best epoch %d, val loss %.3e", best[2], best[0])
    return TrainResult(best[1], params, hist, init_e_C, init_val_loss, best[2])


def config_dict(cfg, loss_cfg):
    return {"train": asdict(cfg), "loss": asdict(loss_cfg)}
