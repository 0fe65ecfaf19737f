"""Synthetic training data: sampled orthotropic phases and teacher targets.

Homogenized targets come from a fixed reference network (the "teacher"),
standing in for direct numerical simulation of an RVE.
"""
import hashlib
from dataclasses import dataclass

import numpy as np

from .constitutive import ElasticOrthotropic, stiffness_of
from .errors import AdmissibilityError, ConfigError
from .network import forward_batch

MAX_REJECTIONS = 1000

# dataset presets: (training samples, validation samples)
DATASET_PRESETS = {"dataset1": (400, 100), "dataset2": (1024, 100), "dataset3": (2048, 100)}


@dataclass(frozen=True)
class SamplingConfig:
    E_range: tuple = (1.0, 500.0)
    G_range: tuple = (0.3, 200.0)
    nu_range: tuple = (0.0, 0.45)
    isotropic: bool = False
    n_samples: int = 500
    seed: int = 0


@dataclass
class Dataset:
    Cp1: np.ndarray
    Cp2: np.ndarray
    C: np.ndarray
    oracle_id: str = ""
    seed: int = -1

    def __len__(self):
        return len(self.C)

    def subset(self, idx):
        return Dataset(self.Cp1[idx], self.Cp2[idx], self.C[idx], self.oracle_id, self.seed)

    def concat(self, other):
        return Dataset(np.concatenate([self.Cp1, other.Cp1]), np.concatenate([self.Cp2, other.Cp2]),
                       np.concatenate([self.C, other.C]), self.oracle_id, self.seed)

    def split(self, validation_fraction):
        """Return (train, validation); validation is the trailing block of samples."""
        n_val = int(round(validation_fraction * len(self)))
        n_train = len(self) - n_val
        if n_train < 1:
            raise ValueError("validation_fraction leaves no training samples")
        return self.subset(slice(0, n_train)), self.subset(slice(n_train, None))


def _log_uniform(rng, lo, hi, size=None):
    if lo == hi:
        return np.full(size, float(lo)) if size else float(lo)
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def _uniform(rng, lo, hi, size=None):
    if lo == hi:
        return np.full(size, float(lo)) if size else float(lo)
    return rng.uniform(lo, hi, size)


def sample_orthotropic(cfg, rng):
    """Draw one admissible orthotropic stiffness (rejection on non-PD compliance)."""
    for _ in range(MAX_REJECTIONS):
        if cfg.isotropic:
            E = _log_uniform(rng, *cfg.E_range)
            nu = _uniform(rng, *cfg.nu_range)
            mat = ElasticOrthotropic.isotropic(E, nu)
        else:
            E = _log_uniform(rng, *cfg.E_range, size=3)
            G = _log_uniform(rng, *cfg.G_range, size=3)
            nu = _uniform(rng, *cfg.nu_range, size=3)
            mat = ElasticOrthotropic(E[0], E[1], E[2], G[0], G[1], G[2], nu[0], nu[1], nu[2])
        try:
            return stiffness_of(mat)
        except AdmissibilityError:
            continue
    raise ConfigError(f"{MAX_REJECTIONS} consecutive rejections: sampling ranges "
                      "do not produce admissible materials")


def params_fingerprint(params):
    h = hashlib.sha256()
    h.update(params.model_type.encode())
    h.update(np.ascontiguousarray(params.to_vector()).tobytes())
    return f"{params.model_type}-N{params.depth}-{h.hexdigest()[:12]}"


def generate_dataset(oracle, cfg):
    """Sample phase pairs and label them with the teacher network ``oracle``."""
    rng = np.random.default_rng(cfg.seed)
    Cp1 = np.empty((cfg.n_samples, 6, 6))
    Cp2 = np.empty((cfg.n_samples, 6, 6))
    for j in range(cfg.n_samples):
        Cp1[j] = sample_orthotropic(cfg, rng)
        Cp2[j] = sample_orthotropic(cfg, rng)
    C = forward_batch(oracle, Cp1, Cp2)
    C = 0.5 * (C + np.swapaxes(C, 1, 2))
    return Dataset(Cp1, Cp2, C, params_fingerprint(oracle), cfg.seed)
