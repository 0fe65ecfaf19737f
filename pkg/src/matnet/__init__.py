"""Deep material networks (DMN) and interaction-based material networks (IMN)."""
__version__ = "0.1.0"

from .constitutive import (ElasticOrthotropic, J2Plasticity, LinearElastic, MaterialState,
                           isotropic_stiffness, stiffness_of)
from .datagen import Dataset, SamplingConfig, generate_dataset, sample_orthotropic
from .errors import (AdmissibilityError, ConfigError, ConvergenceError, DegenerateNetworkError,
                     InvalidSampleError, MatNetError, SchemaError, SingularInterfaceError,
                     TrainingError)
from .kernels import BACKEND as KERNEL_BACKEND
from .network import (DmnParams, ImnParams, Topology, count_active_nodes, dmn_param_count,
                      forward, forward_dmn, forward_imn, imn_param_count, laminate_block,
                      laminate_block_affine, propagate_weights)
from .online import (OnlineModel, SolverConfig, assemble_A, fixed_point_predict_dmn,
                     fixed_point_predict_imn, newton_predict, predict_step, run_loading_path,
                     six_paths)
from .presets import load_preset
from .storage import load_dataset, load_history, load_model, save_dataset, save_history, save_model
from .training import LossConfig, TrainConfig, grad_loss, init_params, loss, train
