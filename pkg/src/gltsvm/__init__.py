"""Twin support vector machine with the bounded, asymmetric guardian loss.

The two non-parallel planes (or kernel surfaces) are fitted independently
by a fixed-point iteration on their stationarity conditions.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    FoldPlan,
    Scaling,
    gaussian_pair,
    inject_label_noise,
    load_csv,
    minmax_scale,
    split_by_class,
    stratified_kfold,
    two_moons,
)
from .errors import (
    DegenerateModelError,
    DivergenceError,
    GLTSVMError,
    InvalidArgumentError,
    InvalidDatasetError,
    ParseError,
    SingularMatrixError,
    UnsupportedVersionError,
)
from .evaluation import (
    GridSpec,
    accuracy,
    build_benchmark_table,
    cross_validate,
    grid_search,
    rank_row,
    render_table,
)
from .kernels import KernelSpec, gram
from .losses import LossSpec, gloss, gloss_weight, loss_curve
from .model import KernelModel, LinearModel, load_model, predict, predict_batch, save_model
from .numerics import SmwOperator, smw_apply, spd_solve
from .solver import HyperParams, fit, fit_kernel, fit_linear

__all__ = [name for name in dir() if not name.startswith("_")]
