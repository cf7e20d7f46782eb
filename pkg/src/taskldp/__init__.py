"""Task-aware local differential privacy for multi-dimensional data.

Calibrated Laplace mechanisms with encoder/decoder co-design: closed-form
linear designs with loss bounds, a gradient-based training algorithm for
nonlinear codecs, and experiment harnesses comparing them against
task-agnostic and privacy-agnostic baselines.
"""

from .data_io import (
    DataMatrix,
    ExperimentConfig,
    NormalizationSpec,
    denormalize,
    load_config,
    load_csv,
    normalize,
    save_csv,
)
from .linear_solver import (
    LinearCodec,
    SolveReport,
    design_loss,
    expected_task_loss,
    kkt_sigmas,
    loss_at_radius,
    loss_given_sigmas,
    monte_carlo_loss,
    optimal_decoder,
    solve_privacy_agnostic,
    solve_task_agnostic,
    solve_task_aware,
    theory_curves,
)
from .mechanism import (
    LaplaceMechanism,
    SensitivityReport,
    calibrate,
    ldp_density_check,
    sample_noise,
    sensitivity_ellipsoid,
    sensitivity_exact,
)
from .neural import Net, backward, forward, make_net, pretrain_task, task_loss
from .trainer import (
    NetCodec,
    TrainTrace,
    evaluate,
    train_privacy_agnostic,
    train_task_agnostic,
    train_task_aware,
)
from .whitening import (
    WhitenedTask,
    WhiteningModel,
    build_task,
    fit_whitening,
    radius_bounds,
    unwhiten,
    whiten,
)

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "ExperimentConfig",
    "LaplaceMechanism",
    "LinearCodec",
    "Net",
    "NetCodec",
    "NormalizationSpec",
    "SensitivityReport",
    "SolveReport",
    "TrainTrace",
    "WhitenedTask",
    "WhiteningModel",
    "backward",
    "build_task",
    "calibrate",
    "denormalize",
    "design_loss",
    "evaluate",
    "expected_task_loss",
    "fit_whitening",
    "forward",
    "kkt_sigmas",
    "ldp_density_check",
    "load_config",
    "load_csv",
    "loss_at_radius",
    "loss_given_sigmas",
    "make_net",
    "monte_carlo_loss",
    "normalize",
    "optimal_decoder",
    "pretrain_task",
    "radius_bounds",
    "sample_noise",
    "save_csv",
    "sensitivity_ellipsoid",
    "sensitivity_exact",
    "solve_privacy_agnostic",
    "solve_task_agnostic",
    "solve_task_aware",
    "task_loss",
    "theory_curves",
    "train_privacy_agnostic",
    "train_task_agnostic",
    "train_task_aware",
    "unwhiten",
    "whiten",
]
