"""Deep Kolmogorov method for heat equations with flat-parameter ReLU networks."""

__version__ = "0.1.0"

from .net_core import Architecture, Network, forward, grad_theta, param_count, layer_offsets, smooth_activation
from .rng import RngKey
from .heat_oracle import ExactSolution, exact_eval, fk_estimate, brownian_increment, mc_rate_check
from .dkm import SpaceTimeBox, TrainingBatch, build_batch, loss_eval, loss_grad, sample_points
from .trainer import TrainConfig, project_box, train, opt_error_proxy
from .constructions import ShallowNet, identity_net, embed_shallow_to_deep, affine_rescale, affine_unrescale
from .apriori_bounds import BoundContext, growth_bound, lipschitz_bound, grad_bound, check_bounds
from .analysis import (
    l2_error,
    relative_l2_error,
    rate_fit,
    generalization_gap,
    sobolev_sup_estimate,
    decomposition_report,
)
