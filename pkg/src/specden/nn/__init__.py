from .mlp import Architecture, NetworkBank, mlp_eval
from .model import (
    SpectralNNEstimator,
    SpectralNNModel,
    fitted_autocov_eval,
    fitted_spectral_eval,
    load_model,
    magnitude_curve,
    model_field_values,
    save_model,
    spectral_eigendecomposition,
)
from .loss import clear_cache, loss, loss_and_grad
from .train import Hyper, TrainConfig, TrainResult, train
