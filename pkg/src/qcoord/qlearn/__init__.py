"""Variational quantum circuits and the hybrid Q-TCN-LSTM response surrogate."""
from .baselines import BASELINES, baseline_predict, make_baseline, train_baseline
from .layers import QLstmCellSpec, QLstmRunner, QTcnLayerSpec, qlstm_step, qtcn_forward, sigmoid, to_unit
from .model import FORMAT_VERSION, QTcnLstmModel, Scaling, count_parameters
from .train import TrainingConfig, TrainingError, evaluate_mse, fit_scaling, train
from .vqc import (
    VqcEngine,
    VqcSpec,
    build_vqc,
    encode_angles,
    parameter_shift_grad,
    product_states,
    readout_flips,
    variational_circuit,
    vqc_forward,
)

__all__ = [n for n in dir() if not n.startswith("_")]
