"""Classical reference surrogates (MLP, TCN, LSTM, TCN-LSTM) in torch."""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..coordination.data import ResponseDataset
from .model import Scaling
from .train import TrainingConfig, fit_scaling

BASELINES = ("mlp", "tcn", "lstm", "tcn_lstm")


class CausalConv(nn.Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, dilation: int = 1):
        super().__init__()
        self.pad = (kernel - 1) * dilation
        self.conv = nn.Conv1d(c_in, c_out, kernel, dilation=dilation)

    def forward(self, x):
        return self.conv(nn.functional.pad(x, (self.pad, 0)))


class Mlp(nn.Module):
    def __init__(self, horizon: int, hidden: int = 128):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(horizon, hidden), nn.ReLU(), nn.Linear(hidden, horizon))

    def forward(self, x):
        return self.net(x)


class Tcn(nn.Module):
    def __init__(self, channels: int = 32, kernel: int = 4):
        super().__init__()
        self.body = nn.Sequential(CausalConv(1, channels, kernel), nn.ReLU(),
                                  CausalConv(channels, channels, kernel, 2), nn.ReLU())
        self.head = nn.Conv1d(channels, 1, 1)

    def forward(self, x):
        return self.head(self.body(x[:, None, :]))[:, 0]


class Lstm(nn.Module):
    def __init__(self, hidden: int = 64):
        super().__init__()
        self.rnn = nn.LSTM(1, hidden, batch_first=True)
        self.head = nn.Linear(hidden, 1)

    def forward(self, x):
        h, _ = self.rnn(x[:, :, None])
        return self.head(h)[..., 0]


class TcnLstm(nn.Module):
    """Two causal conv layers (1 -> 32 -> 32 channels, kernel 4) feeding an LSTM."""

    def __init__(self, channels: int = 32, kernel: int = 4, hidden: int = 76):
        super().__init__()
        self.conv = nn.Sequential(CausalConv(1, channels, kernel), nn.ReLU(),
                                  CausalConv(channels, channels, kernel), nn.ReLU())
        self.rnn = nn.LSTM(channels, hidden, batch_first=True)
        self.head = nn.Linear(hidden, 1)

    def forward(self, x):
        f = self.conv(x[:, None, :]).transpose(1, 2)
        h, _ = self.rnn(f)
        return self.head(h)[..., 0]


def make_baseline(kind: str, horizon: int = 96) -> nn.Module:
    if kind == "mlp":
        return Mlp(horizon)
    if kind == "tcn":
        return Tcn()
    if kind == "lstm":
        return Lstm()
    if kind == "tcn_lstm":
        return TcnLstm()
    raise ValueError(f"unknown baseline {kind!r}; choose from {BASELINES}")


def train_baseline(kind: str, data: ResponseDataset, config: TrainingConfig = TrainingConfig(),
                   test: ResponseDataset | None = None, scaling: Scaling | None = None):
    """Same normalization, loss and optimizer settings as the quantum model.

    Returns ``(module, scaling, trace)`` with trace rows ``(epoch, train_loss, test_mse)``.
    """
    torch.manual_seed(config.seed)
    scaling = scaling or fit_scaling(data)
    net = make_baseline(kind, data.horizon).double()
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate, betas=config.betas, eps=config.eps)
    x = torch.from_numpy(scaling.price(data.prices))
    z = torch.from_numpy(scaling.response(data.responses))
    rng = np.random.default_rng(config.seed)
    trace = []
    for epoch in range(1, config.epochs + 1):
        order = torch.from_numpy(rng.permutation(len(x)))
        total = 0.0
        for s in range(0, len(x), config.batch_size):
            idx = order[s:s + config.batch_size]
            opt.zero_grad()
            loss = torch.mean((net(x[idx]) - z[idx]) ** 2)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        test_mse = float("nan")
        if test is not None:
            with torch.no_grad():
                pred = net(torch.from_numpy(scaling.price(test.prices))).numpy()
            test_mse = float(np.mean((pred - scaling.response(test.responses)) ** 2))
        trace.append((epoch, total / len(x), test_mse))
    return net, scaling, np.array(trace)


def baseline_predict(net: nn.Module, scaling: Scaling, prices) -> np.ndarray:
    with torch.no_grad():
        p = torch.from_numpy(np.atleast_2d(scaling.price(prices)))
        return scaling.unresponse(net(p).numpy())
