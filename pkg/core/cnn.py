"""Decodificador CNN: janela de 1 s de EEG (2 canais x 64 amostras) -> feature no início da janela."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from core.features import FeatureKind, FeatureSignal
from core.signals import MultiSignal, Signal
from utils.errors import DegenerateBatchError, ParameterError, StateError

logger = logging.getLogger(__name__)

# --- Configurações ---
WINDOW = 64
IN_CHANNELS = 2
WIDTH = 16
POOL = 2
MIN_BATCH = 8
KERNELS = (3, 5)
BLOCK_COUNTS = (1, 2, 3)


@dataclass(frozen=True)
class CnnHyper:
    kernel: int
    blocks: int

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ParameterError(f"Kernel {self.kernel} fora de {KERNELS}.")
        if self.blocks not in BLOCK_COUNTS:
            raise ParameterError(f"Número de blocos {self.blocks} fora de {BLOCK_COUNTS}.")


def hyper_grid() -> list[CnnHyper]:
    return [CnnHyper(k, b) for k in KERNELS for b in BLOCK_COUNTS]


class ConvBlock(nn.Module):
    """conv (same) -> ReLU -> BatchNorm -> média (2); atalho conv 1x1 + média."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, pool: int = POOL):
        super().__init__()
        self.conv = nn.Conv1d(in_ch, out_ch, kernel, padding=kernel // 2)
        self.bn = nn.BatchNorm1d(out_ch)
        self.pool = nn.AvgPool1d(pool)
        self.skip = nn.Conv1d(in_ch, out_ch, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.pool(self.bn(F.relu(self.conv(x))))
        return y + self.pool(self.skip(x))


class CnnModel(nn.Module):
    def __init__(self, hyper: CnnHyper, width: int = WIDTH, seed: int = 0,
                 in_channels: int = IN_CHANNELS, window: int = WINDOW):
        super().__init__()
        self.hyper = hyper
        self.width = width
        self.in_channels = in_channels
        self.window = window
        # inicialização uniforme por fan-in (padrão do torch) com semente fixa
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            blocks, ch = [], in_channels
            for _ in range(hyper.blocks):
                blocks.append(ConvBlock(ch, width, hyper.kernel))
                ch = width
            self.blocks = nn.ModuleList(blocks)
            self.readout = nn.Linear(width * self.readout_length, 1)

    @property
    def readout_length(self) -> int:
        return self.window // POOL ** self.hyper.blocks

    @property
    def mode(self) -> str:
        return "train" if self.training else "eval"

    def forward(self, window: torch.Tensor) -> torch.Tensor:
        single = window.dim() == 2
        x = window.unsqueeze(0) if single else window
        if x.dim() != 3 or tuple(x.shape[1:]) != (self.in_channels, self.window):
            raise ParameterError(
                f"Janela com forma {tuple(window.shape)}; esperado ({self.in_channels}, {self.window}) ou (B, {self.in_channels}, {self.window}).")
        for block in self.blocks:
            x = block(x)
        out = self.readout(x.flatten(1)).squeeze(-1)
        return out[0] if single else out


def loss(predictions: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Menos a correlação de Pearson do lote."""
    if predictions.shape != targets.shape or predictions.dim() != 1:
        raise ParameterError("Predições e alvos devem ser vetores do mesmo tamanho.")
    if predictions.shape[0] < MIN_BATCH:
        raise ParameterError(f"Lote com {predictions.shape[0]} amostras; mínimo {MIN_BATCH}.")
    dt = targets - targets.mean()
    if float(torch.sum(dt * dt)) == 0.0:
        raise DegenerateBatchError("Alvos constantes no lote.")
    dp = predictions - predictions.mean()
    denom = torch.sqrt(torch.sum(dp * dp)) * torch.sqrt(torch.sum(dt * dt)) + 1e-12
    return -torch.sum(dp * dt) / denom


def gradients(model: CnnModel, windows: torch.Tensor, targets: torch.Tensor) -> tuple[float, dict[str, torch.Tensor]]:
    """Gradientes analíticos (retropropagação) da perda do lote por parâmetro."""
    if not model.training:
        raise StateError("Gradientes só podem ser calculados em modo de treino.")
    model.zero_grad(set_to_none=True)
    value = loss(model(windows), targets)
    value.backward()
    grads = {name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
             for name, p in model.named_parameters()}
    return float(value.detach()), grads


class AdamState:
    """Momentos do Adam por parâmetro (delegados ao torch.optim.Adam)."""

    def __init__(self, params: Iterable[torch.Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.betas, self.eps = lr, betas, eps
        self.optimizer = torch.optim.Adam(self.params, lr=lr, betas=betas, eps=eps)

    @property
    def step(self) -> int:
        steps = [int(s["step"]) for s in self.optimizer.state.values() if "step" in s]
        return max(steps, default=0)

    def moments(self, param: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        state = self.optimizer.state.get(param, {})
        if not state:
            return torch.zeros_like(param), torch.zeros_like(param)
        return state["exp_avg"], state["exp_avg_sq"]


def adam_step(state: AdamState, params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor]) -> None:
    """Um passo do Adam com correção de viés; atualiza `params` no lugar."""
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise ParameterError(f"{len(params)} parâmetros para {len(grads)} gradientes.")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ParameterError(f"Gradiente {tuple(g.shape)} incompatível com parâmetro {tuple(p.shape)}.")
        p.grad = g.detach().clone().to(p.dtype)
    state.optimizer.step()


# --- Dados em janelas ---

@dataclass(frozen=True)
class WindowSet:
    """Janelas deslizantes (passo 1) sobre trechos contíguos, sem cruzar fronteiras."""
    eeg: list[torch.Tensor]
    target: list[torch.Tensor]
    index: np.ndarray = field(repr=False)

    @classmethod
    def from_chunks(cls, chunks: Sequence[tuple[np.ndarray, np.ndarray]], dtype=torch.float32) -> "WindowSet":
        eeg, target, index = [], [], []
        for k, (x, y) in enumerate(chunks):
            n = x.shape[1]
            if n < WINDOW:
                continue
            eeg.append(torch.as_tensor(np.ascontiguousarray(x), dtype=dtype))
            target.append(torch.as_tensor(np.ascontiguousarray(y), dtype=dtype))
            starts = np.arange(n - WINDOW + 1)
            index.append(np.column_stack([np.full(starts.size, len(eeg) - 1), starts]))
        index = np.concatenate(index) if index else np.zeros((0, 2), dtype=np.int64)
        return cls(eeg, target, index)

    def __len__(self) -> int:
        return self.index.shape[0]

    def batch(self, rows: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        windows, targets = [], []
        for chunk in np.unique(self.index[rows, 0]):
            starts = torch.as_tensor(self.index[rows][self.index[rows, 0] == chunk, 1])
            view = self.eeg[chunk].unfold(-1, WINDOW, 1)
            windows.append(view[:, starts].permute(1, 0, 2))
            targets.append(self.target[chunk][starts])
        return torch.cat(windows), torch.cat(targets)


@dataclass
class CnnDecoder:
    """Modelo treinado + metadados; reconstrói a feature a partir do EEG."""
    model: CnnModel
    kind: FeatureKind
    channels: tuple[str, ...]
    validation_rho: float = float("nan")
    history: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def hyper(self) -> CnnHyper:
        return self.model.hyper

    def reconstruct(self, eeg: MultiSignal) -> FeatureSignal:
        if eeg.channels != self.channels:
            raise ParameterError(f"Canais do EEG {eeg.channels} diferem do modelo {self.channels}.")
        return FeatureSignal(Signal(predict_series(self.model, eeg.data), eeg.fs), self.kind, standardized=False)


@torch.no_grad()
def predict_series(model: CnnModel, eeg: np.ndarray, batch_size: int = 2048) -> np.ndarray:
    """Uma predição por amostra; o final do sinal é completado com zeros."""
    was_training = model.training
    model.eval()
    dtype = next(model.parameters()).dtype
    n = eeg.shape[1]
    x = torch.as_tensor(np.pad(eeg, ((0, 0), (0, WINDOW - 1))), dtype=dtype)
    windows = x.unfold(-1, WINDOW, 1).permute(1, 0, 2)
    out = torch.cat([model(windows[i:i + batch_size]) for i in range(0, n, batch_size)])
    model.train(was_training)
    return out.double().numpy()


def _validation_rho(model: CnnModel, chunks: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    from core.linear import safe_pearson

    preds, targets = [], []
    for x, y in chunks:
        if x.shape[1] < WINDOW:
            continue
        valid = x.shape[1] - WINDOW + 1
        preds.append(predict_series(model, x)[:valid])
        targets.append(y[:valid])
    if not preds:
        return float("nan")
    return safe_pearson(np.concatenate(preds), np.concatenate(targets))


def train_cnn(train_chunks: Sequence[tuple[np.ndarray, np.ndarray]],
              validation_chunks: Sequence[tuple[np.ndarray, np.ndarray]],
              hyper: CnnHyper, kind: FeatureKind, channels: Sequence[str],
              budget=None, seed: int | np.random.SeedSequence = 0) -> CnnDecoder:
    """Adam em mini-lotes com parada antecipada pela correlação de validação.

    Cada trecho é (EEG canais x T, feature T). Devolve o melhor checkpoint.
    """
    from utils.config import CnnBudget

    budget = budget or CnnBudget()
    windows = WindowSet.from_chunks(train_chunks)
    if len(windows) == 0:
        raise ParameterError("Sem janelas de treino para a CNN.")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_seed, shuffle_seed = ss.spawn(2)
    rng = np.random.default_rng(shuffle_seed)
    model = CnnModel(hyper, width=budget.width, seed=int(init_seed.generate_state(1)[0] % (2 ** 31)))
    state = AdamState(model.parameters(), lr=budget.learning_rate)

    best_rho = _validation_rho(model, validation_chunks)
    best_state = copy.deepcopy(model.state_dict())
    history = [(0, float("nan"), best_rho)]
    stale = 0
    for epoch in range(1, budget.max_epochs + 1):
        model.train()
        order = rng.permutation(len(windows))
        if budget.max_windows is not None:
            order = order[:budget.max_windows]
        losses = []
        for start in range(0, order.size, budget.batch_size):
            rows = order[start:start + budget.batch_size]
            if rows.size < MIN_BATCH:
                continue
            x, y = windows.batch(rows)
            try:
                value, grads = gradients(model, x, y)
            except DegenerateBatchError:
                logger.debug("Lote com alvos constantes ignorado.")
                continue
            names = [n for n, _ in model.named_parameters()]
            adam_step(state, list(model.parameters()), [grads[n] for n in names])
            losses.append(value)
        rho = _validation_rho(model, validation_chunks)
        train_loss = float(np.mean(losses)) if losses else float("nan")
        history.append((epoch, train_loss, rho))
        logger.debug(f"CNN k={hyper.kernel} b={hyper.blocks} época {epoch}: perda={train_loss:.4f} ρ_val={rho:.4f}")
        if rho > best_rho or np.isnan(best_rho):
            best_rho, best_state, stale = rho, copy.deepcopy(model.state_dict()), 0
        else:
            stale += 1
            if stale >= budget.patience:
                break
    model.load_state_dict(best_state)
    model.eval()
    return CnnDecoder(model, kind, tuple(channels), best_rho, history)
