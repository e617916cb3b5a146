"""Recurrent autoencoder baselines: plain AE and variational AE.

A single-layer recurrent encoder folds the input sequence into a latent
code; a single-layer recurrent decoder unrolls it back. The VAE encodes a
(mu, sigma) pair, samples z = mu + sigma*eps once per evaluation, and adds
the closed-form KL against a standard normal prior. A unit-variance
Gaussian likelihood makes the reconstruction term half the mean squared
error. Swapping the cell kind turns RNN-AE/VAE into LSTM-AE/VAE.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .checkpoint import ModelCheckpoint
from .errors import (
    EmptyDatasetError,
    InvariantViolationError,
    NonFiniteLossError,
    ShapeMismatchError,
)
from .gan import TrainConfig

BASELINE_KINDS = ("rnn-ae", "rnn-vae", "lstm-ae", "lstm-vae")


@dataclass(frozen=True)
class AeConfig:
    hidden: int = 64
    latent: int = 16
    seq_len: int = 64
    cell: str = "rnn"

    def __post_init__(self):
        if min(self.hidden, self.latent, self.seq_len) < 1:
            raise InvariantViolationError("hidden, latent, seq_len must be positive")
        if self.cell not in ("rnn", "lstm"):
            raise InvariantViolationError(f"cell must be rnn or lstm, got {self.cell!r}")


@dataclass(frozen=True)
class ElboTerms:
    """reconstruction log-likelihood (up to its constant), KL term, and their
    difference; total = reconstruction - kl and kl is never negative."""

    reconstruction: float
    kl: float
    total: float

    def __post_init__(self):
        if self.kl < -1e-12:
            raise InvariantViolationError(f"negative KL {self.kl}")
        if abs(self.total - (self.reconstruction - self.kl)) > 1e-9:
            raise InvariantViolationError("total != reconstruction - kl")


class _TanhCell:
    """Minimal recurrent cell: h = tanh(x W_x + h W_h + b)."""

    def __init__(self, pset: nn.ParamSet, name: str, n_in: int, hidden: int,
                 rng: np.random.Generator):
        self.hidden = hidden
        self.w_x = pset.add(f"{name}.w_x", nn.xavier_uniform(rng, (n_in, hidden)))
        self.w_h = pset.add(f"{name}.w_h", nn.xavier_uniform(rng, (hidden, hidden)))
        self.b = pset.add(f"{name}.b", np.zeros(hidden))

    def step(self, x_t: Tensor, state):
        (h_prev,) = state
        h = ad.tanh(ad.add(ad.add(ad.matmul(x_t, self.w_x), ad.matmul(h_prev, self.w_h)), self.b))
        return h, (h,)

    def zero_state(self, batch: int):
        return (Tensor(np.zeros((batch, self.hidden))),)


class _LstmCellAdapter:
    def __init__(self, pset: nn.ParamSet, name: str, n_in: int, hidden: int,
                 rng: np.random.Generator):
        self.cell = nn.LSTMCell(pset, name, n_in, hidden, rng)

    def step(self, x_t: Tensor, state):
        h, c = self.cell.step(x_t, state)
        return h, (h, c)

    def zero_state(self, batch: int):
        return self.cell.zero_state(batch)


def _make_cell(pset, name, n_in, hidden, cell_kind, rng):
    if cell_kind == "lstm":
        return _LstmCellAdapter(pset, name, n_in, hidden, rng)
    return _TanhCell(pset, name, n_in, hidden, rng)


class RecurrentAutoencoder:
    """Encoder RNN -> latent code -> decoder RNN emitting one value per step.

    The decoder's input at step t is the previous target value under teacher
    forcing, or its own previous output when free-running; step 0 feeds 0.
    """

    def __init__(self, config: AeConfig, rng: np.random.Generator,
                 variational: bool = False, prefix: str = "ae", zero_init: bool = False):
        self.config = config
        self.variational = variational
        self.params = nn.ParamSet(seed=0)
        self.encoder = _make_cell(self.params, f"{prefix}.enc", 1, config.hidden, config.cell, rng)
        if variational:
            self.to_mu = nn.Dense(self.params, f"{prefix}.mu", config.hidden, config.latent, rng)
            self.to_logvar = nn.Dense(self.params, f"{prefix}.logvar", config.hidden,
                                      config.latent, rng)
        else:
            self.to_latent = nn.Dense(self.params, f"{prefix}.latent", config.hidden,
                                      config.latent, rng)
        self.from_latent = nn.Dense(self.params, f"{prefix}.dec0", config.latent,
                                    config.hidden, rng)
        self.decoder = _make_cell(self.params, f"{prefix}.dec", 1, config.hidden, config.cell, rng)
        self.emit = nn.Dense(self.params, f"{prefix}.emit", config.hidden, 1, rng)
        if zero_init:
            for _, tensor in self.params.items():
                tensor.data = np.zeros_like(tensor.data)

    def _check_input(self, x: Tensor) -> tuple[int, int]:
        if x.data.ndim != 2 or x.shape[1] != self.config.seq_len:
            raise ShapeMismatchError(
                f"expected (batch, {self.config.seq_len}), got {x.shape}")
        return x.shape[0], x.shape[1]

    def encode(self, x: Tensor) -> Tensor:
        batch, steps = self._check_input(x)
        state = self.encoder.zero_state(batch)
        for t in range(steps):
            step_in = ad.reshape(ad.select(x, 1, t), (batch, 1))
            h, state = self.encoder.step(step_in, state)
        return h

    def decode(self, latent: Tensor, steps: int, teacher: Tensor | None = None) -> Tensor:
        """Unroll the decoder; ``teacher`` supplies step inputs when given."""
        batch = latent.shape[0]
        h0 = ad.tanh(self.from_latent(latent))
        state = self.decoder.zero_state(batch)
        state = (h0,) + state[1:]
        prev = Tensor(np.zeros((batch, 1)))
        outputs = []
        for t in range(steps):
            if teacher is not None and t > 0:
                prev = ad.reshape(ad.select(teacher, 1, t - 1), (batch, 1))
            h, state = self.decoder.step(prev, state)
            y_t = self.emit(h)
            outputs.append(y_t)
            if teacher is None:
                prev = y_t
        return ad.reshape(ad.concat(outputs, axis=1), (batch, steps))

    def forward(self, x: Tensor, teacher_forcing: bool = True) -> Tensor:
        if self.variational:
            raise InvariantViolationError("variational model: use forward_vae")
        latent = self.to_latent(self.encode(x))
        return self.decode(latent, self.config.seq_len, teacher=x if teacher_forcing else None)

    def forward_vae(self, x: Tensor, rng: np.random.Generator,
                    teacher_forcing: bool = True) -> tuple[Tensor, Tensor, Tensor]:
        """Returns (reconstruction, mu, sigma) with one sampled z."""
        if not self.variational:
            raise InvariantViolationError("non-variational model: use forward")
        h = self.encode(x)
        mu = self.to_mu(h)
        sigma = ad.exp(ad.mul(self.to_logvar(h), 0.5))
        z = reparameterize(mu, sigma, rng)
        y = self.decode(z, self.config.seq_len, teacher=x if teacher_forcing else None)
        return y, mu, sigma


def rnn_ae_loss(y: Tensor, x: Tensor) -> Tensor:
    """Half mean squared error: the unit-variance Gaussian negative
    log-likelihood with its constant dropped."""
    return nn.mse_half(y, x)


def reparameterize(mu: Tensor, sigma: Tensor, rng: np.random.Generator) -> Tensor:
    """z = mu + sigma * eps with eps ~ N(0, 1); gradients flow through both."""
    mu = ad.as_tensor(mu)
    sigma = ad.as_tensor(sigma)
    if mu.shape != sigma.shape:
        raise ShapeMismatchError(f"mu {mu.shape} vs sigma {sigma.shape}")
    eps = Tensor(rng.standard_normal(mu.shape))
    return ad.add(mu, ad.mul(sigma, eps))


def kl_standard_normal(mu: Tensor, sigma: Tensor) -> Tensor:
    """Closed-form KL(N(mu, sigma^2) || N(0, 1)): (1/2) sum(mu^2 + s^2 - log s^2 - 1),
    summed over latent dims and averaged over the batch."""
    mu = ad.as_tensor(mu)
    sigma = ad.as_tensor(sigma)
    if mu.shape != sigma.shape:
        raise ShapeMismatchError(f"mu {mu.shape} vs sigma {sigma.shape}")
    s2 = ad.mul(sigma, sigma)
    per_entry = ad.sub(ad.sub(ad.add(ad.mul(mu, mu), s2), ad.log(s2)), 1.0)
    if mu.data.ndim == 2:
        per_row = ad.tensor_sum(per_entry, axis=1)
        return ad.mul(ad.mean(per_row), 0.5)
    return ad.mul(ad.tensor_sum(per_entry), 0.5)


def rnn_vae_loss(model: RecurrentAutoencoder, x: Tensor, rng: np.random.Generator,
                 teacher_forcing: bool = True) -> tuple[Tensor, ElboTerms]:
    """Single-sample negative ELBO as the training objective, plus its parts."""
    y, mu, sigma = model.forward_vae(x, rng, teacher_forcing=teacher_forcing)
    recon_nll = rnn_ae_loss(y, x)
    kl = kl_standard_normal(mu, sigma)
    loss = ad.add(recon_nll, kl)
    terms = ElboTerms(reconstruction=-recon_nll.item(), kl=kl.item(), total=-loss.item())
    return loss, terms


def train_baseline(kind: str, data: np.ndarray, config: AeConfig,
                   train_config: TrainConfig, zero_init: bool = False,
                   teacher_forcing: bool = True) -> tuple[ModelCheckpoint, dict[str, np.ndarray]]:
    """Seeded gradient training of one baseline; history has one loss per iteration."""
    if kind not in BASELINE_KINDS:
        raise InvariantViolationError(f"unknown baseline {kind!r}; pick from {BASELINE_KINDS}")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyDatasetError(f"need a nonempty (N, T) dataset, got {data.shape}")
    if data.shape[1] != config.seq_len:
        raise ShapeMismatchError(f"data length {data.shape[1]} vs config {config.seq_len}")
    cell = "lstm" if kind.startswith("lstm") else "rnn"
    if config.cell != cell:
        config = AeConfig(hidden=config.hidden, latent=config.latent,
                          seq_len=config.seq_len, cell=cell)
    variational = kind.endswith("vae")

    streams = np.random.SeedSequence(train_config.seed).spawn(3)
    init_rng = np.random.default_rng(streams[0])
    batch_rng = np.random.default_rng(streams[1])
    sample_rng = np.random.default_rng(streams[2])

    model = RecurrentAutoencoder(config, init_rng, variational=variational, zero_init=zero_init)
    model.params.seed = train_config.seed
    opt = nn.Adam(model.params, lr=train_config.lr)

    n = data.shape[0]
    batch = min(train_config.batch_size, n)
    history = np.empty(train_config.epochs)
    for it in range(train_config.epochs):
        x = Tensor(data[batch_rng.choice(n, size=batch, replace=False)])
        if variational:
            loss, _ = rnn_vae_loss(model, x, sample_rng, teacher_forcing=teacher_forcing)
        else:
            loss = rnn_ae_loss(model.forward(x, teacher_forcing=teacher_forcing), x)
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteLossError(it)
        history[it] = value
        model.params.zero_grad()
        ad.backward(loss)
        opt.step()

    ckpt = ModelCheckpoint(
        model=kind,
        config={"ae": asdict(config), "train": asdict(train_config),
                "teacher_forcing": bool(teacher_forcing)},
        seed=train_config.seed, iterations=train_config.epochs, arrays=model.params.arrays())
    return ckpt, {"loss": history}


def baseline_from_checkpoint(ckpt: ModelCheckpoint) -> RecurrentAutoencoder:
    if ckpt.model not in BASELINE_KINDS:
        raise InvariantViolationError(f"checkpoint holds {ckpt.model!r}, not a baseline")
    config = AeConfig(**ckpt.config["ae"])
    model = RecurrentAutoencoder(config, np.random.default_rng(0),
                                 variational=ckpt.model.endswith("vae"))
    model.params.load_arrays(ckpt.arrays)
    return model
