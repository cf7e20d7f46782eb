"""Gradient-based codec training with per-epoch sensitivity recalibration.

The task-aware procedure alternates two phases each epoch: several
parameter updates of encoder and decoder against the task loss (the
encoder gradient carries an extra ``2 * eta * theta`` pull from an L2
penalty that stops the encoder from inflating its output scale to cheat
the fixed noise), then a recomputation of the encoder's exact L1
sensitivity on the current encodings and a fresh draw of one noise vector
per training sample at scale ``delta1 / epsilon``. That second phase is
what keeps the LDP calibration tied to the moving encoder.

Benchmarks: the privacy-agnostic procedure trains the codec noiselessly
first and then refits only the decoder under noise with the encoder
frozen; the task-agnostic procedure pins the encoder to the identity map
on the normalized data and trains only the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_io import DataMatrix, ExperimentConfig
from .errors import BadLatentDim, DimensionMismatch, DivergenceError
from .mechanism import LaplaceMechanism, sample_noise, sensitivity_exact
from .neural import (
    Adam,
    Net,
    backward,
    clone_net,
    forward,
    identity_net,
    make_net,
    net_from_text,
    net_to_text,
    param_norm_sq,
    parameters,
    task_loss,
)

LOSS_ABORT_THRESHOLD = 1e6


@dataclass
class NetCodec:
    """Encoder/decoder pair with a frozen task net and its calibration."""

    encoder: Net
    decoder: Net
    task: Net
    loss: str
    delta1: float
    epsilon: float

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise DimensionMismatch("encoder output and decoder input disagree")
        if self.delta1 < 0:
            raise ValueError("delta1 must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def noise_scale(self) -> float:
        return self.delta1 / self.epsilon

    def clone(self) -> "NetCodec":
        return NetCodec(
            encoder=clone_net(self.encoder),
            decoder=clone_net(self.decoder),
            task=self.task,  # frozen, safe to share
            loss=self.loss,
            delta1=self.delta1,
            epsilon=self.epsilon,
        )

    def to_text(self) -> str:
        parts = [
            "taskldp-net-codec v1",
            f"loss {self.loss}",
            f"delta1 {self.delta1:.17g}",
            f"epsilon {self.epsilon:.17g}",
            "encoder",
            net_to_text(self.encoder).rstrip("\n"),
            "decoder",
            net_to_text(self.decoder).rstrip("\n"),
            "task",
            net_to_text(self.task).rstrip("\n"),
        ]
        return "\n".join(parts) + "\n"

    @staticmethod
    def from_text(text: str) -> "NetCodec":
        lines = text.splitlines()
        if not lines or lines[0] != "taskldp-net-codec v1":
            raise ValueError("not a v1 net codec file")
        loss = lines[1].split(maxsplit=1)[1]
        delta1 = float(lines[2].split()[1])
        epsilon = float(lines[3].split()[1])
        markers = {name: lines.index(name) for name in ("encoder", "decoder", "task")}
        enc = net_from_text("\n".join(lines[markers["encoder"] + 1 : markers["decoder"]]))
        dec = net_from_text("\n".join(lines[markers["decoder"] + 1 : markers["task"]]))
        task = net_from_text("\n".join(lines[markers["task"] + 1 :]))
        return NetCodec(
            encoder=enc, decoder=dec, task=task, loss=loss, delta1=delta1, epsilon=epsilon
        )


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    loss: float
    delta1: float
    sigma_w2: float
    enc_norm2: float


@dataclass
class TrainTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, **kw) -> None:
        self.records.append(TraceRecord(**kw))

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        lines = ["epoch,loss,delta1,sigma_w2,enc_norm2"]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.loss:.17g},{r.delta1:.17g},{r.sigma_w2:.17g},{r.enc_norm2:.17g}"
            )
        return "\n".join(lines) + "\n"


def linear_codec_seed(dim: int, latent: int, task_net: Net, loss: str,
                      epsilon: float, seed: int = 0) -> NetCodec:
    """Fresh single-layer (linear) encoder/decoder pair."""
    return NetCodec(
        encoder=make_net([dim, latent], ["identity"], seed=seed),
        decoder=make_net([latent, dim], ["identity"], seed=seed + 1),
        task=task_net,
        loss=loss,
        delta1=0.0,
        epsilon=epsilon,
    )


def mlp_codec_seed(dim: int, latent: int, hidden: int, task_net: Net, loss: str,
                   epsilon: float, seed: int = 0,
                   hidden_activation: str = "logistic") -> NetCodec:
    """One-hidden-layer encoder/decoder pair with identity heads."""
    return NetCodec(
        encoder=make_net([dim, hidden, latent], [hidden_activation, "identity"], seed=seed),
        decoder=make_net([latent, hidden, dim], [hidden_activation, "identity"], seed=seed + 1),
        task=task_net,
        loss=loss,
        delta1=0.0,
        epsilon=epsilon,
    )


def _codec_loss_and_grads(codec: NetCodec, x: np.ndarray, noise: np.ndarray):
    """Training loss and gradients for both parameter sets.

    Chain: x -> encoder -> +noise -> decoder -> frozen task loss.
    """
    latents, enc_tape = forward(codec.encoder, x)
    x_hat, dec_tape = forward(codec.decoder, latents + noise)
    value, grad_x_hat = task_loss(codec.task, codec.loss, x_hat, x)
    dec_grads, grad_latents = backward(codec.decoder, dec_tape, grad_x_hat)
    enc_grads, _ = backward(codec.encoder, enc_tape, grad_latents)
    return value, enc_grads, dec_grads


def _flatten(grad_pairs):
    return [g for pair in grad_pairs for g in pair]


def _check_finite(value: float, trace: TrainTrace) -> None:
    if not np.isfinite(value) or value > LOSS_ABORT_THRESHOLD:
        raise DivergenceError(f"training loss diverged ({value})", trace=trace)


def _recalibrate(codec: NetCodec, x: np.ndarray, mech: LaplaceMechanism):
    """Recompute the exact sensitivity of the current encoder and redraw
    one noise vector per sample at the matching scale."""
    latents, _ = forward(codec.encoder, x)
    codec.delta1 = sensitivity_exact(latents).delta1
    mech.scale = codec.noise_scale
    return sample_noise(mech, x.shape[0])


def train_task_aware(data: DataMatrix, codec_seed: NetCodec,
                     config: ExperimentConfig):
    """Alternating task-aware training at the codec's privacy budget.

    Per epoch: ``config.inner_steps`` Adam updates of encoder and decoder
    (encoder gradient plus ``2 * eta * theta``), then sensitivity
    recomputation on the post-update encoder and a fresh per-sample noise
    draw. Returns the trained codec and one trace record per epoch.
    """
    x = data.values
    codec = codec_seed.clone()
    trace = TrainTrace()
    if config.epochs == 0:
        return codec, trace

    mech = LaplaceMechanism(scale=0.0, dim=codec.latent_dim, seed=config.seed)
    noise = _recalibrate(codec, x, mech)
    opt = Adam(lr=config.lr)
    params = parameters(codec.encoder) + parameters(codec.decoder)
    for epoch in range(config.epochs):
        value = np.nan
        for _ in range(config.inner_steps):
            value, enc_grads, dec_grads = _codec_loss_and_grads(codec, x, noise)
            _check_finite(value, trace)
            flat_enc = _flatten(enc_grads)
            for grad, param in zip(flat_enc, parameters(codec.encoder)):
                grad += 2.0 * config.eta * param
            opt.step(params, flat_enc + _flatten(dec_grads))
        noise = _recalibrate(codec, x, mech)
        trace.append(
            epoch=epoch,
            loss=float(value),
            delta1=codec.delta1,
            sigma_w2=2.0 * codec.noise_scale**2,
            enc_norm2=param_norm_sq(codec.encoder),
        )
    return codec, trace


def train_privacy_agnostic(data: DataMatrix, codec_seed: NetCodec,
                           config: ExperimentConfig):
    """Two-phase benchmark: noiseless co-training, then decoder-only refit.

    Phase 1 runs ``config.epochs`` epochs of plain (no noise, no penalty)
    updates of both parameter sets and records ``delta1 = sigma_w2 = 0``.
    Phase 2 freezes the encoder, calibrates to its now-fixed sensitivity
    once per epoch, and trains only the decoder on noisy latents.
    """
    x = data.values
    codec = codec_seed.clone()
    trace = TrainTrace()
    if config.epochs == 0:
        return codec, trace

    zero_noise = np.zeros((x.shape[0], codec.latent_dim))
    opt = Adam(lr=config.lr)
    params = parameters(codec.encoder) + parameters(codec.decoder)
    for epoch in range(config.epochs):
        value = np.nan
        for _ in range(config.inner_steps):
            value, enc_grads, dec_grads = _codec_loss_and_grads(codec, x, zero_noise)
            _check_finite(value, trace)
            opt.step(params, _flatten(enc_grads) + _flatten(dec_grads))
        trace.append(
            epoch=epoch,
            loss=float(value),
            delta1=0.0,
            sigma_w2=0.0,
            enc_norm2=param_norm_sq(codec.encoder),
        )

    mech = LaplaceMechanism(scale=0.0, dim=codec.latent_dim, seed=config.seed)
    latents, _ = forward(codec.encoder, x)
    dec_opt = Adam(lr=config.lr)
    dec_params = parameters(codec.decoder)
    for epoch in range(config.epochs, 2 * config.epochs):
        codec.delta1 = sensitivity_exact(latents).delta1
        mech.scale = codec.noise_scale
        noise = sample_noise(mech, x.shape[0])
        value = np.nan
        for _ in range(config.inner_steps):
            noisy = latents + noise
            x_hat, dec_tape = forward(codec.decoder, noisy)
            value, grad_x_hat = task_loss(codec.task, codec.loss, x_hat, x)
            _check_finite(value, trace)
            dec_grads, _ = backward(codec.decoder, dec_tape, grad_x_hat)
            dec_opt.step(dec_params, _flatten(dec_grads))
        trace.append(
            epoch=epoch,
            loss=float(value),
            delta1=codec.delta1,
            sigma_w2=2.0 * codec.noise_scale**2,
            enc_norm2=param_norm_sq(codec.encoder),
        )
    return codec, trace


def train_task_agnostic(data: DataMatrix, decoder_seed: Net, task_net: Net,
                        loss: str, epsilon: float, config: ExperimentConfig):
    """Benchmark with the encoder pinned to the identity map.

    The latent dimension equals the data dimension, the sensitivity comes
    from the raw normalized samples (constant across epochs), and only the
    decoder trains on ``x + w``.
    """
    x = data.values
    dim = x.shape[1]
    if decoder_seed.in_dim != dim or decoder_seed.out_dim != dim:
        raise BadLatentDim("task-agnostic decoder must map dim -> dim")
    codec = NetCodec(
        encoder=identity_net(dim),
        decoder=clone_net(decoder_seed),
        task=task_net,
        loss=loss,
        delta1=sensitivity_exact(x).delta1,
        epsilon=epsilon,
    )
    trace = TrainTrace()
    if config.epochs == 0:
        return codec, trace

    mech = LaplaceMechanism(scale=codec.noise_scale, dim=dim, seed=config.seed)
    opt = Adam(lr=config.lr)
    dec_params = parameters(codec.decoder)
    for epoch in range(config.epochs):
        noise = sample_noise(mech, x.shape[0])
        value = np.nan
        for _ in range(config.inner_steps):
            x_hat, dec_tape = forward(codec.decoder, x + noise)
            value, grad_x_hat = task_loss(codec.task, codec.loss, x_hat, x)
            _check_finite(value, trace)
            dec_grads, _ = backward(codec.decoder, dec_tape, grad_x_hat)
            opt.step(dec_params, _flatten(dec_grads))
        trace.append(
            epoch=epoch,
            loss=float(value),
            delta1=codec.delta1,
            sigma_w2=2.0 * codec.noise_scale**2,
            enc_norm2=param_norm_sq(codec.encoder),
        )
    return codec, trace


def evaluate(codec: NetCodec, data: DataMatrix, noise_draws: int, seed: int = 0):
    """Monte-Carlo task loss of a trained codec under fresh seeded noise.

    Returns ``(mean, std_error)``; the standard error is the sample spread
    of the per-draw dataset means, so a noiseless codec reports exactly 0.
    """
    x = data.values
    latents, _ = forward(codec.encoder, x)
    mech = LaplaceMechanism(scale=codec.noise_scale, dim=codec.latent_dim, seed=seed)
    per_draw = np.empty(noise_draws)
    for d in range(noise_draws):
        noise = sample_noise(mech, x.shape[0])
        x_hat, _ = forward(codec.decoder, latents + noise)
        per_draw[d], _ = task_loss(codec.task, codec.loss, x_hat, x)
    mean = float(per_draw.mean())
    std_error = (
        float(per_draw.std(ddof=1) / np.sqrt(noise_draws)) if noise_draws > 1 else 0.0
    )
    return mean, std_error
