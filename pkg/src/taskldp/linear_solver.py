"""Closed-form task-aware codec design and benchmark losses.

Everything here operates in whitened coordinates ``h`` (identity
covariance) with a whitened task matrix whose Gram spectrum is
``eigenvalues`` / ``eigenvectors``. The design problem: pick a linear
encoder ``E`` (rows = scaled principal directions), a Laplace noise level
calibrated to the encoder's L1 sensitivity, and the matching optimal
decoder, so the expected task loss is minimized at a given privacy budget.

Three designs are provided:

* task-aware: scales each task eigendirection by a water-filling-style
  allocation that trades signal-to-noise against sensitivity;
* task-agnostic: noise added directly to the (normalized) raw data, only
  the decoder is optimized;
* privacy-agnostic: plain top-Z spectral truncation with equal scales,
  noise calibrated after the fact.

Closed-form losses for the latter two serve as benchmark curves. For a
general (non-spherical) sample cloud the task-aware loss is bracketed by
the closed form evaluated at the inscribed and circumscribed radii.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import numerics
from .data_io import DataMatrix
from .errors import (
    AllEigenvaluesZero,
    BadLatentDim,
    DimensionMismatch,
    NonPositiveEpsilon,
    NotPositiveDefinite,
    SingularNoiselessEncoder,
)
from .mechanism import calibrate, sensitivity_exact
from .whitening import WhiteningModel, identity_model, radius_bounds

KKT_TIE_TOL = 1e-12


@dataclass(frozen=True)
class LinearCodec:
    """Deployable linear anonymizer.

    The deployed map on a raw sample is
    ``x_hat = mean + factor @ decoder @ (encoder @ inv(factor) @ (x - mean) + w)``
    with ``w`` drawn i.i.d. Laplace at scale ``delta1 / epsilon``.
    """

    encoder: np.ndarray  # (Z, n), acts on whitened h
    decoder: np.ndarray  # (n, Z)
    noise_variance: float  # per-coordinate variance 2*(delta1/epsilon)^2
    delta1: float
    epsilon: float
    whitening: WhiteningModel

    @property
    def latent_dim(self) -> int:
        return self.encoder.shape[0]

    @property
    def dim(self) -> int:
        return self.encoder.shape[1]

    @property
    def noise_scale(self) -> float:
        return float(np.sqrt(self.noise_variance / 2.0))

    def encode_rows(self, raw_rows: np.ndarray) -> np.ndarray:
        from .whitening import whiten_rows

        return whiten_rows(self.whitening, raw_rows) @ self.encoder.T

    def decode_rows(self, noisy_latents: np.ndarray) -> np.ndarray:
        from .whitening import unwhiten_rows

        noisy_latents = np.atleast_2d(np.asarray(noisy_latents, dtype=float))
        if noisy_latents.shape[1] != self.latent_dim:
            raise DimensionMismatch(
                f"latents have width {noisy_latents.shape[1]}, expected {self.latent_dim}"
            )
        return unwhiten_rows(self.whitening, noisy_latents @ self.decoder.T)

    def anonymize_rows(self, raw_rows: np.ndarray, seed: int = 0) -> np.ndarray:
        """Release x_hat for every row under a fresh seeded noise stream."""
        from .mechanism import LaplaceMechanism, sample_noise

        latents = self.encode_rows(raw_rows)
        mech = LaplaceMechanism(
            scale=self.noise_scale, dim=self.latent_dim, seed=seed
        )
        return self.decode_rows(latents + sample_noise(mech, latents.shape[0]))

    def to_text(self) -> str:
        def matrix_lines(m):
            return [" ".join(f"{x:.17g}" for x in row) for row in np.atleast_2d(m)]

        lines = [
            "taskldp-linear-codec v1",
            f"n {self.dim} z {self.latent_dim}",
            f"sigma_w2 {self.noise_variance:.17g}",
            f"delta1 {self.delta1:.17g}",
            f"epsilon {self.epsilon:.17g}",
            f"jitter {self.whitening.jitter:.17g}",
            "mean",
            " ".join(f"{x:.17g}" for x in self.whitening.mean),
            "factor",
            *matrix_lines(self.whitening.factor),
            "encoder",
            *matrix_lines(self.encoder),
            "decoder",
            *matrix_lines(self.decoder),
        ]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "LinearCodec":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "taskldp-linear-codec v1":
            raise ValueError("not a v1 linear codec file")
        header = lines[1].split()
        n, z = int(header[1]), int(header[3])
        sigma_w2 = float(lines[2].split()[1])
        delta1 = float(lines[3].split()[1])
        epsilon = float(lines[4].split()[1])
        jitter = float(lines[5].split()[1])
        idx = lines.index("mean")
        mean = np.array([float(t) for t in lines[idx + 1].split()])

        def read_block(tag, rows):
            start = lines.index(tag) + 1
            return np.array(
                [[float(t) for t in lines[start + r].split()] for r in range(rows)]
            )

        model = WhiteningModel(mean=mean, factor=read_block("factor", n), jitter=jitter)
        return LinearCodec(
            encoder=read_block("encoder", z),
            decoder=read_block("decoder", n),
            noise_variance=sigma_w2,
            delta1=delta1,
            epsilon=epsilon,
            whitening=model,
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @staticmethod
    def load(path) -> "LinearCodec":
        return LinearCodec.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SolveReport:
    """Spectrum, allocation, and loss bounds for one codec design."""

    eigenvalues: np.ndarray
    effective_dim: int  # number of directions receiving positive scale
    scales_sq: np.ndarray  # per-direction squared encoder scales, length n
    predicted_loss: float
    lower_bound: float
    upper_bound: float
    total_scale: float  # the constraint sum(scales_sq) == total_scale
    boundary_tie: bool = False  # cut-off expression within 1e-12 of zero

    def to_text(self) -> str:
        lines = [
            f"effective_dim = {self.effective_dim}",
            f"predicted_loss = {self.predicted_loss:.17g}",
            f"lower_bound = {self.lower_bound:.17g}",
            f"upper_bound = {self.upper_bound:.17g}",
            f"total_scale = {self.total_scale:.17g}",
            f"boundary_tie = {str(self.boundary_tie).lower()}",
            "eigenvalues = " + ",".join(f"{x:.17g}" for x in self.eigenvalues),
            "scales_sq = " + ",".join(f"{x:.17g}" for x in self.scales_sq),
        ]
        return "\n".join(lines) + "\n"


def optimal_decoder(encoder, noise_variance: float) -> np.ndarray:
    """Loss-minimizing decoder for a given encoder and noise level.

    Returns ``encoder.T @ inv(encoder @ encoder.T + noise_variance * I)``,
    the unique stationary point of the expected task loss in the decoder.
    Note this is not the Moore-Penrose pseudo-inverse unless the noise
    variance is zero.
    """
    enc = numerics.as_matrix(encoder, "encoder")
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    gram = enc @ enc.T + noise_variance * np.eye(enc.shape[0])
    try:
        return numerics.solve_spd(gram, enc).T
    except NotPositiveDefinite:
        if noise_variance == 0.0:
            raise SingularNoiselessEncoder(
                "encoder Gram matrix is singular and no noise regularizes it"
            ) from None
        raise


def expected_task_loss(task_matrix, encoder, decoder, noise_variance: float) -> float:
    """Expected loss of an arbitrary linear codec on unit-covariance data.

    ``||P (D E - I)||_F^2 + noise_variance * ||P D||_F^2`` where ``P`` is
    the whitened task matrix. This is the quantity the optimal decoder
    minimizes, exposed for oracles and Monte-Carlo cross-checks.
    """
    p = numerics.as_matrix(task_matrix, "task_matrix")
    misfit = decoder @ encoder - np.eye(encoder.shape[1])
    return float(np.sum((p @ misfit) ** 2) + noise_variance * np.sum((p @ decoder) ** 2))


def design_loss(task_matrix, encoder, noise_variance: float) -> float:
    """Expected loss after optimal decoding of the given encoder.

    ``Tr(P'P) - Tr(P'P E'(EE' + noise_variance I)^{-1} E)``; equals
    :func:`expected_task_loss` evaluated at :func:`optimal_decoder`.
    """
    p = numerics.as_matrix(task_matrix, "task_matrix")
    enc = numerics.as_matrix(encoder, "encoder")
    gram_p = p.T @ p
    gram = enc @ enc.T + noise_variance * np.eye(enc.shape[0])
    try:
        projected = numerics.solve_spd(gram, enc)  # (EE' + vI)^{-1} E
    except NotPositiveDefinite:
        if noise_variance == 0.0:
            raise SingularNoiselessEncoder(
                "encoder Gram matrix is singular and no noise regularizes it"
            ) from None
        raise
    return float(np.trace(gram_p) - np.trace(gram_p @ enc.T @ projected))


def loss_given_sigmas(eigenvalues, scales_sq, noise_variance: float) -> float:
    """Spectral form of the optimally-decoded loss.

    ``sum_i lam_i * noise_variance / (scale_i^2 + noise_variance)`` with
    two limit conventions: a direction with zero scale transmits nothing
    and contributes ``lam_i`` in full; with positive scale and zero noise
    it is recovered exactly and contributes 0.
    """
    lam = numerics.as_vector(eigenvalues, "eigenvalues")
    sig2 = numerics.as_vector(scales_sq, "scales_sq")
    if lam.shape != sig2.shape:
        raise DimensionMismatch("eigenvalues and scales_sq must match in length")
    if np.any(lam < 0) or np.any(sig2 < 0):
        raise ValueError("entries must be non-negative")
    total = 0.0
    for lam_i, s2 in zip(lam, sig2):
        if s2 == 0.0:
            total += lam_i
        elif noise_variance == 0.0:
            total += 0.0
        else:
            total += lam_i * noise_variance / (s2 + noise_variance)
    return float(total)


def _kkt_cut(sqrt_lam: np.ndarray, budget_ratio: float) -> tuple[int, np.ndarray, bool]:
    """Largest prefix length with a strictly positive allocation.

    ``budget_ratio`` is 8 r^2 / epsilon^2. Returns the prefix length, the
    per-index cut expressions, and whether any expression sits within
    KKT_TIE_TOL of zero (strict-inequality boundary case, surfaced in
    reports).
    """
    n = sqrt_lam.shape[0]
    prefix = np.cumsum(sqrt_lam)
    ks = np.arange(1, n + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        exprs = np.where(
            prefix > 0,
            sqrt_lam / prefix * (1.0 + ks * budget_ratio) - budget_ratio,
            -budget_ratio,
        )
    positive = np.nonzero(exprs > 0)[0]
    if positive.size == 0:
        raise AllEigenvaluesZero("no direction receives positive scale")
    cut = int(positive[-1]) + 1
    # zero eigenvalues fail the strict test by construction; only a
    # positive-eigenvalue expression sitting at zero is a genuine tie
    tie = bool(np.any((np.abs(exprs) < KKT_TIE_TOL) & (sqrt_lam > 0)))
    return cut, exprs, tie


def kkt_sigmas(eigenvalues, radius: float, epsilon: float, total_scale: float = 1.0) -> SolveReport:
    """Optimal per-direction squared scales under a total-scale constraint.

    Given task eigenvalues (sorted non-increasing), sphere radius, privacy
    budget, and the constraint ``sum(scales_sq) == total_scale``, computes
    the allocation

    ``scale_i^2 = M * (sqrt(lam_i)/S * (1 + Z' * q) - q)`` for the first
    ``Z'`` directions and zero beyond, where ``q = 8 r^2 / eps^2``, ``S``
    is the prefix sum of ``sqrt(lam)``, and ``Z'`` is the largest index
    whose expression stays strictly positive. The associated minimal loss
    is ``q / (1 + Z' q) * S^2 + sum of truncated eigenvalues``. The
    matching noise variance is ``8 r^2 M / eps^2`` (same for every
    feasible allocation, because the L1 sensitivity of the scaled sphere
    depends only on the total scale).
    """
    lam = numerics.as_vector(eigenvalues, "eigenvalues")
    if np.any(np.diff(lam) > 1e-12):
        raise ValueError("eigenvalues must be sorted non-increasing")
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be non-negative")
    if lam.size == 0 or lam[0] <= 0:
        raise AllEigenvaluesZero("leading eigenvalue must be positive")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if epsilon <= 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    if total_scale <= 0:
        raise ValueError("total_scale must be positive")

    q = 8.0 * radius**2 / epsilon**2
    sqrt_lam = np.sqrt(lam)
    cut, _, tie = _kkt_cut(sqrt_lam, q)
    prefix = float(np.sum(sqrt_lam[:cut]))
    scales_sq = np.zeros_like(lam)
    scales_sq[:cut] = total_scale * (
        sqrt_lam[:cut] / prefix * (1.0 + cut * q) - q
    )
    loss = q / (1.0 + cut * q) * prefix**2 + float(np.sum(lam[cut:]))
    return SolveReport(
        eigenvalues=lam,
        effective_dim=cut,
        scales_sq=scales_sq,
        predicted_loss=loss,
        lower_bound=loss,
        upper_bound=loss,
        total_scale=total_scale,
        boundary_tie=tie,
    )


def loss_at_radius(eigenvalues, radius: float, epsilon: float) -> float:
    """Task-aware closed-form loss as a function of the sphere radius.

    Handles radius 0 (no spread, loss 0 for positive spectrum directions)
    and an all-zero spectrum (loss 0) so it is usable for bound reporting.
    """
    lam = numerics.as_vector(eigenvalues, "eigenvalues")
    if lam.size == 0 or lam[0] <= 0:
        return 0.0
    if radius == 0.0:
        return 0.0
    return kkt_sigmas(lam, radius, epsilon).predicted_loss


def task_agnostic_sphere_loss(eigenvalues, radius: float, epsilon: float) -> float:
    """Benchmark loss for identity encoding of a whitened sphere.

    ``n q / (1 + n q) * sum(lam)`` with ``q = 8 r^2 / eps^2``.
    """
    lam = numerics.as_vector(eigenvalues, "eigenvalues")
    n = lam.shape[0]
    q = 8.0 * radius**2 / epsilon**2
    return float(n * q / (1.0 + n * q) * np.sum(lam))


def privacy_agnostic_sphere_loss(eigenvalues, radius: float, epsilon: float, latent_dim: int) -> float:
    """Benchmark loss for equal-scale top-Z truncation of a whitened sphere.

    ``Z q / (1 + Z q) * sum of kept lam + sum of dropped lam``.
    """
    lam = numerics.as_vector(eigenvalues, "eigenvalues")
    n = lam.shape[0]
    if not 1 <= latent_dim <= n:
        raise BadLatentDim(f"latent_dim must be in [1, {n}], got {latent_dim}")
    q = 8.0 * radius**2 / epsilon**2
    kept = float(np.sum(lam[:latent_dim]))
    dropped = float(np.sum(lam[latent_dim:]))
    return float(latent_dim * q / (1.0 + latent_dim * q) * kept + dropped)


def _zero_task_codec(dim: int, epsilon: float, model: WhiteningModel):
    encoder = np.zeros((1, dim))
    codec = LinearCodec(
        encoder=encoder,
        decoder=np.zeros((dim, 1)),
        noise_variance=0.0,
        delta1=0.0,
        epsilon=epsilon,
        whitening=model,
    )
    report = SolveReport(
        eigenvalues=np.zeros(dim),
        effective_dim=0,
        scales_sq=np.zeros(dim),
        predicted_loss=0.0,
        lower_bound=0.0,
        upper_bound=0.0,
        total_scale=0.0,
    )
    return codec, report


def solve_task_aware(task, whitened, epsilon: float, model: WhiteningModel | None = None,
                     total_scale: float = 1.0):
    """Design the task-aware codec for an empirical whitened sample cloud.

    Three steps: (1) bound the cloud by inscribed/circumscribed radii;
    (2) design the encoder as if the boundary were the circumscribed
    sphere -- rows are the leading task eigendirections scaled by
    :func:`kkt_sigmas`, directions with zero scale dropped; (3) calibrate
    the noise to the exact sensitivity of the encoder on the actual
    samples (the sphere formula may demand more noise than the data
    requires) and fit the optimal decoder to that noise level.

    Returns the deployable codec and a report whose bounds are the closed
    form at the two radii; the predicted loss is the closed form at the
    operating (circumscribed) radius.
    """
    if epsilon <= 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    h = whitened.values if isinstance(whitened, DataMatrix) else np.atleast_2d(np.asarray(whitened, dtype=float))
    if model is None:
        model = identity_model(task.dim)
    lam = task.eigenvalues
    if lam[0] <= 0:
        return _zero_task_codec(task.dim, epsilon, model)

    r_min, r_max, r_used = radius_bounds(h)
    report = kkt_sigmas(lam, r_used, epsilon, total_scale=total_scale)
    cut = report.effective_dim
    scales = np.sqrt(report.scales_sq[:cut])
    encoder = scales[:, None] * task.eigenvectors[:, :cut].T

    latents = h @ encoder.T
    delta1 = sensitivity_exact(latents).delta1
    mech = calibrate(delta1, epsilon, dim=cut)
    decoder = optimal_decoder(encoder, mech.noise_variance)

    codec = LinearCodec(
        encoder=encoder,
        decoder=decoder,
        noise_variance=mech.noise_variance,
        delta1=delta1,
        epsilon=epsilon,
        whitening=model,
    )
    report = replace(
        report,
        lower_bound=loss_at_radius(lam, r_min, epsilon),
        upper_bound=loss_at_radius(lam, r_used, epsilon),
    )
    return codec, report


def solve_task_agnostic(model: WhiteningModel, task, whitened, epsilon: float):
    """Benchmark: identity encoding of the normalized data, optimal decoder.

    The encoder in whitened coordinates is the whitening factor itself, so
    the released vector is the centered raw sample plus noise. Sensitivity
    comes from the raw (normalized) samples. Returns the codec and its
    closed-form loss.
    """
    if epsilon <= 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    h = whitened.values if isinstance(whitened, DataMatrix) else np.atleast_2d(np.asarray(whitened, dtype=float))
    encoder = model.factor.copy()
    latents = h @ encoder.T  # equals centered raw samples
    delta1 = sensitivity_exact(latents).delta1
    mech = calibrate(delta1, epsilon, dim=encoder.shape[0])
    decoder = optimal_decoder(encoder, mech.noise_variance)
    loss = design_loss(task.task_matrix, encoder, mech.noise_variance)
    codec = LinearCodec(
        encoder=encoder,
        decoder=decoder,
        noise_variance=mech.noise_variance,
        delta1=delta1,
        epsilon=epsilon,
        whitening=model,
    )
    return codec, loss


def solve_privacy_agnostic(task, whitened, epsilon: float, latent_dim: int,
                           model: WhiteningModel | None = None, total_scale: float = 1.0):
    """Benchmark: equal-scale top-Z truncation, noise calibrated afterwards.

    The encoder keeps the leading ``latent_dim`` task eigendirections at
    equal scale (the noise-blind choice); the noise level then follows
    from the actual sample sensitivity and the decoder is fit to it.
    Returns the codec and the spectral closed-form loss at the calibrated
    noise level.
    """
    if epsilon <= 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    h = whitened.values if isinstance(whitened, DataMatrix) else np.atleast_2d(np.asarray(whitened, dtype=float))
    if model is None:
        model = identity_model(task.dim)
    n = task.dim
    if not 1 <= latent_dim <= n:
        raise BadLatentDim(f"latent_dim must be in [1, {n}], got {latent_dim}")
    scale = np.sqrt(total_scale / latent_dim)
    encoder = scale * task.eigenvectors[:, :latent_dim].T
    latents = h @ encoder.T
    delta1 = sensitivity_exact(latents).delta1
    mech = calibrate(delta1, epsilon, dim=latent_dim)
    decoder = optimal_decoder(encoder, mech.noise_variance)
    scales_sq = np.zeros(n)
    scales_sq[:latent_dim] = total_scale / latent_dim
    loss = loss_given_sigmas(task.eigenvalues, scales_sq, mech.noise_variance)
    codec = LinearCodec(
        encoder=encoder,
        decoder=decoder,
        noise_variance=mech.noise_variance,
        delta1=delta1,
        epsilon=epsilon,
        whitening=model,
    )
    return codec, loss


def theory_curves(eigenvalues, radius: float, epsilon_grid, latent_dim_pa: int):
    """Closed-form loss curves for the three designs on a sphere boundary.

    One row per epsilon with keys epsilon, inv_epsilon, loss_task_aware,
    loss_task_agnostic, loss_privacy_agnostic, lower_bound, upper_bound.
    On an exact sphere the bounds coincide with the task-aware loss.
    """
    lam = numerics.as_vector(eigenvalues, "eigenvalues")
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be non-negative")
    if np.any(np.diff(lam) > 1e-12):
        raise ValueError("eigenvalues must be sorted non-increasing")
    grid = [float(e) for e in epsilon_grid]
    if not grid:
        raise ValueError("epsilon grid must be non-empty")
    if any(e <= 0 for e in grid):
        raise NonPositiveEpsilon("every epsilon must be positive")
    if not 1 <= latent_dim_pa <= lam.shape[0]:
        raise BadLatentDim(
            f"latent_dim_pa must be in [1, {lam.shape[0]}], got {latent_dim_pa}"
        )
    rows = []
    for eps in grid:
        aware = loss_at_radius(lam, radius, eps)
        rows.append(
            {
                "epsilon": eps,
                "inv_epsilon": 1.0 / eps,
                "loss_task_aware": aware,
                "loss_task_agnostic": task_agnostic_sphere_loss(lam, radius, eps),
                "loss_privacy_agnostic": privacy_agnostic_sphere_loss(
                    lam, radius, eps, latent_dim_pa
                ),
                "lower_bound": aware,
                "upper_bound": aware,
            }
        )
    return rows


CURVE_COLUMNS = (
    "epsilon",
    "inv_epsilon",
    "loss_task_aware",
    "loss_task_agnostic",
    "loss_privacy_agnostic",
    "lower_bound",
    "upper_bound",
)


def curve_table_csv(rows) -> str:
    """Render theory-curve rows as a CSV document."""
    out = [",".join(CURVE_COLUMNS)]
    for row in rows:
        out.append(",".join(f"{row[c]:.17g}" for c in CURVE_COLUMNS))
    return "\n".join(out) + "\n"


def monte_carlo_loss(codec: LinearCodec, raw_rows, task_matrix, draws: int, seed: int = 0):
    """Monte-Carlo estimate of the deployed task loss.

    Averages ``||K (x_hat - x)||^2`` over all samples and ``draws``
    independent noise draws per sample. Returns ``(mean, std_error)``
    where the standard error is the spread of the per-draw dataset means,
    i.e. it measures only the noise-sampling uncertainty and is zero for a
    noiseless codec.
    """
    from .mechanism import LaplaceMechanism, sample_noise

    x = np.atleast_2d(np.asarray(raw_rows, dtype=float))
    k = numerics.as_matrix(task_matrix, "task_matrix")
    latents = codec.encode_rows(x)
    mech = LaplaceMechanism(scale=codec.noise_scale, dim=codec.latent_dim, seed=seed)
    per_draw = np.empty(draws)
    for d in range(draws):
        noise = sample_noise(mech, latents.shape[0])
        x_hat = codec.decode_rows(latents + noise)
        per_draw[d] = np.mean(np.sum(((x_hat - x) @ k.T) ** 2, axis=1))
    mean = float(per_draw.mean())
    std_error = float(per_draw.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
    return mean, std_error
