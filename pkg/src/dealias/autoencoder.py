"""Single-layer de-aliasing autoencoder with a robust l1 reconstruction cost.

The robust trainer splits the nonsmooth objective ||X_out - W' phi(W X_in)||_1
with two auxiliary variables (the sparse residual P and the latent code Z),
relaxes the two coupling constraints with quadratic penalties and relaxation
variables B1/B2, and cycles four exact block solves:

    P1  sparse residual   -> soft thresholding at 1/(2 lambda)
    P2  encoder weights   -> ridge least squares against phi^-1(Z - B2)
    P3  decoder weights   -> ridge least squares against X_out - P + B1
    P4  latent code       -> coupled ridge solve of both penalty terms

followed by a relaxation-variable update.  An l2 gradient-descent trainer
with the same architecture serves as the non-robust baseline.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import (
    FormatError,
    NumericFailure,
    SeededRng,
    atomic_write_bytes,
    read_tensor,
    write_tensor,
)

ACTIVATIONS = ("tanh", "sigmoid")


# ---------------------------------------------------------------------------
# activations and shared numeric kernels
# ---------------------------------------------------------------------------


def activate(values, kind: str, direction: str = "forward", clamp_eps: float = 1e-6):
    """Elementwise activation or its inverse.

    The inverse is made total by clamping its argument into the open range
    of the activation (tanh: [-1+eps, 1-eps]; sigmoid: [eps, 1-eps]), so
    out-of-range targets produce large but finite pre-activations.
    """
    arr = np.asarray(values, dtype=np.float64)
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation: {kind!r}")
    if direction == "forward":
        if kind == "tanh":
            return np.tanh(arr)
        return 1.0 / (1.0 + np.exp(-arr))
    if direction == "inverse":
        if kind == "tanh":
            clipped = np.clip(arr, -1.0 + clamp_eps, 1.0 - clamp_eps)
            return np.arctanh(clipped)
        clipped = np.clip(arr, clamp_eps, 1.0 - clamp_eps)
        return np.log(clipped / (1.0 - clipped))
    raise ValueError(f"unknown direction: {direction!r}")


def _activation_derivative(activated, kind):
    # derivative expressed through the activated value
    if kind == "tanh":
        return 1.0 - activated * activated
    return activated * (1.0 - activated)


def soft_threshold(values, tau: float):
    """Proximal map of the l1 norm: sign(v) * max(0, |v| - tau)."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    arr = np.asarray(values, dtype=np.float64)
    return np.sign(arr) * np.maximum(np.abs(arr) - tau, 0.0)


def solve_ridge_least_squares(a, b, ridge_eps: float = 1e-6, side: str = "left"):
    """Ridge-stabilized linear least squares.

    side="left"  solves  min_X ||B - X A||_F^2  via  X = B A^T (A A^T + eps I)^-1
    side="right" solves  min_X ||B - A X||_F^2  via  X = (A^T A + eps I)^-1 A^T B

    The ridge keeps the Gram matrix invertible for rank-deficient systems,
    so the result is always finite.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if side == "left":
        return scipy.linalg.cho_solve(_gram_factor(a, ridge_eps), a @ b.T).T
    if side == "right":
        return scipy.linalg.cho_solve(_gram_factor(a.T, ridge_eps), a.T @ b)
    raise ValueError(f"unknown side: {side!r}")


def _gram_factor(a, ridge_eps):
    """Cholesky factor of the ridge-stabilized Gram matrix a a^T + eps I."""
    gram = a @ a.T
    gram[np.diag_indices_from(gram)] += ridge_eps
    return scipy.linalg.cho_factor(gram)


# ---------------------------------------------------------------------------
# model and training containers
# ---------------------------------------------------------------------------


@dataclass
class AutoencoderModel:
    """Encoder/decoder weight pair.

    ``w_enc`` is hidden x (d+1); its last column multiplies the constant
    bias input appended to every sample.  ``w_dec`` is d x hidden.
    """

    w_enc: np.ndarray
    w_dec: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        self.w_enc = np.asarray(self.w_enc, dtype=np.float64)
        self.w_dec = np.asarray(self.w_dec, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation: {self.activation!r}")
        if self.w_enc.ndim != 2 or self.w_dec.ndim != 2:
            raise ValueError("weights must be matrices")
        if self.w_enc.shape != (self.w_dec.shape[1], self.w_dec.shape[0] + 1):
            raise ValueError(
                f"inconsistent shapes: w_enc {self.w_enc.shape}, "
                f"w_dec {self.w_dec.shape}"
            )
        if not (np.all(np.isfinite(self.w_enc)) and np.all(np.isfinite(self.w_dec))):
            raise ValueError("weights must be finite")

    @property
    def input_dim(self) -> int:
        return self.w_dec.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_dec.shape[1]

    def encode(self, x):
        xb = append_bias(np.asarray(x, dtype=np.float64), self.input_dim)
        return activate(self.w_enc @ xb, self.activation)

    def forward(self, x):
        """Map length-d vectors (or d x N batches) through the autoencoder."""
        single = np.asarray(x).ndim == 1
        out = self.w_dec @ self.encode(x)
        return out[:, 0] if single else out


def append_bias(x, input_dim):
    arr = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if arr.shape[0] == 1 and input_dim != 1:
        arr = arr.T
    if arr.shape[0] != input_dim:
        raise ValueError(f"expected {input_dim} rows, got {arr.shape[0]}")
    return np.vstack([arr, np.ones((1, arr.shape[1]))])


@dataclass
class TrainingSet:
    """Paired patch matrices, one sample per column.

    ``x_in`` is (d+1) x N with a bottom row of ones (the bias input);
    ``x_out`` is d x N of clean targets aligned columnwise with ``x_in``.
    """

    x_in: np.ndarray
    x_out: np.ndarray

    def __post_init__(self):
        self.x_in = np.asarray(self.x_in, dtype=np.float64)
        self.x_out = np.asarray(self.x_out, dtype=np.float64)
        if self.x_in.ndim != 2 or self.x_out.ndim != 2:
            raise ValueError("training matrices must be 2-d")
        if self.x_in.shape[1] != self.x_out.shape[1] or self.x_in.shape[1] < 1:
            raise ValueError("inputs and targets must pair columnwise, N >= 1")
        if self.x_in.shape[0] != self.x_out.shape[0] + 1:
            raise ValueError("x_in must carry exactly one bias row")
        if not np.array_equal(self.x_in[-1], np.ones(self.x_in.shape[1])):
            raise ValueError("bias row must be exactly one")

    @classmethod
    def from_arrays(cls, inputs, targets):
        """Build from d x N inputs (bias row appended here) and targets."""
        inputs = np.asarray(inputs, dtype=np.float64)
        return cls(append_bias(inputs, inputs.shape[0]), targets)

    @property
    def inputs(self):
        """Input matrix without the bias row."""
        return self.x_in[:-1]

    @property
    def count(self) -> int:
        return self.x_in.shape[1]


@dataclass
class SplitBregmanState:
    """Auxiliary and relaxation variables of the robust trainer."""

    p: np.ndarray
    z: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    lam: float
    mu: float
    iteration: int = 0
    objective_history: list = field(default_factory=list)


@dataclass
class TrainConfig:
    hidden: int = 256
    lam: float = 1.0
    mu: float = 1.0
    max_iter: int = 500
    rel_tol: float = 1e-4
    ridge_eps: float = 1e-6
    activation: str = "tanh"
    clamp_eps: float = 1e-6
    bregman_update: str = "reflective"  # or "additive"
    latent_update: str = "coupled"  # or "anchored"
    seed: int = 0
    learning_rate: float = 0.01  # l2 baseline only
    epochs: int = 200  # l2 baseline only

    def __post_init__(self):
        if self.hidden < 1 or self.max_iter < 1:
            raise ValueError("hidden and max_iter must be positive")
        if min(self.lam, self.mu, self.ridge_eps, self.clamp_eps) <= 0:
            raise ValueError("lam, mu, ridge_eps, clamp_eps must be positive")
        if self.bregman_update not in ("reflective", "additive"):
            raise ValueError(f"unknown bregman_update: {self.bregman_update!r}")
        if self.latent_update not in ("coupled", "anchored"):
            raise ValueError(f"unknown latent_update: {self.latent_update!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation: {self.activation!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")


# ---------------------------------------------------------------------------
# robust split trainer
# ---------------------------------------------------------------------------


def penalty_objective(model, tset, state) -> float:
    """Relaxed training objective:

    ||P||_1 + lam ||P - (X_out - W_dec Z) - B1||_F^2
           + mu ||Z - phi(W_enc X_in) - B2||_F^2
    """
    r1 = state.p - (tset.x_out - model.w_dec @ state.z) - state.b1
    r2 = state.z - activate(model.w_enc @ tset.x_in, model.activation) - state.b2
    return (
        float(np.abs(state.p).sum())
        + state.lam * float((r1 * r1).sum())
        + state.mu * float((r2 * r2).sum())
    )


def objective_l1(model, tset) -> float:
    """Entrywise l1 reconstruction cost sum |X_out - W_dec phi(W_enc X_in)|."""
    return float(np.abs(tset.x_out - model.forward(tset.inputs)).sum())


def update_sparse_residual(model, tset, state):
    """P1: exact prox step, threshold 1/(2 lam)."""
    v = (tset.x_out - model.w_dec @ state.z) + state.b1
    state.p = soft_threshold(v, 1.0 / (2.0 * state.lam))


def update_encoder(model, tset, state, config, input_gram=None):
    """P2: fit pre-activations to the inverse-activated latent target.

    ``input_gram`` may carry the Cholesky factor of the (iteration
    invariant) input Gram matrix so the trainer can factor it once.
    """
    target = activate(state.z - state.b2, model.activation, "inverse", config.clamp_eps)
    if input_gram is None:
        input_gram = _gram_factor(tset.x_in, config.ridge_eps)
    model.w_enc = scipy.linalg.cho_solve(input_gram, tset.x_in @ target.T).T


def update_decoder(model, tset, state, config):
    """P3: refit the decoder against the residual-corrected targets."""
    target = tset.x_out - state.p + state.b1
    model.w_dec = solve_ridge_least_squares(
        state.z, target, config.ridge_eps, side="left"
    )


def update_latent(model, tset, state, config):
    """P4: latent code solve.

    The default "coupled" mode minimizes both penalty terms jointly:

        (lam W_dec^T W_dec + (mu + eps) I) Z = lam W_dec^T M + mu N

    with M = X_out - P + B1 and N = phi(W_enc X_in) + B2, which is the
    exact block minimizer of the relaxed objective over Z.  The
    "anchored" mode sets Z = N, the closed form of the second term
    alone; it freezes the latent code to the encoder's output, which is
    markedly more stable when samples are scarce.
    """
    anchor = activate(model.w_enc @ tset.x_in, model.activation) + state.b2
    if config.latent_update == "anchored":
        state.z = anchor
        return
    target = tset.x_out - state.p + state.b1
    gram = state.lam * (model.w_dec.T @ model.w_dec)
    gram[np.diag_indices_from(gram)] += state.mu + config.ridge_eps
    rhs = state.lam * (model.w_dec.T @ target) + state.mu * anchor
    state.z = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs)


def update_relaxation(model, tset, state, config):
    """Relaxation-variable update closing one cycle.

    "additive" is the conventional running-sum update
    B <- B + (constraint residual); "reflective" replaces B with the
    residual minus the previous B, flipping its sign each cycle.
    """
    r1 = state.p - (tset.x_out - model.w_dec @ state.z)
    r2 = state.z - activate(model.w_enc @ tset.x_in, model.activation)
    if config.bregman_update == "reflective":
        state.b1 = r1 - state.b1
        state.b2 = r2 - state.b2
    else:
        state.b1 = state.b1 - r1
        state.b2 = state.b2 - r2


def split_bregman_step(model, tset, state, config, input_gram=None):
    """One full training cycle: P1 -> P2 -> P3 -> P4, then relaxation update.

    The relaxed objective is evaluated after P4 against the relaxation
    variables the cycle was solved with, and appended to
    ``state.objective_history`` before those variables are updated.
    Returns the mutated (model, state) pair.
    """
    update_sparse_residual(model, tset, state)
    update_encoder(model, tset, state, config, input_gram)
    update_decoder(model, tset, state, config)
    update_latent(model, tset, state, config)
    objective = penalty_objective(model, tset, state)
    if not (
        np.isfinite(objective)
        and np.all(np.isfinite(model.w_enc))
        and np.all(np.isfinite(model.w_dec))
    ):
        raise NumericFailure(f"non-finite update at iteration {state.iteration}")
    update_relaxation(model, tset, state, config)
    state.iteration += 1
    state.objective_history.append(objective)
    return model, state


def _initial_weights(d, config):
    rng = SeededRng(config.seed)
    w_enc = rng.normal((config.hidden, d + 1)) / np.sqrt(d + 1)
    w_dec = rng.normal((d, config.hidden)) / np.sqrt(config.hidden)
    return AutoencoderModel(w_enc, w_dec, config.activation)


def _window_converged(history, rel_tol, window=5):
    if len(history) < window:
        return False
    recent = history[-window:]
    for prev, cur in zip(recent, recent[1:]):
        denom = max(abs(prev), 1e-300)
        if abs(cur - prev) / denom >= rel_tol:
            return False
    return True


def train_robust(tset: TrainingSet, config: TrainConfig):
    """Train the l1-cost autoencoder.

    Initializes weights from seeded Gaussians scaled by 1/sqrt(fan-in),
    the latent code from the encoder pass and the sparse residual from
    the decoder pass, then iterates :func:`split_bregman_step` until the
    relative objective change stays below ``rel_tol`` across a window of
    five objective values or ``max_iter`` cycles are done.  Returns the
    trained model together with the final solver state.
    """
    if tset.count < 1:
        raise ValueError("training set is empty")
    d = tset.x_out.shape[0]
    model = _initial_weights(d, config)
    z = activate(model.w_enc @ tset.x_in, config.activation)
    state = SplitBregmanState(
        p=tset.x_out - model.w_dec @ z,
        z=z,
        b1=np.zeros_like(tset.x_out),
        b2=np.zeros_like(z),
        lam=config.lam,
        mu=config.mu,
    )
    input_gram = _gram_factor(tset.x_in, config.ridge_eps)
    for _ in range(config.max_iter):
        split_bregman_step(model, tset, state, config, input_gram)
        if _window_converged(state.objective_history, config.rel_tol):
            break
    return model, state


# ---------------------------------------------------------------------------
# l2 gradient-descent baseline
# ---------------------------------------------------------------------------


def l2_loss_and_grads(model, tset):
    """Squared-error loss and its exact weight gradients."""
    h = model.w_enc @ tset.x_in
    z = activate(h, model.activation)
    residual = model.w_dec @ z - tset.x_out
    loss = float((residual * residual).sum())
    g_dec = 2.0 * residual @ z.T
    g_hidden = (model.w_dec.T @ (2.0 * residual)) * _activation_derivative(
        z, model.activation
    )
    g_enc = g_hidden @ tset.x_in.T
    return loss, g_enc, g_dec


def train_l2_baseline(tset: TrainingSet, config: TrainConfig) -> AutoencoderModel:
    """Full-batch gradient descent on the Euclidean reconstruction cost.

    Uses the same seeded initialization as the robust trainer.  Raises
    :class:`NumericFailure` if the loss exceeds 1e6 times its initial
    value (divergence guard).
    """
    if tset.count < 1:
        raise ValueError("training set is empty")
    model = _initial_weights(tset.x_out.shape[0], config)
    initial = None
    for epoch in range(config.epochs):
        loss, g_enc, g_dec = l2_loss_and_grads(model, tset)
        if initial is None:
            initial = loss
        if not np.isfinite(loss) or loss > 1e6 * max(initial, 1e-300):
            raise NumericFailure(f"l2 training diverged at epoch {epoch}")
        model.w_enc = model.w_enc - config.learning_rate * g_enc
        model.w_dec = model.w_dec - config.learning_rate * g_dec
    return model


def train_l2_timed(tset: TrainingSet, config: TrainConfig, budget_seconds: float):
    """Gradient descent in epoch blocks until a wall-clock budget is spent."""
    model = _initial_weights(tset.x_out.shape[0], config)
    initial = None
    start = time.perf_counter()
    epochs = 0
    while time.perf_counter() - start < budget_seconds:
        for _ in range(25):
            loss, g_enc, g_dec = l2_loss_and_grads(model, tset)
            if initial is None:
                initial = loss
            if not np.isfinite(loss) or loss > 1e6 * max(initial, 1e-300):
                raise NumericFailure(f"l2 training diverged at epoch {epochs}")
            model.w_enc = model.w_enc - config.learning_rate * g_enc
            model.w_dec = model.w_dec - config.learning_rate * g_dec
            epochs += 1
    return model, epochs


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------

_FORMAT_VERSION = "1"


def save_model(model: AutoencoderModel, path) -> None:
    """Persist a model bundle: manifest.txt + w_enc.rdt + w_dec.rdt."""
    os.makedirs(path, exist_ok=True)
    manifest = (
        f"activation={model.activation}\n"
        f"d={model.input_dim}\n"
        f"hidden={model.hidden}\n"
        f"format_version={_FORMAT_VERSION}\n"
    )
    atomic_write_bytes(os.path.join(path, "manifest.txt"), manifest.encode("ascii"))
    write_tensor(os.path.join(path, "w_enc.rdt"), model.w_enc)
    write_tensor(os.path.join(path, "w_dec.rdt"), model.w_dec)


def load_model(path) -> AutoencoderModel:
    """Load a model bundle; the manifest is authoritative for metadata."""
    manifest_path = os.path.join(path, "manifest.txt")
    try:
        with open(manifest_path, "r", encoding="ascii") as fh:
            pairs = dict(
                line.strip().split("=", 1) for line in fh if line.strip()
            )
    except (OSError, ValueError) as exc:
        raise FormatError(f"unreadable manifest {manifest_path}: {exc}") from exc
    required = {"activation", "d", "hidden", "format_version"}
    if set(pairs) != required:
        raise FormatError(f"manifest keys {sorted(pairs)} != {sorted(required)}")
    try:
        w_enc = read_tensor(os.path.join(path, "w_enc.rdt"))
        w_dec = read_tensor(os.path.join(path, "w_dec.rdt"))
    except OSError as exc:
        raise FormatError(f"missing model tensor in {path}: {exc}") from exc
    d, hidden = int(pairs["d"]), int(pairs["hidden"])
    if w_enc.shape != (hidden, d + 1) or w_dec.shape != (d, hidden):
        raise FormatError(
            f"tensor shapes {w_enc.shape}/{w_dec.shape} disagree with manifest "
            f"(d={d}, hidden={hidden})"
        )
    return AutoencoderModel(w_enc, w_dec, pairs["activation"])
