"""Hardware-aware training.

Teacher-student scheme for the binarized MLPs that run on the crossbars:
real-valued teacher parameters are updated by gradients passed straight
through the binarization (clipped pass-through), the forward pass always
uses the +/-1 student together with sigmoid(-x) activations, and the
teacher is clipped into [-1, 1] after every step. Biases are binarized
like weights.

The CNN path is two-step: step-1 trains a vanilla full-precision network
(ReLU convolutions, ReLU FC head); step-2 freezes the convolution stack,
pushes the training set through it, applies the sign unit to the flatten
output, and retrains the FC layers with the teacher-student scheme on
those trits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .layers import (
    Adam,
    Conv2D,
    Dense,
    Flatten,
    MaxPool2D,
    ReLU,
    Sequential,
    TrainingError,
    softmax_cross_entropy,
)
from .network import TrainedParameters


@dataclass
class TeacherLayer:
    """Real-valued shadow of one binarized layer; entries stay in [-1, 1]."""

    w: np.ndarray
    b: np.ndarray


def binarize(teacher: TeacherLayer) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic sign binarization: +1 iff the teacher entry is >= 0."""
    w = np.where(teacher.w >= 0, 1, -1).astype(np.int8)
    b = np.where(teacher.b >= 0, 1, -1).astype(np.int8)
    return w, b


def sign_unit(x) -> np.ndarray:
    """Elementwise trit conversion to {-1, 0, +1}."""
    return np.sign(x).astype(np.int8)


def student_parameters(teachers: list[TeacherLayer]) -> TrainedParameters:
    pairs = [binarize(t) for t in teachers]
    return TrainedParameters(weights=[w for w, _ in pairs], biases=[b for _, b in pairs])


def student_forward(teachers: list[TeacherLayer], x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer under the binarized student; x is (N, n0)."""
    activations = [x]
    for teacher in teachers:
        w, b = binarize(teacher)
        y = activations[-1] @ w.T.astype(float) + b.astype(float)
        activations.append(expit(-y))
    return activations


@dataclass
class MlpHyperparams:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 5
    max_steps: int | None = None
    init_scale: float = 0.1
    target_accuracy: float | None = None   # stop early once train accuracy reaches this


@dataclass
class MlpResult:
    params: TrainedParameters
    teachers: list[TeacherLayer]
    history: list[dict] = field(default_factory=list)
    train_accuracy: float = float("nan")
    test_accuracy: float = float("nan")


def _predict(outputs: np.ndarray) -> np.ndarray:
    if outputs.shape[1] == 1:
        return (outputs[:, 0] >= 0.5).astype(int)
    return outputs.argmax(axis=1)


def evaluate_student(teachers, xs, labels, batch_size=1024) -> float:
    hits = 0
    for start in range(0, len(xs), batch_size):
        out = student_forward(teachers, xs[start:start + batch_size])[-1]
        hits += int((_predict(out) == labels[start:start + batch_size]).sum())
    return hits / len(xs)


def _output_loss_grad(outputs: np.ndarray, labels: np.ndarray):
    """Loss on the neuron outputs themselves; softmax CE for multi-class,
    binary CE for a 1-wide head. Returns (loss, dL/d_outputs)."""
    n = outputs.shape[0]
    if outputs.shape[1] == 1:
        o = np.clip(outputs[:, 0], 1e-12, 1 - 1e-12)
        t = labels.astype(float)
        loss = -np.mean(t * np.log(o) + (1 - t) * np.log(1 - o))
        grad = ((o - t) / (o * (1 - o)))[:, None] / n
        return loss, grad
    return softmax_cross_entropy(outputs, labels)


def train_mlp(
    train_x: np.ndarray,
    train_labels: np.ndarray,
    dims: list[int],
    hp: MlpHyperparams,
    rng: np.random.Generator,
    test_x: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
) -> MlpResult:
    """Teacher-student training of a binarized MLP with sigmoid(-x) units.

    Raises TrainingError (with the step index) if the loss goes non-finite.
    """
    if train_x.shape[1] != dims[0]:
        raise ValueError(f"input width {train_x.shape[1]} != first dim {dims[0]}")
    teachers = [
        TeacherLayer(
            w=rng.uniform(-hp.init_scale, hp.init_scale, size=(dims[i + 1], dims[i])),
            b=rng.uniform(-hp.init_scale, hp.init_scale, size=dims[i + 1]),
        )
        for i in range(len(dims) - 1)
    ]
    grads = [TeacherLayer(np.zeros_like(t.w), np.zeros_like(t.b)) for t in teachers]
    opt = Adam(
        [(t.w, g.w) for t, g in zip(teachers, grads)]
        + [(t.b, g.b) for t, g in zip(teachers, grads)],
        lr=hp.learning_rate,
    )

    result = MlpResult(params=student_parameters(teachers), teachers=teachers)
    n = len(train_x)
    step = 0
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, hp.batch_size):
            if hp.max_steps is not None and step >= hp.max_steps:
                break
            idx = order[start:start + hp.batch_size]
            x, labels = train_x[idx], train_labels[idx]

            acts = student_forward(teachers, x)
            loss, grad = _output_loss_grad(acts[-1], labels)
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at step {step}")
            epoch_loss += loss
            batches += 1

            # backprop through the student; straight-through to the teacher
            for layer in range(len(teachers) - 1, -1, -1):
                a_out, a_in = acts[layer + 1], acts[layer]
                dy = grad * (-a_out * (1.0 - a_out))
                w_bin, _ = binarize(teachers[layer])
                # clipped pass-through: no gradient where the teacher saturates
                w_mask = np.abs(teachers[layer].w) <= 1.0
                b_mask = np.abs(teachers[layer].b) <= 1.0
                grads[layer].w[...] = (dy.T @ a_in) * w_mask
                grads[layer].b[...] = dy.sum(axis=0) * b_mask
                grad = dy @ w_bin.astype(float)

            opt.step()
            for teacher in teachers:
                np.clip(teacher.w, -1.0, 1.0, out=teacher.w)
                np.clip(teacher.b, -1.0, 1.0, out=teacher.b)
                if np.abs(teacher.w).max() > 1.0 or np.abs(teacher.b).max() > 1.0:
                    raise TrainingError(f"teacher left [-1, 1] at step {step}")
            step += 1

        row = {
            "step": step,
            "epoch": epoch + 1,
            "loss": epoch_loss / max(batches, 1),
            "train_accuracy": evaluate_student(teachers, train_x, train_labels),
        }
        if test_x is not None:
            row["test_accuracy"] = evaluate_student(teachers, test_x, test_labels)
        result.history.append(row)
        if hp.max_steps is not None and step >= hp.max_steps:
            break
        if hp.target_accuracy is not None and row["train_accuracy"] >= hp.target_accuracy:
            break

    result.params = student_parameters(teachers)
    result.train_accuracy = evaluate_student(teachers, train_x, train_labels)
    if test_x is not None:
        result.test_accuracy = evaluate_student(teachers, test_x, test_labels)
    return result


def train_mlp_with_restarts(
    train_x,
    train_labels,
    dims,
    hp: MlpHyperparams,
    rng: np.random.Generator,
    restarts: int = 8,
) -> tuple[MlpResult, int]:
    """Segmented training with fresh re-initialization between segments.

    Single ternary flips swing a tiny student's outputs wholesale, so the
    straight-through estimator tends to limit-cycle on nets with a handful
    of parameters; random restarts within the same step budget are the
    reliable fix. Each segment runs hp as given (use max_steps/target_accuracy
    to bound it); returns the first result that reaches the target, or the
    last attempt, along with the total steps consumed.
    """
    total_steps = 0
    result = None
    for _ in range(restarts):
        result = train_mlp(train_x, train_labels, dims, hp, rng)
        total_steps += result.history[-1]["step"] if result.history else 0
        if hp.target_accuracy is None or result.train_accuracy >= hp.target_accuracy:
            break
    return result, total_steps


# -- two-step CNN pipeline ----------------------------------------------------


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class PoolSpec:
    size: int = 2


@dataclass
class CnnSpec:
    """Full-precision feature stage plus the FC widths retrained for IMAC."""

    input_shape: tuple[int, int, int]      # (C, H, W)
    features: list                          # ConvSpec | PoolSpec; ReLU after each conv
    fc_dims: list[int]                      # [flatten, hidden..., classes]

    def feature_output_shape(self) -> tuple[int, int, int]:
        c, h, w = self.input_shape
        for item in self.features:
            if isinstance(item, ConvSpec):
                h = (h + 2 * item.pad - item.kernel) // item.stride + 1
                w = (w + 2 * item.pad - item.kernel) // item.stride + 1
                c = item.out_channels
            elif isinstance(item, PoolSpec):
                h //= item.size
                w //= item.size
            else:
                raise TypeError(f"unknown feature spec {item!r}")
        return c, h, w

    def flatten_width(self) -> int:
        c, h, w = self.feature_output_shape()
        return c * h * w

    def validate(self):
        width = self.flatten_width()
        if width != self.fc_dims[0]:
            raise ValueError(
                f"flatten width {width} does not match first FC width {self.fc_dims[0]}"
            )


def lenet5_spec() -> CnnSpec:
    """LeNet-5 adapted to 28x28 inputs: 2 convolutions, 400-120-84-10 head."""
    return CnnSpec(
        input_shape=(1, 28, 28),
        features=[ConvSpec(6, 5, pad=2), PoolSpec(), ConvSpec(16, 5), PoolSpec()],
        fc_dims=[400, 120, 84, 10],
    )


def reduced_vgg_spec() -> CnnSpec:
    """Desk-scale VGG-style net for CIFAR-10: 3 conv blocks, 1024-128-10 head."""
    return CnnSpec(
        input_shape=(3, 32, 32),
        features=[
            ConvSpec(32, 3, pad=1), PoolSpec(),
            ConvSpec(64, 3, pad=1), PoolSpec(),
            ConvSpec(64, 3, pad=1), PoolSpec(),
        ],
        fc_dims=[1024, 128, 10],
    )


def build_feature_stack(spec: CnnSpec, rng) -> Sequential:
    layers = []
    channels = spec.input_shape[0]
    for item in spec.features:
        if isinstance(item, ConvSpec):
            layers.append(Conv2D(channels, item.out_channels, item.kernel,
                                 stride=item.stride, pad=item.pad, rng=rng))
            layers.append(ReLU())
            channels = item.out_channels
        else:
            layers.append(MaxPool2D(item.size))
    layers.append(Flatten())
    return Sequential(layers)


def build_step1_model(spec: CnnSpec, rng) -> tuple[Sequential, Sequential]:
    """(feature stack, full model) sharing the same layer objects."""
    spec.validate()
    features = build_feature_stack(spec, rng)
    head = []
    dims = spec.fc_dims
    for i in range(len(dims) - 1):
        head.append(Dense(dims[i], dims[i + 1], rng=rng))
        if i < len(dims) - 2:
            head.append(ReLU())
    return features, Sequential(features.layers + head)


@dataclass
class CnnHyperparams:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 3
    fc: MlpHyperparams = field(default_factory=MlpHyperparams)


@dataclass
class TwoStepResult:
    spec: CnnSpec
    features: Sequential
    model: Sequential
    fc: MlpResult
    step1_history: list[dict] = field(default_factory=list)
    step1_test_accuracy: float = float("nan")
    cpu_imac_test_accuracy: float = float("nan")


def evaluate_model(model: Sequential, xs, labels, batch_size=256) -> float:
    hits = 0
    for start in range(0, len(xs), batch_size):
        logits = model.forward(xs[start:start + batch_size])
        hits += int((logits.argmax(axis=1) == labels[start:start + batch_size]).sum())
    return hits / len(xs)


def train_step1(
    model: Sequential,
    train_x,
    train_labels,
    hp: CnnHyperparams,
    rng,
    test_x=None,
    test_labels=None,
) -> list[dict]:
    """Vanilla full-precision backprop with softmax cross-entropy."""
    opt = Adam(model.parameters(), lr=hp.learning_rate)
    history = []
    n = len(train_x)
    step = 0
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, hp.batch_size):
            idx = order[start:start + hp.batch_size]
            logits = model.forward(train_x[idx])
            loss, grad = softmax_cross_entropy(logits, train_labels[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at step {step}")
            model.backward(grad)
            opt.step()
            epoch_loss += loss
            batches += 1
            step += 1
        row = {"step": step, "epoch": epoch + 1, "loss": epoch_loss / max(batches, 1)}
        if test_x is not None:
            row["test_accuracy"] = evaluate_model(model, test_x, test_labels)
        history.append(row)
    return history


def conv_trits(features: Sequential, xs, batch_size=256) -> np.ndarray:
    """Sign-quantized flatten outputs of the frozen convolution stack."""
    out = []
    for start in range(0, len(xs), batch_size):
        out.append(sign_unit(features.forward(xs[start:start + batch_size])))
    return np.concatenate(out, axis=0)


def _conv_param_hash(features: Sequential) -> str:
    digest = hashlib.sha256()
    for value, _ in features.parameters():
        digest.update(value.tobytes())
    return digest.hexdigest()[:16]


def derived_fc_dataset(
    features: Sequential,
    xs: np.ndarray,
    cache_dir=None,
) -> np.ndarray:
    """Materialize the step-2 trit dataset, cached by conv-parameter hash."""
    if cache_dir is None:
        return conv_trits(features, xs)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = f"fcdata_{_conv_param_hash(features)}_{len(xs)}.npz"
    path = cache_dir / key
    if path.exists():
        with np.load(path) as data:
            return data["trits"]
    trits = conv_trits(features, xs)
    np.savez_compressed(path, trits=trits)
    return trits


def evaluate_cpu_imac(features, teachers, xs, labels, batch_size=256) -> float:
    """Digital convolutions -> sign unit -> binarized FC stack accuracy."""
    hits = 0
    for start in range(0, len(xs), batch_size):
        trits = conv_trits(features, xs[start:start + batch_size]).astype(float)
        out = student_forward(teachers, trits)[-1]
        hits += int((_predict(out) == labels[start:start + batch_size]).sum())
    return hits / len(xs)


def train_cnn_two_step(
    spec: CnnSpec,
    train_x,
    train_labels,
    hp: CnnHyperparams,
    rng: np.random.Generator,
    test_x=None,
    test_labels=None,
    cache_dir=None,
) -> TwoStepResult:
    spec.validate()
    features, model = build_step1_model(spec, rng)
    step1_history = train_step1(model, train_x, train_labels, hp, rng, test_x, test_labels)

    trits = derived_fc_dataset(features, train_x, cache_dir).astype(float)
    fc_hp = replace(hp.fc)
    fc = train_mlp(trits, train_labels, spec.fc_dims, fc_hp, rng)

    result = TwoStepResult(
        spec=spec, features=features, model=model, fc=fc, step1_history=step1_history
    )
    if test_x is not None:
        result.step1_test_accuracy = evaluate_model(model, test_x, test_labels)
        result.cpu_imac_test_accuracy = evaluate_cpu_imac(
            features, fc.teachers, test_x, test_labels
        )
    return result
