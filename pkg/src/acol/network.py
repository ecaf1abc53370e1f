"""Dense feedforward model, combined backpropagation, and mini-batch SGD.

The model is a chain of fully connected layers (relu hidden activations,
linear last layer) whose final output Z feeds the auto-clustering head.
Each training step combines the supervised parent-label gradient with the
activity-regularization gradient, the latter masked by the relu indicator
so that entries with Z <= 0 receive no regularization signal.

Per-batch convention: the supervised loss is averaged over the batch, the
affinity/balance ratios are scale-normalized batch statistics as defined,
and the squared-Frobenius term is divided by the batch size so its
coefficient keeps the same meaning across batch sizes.

Checkpoint container: an ASCII header (one ``key: value`` per line,
terminated by a blank line) followed by raw little-endian float64 blocks,
one per layer in order, weights (row-major) then bias.
"""

import copy
import io
from dataclasses import dataclass, field

import numpy as np

from . import datasets
from .head import AcolHead, head_forward, supervised_grad
from .linalg import as_matrix, relu, require_finite
from .regularizers import GarCoefficients, GarTerms, gar_grad, gar_terms

CHECKPOINT_TAG = "acol checkpoint v1"


@dataclass
class DenseLayer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str      # "relu" | "linear"


@dataclass
class Model:
    layers: list[DenseLayer]
    head: AcolHead
    rng_seed: int

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].weights.shape[0]] + [l.weights.shape[1] for l in self.layers]


@dataclass
class LayerGrads:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    gar: GarCoefficients = field(default_factory=GarCoefficients)
    seed: int = 0
    validation_size: int = 1000

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2; the regularizers are batch statistics")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")


@dataclass
class EpochRecord:
    epoch: int
    sup_loss: float
    affinity: float
    balance: float
    frobenius: float
    train_parent_acc: float
    val_parent_acc: float


@dataclass
class TrainReport:
    records: list[EpochRecord]
    selected_epoch: int


def init_model(layer_sizes, head: AcolHead, seed: int) -> Model:
    """Uniform Glorot initialization, biases zero, fully seed-deterministic.

    ``layer_sizes`` runs from the input dimension to the head width n;
    hidden layers use relu, the last layer is linear and produces Z. Every
    duplicate column is drawn independently so random initialization breaks
    the symmetry between a parent's k nodes.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output size")
    if sizes[-1] != head.n:
        raise ValueError(f"final layer size {sizes[-1]} must equal head.n = {head.n}")
    rng = np.random.default_rng(seed)
    layers = []
    last = len(sizes) - 2
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(
            DenseLayer(
                weights=rng.uniform(-scale, scale, size=(fan_in, fan_out)),
                bias=np.zeros(fan_out),
                activation="linear" if i == last else "relu",
            )
        )
    return Model(layers=layers, head=head, rng_seed=seed)


def forward(model: Model, x):
    """Run the layer chain; returns per-layer caches and the final Z.

    Each cache entry holds the layer's input and pre-activation, which is
    everything backward() needs.
    """
    a = as_matrix(x, "X")
    if a.shape[1] != model.layers[0].weights.shape[0]:
        raise ValueError(
            f"input has {a.shape[1]} features, first layer expects {model.layers[0].weights.shape[0]}"
        )
    caches = []
    for layer in model.layers:
        pre = a @ layer.weights + layer.bias
        caches.append((a, pre))
        a = relu(pre) if layer.activation == "relu" else pre
    return caches, a


def backward(model: Model, caches, d_z) -> list[LayerGrads]:
    """Backpropagate d_z (gradient at Z) through the cached layer chain.

    Gradients are unnormalized: any 1/batch factors must already be inside
    d_z.
    """
    if len(caches) != len(model.layers):
        raise ValueError(f"cache holds {len(caches)} layers, model has {len(model.layers)}")
    d_out = as_matrix(d_z, "dZ")
    grads: list[LayerGrads | None] = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        a_in, pre = caches[i]
        if d_out.shape != pre.shape:
            raise ValueError(
                f"stale cache at layer {i}: gradient shape {d_out.shape} vs activations {pre.shape}"
            )
        d_pre = d_out * (pre > 0) if layer.activation == "relu" else d_out
        grads[i] = LayerGrads(weights=a_in.T @ d_pre, bias=d_pre.sum(axis=0))
        d_out = d_pre @ layer.weights.T
    return grads


def combined_loss(model: Model, x, t, coeffs: GarCoefficients) -> float:
    """Supervised log loss plus the regularization loss on this batch."""
    _, z = forward(model, x)
    loss, _ = supervised_grad(z, t, model.head)
    return loss + gar_terms(relu(z), coeffs).loss


def combined_step(model: Model, x, t, coeffs: GarCoefficients):
    """One forward/backward evaluation of the combined objective.

    Returns ``(loss, grads, sup_loss, terms)`` where grads mirror the layer
    parameters. The regularization gradient reaches Z only through the relu
    mask.
    """
    caches, z = forward(model, x)
    sup_loss, d_z = supervised_grad(z, t, model.head)
    activities = relu(z)
    terms = gar_terms(activities, coeffs)
    d_z = d_z + gar_grad(activities, coeffs) * (z > 0)
    grads = backward(model, caches, d_z)
    return sup_loss + terms.loss, grads, sup_loss, terms


def parent_accuracy_of(model: Model, data: datasets.LabeledDataset) -> float:
    """Fraction of examples whose pooled argmax parent matches t."""
    _, z = forward(model, data.X)
    _, _, parent_probs = head_forward(z, model.head)
    predicted = np.argmax(parent_probs, axis=1) + 1
    return float(np.mean(predicted == data.t))


def _snapshot(model: Model) -> list[DenseLayer]:
    return copy.deepcopy(model.layers)


def train(model: Model, data: datasets.LabeledDataset, cfg: TrainConfig):
    """Mini-batch SGD with momentum on the combined objective.

    Each epoch shuffles the training rows with the seeded stream, walks
    batches of ``cfg.batch_size`` (final short batch included), and takes
    one gradient step per batch. When ``cfg.validation_size`` > 0 that many
    examples are split off (seeded) before training and the returned model
    is the parameter snapshot from the epoch with the highest validation
    parent accuracy (latest on ties, so the regularizers keep refining the
    latent structure after the supervised task saturates); otherwise the
    final epoch is kept.

    Returns ``(model, report)``; the given model is updated in place.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.t.min() < 1 or data.t.max() > model.head.n_parents:
        raise ValueError(f"parent labels must lie in 1..{model.head.n_parents}")

    if cfg.validation_size > 0:
        train_data, val_data = datasets.split_validation(data, cfg.validation_size, cfg.seed)
    else:
        train_data, val_data = data, None
    m = len(train_data)
    if cfg.batch_size > m:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds {m} training examples")

    rng = np.random.default_rng(cfg.seed)
    velocity = [
        LayerGrads(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers
    ]
    records: list[EpochRecord] = []
    best_acc = -np.inf
    best_epoch = 0
    best_layers = _snapshot(model)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(m)
        sup_sum = aff_sum = bal_sum = fro_sum = 0.0
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x_b, t_b = train_data.X[idx], train_data.t[idx]
            rows = len(idx)
            scaled = GarCoefficients(cfg.gar.c_alpha, cfg.gar.c_beta, cfg.gar.c_f / rows)
            _, grads, sup_loss, terms = combined_step(model, x_b, t_b, scaled)
            for layer, vel, g in zip(model.layers, velocity, grads):
                vel.weights = cfg.momentum * vel.weights - cfg.learning_rate * g.weights
                vel.bias = cfg.momentum * vel.bias - cfg.learning_rate * g.bias
                layer.weights += vel.weights
                layer.bias += vel.bias
            sup_sum += sup_loss * rows
            aff_sum += terms.affinity * rows
            bal_sum += terms.balance * rows
            fro_sum += terms.frobenius_sq  # summed over examples already

        train_acc = parent_accuracy_of(model, train_data)
        val_acc = parent_accuracy_of(model, val_data) if val_data is not None else float("nan")
        records.append(
            EpochRecord(
                epoch=epoch,
                sup_loss=sup_sum / m,
                affinity=aff_sum / m,
                balance=bal_sum / m,
                frobenius=fro_sum / m,
                train_parent_acc=train_acc,
                val_parent_acc=val_acc,
            )
        )
        if val_data is not None:
            if val_acc >= best_acc:
                best_acc, best_epoch, best_layers = val_acc, epoch, _snapshot(model)
        else:
            best_epoch, best_layers = epoch, _snapshot(model)

    model.layers = best_layers
    return model, TrainReport(records=records, selected_epoch=best_epoch)


def save_checkpoint(model: Model, path, epoch: int = 0) -> None:
    """Write the documented header-plus-float64-blocks container."""
    header = io.StringIO()
    header.write(CHECKPOINT_TAG + "\n")
    header.write("layer_sizes: " + ",".join(str(s) for s in model.layer_sizes) + "\n")
    header.write("activations: " + ",".join(l.activation for l in model.layers) + "\n")
    header.write(f"n_parents: {model.head.n_parents}\n")
    header.write(f"k: {model.head.k}\n")
    header.write(f"seed: {model.rng_seed}\n")
    header.write(f"epoch: {epoch}\n")
    header.write("\n")
    with open(str(path), "wb") as f:
        f.write(header.getvalue().encode("ascii"))
        for layer in model.layers:
            f.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns ``(model, epoch)``.

    Validates the tag, the header fields, the payload length, and parameter
    finiteness.
    """
    with open(str(path), "rb") as f:
        blob = f.read()
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise ValueError(f"{path}: missing checkpoint header terminator")
    lines = blob[:sep].decode("ascii").splitlines()
    if not lines or lines[0] != CHECKPOINT_TAG:
        raise ValueError(f"{path}: not a checkpoint file (missing '{CHECKPOINT_TAG}')")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    try:
        sizes = [int(s) for s in fields["layer_sizes"].split(",")]
        activations = fields["activations"].split(",")
        head = AcolHead(n_parents=int(fields["n_parents"]), k=int(fields["k"]))
        seed = int(fields["seed"])
        epoch = int(fields["epoch"])
    except KeyError as e:
        raise ValueError(f"{path}: checkpoint header missing field {e}") from e
    if sizes[-1] != head.n:
        raise ValueError(f"{path}: header mismatch, last layer {sizes[-1]} vs head n {head.n}")
    if len(activations) != len(sizes) - 1:
        raise ValueError(f"{path}: header mismatch between layer_sizes and activations")

    payload = blob[sep + 2 :]
    expected = sum((fi + 1) * fo for fi, fo in zip(sizes[:-1], sizes[1:])) * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: parameter payload is {len(payload)} bytes, expected {expected}")
    layers = []
    offset = 0
    for (fan_in, fan_out), act in zip(zip(sizes[:-1], sizes[1:]), activations):
        w_bytes = fan_in * fan_out * 8
        weights = np.frombuffer(payload, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += w_bytes
        bias = np.frombuffer(payload, dtype="<f8", count=fan_out, offset=offset)
        offset += fan_out * 8
        layers.append(
            DenseLayer(
                weights=require_finite(weights, "weights").reshape(fan_in, fan_out).copy(),
                bias=require_finite(bias, "bias").copy(),
                activation=act,
            )
        )
    return Model(layers=layers, head=head, rng_seed=seed), epoch
