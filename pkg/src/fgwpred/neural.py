"""Parametric barycentric predictor: MLP weights over learnable templates.

``alpha(x) = softmax(MLP(x))`` weighs ``M`` template graphs and the
prediction is their FGW barycenter of size ``n``.  Training differentiates
the FGW loss with every transport plan held fixed: the barycenter plans
``pi_j`` and the loss plan ``pi``.  Gradients then flow through the linear
barycenter maps::

    C = n^2 sum_j alpha_j pi_j^T Cbar_j pi_j,    F = n sum_j alpha_j pi_j^T Fbar_j

into ``alpha``, the templates, and by backpropagation into the MLP.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .barycenter import BarycenterResult, TemplateSet, solve_barycenter
from .errors import DimMismatchError, InsufficientTrainingDataError, ParseError, ShapeMismatchError
from .fgw import FgwProblem, grad_fixed_plan, solve_fgw
from .graph import Graph, RelaxedGraph

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


# --- MLP -------------------------------------------------------------------

@dataclass
class MlpParams:
    weights: list  # W_l has shape (fan_in, fan_out)
    biases: list

    @classmethod
    def init(cls, sizes, rng) -> "MlpParams":
        rng = np.random.default_rng(rng)
        weights, biases = [], []
        for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = l == len(sizes) - 2
            # He-uniform for ReLU layers, Glorot-uniform for the logits
            bound = np.sqrt(6.0 / (fan_in + fan_out)) if last else np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def arrays(self) -> list:
        return [*self.weights, *self.biases]


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def mlp_logits(params: MlpParams, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != params.sizes[0]:
        raise DimMismatchError(f"input has {x.size} entries, network expects {params.sizes[0]}")
    acts = [x]
    h = x
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W + b
        if l < len(params.weights) - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return h, acts


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Barycentric weights ``alpha(x)`` on the simplex."""
    return softmax(mlp_logits(params, x)[0])


def mlp_backward(params: MlpParams, acts, alpha, dalpha):
    """Backprop ``dL/dalpha`` through softmax and the network."""
    delta = alpha * (dalpha - alpha @ dalpha)
    dW = [None] * len(params.weights)
    db = [None] * len(params.weights)
    for l in range(len(params.weights) - 1, -1, -1):
        dW[l] = np.outer(acts[l], delta)
        db[l] = delta
        if l > 0:
            delta = (params.weights[l] @ delta) * (acts[l] > 0)
    return dW, db


# --- model -----------------------------------------------------------------

@dataclass
class NeuralModel:
    mlp: MlpParams
    template_C: list
    template_F: list
    beta: float = 0.5
    n: int = 40
    input_shift: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    @property
    def M(self) -> int:
        return len(self.template_C)

    def templates(self) -> TemplateSet:
        return TemplateSet(RelaxedGraph(C, F) for C, F in zip(self.template_C, self.template_F))

    def scaled(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if self.input_shift is not None:
            x = (x - self.input_shift) / self.input_scale
        return x

    def alpha(self, x) -> np.ndarray:
        return mlp_forward(self.mlp, self.scaled(x))


def init_templates(M: int, sizes=5, mode: str = "random_uniform", seed=None, d: int = 1,
                   training_graphs=None) -> tuple[list, list]:
    """Template adjacencies/features, drawn in [0, 1] or sampled from training graphs."""
    rng = np.random.default_rng(seed)
    if M < 1:
        raise ValueError("need at least one template")
    if mode == "from_training":
        graphs = list(training_graphs or [])
        if len(graphs) < M:
            raise InsufficientTrainingDataError(f"{M} templates requested from {len(graphs)} graphs")
        idx = rng.choice(len(graphs), size=M, replace=False)
        return [np.array(graphs[i].C) for i in idx], [np.array(graphs[i].F) for i in idx]
    if mode != "random_uniform":
        raise ValueError(f"unknown template init mode {mode!r}")
    sizes = [sizes] * M if np.isscalar(sizes) else list(sizes)
    if len(sizes) != M:
        raise ShapeMismatchError(f"{len(sizes)} sizes for {M} templates")
    Cs, Fs = [], []
    for s in sizes:
        C = np.triu(rng.random((s, s)))
        Cs.append(C + np.triu(C, 1).T)
        Fs.append(rng.random((s, d)))
    return Cs, Fs


def build_model(input_dim: int = 1, M: int = 10, template_sizes=5, d: int = 1, n: int = 40,
                beta: float = 0.5, hidden=(100, 100), template_init: str = "random_uniform",
                seed=0, X=None, training_graphs=None) -> NeuralModel:
    """Fresh model; ``X`` (training inputs) sets the input standardization."""
    ss = np.random.SeedSequence(seed)
    s_mlp, s_tpl = ss.spawn(2)
    mlp = MlpParams.init([input_dim, *hidden, M], np.random.default_rng(s_mlp))
    Cs, Fs = init_templates(M, template_sizes, template_init, np.random.default_rng(s_tpl), d,
                            training_graphs)
    model = NeuralModel(mlp, Cs, Fs, beta, n)
    if X is not None:
        X = np.asarray(X, dtype=float).reshape(len(X), -1)
        model.input_shift = X.mean(axis=0)
        model.input_scale = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    return model


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    lr_weights: float = 1e-3
    lr_templates: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    learn_templates: bool = True
    clamp_features: bool = False
    warm_start: bool = False
    max_outer: int = 5
    bary_tol: float = 1e-6
    fgw_max_iter: int = 30
    loss_fgw_max_iter: int = 100

    def __post_init__(self):
        if not (self.lr_weights >= 0 and self.lr_templates >= 0):
            raise ValueError("learning rates must be nonnegative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def barycenter_opts(self) -> dict:
        return {"max_outer": self.max_outer, "tol": self.bary_tol,
                "fgw_max_iter": self.fgw_max_iter}


def model_forward(model: NeuralModel, x, **barycenter_opts) -> BarycenterResult:
    return solve_barycenter(model.templates(), model.alpha(x), model.n, model.beta,
                            **barycenter_opts)


def predict(model: NeuralModel, x, n: int | None = None, **barycenter_opts) -> RelaxedGraph:
    """Relaxed prediction at any resolution ``n`` (default: the training size)."""
    return solve_barycenter(model.templates(), model.alpha(x), n or model.n, model.beta,
                            **barycenter_opts).graph


def barycenter_backward(result: BarycenterResult, templates, dC, dF):
    """Pull ``dL/dC`` and ``dL/dF`` of the barycenter back with the plans fixed.

    Returns ``(dalpha, dCbar, dFbar)``.
    """
    n = result.graph.n
    w = result.weights
    M = len(templates)
    dalpha = np.zeros(M)
    dCbar, dFbar = [], []
    for j in range(M):
        t = templates[j]
        plan = result.plans[j]
        if plan is None:
            dCbar.append(np.zeros_like(t.C))
            dFbar.append(np.zeros_like(t.F))
            continue
        pi = plan.pi
        dalpha[j] = n * n * np.sum(dC * (pi.T @ t.C @ pi)) + n * np.sum(dF * (pi.T @ t.F))
        dCbar.append(n * n * w[j] * (pi @ dC @ pi.T))
        dFbar.append(n * w[j] * (pi @ dF))
    return dalpha, dCbar, dFbar


@dataclass
class SampleGrad:
    loss: float
    dalpha: np.ndarray
    dW: list
    db: list
    dC: list
    dF: list
    result: BarycenterResult = field(repr=False)
    plan: np.ndarray = field(default=None, repr=False)  # outer-loss coupling


def sample_loss_and_grads(model: NeuralModel, x, y: Graph, config: TrainConfig,
                          warm: SampleGrad | None = None) -> SampleGrad:
    """Forward and detached-plan backward for one training pair.

    ``warm`` (the previous pass on the same pair) seeds the barycenter with
    the previous prediction and adds the previous loss coupling as a second
    start for the loss solve; the lower of the two runs is kept.
    """
    templates = model.templates()
    xs = model.scaled(x)
    logits, acts = mlp_logits(model.mlp, xs)
    alpha = softmax(logits)
    opts = config.barycenter_opts()
    if warm is not None:
        opts["init"] = warm.result.graph
    res = solve_barycenter(templates, alpha, model.n, model.beta, **opts)
    problem = FgwProblem(res.graph, y, model.beta)
    sol = solve_fgw(problem, max_iter=config.loss_fgw_max_iter)
    if warm is not None and warm.plan is not None:
        alt = solve_fgw(problem, max_iter=config.loss_fgw_max_iter, init=warm.plan)
        if alt.value < sol.value:
            sol = alt
    gC, gF = grad_fixed_plan(problem, sol.plan)
    dalpha, dCbar, dFbar = barycenter_backward(res, templates, gC, gF)
    dW, db = mlp_backward(model.mlp, acts, alpha, dalpha)
    return SampleGrad(sol.value, dalpha, dW, db, dCbar, dFbar, res, np.array(sol.plan.pi))


def loss_and_grads(model: NeuralModel, batch, config: TrainConfig | None = None, warm=None):
    """Mean FGW loss over ``batch`` (pairs ``(x, y)``) and its detached-plan gradients.

    Returns ``(loss, grads, samples)`` where ``grads`` has keys ``"W"``, ``"b"``,
    ``"C"``, ``"F"`` mirroring the parameter lists and ``samples`` holds the
    per-pair :class:`SampleGrad` (usable as ``warm`` on the next pass).
    """
    config = config or TrainConfig()
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    warm = warm or [None] * len(batch)
    total = 0.0
    grads = {
        "W": [np.zeros_like(W) for W in model.mlp.weights],
        "b": [np.zeros_like(b) for b in model.mlp.biases],
        "C": [np.zeros_like(C) for C in model.template_C],
        "F": [np.zeros_like(F) for F in model.template_F],
    }
    samples = []
    for (x, y), w in zip(batch, warm):
        g = sample_loss_and_grads(model, x, y, config, w)
        total += g.loss
        for key, part in (("W", g.dW), ("b", g.db), ("C", g.dC), ("F", g.dF)):
            for acc, p in zip(grads[key], part):
                acc += p
        samples.append(g)
    scale = 1.0 / len(batch)
    for key in grads:
        for acc in grads[key]:
            acc *= scale
    return total * scale, grads, samples


# --- optimization ----------------------------------------------------------

@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list, grads: list, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> list:
    """One bias-corrected ADAM update; ``state`` is advanced in place."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ShapeMismatchError("parameter and gradient shapes differ")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    out = []
    for k, (p, g) in enumerate(zip(params, grads)):
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        out.append(p - lr * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2) + eps))
    return out


def project_adjacency(C: np.ndarray) -> np.ndarray:
    return np.clip(0.5 * (C + C.T), 0.0, 1.0)


@dataclass
class TrainState:
    adam_mlp: AdamState
    adam_C: AdamState
    adam_F: AdamState
    rng: np.random.Generator
    epoch: int = 0
    history: list = field(default_factory=list)
    feature_bounds: tuple | None = None

    @classmethod
    def fresh(cls, model: NeuralModel, config: TrainConfig) -> "TrainState":
        return cls(AdamState.zeros_like(model.mlp.arrays()),
                   AdamState.zeros_like(model.template_C),
                   AdamState.zeros_like(model.template_F),
                   np.random.default_rng(config.seed))


def apply_gradients(model: NeuralModel, grads: dict, state: TrainState, config: TrainConfig) -> None:
    kw = dict(beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps)
    n_layers = len(model.mlp.weights)
    new = adam_step(state.adam_mlp, model.mlp.arrays(), [*grads["W"], *grads["b"]],
                    config.lr_weights, **kw)
    model.mlp.weights = new[:n_layers]
    model.mlp.biases = new[n_layers:]
    if config.learn_templates:
        Cs = adam_step(state.adam_C, model.template_C, grads["C"], config.lr_templates, **kw)
        model.template_C = [project_adjacency(C) for C in Cs]
        Fs = adam_step(state.adam_F, model.template_F, grads["F"], config.lr_templates, **kw)
        if config.clamp_features and state.feature_bounds is not None:
            lo, hi = state.feature_bounds
            Fs = [np.clip(F, lo, hi) for F in Fs]
        model.template_F = Fs


def train(model: NeuralModel, X, Y, config: TrainConfig, state: TrainState | None = None,
          epochs: int | None = None, log_path=None):
    """Minibatch ADAM on the mean FGW loss.

    Returns ``(model, history, state)``; ``history`` holds the mean training
    loss of every epoch run so far and ``state`` can resume training.
    """
    X = np.asarray(X, dtype=float).reshape(len(Y), -1)
    Y = list(Y)
    if not Y:
        raise InsufficientTrainingDataError("empty training set")
    state = state or TrainState.fresh(model, config)
    if config.clamp_features and state.feature_bounds is None:
        allF = np.vstack([y.F for y in Y])
        state.feature_bounds = (allF.min(axis=0), allF.max(axis=0))
    warm = [None] * len(Y)
    epochs = config.epochs if epochs is None else epochs
    for _ in range(epochs):
        order = state.rng.permutation(len(Y))
        losses = []
        for start in range(0, len(Y), config.batch_size):
            idx = order[start:start + config.batch_size]
            prev = [warm[i] for i in idx] if config.warm_start else None
            loss, grads, samples = loss_and_grads(model, [(X[i], Y[i]) for i in idx], config, prev)
            if config.warm_start:
                for i, g in zip(idx, samples):
                    warm[i] = g
            apply_gradients(model, grads, state, config)
            losses.extend([loss] * len(idx))
        state.epoch += 1
        state.history.append(float(np.mean(losses)))
        log.info("epoch %d loss %.6f", state.epoch, state.history[-1])
        if log_path is not None:
            with open(log_path, "a") as fh:
                fh.write(f"{state.epoch},{state.history[-1]!r}\n")
    return model, list(state.history), state


# --- checkpoints -----------------------------------------------------------

def _arr(a):
    return None if a is None else np.asarray(a).tolist()


def save_checkpoint(path, model: NeuralModel, config: TrainConfig, state: TrainState | None = None):
    doc = {
        "version": CHECKPOINT_VERSION,
        "kind": "neural",
        "config": asdict(config),
        "model": {
            "beta": model.beta,
            "n": model.n,
            "input_shift": _arr(model.input_shift),
            "input_scale": _arr(model.input_scale),
            "weights": [_arr(W) for W in model.mlp.weights],
            "biases": [_arr(b) for b in model.mlp.biases],
            "template_C": [_arr(C) for C in model.template_C],
            "template_F": [_arr(F) for F in model.template_F],
        },
    }
    if state is not None:
        doc["state"] = {
            "epoch": state.epoch,
            "history": state.history,
            "rng": state.rng.bit_generator.state,
            "feature_bounds": None if state.feature_bounds is None
            else [_arr(b) for b in state.feature_bounds],
            "adam": {
                name: {"t": s.t, "m": [_arr(a) for a in s.m], "v": [_arr(a) for a in s.v]}
                for name, s in (("mlp", state.adam_mlp), ("C", state.adam_C), ("F", state.adam_F))
            },
        }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[NeuralModel, TrainConfig, TrainState | None]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a checkpoint: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    m = doc["model"]
    arrs = lambda xs: [np.asarray(a, dtype=float) for a in xs]  # noqa: E731
    model = NeuralModel(
        MlpParams(arrs(m["weights"]), arrs(m["biases"])),
        arrs(m["template_C"]),
        [np.asarray(F, dtype=float).reshape(len(F), -1) for F in m["template_F"]],
        m["beta"],
        m["n"],
        None if m["input_shift"] is None else np.asarray(m["input_shift"]),
        None if m["input_scale"] is None else np.asarray(m["input_scale"]),
    )
    config = TrainConfig(**doc["config"])
    state = None
    if "state" in doc:
        s = doc["state"]
        rng = np.random.default_rng()
        rng.bit_generator.state = s["rng"]
        adam = {k: AdamState(arrs(v["m"]), arrs(v["v"]), v["t"]) for k, v in s["adam"].items()}
        fb = s.get("feature_bounds")
        state = TrainState(adam["mlp"], adam["C"], adam["F"], rng, s["epoch"], list(s["history"]),
                           None if fb is None else tuple(np.asarray(b) for b in fb))
    return model, config, state
