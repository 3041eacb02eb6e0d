"""Training under the full multiclass log-loss with cubed-norm regularization.

Gradients are exact analytic derivatives, written out by hand: the softmax
term produces softmax(scores) - onehot(tail) over the full entity axis, and
the penalty on the updated relation embedding backpropagates through the
gated cell into the head embedding, the raw relation embedding, and the cell
weights. Optimization is Adagrad over the flat parameter space.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cells import interact, interact_backward
from .config import TrainConfig, derived_rng
from .kg import TripleStore
from .models import ModelParams, init_params, param_items

Gradients = dict[str, np.ndarray]


class NonFiniteLossError(RuntimeError):
    """Loss overflowed or went NaN; parameters have blown up."""


def softmax_residual(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """softmax(scores) - onehot(target), row-wise; rows sum to zero."""
    m = scores.max(axis=1, keepdims=True)
    exp = np.exp(scores - m)
    p = exp / exp.sum(axis=1, keepdims=True)
    p[np.arange(len(targets)), targets] -= 1.0
    return p


def _cube_grad(x: np.ndarray) -> np.ndarray:
    """d/dx |x|^3 = 3 sign(x) x^2 (zero at zero, no subgradient choice)."""
    return 3.0 * np.sign(x) * x * x


def _forward(params: ModelParams, batch: np.ndarray, reg_lambda: float):
    """Shared forward pass; returns loss plus everything backward needs.

    Overflow is not a warning here: a non-finite loss is detected by the
    caller and surfaced as NonFiniteLossError.
    """
    heads = batch[:, 0]
    rels = batch[:, 1]
    tails = batch[:, 2]
    with np.errstate(over="ignore", invalid="ignore"):
        e_h = params.entity_emb[heads]
        e_r = params.relation_emb[rels]
        if params.cell is not None:
            e_rp, trace = interact(params.cell, e_r, e_h)
        else:
            e_rp, trace = e_r, None
        q = e_h * e_rp
        scores = q @ params.entity_emb.T
        m = scores.max(axis=1)
        lse = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
        ce = lse - scores[np.arange(len(batch)), tails]
        e_t = params.entity_emb[tails]
        reg = 0.0
        if reg_lambda:
            reg = float(
                reg_lambda
                * (np.abs(e_h) ** 3 + np.abs(e_rp) ** 3 + np.abs(e_t) ** 3).sum()
            )
        loss = float(ce.sum() + reg)
    return loss, reg, (e_h, e_r, e_rp, e_t, trace, q, scores, lse)


def loss_value(params: ModelParams, batch: np.ndarray, reg_lambda: float) -> float:
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    loss, _, _ = _forward(params, batch, reg_lambda)
    return loss


def loss_batch(
    params: ModelParams,
    batch: np.ndarray,
    reg_lambda: float,
    truncate_top: int | None = None,
) -> tuple[float, Gradients]:
    """Summed batch loss and exact gradients over the flat parameter space.

    Every entity row receives gradient through the full-softmax term; head,
    tail, and relation rows receive their lookup terms on top (accumulated
    in fixed batch order). Raises NonFiniteLossError on overflow.

    truncate_top, when set, restricts each row's softmax support to its
    top-k scored entities plus the true tail (an approximation of the full
    multiclass loss; off by default and never used by train()).
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    loss, reg, (e_h, e_r, e_rp, e_t, trace, q, scores, lse) = _forward(
        params, batch, reg_lambda
    )
    heads = batch[:, 0]
    rels = batch[:, 1]
    tails = batch[:, 2]
    rows = np.arange(len(batch))

    if truncate_top is not None and truncate_top < params.n_entities:
        if truncate_top < 1:
            raise ValueError(f"truncate_top must be >= 1, got {truncate_top}")
        keep = np.zeros_like(scores, dtype=bool)
        top = np.argpartition(-scores, truncate_top - 1, axis=1)[:, :truncate_top]
        np.put_along_axis(keep, top, True, axis=1)
        keep[rows, tails] = True
        scores = np.where(keep, scores, -np.inf)
        with np.errstate(over="ignore", invalid="ignore"):
            m = scores.max(axis=1)
            lse = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
            loss = float((lse - scores[rows, tails]).sum()) + reg
    if not np.isfinite(loss):
        raise NonFiniteLossError(
            f"non-finite loss {loss} on a batch of {len(batch)} "
            f"(max |entity| = {np.abs(params.entity_emb).max():.3e})"
        )

    with np.errstate(invalid="ignore"):
        residual = np.exp(scores - lse[:, None])
        residual[np.isneginf(scores)] = 0.0
    residual[rows, tails] -= 1.0

    grads: Gradients = {
        "entity_emb": residual.T @ q,
        "relation_emb": np.zeros_like(params.relation_emb),
    }
    d_q = residual @ params.entity_emb
    d_eh = d_q * e_rp
    d_erp = d_q * e_h
    if reg_lambda:
        d_eh = d_eh + reg_lambda * _cube_grad(e_h)
        d_erp = d_erp + reg_lambda * _cube_grad(e_rp)
        np.add.at(grads["entity_emb"], tails, reg_lambda * _cube_grad(e_t))
    if params.cell is not None:
        d_er, d_eh_cell, cell_grads = interact_backward(params.cell, trace, d_erp)
        d_eh = d_eh + d_eh_cell
        grads.update(cell_grads)
    else:
        d_er = d_erp
    np.add.at(grads["entity_emb"], heads, d_eh)
    np.add.at(grads["relation_emb"], rels, d_er)
    return loss, grads


@dataclass
class AdagradState:
    """Accumulated squared gradients per parameter; nondecreasing."""

    accumulators: dict[str, np.ndarray]
    epsilon: float = 1e-10


def new_adagrad_state(params: ModelParams, epsilon: float = 1e-10) -> AdagradState:
    return AdagradState(
        accumulators={name: np.zeros_like(arr) for name, arr in param_items(params)},
        epsilon=epsilon,
    )


def adagrad_step(
    params: ModelParams, grads: Gradients, state: AdagradState, learning_rate: float
) -> None:
    """In place: acc += g^2; param -= lr * g / (sqrt(acc) + eps).

    Zero-gradient entries (rows not touched by the batch) are no-ops for
    both the parameter and the accumulator.
    """
    for name, arr in param_items(params):
        g = grads[name]
        acc = state.accumulators[name]
        acc += g * g
        arr -= learning_rate * g / (np.sqrt(acc) + state.epsilon)


@dataclass
class TrainResult:
    params: ModelParams
    epoch_losses: list[float] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""


ProgressSink = Callable[[int, float, float], None]
ValidationHook = Callable[[int, ModelParams], None]


def train(
    store: TripleStore,
    config: TrainConfig,
    sink: ProgressSink | None = None,
    validation_hook: ValidationHook | None = None,
) -> TrainResult:
    """Epochs of shuffled mini-batches over a reciprocal-augmented store.

    Deterministic for a fixed seed (single-threaded reduction): parameter
    init and per-epoch shuffles use labeled seeds derived from config.seed.
    On a non-finite loss the run aborts early and the last finite parameter
    state is returned. The validation hook is called after each epoch when
    provided; by default it is inert.
    """
    config.validate()
    if not store.has_reciprocals():
        raise ValueError("train expects a reciprocal-augmented store")
    if store.n_triples == 0:
        raise ValueError("train expects a non-empty store")
    params = init_params(
        store.n_entities,
        store.n_relations,
        config.d_e,
        config.d_r,
        kind=config.model,
        seed=int(derived_rng(config.seed, "param-init").integers(2**32)),
        cell_kind=config.cell,
        output_mode=config.output_mode,
    )
    state = new_adagrad_state(params)
    triples = store.triples
    n = len(triples)
    result = TrainResult(params=params)
    last_finite = params.copy()
    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = derived_rng(config.seed, "epoch-shuffle", epoch).permutation(n)
        shuffled = triples[order]
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = shuffled[start : start + config.batch_size]
            try:
                loss, grads = loss_batch(params, batch, config.reg_lambda)
            except NonFiniteLossError as err:
                result.params = last_finite
                result.aborted = True
                result.abort_reason = str(err)
                return result
            last_finite = params.copy()
            adagrad_step(params, grads, state, config.learning_rate)
            total += loss
        mean_loss = total / n
        result.epoch_losses.append(mean_loss)
        if sink is not None:
            sink(epoch, mean_loss, time.perf_counter() - started)
        if validation_hook is not None:
            validation_hook(epoch, params)
    result.params = params
    return result


@dataclass
class GradCheckEntry:
    param: str
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        return abs(self.analytic - self.numeric) / max(
            abs(self.analytic), abs(self.numeric), 1e-8
        )


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry]
    step: float

    @property
    def max_rel_error(self) -> float:
        return max(e.rel_error for e in self.entries)

    @property
    def worst(self) -> GradCheckEntry:
        return max(self.entries, key=lambda e: e.rel_error)

    def max_rel_error_over(self, min_scale: float) -> float:
        """Max relative error among entries whose magnitude is measurable.

        Central differences at step h resolve a derivative only down to
        roughly eps_machine * |loss| / h; entries where both sides sit
        below min_scale are certified absolutely instead.
        """
        measurable = [
            e for e in self.entries if max(abs(e.analytic), abs(e.numeric)) >= min_scale
        ]
        if not measurable:
            return 0.0
        return max(e.rel_error for e in measurable)

    def max_abs_error_below(self, min_scale: float) -> float:
        small = [
            e for e in self.entries if max(abs(e.analytic), abs(e.numeric)) < min_scale
        ]
        if not small:
            return 0.0
        return max(abs(e.analytic - e.numeric) for e in small)


def gradient_check(
    params: ModelParams,
    batch: np.ndarray,
    reg_lambda: float,
    step: float = 1e-6,
) -> GradCheckReport:
    """Compare every analytic derivative against central finite differences.

    Intended for small instances (tens of entities, single-digit dims);
    cost is two loss evaluations per parameter.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    _, grads = loss_batch(params, batch, reg_lambda)
    entries: list[GradCheckEntry] = []
    for name, arr in param_items(params):
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            index = it.multi_index
            original = arr[index]
            arr[index] = original + step
            up = loss_value(params, batch, reg_lambda)
            arr[index] = original - step
            down = loss_value(params, batch, reg_lambda)
            arr[index] = original
            entries.append(
                GradCheckEntry(
                    param=name,
                    index=index,
                    analytic=float(grads[name][index]),
                    numeric=(up - down) / (2.0 * step),
                )
            )
    return GradCheckReport(entries=entries, step=step)


def random_check_instance(
    seed: int,
    model: str = "kdgene",
    cell_kind: str = "lstm",
    output_mode: str = "standard",
    n_entities: int = 6,
    n_relations: int = 2,
    d_e: int = 4,
    d_r: int = 3,
    batch_size: int = 2,
) -> tuple[ModelParams, np.ndarray]:
    """Random small model + batch suited to finite-difference checking.

    Parameter magnitudes are bounded away from zero and gate preactivations
    kept out of saturation, so true gradient components rarely fall below
    the resolution of central differences at step 1e-6.
    """
    rng = np.random.default_rng(seed)

    def signed(lo: float, hi: float, shape) -> np.ndarray:
        return rng.uniform(lo, hi, shape) * rng.choice([-1.0, 1.0], shape)

    if model in ("cp_n3", "distmult"):
        d_r = d_e
    params = init_params(
        n_entities, n_relations, d_e, d_r,
        kind=model, seed=seed, cell_kind=cell_kind, output_mode=output_mode,
    )
    params.entity_emb[:] = signed(0.4, 0.9, (n_entities, d_e))
    params.relation_emb[:] = signed(0.4, 0.9, (n_relations, d_r))
    if params.cell is not None:
        for name, w in params.cell.weights.items():
            if name.startswith("b"):
                w[:] = signed(0.1, 0.3, w.shape)
            else:
                scale = 0.5 / np.sqrt(w.shape[1])
                w[:] = signed(0.3 * scale, scale, w.shape)
    batch = np.stack(
        [
            rng.integers(0, n_entities, batch_size),
            rng.integers(0, n_relations, batch_size),
            rng.integers(0, n_entities, batch_size),
        ],
        axis=1,
    ).astype(np.int64)
    return params, batch
