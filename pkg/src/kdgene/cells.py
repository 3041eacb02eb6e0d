"""Single-step gated cells mapping (relation embedding, head embedding) to an
updated relation embedding, with hand-derived backward passes.

The relation embedding is the cell input; the head-entity embedding is the
hidden state. The LSTM cell state starts at zero, so the forget gate is
computed but receives no gradient. `output_mode` selects the LSTM emission:
"standard" emits o * tanh(c); "as_written" emits the output-gate activation
sigma(W_oh e_h + W_ox e_r + b_o) directly. GRU and RNN cells have a single
textbook form; they ignore output_mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CELL_KINDS = ("lstm", "gru", "rnn")
OUTPUT_MODES = ("standard", "as_written")

# Canonical parameter order, also the checkpoint serialization order:
# hidden-side matrices, input-side matrices, biases.
CELL_PARAM_NAMES = {
    "lstm": (
        "w_fh", "w_ih", "w_ch", "w_oh",
        "w_fx", "w_ix", "w_cx", "w_ox",
        "b_f", "b_i", "b_c", "b_o",
    ),
    "gru": ("w_zh", "w_rh", "w_nh", "w_zx", "w_rx", "w_nx", "b_z", "b_r", "b_n"),
    "rnn": ("w_hh", "w_hx", "b_h"),
}


def cell_param_shapes(kind: str, d_e: int, d_r: int) -> dict[str, tuple[int, ...]]:
    if kind not in CELL_KINDS:
        raise ValueError(f"unknown cell kind {kind!r}; expected one of {CELL_KINDS}")
    shapes: dict[str, tuple[int, ...]] = {}
    for name in CELL_PARAM_NAMES[kind]:
        if name.startswith("b"):
            shapes[name] = (d_e,)
        elif name.endswith("h"):
            shapes[name] = (d_e, d_e)
        else:
            shapes[name] = (d_e, d_r)
    return shapes


@dataclass
class InteractionCell:
    kind: str
    output_mode: str
    weights: dict[str, np.ndarray]

    @property
    def d_e(self) -> int:
        return self.weights[CELL_PARAM_NAMES[self.kind][0]].shape[0]

    @property
    def d_r(self) -> int:
        x_name = next(n for n in CELL_PARAM_NAMES[self.kind] if n.endswith("x"))
        return self.weights[x_name].shape[1]

    def validate(self) -> None:
        if self.kind not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValueError(f"unknown output_mode {self.output_mode!r}")
        expected = cell_param_shapes(self.kind, self.d_e, self.d_r)
        if set(self.weights) != set(expected):
            raise ValueError(
                f"cell weights {sorted(self.weights)} do not match "
                f"expected {sorted(expected)}"
            )
        for name, shape in expected.items():
            if self.weights[name].shape != shape:
                raise ValueError(
                    f"cell weight {name} has shape {self.weights[name].shape}, "
                    f"expected {shape}"
                )


def new_cell(
    kind: str,
    d_e: int,
    d_r: int,
    output_mode: str = "standard",
    rng: np.random.Generator | None = None,
    scale: float = 0.01,
) -> InteractionCell:
    """Cell with weights ~ U(-scale, scale), or all zeros when rng is None."""
    shapes = cell_param_shapes(kind, d_e, d_r)
    weights = {}
    for name, shape in shapes.items():
        if rng is None:
            weights[name] = np.zeros(shape)
        else:
            weights[name] = rng.uniform(-scale, scale, shape)
    cell = InteractionCell(kind=kind, output_mode=output_mode, weights=weights)
    cell.validate()
    return cell


@dataclass
class CellTrace:
    """Cached forward activations, sufficient for the exact backward pass.

    Re-running the forward on the same params and inputs reproduces every
    field bit-identically.
    """

    e_r: np.ndarray
    e_h: np.ndarray
    preact: dict[str, np.ndarray]
    gates: dict[str, np.ndarray]
    cell_state: np.ndarray | None
    output: np.ndarray


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _affine(cell: InteractionCell, gate: str, e_r: np.ndarray, e_h: np.ndarray) -> np.ndarray:
    w = cell.weights
    return e_h @ w[f"w_{gate}h"].T + e_r @ w[f"w_{gate}x"].T + w[f"b_{gate}"]


def _check_shapes(cell: InteractionCell, e_r: np.ndarray, e_h: np.ndarray) -> None:
    if e_r.shape[-1] != cell.d_r or e_h.shape[-1] != cell.d_e:
        raise ValueError(
            f"input dims (d_r={e_r.shape[-1]}, d_e={e_h.shape[-1]}) do not match "
            f"cell (d_r={cell.d_r}, d_e={cell.d_e})"
        )
    if e_r.shape[:-1] != e_h.shape[:-1]:
        raise ValueError(f"batch shapes differ: {e_r.shape[:-1]} vs {e_h.shape[:-1]}")


def interact(
    cell: InteractionCell, e_r: np.ndarray, e_h: np.ndarray
) -> tuple[np.ndarray, CellTrace]:
    """One gated step: returns the updated relation embedding and its trace.

    Accepts single vectors or stacked batches (leading axes broadcast
    together). Gate activations lie in (0, 1); tanh candidates in (-1, 1).
    """
    e_r = np.asarray(e_r, dtype=np.float64)
    e_h = np.asarray(e_h, dtype=np.float64)
    _check_shapes(cell, e_r, e_h)

    if cell.kind == "lstm":
        preact = {g: _affine(cell, g, e_r, e_h) for g in ("f", "i", "c", "o")}
        f = _sigmoid(preact["f"])
        i = _sigmoid(preact["i"])
        c_tilde = np.tanh(preact["c"])
        o = _sigmoid(preact["o"])
        c = i * c_tilde  # f * c0 vanishes: the initial cell state is zero
        if cell.output_mode == "as_written":
            out = o
        else:
            out = o * np.tanh(c)
        return out, CellTrace(e_r, e_h, preact, {"f": f, "i": i, "c_tilde": c_tilde, "o": o}, c, out)

    if cell.kind == "gru":
        preact = {g: _affine(cell, g, e_r, e_h) for g in ("z", "r")}
        z = _sigmoid(preact["z"])
        r = _sigmoid(preact["r"])
        hidden_part = e_h @ cell.weights["w_nh"].T
        preact["n"] = r * hidden_part + e_r @ cell.weights["w_nx"].T + cell.weights["b_n"]
        n = np.tanh(preact["n"])
        out = (1.0 - z) * n + z * e_h
        trace = CellTrace(e_r, e_h, preact, {"z": z, "r": r, "n": n, "nh": hidden_part}, None, out)
        return out, trace

    # rnn
    preact = {"h": _affine(cell, "h", e_r, e_h)}
    out = np.tanh(preact["h"])
    return out, CellTrace(e_r, e_h, preact, {}, None, out)


def _accumulate(
    cell: InteractionCell,
    grads: dict[str, np.ndarray],
    gate: str,
    d_pre: np.ndarray,
    trace: CellTrace,
) -> tuple[np.ndarray, np.ndarray]:
    """Add affine-gate weight grads; return (d_e_r, d_e_h) contributions."""
    e_r2 = np.atleast_2d(trace.e_r)
    e_h2 = np.atleast_2d(trace.e_h)
    d2 = np.atleast_2d(d_pre)
    grads[f"w_{gate}h"] += d2.T @ e_h2
    grads[f"w_{gate}x"] += d2.T @ e_r2
    grads[f"b_{gate}"] += d2.sum(axis=0)
    return d_pre @ cell.weights[f"w_{gate}x"], d_pre @ cell.weights[f"w_{gate}h"]


def interact_backward(
    cell: InteractionCell, trace: CellTrace, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Backprop d_out through one gated step.

    Returns (d_e_r, d_e_h, weight grads). Weight grads are summed over any
    batch axes in deterministic (matrix product) order.
    """
    grads = {name: np.zeros_like(w) for name, w in cell.weights.items()}
    d_e_r = np.zeros_like(trace.e_r)
    d_e_h = np.zeros_like(trace.e_h)

    if cell.kind == "lstm":
        o = trace.gates["o"]
        if cell.output_mode == "as_written":
            d_pre_o = d_out * o * (1.0 - o)
            dr, dh = _accumulate(cell, grads, "o", d_pre_o, trace)
            return d_e_r + dr, d_e_h + dh, grads
        i = trace.gates["i"]
        c_tilde = trace.gates["c_tilde"]
        tanh_c = np.tanh(trace.cell_state)
        d_o = d_out * tanh_c
        d_c = d_out * o * (1.0 - tanh_c * tanh_c)
        d_i = d_c * c_tilde
        d_c_tilde = d_c * i
        # forget gate: d_c * c0 = 0, so no gradient reaches it
        for gate, d_act, deriv in (
            ("o", d_o, o * (1.0 - o)),
            ("i", d_i, i * (1.0 - i)),
            ("c", d_c_tilde, 1.0 - c_tilde * c_tilde),
        ):
            dr, dh = _accumulate(cell, grads, gate, d_act * deriv, trace)
            d_e_r += dr
            d_e_h += dh
        return d_e_r, d_e_h, grads

    if cell.kind == "gru":
        z = trace.gates["z"]
        r = trace.gates["r"]
        n = trace.gates["n"]
        hidden_part = trace.gates["nh"]
        d_n = d_out * (1.0 - z)
        d_z = d_out * (trace.e_h - n)
        d_e_h += d_out * z
        d_pre_n = d_n * (1.0 - n * n)
        e_r2 = np.atleast_2d(trace.e_r)
        d_pre_n2 = np.atleast_2d(d_pre_n)
        grads["w_nx"] += d_pre_n2.T @ e_r2
        grads["b_n"] += d_pre_n2.sum(axis=0)
        d_e_r += d_pre_n @ cell.weights["w_nx"]
        gated = np.atleast_2d(d_pre_n * r)
        grads["w_nh"] += gated.T @ np.atleast_2d(trace.e_h)
        d_e_h += (d_pre_n * r) @ cell.weights["w_nh"]
        d_r_gate = d_pre_n * hidden_part
        for gate, d_act, act in (("z", d_z, z), ("r", d_r_gate, r)):
            dr, dh = _accumulate(cell, grads, gate, d_act * act * (1.0 - act), trace)
            d_e_r += dr
            d_e_h += dh
        return d_e_r, d_e_h, grads

    # rnn
    out = trace.output
    d_pre = d_out * (1.0 - out * out)
    dr, dh = _accumulate(cell, grads, "h", d_pre, trace)
    return d_e_r + dr, d_e_h + dh, grads
