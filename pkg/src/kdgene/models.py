"""Model parameters and triple scoring for CP-N3, DistMult, and the gated
(KDGene) scorer, plus binary checkpoint serialization."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cells import (
    CELL_PARAM_NAMES,
    OUTPUT_MODES,
    CellTrace,
    InteractionCell,
    interact,
    new_cell,
)

MODEL_KINDS = ("cp_n3", "distmult", "kdgene")

CHECKPOINT_MAGIC = b"KDG1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIBBxx")
# kind byte: scorer identity (and cell kind for the gated scorer)
_KIND_CODES = {"cp_n3": 0, "kdgene+lstm": 1, "kdgene+gru": 2, "kdgene+rnn": 3, "distmult": 4}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


@dataclass
class ModelParams:
    """All trainable state: embedding tables plus the optional gated cell.

    A single entity table serves both head and tail lookups (DistMult's
    tying convention; directionality comes from reciprocal relations).
    CP-N3 and DistMult require d_r == d_e; the gated scorer does not.
    """

    kind: str
    entity_emb: np.ndarray      # (n_entities, d_e) float64
    relation_emb: np.ndarray    # (n_relations, d_r) float64
    cell: InteractionCell | None = None

    @property
    def n_entities(self) -> int:
        return self.entity_emb.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_emb.shape[0]

    @property
    def d_e(self) -> int:
        return self.entity_emb.shape[1]

    @property
    def d_r(self) -> int:
        return self.relation_emb.shape[1]

    @property
    def output_mode(self) -> str:
        return self.cell.output_mode if self.cell is not None else "standard"

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected {MODEL_KINDS}")
        if self.kind == "kdgene":
            if self.cell is None:
                raise ValueError("kdgene params require an interaction cell")
            self.cell.validate()
            if (self.cell.d_e, self.cell.d_r) != (self.d_e, self.d_r):
                raise ValueError(
                    f"cell dims ({self.cell.d_e}, {self.cell.d_r}) do not match "
                    f"embeddings ({self.d_e}, {self.d_r})"
                )
        else:
            if self.cell is not None:
                raise ValueError(f"{self.kind} does not take an interaction cell")
            if self.d_r != self.d_e:
                raise ValueError(f"{self.kind} requires d_r == d_e, got {self.d_r} != {self.d_e}")
        for name, arr in param_items(self):
            if not np.isfinite(arr).all():
                raise ValueError(f"non-finite values in parameter {name}")

    def copy(self) -> "ModelParams":
        cell = None
        if self.cell is not None:
            cell = InteractionCell(
                kind=self.cell.kind,
                output_mode=self.cell.output_mode,
                weights={k: v.copy() for k, v in self.cell.weights.items()},
            )
        return ModelParams(
            kind=self.kind,
            entity_emb=self.entity_emb.copy(),
            relation_emb=self.relation_emb.copy(),
            cell=cell,
        )


def param_items(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Flat parameter space in canonical (checkpoint) order."""
    items = [("entity_emb", params.entity_emb), ("relation_emb", params.relation_emb)]
    if params.cell is not None:
        for name in CELL_PARAM_NAMES[params.cell.kind]:
            items.append((name, params.cell.weights[name]))
    return items


def n_parameters(params: ModelParams) -> int:
    return sum(arr.size for _, arr in param_items(params))


def init_params(
    n_entities: int,
    n_relations: int,
    d_e: int,
    d_r: int,
    kind: str = "kdgene",
    seed: int = 0,
    cell_kind: str = "lstm",
    output_mode: str = "standard",
    scale: float = 0.01,
) -> ModelParams:
    """Draw all parameters i.i.d. uniform on (-scale, scale) under the seed.

    Draw order is fixed (entity table, relation table, cell weights in
    canonical order), so equal seeds give bitwise-equal parameters.
    """
    if min(n_entities, n_relations, d_e, d_r) <= 0:
        raise ValueError("all dimensions must be positive")
    if output_mode not in OUTPUT_MODES:
        raise ValueError(f"unknown output_mode {output_mode!r}")
    rng = np.random.default_rng(seed)
    entity_emb = rng.uniform(-scale, scale, (n_entities, d_e))
    relation_emb = rng.uniform(-scale, scale, (n_relations, d_r))
    cell = None
    if kind == "kdgene":
        cell = new_cell(cell_kind, d_e, d_r, output_mode=output_mode, rng=rng, scale=scale)
    params = ModelParams(kind=kind, entity_emb=entity_emb, relation_emb=relation_emb, cell=cell)
    params.validate()
    return params


def relation_update(
    params: ModelParams, e_r: np.ndarray, e_h: np.ndarray
) -> tuple[np.ndarray, CellTrace | None]:
    """Updated relation embedding: the cell output for kdgene, e_r otherwise."""
    if params.cell is None:
        return e_r, None
    return interact(params.cell, e_r, e_h)


def score_triple(params: ModelParams, h: int, r: int, t: int) -> float:
    """Trilinear score: sum_i e_h[i] * e_r'[i] * e_t[i]."""
    _check_ids(params, h, r, t)
    e_h = params.entity_emb[h]
    e_r = params.relation_emb[r]
    e_rp, _ = relation_update(params, e_r, e_h)
    return float(np.dot(e_h * e_rp, params.entity_emb[t]))


def score_all_tails(params: ModelParams, h: int, r: int) -> np.ndarray:
    """Scores against every entity at once: entity_emb @ (e_h * e_r')."""
    _check_ids(params, h, r)
    e_h = params.entity_emb[h]
    e_r = params.relation_emb[r]
    e_rp, _ = relation_update(params, e_r, e_h)
    return params.entity_emb @ (e_h * e_rp)


def _check_ids(params: ModelParams, h: int, r: int, t: int | None = None) -> None:
    if not 0 <= h < params.n_entities:
        raise ValueError(f"head id {h} out of range [0, {params.n_entities})")
    if not 0 <= r < params.n_relations:
        raise ValueError(f"relation id {r} out of range [0, {params.n_relations})")
    if t is not None and not 0 <= t < params.n_entities:
        raise ValueError(f"tail id {t} out of range [0, {params.n_entities})")


def _kind_code(params: ModelParams) -> int:
    if params.kind == "kdgene":
        return _KIND_CODES[f"kdgene+{params.cell.kind}"]
    return _KIND_CODES[params.kind]


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    entity_names: list[str] | None = None,
    relation_names: list[str] | None = None,
    entity_types: dict[int, str] | None = None,
) -> None:
    """Write header + little-endian float64 arrays; vocabulary as adjacent TSV.

    Array order: entity table, relation table, then cell weights in
    canonical order, each row-major.
    """
    mode_code = 1 if params.output_mode == "as_written" else 0
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        params.n_entities,
        params.n_relations,
        params.d_e,
        params.d_r,
        _kind_code(params),
        mode_code,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in param_items(params):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    if entity_names is not None and relation_names is not None:
        vocab_path = Path(str(path) + ".vocab.tsv")
        types = entity_types or {}
        with open(vocab_path, "w", encoding="utf-8", newline="\n") as fh:
            for eid, name in enumerate(entity_names):
                fh.write(f"e\t{eid}\t{name}\t{types.get(eid, '')}\n")
            for rid, name in enumerate(relation_names):
                fh.write(f"r\t{rid}\t{name}\t\n")


def load_checkpoint(path: str | Path) -> ModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, n_e, n_r, d_e, d_r, kind_code, mode_code = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if kind_code not in _KIND_NAMES:
        raise ValueError(f"{path}: unknown model kind code {kind_code}")
    kind_name = _KIND_NAMES[kind_code]
    output_mode = "as_written" if mode_code == 1 else "standard"

    offset = _HEADER.size

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(raw):
            raise ValueError(f"{path}: truncated checkpoint payload")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset = end
        return arr.reshape(shape).astype(np.float64)

    entity_emb = take((n_e, d_e))
    relation_emb = take((n_r, d_r))
    cell = None
    if kind_name.startswith("kdgene+"):
        cell_kind = kind_name.split("+", 1)[1]
        from .cells import cell_param_shapes

        weights = {
            name: take(shape)
            for name, shape in cell_param_shapes(cell_kind, d_e, d_r).items()
        }
        cell = InteractionCell(kind=cell_kind, output_mode=output_mode, weights=weights)
        kind = "kdgene"
    else:
        kind = kind_name
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes in checkpoint")
    params = ModelParams(kind=kind, entity_emb=entity_emb, relation_emb=relation_emb, cell=cell)
    params.validate()
    return params


def load_vocab(path: str | Path) -> tuple[list[str], list[str], dict[int, str]]:
    """Read the checkpoint-adjacent vocabulary TSV."""
    entity_names: list[str] = []
    relation_names: list[str] = []
    entity_types: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            kind, ident, name, tag = line.split("\t")
            if kind == "e":
                assert int(ident) == len(entity_names)
                entity_names.append(name)
                if tag:
                    entity_types[int(ident)] = tag
            else:
                assert int(ident) == len(relation_names)
                relation_names.append(name)
    return entity_names, relation_names, entity_types
