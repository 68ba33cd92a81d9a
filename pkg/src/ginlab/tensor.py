"""Minimal dense tensor engine: double-precision values, a recorded tape, and
the reverse-mode rules for every primitive the message-passing models use."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operands have incompatible shapes; message names both."""


class Tensor:
    """Dense float64 array with an optional gradient accumulator."""

    __slots__ = ("values", "grad")

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.values.shape})"


class Tape:
    """Ordered record of operations; backward replays it once, in reverse."""

    def __init__(self):
        self._records: list[Callable[[], None]] = []

    def record(self, backward_fn: Callable[[], None]) -> None:
        self._records.append(backward_fn)

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Tensor) -> None:
        if loss.values.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.values)
        for fn in reversed(self._records):
            fn()


def backward(loss: Tensor, tape: Tape) -> None:
    tape.backward(loss)


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor, tape: Tape | None = None, exact: bool = False) -> Tensor:
    """2-d matrix product. exact=True routes through einsum, whose per-element
    accumulation order is row-content deterministic (needed for bit-exact
    permutation invariance); the default uses BLAS."""
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    if exact:
        out = Tensor(np.einsum("ij,jk->ik", a.values, b.values))
    else:
        out = Tensor(a.values @ b.values)
    if tape is not None:
        av, bv = a.values, b.values

        def bwd():
            if out.grad is None:
                return
            _acc(a, out.grad @ bv.T)
            _acc(b, av.T @ out.grad)

        tape.record(bwd)
    return out


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    out = Tensor(a.values + b.values)
    if tape is not None:

        def bwd():
            if out.grad is None:
                return
            _acc(a, out.grad)
            _acc(b, out.grad)

        tape.record(bwd)
    return out


def add_bias(x: Tensor, bias: Tensor, tape: Tape | None = None) -> Tensor:
    """Row-broadcast add of a 1-d bias over a 2-d matrix."""
    if x.values.ndim != 2 or bias.values.ndim != 1 or x.shape[1] != bias.shape[0]:
        raise ShapeError(f"add_bias shapes incompatible: {x.shape} + {bias.shape}")
    out = Tensor(x.values + bias.values[None, :])
    if tape is not None:

        def bwd():
            if out.grad is None:
                return
            _acc(x, out.grad)
            _acc(bias, out.grad.sum(axis=0))

        tape.record(bwd)
    return out


def relu(x: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(np.maximum(x.values, 0.0))
    if tape is not None:
        mask = x.values > 0.0

        def bwd():
            if out.grad is None:
                return
            _acc(x, out.grad * mask)

        tape.record(bwd)
    return out


def concat(parts: Sequence[Tensor], axis: int = 1, tape: Tape | None = None) -> Tensor:
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    out = Tensor(np.concatenate([p.values for p in parts], axis=axis))
    if tape is not None:
        sizes = [p.values.shape[axis] for p in parts]
        splits = np.cumsum(sizes)[:-1]

        def bwd():
            if out.grad is None:
                return
            for p, g in zip(parts, np.split(out.grad, splits, axis=axis)):
                _acc(p, g)

        tape.record(bwd)
    return out


def scale_combine(
    h: Tensor, agg: Tensor, eps: Tensor | float, tape: Tape | None = None
) -> Tensor:
    """(1 + eps) * h + agg, with eps either a fixed scalar or a learnable
    one-element tensor."""
    if h.shape != agg.shape:
        raise ShapeError(f"scale_combine shapes differ: {h.shape} vs {agg.shape}")
    eps_val = float(eps.values.reshape(())) if isinstance(eps, Tensor) else float(eps)
    out = Tensor((1.0 + eps_val) * h.values + agg.values)
    if tape is not None:
        hv = h.values

        def bwd():
            if out.grad is None:
                return
            _acc(h, (1.0 + eps_val) * out.grad)
            _acc(agg, out.grad)
            if isinstance(eps, Tensor):
                _acc(eps, np.array([np.sum(out.grad * hv)]).reshape(eps.shape))

        tape.record(bwd)
    return out


def _canonical_segment_sums(
    rows: np.ndarray, offsets: np.ndarray, out: np.ndarray
) -> None:
    """Order-free segment sums: lexsort each segment's rows, collapse equal
    rows to count * row, reduce the distinct terms.

    The result depends only on each segment's multiset of rows, and doubling
    the multiset doubles the result exactly (count scaling is a power-of-two
    multiply; the reduction tree over distinct rows keeps its shape).
    """
    for i in range(len(offsets) - 1):
        s, e = offsets[i], offsets[i + 1]
        if e - s == 0:
            continue
        if e - s == 1:
            out[i] = rows[s]
            continue
        block = rows[s:e]
        block = block[np.lexsort(block[:, ::-1].T)]
        boundaries = np.concatenate(
            ([0], np.flatnonzero(np.any(np.diff(block, axis=0) != 0.0, axis=1)) + 1)
        )
        counts = np.diff(np.concatenate((boundaries, [block.shape[0]])))
        terms = block[boundaries] * counts[:, None].astype(np.float64)
        out[i] = terms.sum(axis=0)


def segment_reduce(
    x: Tensor,
    gather: np.ndarray,
    offsets: np.ndarray,
    op: str,
    tape: Tape | None = None,
    canonical: bool = False,
) -> Tensor:
    """Reduce rows of x over index segments.

    Segment i reduces x.values[gather[offsets[i]:offsets[i+1]]]. Empty
    segments produce the zero row (for mean and max too; zero is the identity
    the models rely on for isolated nodes). op is "sum", "mean", or "max".
    Max backward routes to the first maximal element in gather order.
    canonical=True sorts each segment's rows lexicographically before a
    sequential fold so the result is independent of gather order.
    """
    if x.values.ndim != 2:
        raise ShapeError(f"segment_reduce expects a 2-d tensor, got {x.shape}")
    if op not in ("sum", "mean", "max"):
        raise ValueError(f"unknown reduction {op!r}")
    gather = np.asarray(gather, dtype=np.intp)
    offsets = np.asarray(offsets, dtype=np.intp)
    num_segments = len(offsets) - 1
    counts = np.diff(offsets)
    rows = x.values[gather] if gather.size else np.zeros((0, x.shape[1]))

    nonempty = np.nonzero(counts > 0)[0]
    out_vals = np.zeros((num_segments, x.shape[1]), dtype=np.float64)
    if nonempty.size:
        if canonical and op != "max":
            _canonical_segment_sums(rows, offsets, out_vals)
            if op == "mean":
                out_vals[nonempty] /= counts[nonempty][:, None].astype(np.float64)
        else:
            # consecutive non-empty starts abut (empty segments have zero
            # width), so reduceat over them reduces exactly each segment
            starts = offsets[:-1][nonempty]
            ufunc = np.maximum if op == "max" else np.add
            reduced = ufunc.reduceat(rows, starts, axis=0)
            if op == "mean":
                reduced = reduced / counts[nonempty][:, None].astype(np.float64)
            out_vals[nonempty] = reduced
    out = Tensor(out_vals)

    if tape is not None:
        seg_of = np.repeat(np.arange(num_segments), counts)
        if op != "max" and gather.size:
            # scatter-add via sort + reduceat; much faster than np.add.at
            inv_order = np.argsort(gather, kind="stable")
            sorted_nodes = gather[inv_order]
            group_starts = np.concatenate(
                ([0], np.flatnonzero(np.diff(sorted_nodes)) + 1)
            )
            group_nodes = sorted_nodes[group_starts]

        def bwd():
            if out.grad is None:
                return
            g = np.zeros_like(x.values)
            if gather.size:
                if op == "max":
                    cols = np.arange(x.shape[1])
                    for i in range(num_segments):
                        s, e = offsets[i], offsets[i + 1]
                        if s == e:
                            continue
                        block = x.values[gather[s:e]]
                        am = np.argmax(block, axis=0)  # first max per column
                        np.add.at(g, (gather[s + am], cols), out.grad[i])
                else:
                    contrib = out.grad[seg_of]
                    if op == "mean":
                        scale = 1.0 / np.maximum(counts, 1)
                        contrib = contrib * scale[seg_of][:, None]
                    g[group_nodes] = np.add.reduceat(
                        contrib[inv_order], group_starts, axis=0
                    )
            _acc(x, g)

        tape.record(bwd)
    return out


def sum_all(x: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(np.array(x.values.sum()))
    if tape is not None:

        def bwd():
            if out.grad is None:
                return
            _acc(x, np.full_like(x.values, float(out.grad)))

        tape.record(bwd)
    return out


def softmax_cross_entropy(
    logits: Tensor, labels: np.ndarray, tape: Tape | None = None
) -> Tensor:
    """Mean negative log-likelihood of integer labels under row softmax."""
    if logits.values.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects 2-d logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.intp)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"labels shape {labels.shape} incompatible with logits {logits.shape}"
        )
    z = logits.values
    shifted = z - z.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    denom = expz.sum(axis=1, keepdims=True)
    logp = shifted - np.log(denom)
    n = z.shape[0]
    out = Tensor(np.array(-logp[np.arange(n), labels].mean()))
    if tape is not None:
        softmax = expz / denom

        def bwd():
            if out.grad is None:
                return
            g = softmax.copy()
            g[np.arange(n), labels] -= 1.0
            _acc(logits, g * (float(out.grad) / n))

        tape.record(bwd)
    return out


def predictions(logits: Tensor) -> np.ndarray:
    return np.argmax(logits.values, axis=1)


# ---------------------------------------------------------------------------
# checkpoints: flat float64 blob + JSON shape manifest


def save_checkpoint(named_params: dict[str, Tensor], prefix: str | Path) -> None:
    prefix = Path(prefix)
    manifest = []
    offset = 0
    chunks = []
    for name, t in named_params.items():
        size = int(t.values.size)
        manifest.append(
            {"name": name, "shape": list(t.values.shape), "offset": offset, "size": size}
        )
        chunks.append(np.ascontiguousarray(t.values, dtype=np.float64).ravel())
        offset += size
    blob = np.concatenate(chunks) if chunks else np.zeros(0)
    prefix.with_suffix(".bin").write_bytes(blob.tobytes())
    prefix.with_suffix(".json").write_text(
        json.dumps({"dtype": "float64", "tensors": manifest}, indent=1) + "\n"
    )


def load_checkpoint(prefix: str | Path) -> dict[str, np.ndarray]:
    prefix = Path(prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text())
    blob = np.frombuffer(prefix.with_suffix(".bin").read_bytes(), dtype=np.float64)
    out = {}
    for entry in manifest["tensors"]:
        chunk = blob[entry["offset"] : entry["offset"] + entry["size"]]
        out[entry["name"]] = chunk.reshape(entry["shape"]).copy()
    return out


def load_checkpoint_into(named_params: dict[str, Tensor], prefix: str | Path) -> None:
    loaded = load_checkpoint(prefix)
    for name, t in named_params.items():
        if name not in loaded:
            raise KeyError(f"checkpoint is missing tensor {name!r}")
        if loaded[name].shape != t.values.shape:
            raise ShapeError(
                f"checkpoint tensor {name!r} has shape {loaded[name].shape}, "
                f"expected {t.values.shape}"
            )
        t.values = loaded[name]
