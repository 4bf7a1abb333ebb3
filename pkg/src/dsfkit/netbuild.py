"""Block-diagram networks: composition, demo topologies, topology reports.

A network has ``p`` scalar node signals ``y`` and ``m`` scalar inputs ``u``:

    y = Q(lam) y + P(lam) u

with strictly proper SISO blocks ``Q[i, j]`` (edge ``y_j -> y_i``, no self
loops) and ``P[i, j]`` (input ``u_j -> y_i``). Node and input indices are
0-based in the API and 1-based in network files and DOT labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import IllPosedError, PoleHitError, RegularityError, ValidationError
from .matrixnum import CONTINUOUS, check_domain, orthonormal_complement
from .realization import StateSpace, random_points
from .structure import sparsity_of


def _check_block(block: StateSpace, label: str) -> StateSpace:
    if not isinstance(block, StateSpace):
        raise ValidationError(f"{label}: block must be a state-space system")
    if block.shape != (1, 1):
        raise ValidationError(f"{label}: only SISO blocks are supported, got {block.shape}")
    if np.any(block.D != 0):
        raise ValidationError(f"{label}: block must be strictly proper (D = 0)")
    return block


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Nodes, inputs and the SISO blocks connecting them."""

    nodes: int
    inputs: int
    edges: dict = field(default_factory=dict)
    input_blocks: dict = field(default_factory=dict)
    domain: str = CONTINUOUS

    def __post_init__(self):
        check_domain(self.domain)
        if self.nodes < 1 or self.inputs < 0:
            raise ValidationError("a network needs at least one node and a non-negative input count")
        for (i, j), blk in self.edges.items():
            if not (0 <= i < self.nodes and 0 <= j < self.nodes):
                raise ValidationError(f"edge y{j + 1} -> y{i + 1} refers to a missing node")
            if i == j:
                raise ValidationError(f"self loop at node y{i + 1} is not allowed")
            _check_block(blk, f"edge y{j + 1} -> y{i + 1}")
        for (i, j), blk in self.input_blocks.items():
            if not (0 <= i < self.nodes and 0 <= j < self.inputs):
                raise ValidationError(f"input block u{j + 1} -> y{i + 1} is out of range")
            _check_block(blk, f"input block u{j + 1} -> y{i + 1}")

    def Q(self, lam) -> np.ndarray:
        out = np.zeros((self.nodes, self.nodes), dtype=complex)
        for (i, j), blk in self.edges.items():
            out[i, j] = blk.evaluate(lam)[0, 0]
        return out

    def P(self, lam) -> np.ndarray:
        out = np.zeros((self.nodes, self.inputs), dtype=complex)
        for (i, j), blk in self.input_blocks.items():
            out[i, j] = blk.evaluate(lam)[0, 0]
        return out

    def transfer(self, lam) -> np.ndarray:
        """``(I - Q(lam))^{-1} P(lam)`` from the declared blocks."""
        return np.linalg.solve(np.eye(self.nodes) - self.Q(lam), self.P(lam))

    def adjacency(self) -> np.ndarray:
        mask = np.zeros((self.nodes, self.nodes), dtype=bool)
        for i, j in self.edges:
            mask[i, j] = True
        return mask


def _first_order(pole: float, gain: float = 1.0, domain: str = CONTINUOUS) -> StateSpace:
    """``gain / (lam - pole)``."""
    return StateSpace([[pole]], [[1.0]], [[gain]], [[0.0]], domain)


def ring_spec() -> NetworkSpec:
    """Three-node ring ``y1 -> y2 -> y3 -> y1`` with ``1/(lam+1)`` edges and ``1/(lam+2)`` inputs."""
    edge = _first_order(-1.0)
    inp = _first_order(-2.0)
    return NetworkSpec(3, 3, {(1, 0): edge, (2, 1): edge, (0, 2): edge},
                       {(i, i): inp for i in range(3)})


def line_spec() -> NetworkSpec:
    """The ring with the closing edge ``y3 -> y1`` removed."""
    ring = ring_spec()
    edges = {k: v for k, v in ring.edges.items() if k != (0, 2)}
    return NetworkSpec(3, 3, edges, dict(ring.input_blocks))


DEMOS = {"ring": ring_spec, "line": line_spec}


def _check_well_posed(spec: NetworkSpec, rng, samples: int = 5):
    for lam in random_points(rng, samples, 3.0):
        try:
            M = np.eye(spec.nodes) - spec.Q(lam)
        except PoleHitError:
            continue
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] > 1e-10 * s[0]:
            return
    raise IllPosedError("I - Q(lam) is singular at every sample: the loop is ill-posed")


def compose(spec: NetworkSpec, rng=None) -> StateSpace:
    """Aggregate realization with output map exactly ``[I 0]``.

    Each node's block states are transformed locally to ``[y_i ; hidden]``
    (output row followed by an orthonormal complement), and all node outputs
    are ordered first. Hidden states therefore couple only through the node
    signals, which keeps the declared topology visible in the canonical
    structure function.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    _check_well_posed(spec, rng)
    p, m = spec.nodes, spec.inputs
    blocks = []  # (target node, kind, source, block)
    for (i, j), blk in sorted(spec.edges.items()):
        blocks.append((i, "y", j, blk))
    for (i, j), blk in sorted(spec.input_blocks.items()):
        blocks.append((i, "u", j, blk))
    offsets = np.cumsum([0] + [b[3].n for b in blocks])
    nx = int(offsets[-1])
    Aloc = scipy.linalg.block_diag(*[b[3].A for b in blocks]) if blocks else np.zeros((0, 0))
    Cy = np.zeros((p, nx))
    for k, (i, _, _, blk) in enumerate(blocks):
        Cy[i, offsets[k]:offsets[k + 1]] = blk.C[0]
    A = np.array(Aloc, dtype=float)
    B = np.zeros((nx, m))
    for k, (_, kind, j, blk) in enumerate(blocks):
        rows = slice(offsets[k], offsets[k + 1])
        if kind == "y":
            A[rows] += blk.B @ Cy[j:j + 1]
        else:
            B[rows, j] += blk.B[:, 0]
    # local transforms: node i's states -> [y_i ; complement]
    T = np.zeros((nx, nx))
    hidden_row = p
    for i in range(p):
        cols = np.flatnonzero([blocks[k][0] == i for k in range(len(blocks))
                               for _ in range(blocks[k][3].n)])
        if cols.size == 0 or not np.any(Cy[i, cols]):
            raise RegularityError(f"node y{i + 1} has no incoming block: its output is identically zero")
        c = Cy[i:i + 1, cols]
        comp = orthonormal_complement(c / np.linalg.norm(c))
        T[i, cols] = c[0]
        T[hidden_row:hidden_row + comp.shape[0], cols] = comp
        hidden_row += comp.shape[0]
    Tinv = np.linalg.inv(T)
    At = T @ A @ Tinv
    Bt = T @ B
    C = np.hstack([np.eye(p), np.zeros((p, nx - p))])
    return StateSpace(At, Bt, C, np.zeros((p, m)), spec.domain)


# --------------------------------------------------------------------------
# topology


@dataclass(frozen=True)
class Topology:
    nodes: int
    inputs: int
    edges: tuple  # (source j, target i): y_j -> y_i
    input_edges: tuple  # (input j, target i): u_j -> y_i
    dot: str

    def adjacency(self) -> np.ndarray:
        mask = np.zeros((self.nodes, self.nodes), dtype=bool)
        for j, i in self.edges:
            mask[i, j] = True
        return mask


def to_dot(nodes: int, inputs: int, edges, input_edges, name: str = "dsf") -> str:
    """Deterministic DOT text: nodes and edges in sorted order."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle];"]
    lines += [f"  y{i + 1};" for i in range(nodes)]
    lines += [f"  u{j + 1} [shape=box];" for j in range(inputs)]
    lines += [f"  y{j + 1} -> y{i + 1};" for j, i in sorted(edges)]
    lines += [f"  u{j + 1} -> y{i + 1} [style=dashed];" for j, i in sorted(input_edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"


def topology_report(dsf, tol_rel: float = 1e-9, nsamples: int = 30, rng=None,
                    name: str = "dsf") -> Topology:
    """Directed graph read off the sparsity of ``Q`` and ``P``."""
    rng = np.random.default_rng(0) if rng is None else rng
    q = sparsity_of(dsf.Q, tol_rel, nsamples, rng).mask
    pm = sparsity_of(dsf.P, tol_rel, nsamples, rng).mask
    p, m = pm.shape
    edges = tuple(sorted((int(j), int(i)) for i, j in zip(*np.nonzero(q)) if i != j))
    inputs = tuple(sorted((int(j), int(i)) for i, j in zip(*np.nonzero(pm))))
    return Topology(p, m, edges, inputs, to_dot(p, m, edges, inputs, name))


# --------------------------------------------------------------------------
# network files


def _block_to_dict(blk: StateSpace) -> dict:
    return {"A": blk.A.tolist(), "B": blk.B.tolist(), "C": blk.C.tolist(), "D": blk.D.tolist()}


def network_to_dict(spec: NetworkSpec) -> dict:
    return {
        "nodes": spec.nodes,
        "inputs": spec.inputs,
        "domain": spec.domain,
        "edges": [{"from": j + 1, "to": i + 1, "block": _block_to_dict(b)}
                  for (i, j), b in sorted(spec.edges.items())],
        "input_blocks": [{"from": j + 1, "to": i + 1, "block": _block_to_dict(b)}
                         for (i, j), b in sorted(spec.input_blocks.items())],
    }


def network_from_dict(data: dict) -> NetworkSpec:
    from .realization import system_from_dict

    if not isinstance(data, dict):
        raise ValidationError("network file must contain a JSON object")
    for key in ("nodes", "inputs"):
        if not isinstance(data.get(key), int) or isinstance(data.get(key), bool):
            raise ValidationError(f"field {key!r} must be an integer")
    domain = data.get("domain", CONTINUOUS)

    def read(key):
        out = {}
        for k, item in enumerate(data.get(key, [])):
            if not isinstance(item, dict) or not {"from", "to", "block"} <= item.keys():
                raise ValidationError(f"{key}[{k}] needs 'from', 'to' and 'block'")
            blk, _ = system_from_dict({**item["block"], "domain": domain})
            pair = (int(item["to"]) - 1, int(item["from"]) - 1)
            if pair in out:
                raise ValidationError(f"{key}[{k}] duplicates an earlier entry")
            out[pair] = blk
        return out

    return NetworkSpec(data["nodes"], data["inputs"], read("edges"), read("input_blocks"), domain)


def load_network(path) -> NetworkSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return network_from_dict(data)


__all__ = [
    "DEMOS",
    "NetworkSpec",
    "Topology",
    "compose",
    "line_spec",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "ring_spec",
    "to_dot",
    "topology_report",
]
