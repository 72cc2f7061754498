"""Structure-graph export for fitted models.

Nodes are input columns (layer 0) and latent factors (layer 1 and up).
Each child-to-parent edge carries weight alpha * I(child : parent); node
size is the factor's objective contribution. Zero-weight edges are never
emitted, and an edge threshold drops weak ones so dense adjacencies stay
readable when rendered.
"""

from __future__ import annotations

import numpy as np

from .hierarchy import CorexHierarchy
from .layer import CorexLayer


def _layers_of(model: CorexLayer | CorexHierarchy) -> list[CorexLayer]:
    if isinstance(model, CorexLayer):
        model._check_fitted()
        return [model]
    model._check_fitted()
    return list(model.layers_)


def build_graph(
    model: CorexLayer | CorexHierarchy, edge_threshold: float = 0.0
) -> dict:
    """Node/edge dict for a fitted model.

    Edges are kept when their weight is positive and at least
    ``edge_threshold``. Node ids are ``x{i}`` for input columns and
    ``L{k}F{j}`` for factors; input nodes carry the column name as their
    label.
    """
    layers = _layers_of(model)
    nodes: list[dict] = []
    edges: list[dict] = []
    for i, col in enumerate(layers[0].schema_):
        nodes.append({"id": f"x{i}", "layer": 0, "size": 0.0, "label": col.name})
    for k, layer in enumerate(layers, start=1):
        m = int(layer.n_factors)
        for j in range(m):
            nodes.append(
                {
                    "id": f"L{k}F{j}",
                    "layer": k,
                    "size": float(layer.tc_per_factor_[j]),
                    "label": f"Y{k}_{j}",
                }
            )
        weights = layer.alpha_ * layer.mi_
        child = "x{}" if k == 1 else f"L{k - 1}F{{}}"
        for i in range(weights.shape[0]):
            for j in range(m):
                w = float(weights[i, j])
                if w > 0.0 and w >= float(edge_threshold):
                    edges.append(
                        {
                            "child": child.format(i),
                            "parent": f"L{k}F{j}",
                            "weight": w,
                        }
                    )
    return {"nodes": nodes, "edges": edges}


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_to_dot(graph: dict) -> str:
    """Render the node/edge dict as a DOT digraph.

    Factor node width grows with contribution, edge penwidth with weight,
    both relative to the largest value present.
    """
    sizes = [n["size"] for n in graph["nodes"] if n["layer"] > 0]
    max_size = max(sizes) if sizes else 0.0
    max_weight = max((e["weight"] for e in graph["edges"]), default=0.0)
    lines = ["digraph corex {", "  rankdir=BT;"]
    for node in graph["nodes"]:
        name = _dot_quote(node["id"])
        label = _dot_quote(node["label"])
        if node["layer"] == 0:
            lines.append(f"  {name} [label={label}, shape=box, width=0.50];")
        else:
            rel = node["size"] / max_size if max_size > 0 else 0.0
            width = 0.5 + 1.5 * rel
            lines.append(
                f"  {name} [label={label}, shape=ellipse, width={width:.2f}];"
            )
    for edge in graph["edges"]:
        rel = edge["weight"] / max_weight if max_weight > 0 else 0.0
        penwidth = 0.5 + 4.0 * rel
        lines.append(
            f"  {_dot_quote(edge['child'])} -> {_dot_quote(edge['parent'])} "
            f"[penwidth={penwidth:.2f}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
