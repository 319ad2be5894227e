"""
Text, DOT and JSON renderings of predictive clustering trees.

The JSON document (schema "pct-tree/1") is lossless: `tree_from_json`
rebuilds a tree that routes and predicts exactly like the original.
"""

import json
import logging
from typing import Any, Dict, List

import numpy as np

from .exceptions import ContractError, ParseError
from .pct import CLASSIFICATION, LearnParams, Node, Split, Tree

logger = logging.getLogger(__name__)

TREE_SCHEMA = "pct-tree/1"
FORMATS = ("text", "dot", "json")


def _plain(value: Any) -> Any:
    """Numpy scalars and arrays to JSON-ready Python values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _format_prototype(tree: Tree, node: Node) -> str:
    if tree.mode == CLASSIFICATION:
        shares = ", ".join(f"{c}: {p:.3f}" for c, p in node.stats["proportions"].items())
        return f"class={node.prototype} [{shares}]"
    if not tree.target_names:
        return "no targets"
    return ", ".join(
        f"{name}={value:.4g}" for name, value in zip(tree.target_names, node.prototype)
    )


def _format_annotations(annotations: Dict[str, Any]) -> List[str]:
    lines = []
    for key, value in annotations.items():
        if isinstance(value, dict):
            value = " ".join(f"{k}={v}" for k, v in value.items())
        lines.append(f"{key}: {value}")
    return lines


def to_text(tree: Tree) -> str:
    """Indented rule list with per-leaf statistics."""
    lines: List[str] = []

    def walk(node: Node, indent: str) -> None:
        if node.is_leaf:
            lines.append(
                f"{indent}leaf {node.leaf_id} (n={node.n}): {_format_prototype(tree, node)}"
            )
            for extra in _format_annotations(node.annotations):
                lines.append(f"{indent}    {extra}")
            return
        lines.append(f"{indent}if {node.split.describe()}:  # n={node.n}")
        walk(node.left, indent + "    ")
        lines.append(f"{indent}else:")
        walk(node.right, indent + "    ")

    walk(tree.root, "")
    return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(tree: Tree) -> str:
    """Graphviz digraph; nodes numbered in preorder, left edges labelled 'yes'."""
    lines = ["digraph PCT {", '    node [shape=box, fontname="helvetica"] ;']
    counter = iter(range(tree.n_nodes))

    def walk(node: Node) -> int:
        node_id = next(counter)
        if node.is_leaf:
            label = f"leaf {node.leaf_id}\\nn = {node.n}\\n{_format_prototype(tree, node)}"
            for extra in _format_annotations(node.annotations):
                label += f"\\n{extra}"
            lines.append(f'    {node_id} [label="{_dot_escape(label)}"] ;')
            return node_id
        label = f"{node.split.describe()}\\nn = {node.n}"
        lines.append(f'    {node_id} [label="{_dot_escape(label)}"] ;')
        left_id = walk(node.left)
        lines.append(f'    {node_id} -> {left_id} [label="yes"] ;')
        right_id = walk(node.right)
        lines.append(f'    {node_id} -> {right_id} [label="no"] ;')
        return node_id

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _node_to_dict(node: Node) -> Dict:
    document = {
        "n": node.n,
        "prototype": _plain(node.prototype),
        "stats": {k: _plain(v) for k, v in node.stats.items()},
    }
    if node.is_leaf:
        document["leaf_id"] = node.leaf_id
        document["members"] = [_plain(m) for m in node.members]
        if node.annotations:
            document["annotations"] = node.annotations
        return document
    split = node.split
    document["split"] = {
        "column": split.column,
        "column_index": split.column_index,
        "kind": split.kind,
        "score": split.score,
        "threshold": split.threshold,
        "category": split.category,
    }
    document["left"] = _node_to_dict(node.left)
    document["right"] = _node_to_dict(node.right)
    return document


def tree_to_dict(tree: Tree) -> Dict:
    """JSON-ready document of the whole tree."""
    return {
        "schema": TREE_SCHEMA,
        "mode": tree.mode,
        "params": tree.params.to_dict(),
        "descriptive": list(tree.descriptive),
        "column_kinds": dict(tree.column_kinds),
        "target_names": list(tree.target_names),
        "root_variance": _plain(np.asarray(tree.root_variance, dtype=float)),
        "classes": list(tree.classes),
        "standardization": {k: list(v) for k, v in tree.standardization.items()},
        "root": _node_to_dict(tree.root),
    }


def to_json(tree: Tree, **extra) -> str:
    """Serialized tree document; `extra` keys (e.g. provenance) are added at top level."""
    document = tree_to_dict(tree)
    document.update(extra)
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def _node_from_dict(document: Dict, mode: str) -> Node:
    prototype = document["prototype"]
    if mode != CLASSIFICATION:
        prototype = np.asarray(prototype, dtype=float)
    node = Node(n=int(document["n"]), prototype=prototype, stats=dict(document["stats"]))
    if "split" not in document:
        node.leaf_id = document.get("leaf_id")
        node.members = list(document.get("members", []))
        node.annotations = dict(document.get("annotations", {}))
        return node
    split = document["split"]
    node.split = Split(
        column=split["column"],
        column_index=int(split["column_index"]),
        kind=split["kind"],
        score=float(split["score"]),
        threshold=split.get("threshold"),
        category=split.get("category"),
    )
    node.left = _node_from_dict(document["left"], mode)
    node.right = _node_from_dict(document["right"], mode)
    return node


def tree_from_dict(document: Dict) -> Tree:
    """Rebuild a tree from `tree_to_dict` output."""
    if document.get("schema") != TREE_SCHEMA:
        raise ParseError(f"unsupported tree schema {document.get('schema')!r}, expected {TREE_SCHEMA}")
    try:
        mode = document["mode"]
        return Tree(
            root=_node_from_dict(document["root"], mode),
            mode=mode,
            params=LearnParams(**document["params"]),
            descriptive=list(document["descriptive"]),
            column_kinds=dict(document["column_kinds"]),
            target_names=list(document["target_names"]),
            root_variance=np.asarray(document["root_variance"], dtype=float),
            classes=list(document.get("classes", [])),
            standardization={k: tuple(v) for k, v in document.get("standardization", {}).items()},
        )
    except (KeyError, TypeError) as e:
        raise ParseError(f"incomplete tree document: {e}")


def tree_from_json(text: str) -> Tree:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno)
    return tree_from_dict(document)


def export(tree: Tree, fmt: str, **extra) -> str:
    """Render `tree` as 'text', 'dot' or 'json'."""
    if fmt == "text":
        return to_text(tree)
    if fmt == "dot":
        return to_dot(tree)
    if fmt == "json":
        return to_json(tree, **extra)
    raise ContractError(f"unknown tree format '{fmt}', expected one of {FORMATS}")
