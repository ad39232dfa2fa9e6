"""Data-driven failure-mode analysis.

Fits a small decision tree over categorical acquisition/test-status
attributes to the binary model-error indicator, flags partitions whose
error rate exceeds the overall rate, and tabulates errors stratified by
attribute pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .hierarchy import (
    DEFAULT_EPSILON,
    DEFAULT_THRESHOLD,
    Branch,
    ClassLabel,
    MULTICLASS,
    aggregate,
    branch_truth,
    multiclass_prediction,
    task_name,
)
from .records import PCR_VALUES, VIEW_VALUES, PredictionRecord

# Derived attribute name under which the reference class label is exposed
# to stratified tables.
CLASS_ATTRIBUTE = "class"
CLASS_TOKENS = tuple(label.token for label in ClassLabel)

DEFAULT_MAX_DEPTH = 2
DEFAULT_MIN_LEAF = 20


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered categorical attributes; order breaks split-quality ties."""

    attributes: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        for name, values in self.attributes:
            if len(values) < 2:
                raise ValueError(f"attribute {name!r} needs at least 2 values")
            if len(set(values)) != len(values):
                raise ValueError(f"attribute {name!r} has duplicate values")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    def values_for(self, name: str) -> tuple[str, ...]:
        for attr_name, values in self.attributes:
            if attr_name == name:
                return values
        raise KeyError(name)


def builtin_schema() -> AttributeSchema:
    """The built-in acquisition attributes: view and RT-PCR status."""
    return AttributeSchema((("view", VIEW_VALUES), ("pcr", PCR_VALUES)))


@dataclass(frozen=True)
class ErrorRecord:
    """One image's error flag plus its categorical attribute values."""

    image_id: str
    error: bool
    attributes: Mapping[str, str]


@dataclass
class ErrorTreeNode:
    errors: int
    instances: int
    split_attribute: str | None = None
    children: dict[str, "ErrorTreeNode"] = field(default_factory=dict)
    hot: bool = False

    @property
    def error_rate(self) -> float:
        return self.errors / self.instances

    def to_dict(self) -> dict:
        out = {
            "errors": self.errors,
            "instances": self.instances,
            "error_rate": self.error_rate,
            "split_attribute": self.split_attribute,
            "hot": self.hot,
        }
        out["children"] = {value: child.to_dict() for value, child in self.children.items()}
        return out


def _validate_records(records: Sequence[ErrorRecord], schema: AttributeSchema) -> None:
    for record in records:
        for name, values in schema.attributes:
            value = record.attributes.get(name)
            if value is None:
                raise ValueError(f"record {record.image_id!r} is missing attribute {name!r}")
            if value not in values:
                raise ValueError(
                    f"record {record.image_id!r} has unknown value {value!r} for attribute {name!r}"
                )


def _gini(errors: int, instances: int) -> float:
    rate = errors / instances
    return 2.0 * rate * (1.0 - rate)


def build_error_tree(
    records: Sequence[ErrorRecord],
    schema: AttributeSchema | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_leaf: int = DEFAULT_MIN_LEAF,
) -> ErrorTreeNode:
    """Greedy multiway decision tree over the error indicator.

    At each node the unused attribute with the largest weighted Gini
    impurity reduction is split on, one child per categorical value.  A
    split is rejected when it would leave any child below ``min_leaf``
    records or when no attribute reduces impurity; ties go to the earlier
    schema attribute.  Node ``hot`` flags mark error rates strictly above
    the root's.
    """
    if schema is None:
        schema = builtin_schema()
    if not records:
        raise ValueError("cannot analyse an empty record set")
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be at least 1")
    ordered = sorted(records, key=lambda r: r.image_id)
    _validate_records(ordered, schema)

    names = schema.names
    cardinalities = [len(schema.values_for(name)) for name in names]
    value_codes = [
        {value: code for code, value in enumerate(schema.values_for(name))} for name in names
    ]
    codes = np.empty((len(ordered), len(names)), dtype=np.int64)
    for row, record in enumerate(ordered):
        for col, name in enumerate(names):
            codes[row, col] = value_codes[col][record.attributes[name]]
    errors = np.array([record.error for record in ordered], dtype=np.int64)

    def grow(index: np.ndarray, used: frozenset[int], depth: int) -> ErrorTreeNode:
        n = int(index.size)
        e = int(errors[index].sum())
        node = ErrorTreeNode(errors=e, instances=n)
        if depth >= max_depth:
            return node
        parent_impurity = _gini(e, n)
        best_col = None
        best_weighted = None
        for col in range(len(names)):
            if col in used:
                continue
            col_codes = codes[index, col]
            counts = np.bincount(col_codes, minlength=cardinalities[col])
            if int(counts.min()) < min_leaf:
                continue
            error_counts = np.bincount(col_codes, weights=errors[index], minlength=cardinalities[col])
            weighted = 0.0
            for value_code in range(cardinalities[col]):
                n_v = int(counts[value_code])
                e_v = int(error_counts[value_code])
                weighted += (n_v / n) * _gini(e_v, n_v)
            if parent_impurity - weighted <= 0.0:
                continue
            if best_weighted is None or weighted < best_weighted:
                best_col = col
                best_weighted = weighted
        if best_col is None:
            return node
        node.split_attribute = names[best_col]
        for value_code, value in enumerate(schema.values_for(names[best_col])):
            child_index = index[codes[index, best_col] == value_code]
            node.children[value] = grow(child_index, used | {best_col}, depth + 1)
        return node

    root = grow(np.arange(len(ordered)), frozenset(), 0)

    def flag(node: ErrorTreeNode) -> None:
        # integer cross-multiplication keeps the strict comparison exact
        node.hot = node.errors * root.instances > root.errors * node.instances
        for child in node.children.values():
            flag(child)

    flag(root)
    return root


@dataclass(frozen=True)
class StratifiedErrorTable:
    """Errors/instances cross-tabulated over two categorical attributes."""

    row_attr: str
    col_attr: str
    row_values: tuple[str, ...]
    col_values: tuple[str, ...]
    errors: np.ndarray
    instances: np.ndarray

    def cell(self, row: int, col: int) -> tuple[int, int]:
        return int(self.errors[row, col]), int(self.instances[row, col])

    def row_total(self, row: int) -> tuple[int, int]:
        return int(self.errors[row].sum()), int(self.instances[row].sum())

    def col_total(self, col: int) -> tuple[int, int]:
        return int(self.errors[:, col].sum()), int(self.instances[:, col].sum())

    def grand_total(self) -> tuple[int, int]:
        return int(self.errors.sum()), int(self.instances.sum())


def _attribute_domain(
    attr: str, schema: AttributeSchema, records: Sequence[ErrorRecord]
) -> tuple[str, ...]:
    if attr in schema.names:
        return schema.values_for(attr)
    if attr == CLASS_ATTRIBUTE:
        for record in records:
            if CLASS_ATTRIBUTE not in record.attributes:
                raise ValueError(f"record {record.image_id!r} carries no derived class attribute")
        return CLASS_TOKENS
    raise ValueError(f"unknown attribute {attr!r}")


def stratify_errors(
    records: Sequence[ErrorRecord],
    row_attr: str,
    col_attr: str,
    schema: AttributeSchema | None = None,
) -> StratifiedErrorTable:
    """Exact error/instance counts per (row value, column value) stratum."""
    if schema is None:
        schema = builtin_schema()
    if row_attr == col_attr:
        raise ValueError("row and column attributes must differ")
    row_values = _attribute_domain(row_attr, schema, records)
    col_values = _attribute_domain(col_attr, schema, records)
    row_index = {value: i for i, value in enumerate(row_values)}
    col_index = {value: i for i, value in enumerate(col_values)}
    errors = np.zeros((len(row_values), len(col_values)), dtype=np.int64)
    instances = np.zeros_like(errors)
    for record in records:
        try:
            r = row_index[record.attributes[row_attr]]
            c = col_index[record.attributes[col_attr]]
        except KeyError as exc:
            raise ValueError(
                f"record {record.image_id!r} has unknown value {exc.args[0]!r}"
            ) from None
        instances[r, c] += 1
        if record.error:
            errors[r, c] += 1
    return StratifiedErrorTable(row_attr, col_attr, row_values, col_values, errors, instances)


def format_counts(errors: int, instances: int) -> str:
    """Render 'errors / instances (rate%)'; an empty stratum has no rate."""
    if instances == 0:
        return "0 / 0 (n/a)"
    return f"{errors} / {instances} ({100.0 * errors / instances:.1f}%)"


def emit_tree_dot(tree: ErrorTreeNode) -> str:
    """Serialize the tree as a DOT digraph; hot nodes are tinted."""
    lines = [
        "digraph error_tree {",
        "  rankdir=LR;",
        '  node [shape=box, style=filled, fontname="Helvetica"];',
    ]
    edges = []

    def walk(node: ErrorTreeNode, node_id: str) -> None:
        color = "#f4cccc" if node.hot else "#e8e8e8"
        lines.append(f'  {node_id} [fillcolor="{color}", label="{format_counts(node.errors, node.instances)}"];')
        for child_pos, (value, child) in enumerate(node.children.items()):
            child_id = f"{node_id}_{child_pos}"
            edges.append(f'  {node_id} -> {child_id} [label="{value}"];')
            walk(child, child_id)

    walk(tree, "n0")
    return "\n".join(lines + edges + ["}"]) + "\n"


def error_records_from_predictions(
    records: Sequence[PredictionRecord],
    task: Branch | str = Branch.SUGG,
    threshold: float = DEFAULT_THRESHOLD,
    epsilon: float = DEFAULT_EPSILON,
) -> list[ErrorRecord]:
    """Derive per-image error flags for a task, carrying view, pcr and the
    reference class as attributes.

    For branch tasks only applicable records (with a defined branch score)
    are emitted; for the multi-class task every record is.
    """
    out = []
    for record in records:
        if task == MULTICLASS:
            error = multiclass_prediction(record.probs) != record.label
        elif isinstance(task, Branch):
            truth = branch_truth(record.label, task)
            if truth is None:
                continue
            score = aggregate(record.probs, epsilon).score_for(task)
            if score is None:
                continue
            error = (score >= threshold) != truth
        else:
            raise ValueError(f"unknown task {task_name(task)!r}")
        out.append(
            ErrorRecord(
                image_id=record.image_id,
                error=error,
                attributes={
                    "view": record.view,
                    "pcr": record.pcr,
                    CLASS_ATTRIBUTE: record.label.token,
                },
            )
        )
    return out
