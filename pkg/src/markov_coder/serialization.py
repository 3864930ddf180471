"""JSON/CSV formats, schema validation and atomic file output.

Every file format is validated field by field before any numerical code
runs; unknown fields are rejected with the offending name.  Primary outputs
are written atomically (temp file + rename) and CSV numerics carry 17
significant digits so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Any

import numpy as np

from .ace import TreeSource, TreeTopology
from .chain import LayeredChain
from .errors import CoderError, SchemaError
from .helmholtz import TwoLayerInstance
from .ladder import LeakageMatrix, leakage_from_spec
from .pmd import PmdConfig
from .prob import ProbVector, TransitionMatrix
from .softvq import EmpiricalInput


def expect_mapping(obj: Any, ctx: str) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(f"{ctx}: expected a JSON object")
    return obj


def check_fields(obj: dict, required: set[str], optional: set[str], ctx: str) -> None:
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"{ctx}: unknown field {key!r}")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{ctx}: missing field {key!r}")


def expect_number(obj: dict, key: str, ctx: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{ctx}: field {key!r} must be a number")
    return float(value)


def expect_int(obj: dict, key: str, ctx: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{ctx}: field {key!r} must be an integer")
    return int(value)


def expect_list(obj: dict, key: str, ctx: str) -> list:
    value = obj[key]
    if not isinstance(value, list):
        raise SchemaError(f"{ctx}: field {key!r} must be a list")
    return value


def expect_str(obj: dict, key: str, ctx: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"{ctx}: field {key!r} must be a string")
    return value


def _array(values, ctx: str, key: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{ctx}: field {key!r} is not numeric: {exc}") from exc
    return arr


# ---------------------------------------------------------------------------
# Chains (matrices are row-major nested lists)
# ---------------------------------------------------------------------------


def chain_to_dict(chain: LayeredChain) -> dict:
    return {
        "layer_sizes": list(chain.layer_sizes),
        "source_prior": chain.source_prior.probs.tolist(),
        "source_forward": [t.matrix.tolist() for t in chain.source_forward],
        "model_backward": [t.matrix.tolist() for t in chain.model_backward],
        "model_top": chain.model_top.probs.tolist(),
    }


def chain_from_dict(obj: Any, ctx: str = "chain spec") -> LayeredChain:
    obj = expect_mapping(obj, ctx)
    check_fields(
        obj,
        {"layer_sizes", "source_prior", "source_forward", "model_backward", "model_top"},
        set(),
        ctx,
    )
    sizes = [int(m) for m in expect_list(obj, "layer_sizes", ctx)]
    try:
        return LayeredChain(
            tuple(sizes),
            ProbVector.renormalized(_array(obj["source_prior"], ctx, "source_prior")),
            tuple(
                TransitionMatrix.renormalized(_array(m, ctx, "source_forward"))
                for m in expect_list(obj, "source_forward", ctx)
            ),
            tuple(
                TransitionMatrix.renormalized(_array(m, ctx, "model_backward"))
                for m in expect_list(obj, "model_backward", ctx)
            ),
            ProbVector.renormalized(_array(obj["model_top"], ctx, "model_top")),
        )
    except CoderError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def instance_from_dict(obj: Any, ctx: str = "hm instance") -> TwoLayerInstance:
    chain = chain_from_dict(obj, ctx)
    if chain.depth != 1:
        raise SchemaError(f"{ctx}: expected exactly 2 layers")
    return TwoLayerInstance(
        chain.source_prior,
        chain.source_forward[0],
        chain.model_backward[0],
        chain.model_top,
    )


# ---------------------------------------------------------------------------
# Codebooks and datasets
# ---------------------------------------------------------------------------


def codebook_to_dict(code) -> dict:
    return {
        "vectors": code.vectors.tolist(),
        "sigma": code.sigma,
        "volume": code.volume,
    }


def dataset_to_dict(data: EmpiricalInput, labels: np.ndarray | None = None) -> dict:
    out = {"points": data.points.tolist(), "weights": data.weights.tolist()}
    if labels is not None:
        out["labels"] = np.asarray(labels).tolist()
    return out


def dataset_from_dict(obj: Any, ctx: str = "dataset") -> tuple[EmpiricalInput, np.ndarray | None]:
    obj = expect_mapping(obj, ctx)
    check_fields(obj, {"points"}, {"weights", "labels"}, ctx)
    points = _array(obj["points"], ctx, "points")
    weights = _array(obj["weights"], ctx, "weights") if "weights" in obj else None
    try:
        data = (
            EmpiricalInput(points)
            if weights is None
            else EmpiricalInput.renormalized(points, weights)
        )
    except CoderError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc
    labels = np.asarray(obj["labels"]) if "labels" in obj else None
    return data, labels


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------


def tree_to_dict(ts: TreeSource) -> dict:
    topo = ts.topology
    return {
        "alphabets": [list(layer) for layer in topo.alphabets],
        "clusters": [[list(c) for c in layer] for layer in topo.clusters],
        # parent of cluster c in layer l is node c of layer l+1 by construction;
        # serialized explicitly so specs are self-describing
        "parents": [list(range(len(topo.clusters[l]))) for l in range(topo.depth)],
        "maps": [
            [m.ravel().tolist() for m in layer_maps] for layer_maps in ts.maps
        ],
        "layer0_joint": ts.layer0_joint.ravel().tolist(),
    }


def tree_from_dict(obj: Any, ctx: str = "tree spec") -> TreeSource:
    obj = expect_mapping(obj, ctx)
    check_fields(obj, {"alphabets", "clusters", "maps", "layer0_joint"}, {"parents"}, ctx)
    alphabets = tuple(
        tuple(int(a) for a in layer) for layer in expect_list(obj, "alphabets", ctx)
    )
    clusters = tuple(
        tuple(tuple(int(i) for i in c) for c in layer)
        for layer in expect_list(obj, "clusters", ctx)
    )
    if "parents" in obj:
        for l, parents in enumerate(expect_list(obj, "parents", ctx)):
            if list(parents) != list(range(len(clusters[l]))):
                raise SchemaError(f"{ctx}: parents of layer {l} must be the identity order")
    try:
        topo = TreeTopology(alphabets, clusters)
        maps = []
        for l, layer_maps in enumerate(expect_list(obj, "maps", ctx)):
            tables = []
            for c, flat in enumerate(layer_maps):
                members = topo.clusters[l][c]
                shape = tuple(alphabets[l][i] for i in members)
                tables.append(np.asarray(flat, dtype=int).reshape(shape))
            maps.append(tuple(tables))
        joint = _array(obj["layer0_joint"], ctx, "layer0_joint").reshape(alphabets[0])
        joint = joint / joint.sum()
        return TreeSource(topo, joint, tuple(maps))
    except CoderError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


# ---------------------------------------------------------------------------
# PMD configs and leakage specs
# ---------------------------------------------------------------------------


def pmd_config_from_dict(obj: Any, ctx: str = "pmd config") -> PmdConfig:
    obj = expect_mapping(obj, ctx)
    check_fields(obj, {"K"}, {"patches", "matrix", "prior"}, ctx)
    k = expect_int(obj, "K", ctx)
    if ("patches" in obj) == ("matrix" in obj):
        raise SchemaError(f"{ctx}: exactly one of 'patches' or 'matrix' is required")
    try:
        if "patches" in obj:
            patches = expect_list(obj, "patches", ctx)
            if len(patches) != k:
                raise SchemaError(f"{ctx}: 'patches' must list K index sets")
            m = max(max(p) for p in patches) + 1
            if "prior" in obj:
                prior = ProbVector.renormalized(_array(obj["prior"], ctx, "prior"))
                m = prior.m
            else:
                prior = None
            return PmdConfig.from_patches(patches, m, prior)
        matrix = _array(obj["matrix"], ctx, "matrix")
        if matrix.shape[0] != k:
            raise SchemaError(f"{ctx}: 'matrix' must have K rows")
        prior = (
            ProbVector.renormalized(_array(obj["prior"], ctx, "prior"))
            if "prior" in obj
            else ProbVector.uniform(matrix.shape[1])
        )
        return PmdConfig(matrix, prior)
    except CoderError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def leak_from_dict(obj: Any, m: int, ctx: str = "leak spec") -> LeakageMatrix:
    obj = expect_mapping(obj, ctx)
    check_fields(obj, {"topology"}, {"parents", "kernel"}, ctx)
    topology = expect_str(obj, "topology", ctx)
    if topology == "identity":
        return LeakageMatrix.identity(m)
    parents = expect_int(obj, "parents", ctx) if "parents" in obj else m
    kernel = obj.get("kernel", [1.0])
    try:
        return leakage_from_spec(topology, m, parents, kernel)
    except CoderError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj: Any) -> None:
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    """Comma-separated, LF endings, 17 significant digits on floats."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_json(path: str, ctx: str = "file") -> Any:
    try:
        with open(path, "r") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise SchemaError(f"{ctx}: no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{ctx}: invalid JSON in {path}: {exc}") from exc
