"""Text formats.

* matrix file: point count, optional labels line, then the strictly lower
  triangle one row per line (row ``i`` has ``i`` entries).  Entries are
  integers, decimals or ``p/q``.  ``#`` starts a comment.
* edge-list file: ``u v w`` per line; an optional first line with a single
  integer gives the vertex count.
* structured files: one header line ``#coarse-trees <version> <kind>``
  followed by JSON.  Rationals are written as strings (``"9/5"``).
* DOT: one undirected graph per tree, vertices named ``(j,k,idx)``.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .covers import ColoredCover
from .embedding import DistortionReport, EmbeddingMap
from .errors import FormatError
from .fixtures import builtin
from .forest import EmbeddingForest, EmbeddingTree, TreeVertex, forest_from_parts
from .growth import GrowthProfile, LinearControl, StepControl
from .metric import FiniteMetricSpace, as_rational, format_rational, space_from_graph, validate_space
from .tower import CoverTower, TowerLevel

FORMAT_VERSION = 1
_HEADER = re.compile(r"^#coarse-trees (\d+) (\w+)\s*$")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# plain input formats ---------------------------------------------------------


def _lines(text: str) -> list[list[str]]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line.split())
    return out


def _rat(tok: str):
    try:
        return as_rational(tok)
    except (ValueError, ZeroDivisionError) as e:
        raise FormatError(f"not a rational number: {tok!r}") from e


def parse_matrix(text: str, validate: bool = True) -> FiniteMetricSpace:
    lines = _lines(text)
    if not lines or len(lines[0]) != 1:
        raise FormatError("matrix file must start with the point count")
    try:
        n = int(lines[0][0])
    except ValueError as e:
        raise FormatError("point count is not an integer") from e
    rest = lines[1:]
    labels = None
    if rest and n > 0 and len(rest[0]) == n:
        # row i of the triangle has i < n entries, so an n-token line is the labels
        labels, rest = rest[0], rest[1:]
    if len(rest) != max(n - 1, 0):
        raise FormatError(f"expected {max(n - 1, 0)} triangle rows, found {len(rest)}")
    table = [[0] * n for _ in range(n)]
    for i, row in enumerate(rest, start=1):
        if len(row) != i:
            raise FormatError(f"triangle row {i} has {len(row)} entries, expected {i}")
        for j, tok in enumerate(row):
            table[i][j] = table[j][i] = _rat(tok)
    if validate:
        return validate_space(table, labels)
    return FiniteMetricSpace.from_rationals(table, labels)


def format_matrix(space: FiniteMetricSpace) -> str:
    out = [str(space.n)]
    if space.labels != tuple(str(i) for i in range(space.n)):
        out.append(" ".join(space.labels))
    for i in range(1, space.n):
        out.append(" ".join(format_rational(space.dist(i, j)) for j in range(i)))
    return "\n".join(out) + "\n"


def parse_edges(text: str) -> FiniteMetricSpace:
    lines = _lines(text)
    n = None
    if lines and len(lines[0]) == 1:
        try:
            n = int(lines[0][0])
        except ValueError as e:
            raise FormatError("vertex count is not an integer") from e
        lines = lines[1:]
    edges = []
    for row in lines:
        if len(row) != 3:
            raise FormatError(f"edge line needs 'u v w', got {' '.join(row)!r}")
        try:
            u, v = int(row[0]), int(row[1])
        except ValueError as e:
            raise FormatError(f"bad vertex in {' '.join(row)!r}") from e
        edges.append((u, v, _rat(row[2])))
    if n is None:
        n = 1 + max((max(u, v) for u, v, _ in edges), default=0)
    return space_from_graph(edges, n)


def load_space(source: str) -> FiniteMetricSpace:
    """``matrix:FILE``, ``edges:FILE`` or a built-in fixture name."""
    kind, _, rest = source.partition(":")
    try:
        if kind == "matrix":
            return parse_matrix(Path(rest).read_text())
        if kind == "edges":
            return parse_edges(Path(rest).read_text())
    except OSError as e:
        raise FormatError(str(e)) from e
    try:
        return builtin(source)
    except ValueError as e:
        raise FormatError(str(e)) from e


# structured format -------------------------------------------------------------


def dumps(kind: str, payload: dict) -> str:
    """Header line plus JSON, one top-level key per line and one list item per
    line for the long lists, so diffs stay readable."""
    out = [f"#coarse-trees {FORMAT_VERSION} {kind}", "{"]
    items = list(payload.items())
    for n, (key, value) in enumerate(items):
        sep = "," if n < len(items) - 1 else ""
        if isinstance(value, list) and value and isinstance(value[0], (list, dict)):
            out.append(f"{json.dumps(key)}: [")
            for m, item in enumerate(value):
                comma = "," if m < len(value) - 1 else ""
                out.append("  " + json.dumps(item, separators=(",", ":")) + comma)
            out.append("]" + sep)
        else:
            out.append(f"{json.dumps(key)}: {json.dumps(value, separators=(',', ':'))}{sep}")
    out.append("}")
    return "\n".join(out) + "\n"


def loads(text: str, kind: str | None = None) -> tuple[str, dict]:
    head, _, body = text.partition("\n")
    m = _HEADER.match(head)
    if not m:
        raise FormatError("missing '#coarse-trees <version> <kind>' header")
    version, found = int(m.group(1)), m.group(2)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if kind is not None and found != kind:
        raise FormatError(f"expected a {kind} file, found {found}")
    try:
        return found, json.loads(body)
    except json.JSONDecodeError as e:
        raise FormatError(f"bad JSON body: {e}") from e


def _r(value) -> str:
    return format_rational(value)


def profile_to_dict(p: GrowthProfile) -> dict:
    fp = p.f_prime
    if isinstance(fp, LinearControl):
        f = {"kind": "linear", "a": _r(fp.a), "b": _r(fp.b)}
    elif isinstance(fp, StepControl):
        f = {"kind": "step", "table": [[_r(r), _r(v)] for r, v in fp.table], "tail": _r(fp.tail)}
    else:
        raise FormatError(f"cannot serialize control function {fp!r}")
    return {"f_prime": f, "growth_constant": _r(p.growth_constant), "g0": _r(p.g0)}


def profile_from_dict(d: dict) -> GrowthProfile:
    f = d["f_prime"]
    if f["kind"] == "linear":
        fp = LinearControl(as_rational(f["a"]), as_rational(f["b"]))
    elif f["kind"] == "step":
        fp = StepControl(tuple((r, v) for r, v in f["table"]), f["tail"])
    else:
        raise FormatError(f"unknown control function kind {f['kind']!r}")
    return GrowthProfile(fp, as_rational(d["growth_constant"]), as_rational(d["g0"]))


def cover_to_dict(c: ColoredCover) -> dict:
    return {
        "scale": _r(c.scale),
        "diameter_bound": _r(c.diameter_bound),
        "colors": [[e.indices.tolist() for e in fam] for fam in c.colors],
    }


def cover_from_dict(d: dict, space: FiniteMetricSpace) -> ColoredCover:
    colors = tuple(tuple(space.subset(e) for e in fam) for fam in d["colors"])
    return ColoredCover(space, colors, as_rational(d["scale"]), as_rational(d["diameter_bound"]))


def tower_to_dict(t: CoverTower) -> dict:
    return {
        "points": t.space.n,
        "num_colors": t.num_colors,
        "basepoint": t.basepoint,
        "profile": profile_to_dict(t.profile),
        "levels": [
            {"k": lvl.k, "scale": _r(lvl.scale), "permutation": list(lvl.permutation), "cover": cover_to_dict(lvl.cover)}
            for lvl in t.levels
        ],
    }


def tower_from_dict(d: dict, space: FiniteMetricSpace) -> CoverTower:
    if d["points"] != space.n:
        raise FormatError(f"tower is for {d['points']} points, space has {space.n}")
    levels = [
        TowerLevel(int(l["k"]), as_rational(l["scale"]), cover_from_dict(l["cover"], space), tuple(l["permutation"]))
        for l in d["levels"]
    ]
    return CoverTower(space, int(d["num_colors"]), int(d["basepoint"]), profile_from_dict(d["profile"]), levels)


def forest_to_dict(f: EmbeddingForest) -> dict:
    return {
        "trees": [
            {
                "color": t.color,
                "vertices": [[v.level, v.element_index] for v in t.vertices],
                "parent": list(t.parent),
                "edges": [list(e) for e in sorted(t.edges)],
            }
            for t in f.trees
        ]
    }


def forest_from_dict(d: dict, tower: CoverTower) -> EmbeddingForest:
    try:
        return forest_from_parts(
            tower,
            [(t["color"], [tuple(v) for v in t["vertices"]], t["parent"], [tuple(e) for e in t["edges"]]) for t in d["trees"]],
        )
    except (IndexError, KeyError) as e:
        raise FormatError(f"forest does not match tower: {e}") from e


def map_to_dict(m: EmbeddingMap) -> dict:
    return {"psi": m.psi.tolist(), "phi": m.phi.tolist()}


def map_from_dict(d: dict, tower: CoverTower, forest: EmbeddingForest) -> EmbeddingMap:
    psi = np.array(d["psi"], dtype=np.int64).reshape(-1, tower.num_colors)
    phi = np.array(d["phi"], dtype=np.int64).reshape(-1, tower.num_colors)
    if psi.shape[0] != tower.space.n or phi.shape != psi.shape:
        raise FormatError("map table has the wrong shape")
    return EmbeddingMap(tower, forest, psi, phi)


def report_to_dict(r: DistortionReport) -> dict:
    return {
        "passed": r.passed,
        "expansive": r.expansive,
        "proper": r.proper,
        "pairs_checked": r.pairs_checked,
        "sampling": r.sampling,
        "denominator": r.denominator,
        "num_colors": r.num_colors,
        "expansive_margin": _r(r.expansive_margin),
        "num_expansive_violations": r.num_expansive_violations,
        "expansive_witnesses": [[x, y, _r(d), k] for x, y, d, k in r.expansive_witnesses],
        "num_proper_violations": r.num_proper_violations,
        "proper_violations": [[x, y, _r(d), k, _r(b)] for x, y, d, k, b in r.proper_violations],
        "h_violations": [[_r(t), d if d != float("inf") else "inf", h] for t, d, h in r.h_violations],
        "map_violations": r.map_violations,
        "envelope": [[t, hi, lo] for t, hi, lo in zip(r.env_t, r.env_max, r.env_min)],
    }


def report_from_dict(d: dict) -> DistortionReport:
    r = DistortionReport(int(d["denominator"]), int(d["num_colors"]))
    r.pairs_checked = d["pairs_checked"]
    r.sampling = d["sampling"]
    r.expansive_margin = as_rational(d["expansive_margin"])
    r.num_expansive_violations = d["num_expansive_violations"]
    r.expansive_witnesses = [(x, y, as_rational(dd), k) for x, y, dd, k in d["expansive_witnesses"]]
    r.num_proper_violations = d["num_proper_violations"]
    r.proper_violations = [(x, y, as_rational(dd), k, as_rational(b)) for x, y, dd, k, b in d["proper_violations"]]
    r.h_violations = [(as_rational(t), float("inf") if dd == "inf" else dd, h) for t, dd, h in d["h_violations"]]
    r.map_violations = d["map_violations"]
    env = d["envelope"]
    r.env_t = [e[0] for e in env]
    r.env_max = [e[1] for e in env]
    r.env_min = [e[2] for e in env]
    return r


# DOT ---------------------------------------------------------------------------


def tree_to_dot(tree: EmbeddingTree) -> str:
    out = [f"graph T{tree.color} {{"]
    for v in tree.vertices:
        members = " ".join(map(str, v.element.indices.tolist()))
        out.append(f'  "{v.label()}" [level={v.level}, members="{members}"];')
    for a, b in sorted(tree.edges, key=lambda e: (tree.vertices[e[0]].key, tree.vertices[e[1]].key)):
        out.append(f'  "{tree.vertices[a].label()}" -- "{tree.vertices[b].label()}";')
    out.append("}")
    return "\n".join(out) + "\n"


_DOT_NODE = re.compile(r'^\s*"\((\d+),(\d+),(\d+)\)"\s*\[level=(\d+), members="([\d ]*)"\];\s*$')
_DOT_EDGE = re.compile(r'^\s*"\((\d+),(\d+),(\d+)\)"\s*--\s*"\((\d+),(\d+),(\d+)\)";\s*$')


def tree_from_dot(text: str, tower: CoverTower) -> EmbeddingTree:
    """Inverse of :func:`tree_to_dot`.  Parents are the higher-level neighbor
    with the smallest vertex id, matching how trees are built."""
    head = text.splitlines()[0] if text else ""
    m = re.match(r"^graph T(\d+) \{$", head)
    if not m:
        raise FormatError("not a tree DOT file")
    color = int(m.group(1))
    keys: list[tuple[int, int]] = []
    edges = []
    for line in text.splitlines()[1:]:
        if line.strip() == "}":
            break
        if mn := _DOT_NODE.match(line):
            c, k, i = int(mn.group(1)), int(mn.group(2)), int(mn.group(3))
            members = [int(x) for x in mn.group(5).split()]
            if c != color or k >= len(tower.levels) or i >= len(tower.family(k, c)) \
                    or tower.family(k, c)[i].indices.tolist() != members:
                raise FormatError(f"vertex ({c},{k},{i}) does not match the tower")
            keys.append((k, i))
        elif me := _DOT_EDGE.match(line):
            edges.append(((int(me.group(2)), int(me.group(3))), (int(me.group(5)), int(me.group(6)))))
        else:
            raise FormatError(f"unrecognised DOT line: {line!r}")
    index = {key: n for n, key in enumerate(keys)}
    try:
        id_edges = [(index[a], index[b]) for a, b in edges]
    except KeyError as e:
        raise FormatError(f"edge names an undeclared vertex {e}") from e
    parent: list[int | None] = [None] * len(keys)
    for a, b in id_edges:
        lo, hi = (a, b) if keys[a][0] < keys[b][0] else (b, a)
        if parent[lo] is None or hi < parent[lo]:
            parent[lo] = hi
    return forest_from_parts(tower, [(color, keys, parent, id_edges)]).trees[0]


def write_structured(path, kind: str, payload: dict) -> None:
    atomic_write(path, dumps(kind, payload))


def read_structured(path, kind: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FormatError(str(e)) from e
    return loads(text, kind)[1]


def to_jsonable(obj: Any):
    """Rationals to strings, tuples to lists; for printing witnesses."""
    if isinstance(obj, Fraction):
        return _r(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
