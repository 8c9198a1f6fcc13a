"""Reading and writing instance files.

An instance file is YAML.  Channels are written column-major, so every
inner list is the conditional pmf given one value of X::

    p_x: [0.25, 0.75]
    p_s_given_x: [[0.275, 0.725], [0.32, 0.68]]
    p_t_given_x: [[0.25, 0.75], [0.4, 0.6]]
    eps: 0.05
    rate: 0.75          # nats; "inf" disables the budget
    sweep:              # optional
      eps_grid: [0.005, 0.01]
      rate_grid: [0.75]
    oracle:             # optional OracleConfig overrides
      grid_resolution: 500

An optional ``sizes: {s: .., x: .., t: ..}`` block is checked against the
data.  Every error names the offending field and its line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import GeofairError, ParseError
from .geometry import ProblemInstance

KNOWN_KEYS = {"sizes", "p_x", "p_s_given_x", "p_t_given_x", "eps", "rate", "sweep", "oracle"}
ORACLE_KEYS = {"grid_resolution", "y_cardinality", "measure", "refine_candidates", "refine_points"}


@dataclass
class InstanceFile:
    instance: ProblemInstance
    eps_grid: Optional[list] = None
    rate_grid: Optional[list] = None
    oracle: dict = field(default_factory=dict)
    source: Optional[str] = None


def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Fields:
    def __init__(self, lines, source):
        self.lines, self.source = lines, source

    def fail(self, path, msg):
        line = None
        p = tuple(path)
        while line is None and p:
            line = self.lines.get(p)
            p = p[:-1]
        where = f"{self.source or '<string>'}:{line}" if line else (self.source or "<string>")
        name = ".".join(str(x) for x in path)
        raise ParseError(f"{where}: field '{name}': {msg}")

    def number(self, value, path, allow_inf=False):
        if isinstance(value, str) and allow_inf and value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        if isinstance(value, str):
            # YAML 1.1 reads exponent forms without a dot (1e-3) as strings.
            try:
                value = float(value)
            except ValueError:
                self.fail(path, f"expected a number, got {value!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        value = float(value)
        if math.isnan(value) or (math.isinf(value) and not allow_inf):
            self.fail(path, f"expected a finite number, got {value!r}")
        return value

    def vector(self, value, path, allow_inf=False):
        if not isinstance(value, list) or not value:
            self.fail(path, "expected a non-empty list of numbers")
        return [self.number(v, path + (i,), allow_inf) for i, v in enumerate(value)]

    def columns(self, value, path):
        if not isinstance(value, list) or not value:
            self.fail(path, "expected a list of columns")
        cols = [self.vector(c, path + (i,)) for i, c in enumerate(value)]
        if len({len(c) for c in cols}) != 1:
            self.fail(path, "columns have different lengths")
        return np.array(cols).T


def parse_instance(text: str, source: Optional[str] = None) -> InstanceFile:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source or '<string>'}:{mark.line + 1}" if mark else (source or "<string>")
        raise ParseError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    f = _Fields(_line_map(root) if root is not None else {}, source)
    if not isinstance(data, dict):
        f.fail((), "top level must be a mapping")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        key = sorted(map(str, unknown))[0]
        f.fail((key,), "unknown key")
    for key in ("p_x", "p_s_given_x", "p_t_given_x", "eps"):
        if key not in data:
            f.fail((key,), "missing required field")

    p_x = f.vector(data["p_x"], ("p_x",))
    psx = f.columns(data["p_s_given_x"], ("p_s_given_x",))
    ptx = f.columns(data["p_t_given_x"], ("p_t_given_x",))
    eps = f.number(data["eps"], ("eps",))
    rate = f.number(data.get("rate", math.inf), ("rate",), allow_inf=True)

    sizes = data.get("sizes")
    if sizes is not None:
        if not isinstance(sizes, dict) or set(sizes) - {"s", "x", "t"}:
            f.fail(("sizes",), "expected a mapping with keys among s, x, t")
        actual = {"x": len(p_x), "s": psx.shape[0], "t": ptx.shape[0]}
        for k, v in sizes.items():
            if v != actual[k]:
                f.fail(("sizes", k), f"declared {v} but the data has {actual[k]}")

    try:
        inst = ProblemInstance(p_x, psx, ptx, eps, rate)
    except GeofairError as exc:
        # Validation failures keep their own class (and exit code).
        exc.args = (f"{source or '<string>'}: {exc}",)
        raise

    eps_grid = rate_grid = None
    sweep = data.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or set(sweep) - {"eps_grid", "rate_grid"}:
            f.fail(("sweep",), "expected a mapping with eps_grid and/or rate_grid")
        if "eps_grid" in sweep:
            eps_grid = f.vector(sweep["eps_grid"], ("sweep", "eps_grid"))
        if "rate_grid" in sweep:
            rate_grid = f.vector(sweep["rate_grid"], ("sweep", "rate_grid"), allow_inf=True)

    oracle = data.get("oracle") or {}
    if not isinstance(oracle, dict) or set(oracle) - ORACLE_KEYS:
        f.fail(("oracle",), f"expected a mapping with keys among {sorted(ORACLE_KEYS)}")
    return InstanceFile(inst, eps_grid, rate_grid, dict(oracle), source)


def load_instance(path) -> InstanceFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_instance(text, str(path))


def bundled_instance_path() -> Path:
    return Path(str(resources.files("geofair") / "data" / "worked_example.yaml"))


def bundled_instance() -> InstanceFile:
    """The binary worked example shipped with the package."""
    return load_instance(bundled_instance_path())


def _num(x: float):
    return "inf" if math.isinf(x) else float(x)


def dump_instance(f: InstanceFile) -> str:
    inst = f.instance
    n_s, n_t, n_x = inst.sizes
    doc = {
        "sizes": {"s": n_s, "x": n_x, "t": n_t},
        "p_x": [float(v) for v in inst.p_x.probs],
        "p_s_given_x": [[float(v) for v in col] for col in inst.p_s_given_x.matrix.T],
        "p_t_given_x": [[float(v) for v in col] for col in inst.p_t_given_x.matrix.T],
        "eps": float(inst.eps),
        "rate": _num(inst.rate),
    }
    sweep = {}
    if f.eps_grid is not None:
        sweep["eps_grid"] = [float(v) for v in f.eps_grid]
    if f.rate_grid is not None:
        sweep["rate_grid"] = [_num(v) for v in f.rate_grid]
    if sweep:
        doc["sweep"] = sweep
    if f.oracle:
        doc["oracle"] = dict(f.oracle)
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
