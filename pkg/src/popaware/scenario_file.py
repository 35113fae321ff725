"""YAML scenario files.

Layout::

    graph:
      groups: {SA: [SA1, SA2, ...], SB: [...]}
      edges: [[SA1, SA2], ...]
    flows:
      - {source: SA1, rate: 4.0, size: 512}
    link: {rate: 2000000}
    queue: {capacity: 64}
    run: {duration: 200, seed: 1, discipline: pop-aware, replications: 5, window: 1.0}

Unknown keys are rejected. Every error carries the line it refers to.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .simulator import Discipline, FlowSpec, Scenario, ScenarioError
from .social_graph import GraphError, SocialGraph

SECTIONS = {
    "graph": {"groups", "edges"},
    "flows": None,
    "link": {"rate"},
    "queue": {"capacity"},
    "run": {"duration", "seed", "discipline", "replications", "window"},
}
FLOW_KEYS = {"source", "rate", "size"}
REQUIRED = ("graph", "flows", "link", "queue", "run")


class ScenarioFileError(ValueError):
    def __init__(self, source: str, line: Optional[int], field: str, message: str):
        self.source, self.line, self.field = source, line, field
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {field + ': ' if field else ''}{message}")


class ParseError(ScenarioFileError):
    """The document is not well-formed or has the wrong shape."""


class ValidationError(ScenarioFileError):
    """The document is well-formed but describes an invalid scenario."""


def _lines(node: yaml.Node, path: str = "", out: Optional[Dict[str, int]] = None) -> Dict[str, int]:
    """Map dotted field paths (``flows[2].rate``) to 1-based line numbers."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = f"{path}.{k.value}" if path else str(k.value)
            _lines(v, sub, out)
            out[sub] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _lines(v, f"{path}[{i}]", out)
    return out


def _line_for(lines: Dict[str, int], field: str) -> Optional[int]:
    while field:
        if field in lines:
            return lines[field]
        cut = max(field.rfind("."), field.rfind("["))
        field = field[:cut] if cut > 0 else ""
    return lines.get("")


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else None
        raise ParseError(source, line, "", e.problem or str(e)) from e
    except yaml.YAMLError as e:
        raise ParseError(source, None, "", str(e)) from e
    if root is None or not isinstance(data, dict):
        raise ParseError(source, 1, "", "expected a mapping of sections")
    lines = _lines(root)

    def parse_fail(field: str, msg: str) -> ParseError:
        return ParseError(source, _line_for(lines, field), field, msg)

    def invalid(field: str, msg: str) -> ValidationError:
        return ValidationError(source, _line_for(lines, field), field, msg)

    for key in data:
        if key not in SECTIONS:
            raise parse_fail(str(key), f"unknown section {key!r}")
    for key in REQUIRED:
        if key not in data:
            raise parse_fail("", f"missing section {key!r}")
    for key, allowed in SECTIONS.items():
        if allowed is None:
            continue
        if not isinstance(data[key], dict):
            raise parse_fail(key, "expected a mapping")
        for sub in data[key]:
            if sub not in allowed:
                raise parse_fail(f"{key}.{sub}", f"unknown key {sub!r}")

    def get(section: str, key: str, typ, default: Any = None) -> Any:
        field = f"{section}.{key}"
        value = data[section].get(key, default)
        if value is None:
            raise parse_fail(field, "missing value")
        if typ is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, typ) or isinstance(value, bool):
            raise parse_fail(field, f"expected {typ.__name__}, got {type(value).__name__}")
        return value

    groups = get("graph", "groups", dict)
    for g, members in groups.items():
        if not isinstance(members, list) or not all(isinstance(n, (str, int)) for n in members):
            raise parse_fail(f"graph.groups.{g}", "expected a list of node ids")
    edges = data["graph"].get("edges", []) or []
    if not isinstance(edges, list):
        raise parse_fail("graph.edges", "expected a list of [a, b] pairs")
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2):
            raise parse_fail(f"graph.edges[{i}]", "expected a pair [a, b]")
    try:
        graph = SocialGraph(
            {str(g): [str(n) for n in members] for g, members in groups.items()},
            [(str(a), str(b)) for a, b in edges],
        )
    except GraphError as e:
        raise invalid("graph", str(e)) from e

    flows_raw = data["flows"]
    if not isinstance(flows_raw, list):
        raise parse_fail("flows", "expected a list of flows")
    flows = []
    for i, f in enumerate(flows_raw):
        field = f"flows[{i}]"
        if not isinstance(f, dict):
            raise parse_fail(field, "expected a mapping")
        for k in f:
            if k not in FLOW_KEYS:
                raise parse_fail(f"{field}.{k}", f"unknown key {k!r}")
        if "source" not in f or "rate" not in f:
            raise parse_fail(field, "flow needs 'source' and 'rate'")
        rate, size = f["rate"], f.get("size", 512)
        if isinstance(rate, bool) or not isinstance(rate, (int, float)):
            raise parse_fail(f"{field}.rate", "expected a number")
        if isinstance(size, bool) or not isinstance(size, int):
            raise parse_fail(f"{field}.size", "expected an integer byte count")
        flows.append(FlowSpec(str(f["source"]), float(rate), size))

    discipline = get("run", "discipline", str, Discipline.POP_AWARE.value)
    try:
        discipline = Discipline(discipline)
    except ValueError:
        choices = ", ".join(d.value for d in Discipline)
        raise parse_fail("run.discipline", f"expected one of {choices}, got {discipline!r}") from None

    scenario = Scenario(
        graph=graph,
        flows=tuple(flows),
        link_rate=get("link", "rate", float),
        queue_capacity=get("queue", "capacity", int),
        duration=get("run", "duration", float),
        discipline=discipline,
        seed=get("run", "seed", int, 1),
        replications=get("run", "replications", int, 1),
        window=get("run", "window", float, 1.0),
    )
    try:
        scenario.validate()
    except ScenarioError as e:
        raise invalid(e.field, str(e)) from e
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))


def dump_scenario(s: Scenario) -> str:
    """Serialise a scenario; ``parse_scenario`` of the result gives an equal scenario."""
    groups = {g: list(m) for g, m in s.graph.members.items()}
    order = {n: i for i, n in enumerate(n for m in groups.values() for n in m)}
    edges = sorted((sorted(e, key=order.get) for e in s.graph.edges), key=lambda e: (order[e[0]], order[e[1]]))
    doc = {
        "graph": {"groups": groups, "edges": [list(e) for e in edges]},
        "flows": [{"source": f.source, "rate": f.rate, "size": f.size} for f in s.flows],
        "link": {"rate": float(s.link_rate)},
        "queue": {"capacity": s.queue_capacity},
        "run": {
            "duration": float(s.duration),
            "seed": s.seed,
            "discipline": s.discipline.value,
            "replications": s.replications,
            "window": float(s.window),
        },
    }
    return _Dumper.dump(doc)


class _Dumper(yaml.SafeDumper):
    """Block style for sections, flow style for leaf lists and flow records."""

    @classmethod
    def dump(cls, doc) -> str:
        return yaml.dump(doc, Dumper=cls, sort_keys=False, width=100)


def _represent_list(dumper: yaml.SafeDumper, data: list):
    leaf = all(not isinstance(x, (list, dict)) for x in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=leaf)


def _represent_dict(dumper: yaml.SafeDumper, data: dict):
    leaf = all(not isinstance(x, (list, dict)) for x in data.values())
    return dumper.represent_mapping("tag:yaml.org,2002:map", data.items(), flow_style=leaf and "source" in data)


_Dumper.add_representer(list, _represent_list)
_Dumper.add_representer(dict, _represent_dict)
