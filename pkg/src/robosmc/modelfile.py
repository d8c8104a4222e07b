"""Loading networks and option overrides from YAML documents.

A model file is a mapping with ``channels``, ``variables`` (network
globals) and ``automata``; each automaton carries ``name``,
``initial``, optional local ``variables``, ``locations`` (name,
optional invariant, optional rates mapping) and ``edges`` (source,
target, optional guard/sync/weight/eager and an ``updates`` list of
``var = expr`` strings).  Guards, invariants, weights and updates use
the query expression syntax.  The same loader also resolves the two
built-in models and applies option overrides mirroring the
EnergyTable / RobotSpec / EnvSpec fields.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .automata import (
    Edge,
    HybridAutomaton,
    Location,
    ModelError,
    Network,
    Variable,
    validate_network,
)
from .casestudy import (
    EnergyTable,
    EnvSpec,
    RobotSpec,
    build_comparison,
    build_single,
)
from .predictor import Thresholds

BUILTIN_MODELS = ("casestudy", "casestudy-compare")


class ModelFileError(ModelError):
    """A model or option document does not fit the schema."""


def _fail(path, message) -> ModelFileError:
    prefix = f"{path}: " if path else ""
    return ModelFileError(prefix + message)


def _mapping(doc, what, path):
    if not isinstance(doc, dict):
        raise _fail(path, f"{what} must be a mapping, got {type(doc).__name__}")
    return doc


def _known_keys(doc: dict, allowed: tuple, what: str, path):
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise _fail(path, f"unknown {what} key(s): {', '.join(unknown)}; "
                          f"expected {', '.join(allowed)}")


def _variable(doc, path) -> Variable:
    doc = _mapping(doc, "a variable entry", path)
    _known_keys(doc, ("name", "kind", "initial"), "variable", path)
    if "name" not in doc:
        raise _fail(path, "variable entry needs a name")
    try:
        return Variable(str(doc["name"]), str(doc.get("kind", "real")),
                        float(doc.get("initial", 0.0)))
    except (TypeError, ValueError) as exc:
        raise _fail(path, f"variable {doc['name']!r}: {exc}") from None


def _location(doc, path) -> Location:
    doc = _mapping(doc, "a location entry", path)
    _known_keys(doc, ("name", "invariant", "rates"), "location", path)
    if "name" not in doc:
        raise _fail(path, "location entry needs a name")
    rates = doc.get("rates") or {}
    rates = _mapping(rates, f"rates of location {doc['name']!r}", path)
    try:
        rates = {str(var): float(rate) for var, rate in rates.items()}
    except (TypeError, ValueError) as exc:
        raise _fail(path, f"location {doc['name']!r} rates: {exc}") from None
    return Location(str(doc["name"]), doc.get("invariant"), rates)


def _edge(doc, path) -> Edge:
    doc = _mapping(doc, "an edge entry", path)
    _known_keys(doc, ("source", "target", "guard", "sync", "weight",
                      "updates", "eager"), "edge", path)
    for key in ("source", "target"):
        if key not in doc:
            raise _fail(path, f"edge entry needs a {key}")
    updates = doc.get("updates") or []
    if isinstance(updates, str):
        updates = [updates]
    if not isinstance(updates, list):
        raise _fail(path, f"edge updates must be a list of 'var = expr' "
                          f"strings, got {type(updates).__name__}")
    return Edge(
        source=str(doc["source"]),
        target=str(doc["target"]),
        guard=doc.get("guard"),
        sync=doc.get("sync"),
        weight=doc.get("weight"),
        updates=tuple(str(u) for u in updates),
        eager=bool(doc.get("eager", False)),
    )


def _automaton(doc, path) -> HybridAutomaton:
    doc = _mapping(doc, "an automaton entry", path)
    _known_keys(doc, ("name", "initial", "variables", "locations", "edges"),
                "automaton", path)
    for key in ("name", "initial", "locations"):
        if key not in doc:
            raise _fail(path, f"automaton entry needs {key!r}")
    return HybridAutomaton(
        name=str(doc["name"]),
        initial=str(doc["initial"]),
        locations=tuple(_location(l, path) for l in doc["locations"] or ()),
        edges=tuple(_edge(e, path) for e in doc.get("edges") or ()),
        variables=tuple(_variable(v, path) for v in doc.get("variables") or ()),
    )


def parse_model(text: str, path=None) -> Network:
    """Build and validate a network from YAML text."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise _fail(path, f"not valid YAML: {exc}") from None
    doc = _mapping(doc, "the model document", path)
    _known_keys(doc, ("channels", "variables", "automata"), "model", path)
    if not doc.get("automata"):
        raise _fail(path, "the model declares no automata")
    network = Network(
        automata=tuple(_automaton(a, path) for a in doc["automata"]),
        channels=tuple(str(c) for c in doc.get("channels") or ()),
        variables=tuple(_variable(v, path) for v in doc.get("variables") or ()),
    )
    return validate_network(network)


def load_model(path) -> Network:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), path)


# ---------------------------------------------------------------------------
# Built-in models and option overrides
# ---------------------------------------------------------------------------

def _build_spec(cls, doc, what, path):
    doc = _mapping(doc, f"{what} options", path)
    names = {f.name for f in dataclasses.fields(cls)}
    _known_keys(doc, tuple(sorted(names)), what, path)
    kwargs = dict(doc)
    if cls is EnvSpec:
        if isinstance(kwargs.get("thresholds"), (list, tuple)):
            kwargs["thresholds"] = Thresholds(*kwargs["thresholds"])
        if "ranges" in kwargs:
            kwargs["ranges"] = tuple(tuple(r) for r in kwargs["ranges"])
        for key in ("initial_weights", "dest_weights"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
    if cls is RobotSpec:
        for key in ("pose_in_idle", "pose_ready_a", "pose_standby_c",
                    "pose_standby_b"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError, ModelError) as exc:
        raise _fail(path, f"{what} options: {exc}") from None


def load_options(path) -> dict:
    """Read an override document for the built-in models.

    Recognised sections: ``energy`` (EnergyTable fields), ``robot`` and
    ``robot2`` (RobotSpec fields), ``env`` (EnvSpec fields).
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise _fail(path, f"not valid YAML: {exc}") from None
    if doc is None:
        return {}
    doc = _mapping(doc, "the options document", path)
    _known_keys(doc, ("energy", "robot", "robot2", "env"), "options", path)
    out = {}
    if "energy" in doc:
        out["table"] = _build_spec(EnergyTable, doc["energy"], "energy", path)
    if "robot" in doc:
        out["robot"] = _build_spec(RobotSpec, doc["robot"], "robot", path)
    if "robot2" in doc:
        out["robot2"] = _build_spec(RobotSpec, doc["robot2"], "robot2", path)
    if "env" in doc:
        out["env"] = _build_spec(EnvSpec, doc["env"], "env", path)
    return out


def resolve_model(ref: str, options: dict | None = None) -> Network:
    """Turn a --model argument into a validated network.

    ``casestudy`` and ``casestudy-compare`` name the built-in models
    (honouring ``options`` from load_options); anything else is read
    as a model file path, which accepts no options.
    """
    options = options or {}
    if ref == "casestudy":
        extra = {k: v for k, v in options.items() if k != "robot2"}
        return validate_network(build_single(**extra))
    if ref == "casestudy-compare":
        return validate_network(build_comparison(**options))
    if options:
        raise ModelFileError(
            "option overrides only apply to the built-in models")
    return load_model(ref)
