"""JSON run configuration: schema validation with line-numbered diagnostics.

A run configuration is a single JSON object with the optional blocks below;
unknown keys are rejected everywhere. See README.md for a commented example.

* ``model``: ``{"kind": "affine", "constraints": [{"q": [...], "R": [[...]]}], "nominal": [1, ...],
  "control_bound": null}`` for fixed constraint data, or ``{"kind": "unicycle"}`` to take the
  state-dependent problem of the ``scenario`` block.
* ``samples``: ``{"values": [[...], ...]}`` or ``{"sampler": [["normal", mean, var], ...], "N": n}``.
* ``ambiguity``: ``r``, ``eps`` (default ``1/N``), ``eps_bar``, ``c1``, ``c2``, ``a``.
* ``certificates``: ``tol``, ``require_invertible``, ``slack`` (one value per constraint), ``slack_bound``.
* ``scenario``: any field of :class:`drsafe.sim.ScenarioConfig`.
* ``bench``: sweep sizes, repeats, template and methods.
* ``lipschitz``: radii, directions and strict-feasibility margin.
* ``output``: ``dir`` and ``svg``; ``seed`` at top level.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields

import numpy as np

from .dro import AmbiguityConfig, SampleSet, SynthesisProblem
from .exceptions import ConfigError
from .feasibility import SlackCertificate
from .model import ConstraintData
from .numerics import DEFAULT_TOL

# -- a tiny schema language ----------------------------------------------------
# A spec is a type name, a tuple of allowed literals, a dict (nested object),
# or ("list", item_spec[, min_len]); a leading "?" marks a nullable scalar.

NUMBER, INT, BOOL, STR = "number", "int", "bool", "str"


def _listof(item, min_len: int = 0):
    return ("list", item, min_len)


VECTOR = _listof(NUMBER, 1)
MATRIX = _listof(VECTOR, 1)
SAMPLER_ENTRY = ("tuple3", ("normal", "uniform", "beta"), NUMBER, NUMBER)

SCHEMA = {
    "seed": INT,
    "model": {
        "kind": ("affine", "unicycle"),
        "constraints": _listof({"q": VECTOR, "R": MATRIX, "label": STR}, 1),
        "nominal": VECTOR,
        "control_bound": "?number",
    },
    "samples": {"values": MATRIX, "sampler": _listof(SAMPLER_ENTRY, 1), "N": INT},
    "ambiguity": {"r": NUMBER, "eps": NUMBER, "eps_bar": NUMBER, "c1": NUMBER, "c2": NUMBER, "a": NUMBER},
    "certificates": {"tol": NUMBER, "require_invertible": BOOL, "slack": VECTOR, "slack_bound": NUMBER},
    "scenario": {
        "M": INT, "goal": VECTOR, "obstacle_center": VECTOR, "obstacle_radius": NUMBER, "x0": VECTOR,
        "a": NUMBER, "dt": NUMBER, "horizon": INT, "eps": NUMBER, "eps_bar": NUMBER, "r0": NUMBER, "N0": INT,
        "c1": NUMBER, "c2": NUMBER, "tail_a": NUMBER, "sampler": _listof(SAMPLER_ENTRY, 1), "batch": INT,
        "redraw_every": INT, "seed": INT, "k_v": NUMBER, "k_w": NUMBER, "clf_gain": NUMBER, "cbf_gain": NUMBER,
        "control_bound": "?number", "checkers": _listof(("necessary", "sufficient1", "sufficient3")),
        "require_invertible": BOOL, "slack": VECTOR, "slack_bound": "?number",
    },
    "bench": {
        "Ns": _listof(INT, 1), "Ms": _listof(INT, 1), "repeats": INT,
        "methods": _listof(("Necessary", "SufficientSingle", "SufficientSlack", "Solver"), 1),
        "template": ("random", "model"), "m": INT, "k": INT, "noise": NUMBER, "min_time": NUMBER,
    },
    "lipschitz": {"radii": VECTOR, "dirs": INT, "margin": NUMBER},
    "output": {"dir": STR, "svg": BOOL},
}


class _Located(dict):
    """A parsed JSON object remembering the offset of its opening brace."""

    offset = 0


def _parse(text: str, source: str):
    decoder = json.JSONDecoder(object_pairs_hook=None)
    base_parse_object = json.decoder.JSONObject

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None, _w=None):
        _, end = s_and_end
        kwargs = {} if _w is None else {"_w": _w}
        obj, new_end = base_parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo,
                                         **kwargs)
        located = _Located(obj)
        located.offset = end - 1
        return located, new_end

    decoder.parse_object = parse_object
    decoder.scan_once = json.scanner.py_make_scanner(decoder)
    try:
        return decoder.decode(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


class _Validator:
    def __init__(self, text: str, source: str):
        self.text, self.source = text, source

    def fail(self, obj, key, message):
        offset = getattr(obj, "offset", 0)
        if key is not None:
            m = re.compile(r'"' + re.escape(str(key)) + r'"\s*:').search(self.text, offset)
            if m:
                offset = m.start()
        raise ConfigError(f"{self.source}:{_line_of(self.text, offset)}: {message}")

    def check(self, value, spec, parent, key, path):
        where = path or "<root>"
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                self.fail(parent, key, f"{where}: expected an object")
            for k_, v_ in value.items():
                if k_ not in spec:
                    self.fail(value, k_, f"{where}: unknown key {k_!r} (allowed: {', '.join(sorted(spec))})")
                self.check(v_, spec[k_], value, k_, f"{path}.{k_}" if path else k_)
            return
        if isinstance(spec, tuple) and spec and spec[0] == "list":
            _, item, min_len = spec
            if not isinstance(value, list):
                self.fail(parent, key, f"{where}: expected a list")
            if len(value) < min_len:
                self.fail(parent, key, f"{where}: expected at least {min_len} entries")
            for j, v_ in enumerate(value):
                self.check(v_, item, parent, key, f"{where}[{j}]")
            return
        if isinstance(spec, tuple) and spec and spec[0] == "tuple3":
            if not isinstance(value, list) or len(value) != 3:
                self.fail(parent, key, f"{where}: expected [distribution, p1, p2]")
            for j, (v_, s_) in enumerate(zip(value, spec[1:])):
                self.check(v_, s_, parent, key, f"{where}[{j}]")
            return
        if isinstance(spec, tuple):
            if value not in spec:
                self.fail(parent, key, f"{where}: {value!r} is not one of {list(spec)}")
            return
        nullable = spec.startswith("?")
        kind = spec.lstrip("?")
        if value is None:
            if not nullable:
                self.fail(parent, key, f"{where}: must not be null")
            return
        ok = {
            NUMBER: isinstance(value, (int, float)) and not isinstance(value, bool),
            INT: isinstance(value, int) and not isinstance(value, bool),
            BOOL: isinstance(value, bool),
            STR: isinstance(value, str),
        }[kind]
        if not ok:
            self.fail(parent, key, f"{where}: expected {kind}, got {type(value).__name__}")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    return obj


# -- the validated configuration -------------------------------------------------


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    ambiguity: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    lipschitz: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0
    source: str = "<config>"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        data = _parse(text, source)
        _Validator(text, source).check(data, SCHEMA, None, None, "")
        cfg = cls(**_plain(data), source=source)
        cfg._check_semantics(text)
        return cfg

    @classmethod
    def from_dict(cls, data: dict, source: str = "<dict>") -> "RunConfig":
        return cls.from_text(json.dumps(data, indent=1), source)

    def _check_semantics(self, text: str) -> None:
        kind = self.model.get("kind", "unicycle")
        if kind == "affine":
            for key in ("constraints", "nominal"):
                if key not in self.model:
                    raise ConfigError(f"{self.source}: model.{key} is required for kind 'affine'")
            if "r" not in self.ambiguity:
                raise ConfigError(f"{self.source}: ambiguity.r is required for kind 'affine'")
            if "values" not in self.samples and "sampler" not in self.samples:
                raise ConfigError(f"{self.source}: samples.values or samples.sampler is required")
        elif set(self.model) - {"kind"}:
            raise ConfigError(f"{self.source}: model kind 'unicycle' takes its data from the scenario block")
        if self.scenario or kind == "unicycle":
            self.scenario_config()

    @property
    def kind(self) -> str:
        return self.model.get("kind", "unicycle")

    # builders

    def scenario_config(self, seed: int | None = None):
        from .sim import ScenarioConfig, paper_scenario

        data = dict(self.scenario)
        if seed is not None:
            data["seed"] = seed
        elif "seed" not in data:
            data["seed"] = self.seed
        try:
            base = paper_scenario(data.pop("M", 1))
            merged = {**{f.name: getattr(base, f.name) for f in fields(base)}, **data}
            return ScenarioConfig.from_dict(merged)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: scenario: {exc}") from None

    def problem(self, seed: int | None = None) -> tuple[SynthesisProblem, np.ndarray | None]:
        """The synthesis problem and the default state (``None`` for fixed data)."""
        seed = self.seed if seed is None else seed
        if self.kind == "unicycle":
            from .sim import build_scenario

            cfg = self.scenario_config(seed)
            return build_scenario(cfg).problem, np.asarray(cfg.x0, dtype=float)
        try:
            cons = [ConstraintData(q=c["q"], R=c["R"], label=c.get("label", f"c{j}"))
                    for j, c in enumerate(self.model["constraints"])]
            if "values" in self.samples:
                samples = SampleSet(np.asarray(self.samples["values"], dtype=float))
            else:
                from .sim import sample_uncertainty

                samples = sample_uncertainty([tuple(e) for e in self.samples["sampler"]],
                                             int(self.samples.get("N", 1)), np.random.default_rng([seed, 0]))
            amb = dict(self.ambiguity)
            amb.setdefault("eps", 1.0 / samples.N)
            ambiguity = AmbiguityConfig(k=samples.k, **amb)
            return SynthesisProblem(cons, np.asarray(self.model["nominal"], dtype=float), ambiguity, samples,
                                    control_bound=self.model.get("control_bound")), None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    def slack_certificate(self, p: SynthesisProblem, x) -> SlackCertificate:
        cert = self.certificates
        scen = self.scenario
        S = cert.get("slack", scen.get("slack"))
        if S is None:
            raise ConfigError(f"{self.source}: certificates.slack is required for the slack check")
        B = cert.get("slack_bound")
        if B is None:
            bound = p.control_bound
            B = float(np.sqrt(1.0 + bound**2)) if bound is not None else float(np.linalg.norm(p.nominal_at(x)))
        try:
            return SlackCertificate(tuple(S), B)
        except ValueError as exc:
            raise ConfigError(f"{self.source}: certificates: {exc}") from None

    @property
    def tol(self) -> float:
        return float(self.certificates.get("tol", DEFAULT_TOL))

    @property
    def require_invertible(self) -> bool:
        default = self.kind == "affine"  # the unicycle needs the relaxed per-sample test
        return bool(self.certificates.get("require_invertible", default))


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return RunConfig.from_text(text, str(path))
