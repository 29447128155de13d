"""Natural-language translator boundary and operator feedback.

Translators return the boxed JSON format ``{"stl_formula": ..., "atomic_predicates": {...}}``.
Predicate definitions are short texts such as ``"x >= 1 & x <= 3 & y == 6"`` or
``"(1 <= x <= 4) & (3 <= y <= 5)"``; they are parsed into position-space
regions. Names that the scenario already defines keep the scenario's geometry.
"""

from __future__ import annotations

import json
import logging
import os
import re
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol

import numpy as np
from scipy.optimize import linprog

from .errors import (
    AdapterUnavailable,
    NonlinearAtom,
    StlSyntaxError,
    TranslationError,
    TranslationTimeout,
    UnknownPredicate,
)
from .regions import NonlinearForm, Region
from .stl import And, Atom, Formula, Not, atoms, format_stl, horizon, iter_nodes, parse_stl

log = logging.getLogger(__name__)

API_KEY_ENV = "SFF_LLM_API_KEY"

SYSTEM_PROMPT = (
    "Translate the operator's mission into signal temporal logic. Answer with one JSON object "
    'with keys "stl_formula" and "atomic_predicates". Use F for eventually, G for always, '
    "U for until, ! for not, & for and, | for or; intervals like [0,60] are in seconds. "
    "Define each predicate as bounds on x and y, for example \"x >= 1 & x <= 3 & y >= 4 & y <= 5\"."
)

PARAPHRASE_PROMPT = (
    "Rewrite the following mission-feasibility findings as a short message to the operator. "
    "Keep every region name and keep the suggestion."
)


# -- predicate text -------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op><=|>=|==|!=|[<>=+\-*/^()]))")
_COMPARE = {"<=", ">=", "<", ">", "==", "="}


def _lex(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"unexpected character {text[pos]!r} in predicate {text!r}")
        out.append(m.group(m.lastgroup))
        pos = m.end()
    return out


class _Affine:
    """``sum coef[v] * v + const`` over named variables."""

    def __init__(self, coef=None, const=0.0):
        self.coef = dict(coef or {})
        self.const = float(const)

    def __add__(self, o):
        c = dict(self.coef)
        for k, v in o.coef.items():
            c[k] = c.get(k, 0.0) + v
        return _Affine(c, self.const + o.const)

    def scale(self, s):
        return _Affine({k: v * s for k, v in self.coef.items()}, self.const * s)

    @property
    def is_const(self):
        return not any(self.coef.values())


class _ExprParser:
    def __init__(self, toks: list[str], variables: dict[str, int]):
        self.t = toks
        self.i = 0
        self.vars = variables

    def peek(self):
        return self.t[self.i] if self.i < len(self.t) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self) -> _Affine:
        out = self.term()
        while self.peek() in ("+", "-"):
            sign = 1.0 if self.take() == "+" else -1.0
            out = out + self.term().scale(sign)
        return out

    def term(self) -> _Affine:
        out = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.factor()
            if op == "*":
                if out.is_const:
                    out = rhs.scale(out.const)
                elif rhs.is_const:
                    out = out.scale(rhs.const)
                else:
                    raise NonlinearAtom("product of variables")
            else:
                if not rhs.is_const or rhs.const == 0:
                    raise NonlinearAtom("division by a variable")
                out = out.scale(1.0 / rhs.const)
        return out

    def factor(self) -> _Affine:
        tok = self.take()
        if tok is None:
            raise ValueError("predicate ends unexpectedly")
        if tok == "-":
            return self.factor().scale(-1.0)
        if tok == "(":
            inner = self.expr()
            if self.take() != ")":
                raise ValueError("missing ')' in predicate")
            base = inner
        elif re.fullmatch(r"\d+(?:\.\d*)?|\.\d+", tok):
            base = _Affine(const=float(tok))
        elif re.fullmatch(r"[A-Za-z_]\w*", tok):
            if tok not in self.vars:
                raise NonlinearAtom(f"unknown state variable {tok!r}")
            base = _Affine({tok: 1.0})
        else:
            raise ValueError(f"unexpected token {tok!r} in predicate")
        if self.peek() == "^":
            self.take()
            power = self.factor()
            if not (power.is_const and power.const == 1.0) and not base.is_const:
                raise NonlinearAtom("power of a variable")
            if base.is_const:
                base = _Affine(const=base.const ** power.const)
        return base


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def _strip_parens(text: str) -> str:
    text = text.strip()
    while text.startswith("(") and text.endswith(")"):
        depth = 0
        for i, ch in enumerate(text):
            depth += ch == "("
            depth -= ch == ")"
            if depth == 0 and i < len(text) - 1:
                return text
        text = text[1:-1].strip()
    return text


def parse_predicate(name: str, text: str, workspace, variables=("x", "y")) -> Region:
    """Parse a conjunction of linear comparisons over the position variables.

    Axis-aligned results become boxes (missing bounds come from
    ``workspace``); anything else becomes a halfspace region.

    Raises:
        NonlinearAtom: the text is not linear in the position variables.
        ValueError: the text does not parse.
    """
    var_index = {v: i for i, v in enumerate(variables[: len(workspace)])}
    dim = len(var_index)
    halfspaces: list[tuple[np.ndarray, float]] = []
    if "|" in text:
        raise NonlinearAtom("disjunctive predicate has no convex description")
    for part in _split_top(text, "&"):
        toks = _lex(_strip_parens(part))
        pieces, ops, cur = [], [], []
        for tok in toks:
            if tok in _COMPARE:
                pieces.append(cur)
                ops.append(tok)
                cur = []
            else:
                cur.append(tok)
        pieces.append(cur)
        if not ops:
            raise ValueError(f"no comparison in predicate part {part!r}")
        exprs = []
        for p in pieces:
            ep = _ExprParser(p, var_index)
            e = ep.expr()
            if ep.peek() is not None:
                raise ValueError(f"trailing tokens in predicate part {part!r}")
            exprs.append(e)
        for lhs, op, rhs in zip(exprs, ops, exprs[1:]):
            diff = lhs + rhs.scale(-1.0)  # lhs - rhs
            a = np.zeros(dim)
            for v, c in diff.coef.items():
                a[var_index[v]] += c
            b = -diff.const
            if op in ("<=", "<"):
                halfspaces.append((a, b))
            elif op in (">=", ">"):
                halfspaces.append((-a, -b))
            else:
                halfspaces.extend([(a, b), (-a, -b)])
    halfspaces = [(a, b) for a, b in halfspaces if np.any(a)]
    if not halfspaces:
        raise ValueError(f"predicate {text!r} does not constrain the position")
    axis_aligned = all(np.count_nonzero(a) == 1 for a, _ in halfspaces)
    if axis_aligned:
        lo = [float(w[0]) for w in workspace]
        hi = [float(w[1]) for w in workspace]
        for a, b in halfspaces:
            i = int(np.flatnonzero(a)[0])
            if a[i] > 0:
                hi[i] = min(hi[i], b / a[i])
            else:
                lo[i] = max(lo[i], b / a[i])
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError(f"predicate {name!r} describes an empty box")
        return Region.from_bounds(name, [v for pair in zip(lo, hi) for v in pair])
    return Region(name=name, halfspaces=tuple((tuple(a.tolist()), float(b)) for a, b in halfspaces))


# -- adapters -------------------------------------------------------------


class TranslatorAdapter(Protocol):
    name: str

    def complete(self, system: str, user: str) -> str: ...


def _fixture_names() -> list[str]:
    root = resources.files("sff.data").joinpath("fixtures")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


@dataclass(frozen=True)
class FixtureAdapter:
    """Canned translator output keyed by ``<model>-<scenario>``."""

    key: str

    @property
    def name(self) -> str:
        return f"fixture:{self.key}"

    def document(self) -> dict:
        ref = resources.files("sff.data").joinpath("fixtures", f"{self.key}.json")
        if not ref.is_file():
            raise AdapterUnavailable(f"no fixture {self.key!r}; available: {', '.join(_fixture_names())}")
        return json.loads(ref.read_text())

    def complete(self, system: str, user: str) -> str:
        doc = self.document()
        return json.dumps({"stl_formula": doc["stl_formula"], "atomic_predicates": doc["atomic_predicates"]})


@dataclass(frozen=True)
class EchoAdapter:
    """Test double that answers with the prompt it was given."""

    name: str = "echo"

    def complete(self, system: str, user: str) -> str:
        return json.dumps({"system": system, "user": user})


@dataclass(frozen=True)
class HttpAdapter:
    """Single JSON POST ``{system, user, model}`` with a bearer token."""

    endpoint: str
    model: str = ""
    timeout_s: float = 30.0
    name: str = "http"

    @classmethod
    def from_config(cls, cfg: dict) -> "HttpAdapter":
        llm = cfg.get("llm", cfg)
        if not llm.get("enabled", True):
            raise AdapterUnavailable("LLM adapter disabled by configuration")
        if not llm.get("endpoint"):
            raise AdapterUnavailable("llm.endpoint is not configured")
        return cls(llm["endpoint"], llm.get("model", ""), float(llm.get("timeout_s", 30.0)))

    def complete(self, system: str, user: str) -> str:
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise AdapterUnavailable(f"environment variable {API_KEY_ENV} is not set")
        body = json.dumps({"system": system, "user": user, "model": self.model}).encode()
        req = urllib.request.Request(self.endpoint, data=body, method="POST", headers={
            "Content-Type": "application/json", "Authorization": f"Bearer {key}"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except (socket.timeout, TimeoutError) as exc:
            raise TranslationTimeout(f"no answer from {self.endpoint} within {self.timeout_s:g} s") from exc
        except urllib.error.HTTPError as exc:
            raise AdapterUnavailable(f"{self.endpoint} answered HTTP {exc.code}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise TranslationTimeout(f"no answer from {self.endpoint} within {self.timeout_s:g} s") from exc
            raise AdapterUnavailable(f"cannot reach {self.endpoint}: {exc.reason}") from exc


def make_adapter(spec: str, config: dict | None = None) -> TranslatorAdapter:
    """``"echo"``, ``"http"`` (uses ``config``) or a fixture key, optionally ``"fixture:"``-prefixed."""
    if spec == "echo":
        return EchoAdapter()
    if spec == "http":
        return HttpAdapter.from_config(config or {})
    key = spec.split(":", 1)[1] if spec.startswith("fixture:") else spec
    adapter = FixtureAdapter(key)
    adapter.document()
    return adapter


# -- translation ----------------------------------------------------------


def first_json_object(text: str) -> dict:
    """The first decodable JSON object in ``text``."""
    dec = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = dec.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise ValueError("no JSON object in adapter output")


@dataclass
class TranslationResult:
    stl_formula: str
    atomic_predicates: dict[str, Region | NonlinearForm]
    formula: Formula
    raw: str = ""
    shadowed: list[str] = field(default_factory=list)

    def scenario(self, base):
        """``base`` extended with the translated predicates it does not define itself."""
        regions = {k: v for k, v in self.atomic_predicates.items() if isinstance(v, Region)}
        others = {k: v for k, v in self.atomic_predicates.items() if not isinstance(v, Region)}
        return base.with_predicates(regions, others)

    def to_json(self) -> dict:
        preds = {}
        for k, v in self.atomic_predicates.items():
            if isinstance(v, NonlinearForm):
                preds[k] = {"nonlinear": v.text}
            else:
                preds[k] = v.to_json()
        return {"stl_formula": self.stl_formula, "atomic_predicates": preds,
                "scenario_overrides": list(self.shadowed)}


def link(doc: dict, scenario, raw: str = "") -> TranslationResult:
    """Parse and link a boxed translator answer against ``scenario``.

    Raises:
        TranslationError: the formula or a predicate does not parse, or the
            formula names something neither side defines.
    """
    diags: list[str] = []
    text = doc.get("stl_formula") if isinstance(doc, dict) else None
    preds_in = doc.get("atomic_predicates", {}) if isinstance(doc, dict) else {}
    if not isinstance(text, str):
        raise TranslationError(raw, ["answer has no string field 'stl_formula'"])
    if not isinstance(preds_in, dict):
        raise TranslationError(raw, ["'atomic_predicates' is not an object"])
    shadowed = sorted(name for name in preds_in if name in scenario.table)
    table = scenario.table | set(preds_in)
    try:
        formula = parse_stl(text, table)
    except UnknownPredicate as exc:
        raise TranslationError(raw, [f"UnknownPredicate: {exc}"]) from None
    except StlSyntaxError as exc:
        raise TranslationError(raw, [f"StlSyntaxError: {exc}"]) from None
    # Only predicates the formula uses are linked; helper definitions are dropped.
    used = set(atoms(formula))
    preds: dict[str, Region | NonlinearForm] = {}
    for name, body in preds_in.items():
        if name not in used or name in scenario.table:
            continue
        src = body if isinstance(body, str) else json.dumps(body)
        try:
            preds[name] = parse_predicate(name, src, scenario.workspace)
        except NonlinearAtom:
            preds[name] = NonlinearForm(src)
        except ValueError as exc:
            diags.append(f"predicate {name!r}: {exc}")
    if diags:
        raise TranslationError(raw, diags)
    return TranslationResult(text, preds, formula, raw, shadowed)


def translate(nl_command: str, map_description: str, adapter: TranslatorAdapter, scenario) -> TranslationResult:
    """Ask ``adapter`` for a translation of ``nl_command`` and link it.

    Raises:
        AdapterUnavailable, TranslationTimeout: from the adapter.
        TranslationError: the answer could not be parsed or linked.
    """
    user = f"Map:\n{map_description}\n\nMission:\n{nl_command}"
    raw = adapter.complete(SYSTEM_PROMPT, user)
    try:
        doc = first_json_object(raw)
    except ValueError as exc:
        raise TranslationError(raw, [str(exc)]) from None
    return link(doc, scenario, raw)


# -- feedback -------------------------------------------------------------


@dataclass
class FeedbackEntry:
    index: int
    formula: str
    reason: str
    regions: list[str]
    message: str
    hint: float | None = None

    def to_json(self) -> dict:
        return {"index": self.index, "formula": self.formula, "reason": self.reason,
                "regions": self.regions, "hint_distance": self.hint, "message": self.message}


@dataclass
class StructuredFeedback:
    decision: str
    level: int
    entries: list[FeedbackEntry]
    rendered: str

    def to_json(self) -> dict:
        return {"decision": self.decision, "level": self.level,
                "entries": [e.to_json() for e in self.entries], "text": self.rendered}


def _regions_disjoint(r1: Region, r2: Region) -> bool:
    rows = [a for a, _ in r1.faces()] + [a for a, _ in r2.faces()]
    rhs = [b for _, b in r1.faces()] + [b for _, b in r2.faces()]
    res = linprog(np.zeros(r1.dim), A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(None, None)] * r1.dim, method="highs")
    return res.status == 2


def _disjoint_pair(f: Formula, scenario) -> tuple[str, str] | None:
    """Two positive atoms conjoined in ``f`` whose regions cannot overlap."""
    for _, node in iter_nodes(f):
        if isinstance(node, And):
            names = [c.name for c in node.items if isinstance(c, Atom) and c.name in scenario.regions]
            for i, a in enumerate(names):
                for b in names[i + 1:]:
                    if _regions_disjoint(scenario.region(a), scenario.region(b)):
                        return a, b
    return None


def _positive_targets(f: Formula, scenario) -> list[str]:
    out: list[str] = []

    def walk(g, negated):
        if isinstance(g, Atom):
            if not negated and g.name in scenario.table and g.name not in out:
                out.append(g.name)
            return
        for c in g.children():
            walk(c, negated ^ isinstance(g, Not))
    walk(f, False)
    return out


def _listing(names: list[str]) -> str:
    if len(names) <= 1:
        return "".join(names)
    return ", ".join(names[:-1]) + " and " + names[-1]


_ERROR_HINTS = {
    "NonlinearAtom": "Please restate it with box regions or linear inequalities.",
    "UnsupportedNesting": "Please split nested temporal operators into separate tasks.",
}


def build_feedback(report, scenario) -> StructuredFeedback:
    """Explain every rejected subformula of ``report`` in plain English."""
    if report.decision == "Proceed":
        return StructuredFeedback("Proceed", report.level, [],
                                  f"Mission verified feasible at level {report.level}; proceeding to planning.")
    entries = []
    for v in report.infeasible:
        text = format_stl(v.subformula)
        names = [n for n in atoms(v.subformula) if n in scenario.table]
        names = list(dict.fromkeys(names))
        if v.verdict == "Error":
            reason = "unsupported"
            hint = _ERROR_HINTS.get(v.stats.get("error"), "Please restate it.")
            msg = f"{text} could not be checked ({v.reason}). {hint}"
        elif v.verdict == "InfeasibleEmptyBRT":
            pair = _disjoint_pair(v.subformula, scenario)
            if pair:
                reason = "disjoint_regions"
                names = list(pair)
                msg = (f"{text} requires being in {pair[0]} and {pair[1]} at the same time, but these "
                       f"regions do not overlap and cannot be occupied simultaneously. Consider visiting "
                       f"{pair[0]} and {pair[1]} separately or removing one of them.")
            else:
                reason = "empty"
                msg = f"{text} cannot be satisfied from any starting state on this map."
        else:
            reason = "unreachable"
            targets = _positive_targets(v.subformula, scenario) or names
            names = targets
            when = horizon(v.subformula)
            what = _listing(targets) or "the required region"
            msg = (f"{text}: {what} cannot be reached from the start within the time window of "
                   f"{when:g} s while avoiding the blocked regions.")
            near = v.stats.get("nearest_feasible")
            if near is not None and near <= scenario.grid().cell_diagonal:
                msg += " The start lies on the edge of the feasible set, inside the safety margin."
            elif near is not None:
                msg += f" The closest state that could still satisfy it is {near:.2f} away."
        entries.append(FeedbackEntry(v.index, text, reason, names, msg, v.stats.get("nearest_feasible")))
    n = len(report.verdicts)
    head = (f"Mission rejected at level {report.level}: {len(entries)} of {n} subformulas "
            f"cannot be satisfied.")
    rendered = "\n".join([head] + [f"- {e.message}" for e in entries])
    return StructuredFeedback("Reject", report.level, entries, rendered)


def paraphrase(fb: StructuredFeedback, adapter: TranslatorAdapter | None) -> str:
    """Optional LLM rewording of ``fb``; falls back to ``fb.rendered`` on any failure."""
    if adapter is None:
        return fb.rendered
    payload = json.dumps(fb.to_json(), sort_keys=True)
    try:
        text = adapter.complete(PARAPHRASE_PROMPT, payload)
    except Exception as exc:  # the pipeline must never block on garnish
        log.warning("feedback paraphrase failed, using template text: %s", exc)
        return fb.rendered
    return text if text.strip() else fb.rendered


__all__ = [
    "API_KEY_ENV",
    "EchoAdapter",
    "FeedbackEntry",
    "FixtureAdapter",
    "HttpAdapter",
    "StructuredFeedback",
    "TranslationResult",
    "TranslatorAdapter",
    "build_feedback",
    "first_json_object",
    "link",
    "make_adapter",
    "paraphrase",
    "parse_predicate",
    "translate",
]
