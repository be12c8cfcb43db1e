"""MATPOWER case parsing and conversion to a lossless :class:`PowerNetwork`.

Two input formats are accepted: the plain MATPOWER ``.m`` subset
(``mpc.baseMVA`` plus the ``bus``/``gen``/``branch`` matrices) and a JSON
mirror ``{"base_mva": ..., "bus": [...], "gen": [...], "branch": [...]}``.
"""

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .netmodel import PowerNetwork

log = logging.getLogger(__name__)

# MATPOWER column indices (0-based)
BUS_I, BUS_TYPE, PD = 0, 1, 2
GEN_BUS, PG, GEN_STATUS = 0, 1, 7
F_BUS, T_BUS, BR_R, BR_X, BR_B, BR_STATUS = 0, 1, 2, 3, 4, 10

MIN_COLS = {"bus": 13, "gen": 10, "branch": 13}
REBALANCE_POLICIES = ("proportional", "slack")
BUNDLED = ("ieee14", "ieee118", "toy2bus")


class CaseFormatError(ValueError):
    """Malformed case data; ``line`` is 1-based when known."""

    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


class RebalanceError(ValueError):
    pass


@dataclass(eq=False)
class RawCase:
    base_mva: float
    bus: np.ndarray
    gen: np.ndarray
    branch: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.bus = np.atleast_2d(np.asarray(self.bus, dtype=float))
        gen = np.asarray(self.gen, dtype=float)
        self.gen = np.zeros((0, 21)) if gen.size == 0 else np.atleast_2d(gen)
        self.branch = np.atleast_2d(np.asarray(self.branch, dtype=float))
        for key in ("bus", "gen", "branch"):
            a = getattr(self, key)
            if a.size and a.shape[1] < MIN_COLS[key]:
                raise CaseFormatError(
                    f"{key} matrix has {a.shape[1]} columns, need at least {MIN_COLS[key]}")
        ids = self.bus[:, BUS_I].astype(int)
        if len(set(ids.tolist())) != len(ids):
            raise CaseFormatError("duplicate bus ids")
        known = set(ids.tolist())
        for key, cols in (("gen", (GEN_BUS,)), ("branch", (F_BUS, T_BUS))):
            a = getattr(self, key)
            for r, row in enumerate(a):
                for c in cols:
                    if int(row[c]) not in known:
                        raise CaseFormatError(f"{key} row {r + 1} references unknown bus {int(row[c])}")
        bad = self.branch_in_service & (self.branch[:, BR_X] <= 0)
        if np.any(bad):
            r = int(np.flatnonzero(bad)[0])
            raise CaseFormatError(f"branch row {r + 1} has non-positive reactance")

    @property
    def gen_in_service(self):
        return self.gen[:, GEN_STATUS] > 0

    @property
    def branch_in_service(self):
        return self.branch[:, BR_STATUS] > 0

    @property
    def generator_buses(self):
        """Bus ids carrying at least one in-service generator."""
        return sorted(set(self.gen[self.gen_in_service, GEN_BUS].astype(int).tolist()))

    def summary(self):
        ng = len(self.generator_buses)
        return {
            "buses": len(self.bus),
            "branches": int(self.branch_in_service.sum()),
            "branches_out_of_service": int((~self.branch_in_service).sum()),
            "generator_buses": ng,
            "load_buses": len(self.bus) - ng,
        }


_SECTION = re.compile(r"mpc\.(bus|gen|branch)\s*=\s*\[", re.M)
_BASE = re.compile(r"mpc\.baseMVA\s*=\s*([^;\n]+);?")


def _strip_comments(text):
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _parse_matrix(body, first_line, key):
    rows, lineno = [], first_line
    for line in body.split("\n"):
        for chunk in line.split(";"):
            tokens = chunk.replace(",", " ").split()
            if not tokens:
                continue
            try:
                rows.append([float(t) for t in tokens])
            except ValueError:
                bad = next(t for t in tokens if not _is_number(t))
                raise CaseFormatError(f"non-numeric token {bad!r} in mpc.{key}", lineno) from None
            if len(rows[-1]) != len(rows[0]):
                raise CaseFormatError(
                    f"ragged row in mpc.{key}: {len(rows[-1])} columns, expected {len(rows[0])}",
                    lineno)
        lineno += 1
    return rows


def _is_number(t):
    try:
        float(t)
    except ValueError:
        return False
    return True


def parse_case(text, name=""):
    """Parse MATPOWER case text into a :class:`RawCase`."""
    clean = _strip_comments(text)
    m = _BASE.search(clean)
    if m is None:
        raise CaseFormatError("missing mpc.baseMVA")
    try:
        base = float(m.group(1))
    except ValueError:
        raise CaseFormatError(f"non-numeric baseMVA {m.group(1).strip()!r}",
                              clean.count("\n", 0, m.start()) + 1) from None
    found = {}
    for sm in _SECTION.finditer(clean):
        key = sm.group(1)
        start = sm.end()
        end = clean.find("]", start)
        first_line = clean.count("\n", 0, start) + 1
        if end < 0:
            raise CaseFormatError(f"unterminated mpc.{key} matrix", first_line)
        found[key] = _parse_matrix(clean[start:end], first_line, key)
    for key in ("bus", "gen", "branch"):
        if key not in found:
            raise CaseFormatError(f"missing mpc.{key} section")
    return RawCase(base, found["bus"], found["gen"], found["branch"], name=name)


def parse_json(text, name=""):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CaseFormatError(f"invalid JSON: {e.msg}", e.lineno) from None
    for key in ("base_mva", "bus", "gen", "branch"):
        if key not in data:
            raise CaseFormatError(f"missing {key!r} in JSON case")
    return RawCase(data["base_mva"], data["bus"], data["gen"], data["branch"],
                   name=name or data.get("name", ""))


def _fmt(x):
    return repr(float(x))


def serialize_case(raw, function_name="case"):
    """Render a :class:`RawCase` as MATPOWER text (exact float round-trip)."""
    out = [f"function mpc = {function_name}", "mpc.version = '2';",
           f"mpc.baseMVA = {_fmt(raw.base_mva)};", ""]
    for key in ("bus", "gen", "branch"):
        out.append(f"mpc.{key} = [")
        for row in getattr(raw, key):
            out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
        out.append("];")
        out.append("")
    return "\n".join(out)


def to_json(raw, **extra):
    d = {"base_mva": raw.base_mva, "bus": raw.bus.tolist(),
         "gen": raw.gen.tolist(), "branch": raw.branch.tolist()}
    d.update(extra)
    return json.dumps(d)


def load_case(source):
    """Load a bundled case by name or a ``.m``/``.json`` file by path."""
    if source in BUNDLED:
        text = resources.files("loadshed.data").joinpath(f"{source}.json").read_text()
        return parse_json(text, name=source)
    path = Path(source)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return parse_json(text, name=path.stem)
    return parse_case(text, name=path.stem)


def _rebalance(P, policy):
    pos = P > 0
    gen_total = P[pos].sum()
    load_total = -P[~pos].sum()
    if load_total <= 0:
        raise RebalanceError("total load is zero")
    if gen_total <= 0:
        raise RebalanceError("no positive injections to rebalance")
    if policy == "proportional":
        P = P.copy()
        P[pos] *= load_total / gen_total
    elif policy == "slack":
        P = P.copy()
        k = int(np.argmax(P))
        P[k] -= P.sum()
        if P[k] <= 0:
            raise RebalanceError("slack generator cannot absorb the mismatch")
    else:
        raise ValueError(f"unknown rebalance policy {policy!r}; expected one of {REBALANCE_POLICIES}")
    # Remove the last few ulps of imbalance on the largest injection.
    k = int(np.argmax(P))
    P[k] -= P.sum()
    return P


def build_network(raw, rebalance="proportional"):
    """Convert a :class:`RawCase` into a balanced lossless network.

    Line admittance is ``1/x`` (resistance and charging are dropped);
    out-of-service branches are excluded. Net injections
    ``(sum Pg - Pd) / baseMVA`` are balanced by ``rebalance``:
    ``"proportional"`` scales every positive injection by
    ``total load / total generation``; ``"slack"`` puts the whole mismatch
    on the largest injection.
    """
    ids = raw.bus[:, BUS_I].astype(int)
    index = {b: i for i, b in enumerate(ids.tolist())}
    n = len(ids)
    gen = raw.gen[raw.gen_in_service]
    pg = np.zeros(n)
    np.add.at(pg, [index[int(b)] for b in gen[:, GEN_BUS]], gen[:, PG])
    P = (pg - raw.bus[:, PD]) / raw.base_mva
    mismatch = float(P.sum())
    P = _rebalance(P, rebalance)
    log.debug("rebalanced %s (%s): mismatch %.6g pu", raw.name or "case", rebalance, mismatch)

    rows = np.flatnonzero(raw.branch_in_service)
    br = raw.branch[rows]
    x = br[:, BR_X]
    if np.any(x <= 0):
        raise CaseFormatError("non-positive reactance on an in-service branch")
    return PowerNetwork(
        from_bus=[index[int(b)] for b in br[:, F_BUS]],
        to_bus=[index[int(b)] for b in br[:, T_BUS]],
        admittance=1.0 / x,
        injection=P,
        base_mva=raw.base_mva,
        bus_ids=ids,
        line_ids=rows + 1,
        name=raw.name,
    )
