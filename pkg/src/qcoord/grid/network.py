"""Radial network data and the linearized DistFlow (LinDistFlow) solver.

Network file format: comment lines start with ``#``; sections ``[meta]``,
``[buses]``, ``[lines]`` and ``[attachments]`` each hold a CSV table with a
header row.  Columns:

* buses: ``bus, v_min, v_max, p_load, q_load`` (voltages in p.u., loads in p.u.)
* lines: ``from, to, r, x, p_min, p_max`` (p.u.)
* attachments: ``bus, kind, label, capacity`` with kind in
  ``{res, uncertain_load, ec}``; label is the RES type or EC type.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

ATTACHMENT_KINDS = ("res", "uncertain_load", "ec")


@dataclass(frozen=True)
class Bus:
    bus: int
    v_min: float
    v_max: float
    p_load: float
    q_load: float


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float
    x: float
    p_min: float
    p_max: float


@dataclass(frozen=True)
class Attachment:
    bus: int
    kind: str
    label: str = ""
    capacity: float = 0.0


@dataclass(frozen=True)
class OperatingPoint:
    """LinDistFlow state at one time step (all p.u.; bus/line order as in the case)."""

    v_sq: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    exchange: float

    @property
    def voltage(self) -> np.ndarray:
        return np.sqrt(self.v_sq)


class NetworkCase:
    """Immutable radial feeder rooted at the slack bus.

    Buses are addressed by their identifiers in the file; array positions
    follow file order (``bus_ids``).  Lines are re-ordered so that each line
    appears after the line feeding its from-bus.
    """

    def __init__(
        self,
        buses: Sequence[Bus],
        lines: Sequence[Line],
        slack: int,
        attachments: Sequence[Attachment] = (),
        meta: dict | None = None,
    ):
        self.buses = tuple(buses)
        self.bus_ids = tuple(b.bus for b in self.buses)
        if len(set(self.bus_ids)) != len(self.bus_ids):
            raise ValueError("duplicate bus identifiers")
        self.pos = {b: i for i, b in enumerate(self.bus_ids)}
        if slack not in self.pos:
            raise ValueError(f"slack bus {slack} not in bus table")
        self.slack = slack
        self.meta = dict(meta or {})
        for b in self.buses:
            if not b.v_min < b.v_max:
                raise ValueError(f"bus {b.bus}: v_min must be below v_max")
        for ln in lines:
            if ln.r < 0 or ln.x < 0:
                raise ValueError(f"line {ln.from_bus}-{ln.to_bus}: negative impedance")
            if ln.from_bus not in self.pos or ln.to_bus not in self.pos:
                raise ValueError(f"line {ln.from_bus}-{ln.to_bus} references an unknown bus")
        self.lines = self._order_tree(tuple(lines))
        for a in attachments:
            if a.kind not in ATTACHMENT_KINDS:
                raise ValueError(f"unknown attachment kind {a.kind!r}")
            if a.bus not in self.pos:
                raise ValueError(f"attachment at unknown bus {a.bus}")
        self.attachments = tuple(attachments)
        self._build_matrices()

    # --- topology -------------------------------------------------------------

    def _order_tree(self, lines: tuple[Line, ...]) -> tuple[Line, ...]:
        n = len(self.buses)
        if len(lines) != n - 1:
            raise ValueError(f"a tree on {n} buses needs {n - 1} lines, got {len(lines)}")
        children: dict[int, list[Line]] = {}
        parent_count: dict[int, int] = {}
        for ln in lines:
            children.setdefault(ln.from_bus, []).append(ln)
            parent_count[ln.to_bus] = parent_count.get(ln.to_bus, 0) + 1
        if self.slack in parent_count or any(c > 1 for c in parent_count.values()):
            raise ValueError("topology is not a tree rooted at the slack bus (cycle or multiple feeds)")
        ordered, stack, seen = [], [self.slack], {self.slack}
        while stack:
            b = stack.pop()
            for ln in children.get(b, []):
                if ln.to_bus in seen:
                    raise ValueError("cyclic topology")
                seen.add(ln.to_bus)
                ordered.append(ln)
                stack.append(ln.to_bus)
        if len(seen) != n:
            missing = sorted(set(self.bus_ids) - seen)
            raise ValueError(f"buses not connected to the slack: {missing}")
        return tuple(ordered)

    def _build_matrices(self) -> None:
        nb, nl = len(self.buses), len(self.lines)
        self.r = np.array([ln.r for ln in self.lines])
        self.x = np.array([ln.x for ln in self.lines])
        self.p_max = np.array([ln.p_max for ln in self.lines])
        self.p_min = np.array([ln.p_min for ln in self.lines])
        self.v_min = np.array([b.v_min for b in self.buses])
        self.v_max = np.array([b.v_max for b in self.buses])
        self.p_load = np.array([b.p_load for b in self.buses])
        self.q_load = np.array([b.q_load for b in self.buses])
        self.line_to = np.array([self.pos[ln.to_bus] for ln in self.lines])
        self.line_from = np.array([self.pos[ln.from_bus] for ln in self.lines])
        # path[l, j] = 1 if line l lies on the path slack -> bus j,
        # equivalently bus j is downstream of line l
        incoming = {self.pos[ln.to_bus]: k for k, ln in enumerate(self.lines)}
        path = np.zeros((nl, nb))
        for j in range(nb):
            b = j
            while b in incoming:
                k = incoming[b]
                path[k, j] = 1.0
                b = self.line_from[k]
        self.path = path
        # voltage sensitivity: d v_sq_j / d (net load at k) = -2 * sens[j, k]
        self.sens_r = path.T @ (self.r[:, None] * path)
        self.sens_x = path.T @ (self.x[:, None] * path)

    # --- attachments --------------------------------------------------------------

    def attached(self, kind: str) -> tuple[Attachment, ...]:
        return tuple(a for a in self.attachments if a.kind == kind)

    @property
    def res_buses(self) -> tuple[int, ...]:
        return tuple(a.bus for a in self.attached("res"))

    @property
    def ec_buses(self) -> tuple[int, ...]:
        return tuple(a.bus for a in self.attached("ec"))

    @property
    def ec_types(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.attached("ec"))

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    def positions(self, bus_ids: Sequence[int]) -> np.ndarray:
        return np.array([self.pos[b] for b in bus_ids], dtype=int)

    # --- I/O ----------------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "NetworkCase":
        sections: dict[str, list[str]] = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections[current] = []
                continue
            if current is None:
                raise ValueError("data before the first section header")
            sections[current].append(line)
        for name in ("buses", "lines"):
            if name not in sections:
                raise ValueError(f"missing [{name}] section")

        def table(name):
            return list(csv.DictReader(io.StringIO("\n".join(sections.get(name, [])))))

        meta = {row["key"]: row["value"] for row in table("meta")}
        buses = [Bus(int(r["bus"]), float(r["v_min"]), float(r["v_max"]), float(r["p_load"]), float(r["q_load"]))
                 for r in table("buses")]
        lines = [Line(int(r["from"]), int(r["to"]), float(r["r"]), float(r["x"]), float(r["p_min"]), float(r["p_max"]))
                 for r in table("lines")]
        atts = [Attachment(int(r["bus"]), r["kind"].strip(), (r.get("label") or "").strip(), float(r.get("capacity") or 0))
                for r in table("attachments")]
        slack = int(meta.pop("slack", buses[0].bus))
        return cls(buses, lines, slack, atts, meta)

    @classmethod
    def load(cls, path: str | Path) -> "NetworkCase":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def default(cls) -> "NetworkCase":
        """The shipped 33-bus feeder with its RES, uncertain-load and EC attachments."""
        return cls.from_text(resources.files("qcoord.data").joinpath("ieee33.csv").read_text())

    def to_text(self) -> str:
        out = ["[meta]", "key,value", f"slack,{self.slack}"]
        out += [f"{k},{v}" for k, v in self.meta.items()]
        out += ["", "[buses]", "bus,v_min,v_max,p_load,q_load"]
        out += [f"{b.bus},{b.v_min!r},{b.v_max!r},{b.p_load!r},{b.q_load!r}" for b in self.buses]
        out += ["", "[lines]", "from,to,r,x,p_min,p_max"]
        out += [f"{l.from_bus},{l.to_bus},{l.r!r},{l.x!r},{l.p_min!r},{l.p_max!r}" for l in self.lines]
        out += ["", "[attachments]", "bus,kind,label,capacity"]
        out += [f"{a.bus},{a.kind},{a.label},{a.capacity!r}" for a in self.attachments]
        return "\n".join(out) + "\n"


def solve_lindistflow(case: NetworkCase, p_inj: np.ndarray, q_inj: np.ndarray) -> OperatingPoint:
    """Exact solution of the linear model for one time step.

    ``p_inj``/``q_inj`` are net injections per bus (generation minus load).
    Flows accumulate downstream load leaf-to-root; squared voltages drop
    root-to-leaf, starting from 1 at the slack.
    """
    p_inj = np.asarray(p_inj, dtype=float)
    q_inj = np.asarray(q_inj, dtype=float)
    nb = case.n_buses
    if p_inj.shape != (nb,) or q_inj.shape != (nb,):
        raise ValueError(f"injections must have shape ({nb},)")
    nl = case.n_lines
    pf, qf = np.zeros(nl), np.zeros(nl)
    # downstream load seen by each bus, accumulated in reverse tree order
    sub_p, sub_q = -p_inj.copy(), -q_inj.copy()
    for k in range(nl - 1, -1, -1):
        j, i = case.line_to[k], case.line_from[k]
        pf[k], qf[k] = sub_p[j], sub_q[j]
        sub_p[i] += sub_p[j]
        sub_q[i] += sub_q[j]
    v = np.empty(nb)
    v[case.pos[case.slack]] = 1.0
    for k in range(nl):
        j, i = case.line_to[k], case.line_from[k]
        v[j] = v[i] - 2.0 * (case.r[k] * pf[k] + case.x[k] * qf[k])
    exchange = -float(p_inj.sum())
    return OperatingPoint(v, pf, qf, p_inj, q_inj, exchange)


def balance_residual(case: NetworkCase, op: OperatingPoint) -> float:
    """Largest violation of nodal balance and of the voltage-drop relation."""
    nb = case.n_buses
    out_p, out_q = np.zeros(nb), np.zeros(nb)
    in_p, in_q = np.zeros(nb), np.zeros(nb)
    np.add.at(out_p, case.line_from, op.p_flow)
    np.add.at(out_q, case.line_from, op.q_flow)
    np.add.at(in_p, case.line_to, op.p_flow)
    np.add.at(in_q, case.line_to, op.q_flow)
    non_slack = np.arange(nb) != case.pos[case.slack]
    # inflow - outflow = -(net injection) at every non-slack bus
    res_p = (in_p - out_p + op.p_inj)[non_slack]
    res_q = (in_q - out_q + op.q_inj)[non_slack]
    drop = op.v_sq[case.line_to] - op.v_sq[case.line_from] + 2 * (case.r * op.p_flow + case.x * op.q_flow)
    slack_err = abs(op.v_sq[case.pos[case.slack]] - 1.0)
    exch = abs(op.exchange - (out_p - in_p)[~non_slack].sum())
    return float(max(np.abs(res_p).max(initial=0), np.abs(res_q).max(initial=0), np.abs(drop).max(initial=0), slack_err, exch))


def bulk_voltage_sq(case: NetworkCase, net_load_p: np.ndarray, net_load_q: np.ndarray) -> np.ndarray:
    """Squared voltages for net loads of shape ``(..., n_buses, T)`` via sensitivity matrices."""
    return 1.0 - 2.0 * (np.einsum("jk,...kt->...jt", case.sens_r, net_load_p)
                        + np.einsum("jk,...kt->...jt", case.sens_x, net_load_q))


def bulk_flows(case: NetworkCase, net_load_p: np.ndarray) -> np.ndarray:
    """Active line flows ``(..., n_lines, T)``."""
    return np.einsum("lk,...kt->...lt", case.path, net_load_p)
