"""AST node types for the trigger DSL and the canonical formatter.

A trigger couples a boolean formula over a short window of (ego, attacker)
state pairs with the command sequence the attacker drives while the window
elapses. Windows are capped at 10 timesteps. Time index 0 means "now" (t),
k means t-k.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_WINDOW = 10

VEHICLES = ("a", "e")
FEATURES = ("x", "v", "lane")
BIN_OPS = ("+", "-", "*", "/")
COMPARATORS = ("==", "!=", "<", "<=", ">", ">=")


class TriggerError(ValueError):
    pass


class TriggerSyntaxError(TriggerError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class TriggerSemanticError(TriggerError):
    pass


class TriggerIndexError(TriggerError):
    """Command index outside the trigger window."""


@dataclass(frozen=True)
class Ref:
    vehicle: str   # "a" attacker, "e" ego
    feature: str   # "x", "v", "lane"
    offset: int    # 0 = t, k = t-k

    def fmt(self) -> str:
        idx = "t" if self.offset == 0 else f"t-{self.offset}"
        return f"{self.vehicle}.{self.feature}[{idx}]"


@dataclass(frozen=True)
class Atom:
    lhs: Ref
    op: str | None      # one of BIN_OPS, or None for a bare ref
    rhs: Ref | None
    cmp: str            # one of COMPARATORS
    value: float

    def fmt(self) -> str:
        expr = self.lhs.fmt() if self.op is None else f"{self.lhs.fmt()} {self.op} {self.rhs.fmt()}"
        return f"{expr} {self.cmp} {self.value!r}"

    def offsets(self):
        yield self.lhs.offset
        if self.rhs is not None:
            yield self.rhs.offset


@dataclass(frozen=True)
class BoolOp:
    kind: str           # "and" | "or"
    left: "Formula"
    right: "Formula"

    def fmt(self) -> str:
        sym = "&&" if self.kind == "and" else "||"
        return f"({self.left.fmt()} {sym} {self.right.fmt()})"


@dataclass(frozen=True)
class Ite:
    cond: "Formula"
    then: "Formula"
    other: "Formula"

    def fmt(self) -> str:
        return f"ite({self.cond.fmt()}, {self.then.fmt()}, {self.other.fmt()})"


Formula = Atom | BoolOp | Ite


@dataclass(frozen=True)
class Command:
    lane: int = 0                 # -1 left, +1 right, 0 keep
    speed: float | None = None    # target speed override, m/s

    def fmt(self) -> str:
        acts = []
        if self.lane < 0:
            acts.append("left")
        elif self.lane > 0:
            acts.append("right")
        if self.speed is not None:
            acts.append(f"speed({self.speed!r})")
        return " + ".join(acts) if acts else "cruise"


@dataclass(frozen=True)
class TriggerSpec:
    name: str
    window: int
    phi: Formula
    commands: tuple[Command, ...]
    duration: int | None = None

    def validate(self) -> None:
        if not (2 <= self.window <= MAX_WINDOW):
            raise TriggerSemanticError(
                f"window must be in [2, {MAX_WINDOW}], got {self.window}")
        if len(self.commands) != self.window - 1:
            raise TriggerSemanticError(
                f"xi must list window-1={self.window - 1} commands, "
                f"got {len(self.commands)}")
        for off in formula_offsets(self.phi):
            if not (0 <= off < self.window):
                raise TriggerSemanticError(
                    f"constraint time index t-{off} outside window {self.window}")
        if self.duration is not None and self.duration < 1:
            raise TriggerSemanticError("duration must be >= 1")


def formula_offsets(phi: Formula):
    if isinstance(phi, Atom):
        yield from phi.offsets()
    elif isinstance(phi, BoolOp):
        yield from formula_offsets(phi.left)
        yield from formula_offsets(phi.right)
    elif isinstance(phi, Ite):
        for child in (phi.cond, phi.then, phi.other):
            yield from formula_offsets(child)


def formula_atoms(phi: Formula):
    if isinstance(phi, Atom):
        yield phi
    elif isinstance(phi, BoolOp):
        yield from formula_atoms(phi.left)
        yield from formula_atoms(phi.right)
    elif isinstance(phi, Ite):
        for child in (phi.cond, phi.then, phi.other):
            yield from formula_atoms(child)


def format_trigger(spec: TriggerSpec) -> str:
    lines = [f"trigger {spec.name} {{", f"  window {spec.window};"]
    lines.append(f"  phi: {spec.phi.fmt()};")
    cmds = ", ".join(c.fmt() for c in spec.commands)
    lines.append(f"  xi: [{cmds}];")
    if spec.duration is not None:
        lines.append(f"  duration {spec.duration};")
    lines.append("}")
    return "\n".join(lines) + "\n"
