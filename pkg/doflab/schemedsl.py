"""
Text format for linear transmission schedules.

    scheme "hybrid-5over3-a"
    users 3; antennas 3; slots 6
    csit 1-6: P D D
    data u1, u2 -> R1
    slot 3:
      send part(R2, 1, {1}) + obs(R3, 2) zf R1

Statements end at a newline or ";", "#" starts a comment. The lexer and the
LALR grammar are built with ply. Parsing only checks structure; semantic checks
(causality, CSIT availability, zero-forcing capacity) live in validate().
"""

from __future__ import annotations

import logging
import re
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

from ply import lex, yacc

from .core import CsitConfig, CsitState, DofPoint
from .errors import SchemeStructureError, SchemeSyntaxError, UnknownSchemeError

logger = logging.getLogger(__name__)


# -- scheme model ----------------------------------------------------------------


@dataclass(frozen=True)
class DataSym:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Obs:
    """Everything receiver `receiver` heard in slot `slot`."""

    receiver: int
    slot: int

    def __str__(self) -> str:
        return f"obs(R{self.receiver}, {self.slot})"


@dataclass(frozen=True)
class Part:
    """The part of an observation contributed by data symbols destined to `owners`."""

    receiver: int
    slot: int
    owners: tuple[int, ...]

    def __str__(self) -> str:
        owners = ",".join(map(str, self.owners))
        return f"part(R{self.receiver}, {self.slot}, {{{owners}}})"


Atom = DataSym | Obs | Part


@dataclass(frozen=True)
class Expr:
    """Signed sum of atoms; each term is (+1 or -1, atom)."""

    terms: tuple[tuple[int, Atom], ...]

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return tuple(atom for _, atom in self.terms)

    @property
    def derived(self) -> bool:
        return any(not isinstance(atom, DataSym) for atom in self.atoms)

    def __str__(self) -> str:
        out = []
        for i, (sign, atom) in enumerate(self.terms):
            if i == 0:
                out.append(f"-{atom}" if sign < 0 else str(atom))
            else:
                out.append(f"{'-' if sign < 0 else '+'} {atom}")
        return " ".join(out)


@dataclass(frozen=True)
class Stream:
    expr: Expr
    zf: tuple[int, ...] = ()
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        text = f"send {self.expr}"
        if self.zf:
            text += " zf " + ", ".join(f"R{r}" for r in self.zf)
        return text


@dataclass(frozen=True)
class Scheme:
    name: str
    K: int
    M: int
    T: int
    csit: CsitConfig
    symbols: tuple[tuple[str, int], ...]
    slots_body: tuple[tuple[Stream, ...], ...]
    uncovered: tuple[int, ...] = ()

    def destination(self, symbol: str) -> int | None:
        return dict(self.symbols).get(symbol)

    @property
    def symbol_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.symbols)

    def streams(self, slot: int) -> tuple[Stream, ...]:
        return self.slots_body[slot - 1]

    def with_additions(
        self, symbols: tuple[tuple[str, int], ...] = (), streams: dict[int, list[Stream]] | None = None
    ) -> Scheme:
        """Copy with extra data symbols and streams appended to the given slots."""
        body = [list(slot) for slot in self.slots_body]
        for slot, extra in (streams or {}).items():
            body[slot - 1].extend(extra)
        return replace(
            self,
            symbols=self.symbols + tuple(symbols),
            slots_body=tuple(tuple(slot) for slot in body),
        )


def demand_by_user(scheme: Scheme) -> tuple[int, ...]:
    counts = Counter(user for _, user in scheme.symbols)
    return tuple(counts.get(user, 0) for user in range(1, scheme.K + 1))


def claimed_dof(scheme: Scheme) -> DofPoint:
    """Data symbols per user divided by the slot count."""
    return DofPoint.private(*(Fraction(n, scheme.T) for n in demand_by_user(scheme)))


# -- lexer and grammar -----------------------------------------------------------


def _column(text: str, lexpos: int) -> int:
    return lexpos - text.rfind("\n", 0, lexpos)


class _Grammar:
    keywords = {
        "scheme": "SCHEME",
        "users": "USERS",
        "antennas": "ANTENNAS",
        "slots": "SLOTS",
        "csit": "CSIT",
        "data": "DATA",
        "slot": "SLOT",
        "send": "SEND",
        "zf": "ZF",
        "obs": "OBS",
        "part": "PART",
    }
    tokens = ["ID", "NUMBER", "STRING", "RECEIVER", "ARROW", "SEP"] + sorted(set(keywords.values()))
    literals = ["+", "-", "(", ")", ",", "{", "}", ":"]

    t_ignore = " \t\r"
    t_ignore_COMMENT = r"\#[^\n]*"
    t_ARROW = r"->"

    def t_SEP(self, t):
        r"\n|;"
        if t.value == "\n":
            t.lexer.lineno += 1
        return t

    def t_STRING(self, t):
        r'"[^"\n]*"'
        t.value = t.value[1:-1]
        return t

    def t_NUMBER(self, t):
        r"\d+"
        t.value = int(t.value)
        return t

    def t_ID(self, t):
        r"[A-Za-z_][A-Za-z0-9_]*"
        if t.value in self.keywords:
            t.type = self.keywords[t.value]
        elif re.fullmatch(r"R\d+", t.value):
            t.type = "RECEIVER"
            t.value = int(t.value[1:])
        return t

    def t_error(self, t):
        raise SchemeSyntaxError(
            f"unexpected character {t.value[0]!r}", t.lexer.lineno, _column(t.lexer.lexdata, t.lexpos)
        )

    def _pos(self, p, i):
        return (p.lineno(i), _column(p.lexer.lexdata, p.lexpos(i)))

    def p_document(self, p):
        "document : stmt_list"
        p[0] = [stmt for stmt in p[1] if stmt is not None]

    def p_stmt_list(self, p):
        """stmt_list : stmt_list SEP stmt_opt
        | stmt_opt"""
        p[0] = p[1] + [p[3]] if len(p) == 4 else [p[1]]

    def p_stmt_opt(self, p):
        """stmt_opt : statement
        | empty"""
        p[0] = p[1]

    def p_empty(self, p):
        "empty :"
        p[0] = None

    def p_statement_scheme(self, p):
        "statement : SCHEME STRING"
        p[0] = ("scheme", self._pos(p, 1), p[2])

    def p_statement_header(self, p):
        """statement : USERS NUMBER
        | ANTENNAS NUMBER
        | SLOTS NUMBER"""
        p[0] = (p[1], self._pos(p, 1), p[2])

    def p_statement_csit_range(self, p):
        "statement : CSIT NUMBER '-' NUMBER ':' states"
        p[0] = ("csit", self._pos(p, 1), p[2], p[4], p[6])

    def p_statement_csit_single(self, p):
        "statement : CSIT NUMBER ':' states"
        p[0] = ("csit", self._pos(p, 1), p[2], p[2], p[4])

    def p_states(self, p):
        """states : states ID
        | ID"""
        p[0] = p[1] + p[2] if len(p) == 3 else p[1]

    def p_statement_data(self, p):
        "statement : DATA names ARROW receiver"
        p[0] = ("data", self._pos(p, 1), p[2], p[4])

    def p_names(self, p):
        """names : names ',' ID
        | ID"""
        p[0] = p[1] + [(p[3], self._pos(p, 3))] if len(p) == 4 else [(p[1], self._pos(p, 1))]

    def p_statement_slot(self, p):
        "statement : SLOT NUMBER ':'"
        p[0] = ("slot", self._pos(p, 1), p[2])

    def p_statement_send(self, p):
        """statement : SEND expr
        | SEND expr ZF receivers"""
        p[0] = ("send", self._pos(p, 1), p[2], p[4] if len(p) == 5 else [])

    def p_receivers(self, p):
        """receivers : receivers ',' receiver
        | receiver"""
        p[0] = p[1] + [p[3]] if len(p) == 4 else [p[1]]

    def p_receiver(self, p):
        "receiver : RECEIVER"
        p[0] = (p[1], self._pos(p, 1))

    def p_expr(self, p):
        """expr : expr '+' atom
        | expr '-' atom
        | '-' atom
        | atom"""
        if len(p) == 4:
            p[0] = p[1] + [(1 if p[2] == "+" else -1, p[3])]
        elif len(p) == 3:
            p[0] = [(-1, p[2])]
        else:
            p[0] = [(1, p[1])]

    def p_atom_symbol(self, p):
        "atom : ID"
        p[0] = ("sym", p[1])

    def p_atom_obs(self, p):
        "atom : OBS '(' receiver ',' NUMBER ')'"
        p[0] = ("obs", p[3], p[5])

    def p_atom_part(self, p):
        "atom : PART '(' receiver ',' NUMBER ',' '{' owners '}' ')'"
        p[0] = ("part", p[3], p[5], p[8])

    def p_owners(self, p):
        """owners : owners ',' NUMBER
        | NUMBER"""
        p[0] = p[1] + [(p[3], self._pos(p, 3))] if len(p) == 4 else [(p[1], self._pos(p, 1))]

    def p_error(self, p):
        if p is None:
            raise SchemeSyntaxError("unexpected end of input", self._lexer_line, 1)
        what = "end of statement" if p.type == "SEP" else f"{p.value!r}"
        raise SchemeSyntaxError(f"unexpected {what}", p.lineno, _column(p.lexer.lexdata, p.lexpos))

    def __init__(self):
        self._lexer_line = 1
        self.lexer = lex.lex(module=self)
        self.parser = yacc.yacc(
            module=self, debug=False, write_tables=False, errorlog=yacc.NullLogger()
        )
        self._lock = threading.Lock()

    def parse(self, text: str) -> list[tuple]:
        with self._lock:
            lexer = self.lexer.clone()
            lexer.lineno = 1
            self._lexer_line = text.count("\n") + 1
            return self.parser.parse(text, lexer=lexer, tracking=True)


_grammar: _Grammar | None = None
_grammar_lock = threading.Lock()


def _get_grammar() -> _Grammar:
    global _grammar
    with _grammar_lock:
        if _grammar is None:
            _grammar = _Grammar()
        return _grammar


# -- building a Scheme from statements -------------------------------------------


class _Builder:
    def __init__(self):
        self.name = "unnamed"
        self.header: dict[str, int] = {}
        self.csit: dict[int, tuple[CsitState, ...]] = {}
        self.symbols: list[tuple[str, int]] = []
        self.body: dict[int, list[Stream]] = defaultdict(list)
        self.declared_slots: set[int] = set()
        self.current: int | None = None

    def fail(self, message: str, pos: tuple[int, int]):
        raise SchemeStructureError(message, *pos)

    def need_header(self, pos):
        missing = [key for key in ("users", "antennas", "slots") if key not in self.header]
        if missing:
            self.fail(f"declare {', '.join(missing)} before this statement", pos)

    def receiver(self, receiver: tuple[int, tuple[int, int]]) -> int:
        index, pos = receiver
        if not 1 <= index <= self.header["users"]:
            self.fail(f"unknown receiver R{index} (users are R1..R{self.header['users']})", pos)
        return index

    def slot_index(self, slot: int, pos):
        if not 1 <= slot <= self.header["slots"]:
            self.fail(f"slot index {slot} out of range 1..{self.header['slots']}", pos)

    def add(self, stmt: tuple) -> None:
        kind, pos = stmt[0], stmt[1]
        if kind == "scheme":
            self.name = stmt[2]
        elif kind in ("users", "antennas", "slots"):
            if kind in self.header:
                self.fail(f"'{kind}' declared twice", pos)
            if stmt[2] < 1:
                self.fail(f"'{kind}' must be positive", pos)
            if kind == "users" and stmt[2] > 16:
                self.fail("at most 16 users are supported", pos)
            self.header[kind] = stmt[2]
        elif kind == "csit":
            self.need_header(pos)
            first, last, letters = stmt[2], stmt[3], stmt[4]
            self.slot_index(first, pos)
            self.slot_index(last, pos)
            if first > last:
                self.fail(f"empty slot range {first}-{last}", pos)
            if len(letters) != self.header["users"] or any(c not in "PDN" for c in letters):
                self.fail(f"expected {self.header['users']} states from P, D, N, got {letters!r}", pos)
            row = tuple(CsitState.parse(c) for c in letters)
            for slot in range(first, last + 1):
                if slot in self.csit:
                    self.fail(f"csit for slot {slot} declared twice", pos)
                self.csit[slot] = row
        elif kind == "data":
            self.need_header(pos)
            user = self.receiver(stmt[3])
            known = {name for name, _ in self.symbols}
            for name, name_pos in stmt[2]:
                if name in known:
                    self.fail(f"duplicate data symbol {name!r}", name_pos)
                known.add(name)
                self.symbols.append((name, user))
        elif kind == "slot":
            self.need_header(pos)
            self.slot_index(stmt[2], pos)
            if stmt[2] in self.declared_slots:
                self.fail(f"slot {stmt[2]} declared twice", pos)
            self.declared_slots.add(stmt[2])
            self.current = stmt[2]
        elif kind == "send":
            self.need_header(pos)
            if self.current is None:
                self.fail("'send' outside a slot block", pos)
            zf = tuple(sorted({self.receiver(r) for r in stmt[3]}))
            self.body[self.current].append(Stream(self.expr(stmt[2]), zf, line=pos[0]))

    def expr(self, raw: list) -> Expr:
        terms = []
        for sign, atom in raw:
            if atom[0] == "sym":
                terms.append((sign, DataSym(atom[1])))
            elif atom[0] == "obs":
                terms.append((sign, Obs(self.receiver(atom[1]), atom[2])))
            else:
                owners = set()
                for owner, pos in atom[3]:
                    if not 1 <= owner <= self.header["users"]:
                        self.fail(f"unknown user {owner} in owner set", pos)
                    owners.add(owner)
                terms.append((sign, Part(self.receiver(atom[1]), atom[2], tuple(sorted(owners)))))
        return Expr(tuple(terms))

    def build(self, end: tuple[int, int]) -> Scheme:
        self.need_header(end)
        K, T = self.header["users"], self.header["slots"]
        uncovered = tuple(t for t in range(1, T + 1) if t not in self.csit)
        empty_row = (CsitState.NONE,) * K
        csit = CsitConfig(K, tuple(self.csit.get(t, empty_row) for t in range(1, T + 1)))
        return Scheme(
            name=self.name,
            K=K,
            M=self.header["antennas"],
            T=T,
            csit=csit,
            symbols=tuple(self.symbols),
            slots_body=tuple(tuple(self.body.get(t, ())) for t in range(1, T + 1)),
            uncovered=uncovered,
        )


def parse_scheme(text: str) -> Scheme:
    statements = _get_grammar().parse(text)
    builder = _Builder()
    for stmt in statements:
        builder.add(stmt)
    scheme = builder.build((text.count("\n") + 1, 1))
    logger.debug("parsed scheme %r: K=%d M=%d T=%d", scheme.name, scheme.K, scheme.M, scheme.T)
    return scheme


def emit_scheme(scheme: Scheme) -> str:
    """Canonical text: one declaration per line, slots ascending, streams in order."""
    lines = [
        f'scheme "{scheme.name}"',
        f"users {scheme.K}",
        f"antennas {scheme.M}",
        f"slots {scheme.T}",
    ]
    covered = [t for t in range(1, scheme.T + 1) if t not in scheme.uncovered]
    run_start = None
    for i, t in enumerate(covered):
        if run_start is None:
            run_start = t
        following = covered[i + 1] if i + 1 < len(covered) else None
        row = scheme.csit.row_text(t)
        if following != t + 1 or scheme.csit.row_text(following) != row:
            span = f"{run_start}" if run_start == t else f"{run_start}-{t}"
            lines.append(f"csit {span}: {row}")
            run_start = None
    group: list[str] = []
    for i, (name, user) in enumerate(scheme.symbols):
        group.append(name)
        following = scheme.symbols[i + 1][1] if i + 1 < len(scheme.symbols) else None
        if following != user:
            lines.append(f"data {', '.join(group)} -> R{user}")
            group = []
    for t in range(1, scheme.T + 1):
        lines.append(f"slot {t}:")
        lines.extend(f"  {stream}" for stream in scheme.streams(t))
    return "\n".join(lines) + "\n"


# -- validation ------------------------------------------------------------------

ISSUE_KINDS = (
    "causality",
    "csit-availability",
    "zf-capacity",
    "zf-requires-perfect",
    "undefined-symbol",
    "uncovered-csit",
)


@dataclass(frozen=True)
class Issue:
    slot: int
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return {"slot": self.slot, "kind": self.kind, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def kinds(self) -> set[str]:
        return {issue.kind for issue in self.issues}

    def to_dict(self) -> dict:
        return {"ok": self.ok, "issues": [issue.to_dict() for issue in self.issues]}


def validate(scheme: Scheme) -> ValidationReport:
    """Semantic checks on a parsed scheme; findings are collected, never raised."""
    issues: list[Issue] = []
    for t in scheme.uncovered:
        issues.append(Issue(t, "uncovered-csit", f"no csit declaration covers slot {t}"))

    destinations = dict(scheme.symbols)
    for t in range(1, scheme.T + 1):
        # distinct data symbols per (zf set, destination); derived streams share one key per zf set
        load: dict[tuple[tuple[int, ...], object], set] = defaultdict(set)
        for index, stream in enumerate(scheme.streams(t)):
            for atom in stream.expr.atoms:
                if isinstance(atom, DataSym):
                    if atom.name not in destinations:
                        issues.append(Issue(t, "undefined-symbol", f"{atom.name} is not declared"))
                    continue
                if not 1 <= atom.slot < t:
                    issues.append(Issue(t, "causality", f"{atom} is not available before slot {t}"))
                elif scheme.csit.state(atom.slot, atom.receiver) is CsitState.NONE:
                    issues.append(
                        Issue(t, "csit-availability", f"{atom} needs CSIT of R{atom.receiver} from slot {atom.slot}")
                    )
            for r in stream.zf:
                if scheme.csit.state(t, r) is not CsitState.PERFECT:
                    issues.append(
                        Issue(t, "zf-requires-perfect", f"zero-forcing at R{r} without perfect CSIT in slot {t}")
                    )
            if len(stream.zf) >= scheme.M:
                issues.append(
                    Issue(t, "zf-capacity", f"{stream}: {len(stream.zf)} zero-forcing constraints leave no null space with {scheme.M} antennas")
                )
                continue
            if stream.expr.derived:
                load[(stream.zf, "derived")].add(index)
            else:
                for atom in stream.expr.atoms:
                    if atom.name in destinations:
                        load[(stream.zf, destinations[atom.name])].add(atom.name)
        for (zf, owner), members in load.items():
            room = scheme.M - len(zf)
            if len(members) > room:
                where = " ".join(f"R{r}" for r in zf) or "nobody"
                who = "derived streams" if owner == "derived" else f"symbols for R{owner}"
                issues.append(
                    Issue(t, "zf-capacity", f"{len(members)} {who} zero-forced at {where}, null space dimension {room}")
                )
    report = ValidationReport(tuple(issues))
    logger.debug("validated %r: %d issues", scheme.name, len(issues))
    return report


# -- built-in schemes ------------------------------------------------------------

_BUILTINS = ("alt-npp-4over9", "hybrid-5over3-a", "hybrid-5over3-b")


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin(name: str) -> str:
    if name not in _BUILTINS:
        raise UnknownSchemeError(f"no built-in scheme named {name!r}; known: {', '.join(_BUILTINS)}")
    return resources.files("doflab").joinpath("schemes", f"{name}.scheme").read_text(encoding="utf-8")


def load_scheme(reference: str) -> Scheme:
    """A built-in name or a path to a scheme file."""
    if reference in _BUILTINS:
        return parse_scheme(builtin(reference))
    path = Path(reference)
    if not path.is_file():
        raise UnknownSchemeError(f"{reference!r} is neither a built-in scheme nor a file")
    return parse_scheme(path.read_text(encoding="utf-8"))
