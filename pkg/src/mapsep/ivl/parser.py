"""Parser for ``.mivl`` text.

Two body forms are accepted after the ``var`` declarations:

* structured statements (``if (*)``, ``while (*)``, ``assert``, labels and
  ``goto``), lowered to a control-flow graph;
* an explicit edge list introduced by ``init <loc>;`` with one
  ``<src> -> <dst> : <command>;`` line per statement.  This is the form the
  pretty-printer emits, so it can express every CFG exactly.

IR-only constructs (ghost declarations, families, ``{ c1; c2 }`` sequences,
``havoc {a, b}``, write-id literals) are rejected unless ``ir=True``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BLOCK_SEP,
    BOT,
    GHOST_SUFFIX,
    And,
    Assume,
    AssignBase,
    AssignMap,
    ConstMap,
    Eq,
    HavocBase,
    HavocMap,
    HavocMapsEqual,
    IVLError,
    Lit,
    MapVar,
    Not,
    Or,
    Pred,
    Program,
    Select,
    Seq,
    Skip,
    Store,
    Succ,
    Var,
    WriteLit,
    check_well_formed,
    number_statements,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<wid>@[A-Za-z0-9_#]+)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*(?:-lw)?)
  | (?P<op>:=|==|!=|&&|\|\||->|[!()\[\]{};,:*])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "var", "int", "bool", "wid", "havoc", "assume", "assert", "if", "else", "while",
    "goto", "skip", "const", "succ", "pred", "init", "locs", "error", "family",
}

ERROR_LOC = "err"


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise IVLError("syntax", f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tok_text = m.group()
            if kind == "id" and tok_text in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, tok_text, line, pos - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Lowering:
    """Builds the CFG for the structured statement form."""

    def __init__(self):
        self.locs: list[str] = []
        self.edges: list[list] = []  # [src, cmd, dst]
        self.labels: dict[str, str] = {}
        self.label_locs: set[str] = set()
        self.error: str | None = None
        self.counter = 0
        self.initial = self.fresh()

    def fresh(self) -> str:
        name = f"_L{self.counter}"
        self.counter += 1
        self.locs.append(name)
        return name

    def edge(self, src: str, cmd, dst: str) -> None:
        self.edges.append([src, cmd, dst])

    def has_outgoing(self, loc: str) -> bool:
        return any(e[0] == loc for e in self.edges)

    def mergeable(self, loc: str) -> bool:
        return (
            loc != self.initial
            and loc not in self.label_locs
            and loc != self.error
            and not self.has_outgoing(loc)
        )

    def rename(self, old: str, new: str) -> None:
        for e in self.edges:
            if e[0] == old:
                e[0] = new
            if e[2] == old:
                e[2] = new
        self.locs.remove(old)

    def connect(self, end: str, target: str) -> None:
        """Make control at ``end`` continue at ``target``."""
        if end == target:
            return
        if self.mergeable(end):
            self.rename(end, target)
        else:
            self.edge(end, Skip(), target)

    def error_loc(self) -> str:
        if self.error is None:
            self.error = ERROR_LOC
            self.locs.append(ERROR_LOC)
        return self.error


class Parser:
    def __init__(self, text: str, ir: bool = False, strict_grammar: bool = False):
        self.toks = tokenize(text)
        self.i = 0
        self.ir = ir
        self.strict = strict_grammar
        self.base: list[str] = []
        self.maps: list[str] = []
        self.ghosts: list[str] = []
        self.families: list[tuple[str, tuple[str, ...]]] = []
        self.temp_counter = 0

    # ------------------------------------------------------------ token utils

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None, code: str = "syntax") -> IVLError:
        tok = tok or self.tok
        return IVLError(code, msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "id":
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def ident_list(self) -> list[Token]:
        out = [self.ident()]
        while self.accept(","):
            out.append(self.ident())
        return out

    # ----------------------------------------------------------- declarations

    def check_name(self, t: Token) -> None:
        if self.ir:
            return
        if t.text.endswith(GHOST_SUFFIX):
            raise self.error(f"{t.text!r}: the suffix {GHOST_SUFFIX!r} is reserved for ghost maps", t, "reserved-name")
        if BLOCK_SEP in t.text:
            raise self.error(f"{t.text!r}: {BLOCK_SEP!r} is reserved for generated names", t, "reserved-name")

    def declared(self, name: str) -> bool:
        return name in self.base or name in self.maps or name in self.ghosts

    def parse_decl(self) -> None:
        self.expect("var")
        names = self.ident_list()
        self.expect(":")
        if self.accept("["):
            if not (self.accept("int") or self.accept("bool")):
                raise self.error("map index type must be int")
            self.expect("]")
            if self.accept("wid"):
                if not self.ir:
                    raise self.error("write-id maps are IR-only", code="ir-only-construct")
                target = self.ghosts
            elif self.accept("int") or self.accept("bool"):
                target = self.maps
            else:
                raise self.error("expected map range type")
        elif self.accept("int") or self.accept("bool"):
            target = self.base
        else:
            raise self.error("expected a type")
        self.expect(";")
        for t in names:
            self.check_name(t)
            if self.declared(t.text):
                raise self.error(f"{t.text!r} declared twice", t, "duplicate-declaration")
            target.append(t.text)

    def parse_family(self) -> None:
        kw = self.expect("family")
        if not self.ir:
            raise self.error("families are IR-only", kw, "ir-only-construct")
        origin = self.ident().text
        self.expect(":")
        members = tuple(t.text for t in self.ident_list())
        self.expect(";")
        self.families.append((origin, members))

    # ------------------------------------------------------------ expressions

    def need(self, t: Token, kinds: tuple[str, ...]) -> str:
        name = t.text
        if name in self.base:
            kind = "base"
        elif name in self.maps or name in self.ghosts:
            kind = "map"
        else:
            raise self.error(f"undeclared variable {name!r}", t, "undeclared-variable")
        if kind not in kinds:
            raise self.error(f"{name!r} is a {kind} variable here", t, "type-error")
        return name

    def parse_bool(self):
        left = self.parse_and()
        while self.accept("||"):
            left = Or(left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_unary()
        while self.accept("&&"):
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self):
        if self.accept("!"):
            return Not(self.parse_unary())
        if self.accept("("):
            e = self.parse_bool()
            self.expect(")")
            return e
        lt = self.tok
        if lt.kind == "num":
            raise self.error("literals may not be compared; assign the literal to a constant variable first")
        lt = self.ident()
        op = self.tok
        if not (self.accept("==") or self.accept("!=")):
            raise self.error("expected '==' or '!='")
        rt = self.tok
        if rt.kind == "num":
            raise self.error("literals may not be compared; assign the literal to a constant variable first")
        rt = self.ident()
        for t in (lt, rt):
            if t.text in self.maps or t.text in self.ghosts:
                raise self.error("maps may not be equated in assume statements", t, "map-equality-assume")
        eq = Eq(self.need(lt, ("base",)), self.need(rt, ("base",)))
        return Not(eq) if op.text == "!=" else eq

    def value_atom(self):
        """A stored value: base variable, or write-id literal in IR mode."""
        t = self.tok
        if t.kind == "wid":
            return self.wid_literal()
        return self.need(self.ident(), ("base",))

    def wid_literal(self) -> WriteLit:
        t = self.tok
        if t.kind != "wid":
            raise self.error("expected a write-id literal")
        if not self.ir:
            raise self.error("write-id literals are IR-only", t, "ir-only-construct")
        self.i += 1
        return WriteLit(BOT if t.text == "@bot" else t.text[1:])

    def parse_rhs(self, target: Token, is_map: bool, out: list):
        """Parse an assignment right-hand side; auxiliary commands go to ``out``."""
        t = self.tok
        if is_map:
            if self.accept("const"):
                self.expect("(")
                if self.tok.kind == "num":
                    v = Lit(int(self.tok.text))
                    self.i += 1
                else:
                    v = self.wid_literal()
                self.expect(")")
                return ConstMap(v)
            src = self.need(self.ident(), ("map",))
            updates = []
            while self.accept("["):
                idx = self.need(self.ident(), ("base",))
                self.expect(":=")
                val = self.value_atom()
                self.expect("]")
                updates.append((idx, val))
            if updates:
                return Store(src, tuple(updates))
            return MapVar(src)
        if t.kind == "num":
            self.i += 1
            return Lit(int(t.text))
        if self.at("succ") or self.at("pred"):
            kw = self.tok
            if self.strict:
                raise self.error("succ/pred are disabled by strict grammar", kw, "strict-grammar")
            self.i += 1
            self.expect("(")
            inner = self.parse_rhs(target, False, out)
            self.expect(")")
            if isinstance(inner, Var):
                arg = inner.name
            else:
                arg = self.temp()
                out.append(AssignBase(arg, inner))
            return Succ(arg) if kw.text == "succ" else Pred(arg)
        name = self.ident()
        if self.accept("["):
            m = self.need(name, ("map",))
            idx = self.need(self.ident(), ("base",))
            self.expect("]")
            return Select(m, idx)
        return Var(self.need(name, ("base",)))

    def temp(self) -> str:
        name = f"tmp{BLOCK_SEP}{self.temp_counter}"
        self.temp_counter += 1
        self.base.append(name)
        return name

    def parse_simple(self) -> list:
        """One simple command (possibly desugared into several)."""
        t = self.tok
        if self.accept("skip"):
            return [Skip()]
        if self.accept("havoc"):
            if self.accept("{"):
                if not self.ir:
                    raise self.error("havoc {...} is IR-only", t, "ir-only-construct")
                names = tuple(self.need(x, ("map",)) for x in self.ident_list())
                self.expect("}")
                return [HavocMapsEqual(names)]
            out = []
            for x in self.ident_list():
                n = self.need(x, ("base", "map"))
                out.append(HavocBase(n) if n in self.base else HavocMap(n))
            return out
        if self.accept("assume"):
            return [Assume(self.parse_bool())]
        target = self.ident()
        if self.accept("["):
            m = self.need(target, ("map",))
            idx = self.need(self.ident(), ("base",))
            self.expect("]")
            self.expect(":=")
            if self.tok.kind == "wid":
                return [AssignMap(m, Store(m, ((idx, self.wid_literal()),)))]
            pre: list = []
            rhs = self.parse_rhs(target, False, pre)
            if isinstance(rhs, Var):
                val = rhs.name
            else:
                val = self.temp()
                pre.append(AssignBase(val, rhs))
            return pre + [AssignMap(m, Store(m, ((idx, val),)))]
        self.expect(":=")
        if target.text in self.maps or target.text in self.ghosts:
            return [AssignMap(target.text, self.parse_rhs(target, True, []))]
        name = self.need(target, ("base",))
        pre = []
        rhs = self.parse_rhs(target, False, pre)
        return pre + [AssignBase(name, rhs)]

    def parse_edge_command(self):
        t = self.tok
        if self.accept("{"):
            if not self.ir:
                raise self.error("command sequences are IR-only", t, "ir-only-construct")
            cmds = []
            while not self.accept("}"):
                cmds.extend(self.parse_simple())
                self.expect(";")
            return Seq(tuple(cmds))
        cmds = self.parse_simple()
        if len(cmds) != 1:
            raise self.error("edge commands must be a single command", t)
        return cmds[0]

    # ----------------------------------------------------------------- bodies

    def parse_explicit(self) -> Program:
        self.expect("init")
        initial = self.ident().text
        self.expect(";")
        locs: list[str] = []
        errors: list[str] = []
        if self.accept("locs"):
            locs = [t.text for t in self.ident_list()]
            self.expect(";")
        if self.accept("error"):
            errors = [t.text for t in self.ident_list()]
            self.expect(";")
        edges = []
        seen = list(locs) or [initial]
        while self.tok.kind != "eof":
            src_t = self.ident()
            self.expect("->")
            dst_t = self.ident()
            self.expect(":")
            cmd = self.parse_edge_command()
            self.expect(";")
            if dst_t.text == initial:
                raise self.error(f"edge enters the initial location {initial!r}", dst_t, "edge-into-initial")
            for name in (src_t.text, dst_t.text):
                if locs and name not in locs:
                    raise self.error(f"location {name!r} not listed in locs", src_t, "unknown-location")
                if name not in seen:
                    seen.append(name)
            edges.append((src_t.text, cmd, dst_t.text))
        for e in errors:
            if e not in seen:
                seen.append(e)
        return self.build(tuple(seen), number_statements(edges), initial, tuple(errors))

    def parse_structured(self) -> Program:
        low = _Lowering()
        end = self.block_until_eof(low, low.initial)
        del end
        # canonical names: initial first, then order of first appearance
        order = [low.initial]
        for src, _, dst in low.edges:
            for n in (src, dst):
                if n not in order and n != low.error:
                    order.append(n)
        for n in low.locs:
            if n not in order and n != low.error:
                order.append(n)
        names = {old: f"l{k}" for k, old in enumerate(order)}
        if low.error is not None:
            names[low.error] = ERROR_LOC
            order.append(low.error)
        edges = [(names[s], c, names[d]) for s, c, d in low.edges]
        errors = (ERROR_LOC,) if low.error is not None else ()
        return self.build(tuple(names[n] for n in order), number_statements(edges), "l0", errors)

    def block_until_eof(self, low: _Lowering, cur):
        while self.tok.kind != "eof":
            cur = self.stmt(low, cur)
        return cur

    def block(self, low: _Lowering, cur):
        self.expect("{")
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            cur = self.stmt(low, cur)
        return cur

    def live(self, low: _Lowering, cur):
        return cur if cur is not None else low.fresh()

    def stmt(self, low: _Lowering, cur):
        t = self.tok
        if t.kind == "id" and self.peek().text == ":" and self.peek().kind == "op":
            self.i += 2
            loc = low.labels.get(t.text)
            if loc is None:
                loc = low.fresh()
                low.labels[t.text] = loc
                low.label_locs.add(loc)
            if cur is not None:
                low.connect(cur, loc)
            return loc
        if self.accept("goto"):
            targets = self.ident_list()
            self.expect(";")
            cur = self.live(low, cur)
            for tt in targets:
                loc = low.labels.get(tt.text)
                if loc is None:
                    loc = low.fresh()
                    low.labels[tt.text] = loc
                    low.label_locs.add(loc)
                low.edge(cur, Skip(), loc)
            return None
        if self.accept("if"):
            self.expect("(")
            self.expect("*")
            self.expect(")")
            start = self.live(low, cur)
            end_a = self.block(low, start)
            if self.accept("else"):
                if self.at("if"):
                    end_b = self.stmt(low, start)
                else:
                    end_b = self.block(low, start)
            else:
                end_b = start
            join = None
            ends = [e for e in dict.fromkeys((end_a, end_b)) if e is not None]
            for end in ends:
                if join is None:
                    if end != start and low.mergeable(end):
                        join = end
                        continue
                    join = low.fresh()
                low.connect(end, join)
            return join
        if self.accept("while"):
            self.expect("(")
            self.expect("*")
            self.expect(")")
            head = self.live(low, cur)
            if head == low.initial:
                nxt = low.fresh()
                low.edge(head, Skip(), nxt)
                head = nxt
            end = self.block(low, head)
            if end is not None:
                low.connect(end, head)
            return head
        if self.accept("assert"):
            cond = self.parse_bool()
            self.expect(";")
            cur = self.live(low, cur)
            nxt = low.fresh()
            low.edge(cur, Assume(Not(cond)), low.error_loc())
            low.edge(cur, Assume(cond), nxt)
            return nxt
        cmds = self.parse_simple()
        self.expect(";")
        cur = self.live(low, cur)
        for c in cmds:
            nxt = low.fresh()
            low.edge(cur, c, nxt)
            cur = nxt
        return cur

    def build(self, locs, stmts, initial, errors) -> Program:
        p = Program(
            locations=locs,
            statements=stmts,
            initial=initial,
            base_vars=tuple(self.base),
            map_vars=tuple(self.maps),
            ghost_vars=tuple(self.ghosts),
            families=tuple(self.families),
            error_locs=errors,
        )
        check_well_formed(p)
        return p

    def parse_program(self) -> Program:
        while self.at("var") or self.at("family"):
            if self.at("var"):
                self.parse_decl()
            else:
                self.parse_family()
        if self.at("init"):
            return self.parse_explicit()
        return self.parse_structured()


def parse(text: str, *, ir: bool = False, strict_grammar: bool = False) -> Program:
    """Parse ``.mivl`` source into a well-formed :class:`Program`.

    Raises :class:`IVLError` with a line/column diagnostic otherwise.
    """
    return Parser(text, ir=ir, strict_grammar=strict_grammar).parse_program()
