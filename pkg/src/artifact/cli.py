"""Model files in, reduction pipeline out.

A model file is an INI-like text document: sections in brackets, one
directive per line, '#' starts a comment.  Expressions use infix
arithmetic with I for the imaginary unit, d(x) for differentials,
conj(x) or a postfix ~ for conjugation, ** (or ^) for scalar powers and
^ for the wedge of two forms.  The grammar is documented in the README
alongside the bundled model files.

Exit codes: 0 success, 1 parse error, 2 pipeline failure, 3 fixture
mismatch.
"""

import argparse
import os
import re
import sys

from .symcore import (Context, Symbol, ScalarError, emit_scalar, simplify)
from .exterior import (CovectorBasis, Form, FormError, Rewriter,
                       exterior_derivative, wedge)
from .frame import (FrameError, Model, VectorField, build_frame, dualize,
                    graph_fields, levi_kernel, lie_bracket)
from .gstructure import GStructureError, ParamGroup, lift_structure_equations
from .reduction import (ReductionError, absorb, check_normalization, close,
                        differential_table, stage_invariance)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_PIPELINE = 2
EXIT_FIXTURE = 3

POOL_THRESHOLD = 0.95


class ModelFileError(Exception):
    """Parse or validation failure, annotated with file position."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = "line %d%s: %s" % (
                line, "" if col is None else ":%d" % col, message)
        super().__init__(message)


# ---------------------------------------------------------------------------
# expression parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|->|[~^+\-*/(),;]))")


def tokenize(text, line=None):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ModelFileError("unexpected character %r" % rest[0],
                                 line, pos + 1)
        if m.group(1):
            out.append(("int", int(m.group(1)), m.start(1)))
        elif m.group(2):
            out.append(("name", m.group(2), m.start(2)))
        else:
            out.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    return out


class _Parser:
    """Recursive descent over the token list; builds tuple ASTs."""

    def __init__(self, tokens, line=None):
        self.toks = tokens
        self.pos = 0
        self.line = line

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        t = self.peek()
        if t is None:
            raise ModelFileError("unexpected end of expression", self.line)
        self.pos += 1
        return t

    def expect_op(self, op):
        t = self.take()
        if t[0] != "op" or t[1] != op:
            raise ModelFileError("expected %r, found %r" % (op, t[1]),
                                 self.line, t[2] + 1)

    def at_op(self, *ops):
        t = self.peek()
        return t is not None and t[0] == "op" and t[1] in ops

    def parse(self):
        node = self.p_add()
        t = self.peek()
        if t is not None:
            raise ModelFileError("trailing input at %r" % (t[1],),
                                 self.line, t[2] + 1)
        return node

    def p_add(self):
        node = self.p_mul()
        while self.at_op("+", "-"):
            op = self.take()[1]
            node = ("bin", op, node, self.p_mul())
        return node

    def p_mul(self):
        node = self.p_unary()
        while self.at_op("*", "/"):
            op = self.take()[1]
            node = ("bin", op, node, self.p_unary())
        return node

    def p_unary(self):
        if self.at_op("-"):
            self.take()
            return ("neg", self.p_unary())
        return self.p_caret()

    def p_caret(self):
        node = self.p_post()
        if self.at_op("^", "**"):
            self.take()
            node = ("pow", node, self.p_unary())
        return node

    def p_post(self):
        node = self.p_atom()
        while self.at_op("~"):
            self.take()
            node = ("conj", node)
        return node

    def p_atom(self):
        t = self.take()
        if t[0] == "int":
            return ("int", t[1])
        if t[0] == "name":
            if self.at_op("("):
                self.take()
                args = []
                if not self.at_op(")"):
                    args.append(self.p_add())
                    while self.at_op(",", ";"):
                        self.take()
                        args.append(self.p_add())
                self.expect_op(")")
                return ("call", t[1], args)
            return ("name", t[1])
        if t[0] == "op" and t[1] == "(":
            node = self.p_add()
            self.expect_op(")")
            return node
        raise ModelFileError("unexpected token %r" % (t[1],),
                             self.line, t[2] + 1)


def parse_expr(text, line=None):
    return _Parser(tokenize(text, line), line).parse()


def parse_expr_list(text, line=None):
    """Comma-separated expressions (matrix rows)."""
    parser = _Parser(tokenize(text, line), line)
    out = [parser.p_add()]
    while parser.at_op(","):
        parser.take()
        out.append(parser.p_add())
    t = parser.peek()
    if t is not None:
        raise ModelFileError("trailing input at %r" % (t[1],), line, t[2] + 1)
    return out


# ---------------------------------------------------------------------------
# evaluation

class Scope:
    """Name resolution and capability flags for one evaluation site."""

    def __init__(self, ctx, vals=None, raw=None, table=None,
                 allow_basis_fields=False, line=None):
        self.ctx = ctx
        self.vals = vals or {}
        self.raw = raw
        self.table = table
        self.allow_basis_fields = allow_basis_fields
        self.line = line

    def lookup(self, name):
        if name == "I" and name not in self.vals:
            return self.ctx.i
        if name in self.vals:
            return self.vals[name]
        if name in self.ctx.index:
            return self.ctx.sym(name)
        raise ModelFileError("unknown name %r" % name, self.line)


def _as_int(scalar):
    value = scalar.constant_value()
    if value.y != 0:
        raise ScalarError("exponent %s is not an integer" % scalar)
    x = value.x
    if x.denominator != 1:
        raise ScalarError("exponent %s is not an integer" % scalar)
    return int(x.numerator)


def _same_kind(a, b, what, line):
    for cls in (Form, VectorField):
        if isinstance(a, cls) != isinstance(b, cls):
            raise ModelFileError("cannot %s %s and %s" %
                                 (what, _kind(a), _kind(b)), line)


def _kind(v):
    if isinstance(v, Form):
        return "form"
    if isinstance(v, VectorField):
        return "vector field"
    return "scalar"


def eval_node(node, sc):
    op = node[0]
    if op == "int":
        return sc.ctx.const(node[1])
    if op == "name":
        return sc.lookup(node[1])
    if op == "neg":
        v = eval_node(node[1], sc)
        if isinstance(v, (Form, VectorField)):
            return v.scale(-sc.ctx.one)
        return -v
    if op == "conj":
        return eval_node(node[1], sc).conjugate()
    if op == "bin":
        return _eval_bin(node, sc)
    if op == "pow":
        return _eval_pow(node, sc)
    if op == "call":
        return _eval_call(node, sc)
    raise ModelFileError("malformed expression node %r" % (op,), sc.line)


def _eval_bin(node, sc):
    _, op, ln, rn = node
    a = eval_node(ln, sc)
    b = eval_node(rn, sc)
    if op in ("+", "-"):
        _same_kind(a, b, "add" if op == "+" else "subtract", sc.line)
        return a + b if op == "+" else a - b
    if op == "*":
        if isinstance(a, (Form, VectorField)) and isinstance(b, (Form, VectorField)):
            raise ModelFileError("use ^ for the wedge of two forms", sc.line)
        if isinstance(a, (Form, VectorField)):
            return a.scale(b)
        if isinstance(b, (Form, VectorField)):
            return b.scale(a)
        return a * b
    # division
    if isinstance(b, (Form, VectorField)):
        raise ModelFileError("cannot divide by a %s" % _kind(b), sc.line)
    if isinstance(a, (Form, VectorField)):
        return a.scale(sc.ctx.one / b)
    return a / b


def _eval_pow(node, sc):
    a = eval_node(node[1], sc)
    b = eval_node(node[2], sc)
    if isinstance(a, Form) and isinstance(b, Form):
        return wedge(a, b)
    if isinstance(a, Form) or isinstance(b, Form) \
            or isinstance(a, VectorField) or isinstance(b, VectorField):
        raise ModelFileError("^ needs two forms (wedge) or two scalars "
                             "(power)", sc.line)
    return a ** _as_int(b)


def _bare_name(arg, what, line):
    if arg[0] != "name":
        raise ModelFileError("%s expects a plain name" % what, line)
    return arg[1]


def _eval_call(node, sc):
    _, fn, args = node
    if fn == "conj":
        if len(args) != 1:
            raise ModelFileError("conj takes one argument", sc.line)
        return eval_node(args[0], sc).conjugate()
    if fn == "d":
        if sc.raw is None:
            raise ModelFileError("d() is not available here", sc.line)
        name = _bare_name(args[0] if args else ("", ""), "d", sc.line)
        if name not in sc.ctx.index:
            raise ModelFileError("d() of unknown symbol %r" % name, sc.line)
        return sc.raw.d(name)
    if fn == "D":
        if not sc.allow_basis_fields:
            raise ModelFileError("D() is not available here", sc.line)
        name = _bare_name(args[0] if args else ("", ""), "D", sc.line)
        if name not in sc.ctx.index:
            raise ModelFileError("D() of unknown coordinate %r" % name,
                                 sc.line)
        return VectorField(sc.ctx, {name: sc.ctx.one})
    if fn == "bracket":
        if len(args) != 2:
            raise ModelFileError("bracket takes two vector fields", sc.line)
        x = eval_node(args[0], sc)
        y = eval_node(args[1], sc)
        if not (isinstance(x, VectorField) and isinstance(y, VectorField)):
            raise ModelFileError("bracket takes two vector fields", sc.line)
        return lie_bracket(x, y)
    if fn == "coef":
        if sc.table is None:
            raise ModelFileError("coef() needs a computed stage", sc.line)
        if len(args) != 3:
            raise ModelFileError("coef takes (dROW; a, b)", sc.line)
        row = _bare_name(args[0], "coef", sc.line)
        if not row.startswith("d") or len(row) < 2:
            raise ModelFileError("coef row must be written dROW", sc.line)
        a = _bare_name(args[1], "coef", sc.line)
        b = _bare_name(args[2], "coef", sc.line)
        return sc.table.coef(row[1:], a, b)
    if fn == "levifield":
        builder = sc.vals.get("__levifield__")
        if builder is None:
            raise ModelFileError("levifield() needs a [frame] graph",
                                 sc.line)
        return builder(_bare_name(args[0] if args else ("", ""),
                                  "levifield", sc.line), sc.line)
    raise ModelFileError("unknown function %r" % fn, sc.line)


# ---------------------------------------------------------------------------
# model file structure

class NormSpec:
    def __init__(self, kind, param, value_text, cite_text, target_text, line):
        self.kind = kind          # 'norm' | 'real'
        self.param = param
        self.value_text = value_text
        self.cite_text = cite_text
        self.target_text = target_text
        self.line = line


class StageSpec:
    def __init__(self, name, line):
        self.name = name
        self.line = line
        self.params = []
        self.nonzero = []
        self.rows = []            # list of (line, [ast])
        self.mcs = []             # (name, partner-or-None, ast, line)
        self.norms = []
        self.rebases = []         # (base name, ast, line)


class FixtureSpec:
    def __init__(self, flag, kind, args, expr_text, line, text):
        self.flag = flag          # 'check' | 'pool' | 'inconclusive'
        self.kind = kind
        self.args = args
        self.expr_text = expr_text
        self.line = line
        self.text = text


class ModelSpec:
    def __init__(self, path):
        self.path = path
        self.name = None
        self.coords = []          # (reality, [names], line)
        self.params = []          # (reality, [names], line)
        self.nonvanishing = []    # (ast, line)
        self.frame_steps = []     # (verb, payload..., line)
        self.coframe = []
        self.coframe_conj = {}
        self.lifted = []
        self.lifted_conj = {}
        self.stages = []
        self.prolong_steps = []   # (verb, payload, line)
        self.close_basis = None
        self.fixtures = []

    def stage_names(self):
        names = [s.name for s in self.stages]
        for verb, payload, _line in self.prolong_steps:
            if verb == "table":
                names.append(payload[0])
        return names


_SECTION_RE = re.compile(r"^\[([a-zA-Z0-9_ .-]+)\]$")

_FIXTURE_KINDS = {
    "field": 2, "scalar": 1, "form": 1, "base": 1, "coef": 4,
    "eq": 2, "final": 1, "dim": 0,
}


def parse_model(path):
    """Read and validate a model file; returns a ModelSpec."""
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ModelFileError("cannot read %s: %s" % (path, exc))
    spec = ModelSpec(path)
    section = None
    stage = None
    for no, rawline in enumerate(lines, 1):
        text = rawline.split("#", 1)[0].strip()
        if not text:
            continue
        m = _SECTION_RE.match(text)
        if m:
            section, stage = _open_section(spec, m.group(1).strip(), no)
            continue
        if section is None:
            raise ModelFileError("directive before any section", no)
        _parse_directive(spec, section, stage, text, no)
    _validate(spec)
    return spec


def _open_section(spec, header, no):
    words = header.split()
    if words[0] == "stage":
        if len(words) != 2:
            raise ModelFileError("stage sections are named: [stage G1]", no)
        stage = StageSpec(words[1], no)
        spec.stages.append(stage)
        return "stage", stage
    if len(words) != 1 or words[0] not in (
            "model", "coordinates", "parameters", "nonvanishing", "frame",
            "prolong", "close", "fixtures"):
        raise ModelFileError("unknown section [%s]" % header, no)
    return words[0], None


def _split_eq(text, no):
    if "=" not in text:
        raise ModelFileError("expected 'head = expression'", no)
    head, expr = text.split("=", 1)
    return head.split(), expr.strip()


def _parse_directive(spec, section, stage, text, no):
    words = text.split()
    if section == "model":
        if words[0] == "name" and len(words) == 2:
            spec.name = words[1]
            return
        raise ModelFileError("unknown directive in [model]", no)
    if section == "coordinates":
        if words[0] in ("complex", "real") and len(words) > 1:
            spec.coords.append((words[0], words[1:], no))
            return
        raise ModelFileError("coordinates are declared 'complex z' or "
                             "'real u1'", no)
    if section == "parameters":
        if words[0] in ("complex", "real", "prolong") and len(words) > 1:
            spec.params.append((words[0], words[1:], no))
            return
        raise ModelFileError("parameters are declared 'complex a', 'real a' "
                             "or 'prolong t'", no)
    if section == "nonvanishing":
        if words[0] == "exprs":
            rest = text.split(None, 1)[1]
            for ast in parse_expr_list(rest, no):
                spec.nonvanishing.append((ast, no))
            return
        raise ModelFileError("unknown directive in [nonvanishing]", no)
    if section == "frame":
        return _parse_frame_directive(spec, text, words, no)
    if section == "stage":
        return _parse_stage_directive(spec, stage, text, words, no)
    if section == "prolong":
        return _parse_prolong_directive(spec, text, words, no)
    if section == "close":
        if words[0] == "basis" and len(words) > 1:
            spec.close_basis = (words[1:], no)
            return
        raise ModelFileError("the [close] section takes 'basis NAMES...'", no)
    if section == "fixtures":
        return _parse_fixture(spec, text, words, no)
    raise ModelFileError("unknown section state", no)


def _parse_frame_directive(spec, text, words, no):
    if words[0] in ("field", "graph"):
        head, expr = _split_eq(text, no)
        if len(head) != 2:
            raise ModelFileError("'%s NAME = expression'" % words[0], no)
        spec.frame_steps.append((words[0], head[1], parse_expr(expr, no), no))
        return
    if words[0] == "kernelfield" and len(words) in (2, 3):
        scalar = words[2] if len(words) == 3 else words[1].lower()
        spec.frame_steps.append(("kernelfield", (words[1], scalar), None, no))
        return
    if words[0] == "frame" and len(words) > 1:
        spec.frame_steps.append(("frame", words[1:], None, no))
        return
    if words[0] == "coframe" and len(words) > 1:
        spec.coframe = words[1:]
        return
    if words[0] == "lifted" and len(words) > 1:
        spec.lifted = words[1:]
        return
    if words[0] == "conj" and len(words) == 3:
        spec.frame_steps.append(("conj", (words[1], words[2]), None, no))
        return
    raise ModelFileError("unknown directive %r in [frame]" % words[0], no)


def _parse_stage_directive(spec, stage, text, words, no):
    if words[0] == "params" and len(words) > 1:
        stage.params.extend(words[1:])
        return
    if words[0] == "nonzero":
        stage.nonzero.extend(words[1:])
        return
    if words[0] == "row":
        rest = text.split(None, 1)[1] if len(words) > 1 else ""
        stage.rows.append((no, parse_expr_list(rest, no)))
        return
    if words[0] == "mc":
        head, expr = _split_eq(text, no)
        if len(head) == 2:
            stage.mcs.append((head[1], None, parse_expr(expr, no), no))
            return
        if len(head) == 3:
            stage.mcs.append((head[1], head[2], parse_expr(expr, no), no))
            return
        raise ModelFileError("'mc NAME [CONJNAME] = expression'", no)
    if words[0] in ("norm", "real"):
        return _parse_norm(stage, text, words, no)
    if words[0] == "rebase":
        head, expr = _split_eq(text, no)
        if len(head) != 2:
            raise ModelFileError("'rebase NAME = expression'", no)
        stage.rebases.append((head[1], parse_expr(expr, no), no))
        return
    raise ModelFileError("unknown directive %r in [stage %s]"
                         % (words[0], stage.name), no)


def _parse_norm(stage, text, words, no):
    body = text.split(None, 1)[1] if len(words) > 1 else ""
    if " citing " not in body:
        raise ModelFileError("normalizations must cite an essential value: "
                             "'... citing EXPR -> TARGET'", no)
    left, cite = body.split(" citing ", 1)
    if "->" not in cite:
        raise ModelFileError("citation needs '-> TARGET'", no)
    cite_text, target_text = cite.rsplit("->", 1)
    if words[0] == "real":
        param = left.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", param):
            raise ModelFileError("'real PARAM citing ...'", no)
        stage.norms.append(NormSpec("real", param, None,
                                    cite_text.strip(), target_text.strip(), no))
        return
    if "=" not in left:
        raise ModelFileError("'norm PARAM = VALUE citing ...'", no)
    param, value = left.split("=", 1)
    stage.norms.append(NormSpec("norm", param.strip(), value.strip(),
                                cite_text.strip(), target_text.strip(), no))


def _parse_prolong_directive(spec, text, words, no):
    if words[0] == "define":
        head, expr = _split_eq(text, no)
        if len(head) != 2:
            raise ModelFileError("'define NAME = expression'", no)
        spec.prolong_steps.append(("define", (head[1], parse_expr(expr, no)),
                                   no))
        return
    if words[0] == "table":
        if len(words) < 3:
            raise ModelFileError("'table NAME basis-names...'", no)
        spec.prolong_steps.append(("table", (words[1], words[2:]), no))
        return
    raise ModelFileError("unknown directive %r in [prolong]" % words[0], no)


def _parse_fixture(spec, text, words, no):
    flag = words[0]
    if flag not in ("check", "pool", "inconclusive"):
        raise ModelFileError("fixtures start with check, pool or "
                             "inconclusive", no)
    if len(words) < 2 or words[1] not in _FIXTURE_KINDS:
        raise ModelFileError("unknown fixture kind (one of %s)"
                             % ", ".join(sorted(_FIXTURE_KINDS)), no)
    kind = words[1]
    nargs = _FIXTURE_KINDS[kind]
    head, expr = _split_eq(text, no)
    args = head[2:]
    if len(args) != nargs:
        raise ModelFileError("fixture %r takes %d argument(s)"
                             % (kind, nargs), no)
    parse_expr(expr, no)  # syntax check now, evaluate later
    spec.fixtures.append(FixtureSpec(flag, kind, args, expr, no,
                                     " ".join(head[1:])))


def _validate(spec):
    if spec.name is None:
        raise ModelFileError("missing [model] section with 'name'")
    if not spec.coords:
        raise ModelFileError("missing [coordinates] section")
    if not spec.coframe:
        raise ModelFileError("the [frame] section must declare a coframe")
    if spec.stages and not spec.lifted:
        raise ModelFileError("stages need a 'lifted' coframe declaration")
    if spec.lifted and len(spec.lifted) != len(spec.coframe):
        raise ModelFileError("lifted coframe and base coframe differ in "
                             "length")
    names = spec.stage_names()
    if len(set(names)) != len(names):
        raise ModelFileError("duplicate stage names: %s" % names)
    for st in spec.stages:
        if len(st.rows) != len(spec.coframe):
            raise ModelFileError("stage %s has %d matrix rows for a "
                                 "%d-coframe" % (st.name, len(st.rows),
                                                 len(spec.coframe)),
                                 st.line)
        for line, row in st.rows:
            if len(row) != len(spec.coframe):
                raise ModelFileError("matrix row has %d entries, expected %d"
                                     % (len(row), len(spec.coframe)), line)


# ---------------------------------------------------------------------------
# pipeline execution

class StageRecord:
    def __init__(self, name, stage, absorption):
        self.name = name
        self.stage = stage
        self.absorption = absorption
        self.norms = []           # human-readable strings
        self.group_dim = len(stage.group.params) if stage.group else 0


class Report:
    def __init__(self, spec):
        self.spec = spec
        self.base_forms = {}      # coframe name -> raw Form
        self.base_eqs = {}        # coframe name -> 2-form over base basis
        self.frame_fields = {}
        self.scalars = {}
        self.stages = []          # StageRecord, in run order
        self.tables = {}          # stage name -> TorsionTable
        self.equations = {}       # stage name -> {row: 2-form}
        self.bases = {}           # stage name -> CovectorBasis
        self.algebra = None       # LieAlgebraResult or None
        self.fixtures = []        # (FixtureSpec, verdict, got, want)

    def fixture_counts(self):
        counts = {"pass": 0, "fail": 0, "inconclusive": 0,
                  "pool": 0, "pool_pass": 0}
        for fx, verdict, _got, _want in self.fixtures:
            if fx.flag == "pool":
                counts["pool"] += 1
                if verdict == "pass":
                    counts["pool_pass"] += 1
            if verdict == "pass":
                counts["pass"] += 1
            elif verdict == "fail":
                counts["fail"] += 1
            else:
                counts["inconclusive"] += 1
        return counts

    def fixtures_ok(self):
        counts = self.fixture_counts()
        if counts["fail"]:
            return False
        if counts["pool"]:
            return counts["pool_pass"] >= POOL_THRESHOLD * counts["pool"]
        return True


class Runner:
    """Executes one parsed model file."""

    def __init__(self, spec):
        self.spec = spec
        self.report = Report(spec)
        self._build_context()
        self._levi_cache = None

    # -- setup ----------------------------------------------------------

    def _build_context(self):
        spec = self.spec
        syms = []
        self.coordinates = []
        for reality, names, line in spec.coords:
            for n in names:
                if reality == "complex":
                    syms += [Symbol(n, "coordinate", n + "b"),
                             Symbol(n + "b", "coordinate", n)]
                    self.coordinates += [n, n + "b"]
                else:
                    syms.append(Symbol(n, "coordinate", n))
                    self.coordinates.append(n)
        self.prolong_params = []
        for reality, names, line in spec.params:
            for n in names:
                if reality == "complex":
                    syms += [Symbol(n, "group", n + "b"),
                             Symbol(n + "b", "group", n)]
                elif reality == "real":
                    syms.append(Symbol(n, "group", n))
                else:
                    syms.append(Symbol(n, "prolongation", n))
                    self.prolong_params.append(n)
        try:
            self.ctx = Context(syms)
        except ScalarError as exc:
            raise ModelFileError(str(exc))
        self.raw = CovectorBasis.raw_basis(self.ctx)
        sc = Scope(self.ctx, line=None)
        self.unit_exprs = [eval_node(ast, sc)
                           for ast, _line in spec.nonvanishing]

    def _scalar_scope(self, line=None, table=None):
        return Scope(self.ctx, table=table, line=line)

    def _frame_scope(self, line=None):
        vals = dict(self.report.frame_fields)
        vals.update(self.report.scalars)
        vals["__levifield__"] = self._levifield
        return Scope(self.ctx, vals=vals, raw=self.raw,
                     allow_basis_fields=True, line=line)

    # -- frame ----------------------------------------------------------

    def _levifield(self, zname, line):
        if self._levi_cache is None:
            if self.model.graph is None:
                raise ModelFileError("levifield() needs a graph", line)
            self._levi_cache = graph_fields(self.model, self.raw)
        _A, L, _sigma0, _levi = self._levi_cache
        if zname not in L:
            raise ModelFileError("no tangent field for %r" % zname, line)
        return L[zname]

    def run_frame(self):
        spec = self.spec
        self.model = Model(name=spec.name, ctx=self.ctx,
                           coordinates=self.coordinates,
                           coframe_names=list(spec.coframe))
        rep = self.report
        for verb, payload, extra, line in spec.frame_steps:
            if verb == "graph":
                self.model.graph = self._expect_scalar(
                    eval_node(extra, self._frame_scope(line)), line)
            elif verb == "field":
                v = eval_node(extra, self._frame_scope(line))
                if not isinstance(v, VectorField):
                    raise ModelFileError("field %r is not a vector field"
                                         % payload, line)
                rep.frame_fields[payload] = v
            elif verb == "kernelfield":
                fname, sname = payload
                if self.model.graph is None:
                    raise ModelFileError("kernelfield needs a graph", line)
                k, K, _sigma0, _levi = levi_kernel(self.model, self.raw)
                rep.frame_fields[fname] = K
                rep.scalars[sname] = simplify(k)
            elif verb == "frame":
                for n in payload:
                    if n not in rep.frame_fields:
                        raise ModelFileError("frame lists unknown field %r"
                                             % n, line)
                self.model.frame_names = list(payload)
                self.model.frame = {n: rep.frame_fields[n] for n in payload}
            elif verb == "conj":
                a, b = payload
                if a in spec.coframe:
                    self.model.coframe_conj[a] = b
                elif a in spec.lifted:
                    spec.lifted_conj[a] = b
                else:
                    raise ModelFileError("conj pairs a coframe or lifted "
                                         "name, got %r" % a, line)
        if not self.model.frame_names:
            raise ModelFileError("the [frame] section never declared the "
                                 "frame order")
        build_frame(self.model)
        cobasis = dualize(self.model, self.raw)
        self.base_names = list(spec.coframe)
        self.base_real = {n: cobasis.realizations[n] for n in self.base_names}
        rep.base_forms = dict(self.base_real)
        basis0 = CovectorBasis(self.ctx, self.base_names,
                               conj=self.model.coframe_conj,
                               realizations=self.base_real)
        rw0 = Rewriter(basis0)
        for n in self.base_names:
            rep.base_eqs[n] = rw0.rewrite(
                exterior_derivative(self.base_real[n]))
        self.base_basis = basis0

    def _expect_scalar(self, v, line):
        if isinstance(v, (Form, VectorField)):
            raise ModelFileError("expected a scalar, got a %s" % _kind(v),
                                 line)
        return v

    # -- stages ---------------------------------------------------------

    def run_stage(self, st):
        ctx = self.ctx
        ctx.set_nonvanishing(st.nonzero, self.unit_exprs)
        sc = self._scalar_scope(st.line)
        matrix = []
        for line, row in st.rows:
            rsc = self._scalar_scope(line)
            matrix.append([self._expect_scalar(eval_node(a, rsc), line)
                           for a in row])
        mc_real, mc_names, mc_conj = {}, [], {}
        for name, partner, ast, line in st.mcs:
            msc = Scope(ctx, raw=self.raw, line=line)
            form = eval_node(ast, msc)
            if not isinstance(form, Form):
                raise ModelFileError("mc %r is not a 1-form" % name, line)
            mc_names.append(name)
            mc_real[name] = form
            if partner:
                mc_names.append(partner)
                mc_real[partner] = form.conjugate()
                mc_conj[name] = partner
        group = ParamGroup(name=st.name, params=list(st.params),
                           nonzero=set(st.nonzero), matrix=matrix,
                           mc_names=mc_names, mc_conj=mc_conj,
                           mc_real=mc_real)
        stage = lift_structure_equations(group, self.raw, self.base_names,
                                         self.base_real, self.spec.lifted,
                                         self.spec.lifted_conj)
        if self.report.stages:
            prev = self.report.stages[-1]
            stage_invariance(prev.stage.lifted, self._last_bindings,
                             stage.lifted)
        absorption = absorb(stage)
        record = StageRecord(st.name, stage, absorption)
        self.report.stages.append(record)
        self.report.tables[st.name] = stage.table
        self.report.equations[st.name] = stage.equations
        self.report.bases[st.name] = stage.basis
        self._run_norms(st, record)
        self._run_rebases(st)
        return record

    def _run_norms(self, st, record):
        ctx = self.ctx
        bindings = {}
        reals = []
        checks = []
        for norm in st.norms:
            if norm.param not in ctx.index:
                raise ModelFileError("unknown parameter %r" % norm.param,
                                     norm.line)
            partner = ctx.conj_name(norm.param)
            if norm.kind == "real":
                bindings[partner] = ctx.sym(norm.param)
                reals.append(norm.param)
                record.norms.append("%s real" % norm.param)
            else:
                sc = self._scalar_scope(norm.line,
                                        table=record.stage.table)
                value = self._expect_scalar(
                    eval_node(parse_expr(norm.value_text, norm.line), sc),
                    norm.line)
                bindings[norm.param] = value
                if partner != norm.param and partner not in bindings:
                    bindings[partner] = value.conjugate()
                record.norms.append(
                    "%s := %s" % (norm.param, emit_scalar(value)))
            checks.append(norm)
        for norm in checks:
            sc = self._scalar_scope(norm.line, table=record.stage.table)
            cite = self._expect_scalar(
                eval_node(parse_expr(norm.cite_text, norm.line), sc),
                norm.line)
            target = self._expect_scalar(
                eval_node(parse_expr(norm.target_text, norm.line), sc),
                norm.line)
            check_normalization(cite, target, bindings, record.absorption,
                                ctx, label="stage %s, line %d"
                                % (st.name, norm.line))
        for name in reals:
            ctx.declare_real(name)
        self._last_bindings = bindings

    def _run_rebases(self, st):
        for name, ast, line in st.rebases:
            if name not in self.base_names:
                raise ModelFileError("rebase of unknown coframe element %r"
                                     % name, line)
            vals = dict(self.base_real)
            sc = Scope(self.ctx, vals=vals, raw=self.raw, line=line)
            form = eval_node(ast, sc)
            if not isinstance(form, Form):
                raise ModelFileError("rebase of %r is not a 1-form" % name,
                                     line)
            self.base_real[name] = form
            partner = self.model.coframe_conj.get(name)
            if partner is None:
                for a, b in self.model.coframe_conj.items():
                    if b == name:
                        partner = a
            if partner and partner != name:
                self.base_real[partner] = form.conjugate()

    # -- prolongation and closure ----------------------------------------

    def _form_env(self):
        """Names visible to prolongation/closure expressions."""
        vals = {}
        if self.report.stages:
            last = self.report.stages[-1]
            vals.update(last.stage.lifted)
            vals.update(last.stage.group.mc_real)
        vals.update(getattr(self, "defined", {}))
        return vals

    def run_prolong(self):
        self.defined = {}
        self.defined_conj = {}
        table = self.report.stages[-1].stage.table if self.report.stages \
            else None
        for verb, payload, line in self.spec.prolong_steps:
            if verb == "define":
                name, ast = payload
                sc = Scope(self.ctx, vals=self._form_env(), raw=self.raw,
                           table=table, line=line)
                form = eval_node(ast, sc)
                if not isinstance(form, Form):
                    raise ModelFileError("define %r is not a 1-form" % name,
                                         line)
                self.defined[name] = form
                if ast[0] == "call" and ast[1] == "conj" \
                        and ast[2][0][0] == "name":
                    self.defined_conj[ast[2][0][1]] = name
            else:  # table
                pname, names = payload
                table = self._build_table(pname, names, line)
        self._last_table = table

    def _build_table(self, pname, names, line):
        vals = self._form_env()
        realized = {}
        conj = {}
        for n in names:
            if n in vals:
                realized[n] = vals[n]
            elif n.startswith("d") and n[1:] in self.prolong_params:
                realized[n] = self.raw.d(n[1:])
            else:
                raise ModelFileError("table lists unknown form %r" % n, line)
        conj.update({a: b for a, b in self.spec.lifted_conj.items()
                     if a in names and b in names})
        conj.update({a: b for a, b in self.defined_conj.items()
                     if a in names and b in names})
        basis, equations, table = differential_table(self.ctx, names, conj,
                                                     realized)
        self.report.tables[pname] = table
        self.report.equations[pname] = equations
        self.report.bases[pname] = basis
        return table

    def run_close(self):
        names, line = self.spec.close_basis
        vals = self._form_env()
        realized = {}
        for n in names:
            if n not in vals:
                raise ModelFileError("close basis lists unknown form %r" % n,
                                     line)
            realized[n] = vals[n]
        conj = {a: b for a, b in self.spec.lifted_conj.items()
                if a in names and b in names}
        conj.update({a: b for a, b in getattr(self, "defined_conj", {}).items()
                     if a in names and b in names})
        if self.report.stages:
            group = self.report.stages[-1].stage.group
            conj.update({a: b for a, b in group.mc_conj.items()
                         if a in names and b in names})
        self.report.algebra = close(self.ctx, names, conj, realized)

    # -- orchestration ----------------------------------------------------

    def run(self, until=None):
        self.ctx.set_nonvanishing([], self.unit_exprs)
        self.run_frame()
        self._last_bindings = {}
        for st in self.spec.stages:
            self.run_stage(st)
            if until is not None and st.name == until:
                return self.report
        if self.spec.prolong_steps:
            self.run_prolong()
            prolong_names = [payload[0] for verb, payload, _l
                             in self.spec.prolong_steps if verb == "table"]
            if until is not None and until in prolong_names:
                return self.report
        if until is not None:
            raise ModelFileError("unknown stage %r" % until)
        if self.spec.close_basis:
            self.run_close()
        return self.report


# ---------------------------------------------------------------------------
# fixtures

def _emit_value(v):
    if isinstance(v, Form):
        return emit_form(v)
    if isinstance(v, int):
        return str(v)
    return emit_scalar(v)


def _values_equal(got, want):
    if isinstance(got, Form) != isinstance(want, Form):
        form, other = (got, want) if isinstance(got, Form) else (want, got)
        if isinstance(other, VectorField):
            return False
        # a bare 0 on the stated side of a form fixture means the zero form
        return other.is_zero() and not form.terms
    return got == want


def check_fixtures(runner):
    rep = runner.report
    for fx in rep.spec.fixtures:
        try:
            got, want = _fixture_sides(runner, fx)
            ok = _values_equal(got, want)
        except (ModelFileError, ScalarError, FormError, KeyError) as exc:
            got, want, ok = "error: %s" % exc, "", False
        if ok:
            verdict = "pass"
        elif fx.flag == "inconclusive":
            verdict = "inconclusive"
        else:
            verdict = "fail"
        rep.fixtures.append((fx, verdict,
                             got if isinstance(got, str) else _emit_value(got),
                             want if isinstance(want, str) else _emit_value(want)))


def _fixture_sides(runner, fx):
    rep = runner.report
    ctx = runner.ctx
    ast = parse_expr(fx.expr_text, fx.line)
    if fx.kind == "field":
        name, coord = fx.args
        if name not in rep.frame_fields:
            raise ModelFileError("unknown field %r" % name, fx.line)
        got = rep.frame_fields[name].components.get(coord, ctx.zero)
        want = eval_node(ast, runner._scalar_scope(fx.line))
        return got, want
    if fx.kind == "scalar":
        name, = fx.args
        if name not in rep.scalars:
            raise ModelFileError("unknown scalar %r" % name, fx.line)
        got = rep.scalars[name]
        want = eval_node(ast, runner._scalar_scope(fx.line))
        return got, want
    if fx.kind == "form":
        name, = fx.args
        if name not in rep.base_forms:
            raise ModelFileError("unknown coframe form %r" % name, fx.line)
        got = rep.base_forms[name]
        want = eval_node(ast, Scope(ctx, raw=runner.raw, line=fx.line))
        return got, want
    if fx.kind == "base":
        name, = fx.args
        if name not in rep.base_eqs:
            raise ModelFileError("unknown coframe form %r" % name, fx.line)
        got = rep.base_eqs[name]
        vals = {n: runner.base_basis.d(n) for n in runner.base_names}
        want = eval_node(ast, Scope(ctx, vals=vals, line=fx.line))
        return got, want
    if fx.kind == "coef":
        stage, row, a, b = fx.args
        if stage not in rep.tables:
            raise ModelFileError("unknown stage %r" % stage, fx.line)
        got = rep.tables[stage].coef(row, a, b)
        want = eval_node(ast, runner._scalar_scope(fx.line))
        return got, want
    if fx.kind == "eq":
        stage, row = fx.args
        if stage not in rep.equations:
            raise ModelFileError("unknown stage %r" % stage, fx.line)
        if row not in rep.equations[stage]:
            raise ModelFileError("unknown equation row %r" % row, fx.line)
        got = rep.equations[stage][row]
        basis = rep.bases[stage]
        vals = {n: basis.d(n) for n in basis.names}
        want = eval_node(ast, Scope(ctx, vals=vals, line=fx.line))
        return got, want
    if fx.kind == "final":
        name, = fx.args
        if rep.algebra is None:
            raise ModelFileError("no closed algebra in this run", fx.line)
        got = rep.algebra.structure[name]
        basis = rep.algebra.basis
        vals = {n: basis.d(n) for n in basis.names}
        want = eval_node(ast, Scope(ctx, vals=vals, line=fx.line))
        return got, want
    if fx.kind == "dim":
        if rep.algebra is None:
            raise ModelFileError("no closed algebra in this run", fx.line)
        got = rep.algebra.dim
        want = _as_int(eval_node(ast, runner._scalar_scope(fx.line)))
        return got, want
    raise ModelFileError("unknown fixture kind %r" % fx.kind, fx.line)


# ---------------------------------------------------------------------------
# emission

def emit_form(form):
    """Canonical machine text for a Form: sorted words, emitted scalars."""
    if not form.terms:
        return "0"
    names = form.basis.names
    if form.basis.raw:
        names = tuple("d(%s)" % n for n in names)
    parts = []
    for w in sorted(form.terms):
        word = "^".join(names[i] for i in w) if w else "1"
        parts.append("(%s)*%s" % (emit_scalar(form.terms[w]), word))
    return " + ".join(parts)


def emit_machine(report):
    spec = report.spec
    out = ["model %s" % spec.name]
    out.append("coframe %s" % " ".join(spec.coframe))
    for n in spec.coframe:
        out.append("form %s = %s" % (n, emit_form(report.base_forms[n])))
        out.append("base %s = %s" % (n, emit_form(report.base_eqs[n])))
    for record in report.stages:
        out.append("stage %s params %d" % (record.name, record.group_dim))
        table = record.stage.table
        cof = table.coframe_names
        order = {n: i for i, n in enumerate(cof)}
        for (row, a, b) in sorted(table.torsion,
                                  key=lambda k: (order[k[0]], order[k[1]],
                                                 order[k[2]])):
            out.append("coef %s %s %s %s = %s"
                       % (record.name, row, a, b,
                          emit_scalar(table.torsion[(row, a, b)])))
        for e in sorted(emit_scalar(x) for x in record.absorption.essentials):
            out.append("essential %s = %s" % (record.name, e))
        for n in record.norms:
            out.append("norm %s %s" % (record.name, n))
    for pname in report.tables:
        if any(r.name == pname for r in report.stages):
            continue
        table = report.tables[pname]
        cof = table.coframe_names
        order = {n: i for i, n in enumerate(cof)}
        out.append("stage %s prolonged" % pname)
        for (row, a, b) in sorted(table.torsion,
                                  key=lambda k: (order[k[0]], order[k[1]],
                                                 order[k[2]])):
            out.append("coef %s %s %s %s = %s"
                       % (pname, row, a, b,
                          emit_scalar(table.torsion[(row, a, b)])))
    if report.algebra is not None:
        out.append("final dim %d" % report.algebra.dim)
        for n in report.algebra.basis.names:
            out.append("final %s = %s"
                       % (n, emit_form(report.algebra.structure[n])))
    if report.fixtures:
        for fx, verdict, got, want in report.fixtures:
            line = "fixture %s %s %s" % (verdict, fx.flag, fx.text)
            if verdict != "pass":
                line += " | engine %s | stated %s" % (got, want)
            out.append(line)
        c = report.fixture_counts()
        out.append("fixtures pass %d fail %d inconclusive %d pool %d/%d"
                   % (c["pass"], c["fail"], c["inconclusive"],
                      c["pool_pass"], c["pool"]))
    return "\n".join(out) + "\n"


def emit_text(report):
    spec = report.spec
    out = ["model %s" % spec.name, "", "base coframe:"]
    for n in spec.coframe:
        out.append("  %s = %s" % (n, report.base_forms[n]))
    out.append("")
    out.append("base structure equations:")
    for n in spec.coframe:
        out.append("  d %s = %s" % (n, report.base_eqs[n]))
    for record in report.stages:
        out.append("")
        out.append("stage %s (%d group parameters)"
                   % (record.name, record.group_dim))
        for row in record.stage.table.coframe_names:
            out.append("  d %s = %s" % (row, record.stage.equations[row]))
        ess = sorted(emit_scalar(x) for x in record.absorption.essentials)
        out.append("  essential torsion: %s"
                   % ("; ".join(ess) if ess else "none"))
        for n in record.norms:
            out.append("  normalize %s" % n)
    for pname in report.equations:
        if any(r.name == pname for r in report.stages):
            continue
        out.append("")
        out.append("prolonged coframe %s:" % pname)
        for row, form in report.equations[pname].items():
            out.append("  d %s = %s" % (row, form))
    if report.algebra is not None:
        out.append("")
        out.append("closed Lie algebra, dimension %d:" % report.algebra.dim)
        for n in report.algebra.basis.names:
            out.append("  d %s = %s" % (n, report.algebra.structure[n]))
    if report.fixtures:
        out.append("")
        c = report.fixture_counts()
        out.append("fixtures: %d pass, %d fail, %d inconclusive"
                   % (c["pass"], c["fail"], c["inconclusive"]))
        if c["pool"]:
            out.append("appendix pool: %d/%d exact" % (c["pool_pass"],
                                                       c["pool"]))
        for fx, verdict, got, want in report.fixtures:
            if verdict == "pass":
                continue
            out.append("  %s %s %s" % (verdict.upper(), fx.flag, fx.text))
            out.append("    engine: %s" % got)
            out.append("    stated: %s" % want)
    return "\n".join(out) + "\n"


_GREEK = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta",
          "theta", "kappa", "lambda", "mu", "nu", "xi", "pi", "rho",
          "sigma", "tau", "phi", "chi", "psi", "omega", "Lambda"}


def _latex_name(name, ctx=None):
    bar = False
    if ctx is not None and name in ctx.index:
        partner = ctx.conj_name(name)
        if partner != name and name == partner + "b":
            bar = True
            name = partner
    elif name.endswith("b") and len(name) > 1:
        # basis names follow the same partner convention
        bar = True
        name = name[:-1]
    m = re.fullmatch(r"([A-Za-z]+)(\d*)", name)
    if not m:
        return name
    stem, digits = m.groups()
    if stem in _GREEK:
        stem = "\\" + stem
    body = stem
    if digits:
        if stem.startswith("\\"):
            body = "%s^{%s}" % (stem, digits)
        else:
            body = "%s_{%s}" % (stem, digits)
    if bar:
        body = "\\overline{%s}" % body
    return body


def _latex_scalar(s, ctx):
    text = emit_scalar(s)

    def name_sub(m):
        return _latex_name(m.group(0), ctx)

    text = re.sub(r"\*\*(\d+)", r"^{\1}", text)
    text = re.sub(r"[A-Za-z_][A-Za-z_0-9]*",
                  lambda m: "i" if m.group(0) == "I" else name_sub(m), text)
    text = text.replace("*", " \\, ")
    m = re.fullmatch(r"\((.*)\)/\((.*)\)", text)
    if m:
        return "\\frac{%s}{%s}" % m.groups()
    return text


def _latex_form(form, ctx):
    if not form.terms:
        return "0"
    names = form.basis.names
    parts = []
    for w in sorted(form.terms):
        word = " \\wedge ".join(_latex_name(names[i], ctx) for i in w)
        parts.append("\\left(%s\\right) %s"
                     % (_latex_scalar(form.terms[w], ctx), word))
    return " + ".join(parts)


def emit_latex(report, ctx):
    out = ["\\begin{align*}"]
    rows = []
    for n in report.spec.coframe:
        rows.append("d%s &= %s" % (_latex_name(n, ctx),
                                   _latex_form(report.base_eqs[n], ctx)))
    if report.algebra is not None:
        for n in report.algebra.basis.names:
            rows.append("d%s &= %s"
                        % (_latex_name(n, ctx),
                           _latex_form(report.algebra.structure[n], ctx)))
    out.append(" \\\\\n".join(rows))
    out.append("\\end{align*}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# entry point

def bundled_model_path(name):
    here = os.path.dirname(os.path.abspath(__file__))
    return os.path.join(here, "models", name)


def _resolve_model(path):
    if os.path.exists(path):
        return path
    if os.sep not in path:
        for candidate in (bundled_model_path(path),
                          bundled_model_path(path + ".model")):
            if os.path.exists(candidate):
                return candidate
    return path


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="gstruct",
        description="Run a structure-equation model file through the "
                    "reduction pipeline.")
    ap.add_argument("model_path", nargs="?", help="model file to run")
    ap.add_argument("--model", dest="model_flag", help="model file to run")
    ap.add_argument("--check-fixtures", action="store_true",
                    help="compare the run against the bundled expectations")
    ap.add_argument("--emit", choices=["text", "machine", "latex"],
                    default="text", help="report format")
    ap.add_argument("--stage", help="stop after the named stage and dump it")
    ap.add_argument("--list-stages", action="store_true",
                    help="print the stage names and exit")
    args = ap.parse_args(argv)

    path = args.model_flag or args.model_path
    if not path:
        ap.print_usage(sys.stderr)
        print("gstruct: a model file is required", file=sys.stderr)
        return EXIT_PARSE
    path = _resolve_model(path)
    try:
        spec = parse_model(path)
    except ModelFileError as exc:
        print("%s: %s" % (path, exc), file=sys.stderr)
        return EXIT_PARSE

    if args.list_stages:
        for name in spec.stage_names():
            print(name)
        if spec.close_basis:
            print("close")
        return EXIT_OK

    try:
        runner = Runner(spec)
        report = runner.run(until=args.stage)
    except ModelFileError as exc:
        print("%s: %s" % (path, exc), file=sys.stderr)
        return EXIT_PARSE
    except (ScalarError, FormError, FrameError, GStructureError,
            ReductionError) as exc:
        print("pipeline failed: %s" % exc, file=sys.stderr)
        return EXIT_PIPELINE

    if args.check_fixtures and args.stage is None:
        check_fixtures(runner)

    if args.emit == "machine":
        sys.stdout.write(emit_machine(report))
    elif args.emit == "latex":
        sys.stdout.write(emit_latex(report, runner.ctx))
    else:
        sys.stdout.write(emit_text(report))

    if args.check_fixtures and not report.fixtures_ok():
        return EXIT_FIXTURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
