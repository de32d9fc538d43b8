"""Exact scalar arithmetic over Q(i) for the structure-equation engine.

A scalar is a rational function in a fixed, ordered family of symbols
(base coordinates, then group parameters, then prolongation parameters)
with Gaussian-rational coefficients.  Conjugation acts by swapping each
symbol with its declared partner and conjugating coefficients; it is an
involution, not a quotient, so z and zb are independent generators.

Storage is delegated to sympy's sparse polynomial rings, but arithmetic
deliberately avoids sympy's per-operation gcd cancellation: over the
Gaussian rationals every gcd takes the slow subresultant path, which is
three orders of magnitude more expensive than the cross-multiplication
it would tidy up.  Fractions are therefore kept raw and only compressed
(cancelled, denominator made monic) on demand: zero tests need just the
numerator, equality cross-multiplies, and emission compresses first.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dc_field
from fractions import Fraction

from sympy.polys.domains import QQ_I
from sympy.polys.fields import FracField
from sympy.polys.orderings import grlex


class ScalarError(Exception):
    pass


class ZeroDenominatorError(ScalarError):
    """A substitution made a denominator vanish identically."""


class NonConstantError(ScalarError):
    """A constant was required but the scalar still involves symbols."""


_KIND_RANK = {"coordinate": 0, "group": 1, "prolongation": 2}


@dataclass(frozen=True)
class Symbol:
    """One generator: its kind decides the block in the monomial order."""

    name: str
    kind: str  # 'coordinate' | 'group' | 'prolongation'
    conjugate: str  # partner name; equals name for real symbols

    @property
    def is_real(self):
        return self.conjugate == self.name


def _sort_key(sym: Symbol):
    # conjugate pairs sort adjacently: (kind, pair base name, bar flag)
    base = min(sym.name, sym.conjugate)
    return (_KIND_RANK[sym.kind], base, sym.name != base)


class Context:
    """Owns the coefficient field for one model run.

    All symbols (including parameters of later stages and prolongation
    parameters) must be declared up front; reductions that identify a
    symbol with its conjugate are handled by substitution plus
    declare_real, never by rebuilding the field.
    """

    def __init__(self, symbols):
        symbols = sorted(symbols, key=_sort_key)
        names = [s.name for s in symbols]
        if len(set(names)) != len(names):
            raise ScalarError("duplicate symbol names: %s" % names)
        by_name = {s.name: s for s in symbols}
        for s in symbols:
            partner = by_name.get(s.conjugate)
            if partner is None or partner.conjugate != s.name:
                raise ScalarError("conjugation is not an involution at %r" % s.name)
            if partner.kind != s.kind:
                raise ScalarError("conjugate pair %r/%r mixes kinds" % (s.name, partner.name))
        self.symbols = tuple(symbols)
        self.names = tuple(names)
        self.index = {n: i for i, n in enumerate(names)}
        self.field = FracField(names, QQ_I, grlex)
        self.ring = self.field.to_ring()
        self._conj_perm = [self.index[s.conjugate] for s in symbols]
        self._real_declared = set(s.name for s in symbols if s.is_real)
        self.nonvanishing_names = set()
        self._nonvanishing_polys = []

    # -- constructors --------------------------------------------------

    def sym(self, name: str) -> "SymScalar":
        if name not in self.index:
            raise ScalarError("unknown symbol %r" % name)
        return SymScalar(self, self.field.gens[self.index[name]])

    def const(self, value) -> "SymScalar":
        if isinstance(value, SymScalar):
            return value
        if isinstance(value, Fraction):
            ground = QQ_I.new(value, 0)
        elif isinstance(value, int):
            ground = QQ_I.new(value, 0)
        else:
            raise ScalarError("cannot coerce %r" % (value,))
        return SymScalar(self, self.field.ground_new(ground))

    @property
    def zero(self):
        return self.const(0)

    @property
    def one(self):
        return self.const(1)

    @property
    def i(self):
        return SymScalar(self, self.field.ground_new(QQ_I.new(0, 1)))

    # -- reality and domain bookkeeping ---------------------------------

    def declare_real(self, name: str):
        """After the substitution nameb -> name, fix both under conjugation."""
        partner = self.symbols[self.index[name]].conjugate
        self._real_declared.add(name)
        self._real_declared.add(partner)
        self._conj_perm[self.index[name]] = self.index[name]
        self._conj_perm[self.index[partner]] = self.index[partner]

    def conj_name(self, name: str) -> str:
        return self.names[self._conj_perm[self.index[name]]]

    def set_nonvanishing(self, names, polys=()):
        """Declare which symbols/polynomials may be inverted at this stage."""
        self.nonvanishing_names = set(names)
        self._nonvanishing_polys = [p.fr.numer for p in polys if not p.is_zero()]

    # -- helpers ---------------------------------------------------------

    def from_fr(self, fr):
        return SymScalar(self, fr)

    def _poly_conj(self, poly):
        perm = self._conj_perm
        out = {}
        for monom, coeff in poly.terms():
            m2 = [0] * len(monom)
            for i, e in enumerate(monom):
                m2[perm[i]] = e
            out[tuple(m2)] = QQ_I.new(coeff.x, -coeff.y)
        return self.ring.from_dict(out)


def _canon(field, fr):
    if not fr.numer:
        return fr
    lc = fr.denom.LC
    if lc == field.domain.one:
        return fr
    return field.raw_new(fr.numer.quo_ground(lc), fr.denom.quo_ground(lc))


def _monom_min(p):
    """Componentwise minimum exponent vector over the monomials of p."""
    it = iter(p.monoms())
    low = list(next(it))
    for m in it:
        for i, e in enumerate(m):
            if e < low[i]:
                low[i] = e
    return low


def _shift_monom(ring, p, low):
    return ring.from_dict({tuple(e - c for e, c in zip(m, low)): coeff
                           for m, coeff in p.terms()})


def _unit_quotients(p, unit):
    """Successive exact quotients of p by unit: [p, p/u, p/u^2, ...]."""
    quots = [p]
    while not quots[-1].is_ground:
        q, r = divmod(quots[-1], unit)
        if r:
            break
        quots.append(q)
    return quots


def _merge_frac(ctx, f, g, sign):
    """Numerator and denominator of f + sign*g over a shared denominator.

    Denominators in this pipeline factor as a monomial times powers of the
    declared nonvanishing polynomials (see _fast_cancel).  Pulling the
    common part out before combining keeps repeated accumulation from
    compounding the denominators multiplicatively; with the plain product
    rule a long sum ends up over d1*d2*...*dn even when every term shares
    the same few factors.
    """
    d1, d2 = f.denom, g.denom
    r1, r2 = d1, d2
    if not d1.is_ground and not d2.is_ground:
        ring = ctx.ring
        low = [min(a, b) for a, b in zip(_monom_min(d1), _monom_min(d2))]
        if any(low):
            r1 = _shift_monom(ring, r1, low)
            r2 = _shift_monom(ring, r2, low)
        for unit in ctx._nonvanishing_polys:
            if r1.is_ground or r2.is_ground:
                break
            q1 = _unit_quotients(r1, unit)
            if len(q1) == 1:
                continue
            q2 = _unit_quotients(r2, unit)
            k = min(len(q1), len(q2)) - 1
            if k:
                r1, r2 = q1[k], q2[k]
    numer = f.numer * r2 + sign * (g.numer * r1)
    return numer, d1 * r2


def _fast_cancel(ctx, numer, denom):
    """Cancel the common factors this pipeline actually produces.

    Denominators here are always monomials in the symbols times powers of
    the declared nonvanishing polynomials, so cancelling the shared
    monomial content and trial-dividing by those polynomials already
    reaches lowest terms; a full multivariate gcd over the Gaussian
    rationals is orders of magnitude slower and never finds more.
    """
    if denom.is_ground:
        return numer, denom
    low_n = _monom_min(numer)
    low_d = _monom_min(denom)
    low = [min(a, b) for a, b in zip(low_n, low_d)]
    if any(low):
        numer = _shift_monom(ctx.ring, numer, low)
        denom = _shift_monom(ctx.ring, denom, low)
    for unit in ctx._nonvanishing_polys:
        while not denom.is_ground:
            qd, rd = divmod(denom, unit)
            if rd:
                break
            qn, rn = divmod(numer, unit)
            if rn:
                break
            numer, denom = qn, qd
    return numer, denom


class SymScalar:
    """One rational function, immutable as a value.

    The representation is lazy: arithmetic cross-multiplies without
    cancelling, compress() reduces to lowest terms with monic denominator
    in place.  Every predicate is exact on the raw representation.
    """

    __slots__ = ("ctx", "fr", "_c")

    def __init__(self, ctx: Context, fr, compressed=False):
        self.ctx = ctx
        self.fr = fr
        self._c = compressed

    def compress(self):
        """Reduce to lowest terms, monic denominator.  Value-preserving."""
        if not self._c:
            fr = self.fr
            if not fr.numer:
                self.fr = self.ctx.field.zero
            else:
                numer, denom = _fast_cancel(self.ctx, fr.numer, fr.denom)
                if not denom.is_ground and len(denom) > 1:
                    # residual multi-term denominator: genuine gcd needed,
                    # but only on what the cheap passes could not explain
                    numer, denom = numer.cancel(denom)
                self.fr = _canon(self.ctx.field,
                                 self.ctx.field.raw_new(numer, denom))
            self._c = True
        return self

    # -- ring operations -------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, SymScalar):
            if other.ctx is not self.ctx:
                raise ScalarError("mixed contexts")
            return other
        return self.ctx.const(other)

    def __add__(self, other):
        f, g = self.fr, self._coerce(other).fr
        if f.denom == g.denom:
            return SymScalar(self.ctx,
                             self.ctx.field.raw_new(f.numer + g.numer, f.denom))
        return SymScalar(self.ctx, self.ctx.field.raw_new(
            *_merge_frac(self.ctx, f, g, 1)))

    __radd__ = __add__

    def __sub__(self, other):
        f, g = self.fr, self._coerce(other).fr
        if f.denom == g.denom:
            return SymScalar(self.ctx,
                             self.ctx.field.raw_new(f.numer - g.numer, f.denom))
        return SymScalar(self.ctx, self.ctx.field.raw_new(
            *_merge_frac(self.ctx, f, g, -1)))

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        f, g = self.fr, self._coerce(other).fr
        return SymScalar(self.ctx, self.ctx.field.raw_new(
            f.numer * g.numer, f.denom * g.denom))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDenominatorError("division by zero scalar")
        f, g = self.fr, other.fr
        return SymScalar(self.ctx, self.ctx.field.raw_new(
            f.numer * g.denom, f.denom * g.numer))

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise ScalarError("exponent must be an integer")
        f = self.fr
        if n < 0:
            if self.is_zero():
                raise ZeroDenominatorError("negative power of zero")
            return SymScalar(self.ctx, self.ctx.field.raw_new(
                f.denom ** (-n), f.numer ** (-n)))
        return SymScalar(self.ctx,
                         self.ctx.field.raw_new(f.numer ** n, f.denom ** n))

    def __neg__(self):
        return SymScalar(self.ctx,
                         self.ctx.field.raw_new(-self.fr.numer, self.fr.denom),
                         compressed=self._c)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ctx.const(other)
        if not isinstance(other, SymScalar):
            return NotImplemented
        f, g = self.fr, other.fr
        if f.denom == g.denom:
            return f.numer == g.numer
        return f.numer * g.denom == g.numer * f.denom

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        self.compress()
        return hash(self.fr)

    def __bool__(self):
        return not self.is_zero()

    # -- predicates --------------------------------------------------------

    def is_zero(self):
        return not self.fr.numer

    def is_constant(self):
        numer, denom = self.fr.numer, self.fr.denom
        if not numer:
            return True
        if numer.is_ground and denom.is_ground:
            return True
        quo, rem = divmod(numer, denom)
        return not rem and quo.is_ground

    def constant_value(self):
        """The QQ_I ground value; raises NonConstantError otherwise."""
        if not self.is_constant():
            raise NonConstantError(str(self))
        self.compress()
        if not self.fr.numer:
            return QQ_I.zero
        return QQ_I.quo(self.fr.numer.LC, self.fr.denom.LC)

    def is_unit(self):
        """True when numerator and denominator factor entirely through the
        declared nonvanishing symbols and polynomials."""
        if self.is_zero():
            return False
        self.compress()
        for part in (self.fr.numer, self.fr.denom):
            p = part
            progress = True
            while progress and not p.is_term:
                progress = False
                for q in self.ctx._nonvanishing_polys:
                    quo, rem = divmod(p, q)
                    if not rem and quo:
                        p = quo
                        progress = True
                        break
            if not p.is_term:
                return False
            monom = p.LM
            for i, e in enumerate(monom):
                if e and self.ctx.names[i] not in self.ctx.nonvanishing_names:
                    return False
        return True

    def free_symbols(self):
        used = set()
        for part in (self.fr.numer, self.fr.denom):
            for monom in part.monoms():
                for i, e in enumerate(monom):
                    if e:
                        used.add(self.ctx.names[i])
        return used

    # -- calculus -----------------------------------------------------------

    def conjugate(self):
        ctx = self.ctx
        num = ctx._poly_conj(self.fr.numer)
        den = ctx._poly_conj(self.fr.denom)
        return SymScalar(ctx, ctx.field.raw_new(num, den))

    def substitute(self, mapping):
        """Simultaneously replace symbols by scalars.

        mapping: {name: SymScalar | int | Fraction}.  Raises
        ZeroDenominatorError when the substituted denominator vanishes.
        """
        ctx = self.ctx
        self.compress()
        vals = list(ctx.field.gens)
        touched = False
        for name, val in mapping.items():
            if name not in ctx.index:
                raise ScalarError("unknown symbol %r" % name)
            vals[ctx.index[name]] = ctx.const(val).fr if not isinstance(val, SymScalar) else val.fr
            touched = True
        if not touched:
            return self
        num = _eval_poly(ctx, self.fr.numer, vals)
        den = _eval_poly(ctx, self.fr.denom, vals)
        if den.is_zero():
            raise ZeroDenominatorError(
                "denominator vanishes under substitution: %s" % self)
        return (num / den).compress()

    def diff(self, name: str):
        ctx = self.ctx
        if name not in ctx.index:
            raise ScalarError("unknown symbol %r" % name)
        g = ctx.ring.gens[ctx.index[name]]
        n, d = self.fr.numer, self.fr.denom
        dn = n.diff(g)
        dd = d.diff(g)
        num = SymScalar(ctx, ctx.field.raw_new(dn * d - n * dd, ctx.ring.one))
        den = SymScalar(ctx, ctx.field.raw_new(d * d, ctx.ring.one))
        return num / den

    # -- emission -------------------------------------------------------------

    def __str__(self):
        return emit_scalar(self)

    def __repr__(self):
        return "SymScalar(%s)" % emit_scalar(self)


def _eval_poly(ctx, poly, vals):
    total = ctx.zero
    for monom, coeff in poly.terms():
        term = SymScalar(ctx, ctx.field.ground_new(coeff))
        for i, e in enumerate(monom):
            if e:
                term = term * SymScalar(ctx, vals[i] ** e)
        total = total + term
    return total


def simplify(s: SymScalar) -> SymScalar:
    """Reduce to the canonical representation (in place; value unchanged)."""
    return s.compress()


def conjugate(s: SymScalar) -> SymScalar:
    return s.conjugate()


def substitute(s: SymScalar, mapping) -> SymScalar:
    return s.substitute(mapping)


# ---------------------------------------------------------------------------
# linear algebra


@dataclass
class LinearSystem:
    """Rows are  sum(coeffs[u] * u) = rhs  over formal unknown names."""

    unknowns: list
    rows: list = _dc_field(default_factory=list)

    def add(self, coeffs, rhs):
        self.rows.append((dict(coeffs), rhs))


@dataclass
class LinSolution:
    """Pivot unknowns expressed as const + sum(lin[f] * f) over free names.

    constraints are scalar values that the system forces to vanish; they
    contain no unknowns (this is where essential torsion shows up).
    """

    pivots: dict
    free: list
    constraints: list

    def value(self, name, free_values=None):
        free_values = free_values or {}
        if name in self.free:
            return free_values.get(name)
        const, lin = self.pivots[name]
        out = const
        for f, c in lin.items():
            v = free_values.get(f)
            if v is None:
                continue
            out = out + c * v
        return out


def solve_linear(system: LinearSystem, ctx: Context) -> LinSolution:
    """Exact Gaussian elimination over the scalar field.

    Deterministic: unknowns are eliminated in declaration order, the pivot
    row for each unknown is the first row with a constant nonzero
    coefficient there (any nonzero one failing that).
    """
    rows = [({u: c for u, c in coeffs.items() if not c.is_zero()}, rhs)
            for coeffs, rhs in system.rows]
    order = list(system.unknowns)
    pivot_rows = {}

    for u in order:
        chosen = None
        for idx, (coeffs, _) in enumerate(rows):
            if idx in pivot_rows.values():
                continue
            c = coeffs.get(u)
            if c is not None and c.is_constant():
                chosen = idx
                break
        if chosen is None:
            for idx, (coeffs, _) in enumerate(rows):
                if idx in pivot_rows.values():
                    continue
                if u in coeffs:
                    chosen = idx
                    break
        if chosen is None:
            continue
        pivot_rows[u] = chosen
        pc = rows[chosen][0][u]
        for idx, (coeffs, rhs) in enumerate(rows):
            if idx == chosen or u not in coeffs:
                continue
            factor = coeffs[u] / pc
            new_coeffs = dict(coeffs)
            del new_coeffs[u]
            for v, c in rows[chosen][0].items():
                if v == u:
                    continue
                acc = new_coeffs.get(v, ctx.zero) - factor * c
                if acc.is_zero():
                    new_coeffs.pop(v, None)
                else:
                    new_coeffs[v] = acc
            rows[idx] = (new_coeffs, rhs - factor * rows[chosen][1])

    free = [u for u in order if u not in pivot_rows]
    constraints = []
    for idx, (coeffs, rhs) in enumerate(rows):
        if idx in pivot_rows.values():
            continue
        if coeffs:
            raise ScalarError("elimination left a non-pivot row with unknowns")
        if not rhs.is_zero():
            constraints.append(rhs.compress())

    # back substitution, in reverse elimination order
    pivots = {}
    for u in reversed(order):
        if u not in pivot_rows:
            continue
        coeffs, rhs = rows[pivot_rows[u]]
        pc = coeffs[u]
        const = rhs / pc
        lin = {}
        for v, c in coeffs.items():
            if v == u:
                continue
            if v in pivots:
                pconst, plin = pivots[v]
                const = const - (c / pc) * pconst
                for f, fc in plin.items():
                    acc = lin.get(f, ctx.zero) - (c / pc) * fc
                    if acc.is_zero():
                        lin.pop(f, None)
                    else:
                        lin[f] = acc
            else:
                acc = lin.get(v, ctx.zero) - c / pc
                if acc.is_zero():
                    lin.pop(v, None)
                else:
                    lin[v] = acc
        pivots[u] = (const.compress(), {f: c.compress() for f, c in lin.items()})
    return LinSolution(pivots=pivots, free=free, constraints=constraints)


def constant_combination(targets, expr, ctx):
    """Solve expr = sum(lambda_j * targets[j]) + mu for Gaussian-rational
    lambda_j, mu.  Returns the coefficient list (with mu last) or None.

    Used for essentiality checks: an expression is a consequence of the
    essential relations when it is a constant affine combination of them.
    """
    # Match polynomial coefficients after clearing all denominators; the
    # affine constant is handled as one more target (its cleared form is
    # the common denominator itself).
    expr.compress()
    for t in targets:
        t.compress()
    cols = list(targets) + [ctx.one]
    dens = [t.fr.denom for t in cols] + [expr.fr.denom]
    common = ctx.ring.one
    for d in dens:
        q, r = divmod(common, d)
        if r or not q:
            common = common * d
    cleared = []
    for t in cols + [expr]:
        q, r = divmod(common, t.fr.denom)
        assert not r
        cleared.append(t.fr.numer * q)
    monoms = set()
    for p in cleared:
        monoms.update(p.monoms())
    unknowns = ["l%d" % j for j in range(len(cols))]
    sys = LinearSystem(unknowns=unknowns)
    for m in sorted(monoms):
        coeffs = {}
        for j, p in enumerate(cleared[:-1]):
            c = p.get(m)
            if c:
                coeffs["l%d" % j] = SymScalar(ctx, ctx.field.ground_new(c))
        rhs_c = cleared[-1].get(m)
        rhs = SymScalar(ctx, ctx.field.ground_new(rhs_c)) if rhs_c else ctx.zero
        if coeffs or not rhs.is_zero():
            sys.add(coeffs, rhs)
    sol = solve_linear(sys, ctx)
    if sol.constraints:
        return None
    out = []
    for u in unknowns:
        if u in sol.free:
            out.append(ctx.zero)
        else:
            const, lin = sol.pivots[u]
            # free unknowns set to zero
            out.append(const)
    return out


# ---------------------------------------------------------------------------
# emission


def _fmt_rational(r):
    # r: an MPQ/Fraction-like with numerator/denominator
    num, den = r.numerator, r.denominator
    if den == 1:
        return str(num), False
    return "%d/%d" % (num, den), True


def _fmt_coeff(c):
    """Gaussian rational -> (text, needs_mul_paren, is_negative_like)."""
    x, y = c.x, c.y
    if y == 0:
        body, frac = _fmt_rational(x)
        neg = body.startswith("-")
        if neg:
            body = body[1:]
        if frac:
            body = "(%s)" % body
        return body, neg
    if x == 0:
        body, frac = _fmt_rational(y)
        neg = body.startswith("-")
        if neg:
            body = body[1:]
        if body == "1":
            return "I", neg
        if frac:
            body = "(%s)" % body
        return "%s*I" % body, neg
    xs, xf = _fmt_rational(x)
    ys, yf = _fmt_rational(y)
    ysign = "-" if ys.startswith("-") else "+"
    ys = ys.lstrip("-")
    if xf:
        xs = "(%s)" % xs
    if yf:
        ys = "(%s)" % ys
    ypart = "I" if ys == "1" else "%s*I" % ys
    return "(%s %s %s)" % (xs, ysign, ypart), False


def _fmt_poly(ctx, poly):
    if not poly:
        return "0"
    terms = sorted(poly.terms(), key=lambda t: grlex(t[0]), reverse=True)
    pieces = []
    for monom, coeff in terms:
        body, neg = _fmt_coeff(coeff)
        factors = []
        for i, e in enumerate(monom):
            if e == 1:
                factors.append(ctx.names[i])
            elif e > 1:
                factors.append("%s**%d" % (ctx.names[i], e))
        if factors:
            if body == "1":
                text = "*".join(factors)
            else:
                text = body + "*" + "*".join(factors)
        else:
            text = body
        pieces.append((neg, text))
    out = []
    for k, (neg, text) in enumerate(pieces):
        if k == 0:
            out.append("-" + text if neg else text)
        else:
            out.append(" - " + text if neg else " + " + text)
    return "".join(out)


def emit_scalar(s: SymScalar) -> str:
    """Canonical text form; grlex-descending terms, re-parseable."""
    s.compress()
    num = _fmt_poly(s.ctx, s.fr.numer)
    if s.fr.denom.is_ground and s.fr.denom.LC == QQ_I.one:
        return num
    den = _fmt_poly(s.ctx, s.fr.denom)
    return "(%s)/(%s)" % (num, den)
