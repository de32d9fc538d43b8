"""Exterior algebra over an explicit covector basis.

Forms live over either the raw basis (one covector d(s) per context
symbol) or a named basis (coframe elements, Maurer-Cartan forms, ...)
whose members carry explicit realizations as raw 1-forms.  Exterior
differentiation happens on the raw side, where d^2 = 0 holds by
construction; structure equations are read off after rewriting through
the inverted realization matrix.
"""

from __future__ import annotations

from .symcore import ScalarError, SymScalar


class FormError(Exception):
    pass


class CovectorBasis:
    """An ordered family of covector names with a conjugation involution.

    realizations, when present, give each named covector as a raw 1-form
    over the context differentials; the raw basis itself has none.
    """

    def __init__(self, ctx, names, conj=None, realizations=None, raw=False):
        self.ctx = ctx
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise FormError("duplicate covector names")
        self.index = {n: i for i, n in enumerate(self.names)}
        conj = dict(conj or {})
        for n, m in list(conj.items()):
            conj.setdefault(m, n)
        for n in self.names:
            conj.setdefault(n, n)
        for n, m in conj.items():
            if conj.get(m) != n:
                raise FormError("covector conjugation is not an involution at %r" % n)
        self._conj_idx = [self.index[conj[n]] for n in self.names]
        self.raw = raw
        self.realizations = realizations

    @property
    def conj_idx(self):
        # the raw basis follows the context, which may acquire reality
        # declarations after construction
        if self.raw:
            return [self.index[self.ctx.conj_name(n)] for n in self.names]
        return self._conj_idx

    @classmethod
    def raw_basis(cls, ctx):
        conj = {s.name: ctx.conj_name(s.name) for s in ctx.symbols}
        return cls(ctx, ctx.names, conj=conj, raw=True)

    def zero(self, degree):
        return Form(self, degree, {})

    def one_form(self, coeffs):
        """coeffs: {name: SymScalar}"""
        terms = {}
        for n, c in coeffs.items():
            if not c.is_zero():
                terms[(self.index[n],)] = c
        return Form(self, 1, terms)

    def d(self, name):
        """The basis covector itself, as a 1-form."""
        return Form(self, 1, {(self.index[name],): self.ctx.one})

    def scalar(self, value):
        value = self.ctx.const(value) if not isinstance(value, SymScalar) else value
        return Form(self, 0, {(): value} if not value.is_zero() else {})


def _sort_word(word):
    """Sort a tuple of indices; return (sorted, sign) or (None, 0) on repeat."""
    word = list(word)
    sign = 1
    for i in range(1, len(word)):
        j = i
        while j > 0 and word[j - 1] > word[j]:
            word[j - 1], word[j] = word[j], word[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(word)):
        if word[i - 1] == word[i]:
            return None, 0
    return tuple(word), sign


class Form:
    """Homogeneous exterior form; terms map strictly increasing index
    words to nonzero scalars."""

    __slots__ = ("basis", "degree", "terms")

    def __init__(self, basis, degree, terms):
        self.basis = basis
        self.degree = degree
        self.terms = terms

    def _check(self, other):
        if self.basis is not other.basis:
            raise FormError("forms over different bases")
        if self.degree != other.degree:
            raise FormError("degree mismatch: %d vs %d" % (self.degree, other.degree))

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        self._check(other)
        terms = dict(self.terms)
        for w, c in other.terms.items():
            acc = terms.get(w)
            acc = c if acc is None else acc + c
            if acc.is_zero():
                terms.pop(w, None)
            else:
                terms[w] = acc
        return Form(self.basis, self.degree, terms)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Form(self.basis, self.degree,
                    {w: -c for w, c in self.terms.items()})

    def scale(self, scalar):
        if not isinstance(scalar, SymScalar):
            scalar = self.basis.ctx.const(scalar)
        if scalar.is_zero():
            return Form(self.basis, self.degree, {})
        return Form(self.basis, self.degree,
                    {w: c * scalar for w, c in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, Form):
            return NotImplemented
        if self.basis is not other.basis or self.degree != other.degree:
            return False
        return (self - other).is_zero()

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def coeff(self, *names):
        w, sign = _sort_word(tuple(self.basis.index[n] for n in names))
        if w is None:
            raise FormError("repeated covector in coefficient lookup")
        c = self.terms.get(w)
        if c is None:
            return self.basis.ctx.zero
        return c if sign > 0 else -c

    def conjugate(self):
        cj = self.basis.conj_idx
        terms = {}
        for w, c in self.terms.items():
            w2, sign = _sort_word(tuple(cj[i] for i in w))
            if w2 is None:
                raise FormError("conjugation collapsed a wedge word")
            cc = c.conjugate()
            acc = terms.get(w2)
            add = cc if sign > 0 else -cc
            acc = add if acc is None else acc + add
            if acc.is_zero():
                terms.pop(w2, None)
            else:
                terms[w2] = acc
        return Form(self.basis, self.degree, terms)

    def map_scalars(self, fn):
        terms = {}
        for w, c in self.terms.items():
            c2 = fn(c)
            if not c2.is_zero():
                terms[w] = c2
        return Form(self.basis, self.degree, terms)

    def words(self):
        return sorted(self.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        names = self.basis.names
        parts = []
        for w in sorted(self.terms):
            mono = "^".join(names[i] for i in w) if w else "1"
            parts.append("(%s) %s" % (self.terms[w], mono))
        return "  +  ".join(parts)

    __repr__ = __str__


def wedge(a: Form, b: Form) -> Form:
    if a.basis is not b.basis:
        raise FormError("forms over different bases")
    terms = {}
    for wa, ca in a.terms.items():
        for wb, cb in b.terms.items():
            w, sign = _sort_word(wa + wb)
            if w is None:
                continue
            c = ca * cb
            if sign < 0:
                c = -c
            acc = terms.get(w)
            acc = c if acc is None else acc + c
            if acc.is_zero():
                terms.pop(w, None)
            else:
                terms[w] = acc
    return Form(a.basis, a.degree + b.degree, terms)


def exterior_derivative(form: Form) -> Form:
    """d on a raw-basis form, via partial derivatives of coefficients."""
    basis = form.basis
    if not basis.raw:
        raise FormError("exterior_derivative needs the raw basis; "
                        "use DerivationRules for abstract differentiation")
    ctx = basis.ctx
    out = Form(basis, form.degree + 1, {})
    for w, c in form.terms.items():
        for name in sorted(c.free_symbols()):
            dc = c.diff(name)
            if dc.is_zero():
                continue
            word, sign = _sort_word((basis.index[name],) + w)
            if word is None:
                continue
            add = dc if sign > 0 else -dc
            acc = out.terms.get(word)
            acc = add if acc is None else acc + add
            if acc.is_zero():
                out.terms.pop(word, None)
            else:
                out.terms[word] = acc
    return out


class Rewriter:
    """Inverts the realization matrix of a named basis once, then rewrites
    raw forms into it term by term."""

    def __init__(self, named: CovectorBasis):
        if named.raw or named.realizations is None:
            raise FormError("rewriting target must carry realizations")
        self.named = named
        ctx = named.ctx
        raw = named.realizations[named.names[0]].basis
        self.raw = raw
        n = len(named.names)
        # named_j = sum_i A[j][i] raw_i ; solve for raw_i in terms of named_j.
        rows = []
        for j, name in enumerate(named.names):
            real = named.realizations[name]
            if real.degree != 1 or real.basis is not raw:
                raise FormError("realization of %r is not a raw 1-form" % name)
            rows.append(({w[0]: c for w, c in real.terms.items()}, j))
        active = sorted({i for r, _ in rows for i in r})
        if n != len(active):
            raise FormError(
                "realization matrix is not square (%d named covectors over "
                "%d active differentials)" % (n, len(active)))
        # Gaussian elimination: augmented columns carry named indices.
        aug = [(dict(r), {j: ctx.one}) for r, j in rows]
        inv = {}
        used = set()
        for col in active:
            pick = None
            for ridx, (r, _) in enumerate(aug):
                if ridx in used or col not in r:
                    continue
                if r[col].is_constant():
                    pick = ridx
                    break
            if pick is None:
                for ridx, (r, _) in enumerate(aug):
                    if ridx not in used and col in r:
                        pick = ridx
                        break
            if pick is None:
                raise FormError("realization matrix is singular at column %r"
                                % raw.names[col])
            used.add(pick)
            r, names_part = aug[pick]
            pc = r[col]
            # keep entries reduced as elimination proceeds: uncancelled
            # denominators compound multiplicatively across the updates
            r = {k: (v / pc).compress() for k, v in r.items()}
            names_part = {k: (v / pc).compress() for k, v in names_part.items()}
            aug[pick] = (r, names_part)
            for ridx, (r2, n2) in enumerate(aug):
                if ridx == pick or col not in r2:
                    continue
                f = r2[col]
                nr = dict(r2)
                del nr[col]
                for k, v in r.items():
                    if k == col:
                        continue
                    acc = (nr.get(k, ctx.zero) - f * v).compress()
                    if acc.is_zero():
                        nr.pop(k, None)
                    else:
                        nr[k] = acc
                nn = dict(n2)
                for k, v in names_part.items():
                    acc = (nn.get(k, ctx.zero) - f * v).compress()
                    if acc.is_zero():
                        nn.pop(k, None)
                    else:
                        nn[k] = acc
                aug[ridx] = (nr, nn)
            inv[col] = pick
        # after full elimination each used row holds exactly one raw column
        self.raw_to_named = {}
        for col, ridx in inv.items():
            r, names_part = aug[ridx]
            if list(r.keys()) != [col]:
                raise FormError("elimination failed to diagonalize")
            self.raw_to_named[col] = {k: v.compress() for k, v in names_part.items()}

    def rewrite(self, form: Form) -> Form:
        if form.basis is not self.raw:
            raise FormError("form is not over this rewriter's raw basis")
        named = self.named
        out = Form(named, form.degree, {})
        for w, c in form.terms.items():
            for i in w:
                if i not in self.raw_to_named:
                    raise FormError(
                        "differential %s has no expression in the named "
                        "cobasis" % self.raw.names[i])
            pieces = [self.raw_to_named[i] for i in w]
            # expand the wedge of sparse named 1-forms
            partial = {(): c}
            for piece in pieces:
                nxt = {}
                for word, pc in partial.items():
                    for j, v in piece.items():
                        w2, sign = _sort_word(word + (j,))
                        if w2 is None:
                            continue
                        add = pc * v
                        if sign < 0:
                            add = -add
                        acc = nxt.get(w2)
                        acc = add if acc is None else acc + add
                        if acc.is_zero():
                            nxt.pop(w2, None)
                        else:
                            nxt[w2] = acc
                partial = nxt
            for word, pc in partial.items():
                acc = out.terms.get(word)
                acc = pc if acc is None else acc + pc
                if acc.is_zero():
                    out.terms.pop(word, None)
                else:
                    out.terms[word] = acc
        for word in list(out.terms):
            c = out.terms[word].compress()
            if c.is_zero():
                del out.terms[word]
            else:
                out.terms[word] = c
        return out


def rewrite_to_coframe(form: Form, rewriter: Rewriter) -> Form:
    return rewriter.rewrite(form)


class Collected:
    """A 2-form over a named basis split into torsion part (coframe wedge
    coframe), MC part (mc wedge coframe) and the forbidden mc wedge mc part."""

    def __init__(self, torsion, mc_part, mc_mc):
        self.torsion = torsion  # {(a, b): scalar}, a < b coframe indices
        self.mc_part = mc_part  # {(p, a): scalar}, p mc index, a coframe index
        self.mc_mc = mc_mc      # {(p, q): scalar}


def collect(form: Form, coframe_count: int) -> Collected:
    """Split a degree-2 form whose basis lists coframe covectors first.

    Raises on raw-basis input: residual coordinate differentials mean the
    form was never rewritten into the stage cobasis.
    """
    if form.basis.raw:
        raise FormError("collect on raw basis: residual coordinate "
                        "differentials %s" % ", ".join(
                            form.basis.names[i] for w in form.terms for i in w))
    if form.degree != 2:
        raise FormError("collect expects a 2-form")
    torsion, mc_part, mc_mc = {}, {}, {}
    for (i, j), c in form.terms.items():
        if j < coframe_count:
            torsion[(i, j)] = c
        elif i < coframe_count:
            # store as (mc index, coframe index); mc comes second in the
            # sorted word, and mc^coframe = -coframe^mc
            mc_part[(j, i)] = -c
        else:
            mc_mc[(i, j)] = c
    return Collected(torsion, mc_part, mc_mc)


class DerivationRules:
    """Abstract d for the closure cross-check.

    basis_rules assigns each named covector its exterior derivative as a
    constant-coefficient 2-form over the same basis; d extends by the
    graded Leibniz rule.  Coefficients must be constant: this route is
    only for the terminal stage where the structure equations are those
    of a Lie algebra.
    """

    def __init__(self, basis: CovectorBasis, basis_rules):
        self.basis = basis
        self.rules = {}
        for name, rule in basis_rules.items():
            if rule.basis is not basis or rule.degree != 2:
                raise FormError("rule for %r must be a 2-form over the basis" % name)
            for w, c in rule.terms.items():
                if not c.is_constant():
                    raise ScalarError(
                        "abstract derivation requires constant structure "
                        "coefficients; got %s at %r" % (c, name))
            self.rules[name] = rule
        for name in basis.names:
            if name not in self.rules:
                raise FormError("missing derivation rule for %r" % name)

    def d(self, form: Form) -> Form:
        if form.basis is not self.basis:
            raise FormError("form over a different basis")
        out = Form(self.basis, form.degree + 1, {})
        for w, c in form.terms.items():
            if not c.is_constant():
                raise ScalarError("abstract d on non-constant coefficient %s" % c)
            for pos, i in enumerate(w):
                rule = self.rules[self.basis.names[i]]
                rest = w[:pos] + w[pos + 1:]
                for rw, rc in rule.terms.items():
                    word, sign = _sort_word(rw + rest)
                    if word is None:
                        continue
                    if pos % 2 == 1:
                        sign = -sign
                    add = c * rc
                    if sign < 0:
                        add = -add
                    acc = out.terms.get(word)
                    acc = add if acc is None else acc + add
                    if acc.is_zero():
                        out.terms.pop(word, None)
                    else:
                        out.terms[word] = acc
        return out
