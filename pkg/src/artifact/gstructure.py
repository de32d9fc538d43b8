"""Parametric group structures over a base coframe.

A stage consists of a parameter-matrix group acting on the base coframe,
its Maurer-Cartan forms (declared by name, verified against dg g^-1),
and the lifted structure equations d(g omega) split into an MC part and
a torsion table.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dc_field

from .exterior import (CovectorBasis, Form, Rewriter, collect,
                       exterior_derivative, wedge)
from .frame import matrix_inverse
from .symcore import LinearSystem, SymScalar, solve_linear


class GStructureError(Exception):
    pass


def d_scalar(raw: CovectorBasis, s: SymScalar) -> Form:
    """The raw differential of a scalar."""
    ctx = raw.ctx
    coeffs = {}
    for name in sorted(s.free_symbols()):
        ds = s.diff(name)
        if not ds.is_zero():
            coeffs[name] = ds
    return raw.one_form(coeffs)


@dataclass
class ParamGroup:
    """One reduction stage's group: parameters, their matrix action on the
    base coframe, and named Maurer-Cartan forms with realizations."""

    name: str
    params: list                      # parameter symbol names (with conjugates)
    nonzero: set                      # subset that may be inverted
    matrix: list                      # rows of SymScalar, size n x n
    mc_names: list = _dc_field(default_factory=list)
    mc_conj: dict = _dc_field(default_factory=dict)
    mc_real: dict = _dc_field(default_factory=dict)   # name -> raw 1-form

    @property
    def dim(self):
        return len(self.params)


def maurer_cartan(group: ParamGroup, raw: CovectorBasis):
    """dg g^-1, verified against the declared MC forms.

    Checks: every entry is a constant-coefficient combination of the
    declared forms, the declared forms are linearly independent, their
    count equals the group dimension, and d(dg g^-1) = (dg g^-1) wedge
    (dg g^-1).  Returns (mc_matrix, decomposition) where decomposition
    maps entry (i, j) to {mc_name: constant}.
    """
    ctx = raw.ctx
    n = len(group.matrix)
    ginv = matrix_inverse(group.matrix, ctx)
    dg = [[d_scalar(raw, group.matrix[i][j]) for j in range(n)] for i in range(n)]
    mc_matrix = [[raw.zero(1) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = raw.zero(1)
            for k in range(n):
                if not dg[i][k].is_zero() and not ginv[k][j].is_zero():
                    acc = acc + dg[i][k].scale(ginv[k][j])
            mc_matrix[i][j] = acc

    if len(group.mc_names) != len(group.params):
        raise GStructureError(
            "stage %s declares %d MC forms for %d parameters"
            % (group.name, len(group.mc_names), len(group.params)))

    # independence: the coefficient matrix (mc x raw differentials) has
    # full row rank
    cov_idx = sorted({w[0] for nm in group.mc_names
                      for w in group.mc_real[nm].terms})
    rows = []
    for nm in group.mc_names:
        rows.append([group.mc_real[nm].terms.get((i,), ctx.zero) for i in cov_idx])
    rank = _row_rank(rows, ctx)
    if rank != len(group.mc_names):
        raise GStructureError("declared MC forms of stage %s are dependent "
                              "(rank %d of %d)" % (group.name, rank, len(rows)))

    decomp = {}
    unknowns = ["c%d" % k for k in range(len(group.mc_names))]
    for i in range(n):
        for j in range(n):
            entry = mc_matrix[i][j]
            if entry.is_zero():
                continue
            sys = LinearSystem(unknowns=unknowns)
            idxs = sorted({w[0] for w in entry.terms} |
                          {w[0] for nm in group.mc_names
                           for w in group.mc_real[nm].terms})
            for ci in idxs:
                coeffs = {}
                for k, nm in enumerate(group.mc_names):
                    c = group.mc_real[nm].terms.get((ci,))
                    if c is not None:
                        coeffs[unknowns[k]] = c
                rhs = entry.terms.get((ci,), ctx.zero)
                sys.add(coeffs, rhs)
            sol = solve_linear(sys, ctx)
            if sol.constraints:
                raise GStructureError(
                    "dg g^-1 entry (%d,%d) of stage %s is outside the span "
                    "of the declared MC forms" % (i + 1, j + 1, group.name))
            combo = {}
            for k, nm in enumerate(group.mc_names):
                u = unknowns[k]
                if u in sol.free:
                    continue
                c = sol.pivots[u][0]
                if not c.is_constant():
                    raise GStructureError(
                        "dg g^-1 entry (%d,%d) of stage %s needs a "
                        "non-constant coefficient %s of %s"
                        % (i + 1, j + 1, group.name, c, nm))
                if not c.is_zero():
                    combo[nm] = c
            decomp[(i, j)] = combo

    # MC identity
    for i in range(n):
        for j in range(n):
            lhs = exterior_derivative(mc_matrix[i][j])
            rhs = raw.zero(2)
            for k in range(n):
                rhs = rhs + wedge(mc_matrix[i][k], mc_matrix[k][j])
            if lhs != rhs:
                raise GStructureError(
                    "Maurer-Cartan identity fails at entry (%d,%d) of stage %s"
                    % (i + 1, j + 1, group.name))
    return mc_matrix, decomp


def _row_rank(rows, ctx):
    rows = [list(r) for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    used = set()
    for col in range(ncols):
        pivot = None
        for r in range(len(rows)):
            if r in used or rows[r][col].is_zero():
                continue
            pivot = r
            break
        if pivot is None:
            continue
        used.add(pivot)
        rank += 1
        pv = rows[pivot][col]
        for r in range(len(rows)):
            if r == pivot or rows[r][col].is_zero():
                continue
            f = rows[r][col] / pv
            rows[r] = [a - f * b for a, b in zip(rows[r], rows[pivot])]
    return rank


class TorsionTable:
    """Structure equations of one stage, keyed by names.

    torsion[(row, a, b)] with a, b coframe names (a before b in basis
    order); mc[(row, p, a)] the coefficient of mc_p wedge coframe_a.
    """

    def __init__(self, coframe_names, mc_names, ctx):
        self.coframe_names = list(coframe_names)
        self.mc_names = list(mc_names)
        self.ctx = ctx
        self.torsion = {}
        self.mc = {}

    def coef(self, row, a, b):
        order = {n: i for i, n in enumerate(self.coframe_names)}
        if a in order and b in order:
            if order[a] > order[b]:
                c = self.torsion.get((row, b, a))
                return -c if c is not None else self.ctx.zero
            return self.torsion.get((row, a, b), self.ctx.zero)
        # mc wedge coframe slot: accept either argument order
        if a in order:
            a, b = b, a
            flip = True
        else:
            flip = False
        c = self.mc.get((row, a, b), self.ctx.zero)
        return -c if flip else c


@dataclass
class Stage:
    """Everything computed for one reduction stage."""

    name: str
    group: ParamGroup
    basis: CovectorBasis              # lifted coframe then MC forms
    rewriter: Rewriter
    lifted: dict                      # coframe name -> raw 1-form
    table: TorsionTable
    mc_matrix: list
    mc_decomp: dict
    equations: dict = _dc_field(default_factory=dict)  # row -> 2-form over basis


def lift_structure_equations(group: ParamGroup, raw: CovectorBasis,
                             base_names, base_real, coframe_names,
                             coframe_conj) -> Stage:
    """Lift the base coframe through the group matrix and split each
    d(lifted row) into MC part and torsion over the stage cobasis."""
    ctx = raw.ctx
    n = len(base_names)
    if len(group.matrix) != n:
        raise GStructureError("stage %s matrix is %dx%d for a %d-coframe"
                              % (group.name, len(group.matrix),
                                 len(group.matrix), n))
    mc_matrix, decomp = maurer_cartan(group, raw)
    lifted = {}
    for i, name in enumerate(coframe_names):
        acc = raw.zero(1)
        for j, bn in enumerate(base_names):
            if not group.matrix[i][j].is_zero():
                acc = acc + base_real[bn].scale(group.matrix[i][j])
        lifted[name] = acc.map_scalars(lambda c: c.compress())
    names = list(coframe_names) + list(group.mc_names)
    conj = dict(coframe_conj)
    conj.update(group.mc_conj)
    realizations = dict(lifted)
    realizations.update({nm: group.mc_real[nm] for nm in group.mc_names})
    basis = CovectorBasis(ctx, names, conj=conj, realizations=realizations)
    rewriter = Rewriter(basis)
    table = TorsionTable(coframe_names, group.mc_names, ctx)
    equations = {}
    nc = len(coframe_names)
    for i, name in enumerate(coframe_names):
        two = rewriter.rewrite(exterior_derivative(lifted[name]))
        equations[name] = two
        parts = collect(two, nc)
        if parts.mc_mc:
            raise GStructureError(
                "stage %s row %s has an MC wedge MC component"
                % (group.name, name))
        for (a, b), c in parts.torsion.items():
            table.torsion[(name, coframe_names[a], coframe_names[b])] = c.compress()
        for (p, a), c in parts.mc_part.items():
            table.mc[(name, names[p], coframe_names[a])] = c.compress()
    return Stage(name=group.name, group=group, basis=basis, rewriter=rewriter,
                 lifted=lifted, table=table, mc_matrix=mc_matrix,
                 mc_decomp=decomp, equations=equations)


def torsion_lookup(stage: Stage, row, a, b) -> SymScalar:
    return stage.table.coef(row, a, b)
