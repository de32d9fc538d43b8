"""Absorption, normalization checks, and closure to a Lie algebra.

Absorption replaces each Maurer-Cartan form mc_p by mc_p + sum_a
u[p][a] Omega_a and solves for shifts that cancel torsion.  Torsion that
no shift can reach is essential; every normalization must cite an
essential combination.  Once all structure coefficients are constant the
coframe closes to a Lie algebra, verified through an independent
abstract differential.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dc_field

from .exterior import (CovectorBasis, DerivationRules, Form, Rewriter,
                       exterior_derivative)
from .gstructure import Stage, TorsionTable
from .symcore import (LinearSystem, LinSolution, SymScalar,
                      constant_combination, solve_linear)


class ReductionError(Exception):
    pass


def shift_name(p, a):
    return "w(%s;%s)" % (p, a)


@dataclass
class AbsorptionResult:
    system: LinearSystem
    solution: LinSolution
    essentials: list            # non-constant unabsorbable torsion values
    constants: list             # unabsorbable values that are already constant


def absorb(stage: Stage) -> AbsorptionResult:
    """Set up and solve the shift system of one stage.

    Every MC form gets an independent shift along every coframe
    direction; each torsion slot of each row contributes one linear
    equation.  Rows that eliminate to 0 = T leave T as a constraint.
    """
    ctx = stage.basis.ctx
    cof = stage.table.coframe_names
    mcs = stage.table.mc_names
    unknowns = [shift_name(p, a) for p in mcs for a in cof]
    system = LinearSystem(unknowns=unknowns)
    for row in cof:
        for ia, a in enumerate(cof):
            for b in cof[ia + 1:]:
                coeffs = {}
                for p in mcs:
                    mb = stage.table.coef(row, p, b)
                    if not mb.is_zero():
                        _acc(coeffs, shift_name(p, a), mb)
                    ma = stage.table.coef(row, p, a)
                    if not ma.is_zero():
                        _acc(coeffs, shift_name(p, b), -ma)
                rhs = stage.table.coef(row, a, b)
                if coeffs or not rhs.is_zero():
                    system.add(coeffs, rhs)
    solution = solve_linear(system, ctx)
    essentials = [c for c in solution.constraints if not c.is_constant()]
    constants = [c for c in solution.constraints if c.is_constant()]
    return AbsorptionResult(system=system, solution=solution,
                            essentials=essentials, constants=constants)


def _acc(d, k, v):
    if k in d:
        d[k] = d[k] + v
    else:
        d[k] = v


def is_essential(value: SymScalar, absorption: AbsorptionResult, ctx) -> bool:
    """Whether a cited torsion combination is beyond absorption.

    True when the value is a constant multiple of one unabsorbable
    constraint (or its conjugate), or more generally a constant affine
    combination of them.
    """
    if value.is_constant():
        return False
    candidates = []
    for e in absorption.essentials:
        candidates.append(e)
        ec = e.conjugate()
        if ec != e:
            candidates.append(ec)
    if not candidates:
        return False
    for t in candidates:
        if (value / t).is_constant():
            return True
    return constant_combination(candidates, value, ctx) is not None


def apply_absorption(stage: Stage, shifts: dict) -> TorsionTable:
    """Torsion after substituting explicit shift values.

    shifts maps (mc_name, coframe_name) to a scalar; missing entries are
    zero.  The (a, b) slot of each row changes by
    sum_p (M[p][a] shifts[p, b] - M[p][b] shifts[p, a]).
    """
    ctx = stage.basis.ctx
    cof = stage.table.coframe_names
    mcs = stage.table.mc_names
    out = TorsionTable(cof, mcs, ctx)
    out.mc = dict(stage.table.mc)
    for row in cof:
        for ia, a in enumerate(cof):
            for b in cof[ia + 1:]:
                t = stage.table.coef(row, a, b)
                for p in mcs:
                    ua = shifts.get((p, a))
                    if ua is not None:
                        t = t - stage.table.coef(row, p, b) * ua
                    ub = shifts.get((p, b))
                    if ub is not None:
                        t = t + stage.table.coef(row, p, a) * ub
                if not t.is_zero():
                    out.torsion[(row, a, b)] = t.compress()
    return out


def check_normalization(value: SymScalar, target: SymScalar, bindings: dict,
                        absorption: AbsorptionResult, ctx, label=""):
    """A normalization must cite an essential value and its bindings must
    move that value onto the stated constant target."""
    if not is_essential(value, absorption, ctx):
        raise ReductionError(
            "cited value %s is absorbable, not essential%s"
            % (value, " (%s)" % label if label else ""))
    if not target.is_constant():
        raise ReductionError("normalization target %s is not constant" % target)
    after = value.substitute(bindings) if bindings else value
    if after != target:
        raise ReductionError(
            "bindings send cited value to %s, not to %s%s"
            % (after, target, " (%s)" % label if label else ""))


def stage_invariance(prev_lifted: dict, bindings: dict, new_lifted: dict):
    """The lifted coframe must be the same collection of explicit forms
    before and after a stage boundary, once the bindings are applied."""
    for name, new in new_lifted.items():
        old = prev_lifted[name]
        if bindings:
            old = old.map_scalars(lambda s: s.substitute(bindings))
        if old != new:
            raise ReductionError(
                "lifted form %s changes across the stage boundary" % name)


def differential_table(ctx, names, conj, realizations):
    """Differential of every covector in an explicit cobasis.

    Returns (basis, equations, table) with every coefficient recorded as
    torsion (no MC split).
    """
    basis = CovectorBasis(ctx, list(names), conj=dict(conj),
                          realizations=dict(realizations))
    rewriter = Rewriter(basis)
    table = TorsionTable(list(names), [], ctx)
    equations = {}
    for nm in names:
        two = rewriter.rewrite(exterior_derivative(realizations[nm]))
        equations[nm] = two
        for (i, j), c in two.terms.items():
            table.torsion[(nm, names[i], names[j])] = c.compress()
    return basis, equations, table


@dataclass
class LieAlgebraResult:
    names: list
    basis: CovectorBasis
    structure: dict             # name -> 2-form with constant coefficients

    @property
    def dim(self):
        return len(self.names)


def close(ctx, names, conj, realizations) -> LieAlgebraResult:
    """Close an explicit cobasis into a Lie algebra.

    Every differential must be a constant-coefficient 2-form over the
    cobasis itself; the abstract differential rebuilt from those
    constants must square to zero.
    """
    basis, equations, _ = differential_table(ctx, names, conj, realizations)
    for nm, two in equations.items():
        for c in two.terms.values():
            if not c.is_constant():
                raise ReductionError(
                    "structure coefficient %s of d%s is not constant" % (c, nm))
    result = LieAlgebraResult(names=list(names), basis=basis,
                              structure=equations)
    verify_closure(result)
    return result


def verify_closure(result: LieAlgebraResult):
    """d squared = 0 for the abstract differential defined by the
    structure constants alone (no realizations involved)."""
    ctx = result.basis.ctx
    rules = DerivationRules(result.basis, result.structure)
    for nm in result.names:
        one = result.basis.one_form({nm: ctx.one})
        dd = rules.d(rules.d(one))
        if not dd.is_zero():
            raise ReductionError("closure fails: d(d %s) = %s" % (nm, dd))
