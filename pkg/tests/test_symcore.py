"""Exact rational-scalar arithmetic: ring axioms, conjugation, solving."""

import random
from fractions import Fraction

import pytest

from artifact.symcore import (Context, LinearSystem, NonConstantError, ScalarError,
                              Symbol, ZeroDenominatorError, conjugate, emit_scalar,
                              simplify, solve_linear, substitute)


def small_context():
    syms = [Symbol("z", "coordinate", "zb"), Symbol("zb", "coordinate", "z"),
            Symbol("a", "group", "ab"), Symbol("ab", "group", "a"),
            Symbol("r", "group", "r")]
    return Context(syms)


def rand_poly(rng, ctx, gens):
    acc = ctx.const(rng.randint(-5, 5))
    for _ in range(rng.randint(1, 2)):
        term = ctx.const(rng.randint(-4, 4))
        if rng.random() < 0.3:
            term = term + ctx.i * rng.randint(-2, 2)
        for g in rng.sample(gens, rng.randint(1, 2)):
            term = term * g
        acc = acc + term
    return acc


def rand_scalar(rng, ctx, gens):
    num = rand_poly(rng, ctx, gens)
    if rng.random() < 0.4:
        den = rand_poly(rng, ctx, gens)
        if not den.is_zero():
            return (num / den).compress()
    return num.compress()


def test_ring_axioms_random():
    ctx = small_context()
    gens = [ctx.sym(n) for n in ("z", "zb", "a", "ab", "r")]
    rng = random.Random(20260814)
    pool = [rand_scalar(rng, ctx, gens) for _ in range(500)]
    zero, one = ctx.zero, ctx.one
    for i in range(0, len(pool) - 2, 3):
        x, y, w = pool[i], pool[i + 1], pool[i + 2]
        assert x + y == y + x
        assert (x + y) + w == x + (y + w)
        assert x * y == y * x
        assert (x * y) * w == x * (y * w)
        assert x * (y + w) == x * y + x * w
        assert x + zero == x
        assert x * one == x
        assert x - x == zero
        assert x + (-x) == zero
        if not y.is_zero():
            assert (x / y) * y == x


def test_conjugation_involution_random():
    ctx = small_context()
    gens = [ctx.sym(n) for n in ("z", "zb", "a", "ab", "r")]
    rng = random.Random(77)
    for _ in range(500):
        x = rand_scalar(rng, ctx, gens)
        y = rand_scalar(rng, ctx, gens)
        assert conjugate(conjugate(x)) == x
        assert conjugate(x + y) == conjugate(x) + conjugate(y)
        assert conjugate(x * y) == conjugate(x) * conjugate(y)


def test_conjugation_basics():
    ctx = small_context()
    z, zb, r = ctx.sym("z"), ctx.sym("zb"), ctx.sym("r")
    assert conjugate(z) == zb
    assert conjugate(r) == r
    assert conjugate(ctx.i) == -ctx.i
    assert conjugate(2 * ctx.i * z + r) == -2 * ctx.i * zb + r


def test_declare_real_changes_conjugation():
    ctx = small_context()
    a = ctx.sym("a")
    assert conjugate(a) == ctx.sym("ab")
    ctx.declare_real("a")
    assert conjugate(a) == a


def test_compress_preserves_value_and_is_idempotent():
    ctx = small_context()
    z, zb, a = ctx.sym("z"), ctx.sym("zb"), ctx.sym("a")
    rng = random.Random(3)
    gens = [z, zb, a]
    for _ in range(200):
        x = rand_scalar(rng, ctx, gens)
        y = rand_scalar(rng, ctx, gens)
        if y.is_zero():
            continue
        q = (x * y) / y
        raw = ctx.from_fr(q.fr)
        assert raw.compress() == x
        twice = raw.compress()
        assert twice.fr == raw.fr


def test_compress_with_declared_unit_denominator():
    # the shape the pipeline produces: monomial content times a declared
    # nonvanishing polynomial
    ctx = small_context()
    z, zb, a = ctx.sym("z"), ctx.sym("zb"), ctx.sym("a")
    unit = 1 - z * zb
    ctx.set_nonvanishing(["a"], [unit])
    x = (a * a * z * unit * unit) / (z * z * a * unit)
    x.compress()
    assert x == (a * unit) / z
    assert emit_scalar(x) == "(-z*zb*a + a)/(z)"


def test_division_by_zero_raises():
    ctx = small_context()
    z = ctx.sym("z")
    with pytest.raises(ZeroDenominatorError):
        z / (z - z)
    with pytest.raises(ZeroDenominatorError):
        (z - z) ** (-1)


def test_is_constant_and_constant_value():
    ctx = small_context()
    z = ctx.sym("z")
    half_i = ctx.i / 2
    assert half_i.is_constant()
    assert not z.is_constant()
    assert ((z + 1) / (z + 1)).is_constant()
    v = half_i.constant_value()
    assert (v.x, v.y) == (0, Fraction(1, 2))
    with pytest.raises(NonConstantError):
        z.constant_value()


def test_substitute():
    ctx = small_context()
    z, zb, a = ctx.sym("z"), ctx.sym("zb"), ctx.sym("a")
    expr = (z * a + zb) / a
    out = substitute(expr, {"a": ctx.one, "zb": z * z})
    assert out == z + z * z
    # substituting the ring generators acts on numerator and denominator
    assert substitute(1 / a, {"a": 2 * a}) == 1 / (2 * a)


def test_simplify_returns_compressed_copy():
    ctx = small_context()
    z = ctx.sym("z")
    x = (z * z) / z
    y = simplify(x)
    assert y == z
    assert y.fr.denom.is_ground


def test_emit_scalar_deterministic_and_readable():
    ctx = small_context()
    z, zb, a = ctx.sym("z"), ctx.sym("zb"), ctx.sym("a")
    s = (3 * z * z - ctx.i * zb + 1) / (2 * a)
    assert emit_scalar(s) == emit_scalar((3 * z * z - ctx.i * zb + 1) / (2 * a))
    assert emit_scalar(s) == "((3/2)*z**2 - (1/2)*I*zb + (1/2))/(a)"
    assert emit_scalar(ctx.zero) == "0"
    assert emit_scalar(-ctx.one) == "-1"


def rand_system(rng, ctx, gens, n_unknowns, n_extra):
    unknowns = ["x%d" % j for j in range(n_unknowns)]
    chosen = {u: rand_scalar(rng, ctx, gens) for u in unknowns}
    system = LinearSystem(unknowns=unknowns)
    for _ in range(n_unknowns + n_extra):
        coeffs = {}
        for u in unknowns:
            if rng.random() < 0.7:
                coeffs[u] = rand_poly(rng, ctx, gens)
        rhs = ctx.zero
        for u, cf in coeffs.items():
            rhs = rhs + cf * chosen[u]
        system.add(coeffs, rhs)
    return system, chosen


def test_solve_linear_zero_residual_random():
    """Back-substituting a solution into its system leaves no residual."""
    ctx = small_context()
    gens = [ctx.sym(n) for n in ("z", "a")]
    rng = random.Random(41)
    for trial in range(25):
        system, chosen = rand_system(rng, ctx, gens, rng.randint(1, 4),
                                     rng.randint(0, 2))
        sol = solve_linear(system, ctx)
        assert not sol.constraints, "consistent system produced constraints"
        values = {u: chosen[u] for u in sol.free}
        for coeffs, rhs in system.rows:
            acc = -rhs
            for u, cf in coeffs.items():
                acc = acc + cf * sol.value(u, values)
            assert acc == ctx.zero


def test_solve_linear_underdetermined_parametrizes():
    ctx = small_context()
    a = ctx.sym("a")
    system = LinearSystem(unknowns=["x", "y"])
    system.add({"x": ctx.one, "y": a}, ctx.zero)
    sol = solve_linear(system, ctx)
    assert sol.free == ["y"]
    const, lin = sol.pivots["x"]
    assert const == ctx.zero and lin == {"y": -a}


def test_solve_linear_inconsistent_reports_constraint():
    ctx = small_context()
    a = ctx.sym("a")
    system = LinearSystem(unknowns=["x"])
    system.add({"x": ctx.one}, ctx.zero)
    system.add({"x": ctx.one}, a)
    sol = solve_linear(system, ctx)
    assert len(sol.constraints) == 1
    assert sol.constraints[0] == -a or sol.constraints[0] == a


def test_context_rejects_broken_conjugation():
    with pytest.raises(ScalarError):
        Context([Symbol("z", "coordinate", "w")])
    with pytest.raises(ScalarError):
        Context([Symbol("z", "coordinate", "z"),
                 Symbol("z", "group", "z")])
