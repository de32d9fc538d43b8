"""Exterior algebra: wedge, d, rewriting into a coframe."""

import random

import pytest

from artifact.exterior import (CovectorBasis, DerivationRules, Form, FormError,
                               Rewriter, collect, exterior_derivative,
                               rewrite_to_coframe, wedge)
from artifact.symcore import Context, Symbol


def make_ctx():
    syms = [Symbol("z", "coordinate", "zb"), Symbol("zb", "coordinate", "z"),
            Symbol("u", "coordinate", "u"),
            Symbol("a", "group", "ab"), Symbol("ab", "group", "a")]
    return Context(syms)


def rand_coeff(rng, ctx):
    gens = [ctx.sym(n) for n in ("z", "zb", "u", "a")]
    acc = ctx.const(rng.randint(-3, 3))
    for _ in range(rng.randint(0, 2)):
        acc = acc + rng.randint(-3, 3) * rng.choice(gens)
    if rng.random() < 0.3:
        acc = acc + ctx.i * rng.randint(-2, 2)
    return acc


def rand_one_form(rng, ctx, raw):
    return raw.one_form({n: rand_coeff(rng, ctx)
                         for n in ("z", "zb", "u", "a", "ab")})


def test_wedge_antisymmetry_random():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(11)
    for _ in range(60):
        w1 = rand_one_form(rng, ctx, raw)
        w2 = rand_one_form(rng, ctx, raw)
        assert wedge(w1, w2) == wedge(w2, w1).scale(-ctx.one)
        assert wedge(w1, w1).is_zero()


def test_wedge_associativity_random():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(12)
    for _ in range(40):
        w1 = rand_one_form(rng, ctx, raw)
        w2 = rand_one_form(rng, ctx, raw)
        w3 = rand_one_form(rng, ctx, raw)
        assert wedge(wedge(w1, w2), w3) == wedge(w1, wedge(w2, w3))


def test_wedge_bilinearity():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(13)
    z = ctx.sym("z")
    for _ in range(20):
        w1 = rand_one_form(rng, ctx, raw)
        w2 = rand_one_form(rng, ctx, raw)
        w3 = rand_one_form(rng, ctx, raw)
        assert wedge(w1 + w2, w3) == wedge(w1, w3) + wedge(w2, w3)
        assert wedge(w1.scale(z), w2) == wedge(w1, w2).scale(z)


def test_wedge_degree_and_scalar_factor():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    dz, dzb = raw.d("z"), raw.d("zb")
    two_form = wedge(dz, dzb)
    assert two_form.degree == 2
    assert wedge(raw.scalar(ctx.sym("u")), dz) == dz.scale(ctx.sym("u"))
    triple = wedge(two_form, raw.d("u"))
    assert triple.degree == 3
    assert not triple.is_zero()
    assert wedge(two_form, dz).is_zero()


def test_exterior_derivative_squares_to_zero_random():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(14)
    for _ in range(40):
        w = rand_one_form(rng, ctx, raw)
        assert exterior_derivative(exterior_derivative(w)).is_zero()


def test_exterior_derivative_graded_leibniz_random():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(15)
    for _ in range(25):
        w1 = rand_one_form(rng, ctx, raw)
        w2 = rand_one_form(rng, ctx, raw)
        prod = wedge(w1, w2)
        lhs = exterior_derivative(prod)
        rhs = wedge(exterior_derivative(w1), w2) \
            - wedge(w1, exterior_derivative(w2))
        assert lhs == rhs
        # degree 2 times degree 1: the sign flips back
        w3 = rand_one_form(rng, ctx, raw)
        lhs3 = exterior_derivative(wedge(prod, w3))
        rhs3 = wedge(exterior_derivative(prod), w3) \
            + wedge(prod, exterior_derivative(w3))
        assert lhs3 == rhs3


def test_exterior_derivative_constant_form_vanishes():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    w = raw.d("z").scale(ctx.const(5)) + raw.d("u").scale(ctx.i)
    assert exterior_derivative(w).is_zero()
    dz_z = raw.d("z").scale(ctx.sym("z"))
    assert exterior_derivative(dz_z).is_zero()
    dzb_z = raw.d("zb").scale(ctx.sym("z"))
    assert exterior_derivative(dzb_z) == wedge(raw.d("z"), raw.d("zb"))


def test_form_conjugate_is_multiplicative():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(16)
    for _ in range(20):
        w1 = rand_one_form(rng, ctx, raw)
        w2 = rand_one_form(rng, ctx, raw)
        assert wedge(w1, w2).conjugate() == wedge(w1.conjugate(), w2.conjugate())
        assert w1.conjugate().conjugate() == w1


def test_form_equality_needs_same_basis():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    named = CovectorBasis(ctx, ["e1", "e2"], conj={},
                          realizations={"e1": raw.d("z"), "e2": raw.d("u")})
    assert raw.d("z") != named.d("e1")
    assert named.d("e1") == named.d("e1")


def named_basis(ctx, raw):
    z = ctx.sym("z")
    real = {"e1": raw.d("z") + raw.d("zb").scale(z),
            "e2": raw.d("zb"),
            "e3": raw.d("u").scale(ctx.const(2)) + raw.d("z").scale(ctx.i)}
    return CovectorBasis(ctx, ["e1", "e2", "e3"], conj={},
                         realizations=real)


def test_rewrite_recovers_basis_covectors():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    basis = named_basis(ctx, raw)
    rw = Rewriter(basis)
    for name in basis.names:
        got = rewrite_to_coframe(basis.realizations[name], rw)
        assert got == basis.d(name)


def test_rewrite_round_trip_on_random_forms():
    """Rewriting into the coframe and substituting realizations back is
    the identity on anything spanned by the coframe."""
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    basis = named_basis(ctx, raw)
    rw = Rewriter(basis)
    rng = random.Random(17)
    for _ in range(15):
        w = raw.one_form({n: rand_coeff(rng, ctx) for n in ("z", "zb", "u")})
        named = rewrite_to_coframe(w, rw)
        back = raw.zero(1)
        for (i,), c in named.terms.items():
            back = back + basis.realizations[basis.names[i]].scale(c)
        assert back == w


def test_rewrite_two_forms():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    basis = named_basis(ctx, raw)
    rw = Rewriter(basis)
    two = wedge(basis.realizations["e1"], basis.realizations["e3"])
    assert rewrite_to_coframe(two, rw) == wedge(basis.d("e1"), basis.d("e3"))


def test_rewriter_rejects_degenerate_realizations():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    z = ctx.sym("z")
    bad = CovectorBasis(ctx, ["e1", "e2"], conj={},
                        realizations={"e1": raw.d("z"),
                                      "e2": raw.d("z").scale(z)})
    with pytest.raises(FormError):
        Rewriter(bad)


def test_collect_splits_torsion_and_mc():
    ctx = make_ctx()
    z = ctx.sym("z")
    basis = CovectorBasis(ctx, ["s", "r", "m"], conj={})
    form = wedge(basis.d("s"), basis.d("r")).scale(z) \
        + wedge(basis.d("s"), basis.d("m")).scale(ctx.i)
    parts = collect(form, 2)
    assert parts.torsion == {(0, 1): z}
    assert list(parts.mc_part) == [(2, 0)]
    assert parts.mc_part[(2, 0)] == -ctx.i
    assert not parts.mc_mc


def test_collect_rejects_raw_and_wrong_degree():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    with pytest.raises(FormError):
        collect(wedge(raw.d("z"), raw.d("u")), 2)
    basis = CovectorBasis(ctx, ["s", "r"], conj={})
    with pytest.raises(FormError):
        collect(basis.d("s"), 2)


def test_derivation_rules_leibniz_and_d_squared():
    ctx = make_ctx()
    basis = CovectorBasis(ctx, ["x", "y", "w"], conj={})
    dx, dy, dw = basis.d("x"), basis.d("y"), basis.d("w")
    rules = DerivationRules(basis, {
        "x": basis.zero(2),
        "y": wedge(dx, dy),
        "w": wedge(dx, dw).scale(ctx.const(2)),
    })
    assert rules.d(dy) == wedge(dx, dy)
    assert rules.d(rules.d(dy)).is_zero()
    assert rules.d(rules.d(dw)).is_zero()
    prod = wedge(dy, dw)
    assert rules.d(prod) == wedge(rules.d(dy), dw) - wedge(dy, rules.d(dw))
