"""Vector fields, brackets, dual coframes, graphed Levi kernels."""

import random

import pytest

from artifact.exterior import CovectorBasis, exterior_derivative, wedge
from artifact.frame import (FrameError, Model, VectorField, build_frame,
                            cartan_check, dualize, evaluate2, graph_fields,
                            levi_kernel, lie_bracket, matrix_inverse, pair)
from artifact.symcore import Context, Symbol


def make_ctx():
    syms = [Symbol("z", "coordinate", "zb"), Symbol("zb", "coordinate", "z"),
            Symbol("u", "coordinate", "u")]
    return Context(syms)


def rand_component(rng, ctx):
    gens = [ctx.sym(n) for n in ("z", "zb", "u")]
    acc = ctx.const(rng.randint(-3, 3))
    for _ in range(rng.randint(0, 2)):
        term = ctx.const(rng.randint(-2, 2))
        for g in rng.sample(gens, rng.randint(1, 2)):
            term = term * g
        acc = acc + term
    return acc


def rand_field(rng, ctx):
    return VectorField(ctx, {n: rand_component(rng, ctx)
                             for n in ("z", "zb", "u")})


def test_lie_bracket_jacobi_random():
    ctx = make_ctx()
    rng = random.Random(21)
    for _ in range(30):
        x, y, w = (rand_field(rng, ctx) for _ in range(3))
        jac = lie_bracket(x, lie_bracket(y, w)) \
            + lie_bracket(y, lie_bracket(w, x)) \
            + lie_bracket(w, lie_bracket(x, y))
        assert jac.is_zero()


def test_lie_bracket_antisymmetry_and_derivation():
    ctx = make_ctx()
    rng = random.Random(22)
    for _ in range(20):
        x, y = rand_field(rng, ctx), rand_field(rng, ctx)
        s = rand_component(rng, ctx)
        assert (lie_bracket(x, y) + lie_bracket(y, x)).is_zero()
        # [X, sY] = X(s) Y + s [X, Y]
        lhs = lie_bracket(x, y.scale(s))
        rhs = y.scale(x.apply(s)) + lie_bracket(x, y).scale(s)
        assert (lhs - rhs).is_zero()


def test_field_apply_is_a_derivation():
    ctx = make_ctx()
    z, u = ctx.sym("z"), ctx.sym("u")
    x = VectorField(ctx, {"z": ctx.one, "u": z})
    f, g = z * u, u + 2
    assert x.apply(f * g) == x.apply(f) * g + f * x.apply(g)
    assert x.apply(ctx.const(7)) == ctx.zero


def test_pair_and_evaluate2():
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    z = ctx.sym("z")
    x = VectorField(ctx, {"z": ctx.one, "u": z})
    y = VectorField(ctx, {"zb": ctx.one})
    omega = raw.one_form({"z": ctx.const(2), "u": ctx.i})
    assert pair(omega, x) == 2 + ctx.i * z
    assert pair(omega, y) == ctx.zero
    two = wedge(raw.d("z"), raw.d("zb"))
    assert evaluate2(two, x, y) == ctx.one
    assert evaluate2(two, y, x) == -ctx.one
    assert evaluate2(two, x, x) == ctx.zero


def test_cartan_formula_random():
    """dw(X,Y) = X w(Y) - Y w(X) - w([X,Y])."""
    ctx = make_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    rng = random.Random(23)
    for _ in range(15):
        omega = raw.one_form({n: rand_component(rng, ctx)
                              for n in ("z", "zb", "u")})
        x, y = rand_field(rng, ctx), rand_field(rng, ctx)
        assert cartan_check(omega, x, y)


def test_matrix_inverse_random():
    ctx = make_ctx()
    rng = random.Random(24)
    for _ in range(10):
        n = rng.randint(1, 3)
        rows = [[rand_component(rng, ctx) for _ in range(n)] for _ in range(n)]
        try:
            inv = matrix_inverse(rows, ctx)
        except FrameError:
            continue  # randomly singular; the error path is checked below
        for i in range(n):
            for j in range(n):
                acc = ctx.zero
                for k in range(n):
                    acc = acc + rows[i][k] * inv[k][j]
                assert acc == (ctx.one if i == j else ctx.zero)


def test_matrix_inverse_singular_raises():
    ctx = make_ctx()
    z = ctx.sym("z")
    with pytest.raises(FrameError):
        matrix_inverse([[z, z], [z, z]], ctx)


def test_build_frame_rejects_dependent_fields():
    ctx = make_ctx()
    x = VectorField(ctx, {"z": ctx.one})
    model = Model(name="bad", ctx=ctx, coordinates=["z", "zb", "u"],
                  frame_names=["X", "Y", "W"],
                  frame={"X": x, "Y": x.scale(2), "W": VectorField(ctx, {"u": ctx.one})},
                  coframe_names=["e1", "e2", "e3"], coframe_conj={})
    with pytest.raises(FrameError):
        build_frame(model)


def _check_dual_pairing(runner):
    model = runner.model
    base = runner.base_basis
    ctx = runner.ctx
    for i, cov in enumerate(model.coframe_names):
        omega = base.realizations[cov]
        for j, fname in enumerate(model.frame_names):
            want = ctx.one if i == j else ctx.zero
            assert pair(omega, model.frame[fname]) == want, (cov, fname)


def test_dual_pairing_model_b(model_b):
    _check_dual_pairing(model_b)


def test_dual_pairing_model_n(model_n):
    _check_dual_pairing(model_n)


def test_dual_pairing_model_lc(model_lc):
    _check_dual_pairing(model_lc)


def graphed_model(ctx, F):
    coords = ["z1", "z1b", "z2", "z2b", "v"]
    return Model(name="graph", ctx=ctx, coordinates=coords,
                 frame_names=[], frame={}, coframe_names=[],
                 coframe_conj={}, graph=F)


def graph_ctx():
    syms = [Symbol("z1", "coordinate", "z1b"), Symbol("z1b", "coordinate", "z1"),
            Symbol("z2", "coordinate", "z2b"), Symbol("z2b", "coordinate", "z2"),
            Symbol("v", "coordinate", "v")]
    return Context(syms)


def test_graph_fields_tangency():
    # the tangent fields annihilate u - F along the graph direction
    ctx = graph_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    z1, z1b, z2, z2b = (ctx.sym(n) for n in ("z1", "z1b", "z2", "z2b"))
    F = z1 * z1b + z2 * z2b * z2 * z2b
    A, L, sigma0, levi = graph_fields(model=graphed_model(ctx, F), raw=raw)
    for zn, field in L.items():
        # sigma0 pairs to zero against every tangent field
        assert pair(sigma0, field) == ctx.zero
        assert pair(sigma0, field.conjugate()) == ctx.zero
    assert levi[("z1", "z1")] == -2


def test_levi_kernel_degenerate_graph():
    ctx = graph_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    z1, z1b = ctx.sym("z1"), ctx.sym("z1b")
    k, K, sigma0, levi = levi_kernel(graphed_model(ctx, z1 * z1b), raw)
    assert k == ctx.zero
    assert pair(sigma0, lie_bracket(K, K.conjugate()).scale(ctx.i)) == ctx.zero


def test_levi_kernel_rejects_nondegenerate_graph():
    ctx = graph_ctx()
    raw = CovectorBasis.raw_basis(ctx)
    z1, z1b, z2, z2b = (ctx.sym(n) for n in ("z1", "z1b", "z2", "z2b"))
    with pytest.raises(FrameError):
        levi_kernel(graphed_model(ctx, z1 * z1b + z2 * z2b), raw)
