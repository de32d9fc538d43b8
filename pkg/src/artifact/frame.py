"""Vector-field frames on the base manifold and their dual coframes.

A model's frame is produced by a recipe (explicit complex tangent fields
plus bracket combinations); the coframe is the inverse transpose of the
component matrix.  For graphed hypersurfaces the Levi-kernel direction
is computed from the graphing function.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dc_field

from .exterior import CovectorBasis, Form, exterior_derivative, wedge
from .symcore import ScalarError, SymScalar


class FrameError(Exception):
    pass


class VectorField:
    """Components over the coordinate symbols (a derivation of scalars)."""

    __slots__ = ("ctx", "components")

    def __init__(self, ctx, components):
        self.ctx = ctx
        self.components = {n: c for n, c in components.items() if not c.is_zero()}

    def apply(self, scalar: SymScalar) -> SymScalar:
        out = self.ctx.zero
        for name, comp in self.components.items():
            out = out + comp * scalar.diff(name)
        return out

    def scale(self, scalar):
        if not isinstance(scalar, SymScalar):
            scalar = self.ctx.const(scalar)
        return VectorField(self.ctx, {n: scalar * c for n, c in self.components.items()})

    def __add__(self, other):
        comps = dict(self.components)
        for n, c in other.components.items():
            comps[n] = comps.get(n, self.ctx.zero) + c
        return VectorField(self.ctx, comps)

    def __sub__(self, other):
        return self + other.scale(-1)

    def conjugate(self):
        comps = {}
        for n, c in self.components.items():
            comps[self.ctx.conj_name(n)] = c.conjugate()
        return VectorField(self.ctx, comps)

    def is_zero(self):
        return not self.components

    def __str__(self):
        if not self.components:
            return "0"
        return " + ".join("(%s) D(%s)" % (c, n)
                          for n, c in sorted(self.components.items()))

    __repr__ = __str__


def lie_bracket(x: VectorField, y: VectorField) -> VectorField:
    ctx = x.ctx
    comps = {}
    names = set(x.components) | set(y.components)
    for n in names:
        acc = ctx.zero
        yc = y.components.get(n)
        if yc is not None:
            acc = acc + x.apply(yc)
        xc = x.components.get(n)
        if xc is not None:
            acc = acc - y.apply(xc)
        if not acc.is_zero():
            comps[n] = acc
    return VectorField(ctx, comps)


def pair(form: Form, x: VectorField) -> SymScalar:
    """Evaluate a raw 1-form on a vector field."""
    if form.degree != 1 or not form.basis.raw:
        raise FrameError("pairing needs a raw 1-form")
    ctx = form.basis.ctx
    out = ctx.zero
    for (i,), c in form.terms.items():
        comp = x.components.get(form.basis.names[i])
        if comp is not None:
            out = out + c * comp
    return out


def evaluate2(form: Form, x: VectorField, y: VectorField) -> SymScalar:
    """Evaluate a raw 2-form on a pair of vector fields."""
    if form.degree != 2 or not form.basis.raw:
        raise FrameError("evaluation needs a raw 2-form")
    ctx = form.basis.ctx
    names = form.basis.names
    out = ctx.zero
    for (i, j), c in form.terms.items():
        xi = x.components.get(names[i], ctx.zero)
        xj = x.components.get(names[j], ctx.zero)
        yi = y.components.get(names[i], ctx.zero)
        yj = y.components.get(names[j], ctx.zero)
        out = out + c * (xi * yj - xj * yi)
    return out


@dataclass
class Model:
    """A base manifold presented by coordinates, a frame recipe and
    (optionally) a graphing function for the Levi-kernel computation."""

    name: str
    ctx: object
    coordinates: list        # coordinate symbol names, in frame-matrix order
    frame_names: list = _dc_field(default_factory=list)
    frame: dict = _dc_field(default_factory=dict)   # name -> VectorField
    coframe_names: list = _dc_field(default_factory=list)
    coframe_conj: dict = _dc_field(default_factory=dict)
    graph: object = None     # SymScalar F, or None


def matrix_inverse(rows, ctx):
    """Invert a dense square matrix of SymScalars by Gauss-Jordan."""
    n = len(rows)
    aug = [list(r) + [ctx.one if j == i else ctx.zero for j in range(n)]
           for i, r in enumerate(rows)]
    for col in range(n):
        pick = None
        for r in range(col, n):
            if not aug[r][col].is_zero() and aug[r][col].is_constant():
                pick = r
                break
        if pick is None:
            for r in range(col, n):
                if not aug[r][col].is_zero():
                    pick = r
                    break
        if pick is None:
            raise FrameError("matrix is singular (frame is dependent)")
        aug[col], aug[pick] = aug[pick], aug[col]
        pv = aug[col][col]
        aug[col] = [c / pv for c in aug[col]]
        for r in range(n):
            if r == col or aug[r][col].is_zero():
                continue
            f = aug[r][col]
            aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [[c.compress() for c in row[n:]] for row in aug]


def build_frame(model: Model):
    """Validate the frame: right count, independent (invertible matrix)."""
    n = len(model.coordinates)
    if len(model.frame_names) != n:
        raise FrameError("frame has %d fields for %d coordinates"
                         % (len(model.frame_names), n))
    rows = [[model.frame[f].components.get(c, model.ctx.zero)
             for c in model.coordinates] for f in model.frame_names]
    matrix_inverse(rows, model.ctx)  # raises if dependent
    return [model.frame[f] for f in model.frame_names]


def dualize(model: Model, raw: CovectorBasis) -> CovectorBasis:
    """The coframe basis dual to the model frame, with realizations."""
    ctx = model.ctx
    n = len(model.coordinates)
    rows = [[model.frame[f].components.get(c, ctx.zero)
             for c in model.coordinates] for f in model.frame_names]
    inv = matrix_inverse(rows, ctx)   # inv[i][j]: column i of rows^-1
    realizations = {}
    for i, name in enumerate(model.coframe_names):
        # omega_i = sum_k (rows^-1)[k][i] d(coord_k)  so that omega_i(X_j) = delta_ij
        coeffs = {}
        for k, coord in enumerate(model.coordinates):
            c = inv[k][i]
            if not c.is_zero():
                coeffs[coord] = c
        realizations[name] = raw.one_form(coeffs)
    return CovectorBasis(ctx, model.coframe_names, conj=model.coframe_conj,
                         realizations=realizations)


def graph_fields(model: Model, raw: CovectorBasis):
    """For a graphed model u = F(z, zbar, v): the tangent fields L_j, the
    characteristic form sigma0 and the Levi matrix in the L-frame.

    Coordinates are ordered [z_1, z_1b, ..., z_m, z_mb, v]; F may depend
    on all of them.
    """
    ctx = model.ctx
    F = model.graph
    if F is None:
        raise FrameError("model has no graphing data")
    coords = model.coordinates
    v = coords[-1]
    zs = [c for c in coords[:-1] if ctx.conj_name(c) != c]
    holo = [c for c in zs if c == min(c, ctx.conj_name(c))]
    i = ctx.i
    denom = ctx.one + i * F.diff(v)
    if denom.is_zero():
        raise FrameError("graph is characteristic: 1 + i F_v = 0")
    A = {}
    L = {}
    for z in holo:
        A[z] = -(i * F.diff(z)) / denom
        L[z] = VectorField(ctx, {z: ctx.one, v: A[z]})
    sigma0 = raw.d(v)
    for z in holo:
        sigma0 = sigma0 - raw.d(z).scale(A[z]) \
                        - raw.d(ctx.conj_name(z)).scale(A[z].conjugate())
    levi = {}
    for za in holo:
        for zb_ in holo:
            br = lie_bracket(L[za], L[zb_].conjugate())
            levi[(za, zb_)] = pair(sigma0, br.scale(i))
    return A, L, sigma0, levi


def levi_kernel(model: Model, raw: CovectorBasis):
    """The kernel direction K = k L_1 + L_2 of a rank-degenerate Levi form.

    Returns (k, K, sigma0, levi).  Raises when the Levi form is not
    degenerate in the declared sense (kernel must actually pair to zero
    against every L_jbar).
    """
    ctx = model.ctx
    A, L, sigma0, levi = graph_fields(model, raw)
    holo = sorted(L)
    if len(holo) != 2:
        raise FrameError("levi_kernel expects exactly two tangent fields")
    z1, z2 = holo
    if levi[(z1, z1)].is_zero():
        raise ScalarError("Levi (1,1) entry vanishes; cannot normalize kernel")
    k = -(levi[(z2, z1)]) / levi[(z1, z1)]
    K = L[z1].scale(k) + L[z2]
    for zj in holo:
        br = lie_bracket(K, L[zj].conjugate())
        if not pair(sigma0, br.scale(ctx.i)).is_zero():
            raise FrameError("declared kernel direction is not in the "
                             "Levi kernel against %s" % zj)
    return k, K, sigma0, levi


def cartan_check(omega: Form, x: VectorField, y: VectorField) -> bool:
    """dw(X,Y) = X(w(Y)) - Y(w(X)) - w([X,Y]) for a raw 1-form."""
    lhs = evaluate2(exterior_derivative(omega), x, y)
    rhs = x.apply(pair(omega, y)) - y.apply(pair(omega, x)) \
        - pair(omega, lie_bracket(x, y))
    return (lhs - rhs).is_zero()


__all__ = [
    "FrameError", "VectorField", "Model", "lie_bracket", "pair",
    "evaluate2", "matrix_inverse", "build_frame", "dualize",
    "graph_fields", "levi_kernel", "cartan_check", "wedge",
]
