"""Matrix-valued differential forms on coordinate patches.

A :class:`MatrixForm` of degree ``p`` on a ``dim``-dimensional patch stores one
``n x n`` matrix per increasing multi-index ``I = (i_1 < ... < i_p)``, the
coefficient of ``dy_I``.  Coefficients are produced lazily by a callback that
receives coordinate jets, so exterior derivatives are exact (they come from
the Taylor coefficients, never from finite differences).

Forms may carry extra *parameter* coordinates (``nparams``) appended after
the patch coordinates.  They take part in the jets but not in ``d``; this is
how one- and two-parameter families are differentiated in the parameters.

Evaluation convention: ``(dy_1 ^ dy_2)(e_1, e_2) = 1``, i.e. a p-form acts on
vectors through the determinant of their components, which is the
``1/(d_1! ... d_k!)`` sum-over-permutations convention for wedge products.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from ..exprcalc import jets
from ..exprcalc.jets import Jet


@lru_cache(maxsize=None)
def combos(dim: int, degree: int) -> tuple:
    return tuple(itertools.combinations(range(dim), degree))


def _perm_sign(seq: Sequence[int]) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(dim: int, p: int, q: int):
    """Gather indices and a signed scatter matrix for dy_I ^ dy_J."""
    cp, cq, cr = combos(dim, p), combos(dim, q), combos(dim, p + q)
    pos = {k: n for n, k in enumerate(cr)}
    left, right, scatter = [], [], []
    for a, I in enumerate(cp):
        for b, J in enumerate(cq):
            if set(I) & set(J):
                continue
            left.append(a)
            right.append(b)
            scatter.append((pos[tuple(sorted(I + J))], _perm_sign(I + J)))
    mat = np.zeros((len(cr), len(left)))
    for col, (row, s) in enumerate(scatter):
        mat[row, col] = s
    return np.array(left, dtype=int), np.array(right, dtype=int), mat


@lru_cache(maxsize=None)
def _d_table(dim: int, p: int):
    """For each (p+1)-index K: list of (var, source component, sign)."""
    src = {k: n for n, k in enumerate(combos(dim, p))}
    out = []
    for K in combos(dim, p + 1):
        terms = []
        for pos, i in enumerate(K):
            rest = K[:pos] + K[pos + 1:]
            terms.append((i, src[rest], (-1) ** pos))
        out.append(terms)
    return out


def _linear(j: Jet, mat: np.ndarray) -> Jet:
    """Apply a constant matrix along the component axis (axis -3)."""
    return Jet(j.space, np.einsum("kp,z...pab->z...kab", mat, j.c))


def _depth(entries) -> int:
    return 1 + _depth(entries[0]) if isinstance(entries, (list, tuple)) else 0


def assemble(entries):
    """Stack nested lists of jets/numbers into trailing axes.

    ``assemble([[a, b], [c, d]])`` has value shape ``(*batch, 2, 2)`` when the
    entries are jets over a batch of points.
    """
    if not isinstance(entries, (list, tuple)):
        return entries
    axis = -_depth(entries)
    parts = [assemble(e) for e in entries]
    if any(isinstance(p, Jet) for p in parts):
        return jets.stack(parts, axis=axis)
    arrs = [np.asarray(p, dtype=complex) for p in parts]
    shape = np.broadcast_shapes(*(a.shape for a in arrs))
    return np.stack([np.broadcast_to(a, shape) for a in arrs], axis=axis)


class MatrixForm:
    """Matrix-valued p-form with jet-evaluable coefficients.

    ``coeffs(coords)`` receives ``dim + nparams`` coordinate jets and returns a
    jet (or constant array) whose trailing axes are ``(ncomp, n, n)`` where
    ``ncomp = C(dim, degree)``.
    """

    def __init__(self, degree: int, dim: int, size: int,
                 coeffs: Callable | None = None, nparams: int = 0,
                 jet_fn: Callable | None = None, name: str = ""):
        if not 0 <= degree <= 4 or degree > dim:
            raise ValueError(f"degree {degree} not allowed on a {dim}-patch")
        self.degree = degree
        self.dim = dim
        self.size = size
        self.nparams = nparams
        self.name = name
        self._coeffs = coeffs
        self._jet_fn = jet_fn
        self._cache = {}

    @property
    def ncomp(self) -> int:
        return len(combos(self.dim, self.degree))

    @property
    def nvars(self) -> int:
        return self.dim + self.nparams

    # evaluation -------------------------------------------------------
    def jet(self, point: Sequence, order: int) -> Jet:
        """Coefficient jets at ``point`` (sequence of ``nvars`` arrays)."""
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates")
        arrs = [np.asarray(p, dtype=float) for p in point]
        key = tuple((a.shape, a.tobytes()) for a in arrs)
        hit = self._cache.get(key)
        if hit is not None and hit.order >= order:
            return hit.truncate(order)
        out = self._compute(arrs, order)
        if len(self._cache) >= 4:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = out
        return out

    def _compute(self, point, order: int) -> Jet:
        if self._jet_fn is not None:
            return self._jet_fn(point, order)
        seeds = Jet.seeds([np.asarray(p, dtype=float) for p in point], order)
        out = self._coeffs(seeds)
        if not isinstance(out, Jet):
            shape = np.broadcast_shapes(*(np.shape(p) for p in point))
            out = np.asarray(out, dtype=complex)
            out = np.broadcast_to(out, shape + out.shape[-3:])
            out = Jet.constant(seeds[0].space, out)
        return out.truncate(order)

    def __call__(self, point: Sequence) -> np.ndarray:
        """Coefficient values, shape ``(*batch, ncomp, n, n)``."""
        return self.jet(point, 0).value

    def component(self, point: Sequence, index: Sequence[int]) -> np.ndarray:
        I = tuple(index)
        sign = _perm_sign(I)
        k = combos(self.dim, self.degree).index(tuple(sorted(I)))
        return sign * self(point)[..., k, :, :]

    def on_vectors(self, point: Sequence, vectors: Sequence) -> np.ndarray:
        """Evaluate on ``degree`` tangent vectors (components in dy-basis)."""
        vals = self(point)
        vecs = [np.asarray(v, dtype=complex) for v in vectors]
        if len(vecs) != self.degree:
            raise ValueError("wrong number of vectors")
        out = 0
        for k, I in enumerate(combos(self.dim, self.degree)):
            m = np.stack([np.stack([v[..., i] for i in I], axis=-1)
                          for v in vecs], axis=-2) if vecs else None
            det = np.linalg.det(m) if vecs else 1.0
            out = out + np.asarray(det)[..., None, None] * vals[..., k, :, :]
        return out

    # algebra ----------------------------------------------------------
    def _compatible(self, other: "MatrixForm"):
        if (self.dim, self.nparams) != (other.dim, other.nparams):
            raise ValueError("forms live on different patches")

    def __add__(self, other: "MatrixForm") -> "MatrixForm":
        self._compatible(other)
        if (self.degree, self.size) != (other.degree, other.size):
            raise ValueError("degree/size mismatch in sum")
        a, b = self, other
        return MatrixForm(self.degree, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: a.jet(p, k) + b.jet(p, k))

    def __neg__(self) -> "MatrixForm":
        a = self
        return MatrixForm(self.degree, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: -a.jet(p, k))

    def __sub__(self, other: "MatrixForm") -> "MatrixForm":
        return self + (-other)

    def scale(self, c) -> "MatrixForm":
        a = self
        return MatrixForm(self.degree, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: a.jet(p, k) * c)

    def __mul__(self, c) -> "MatrixForm":
        return self.scale(c)

    __rmul__ = __mul__

    def __xor__(self, other: "MatrixForm") -> "MatrixForm":
        return wedge(self, other)

    def trace(self) -> "MatrixForm":
        a = self
        return MatrixForm(self.degree, self.dim, 1, nparams=self.nparams,
                          jet_fn=lambda p, k: a.jet(p, k).trace()[..., None, None])

    def transpose(self) -> "MatrixForm":
        a = self
        return MatrixForm(self.degree, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: a.jet(p, k).T)

    def conjugate_by(self, mat: np.ndarray) -> "MatrixForm":
        """Constant conjugation ``m^{-1} F m``."""
        a, m = self, np.asarray(mat, dtype=complex)
        minv = np.linalg.inv(m)
        return MatrixForm(self.degree, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: minv @ a.jet(p, k) @ m)

    def map_values(self, fn: Callable, size: int | None = None) -> "MatrixForm":
        """Apply a linear map to every coefficient matrix (jet-aware)."""
        a = self
        return MatrixForm(self.degree, self.dim, size or self.size,
                          nparams=self.nparams,
                          jet_fn=lambda p, k: fn(a.jet(p, k)))

    def param_derivative(self, which: int = 0) -> "MatrixForm":
        """Derivative in the ``which``-th parameter coordinate."""
        if which >= self.nparams:
            raise ValueError("form has no such parameter")
        a, var = self, self.dim + which
        return MatrixForm(self.degree, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: a.jet(p, k + 1).diff(var))

    def inverse(self) -> "MatrixForm":
        if self.degree != 0:
            raise ValueError("only 0-forms can be inverted")
        a = self
        return MatrixForm(0, self.dim, self.size, nparams=self.nparams,
                          jet_fn=lambda p, k: jets.inv(a.jet(p, k)))


def zero_form(degree: int, dim: int, size: int, nparams: int = 0) -> MatrixForm:
    def coeffs(c):
        shape = c[0].shape
        return np.zeros(shape + (len(combos(dim, degree)), size, size))
    return MatrixForm(degree, dim, size, coeffs, nparams=nparams)


def constant_form(mats, degree: int, dim: int, nparams: int = 0) -> MatrixForm:
    """Form with constant coefficients ``mats`` of shape (ncomp, n, n)."""
    mats = np.asarray(mats, dtype=complex)

    def coeffs(c):
        return np.broadcast_to(mats, c[0].shape + mats.shape)
    return MatrixForm(degree, dim, mats.shape[-1], coeffs, nparams=nparams)


def wedge(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    """Wedge product with matrix multiplication of the coefficients."""
    a._compatible(b)
    p, q = a.degree, b.degree
    if p + q > a.dim:
        raise ValueError(f"wedge of degrees {p}+{q} exceeds patch dimension")
    if a.size != b.size and 1 not in (a.size, b.size):
        raise ValueError("matrix size mismatch in wedge")
    left, right, mat = _wedge_table(a.dim, p, q)
    size = max(a.size, b.size)

    def jet_fn(point, order):
        ja, jb = a.jet(point, order), b.jet(point, order)
        ga, gb = ja[..., left, :, :], jb[..., right, :, :]
        if a.size == b.size:
            prod = ga @ gb
        else:
            prod = ga * gb
        return _linear(prod, mat)

    return MatrixForm(p + q, a.dim, size, nparams=a.nparams, jet_fn=jet_fn)


def exterior_d(w: MatrixForm) -> MatrixForm:
    """Exterior derivative in the patch coordinates (exact, via jets)."""
    if w.degree == w.dim:
        return _zero_like(w, w.degree)
    table = _d_table(w.dim, w.degree)

    def jet_fn(point, order):
        j = w.jet(point, order + 1)
        parts = {}
        rows = []
        for terms in table:
            acc = None
            for var, comp, sign in terms:
                if var not in parts:
                    parts[var] = j.diff(var)
                t = parts[var][..., comp, :, :] * float(sign)
                acc = t if acc is None else acc + t
            rows.append(acc)
        return jets.stack(rows, axis=-3)

    return MatrixForm(w.degree + 1, w.dim, w.size, nparams=w.nparams,
                      jet_fn=jet_fn)


def _zero_like(w: MatrixForm, degree: int) -> MatrixForm:
    """A zero form one degree up; returned when d would exceed the dimension."""
    class _Top(MatrixForm):
        def __init__(self):
            self.degree, self.dim, self.size = degree + 1, w.dim, w.size
            self.nparams, self.name = w.nparams, "zero"
            self._coeffs, self._jet_fn, self._cache = None, None, {}

        @property
        def ncomp(self):
            return 0

        def jet(self, point, order):
            j = w.jet(point, order)
            return Jet(j.space, j.c[..., :0, :, :])
    return _Top()


def curvature_form(theta: MatrixForm) -> MatrixForm:
    """``d theta + theta ^ theta``."""
    _require_degree(theta, 1)
    return exterior_d(theta) + wedge(theta, theta)


def cs_form(theta: MatrixForm) -> MatrixForm:
    """Chern-Simons 3-form ``Tr(theta ^ d theta + 2/3 theta^3)`` (1x1)."""
    _require_degree(theta, 1)
    if theta.dim < 3:
        raise ValueError("Chern-Simons form needs at least a 3-patch")
    th2 = wedge(theta, theta)
    return (wedge(theta, exterior_d(theta)) + wedge(th2, theta) * (2.0 / 3.0)).trace()


def _require_degree(w: MatrixForm, degree: int):
    if w.degree != degree:
        raise ValueError(f"expected a {degree}-form, got degree {w.degree}")


def sup_norm(w: MatrixForm, point: Sequence) -> float:
    """Max absolute coefficient over the sampled batch."""
    v = w(point)
    return float(np.max(np.abs(v))) if v.size else 0.0


def variation_residual(family: MatrixForm, point: Sequence) -> float:
    """``sup | d/dt cs(theta^t) - d Tr(dtheta ^ theta) - 2 Tr(dtheta ^ Omega) |``.

    ``family`` is a 1-form with one parameter coordinate ``t`` (the last
    coordinate of ``point``); the residual is taken at the given ``t``.
    """
    if family.nparams < 1:
        raise ValueError("family needs a parameter coordinate")
    lhs = cs_form(family).param_derivative(0)
    dot = family.param_derivative(0)
    rhs = exterior_d(wedge(dot, family).trace()) \
        + wedge(dot, curvature_form(family)).trace() * 2.0
    return sup_norm(lhs - rhs, point)


# representations of sl2 -------------------------------------------------

SL2_BASIS = np.array([
    [[0, 1], [1, 0]],
    [[0, 1j], [-1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def sl2_coordinates(m: np.ndarray) -> np.ndarray:
    """Coordinates of traceless 2x2 matrices in the basis ``SL2_BASIS``."""
    gram = np.einsum("kab,lba->kl", SL2_BASIS, SL2_BASIS)
    rhs = np.einsum("kab,...ba->...k", SL2_BASIS, m)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def _ad_structure() -> np.ndarray:
    """Matrices of ad_{h_k} in the basis ``SL2_BASIS``."""
    out = np.zeros((3, 3, 3), dtype=complex)
    for k in range(3):
        for l in range(3):
            br = SL2_BASIS[k] @ SL2_BASIS[l] - SL2_BASIS[l] @ SL2_BASIS[k]
            out[k, :, l] = sl2_coordinates(br)
    return out


AD_BASIS = _ad_structure()


def adjoint_jet(j: Jet) -> Jet:
    """Adjoint representation of a jet of traceless 2x2 matrices."""
    gram_inv = np.linalg.inv(np.einsum("kab,lba->kl", SL2_BASIS, SL2_BASIS))
    coords = np.einsum("kl,lab,z...ba->z...k", gram_inv, SL2_BASIS, j.c)
    return Jet(j.space, np.einsum("z...k,kab->z...ab", coords, AD_BASIS))


def adjoint_form(theta: MatrixForm) -> MatrixForm:
    """Push an sl2-valued form through the adjoint representation."""
    return theta.map_values(adjoint_jet, size=3)
