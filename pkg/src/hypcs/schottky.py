"""Marked classical Schottky groups: validation, reduced and cyclic words,
multipliers, a limit-set dimension estimate and Zograf's product

    F(Gamma) = prod_{classes} prod_{m >= 0} (1 - q^{1+m}).

Letters are integers: ``k`` stands for ``L_{k+1}`` and ``k + g`` for its
inverse.  Words of length ``n`` are packed into integers with ``bits``
bits per letter, first letter in the most significant position, so that
integer order on equal-length words is lexicographic order.

Disks are finite: ``L_k`` maps the exterior of ``C_k`` onto the interior of
``C_-k``.  The letter ``x`` maps the complement of its *source* disk into
its *target* disk (``C_-k`` for ``L_k``, ``C_k`` for ``L_k^{-1}``).
"""

from __future__ import annotations

import cmath
import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .hyperbolic3 import MoebiusMap
from .specfile import SpecError, parse_spec


class SchottkyError(ValueError):
    """Input that is not marked classical Schottky data."""


# circles ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise SchottkyError("circle radius must be positive")

    def points(self, n: int = 16, phase: float = 0.1) -> np.ndarray:
        theta = phase + 2 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * theta)

    def image(self, m: MoebiusMap) -> "Circle":
        """Image circle under ``m``; the pole of ``m`` must lie off the closed disk."""
        if m.c != 0 and abs(-m.d / m.c - self.center) <= self.radius:
            raise SchottkyError("Moebius pole inside the disk: image is not a disk")
        return Circle(*mobius_image_of_disk(m.matrix, self.center, self.radius))


def mobius_image_of_disk(mat: np.ndarray, center: complex, radius: float) -> tuple:
    """:meth:`Circle.image` on raw ``2x2`` matrices (no validation)."""
    a, b, c, d = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    det = a * d - b * c
    if c == 0:
        return (a * center + b) / d, abs(a / d) * radius
    mirror = center + radius ** 2 / (-d / c - center).conjugate()
    new_center = (a * mirror + b) / (c * mirror + d)
    # closed form avoids cancellation for tiny radii
    return new_center, abs(det) * radius / abs(abs(c * center + d) ** 2
                                               - abs(c) ** 2 * radius ** 2)


def apollonius_circle(a: complex, b: complex, rho: float) -> Circle:
    """``{|z - a| = rho |z - b|}`` for ``rho != 1``."""
    if abs(rho - 1) < 1e-12:
        raise SchottkyError("rho = 1 gives a line, not a circle")
    return Circle((a - rho ** 2 * b) / (1 - rho ** 2), rho * abs(a - b) / abs(1 - rho ** 2))


# multipliers ------------------------------------------------------------------------------

def fixed_points(g: MoebiusMap) -> tuple:
    """``(attracting, repelling)`` fixed points of a loxodromic map (``inf`` allowed)."""
    q = multiplier(g, check=False)
    if g.c == 0:
        # z -> (a/d) z + b/d: finite fixed point and infinity
        k = g.a / g.d
        finite = g.b / (g.d - g.a)
        return (finite, complex("inf")) if abs(k) < 1 else (complex("inf"), finite)
    disc = cmath.sqrt((g.d - g.a) ** 2 + 4 * g.b * g.c)
    roots = [(g.a - g.d + s * disc) / (2 * g.c) for s in (1, -1)]
    derivs = [1 / (g.c * z + g.d) ** 2 for z in roots]
    if abs(derivs[0] - q) <= abs(derivs[1] - q):
        return roots[0], roots[1]
    return roots[1], roots[0]


def multiplier(g: MoebiusMap, check: bool = True, tol: float = 1e-9) -> complex:
    """``q`` with ``q + 1/q + 2 = tr^2`` and ``|q| < 1``.

    With ``check`` the derivative at the attracting fixed point is compared
    with ``q``.  Parabolic and elliptic maps raise :class:`SchottkyError`.
    """
    q = multiplier_from_trace(complex(g.trace), tol)
    if check:
        a, _ = fixed_points(g)
        if cmath.isinf(a):
            deriv = g.d / g.a if g.c == 0 else None
        else:
            deriv = 1 / (g.c * a + g.d) ** 2
        if deriv is not None and abs(deriv - q) > 1e-8 * max(1.0, abs(q)):
            raise SchottkyError("fixed-point derivative disagrees with the trace multiplier")
    return q


def multiplier_from_trace(trace: complex, tol: float = 1e-9) -> complex:
    """``q = lambda^{-2}`` with ``lambda`` the eigenvalue of modulus ``> 1`` of a
    unit-determinant matrix with this trace (no cancellation for small ``q``)."""
    t2 = trace * trace
    if abs(t2.imag) <= tol and -tol <= t2.real <= 4 + tol:
        raise SchottkyError(f"not loxodromic (tr^2 = {t2:.6g})")
    root = cmath.sqrt(t2 - 4)
    lam = max((trace + root) / 2, (trace - root) / 2, key=abs)
    return 1 / (lam * lam)


def loxodromic_from_fixed_points(attracting: complex, repelling: complex,
                                 q: complex) -> MoebiusMap:
    """The map with ``(Lz - a)/(Lz - b) = q (z - a)/(z - b)``."""
    if not 0 < abs(q) < 1:
        raise SchottkyError("need 0 < |q| < 1")
    t = np.array([[1, -attracting], [1, -repelling]], dtype=complex)
    s = cmath.sqrt(q)
    return MoebiusMap.from_matrix(np.linalg.inv(t) @ np.diag([s, 1 / s]) @ t)


def circle_pairing(source: Circle, target: Circle, twist: float = 0.0) -> MoebiusMap:
    """``z -> c' - r r' e^{i twist} u^2 / (z - c)``, ``u`` the unit vector from
    ``c`` to ``c'``: maps the exterior of ``source`` onto the interior of
    ``target``; with ``twist = 0`` the facing points correspond."""
    c, cp = source.center, target.center
    u = (cp - c) / abs(cp - c)
    rho = -source.radius * target.radius * cmath.exp(1j * twist) * u * u
    return MoebiusMap(cp, rho - c * cp, 1, -c)


# groups ---------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchottkyGroup:
    """Generators ``L_k`` with circle pairs ``(C_k, C_-k)``."""

    generators: tuple
    circles: tuple
    normalization: str = "as given"
    name: str = ""
    pair_tol: float = 1e-8

    def __post_init__(self):
        g = len(self.generators)
        if g < 1:
            raise SchottkyError("genus must be at least 1")
        if len(self.circles) != g:
            raise SchottkyError("one circle pair per generator is required")
        disks = self.all_circles
        for i in range(2 * g):
            for j in range(i + 1, 2 * g):
                a, b = disks[i], disks[j]
                if abs(a.center - b.center) <= a.radius + b.radius + 1e-12:
                    raise SchottkyError(
                        f"circles {self.circle_label(i)} and {self.circle_label(j)} "
                        "overlap or touch")
        for k, (gen, (src, dst)) in enumerate(zip(self.generators, self.circles)):
            multiplier(gen)
            img = np.array([gen.act(z) for z in src.points(16)])
            mismatch = float(np.abs(np.abs(img - dst.center) - dst.radius).max())
            if mismatch > self.pair_tol:
                raise SchottkyError(f"L_{k + 1} does not map C_{k + 1} onto C_-{k + 1} "
                                    f"(mismatch {mismatch:.2e})")
            far = src.center + 3 * src.radius
            if abs(gen.act(far) - dst.center) >= dst.radius:
                raise SchottkyError(f"L_{k + 1} does not map the exterior of C_{k + 1} "
                                    f"into C_-{k + 1}")
        mats = [np.asarray(m.matrix) for m in self.generators]
        mats += [np.asarray(m.inverse().matrix) for m in self.generators]
        object.__setattr__(self, "_mats", tuple(mats))

    @property
    def genus(self) -> int:
        return len(self.generators)

    @property
    def all_circles(self) -> list:
        """``[C_1, ..., C_g, C_-1, ..., C_-g]``."""
        return [p[0] for p in self.circles] + [p[1] for p in self.circles]

    def circle_label(self, i: int) -> str:
        g = self.genus
        return f"C_{i + 1}" if i < g else f"C_-{i - g + 1}"

    @property
    def bits(self) -> int:
        return max(1, (2 * self.genus - 1).bit_length())

    def inverse_letter(self, x: int) -> int:
        return (x + self.genus) % (2 * self.genus)

    def letter_matrix(self, x: int) -> np.ndarray:
        return self._mats[x]

    def target_disk(self, x: int) -> Circle:
        """Disk into which letter ``x`` maps the complement of its source disk."""
        g = self.genus
        return self.circles[x][1] if x < g else self.circles[x - g][0]

    def word_matrix(self, letters: Sequence[int]) -> np.ndarray:
        """Product of the unit-determinant letter matrices (not renormalized)."""
        m = np.eye(2, dtype=complex)
        for x in letters:
            m = m @ self._mats[x]
        return m

    def word_map(self, letters: Sequence[int]) -> MoebiusMap:
        return MoebiusMap.from_matrix(self.word_matrix(letters))

    def conjugate(self, sigma: MoebiusMap, name: str = "") -> "SchottkyGroup":
        """``sigma Gamma sigma^{-1}`` with the image circles (the pole of
        ``sigma`` must lie outside every disk)."""
        inv = sigma.inverse()
        gens = tuple(sigma @ m @ inv for m in self.generators)
        circles = tuple((a.image(sigma), b.image(sigma)) for a, b in self.circles)
        return SchottkyGroup(gens, circles, f"conjugated ({self.normalization})",
                             name or self.name, self.pair_tol)


def far_separated_group(radius: float = 0.05, twists: Sequence[float] = (0.0, 0.0),
                        shift: complex = 0.0) -> SchottkyGroup:
    """Genus 2: circles of equal radius at ``1, i`` (first handle, shifted by
    ``shift``) and ``-1, -i`` (second handle)."""
    c1 = (Circle(1 + shift, radius), Circle(1j + shift, radius))
    c2 = (Circle(-1, radius), Circle(-1j, radius))
    gens = (circle_pairing(*c1, twists[0]), circle_pairing(*c2, twists[1]))
    return SchottkyGroup(gens, (c1, c2), name=f"far-separated r={radius}")


def cyclic_group(q: complex = 0.25, attracting: complex = -1.0,
                 repelling: complex = 1.0) -> SchottkyGroup:
    """Genus-1 unit-test group: one loxodromic with Apollonius circles
    ``|w| = |q|^{-1/2}`` and ``|w| = |q|^{1/2}``, ``w = (z - a)/(z - b)``."""
    gen = loxodromic_from_fixed_points(attracting, repelling, q)
    rho = abs(q) ** 0.5
    pair = (apollonius_circle(attracting, repelling, 1 / rho),
            apollonius_circle(attracting, repelling, rho))
    return SchottkyGroup((gen,), (pair,), name=f"cyclic q={q}")


def translate_handle(group: SchottkyGroup, index: int, w: complex) -> SchottkyGroup:
    """Move both circles of handle ``index`` by ``w`` and conjugate its
    generator by the translation: a holomorphic family in ``w``."""
    shift = MoebiusMap(1, w, 0, 1)
    gens = list(group.generators)
    gens[index] = shift @ gens[index] @ shift.inverse()
    circles = list(group.circles)
    src, dst = circles[index]
    circles[index] = (Circle(src.center + w, src.radius), Circle(dst.center + w, dst.radius))
    return SchottkyGroup(tuple(gens), tuple(circles), group.normalization, group.name,
                         group.pair_tol)


# spec input --------------------------------------------------------------------------------

def build_group(spec) -> SchottkyGroup:
    """Group from a dict ``{"genus", "normalization", "generators": [...]}`` or
    from spec-file text.

    Each generator entry has ``matrix`` (``[a, b, c, d]``), ``circles``
    (``[c, r, c', r']``) or both; ``twist`` sets the pairing rotation when only
    circles are given.  Matrices without circles use the isometric circles of
    ``L`` and ``L^{-1}``.
    """
    if isinstance(spec, (str, bytes)):
        spec = group_spec_from_text(spec)
    gens, circles = [], []
    for k, entry in enumerate(spec["generators"]):
        mat = entry.get("matrix")
        circ = entry.get("circles")
        if circ is not None:
            c0, r0, c1, r1 = circ
            pair = (Circle(c0, r0), Circle(c1, r1))
        if mat is not None:
            m = MoebiusMap(*[complex(v) for v in mat])
            if circ is None:
                if abs(m.c) < 1e-14:
                    raise SchottkyError(f"generator {k + 1}: c = 0, give circles explicitly")
                r = 1 / abs(m.c)
                pair = (Circle(-m.d / m.c, r), Circle(m.a / m.c, r))
        elif circ is not None:
            m = circle_pairing(*pair, float(entry.get("twist", 0.0)))
        else:
            raise SchottkyError(f"generator {k + 1}: needs a matrix or circles")
        gens.append(m)
        circles.append(pair)
    genus = int(spec.get("genus", len(gens)))
    if genus != len(gens):
        raise SchottkyError(f"genus {genus} but {len(gens)} generators")
    return SchottkyGroup(tuple(gens), tuple(circles),
                         spec.get("normalization", "as given"), spec.get("name", ""))


def group_spec_from_text(text) -> dict:
    """``[group] genus, normalization`` and ``[gen k]`` sections with
    ``matrix = "a,b,c,d"`` and/or ``circles = "c, r, c', r'"``, ``twist``."""
    sections = parse_spec(text)
    if "group" not in sections:
        raise SpecError("missing [group] section", 0)
    head = sections["group"]
    genus = head.number("genus", kind=int)
    gens = []
    for k in range(1, genus + 1):
        sec = sections.get(f"gen {k}")
        if sec is None:
            raise SpecError(f"missing [gen {k}] section", head.offset)
        entry = {}
        if "matrix" in sec.values:
            entry["matrix"] = sec.numbers("matrix", complex)
            if len(entry["matrix"]) != 4:
                raise SpecError("matrix needs 4 entries", sec.offsets["matrix"])
        if "circles" in sec.values:
            vals = sec.numbers("circles", complex)
            if len(vals) != 4:
                raise SpecError("circles needs 4 entries", sec.offsets["circles"])
            entry["circles"] = [vals[0], vals[1].real, vals[2], vals[3].real]
        if "twist" in sec.values:
            entry["twist"] = sec.number("twist")
        if not entry:
            raise SpecError(f"[gen {k}] needs matrix or circles", sec.offset)
        gens.append(entry)
    return {"genus": genus, "normalization": head.get("normalization", "as given"),
            "generators": gens}


# words -------------------------------------------------------------------------------------

def encode_word(letters: Sequence[int], bits: int) -> int:
    code = 0
    for x in letters:
        code = (code << bits) | x
    return code


def decode_word(code: int, length: int, bits: int) -> tuple:
    mask = (1 << bits) - 1
    return tuple((code >> (bits * (length - 1 - i))) & mask for i in range(length))


def word_string(letters: Sequence[int], genus: int) -> str:
    """``a b ... `` for generators, capitals for inverses."""
    names = "abcdefghijklmnopqrstuvwxyz"
    return "".join(names[x] if x < genus else names[x - genus].upper() for x in letters)


def reduced_words(genus: int, length: int) -> Iterator[int]:
    """Packed reduced words of the given length, depth first."""
    if length == 0:
        yield 0
        return
    bits = max(1, (2 * genus - 1).bit_length())
    n = 2 * genus
    stack = [(x, x, 1) for x in reversed(range(n))]
    while stack:
        code, last, depth = stack.pop()
        if depth == length:
            yield code
            continue
        forbidden = (last + genus) % n
        for y in reversed(range(n)):
            if y != forbidden:
                stack.append(((code << bits) | y, y, depth + 1))


def cyclically_reduced_count(genus: int, n: int) -> int:
    """``(2g-1)^n + g + (g-1)(-1)^n`` (trace of the reduced-letter graph)."""
    return (2 * genus - 1) ** n + genus + (genus - 1) * (-1) ** n


def _mobius(n: int) -> int:
    out, p, m = 1, 2, n
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            out = -out
        p += 1
    return -out if m > 1 else out


def primitive_class_count(genus: int, n: int) -> int:
    """Number of primitive conjugacy classes of cyclic length ``n`` (necklace count)."""
    total = sum(_mobius(d) * cyclically_reduced_count(genus, n // d)
                for d in range(1, n + 1) if n % d == 0)
    return total // n


@dataclass(frozen=True)
class CyclicWord:
    """Canonical (lexicographically least) rotation of a primitive cyclic word."""

    letters: tuple
    genus: int
    multiplier: complex
    primitive: bool = True

    @property
    def length(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return word_string(self.letters, self.genus)


def _is_canonical_primitive(code: int, n: int, bits: int) -> bool:
    """Strictly smaller than every nontrivial rotation: canonical and primitive."""
    mask = (1 << (bits * n)) - 1
    top = bits * (n - 1)
    rot = code
    for _ in range(n - 1):
        rot = ((rot << bits) & mask) | (rot >> top)
        if rot <= code:
            return False
    return True


def primitive_classes(group: SchottkyGroup, maxlen: int) -> list:
    """One canonical word per primitive conjugacy class of cyclic length
    ``1..maxlen``; ``{gamma}`` and ``{gamma^{-1}}`` are distinct classes."""
    g, bits, out = group.genus, group.bits, []
    for n in range(1, maxlen + 1):
        for code in reduced_words(g, n):
            letters = decode_word(code, n, bits)
            if letters[0] == group.inverse_letter(letters[-1]) and n > 1:
                continue
            if not _is_canonical_primitive(code, n, bits):
                continue
            tr = complex(np.trace(group.word_matrix(letters)))
            out.append(CyclicWord(letters, g, multiplier_from_trace(tr)))
    return out


# limit-set dimension -----------------------------------------------------------------------

def nested_disk_radii(group: SchottkyGroup, length: int) -> np.ndarray:
    """Radii of the disks ``x_1 ... x_{n-1}(D_{x_n})`` over reduced words of
    the given length, built by prepending letters."""
    g2 = 2 * group.genus
    level = [(group.target_disk(x).center, group.target_disk(x).radius, x) for x in range(g2)]
    for _ in range(length - 1):
        nxt = []
        for c, r, first in level:
            forbidden = group.inverse_letter(first)
            for y in range(g2):
                if y != forbidden:
                    nc, nr = mobius_image_of_disk(group.letter_matrix(y), c, r)
                    nxt.append((nc, nr, y))
        level = nxt
    return np.array([r for _, r, _ in level])


@dataclass
class DimensionEstimate:
    value: float
    bracket: tuple
    maxlen: int
    converged: bool


def _pressure_root(r_prev: np.ndarray, r_cur: np.ndarray, tol: float) -> float:
    """Root in ``(0, 2)`` of ``P(s) = log Z_n(s) - log Z_{n-1}(s)``; 0 if
    ``P < 0`` throughout."""
    scale = r_prev.max()

    def pressure(s):
        return (np.log(np.sum((r_cur / scale) ** s))
                - np.log(np.sum((r_prev / scale) ** s)))
    lo, hi = 1e-12, 2.0
    if pressure(lo) <= 0:
        return 0.0
    if pressure(hi) > 0:
        raise SchottkyError("limit-set dimension bracket not found in (0, 2)")
    while hi - lo > tol * 1e-3:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:       # machine resolution reached
            break
        if pressure(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def limit_set_dimension(group: SchottkyGroup, maxlen: int = 5,
                        tol: float = 0.02) -> DimensionEstimate:
    """Zero of the truncated pressure from nested-disk radii at word lengths
    ``maxlen - 1, maxlen`` and ``maxlen, maxlen + 1``; the two roots form the
    reported bracket."""
    if maxlen < 2:
        raise ValueError("maxlen must be at least 2")
    radii = {n: nested_disk_radii(group, n) for n in (maxlen - 1, maxlen, maxlen + 1)}
    s_l = _pressure_root(radii[maxlen - 1], radii[maxlen], tol)
    s_next = _pressure_root(radii[maxlen], radii[maxlen + 1], tol)
    lo, hi = min(s_l, s_next), max(s_l, s_next)
    return DimensionEstimate(s_next, (lo, hi), maxlen, hi - lo <= tol)


# Zograf's product --------------------------------------------------------------------------

CLASS_CONVENTION = ("inverse classes {gamma} and {gamma^-1} counted separately; "
                    "value_inverse_identified keeps one class per inverse pair")


@dataclass
class ZografProduct:
    value: complex
    value_inverse_identified: complex
    tail: float
    class_count: int
    maxlen: int
    mmax: int
    contraction: float
    wall_time: float
    convention: str = CLASS_CONVENTION

    def to_json_dict(self) -> dict:
        return {"value": [self.value.real, self.value.imag],
                "value_inverse_identified": [self.value_inverse_identified.real,
                                             self.value_inverse_identified.imag],
                "tail": self.tail, "class_count": self.class_count,
                "maxlen": self.maxlen, "mmax": self.mmax,
                "contraction": self.contraction, "convention": self.convention,
                "wall_time": self.wall_time}


def _class_factor(q: complex, mmax: int) -> complex:
    out = 1.0 + 0j
    p = q
    for _ in range(mmax + 1):
        out *= 1 - p
        p *= q
    return out


def _log_tail(classes: list, genus: int, maxlen: int, mmax: int, kappa: float) -> float:
    """Bound on ``|log F - log F_{L,M}|`` from the omitted factors."""
    m_tail = sum(abs(c.multiplier) ** (mmax + 2) / (1 - abs(c.multiplier)) ** 2
                 for c in classes)
    lam = 2 * genus - 1
    if lam * kappa >= 1:
        return math.inf
    geo = (lam * kappa) ** (maxlen + 1) / (1 - lam * kappa)
    geo += genus * kappa ** (maxlen + 1) / (1 - kappa)
    geo += (genus - 1) * kappa ** (maxlen + 1) / (1 + kappa)
    return m_tail + geo / (1 - kappa) ** 2


def zograf_f(group: SchottkyGroup, maxlen: int, mmax: int = 20,
             check_delta: bool = False) -> ZografProduct:
    """Truncated product over primitive classes of length ``<= maxlen`` and
    ``m <= mmax`` with a tail radius.

    The class tail assumes ``|q_gamma| <= kappa^n`` for classes of length
    ``n``, with ``kappa`` the largest ``|q|^{1/n}`` seen up to ``maxlen``
    (at least length 1), and counts classes by cyclically reduced words; it is
    meaningful in the absolutely convergent regime ``delta < 1``.
    """
    t0 = time.perf_counter()
    if check_delta:
        est = limit_set_dimension(group, 4)
        if est.value >= 1:
            warnings.warn("delta estimate >= 1: the product need not converge")
    classes = primitive_classes(group, maxlen)
    probe = classes if maxlen >= 1 else primitive_classes(group, 1)
    kappa = max(abs(c.multiplier) ** (1 / c.length) for c in probe)
    value = 1.0 + 0j
    identified = 1.0 + 0j
    seen = set()
    for c in classes:
        f = _class_factor(c.multiplier, mmax)
        value *= f
        inv = _canonical_inverse(c.letters, group)
        if inv not in seen:
            identified *= f
        seen.add(c.letters)
    log_tail = _log_tail(classes, group.genus, maxlen, mmax, kappa)
    if maxlen >= 1:
        prev = [c for c in classes if c.length < maxlen]
        if log_tail >= _log_tail(prev, group.genus, maxlen - 1, mmax, kappa):
            warnings.warn("tail bound does not shrink with maxlen")
    tail = abs(value) * math.expm1(log_tail) if math.isfinite(log_tail) else math.inf
    return ZografProduct(value, identified, tail, len(classes), maxlen, mmax, kappa,
                         time.perf_counter() - t0)


def _canonical_inverse(letters: tuple, group: SchottkyGroup) -> tuple:
    inv = tuple(group.inverse_letter(x) for x in reversed(letters))
    n = len(inv)
    return min(inv[i:] + inv[:i] for i in range(n))


def holomorphy_residual(family: Callable[[complex], SchottkyGroup], w0: complex = 0.0,
                        step: float = 1e-4, maxlen: int = 3, mmax: int = 10) -> float:
    """``|dF/d wbar| / |dF/dw|`` by central differences at ``w0 +- h, w0 +- ih``."""
    def f(w):
        return zograf_f(family(w), maxlen, mmax).value
    du = (f(w0 + step) - f(w0 - step)) / (2 * step)
    dv = (f(w0 + 1j * step) - f(w0 - 1j * step)) / (2 * step)
    d_w = 0.5 * (du - 1j * dv)
    d_wbar = 0.5 * (du + 1j * dv)
    if abs(d_w) == 0:
        return 0.0 if abs(d_wbar) == 0 else math.inf
    return float(abs(d_wbar) / abs(d_w))
