"""Normal-ordered differential operators on the density algebra.

Every operator is a finite sum of terms ``t^lam * c(x) * d^alpha * w^j``
stored as ``{(lam, alpha, j): c}``.  ``alpha`` is an exponent vector over the
chart coordinates (entries for odd coordinates are 0 or 1) and the word
``d^alpha = d_0^{k_0} d_1^{k_1} ...`` is applied right to left, i.e. the last
coordinate acts first.  ``w`` is the weight operator; it commutes with
``c`` and ``d`` and satisfies ``w t^lam = t^lam (w + lam)``.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

from .densities import Density, Derivation
from .scalar import Chart, Parity, ScalarExpr, as_fraction


def _word_parity(chart: Chart, word: tuple) -> int:
    return sum(k for k, p in zip(word, chart.parities) if p) % 2


def _insert_partial(chart: Chart, a: int, word: tuple):
    """d_a * d^word in normal order: (sign, word) or None when d_a^2 = 0 for odd a."""
    odd = chart.parities[a]
    if odd and word[a]:
        return None
    sign = 1
    if odd:
        passed = sum(word[b] for b in range(a) if chart.parities[b])
        if passed % 2:
            sign = -1
    return sign, word[:a] + (word[a] + 1,) + word[a + 1:]


def _flip_odd(c: ScalarExpr, flag) -> ScalarExpr:
    if not flag:
        return c
    ev, od = c.split_parity()
    return ev - od


class DiffOp:
    """Immutable normal-ordered differential operator on densities."""

    __slots__ = ("chart", "terms")

    def __init__(self, chart: Chart, terms: Mapping):
        self.chart = chart
        out = {}
        for (lam, word, j), c in terms.items():
            if not c.is_zero():
                out[(as_fraction(lam), tuple(word), int(j))] = c
        self.terms = out

    # -- constructors -----------------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart) -> "DiffOp":
        return cls(chart, {})

    @classmethod
    def _empty_word(cls, chart: Chart) -> tuple:
        return tuple([0] * chart.dim)

    @classmethod
    def identity(cls, chart: Chart) -> "DiffOp":
        return cls.scalar(chart.one())

    @classmethod
    def scalar(cls, c: ScalarExpr, lam=0) -> "DiffOp":
        return cls(c.chart, {(as_fraction(lam), cls._empty_word(c.chart), 0): c})

    @classmethod
    def multiplication(cls, a) -> "DiffOp":
        """Multiplication by a Density or ScalarExpr."""
        if isinstance(a, ScalarExpr):
            return cls.scalar(a)
        return cls(a.chart, {(w, cls._empty_word(a.chart), 0): c for w, c in a.parts.items()})

    @classmethod
    def partial(cls, chart: Chart, name, power: int = 1) -> "DiffOp":
        i = chart._idx(name)
        if chart.parities[i] and power > 1:
            return cls.zero(chart)
        word = tuple(power if k == i else 0 for k in range(chart.dim))
        return cls(chart, {(Fraction(0), word, 0): chart.one()})

    @classmethod
    def weight_op(cls, chart: Chart, power: int = 1) -> "DiffOp":
        return cls(chart, {(Fraction(0), cls._empty_word(chart), power): chart.one()})

    @classmethod
    def t_power(cls, chart: Chart, lam) -> "DiffOp":
        return cls(chart, {(as_fraction(lam), cls._empty_word(chart), 0): chart.one()})

    @classmethod
    def from_derivation(cls, X: Derivation) -> "DiffOp":
        chart = X.chart
        terms = {}
        for a, xa in enumerate(X.coords):
            word = tuple(1 if k == a else 0 for k in range(chart.dim))
            terms[(X.lam, word, 0)] = xa
        terms[(X.lam, cls._empty_word(chart), 1)] = X.wpart
        return cls(chart, terms)

    @classmethod
    def wpoly(cls, chart: Chart, coeffs: Sequence) -> "DiffOp":
        """Polynomial sum_j coeffs[j] w^j with rational coefficients."""
        e = cls._empty_word(chart)
        return cls(chart, {(Fraction(0), e, j): chart.const(c) for j, c in enumerate(coeffs)})

    # -- structure ----------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def _homogeneous_terms(self):
        """Yield (key, parity, part) with part parity-homogeneous."""
        for key, c in self.terms.items():
            wp = _word_parity(self.chart, key[1])
            for p, part in c.homogeneous_parts():
                yield key, Parity((int(p) + wp) % 2), part

    def split_parity(self) -> tuple:
        ev, od = {}, {}
        for key, p, part in self._homogeneous_terms():
            tgt = od if p else ev
            tgt[key] = tgt[key] + part if key in tgt else part
        return DiffOp(self.chart, ev), DiffOp(self.chart, od)

    @property
    def parity(self):
        ps = {p for _, p, _ in self._homogeneous_terms()}
        if not ps:
            return Parity.EVEN
        return ps.pop() if len(ps) == 1 else None

    @property
    def lam(self):
        """The common weight shift, or None when the operator mixes weights."""
        ls = {k[0] for k in self.terms}
        if not ls:
            return Fraction(0)
        return ls.pop() if len(ls) == 1 else None

    def pencil_order(self) -> int:
        """Order as an operator on all densities: max(|alpha| + j); -1 for zero."""
        return max((sum(k[1]) + k[2] for k in self.terms), default=-1)

    def slice_order(self) -> int:
        """Order on a fixed-weight slice: max |alpha|; -1 for zero."""
        return max((sum(k[1]) for k in self.terms), default=-1)

    def wdegree(self) -> int:
        return max((k[2] for k in self.terms), default=-1)

    def coefficient(self, word: Sequence[int], j: int = 0, lam=None) -> ScalarExpr:
        if lam is None:
            lam = self.lam if self.lam is not None else Fraction(0)
        return self.terms.get((as_fraction(lam), tuple(word), j), self.chart.zero())

    def word_of(self, *names) -> tuple:
        word = [0] * self.chart.dim
        for n in names:
            word[self.chart._idx(n)] += 1
        return tuple(word)

    def wpart(self, j: int) -> "DiffOp":
        """Coefficient of w^j as a w-free operator."""
        return DiffOp(self.chart, {(l, a, 0): c for (l, a, jj), c in self.terms.items() if jj == j})

    def truncate(self, order: int) -> "DiffOp":
        """Terms of slice order exactly ``order``."""
        return DiffOp(self.chart, {k: c for k, c in self.terms.items() if sum(k[1]) == order})

    # -- arithmetic -----------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, DiffOp):
            if other.chart is not self.chart:
                raise ValueError("mismatched charts")
            return other
        if isinstance(other, ScalarExpr):
            return DiffOp.scalar(other)
        if isinstance(other, (int, Fraction)):
            return DiffOp.scalar(self.chart.const(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return DiffOp(self.chart, out)

    __radd__ = __add__

    def __neg__(self):
        return DiffOp(self.chart, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        """Scalar multiple for numbers; composition for operators."""
        if isinstance(other, (int, Fraction)):
            return DiffOp(self.chart, {k: c * other for k, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return compose(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return compose(other, self)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def apply(self, psi: Density) -> Density:
        return apply(self, psi)

    def __call__(self, psi: Density) -> Density:
        return apply(self, psi)

    def __str__(self):
        return format_op(self)

    def __repr__(self):
        return f"DiffOp({format_op(self)})"


def format_op(op: DiffOp) -> str:
    if op.is_zero():
        return "0"
    names = op.chart.names
    parts = []
    for (lam, word, j), c in sorted(op.terms.items(), key=lambda kv: (kv[0][0], sum(kv[0][1]), kv[0][1], kv[0][2])):
        fs = []
        if lam:
            fs.append(f"t^({lam})")
        fs.append(f"({c})")
        for n, k in zip(names, word):
            if k:
                fs.append(f"d_{n}" + (f"^{k}" if k > 1 else ""))
        if j:
            fs.append("w" + (f"^{j}" if j > 1 else ""))
        parts.append("*".join(fs))
    return " + ".join(parts)


def _apply_word(chart: Chart, word: tuple, f: ScalarExpr) -> ScalarExpr:
    for a in reversed(range(chart.dim)):
        for _ in range(word[a]):
            f = f.diff(a)
            if f.is_zero():
                return f
    return f


def apply(op: DiffOp, psi: Density) -> Density:
    """Exact action on a density; the weight operator acts diagonally."""
    out: dict = {}
    chart = op.chart
    for (lam, word, j), c in op.terms.items():
        for w, f in psi.parts.items():
            if j and not w:
                continue
            d = _apply_word(chart, word, f)
            if d.is_zero():
                continue
            val = c * d
            if j:
                val = val * (w ** j)
            key = w + lam
            out[key] = out[key] + val if key in out else val
    return Density(chart, out)


def _left_partial(chart: Chart, a: int, terms: dict) -> dict:
    """d_a composed on the left of a w-free sum {word: c} of c d^word."""
    out: dict = {}
    odd = chart.parities[a]

    def add(word, c):
        if c.is_zero():
            return
        out[word] = out[word] + c if word in out else c

    for word, c in terms.items():
        add(word, c.diff(a))
        ins = _insert_partial(chart, a, word)
        if ins is None:
            continue
        sign, nw = ins
        cc = _flip_odd(c, odd)
        add(nw, -cc if sign < 0 else cc)
    return out


def _word_times_coefficient(chart: Chart, word: tuple, c: ScalarExpr, word2: tuple) -> dict:
    """Normal-order d^word * c * d^word2 into {word: coefficient}."""
    terms = {word2: c}
    for a in reversed(range(chart.dim)):
        for _ in range(word[a]):
            terms = _left_partial(chart, a, terms)
            if not terms:
                return terms
    return terms


def compose(A: DiffOp, B: DiffOp) -> DiffOp:
    """Normal-ordered product A o B."""
    if A.chart is not B.chart:
        raise ValueError("mismatched charts")
    chart = A.chart
    out: dict = {}
    cache: dict = {}
    for (l1, w1, j1), c1 in A.terms.items():
        for (l2, w2, j2), c2 in B.terms.items():
            key = (w1, w2, id(c2))
            if key not in cache:
                cache[key] = _word_times_coefficient(chart, w1, c2, w2)
            inner = cache[key]
            if not inner:
                continue
            # w^{j1} t^{l2} = t^{l2} (w + l2)^{j1}
            wpoly = {}
            for i in range(j1 + 1):
                coef = comb(j1, i) * (l2 ** (j1 - i))
                if coef:
                    wpoly[i + j2] = wpoly.get(i + j2, 0) + coef
            for word, c in inner.items():
                base = c1 * c
                if base.is_zero():
                    continue
                for jj, coef in wpoly.items():
                    k = (l1 + l2, word, jj)
                    val = base * coef
                    out[k] = out[k] + val if k in out else val
    return DiffOp(chart, out)


def commutator(A: DiffOp, B: DiffOp) -> DiffOp:
    """Graded commutator AB - (-1)^{AB} BA, bilinear over parity parts."""
    out = DiffOp.zero(A.chart)
    for pa, Ap in zip((0, 1), A.split_parity()):
        if Ap.is_zero():
            continue
        for pb, Bp in zip((0, 1), B.split_parity()):
            if Bp.is_zero():
                continue
            ab = compose(Ap, Bp)
            ba = compose(Bp, Ap)
            out = out + (ab + ba if pa and pb else ab - ba)
    return out


def adjoint(op: DiffOp) -> DiffOp:
    """Formal adjoint for the residue pairing: t* = t, d_a* = -d_a, w* = 1 - w."""
    chart = op.chart
    out = DiffOp.zero(chart)
    e = DiffOp._empty_word(chart)
    for (lam, word, j), c in op.terms.items():
        wp = _word_parity(chart, word)
        left = DiffOp(chart, {(Fraction(0), word, 0): chart.one()})
        if j:
            one_minus_w = DiffOp.wpoly(chart, [1, -1])
            pw = DiffOp.identity(chart)
            for _ in range(j):
                pw = compose(pw, one_minus_w)
            left = compose(pw, left)
        for p, part in c.homogeneous_parts():
            sign = -1 if (int(p) * wp + sum(word)) % 2 else 1
            right = DiffOp(chart, {(lam, e, 0): part})
            term = compose(left, right)
            out = out + (term if sign > 0 else -term)
    return out


def specialize(op: DiffOp, w0) -> DiffOp:
    """Substitute the number w0 for the weight operator."""
    w0 = as_fraction(w0)
    out: dict = {}
    for (lam, word, j), c in op.terms.items():
        k = (lam, word, 0)
        val = c * (w0 ** j) if j else c
        out[k] = out[k] + val if k in out else val
    return DiffOp(op.chart, out)


def pencil_coefficients(op: DiffOp) -> dict:
    """{j: coefficient operator of w^j}."""
    return {j: op.wpart(j) for j in range(op.wdegree() + 1)}


def conjugate(op: DiffOp, phi: ScalarExpr) -> DiffOp:
    """e^{-phi} o op o e^{phi} for an even scalar phi, via d_a -> d_a + d_a(phi)."""
    chart = op.chart
    if phi.parity != Parity.EVEN:
        raise ValueError("conjugation needs an even exponent")
    shifted = [DiffOp.partial(chart, a) + DiffOp.scalar(phi.diff(a)) for a in range(chart.dim)]
    e = DiffOp._empty_word(chart)
    out = DiffOp.zero(chart)
    for (lam, word, j), c in op.terms.items():
        prod = DiffOp.identity(chart)
        for a in range(chart.dim):
            for _ in range(word[a]):
                prod = compose(prod, shifted[a])
        head = DiffOp(chart, {(lam, e, 0): c})
        tail = DiffOp(chart, {(Fraction(0), e, j): chart.one()})
        out = out + compose(compose(head, prod), tail)
    return out


def multiplication_commutator(op: DiffOp, a: Density) -> DiffOp:
    return commutator(op, DiffOp.multiplication(a))


def default_probes(chart: Chart) -> list:
    """Generators of the density algebra: the coordinates and t."""
    probes = [Density.of(chart.coordinate(n), 0, chart) for n in chart.names]
    probes.append(Density.of(chart.one(), 1, chart))
    return probes


def grothendieck_order(op: DiffOp, probes: Sequence[Density] | None = None, max_order: int = 12) -> int:
    """Least n with all (n+1)-fold commutators with probe multiplications zero.

    Iterated commutators with multiplication operators are graded-symmetric in
    the probes, so only multisets are visited.  The zero operator has order -1.
    """
    if op.is_zero():
        return -1
    probes = list(probes) if probes is not None else default_probes(op.chart)
    mults = [DiffOp.multiplication(p) for p in probes]
    level = {(): op}
    for n in range(max_order + 1):
        nxt = {}
        for key, D in level.items():
            start = key[-1] if key else 0
            for i in range(start, len(mults)):
                C = commutator(D, mults[i])
                if not C.is_zero():
                    nxt[key + (i,)] = C
        if not nxt:
            return n
        level = nxt
    raise ArithmeticError(f"order exceeds {max_order}")


def check_order_agreement(op: DiffOp, probes=None) -> int:
    """Grothendieck order, raising if it disagrees with the syntactic pencil order."""
    g = grothendieck_order(op, probes)
    s = op.pencil_order()
    if g != s:
        raise ArithmeticError(f"commutator order {g} disagrees with syntactic order {s}")
    return g


def polarization_brackets(op: DiffOp, k: int, args: Sequence[Density]) -> Density:
    """[[...[op, a_1], ...], a_k] applied to 1."""
    if k < 1 or len(args) != k:
        raise ValueError("need k >= 1 and exactly k arguments")
    D = op
    for a in args:
        D = commutator(D, DiffOp.multiplication(a))
    return apply(D, Density.one(op.chart))


def derivation_from_operator(op: DiffOp) -> Derivation:
    """Read an order-1 unit-killing operator as a Derivation."""
    chart = op.chart
    lam = op.lam
    if lam is None:
        raise ValueError("operator mixes weights")
    if op.pencil_order() > 1:
        raise ValueError("operator has order above one")
    if not apply(op, Density.one(chart)).is_zero():
        raise ValueError("operator does not annihilate 1")
    coords = []
    for a in range(chart.dim):
        word = tuple(1 if k == a else 0 for k in range(chart.dim))
        coords.append(op.coefficient(word, 0, lam))
    wpart = op.coefficient(DiffOp._empty_word(chart), 1, lam)
    return Derivation(chart, coords, wpart, lam, op.parity if op.parity is not None else Parity.EVEN)


def lie_derivative(chart: Chart, Q: Sequence[ScalarExpr], parity=None) -> DiffOp:
    """Q^a d_a + w d_a Q^a (-1)^{a(Q+1)}: the divergence-free lift of an M-vector field."""
    from .densities import coordinate_divergence

    X = Derivation(chart, Q, 0, 0, parity)
    div = coordinate_divergence(X)
    return DiffOp.from_derivation(Derivation(chart, Q, div, 0, X.parity))


def adjoint_witness(op: DiffOp, psi: Density, chi: Density) -> list:
    """Integration-by-parts witness V^a for a single-parity psi and chi.

    Returns V with  <op psi, chi> - (-1)^{op psi} <psi, op* chi> = sum_a d_a V^a,
    where <.,.> is the residue pairing integrand (weight-1 component).
    """
    chart = op.chart
    V = [chart.zero() for _ in range(chart.dim)]
    e = DiffOp._empty_word(chart)
    for (lam, word, j), c in op.terms.items():
        for p, part in c.homogeneous_parts():
            factors = [DiffOp(chart, {(lam, e, 0): chart.one()}), DiffOp.scalar(part)]
            letters = [None, None]
            for a in range(chart.dim):
                for _ in range(word[a]):
                    factors.append(DiffOp.partial(chart, a))
                    letters.append(a)
            for _ in range(j):
                factors.append(DiffOp.weight_op(chart))
                letters.append(None)
            # <F_1...F_m phi, chi>: peel one factor at a time
            sign = 1
            cur_chi = chi
            for i, (F, a) in enumerate(zip(factors, letters)):
                rest = DiffOp.identity(chart)
                for G in factors[i + 1:]:
                    rest = compose(rest, G)
                phi_i = apply(rest, psi)
                if a is not None:
                    prod = (phi_i * cur_chi).component(1)
                    V[a] = V[a] + (prod if sign > 0 else -prod)
                fp = int(F.parity)
                php = phi_i.parity
                if fp and php:
                    sign = -sign
                cur_chi = apply(adjoint(F), cur_chi)
    return V
