"""Residue number system arithmetic over the special moduli set {2^k-1, 2^k, 2^k+1}.

A signed integer X with |X| <= psi is represented by its residues
x_i = X mod m_i.  Addition and multiplication act componentwise, so a dot
product can be evaluated per modulus and recombined once at the end.  The
dynamic range is M = prod(m_i) = 2^(3k) - 2^k and the signed half-range is
psi = floor((M - 1) / 2); residues above psi decode to negative values.

Two reconstruction routes are provided:

* ``reverse_convert_crt``   -- textbook Chinese remainder combination,
  X = (sum_i x_i * M_i * T_i) mod M with M_i = M/m_i and T_i = M_i^-1 mod m_i.
* ``reverse_convert_special`` -- shift-friendly mixed-radix route specific to
  the three-modulus set: X = r2 + 2^k * t where t is recovered from the
  residue differences with power-of-two modular inverses.

Both must agree everywhere; the test suite checks this exhaustively for
small k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModulusSet",
    "ResidueTensor",
    "make_special_moduli",
    "forward_convert",
    "reverse_convert_crt",
    "reverse_convert_special",
    "residue_mac",
    "min_k",
    "check_range_inequality",
]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended Euclid: returns (g, s, t) with a*s + b*t == g == gcd(a, b)."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t


def _mod_inverse(a: int, m: int) -> int:
    g, s, _ = _xgcd(a % m, m)
    if g != 1:
        raise ValueError(f"{a} has no inverse modulo {m}")
    return s % m


@dataclass(frozen=True)
class ModulusSet:
    """A fixed set of pairwise-coprime moduli with precomputed CRT constants.

    Attributes:
        moduli: the moduli, ascending.
        k: set parameter when built as {2^k-1, 2^k, 2^k+1}, else None.
        dynamic_range: M = product of the moduli.
        psi: signed half-range, floor((M-1)/2).
        crt_weights: per-modulus constants (M_i * T_i) used by the CRT sum.
    """

    moduli: tuple[int, ...]
    k: int | None
    dynamic_range: int
    psi: int
    crt_weights: tuple[int, ...] = field(repr=False)

    @classmethod
    def from_moduli(cls, moduli, k: int | None = None) -> "ModulusSet":
        moduli = tuple(int(m) for m in moduli)
        if any(m < 2 for m in moduli):
            raise ValueError("moduli must be >= 2")
        for i, a in enumerate(moduli):
            for b in moduli[i + 1:]:
                if math.gcd(a, b) != 1:
                    raise ValueError(f"moduli {a} and {b} are not coprime")
        big_m = math.prod(moduli)
        weights = []
        for m in moduli:
            m_i = big_m // m
            t_i = _mod_inverse(m_i, m)
            weights.append(m_i * t_i)
        return cls(
            moduli=moduli,
            k=k,
            dynamic_range=big_m,
            psi=(big_m - 1) // 2,
            crt_weights=tuple(weights),
        )

    @property
    def n_moduli(self) -> int:
        return len(self.moduli)

    def bits_per_modulus(self) -> tuple[int, ...]:
        return tuple(int(math.ceil(math.log2(m))) for m in self.moduli)


def make_special_moduli(k: int) -> ModulusSet:
    """Build the set {2^k - 1, 2^k, 2^k + 1}; requires k >= 2.

    M = 2^(3k) - 2^k.  k=5 gives {31, 32, 33}, M = 32736, psi = 16367.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    base = 1 << k
    return ModulusSet.from_moduli((base - 1, base, base + 1), k=k)


@dataclass
class ResidueTensor:
    """Residue representation of an integer array: one array per modulus."""

    mset: ModulusSet
    per_modulus: list[np.ndarray]

    def __post_init__(self):
        shapes = {a.shape for a in self.per_modulus}
        if len(self.per_modulus) != self.mset.n_moduli or len(shapes) != 1:
            raise ValueError("one residue array of a common shape per modulus")
        for arr, m in zip(self.per_modulus, self.mset.moduli):
            if arr.size and (arr.min() < 0 or arr.max() >= m):
                raise ValueError(f"residues out of range for modulus {m}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.per_modulus[0].shape

    @classmethod
    def from_integers(cls, values, mset: ModulusSet) -> "ResidueTensor":
        arr = np.asarray(values, dtype=np.int64)
        if arr.size and int(np.abs(arr).max()) > mset.psi:
            raise ValueError(
                f"values exceed the signed range +/-{mset.psi} of the modulus set"
            )
        return cls(mset, [arr % m for m in mset.moduli])

    def to_integers(self, route: str = "special") -> np.ndarray:
        if route == "special":
            return reverse_convert_special(self, self.mset)
        return reverse_convert_crt(self, self.mset)


def forward_convert(x, mset: ModulusSet):
    """Residues of a signed integer (or integer array); |x| must be <= psi.

    forward_convert(100, k=5 set) == (7, 4, 1)
    forward_convert(-5,  k=5 set) == (26, 27, 28)
    """
    if np.isscalar(x) or isinstance(x, (int, np.integer)):
        xi = int(x)
        if abs(xi) > mset.psi:
            raise ValueError(f"|{xi}| exceeds the signed range +/-{mset.psi}")
        return tuple(xi % m for m in mset.moduli)
    return ResidueTensor.from_integers(x, mset)


def _to_arrays(residues, mset: ModulusSet) -> tuple[list[np.ndarray], bool]:
    if isinstance(residues, ResidueTensor):
        return residues.per_modulus, False
    arrs = [np.asarray(r) for r in residues]
    scalar = arrs[0].ndim == 0
    return arrs, scalar


def reverse_convert_crt(residues, mset: ModulusSet):
    """Chinese-remainder reconstruction to a signed integer.

    X = (sum_i x_i * M_i * T_i) mod M, then X - M if X > psi.  Scalar inputs
    use exact Python integers; arrays use int64 when the intermediates fit
    and object (big-int) arithmetic otherwise.
    """
    arrs, scalar = _to_arrays(residues, mset)
    if scalar:
        acc = 0
        for r, w in zip(arrs, mset.crt_weights):
            acc += int(r) * w
        x = acc % mset.dynamic_range
        return x - mset.dynamic_range if x > mset.psi else x

    # int64 is safe while sum_i (m_i-1)*M_i*T_i < 2^63
    bound = sum((m - 1) * w for m, w in zip(mset.moduli, mset.crt_weights))
    if bound < 2**62:
        acc = np.zeros(arrs[0].shape, dtype=np.int64)
        for r, w in zip(arrs, mset.crt_weights):
            acc += r.astype(np.int64) * np.int64(w)
        x = acc % np.int64(mset.dynamic_range)
        return np.where(x > mset.psi, x - mset.dynamic_range, x)
    acc = np.zeros(arrs[0].shape, dtype=object)
    for r, w in zip(arrs, mset.crt_weights):
        acc += r.astype(object) * w
    x = acc % mset.dynamic_range
    return np.where(x > mset.psi, x - mset.dynamic_range, x)


def reverse_convert_special(residues, mset: ModulusSet):
    """Shift-style reconstruction for {2^k-1, 2^k, 2^k+1}.

    Writing X = r2 + 2^k * t with t in [0, 2^(2k)-1):
        t = a (mod 2^k - 1)  with a = (r1 - r2) mod (2^k - 1)
        t = b (mod 2^k + 1)  with b = (r2 - r3) mod (2^k + 1)
    and both two-modulus CRT constants are powers of two, so
        t = 2^(k-1) * ((2^k + 1) * a + (2^k - 1) * b)  mod (2^(2k) - 1),
    i.e. shifts, adds and one end-around reduction.  Must agree with
    ``reverse_convert_crt`` everywhere.
    """
    if mset.k is None:
        raise ValueError("special reconstruction requires a {2^k-1, 2^k, 2^k+1} set")
    k = mset.k
    base = 1 << k
    ring = (1 << (2 * k)) - 1  # 2^(2k) - 1
    arrs, scalar = _to_arrays(residues, mset)
    if scalar:
        r1, r2, r3 = (int(a) for a in arrs)
        a = (r1 - r2) % (base - 1)
        b = (r2 - r3) % (base + 1)
        t = ((((a << k) + a + (b << k) - b)) << (k - 1)) % ring
        x = r2 + (t << k)
        return x - mset.dynamic_range if x > mset.psi else x

    r1, r2, r3 = (a.astype(np.int64) for a in arrs)
    a = (r1 - r2) % np.int64(base - 1)
    b = (r2 - r3) % np.int64(base + 1)
    t = (((a << k) + a + (b << k) - b) << (k - 1)) % np.int64(ring)
    x = r2 + (t << k)
    return np.where(x > mset.psi, x - mset.dynamic_range, x)


def residue_mac(a, b, mset: ModulusSet):
    """Dot product evaluated independently per modulus.

    a and b are residue vectors (ResidueTensor or per-modulus sequences);
    returns the residues of sum_j a_j * b_j.  Everything stays modular; no
    reconstruction happens here.
    """
    arrs_a, _ = _to_arrays(a, mset)
    arrs_b, _ = _to_arrays(b, mset)
    out = []
    for ra, rb, m in zip(arrs_a, arrs_b, mset.moduli):
        ra = ra.astype(np.int64)
        rb = rb.astype(np.int64)
        # elementwise product mod m first so the running sum stays < len * m^2
        out.append(int(((ra * rb) % m).sum() % m))
    return tuple(out)


def check_range_inequality(mset: ModulusSet, mantissa_bits: int, group_size: int) -> bool:
    """True when M >= g * 2^(2*b + 1), i.e. log2(M) >= 2(b+1) + log2(g) - 1.

    This guarantees any group dot product of b-bit-mantissa pairs fits the
    signed range: |sum| <= g * (2^b - 1)^2 < g * 2^(2b) <= psi.
    """
    return mset.dynamic_range >= group_size * (1 << (2 * mantissa_bits + 1))


def min_k(mantissa_bits: int, group_size: int) -> int:
    """Smallest k whose special set satisfies the range inequality.

    min_k(3, 16) == 4, min_k(4, 16) == 5, min_k(5, 16) == 6.
    """
    if mantissa_bits < 1 or group_size < 1:
        raise ValueError("mantissa_bits and group_size must be positive")
    need = group_size * (1 << (2 * mantissa_bits + 1))
    k = 2
    while ((1 << (3 * k)) - (1 << k)) < need:
        k += 1
    return k
