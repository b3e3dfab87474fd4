"""Lattice space-time codes and their rate-scaled integer constellations.

A code is a real generator matrix G (m x kappa, m = 2 n_T T) plus a
shaping half-width eta.  The transmitted codeword for an integer symbol
vector s is x = rho^(-rT/kappa) G s with s confined to the scaled
hypercube Z^kappa intersect [-eta rho^(rT/kappa), eta rho^(rT/kappa)]^kappa,
which makes the code carry rate r log2(rho) bits per channel use while
meeting the unit average power budget E||x||^2 = T.

eta is calibrated once per code in the continuous limit:
E||G u||^2 = (eta^2 / 3) ||G||_F^2 for u uniform on the cube, so
eta = sqrt(3 T / ||G||_F^2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import _as_finite_array


@dataclass(frozen=True)
class LatticeCodeSpec:
    name: str
    n_t: int
    t: int
    generator: np.ndarray = field(repr=False)  # m x kappa
    shaping_half_width: float

    def __post_init__(self):
        g = _as_finite_array(self.generator, "generator").astype(float)
        object.__setattr__(self, "generator", g)
        if g.ndim != 2:
            raise ValueError("generator must be a matrix")
        if g.shape[0] != 2 * self.n_t * self.t:
            raise ValueError("generator must have 2 n_T T rows")
        if self.shaping_half_width <= 0:
            raise ValueError("shaping half-width must be positive")

    @property
    def kappa(self) -> int:
        return self.generator.shape[1]


@dataclass(frozen=True)
class ConstellationBox:
    """Per-coordinate inclusive integer bounds of the scaled hypercube."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.int64)
        hi = np.asarray(self.hi, dtype=np.int64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if np.any(hi < lo):
            raise ValueError("degenerate box: hi < lo")

    def contains(self, s) -> bool:
        sv = np.asarray(s)
        return bool(np.all(sv >= self.lo) and np.all(sv <= self.hi))

    def log2_cardinality(self) -> float:
        return float(np.sum(np.log2(self.hi - self.lo + 1)))


def _calibrated_half_width(generator: np.ndarray, t: int) -> float:
    return float(np.sqrt(3.0 * t / np.sum(generator**2)))


def make_vblast(n_t: int, t: int) -> LatticeCodeSpec:
    """Uncoded spatial multiplexing: G is the 2 n_T T identity.

    Valid as a full-dimension code when n_R >= n_T, where
    kappa = 2 min(n_T, n_R) T equals the number of rows.
    """
    g = np.eye(2 * n_t * t)
    return LatticeCodeSpec(
        name="vblast",
        n_t=n_t,
        t=t,
        generator=g,
        shaping_half_width=_calibrated_half_width(g, t),
    )


def complex_generator_to_real(gc: np.ndarray, n_t: int, t: int) -> np.ndarray:
    """Real form of a complex generator acting on Gaussian-integer symbols.

    gc maps kappa/2 complex symbols to the slot-major complex transmit
    vector (antenna runs fastest).  The real form acts on interleaved
    (Re, Im) symbol pairs and produces per-slot stacked [Re; Im] transmit
    coordinates, matching the channel's real embedding convention.
    """
    gc = np.asarray(gc, dtype=complex)
    n_rows, n_sym = gc.shape
    if n_rows != n_t * t:
        raise ValueError("complex generator must have n_T * T rows")
    out = np.zeros((2 * n_t * t, 2 * n_sym))
    for p in range(n_rows):
        slot, ant = divmod(p, n_t)
        row_re = slot * 2 * n_t + ant
        row_im = slot * 2 * n_t + n_t + ant
        for j in range(n_sym):
            c = gc[p, j]
            out[row_re, 2 * j] = c.real
            out[row_re, 2 * j + 1] = -c.imag
            out[row_im, 2 * j] = c.imag
            out[row_im, 2 * j + 1] = c.real
    return out


def make_threaded_2x2() -> LatticeCodeSpec:
    """Full-rate threaded algebraic code for n_T = T = 2.

    Two interleaved threads carry four Gaussian-integer symbols through a
    degree-2 algebraic rotation built from the golden ratio
    theta = (1 + sqrt 5)/2; the 1/sqrt(5) normalization gives the 4x4
    complex generator unit-magnitude determinant and makes its real form
    orthogonal, so shaping losses vanish.
    """
    sqrt5 = np.sqrt(5.0)
    theta = (1.0 + sqrt5) / 2.0
    theta_bar = (1.0 - sqrt5) / 2.0
    alpha = 1.0 + 1j * (1.0 - theta)
    alpha_bar = 1.0 + 1j * (1.0 - theta_bar)
    # Rows are slot-major: (x_11, x_21, x_12, x_22).
    gc = np.array(
        [
            [alpha, alpha * theta, 0.0, 0.0],
            [0.0, 0.0, 1j * alpha_bar, 1j * alpha_bar * theta_bar],
            [0.0, 0.0, alpha, alpha * theta],
            [alpha_bar, alpha_bar * theta_bar, 0.0, 0.0],
        ],
        dtype=complex,
    ) / sqrt5
    g = complex_generator_to_real(gc, n_t=2, t=2)
    return LatticeCodeSpec(
        name="threaded-2x2",
        n_t=2,
        t=2,
        generator=g,
        shaping_half_width=_calibrated_half_width(g, 2),
    )


def constellation(code: LatticeCodeSpec, rho: float, r: float) -> ConstellationBox:
    """Integer symbol bounds at operating point (rho, r).

    Each coordinate ranges over the integers in
    [-eta rho^(rT/kappa), eta rho^(rT/kappa)]; the box never inverts and
    collapses to the single point 0 as rho -> 1 from above.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if r < 0:
        raise ValueError("multiplexing gain must be nonnegative")
    half = code.shaping_half_width * rho ** (r * code.t / code.kappa)
    hi = int(np.floor(half))
    lo = int(np.ceil(-half))
    ones = np.ones(code.kappa, dtype=np.int64)
    return ConstellationBox(lo=lo * ones, hi=hi * ones)


def encode(code: LatticeCodeSpec, rho: float, r: float, s) -> np.ndarray:
    """Codeword x = rho^(-rT/kappa) G s for an integer symbol vector."""
    sv = np.asarray(s, dtype=float)
    if sv.shape != (code.kappa,):
        raise ValueError("symbol vector has wrong length")
    return rho ** (-r * code.t / code.kappa) * (code.generator @ sv)


def permute_columns(code: LatticeCodeSpec, perm) -> LatticeCodeSpec:
    """Reorder generator columns (symbol detection order hook).

    The permuted spec generates the same lattice code; only the order in
    which the search fixes symbols changes.
    """
    p = np.asarray(perm, dtype=int)
    if sorted(p.tolist()) != list(range(code.kappa)):
        raise ValueError("not a permutation of the symbol indices")
    return LatticeCodeSpec(
        name=f"{code.name}-perm",
        n_t=code.n_t,
        t=code.t,
        generator=code.generator[:, p],
        shaping_half_width=code.shaping_half_width,
    )


def load_code_spec(path) -> LatticeCodeSpec:
    """Read a code spec from a JSON file.

    Expected keys: name, n_t, t, generator (row-major list of rows) and
    optionally shaping_half_width (defaults to the calibrated value).
    """
    with open(path) as fh:
        doc = json.load(fh)
    try:
        g = np.array(doc["generator"], dtype=float)
        n_t = int(doc["n_t"])
        t = int(doc["t"])
        name = str(doc.get("name", "custom"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed code spec file {path}: {exc}") from exc
    eta = float(doc.get("shaping_half_width", _calibrated_half_width(g, t)))
    return LatticeCodeSpec(name=name, n_t=n_t, t=t, generator=g, shaping_half_width=eta)


def builtin_code(name: str, n_t: int, t: int) -> LatticeCodeSpec:
    """Construct one of the named built-in code families."""
    if name == "vblast":
        return make_vblast(n_t, t)
    if name in ("threaded-2x2", "golden"):
        if (n_t, t) != (2, 2):
            raise ValueError("threaded-2x2 requires n_T = T = 2")
        return make_threaded_2x2()
    raise ValueError(f"unknown code family {name!r}")
