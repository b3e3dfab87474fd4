"""Quasi-static MIMO channel model in real-valued lattice form.

A channel draw is an n_R x n_T complex matrix with i.i.d. CN(0,1) entries
held fixed for T symbol slots.  The receiver-side model used everywhere
else in the package is real: each slot stacks real parts over imaginary
parts, so the per-slot channel is the 2n_R x 2n_T real embedding and the
full block channel is its T-fold block-diagonal (Kronecker) expansion.

Randomness is derived from numpy SeedSequence spawn keys so that every
(snr index, rate index, trial index) triple owns an independent substream
regardless of execution order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import _as_finite_array, real_embedding

SUPPORTED_FADING = ("rayleigh-iid",)

# Complex noise entries are CN(0,1); after stacking [Re; Im] each real
# coordinate carries variance 1/2.  Radius rules calibrated as xi^2 = z ln(rho)
# rely on this convention: P(||w||^2 > xi^2) then decays like rho^(-z).
NOISE_SIGMA = np.sqrt(0.5)


@dataclass(frozen=True)
class ChannelConfig:
    n_t: int
    n_r: int
    t: int
    fading: str = "rayleigh-iid"
    seed: int | None = None

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1 or self.t < 1:
            raise ValueError("antenna counts and block length must be positive")
        if self.fading not in SUPPORTED_FADING:
            raise ValueError(f"unsupported fading model {self.fading!r}")


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw in complex, per-slot real, and block-real form."""

    h_c: np.ndarray = field(repr=False)  # n_R x n_T complex
    h_r: np.ndarray = field(repr=False)  # 2n_R x 2n_T real
    h: np.ndarray = field(repr=False)    # 2n_R T x 2n_T T block diagonal


def substream(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent generator for one grid point / trial.

    Derived from (master seed, index path) with SeedSequence spawn keys,
    so streams never depend on scheduling or worker layout.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(indices))
    return np.random.default_rng(ss)


def sample_channel(cfg: ChannelConfig, rng: np.random.Generator | None = None) -> ChannelRealization:
    """Draw one channel realization: i.i.d. CN(0,1) entries.

    Real and imaginary parts each have variance 1/2 so E|h_ij|^2 = 1.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    re = rng.standard_normal((cfg.n_r, cfg.n_t))
    im = rng.standard_normal((cfg.n_r, cfg.n_t))
    h_c = (re + 1j * im) / np.sqrt(2.0)
    h_r = real_embedding(h_c)
    if cfg.t == 1:
        h = h_r
    else:
        h = np.kron(np.eye(cfg.t), h_r)
    return ChannelRealization(h_c=h_c, h_r=h_r, h=h)


def effective_lattice_matrix(ch: ChannelRealization, code, rho: float, r: float) -> np.ndarray:
    """Effective lattice basis M seen by the receiver.

    M = rho^(1/2 - rT/kappa) * H * G where H is the block-real channel and
    G the code generator.  The SNR prefactor combines the transmit power
    normalization with the constellation scaling that holds the rate at
    r log(rho); at r = kappa/(2T) the two exponents cancel exactly.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    g = code.generator
    n_cols = ch.h.shape[1]
    if g.shape[0] != n_cols:
        raise ValueError(f"generator has {g.shape[0]} rows, channel expects {n_cols}")
    kappa = g.shape[1]
    scale = rho ** (0.5 - r * code.t / kappa)
    return scale * (ch.h @ g)


def transmit(m: np.ndarray, s: np.ndarray, rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
    """Receive statistic y = M s + w, noise variance 1/2 per real coordinate.

    noise_scale multiplies the standard deviation NOISE_SIGMA; 0 gives the
    noiseless channel used by deterministic tests.
    """
    m = _as_finite_array(m, "lattice matrix")
    y = m @ np.asarray(s, dtype=float)
    if noise_scale != 0.0:
        y = y + (noise_scale * NOISE_SIGMA) * rng.standard_normal(m.shape[0])
    return y
