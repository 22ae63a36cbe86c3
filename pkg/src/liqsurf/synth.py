"""Synthetic surfaces and score series with known factor structure."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_odd_M
from .basis import legendre_grid_basis
from .exceptions import ValidationError
from .ingest import LiquiditySnapshot, SurfaceGrid, standard_grid
from .tsmodel.distributions import check_dist
from .tsmodel.estimation import ModelSpec, VolParams, simulate

BURN_IN = 500
DEFAULT_PHI = (0.95, 0.9, 0.85, 0.8, 0.75)
DEFAULT_SD = (3.0, 1.5, 0.8, 0.5, 0.3)


@dataclass(frozen=True)
class FactorDynamics:
    """AR(1) score with a volatility recursion and innovation law."""

    phi: float
    vol: str = "GARCH(1,1)"
    vol_params: VolParams = VolParams(0.05, 0.1, 0.85)
    dist: str = "t"
    shape: tuple = (6.0,)
    unit_root: bool = False

    def __post_init__(self):
        ModelSpec("AR(1)", self.vol, self.dist)
        object.__setattr__(self, "shape", check_dist(self.dist, self.shape))
        if not isinstance(self.vol_params, VolParams):
            object.__setattr__(self, "vol_params", VolParams(**self.vol_params))
        self.vol_params.check(self.vol)
        if abs(self.phi) >= 1 and not self.unit_root:
            raise ValidationError(f"|phi| = {abs(self.phi)} >= 1 requires unit_root=True")

    @classmethod
    def with_target_sd(cls, phi, sd, alpha=0.1, beta=0.85, nu=6.0):
        """AR(1)-GARCH(1,1)-t whose stationary score sd equals ``sd``."""
        omega = sd**2 * (1 - phi**2) * (1 - alpha - beta)
        return cls(phi, "GARCH(1,1)", VolParams(omega, alpha, beta), "t", (nu,))


def default_factors(K=5):
    if not 1 <= K <= len(DEFAULT_PHI):
        raise ValidationError(f"default dynamics cover 1..{len(DEFAULT_PHI)} factors, got {K}")
    return tuple(FactorDynamics.with_target_sd(p, s) for p, s in zip(DEFAULT_PHI[:K], DEFAULT_SD[:K]))


def simulate_score_series(phi, vol, params, dist, T, seed=None, shape=None, unit_root=False):
    """beta_t = phi beta_{t-1} + sigma_t z_t after a burn-in of 500 steps.

    Parameters
    ----------
    phi : float
    vol : str
        Volatility model name.
    params : VolParams or dict
    dist : str
    T : int
    seed : int, Generator or None
    shape : tuple, optional
        Innovation shape parameters; family defaults when omitted.
    unit_root : bool
        Permit |phi| >= 1.
    """
    if abs(phi) >= 1 and not unit_root:
        raise ValidationError(f"|phi| = {abs(phi)} >= 1 requires unit_root=True")
    if int(T) != T or T < 1:
        raise ValidationError(f"T must be a positive integer, got {T!r}")
    rng = np.random.default_rng(seed)
    eps, _ = simulate(vol, params, dist, shape, int(T) + BURN_IN, rng=rng, burn=0)
    out = np.empty(eps.size)
    prev = 0.0
    for t in range(eps.size):
        prev = phi * prev + eps[t]
        out[t] = prev
    return out[BURN_IN:]


@dataclass(frozen=True)
class SynthSpec:
    """Surface y_t(x) = a - b|x| + sum_k beta_{t,k} psi_k(x) + noise.

    ``noise_sd`` is the absolute per-entry noise standard deviation; when
    None it is set to ``noise_ratio`` times the smallest realized score sd.
    """

    T: int = 800
    M: int = 201
    a: float = 42.0
    b: float = 2.0
    factors: tuple = field(default_factory=default_factors)
    noise_sd: float = None
    noise_ratio: float = 0.01
    seed: int = 0
    start_block: int = 0
    block_spacing: int = 2400

    def __post_init__(self):
        check_odd_M(self.M)
        if int(self.T) != self.T or self.T < 2:
            raise ValidationError(f"T must be an integer >= 2, got {self.T!r}")
        if not self.factors or len(self.factors) > self.M:
            raise ValidationError("need between 1 and M factors")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise ValidationError("noise_sd must be non-negative")
        if self.block_spacing < 1:
            raise ValidationError("block_spacing must be positive")

    @property
    def K_true(self):
        return len(self.factors)


@dataclass(frozen=True)
class SynthTruth:
    scores: np.ndarray
    basis: np.ndarray
    mean_row: np.ndarray
    noise_sd: float


def generate_surface(spec=None):
    """Draw a surface from ``spec``; returns (SurfaceGrid, SynthTruth)."""
    spec = spec or SynthSpec()
    ss = np.random.SeedSequence(spec.seed)
    child = ss.spawn(spec.K_true + 1)
    scores = np.column_stack([
        simulate_score_series(
            f.phi, f.vol, f.vol_params, f.dist, spec.T, np.random.default_rng(s), f.shape, f.unit_root
        )
        for f, s in zip(spec.factors, child[:-1])
    ])
    x = standard_grid(spec.M)
    basis = legendre_grid_basis(x, spec.K_true)
    mean_row = spec.a - spec.b * np.abs(x)
    noise_sd = spec.noise_sd
    if noise_sd is None:
        noise_sd = spec.noise_ratio * float(np.min(scores.std(axis=0)))
    noise = np.random.default_rng(child[-1]).standard_normal((spec.T, spec.M)) * noise_sd
    values = mean_row + scores @ basis.T + noise
    blocks = spec.start_block + spec.block_spacing * np.arange(spec.T, dtype=np.int64)
    return SurfaceGrid(blocks, x, values), SynthTruth(scores, basis, mean_row, noise_sd)


def surface_to_snapshots(surface, tick_spacing=1):
    """Snapshots whose rank-standardized log liquidity reproduces ``surface``.

    Each row becomes a contiguous run of ticks centred on tick 0, so every
    stored tick is a liquidity jump.
    """
    half = (surface.M - 1) // 2
    ticks = np.arange(-half, half + 1, dtype=np.int64) * int(tick_spacing)
    out = []
    for b, row in zip(surface.block_numbers, surface.values):
        liq = np.exp(row)
        if np.any(liq[1:] == liq[:-1]):
            raise ValidationError(f"block {b}: adjacent equal values leave too few liquidity jumps")
        out.append(LiquiditySnapshot(int(b), int(tick_spacing), 0, ticks, liq))
    return out
