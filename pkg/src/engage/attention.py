"""Instant attention: one particle filter per tracked joint.

Every frame each tracked joint's particle cloud is pushed forward by the
joint's last observed displacement plus Gaussian noise, weighted against the
new observation, resampled, and its spread ``sigma`` re-estimated. The joint
whose cloud is widest (least predictable motion) is the attention target.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import MissingJoint
from .geometry import IDENTITY, Transform3, apply
from .skeleton import PosePosition

DEFAULT_ALPHA = 0.02
DEFAULT_PARTICLES = 200
DEFAULT_SIGMA0 = 1.0
SIGMA_FLOOR = 1e-6
# unnormalized weights all below this count as an all-zero weight vector
ZERO_WEIGHT = 1e-300


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    particles: np.ndarray  # (M, 3)
    weights: np.ndarray  # (M,)
    sigma: float
    joint: str = ""

    @property
    def size(self) -> int:
        return len(self.particles)


@dataclass(frozen=True)
class AttentionConfig:
    """Filter settings.

    ``dwell_frames`` > 0 makes a new argmax hold for that many consecutive
    frames before attention switches to it. ``workers`` > 1 updates the
    per-joint filters on a thread pool; results do not depend on it.
    """

    tracked: tuple[str, ...]
    M: int = DEFAULT_PARTICLES
    alpha: float = DEFAULT_ALPHA
    sigma0: float = DEFAULT_SIGMA0
    seed: int = 0
    sigma_floor: float = SIGMA_FLOOR
    dwell_frames: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tracked", tuple(self.tracked))
        if not self.tracked:
            raise ValueError("tracked joint set is empty")
        if len(set(self.tracked)) != len(self.tracked):
            raise ValueError("tracked joints must be distinct")
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class AttentionOutput:
    joint: str
    point_sensor: np.ndarray
    point_robot: np.ndarray
    sigmas: dict[str, float] = field(default_factory=dict)


def joint_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one joint, independent of update scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def init_cloud(joint: str, observed, M: int, sigma0: float,
               rng: np.random.Generator) -> ParticleCloud:
    observed = np.asarray(observed, dtype=float)
    particles = observed + math.sqrt(sigma0) * rng.standard_normal((M, 3))
    return ParticleCloud(particles, np.full(M, 1.0 / M), float(sigma0), joint)


def predict(cloud: ParticleCloud, delta, rng: np.random.Generator) -> ParticleCloud:
    """Shift every particle by ``delta`` and add N(0, sigma I) noise."""
    noise = rng.standard_normal(cloud.particles.shape)
    particles = cloud.particles + np.asarray(delta, dtype=float) + math.sqrt(cloud.sigma) * noise
    return replace(cloud, particles=particles)


def _squared_distances(particles: np.ndarray, observed) -> np.ndarray:
    diff = particles - np.asarray(observed, dtype=float)
    return np.einsum("ij,ij->i", diff, diff)


def weigh(cloud: ParticleCloud, observed) -> ParticleCloud:
    """Importance weights ``exp(-2 |x - J|^2)``, normalized over the cloud."""
    w = np.exp(-2.0 * _squared_distances(cloud.particles, observed))
    if not np.any(w >= ZERO_WEIGHT):
        w = np.full(cloud.size, 1.0 / cloud.size)
    else:
        w = w / w.sum()
    return replace(cloud, weights=w)


def systematic_indices(weights: np.ndarray, u: float) -> np.ndarray:
    """Low-variance resampling: one offset ``u`` in [0, 1) for all M draws."""
    m = len(weights)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, (u + np.arange(m)) / m, side="right")
    np.minimum(idx, m - 1, out=idx)
    return idx


def resample(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    idx = systematic_indices(cloud.weights, rng.random())
    return replace(cloud, particles=cloud.particles[idx],
                   weights=np.full(cloud.size, 1.0 / cloud.size))


def update_sigma(cloud: ParticleCloud, observed, alpha: float) -> float:
    """``alpha / M`` times the summed squared particle-to-observation distance."""
    return alpha * float(np.sum(_squared_distances(cloud.particles, observed))) / cloud.size


def to_robot_frame(p, t_rs: Transform3) -> np.ndarray:
    return apply(t_rs, p)


class _JointFilter:
    __slots__ = ("joint", "rng", "cloud", "last", "before_last")

    def __init__(self, joint: str, rng: np.random.Generator):
        self.joint = joint
        self.rng = rng
        self.cloud: ParticleCloud | None = None
        self.last: np.ndarray | None = None
        self.before_last: np.ndarray | None = None

    def step(self, observed: np.ndarray, cfg: AttentionConfig) -> float:
        if self.cloud is None:
            self.cloud = init_cloud(self.joint, observed, cfg.M, cfg.sigma0, self.rng)
        if self.last is not None and self.before_last is not None:
            delta = self.last - self.before_last
        else:
            delta = np.zeros(3)
        cloud = predict(self.cloud, delta, self.rng)
        cloud = weigh(cloud, observed)
        cloud = resample(cloud, self.rng)
        sigma = max(update_sigma(cloud, observed, cfg.alpha), cfg.sigma_floor)
        self.cloud = replace(cloud, sigma=sigma)
        self.before_last, self.last = self.last, observed
        return sigma


class InstantAttention:
    """Per-joint filter bank; call :meth:`step` once per frame, in order."""

    def __init__(self, cfg: AttentionConfig, t_rs: Transform3 = IDENTITY):
        self.cfg = cfg
        self.t_rs = t_rs
        self.filters = [_JointFilter(j, joint_rng(cfg.seed, i)) for i, j in enumerate(cfg.tracked)]
        self._pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
        self._current: str | None = None
        self._candidate: str | None = None
        self._candidate_count = 0

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def clouds(self) -> dict[str, ParticleCloud | None]:
        return {f.joint: f.cloud for f in self.filters}

    def step(self, pose: PosePosition) -> AttentionOutput:
        observed = []
        for f in self.filters:
            if f.joint not in pose.positions:
                raise MissingJoint(f.joint)
            observed.append(np.asarray(pose.positions[f.joint], dtype=float))

        if self._pool is None:
            sigmas = [f.step(obs, self.cfg) for f, obs in zip(self.filters, observed)]
        else:
            sigmas = list(self._pool.map(lambda fo: fo[0].step(fo[1], self.cfg),
                                         zip(self.filters, observed)))

        # first maximum in tracked order wins ties
        best = self.cfg.tracked[int(np.argmax(sigmas))]
        chosen = self._dwell(best)
        point = pose.positions[chosen]
        return AttentionOutput(
            joint=chosen,
            point_sensor=point,
            point_robot=to_robot_frame(point, self.t_rs),
            sigmas=dict(zip(self.cfg.tracked, sigmas)),
        )

    def _dwell(self, best: str) -> str:
        if self.cfg.dwell_frames <= 0 or self._current is None:
            self._current = best
            return best
        if best == self._current:
            self._candidate, self._candidate_count = None, 0
        elif best == self._candidate:
            self._candidate_count += 1
            if self._candidate_count >= self.cfg.dwell_frames:
                self._current = best
                self._candidate, self._candidate_count = None, 0
        else:
            self._candidate, self._candidate_count = best, 1
            if self.cfg.dwell_frames <= 1:
                self._current = best
                self._candidate, self._candidate_count = None, 0
        return self._current


def run_attention(poses: Sequence[PosePosition], cfg: AttentionConfig,
                  t_rs: Transform3 = IDENTITY) -> list[AttentionOutput]:
    with InstantAttention(cfg, t_rs) as att:
        return [att.step(p) for p in poses]
