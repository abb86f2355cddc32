"""Synthetic series drawn from the regression-HMM generative model.

``generate`` samples the hidden chain from (pi, A) and then each observation as
``y_i = B_{z_i}^T x_i + e_i`` with ``e_i ~ N(0, Sigma_{z_i})``. Two presets
are provided: a small well-separated three-regime problem, and a nine-channel
twelve-activity recording modelled on a chest/thigh/ankle accelerometer
protocol, where long postures alternate with short posture transitions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import MhmmrParams, TimeSeries
from .design import build_design, normalization
from .errors import InvalidSpec, ValidationError

GRAVITY = 9.81
SENSORS = ("chest", "thigh", "ankle")
AXES = ("x", "y", "z")
CHANNELS = tuple(f"{s}_{a}" for s in SENSORS for a in AXES)


@dataclass(frozen=True)
class GeneratorSpec:
    """Everything needed to draw one synthetic series.

    Unset ``pi``/``trans`` default to a uniform start and a chain whose
    self-transition probability gives an expected stay of ``mean_dwell``
    samples. Unset ``regressions``/``covariances`` are drawn so that regime
    mean curves stay at least ``separation`` noise standard deviations apart.
    """

    K: int
    p: int
    d: int
    n: int
    pi: Optional[np.ndarray] = None
    trans: Optional[np.ndarray] = None
    mean_dwell: float = 100.0
    regressions: Optional[np.ndarray] = None
    covariances: Optional[np.ndarray] = None
    separation: float = 6.0
    noise_scale: float = 1.0
    sample_rate: float = 25.0
    seed: int = 0
    channel_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for name in ("K", "d", "n"):
            if int(getattr(self, name)) < 1:
                raise InvalidSpec(f"{name} must be >= 1")
        if self.p < 0:
            raise InvalidSpec("p must be >= 0")
        if not self.separation > 0:
            raise InvalidSpec("separation must be > 0")
        if not self.noise_scale > 0:
            raise InvalidSpec("noise_scale must be > 0")
        if not self.mean_dwell >= 1:
            raise InvalidSpec("mean_dwell must be >= 1")
        if not self.sample_rate > 0:
            raise InvalidSpec("sample_rate must be > 0")
        if self.channel_names and len(self.channel_names) != self.d:
            raise InvalidSpec(f"{len(self.channel_names)} channel names for d={self.d}")
        for name, shape in (("pi", (self.K,)), ("trans", (self.K, self.K)),
                            ("regressions", (self.K, self.p + 1, self.d)),
                            ("covariances", (self.K, self.d, self.d))):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, dtype=float)
            if arr.shape != shape:
                raise InvalidSpec(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidSpec(f"unknown spec keys: {', '.join(unknown)}")
        missing = [k for k in ("K", "p", "d", "n") if k not in data]
        if missing:
            raise InvalidSpec(f"missing spec keys: {', '.join(missing)}")
        kwargs = dict(data)
        if "channel_names" in kwargs:
            kwargs["channel_names"] = tuple(kwargs["channel_names"])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(str(exc)) from exc


def load_spec(path) -> GeneratorSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InvalidSpec(f"{path}: line 1: top level must be an object")
    return GeneratorSpec.from_dict(data)


def dwell_transitions(K: int, mean_dwell) -> np.ndarray:
    """Diagonal-dominant chain with expected stay ``mean_dwell`` and uniform exits."""
    if K == 1:
        return np.ones((1, 1))
    stay = 1.0 - 1.0 / np.broadcast_to(np.asarray(mean_dwell, dtype=float), (K,))
    A = np.repeat(((1.0 - stay) / (K - 1))[:, None], K, axis=1)
    A[np.diag_indices(K)] = stay
    return A


def sample_chain(pi: np.ndarray, A: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """0-based state path of length ``n`` from a first-order Markov chain."""
    cum_pi = np.cumsum(pi)
    cum_A = np.cumsum(A, axis=1)
    u = rng.random(n)
    z = np.empty(n, dtype=np.int64)
    K = pi.size
    z[0] = min(int(np.searchsorted(cum_pi, u[0] * cum_pi[-1], side="right")), K - 1)
    for i in range(1, n):
        row = cum_A[z[i - 1]]
        z[i] = min(int(np.searchsorted(row, u[i] * row[-1], side="right")), K - 1)
    return z


def sample_emissions(params: MhmmrParams, timestamps: np.ndarray, z: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    X = build_design(timestamps, params.p, params.time_offset, params.time_scale).X
    noise = rng.standard_normal((z.size, params.d))
    Y = np.empty((z.size, params.d))
    for k in range(params.K):
        idx = np.flatnonzero(z == k)
        if idx.size == 0:
            continue
        L = np.linalg.cholesky(params.covariances[k])
        Y[idx] = X[idx] @ params.regressions[k] + noise[idx] @ L.T
    return Y


def _random_covariances(K: int, d: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    covs = np.empty((K, d, d))
    for k in range(K):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        eig = rng.uniform(0.5, 1.0, size=d)
        S = scale ** 2 * (Q * eig) @ Q.T
        covs[k] = 0.5 * (S + S.T)
    return covs


def _spaced_regressions(spec: GeneratorSpec, covs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    K, p, d = spec.K, spec.p, spec.d
    slope = 1.0
    spread = max(float(np.sqrt(np.linalg.eigvalsh(c)[-1])) for c in covs)
    spread = max(spread, spread ** 2)
    # polynomial parts of two states differ by at most 2*p*slope per channel on [0, 1]
    step = spec.separation * spread + 2.0 * p * slope * np.sqrt(d)
    direction = np.ones(d) / np.sqrt(d)
    B = np.zeros((K, p + 1, d))
    for k in range(K):
        B[k, 0] = k * step * direction
        if p:
            B[k, 1:] = rng.uniform(-slope, slope, size=(p, d))
    return B


def generate(spec: GeneratorSpec) -> tuple[TimeSeries, MhmmrParams]:
    """Labelled series plus the ground-truth parameters that produced it."""
    rng = np.random.default_rng(spec.seed)
    K = spec.K
    pi = spec.pi if spec.pi is not None else np.full(K, 1.0 / K)
    A = spec.trans if spec.trans is not None else dwell_transitions(K, spec.mean_dwell)
    covs = spec.covariances if spec.covariances is not None else _random_covariances(
        K, spec.d, spec.noise_scale, rng)
    B = spec.regressions if spec.regressions is not None else _spaced_regressions(spec, covs, rng)
    t = np.arange(spec.n) / spec.sample_rate
    offset, scale = normalization(t)
    try:
        params = MhmmrParams(pi, A, B, covs, offset, scale)
    except ValidationError as exc:
        raise InvalidSpec(str(exc)) from exc
    z = sample_chain(params.pi, params.trans, spec.n, rng)
    Y = sample_emissions(params, t, z, rng)
    names = spec.channel_names or tuple(f"y{j + 1}" for j in range(spec.d))
    return TimeSeries(t, Y, names, z + 1), params


def separated_spec(seed: int = 0, n: int = 3000) -> GeneratorSpec:
    """Three linear regimes in two channels, 6 noise sd apart, expected stay 100 samples."""
    return GeneratorSpec(K=3, p=1, d=2, n=n, mean_dwell=100.0, separation=6.0,
                         noise_scale=1.0, seed=seed)


# --- twelve-activity accelerometer-shaped preset ---------------------------------

STILL_NOISE = 0.12  # std of a sensor at rest, also used for sensors a transition leaves in place


@dataclass(frozen=True)
class Activity:
    name: str
    kind: str  # "static", "dynamic" or "transition"
    duration: tuple[int, int]  # inclusive sample range
    tilt: tuple[tuple[float, float], ...] = ()  # (polar, azimuth) degrees per sensor
    noise: tuple[float, float, float] = (STILL_NOISE,) * 3  # std per sensor


def _posture(name, kind, duration, tilt, noise=(STILL_NOISE,) * 3):
    return Activity(name, kind, duration, tilt, noise)


def _transition(name, duration, noise=(0.7, 0.9, 0.9), tilt=()):
    """A ramp from where the previous segment ends to ``tilt`` (default: the next posture)."""
    return Activity(name, "transition", duration, tilt, noise)


# Activity order follows a typical protocol; each transition links its neighbours.
# Static tilts are chosen so that every pair of sensors confuses one pair of
# postures that the third sensor separates: chest and ankle read the same
# standing or sitting, chest and thigh the same sitting on a chair or on the
# ground, thigh and ankle the same sitting on the ground or lying.
ACTIVITIES: tuple[Activity, ...] = (
    _posture("stairs_down", "dynamic", (250, 350), ((8, 0), (25, 0), (15, 0)), (1.2, 2.0, 3.0)),
    _posture("standing", "static", (200, 300), ((3, 0), (2, 0), (2, 0))),
    _transition("sitting_down", (50, 75)),
    _posture("sitting", "static", (250, 350), ((3, 0), (88, 0), (2, 0))),
    _transition("sitting_to_ground", (40, 70)),
    _posture("sitting_on_ground", "static", (250, 350), ((3, 0), (88, 0), (85, 0))),
    _transition("lying_down", (50, 75)),
    _posture("lying", "static", (250, 350), ((88, 0), (88, 0), (85, 0))),
    _transition("lying_to_ground", (50, 75), tilt=((3, 0), (88, 0), (85, 0))),
    _transition("standing_up", (50, 75)),
    _posture("walking", "dynamic", (250, 350), ((5, 0), (15, 0), (12, 0)), (0.9, 1.8, 2.6)),
    _posture("stairs_up", "dynamic", (250, 350), ((12, 0), (35, 0), (20, 0)), (1.1, 2.4, 3.2)),
)


def _gravity(tilt) -> np.ndarray:
    out = []
    for polar, azim in tilt:
        a, b = np.radians(polar), np.radians(azim)
        out.extend([GRAVITY * np.cos(a), GRAVITY * np.sin(a) * np.sin(b), GRAVITY * np.sin(a) * np.cos(b)])
    return np.array(out)


def _covariance(noise, correlated: bool) -> np.ndarray:
    sd = np.repeat(np.asarray(noise, dtype=float), 3)
    R = np.eye(9)
    if correlated:
        for s in range(3):
            blk = slice(3 * s, 3 * s + 3)
            R[blk, blk] = 0.3 + 0.7 * np.eye(3)
    return R * np.outer(sd, sd)


def _smoothstep_coefficients(a: float, b: float) -> np.ndarray:
    """Coefficients in u of ``3 s^2 - 2 s^3`` with ``s = (u - a) / (b - a)``."""
    s = np.polynomial.Polynomial([-a / (b - a), 1.0 / (b - a)])
    h = 3 * s ** 2 - 2 * s ** 3
    c = np.zeros(4)
    c[: h.coef.size] = h.coef
    return c


def activity_protocol(seed: int = 0, sample_rate: float = 25.0,
                 activities: Sequence[Activity] = ACTIVITIES) -> tuple[TimeSeries, MhmmrParams]:
    """Nine-channel recording of twelve activities performed once each, in order.

    Durations are drawn uniformly from each activity's range; postures are
    constant gravity projections, dynamic activities add strong correlated
    noise, and transitions follow a cubic smoothstep between the neighbouring
    postures. The returned parameters reproduce the generating means exactly
    (order 3) with a left-to-right chain matching the expected durations.
    """
    rng = np.random.default_rng(seed)
    K = len(activities)
    lengths = np.array([rng.integers(lo, hi + 1) for lo, hi in (a.duration for a in activities)])
    n = int(lengths.sum())
    t = np.arange(n) / sample_rate
    offset, scale = normalization(t)
    u = (t - offset) / scale
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    z = np.repeat(np.arange(K), lengths)

    postures = [k for k, act in enumerate(activities) if act.kind != "transition"]
    if not postures:
        raise InvalidSpec("the activity list needs at least one posture")
    B = np.zeros((K, 4, 9))
    covs = np.empty((K, 9, 9))
    level = _gravity(activities[postures[0]].tilt)  # mean at the end of the previous segment
    for k, act in enumerate(activities):
        if act.kind == "transition":
            nxt = [j for j in postures if j > k]
            if act.tilt:
                target = _gravity(act.tilt)
            elif nxt:
                target = _gravity(activities[nxt[0]].tilt)
            else:
                target = level
            start, stop = bounds[k], bounds[k + 1] - 1
            # ramp spans half a sample beyond the first and last sample of the segment
            half = 0.5 / (n - 1)
            c = _smoothstep_coefficients(u[start] - half, u[stop] + half)
            B[k] = np.outer(c, target - level)
            B[k, 0] += level
            moving = np.abs(target - level).reshape(3, 3).max(axis=1) > 1e-9
            covs[k] = _covariance(np.where(moving, act.noise, STILL_NOISE), False)
            level = target
        else:
            level = _gravity(act.tilt)
            B[k, 0] = level
            covs[k] = _covariance(act.noise, act.kind == "dynamic")

    expected = np.array([(lo + hi) / 2.0 for lo, hi in (a.duration for a in activities)])
    A = np.zeros((K, K))
    for k in range(K - 1):
        A[k, k] = 1.0 - 1.0 / expected[k]
        A[k, k + 1] = 1.0 / expected[k]
    A[K - 1, K - 1] = 1.0
    pi = np.zeros(K)
    pi[0] = 1.0
    params = MhmmrParams(pi, A, B, covs, offset, scale)
    Y = sample_emissions(params, t, z, rng)
    return TimeSeries(t, Y, CHANNELS, z + 1), params


PRESETS = {
    "separated": lambda seed: generate(separated_spec(seed)),
    "paper-shaped": activity_protocol,
}


def simulate_preset(name: str, seed: int = 0) -> tuple[TimeSeries, MhmmrParams]:
    try:
        make = PRESETS[name]
    except KeyError:
        raise InvalidSpec(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
    return make(seed)
