"""Width-conditioned distribution families for multipath component parameters.

Each MPC carries five parameters: relative power (dB, Laplace), relative
delay (s, exponential), azimuth of arrival (deg, single-sided Laplace per
canyon side), elevation of arrival (deg, Laplace), and phase (rad, uniform).
The location parameters of the first three are linear in the one-sided
canyon width d; EoA and phase do not depend on d.

``ModelParams`` holds the full calibratable hyperparameter set, including
the birth-death transition matrices and the large-scale path-loss models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelError
from .geometry import Side

# Azimuth-of-arrival quadrant per canyon side, receiver array frame.
AOA_RANGE = {Side.LEFT: (0.0, 90.0), Side.RIGHT: (90.0, 180.0)}

_REJECTION_CAP = 10_000


@dataclass(frozen=True)
class MarkovMatrix:
    """Two-state (dead=0 / alive=1) transition matrix."""

    p00: float
    p01: float
    p10: float
    p11: float

    def validate(self) -> None:
        for name in ("p00", "p01", "p10", "p11"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ModelError(f"markov entry {name}={v} outside [0, 1]")
        if abs(self.p00 + self.p01 - 1.0) > 1e-12 or abs(self.p10 + self.p11 - 1.0) > 1e-12:
            raise ModelError("markov rows must each sum to 1 within 1e-12")

    def stationary_alive(self) -> float:
        """Long-run alive probability p01 / (p01 + p10)."""
        denom = self.p01 + self.p10
        if denom == 0.0:
            raise ModelError("markov chain has no transitions between states")
        return self.p01 / denom

    def to_dict(self) -> dict:
        return {"p00": self.p00, "p01": self.p01, "p10": self.p10, "p11": self.p11}

    @classmethod
    def from_dict(cls, d: dict) -> "MarkovMatrix":
        try:
            m = cls(float(d["p00"]), float(d["p01"]), float(d["p10"]), float(d["p11"]))
        except KeyError as exc:
            raise ConfigError(f"markov matrix missing entry {exc}") from None
        try:
            m.validate()
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
        return m


@dataclass(frozen=True)
class PowerParams:
    alpha_beta: float  # dB per meter of width
    beta0_beta: float  # dB intercept
    b_beta: float      # Laplace scale, dB


@dataclass(frozen=True)
class DelayParams:
    alpha_tau: float  # s per meter of width
    beta0_tau: float  # s intercept


@dataclass(frozen=True)
class AoaParams:
    alpha: float  # deg per meter of width
    beta0: float  # deg intercept
    b: float      # single-sided Laplace scale, deg


@dataclass(frozen=True)
class EoaParams:
    u_phi: float  # deg
    b_phi: float  # deg


@dataclass(frozen=True)
class LargeScaleParams:
    gamma: float            # path-loss exponent
    p_ref_db: float         # value at the reference distance
    d_ref_m: float          # reference distance
    sigma_shadow_db: float  # shadowing standard deviation


@dataclass(frozen=True)
class ModelParams:
    """Full hyperparameter set of the inference model."""

    power: PowerParams
    delay: DelayParams
    aoa_left: AoaParams
    aoa_right: AoaParams
    eoa: EoaParams
    markov_left: MarkovMatrix
    markov_right: MarkovMatrix
    subpath_mean: float
    largescale_los: LargeScaleParams
    largescale_nlos: LargeScaleParams | None = None
    width_range_m: tuple[float, float] = (1.0, 80.0)

    def markov_for(self, side: Side) -> MarkovMatrix:
        return self.markov_left if side is Side.LEFT else self.markov_right

    def aoa_for(self, side: Side) -> AoaParams:
        return self.aoa_left if side is Side.LEFT else self.aoa_right

    def validate(self) -> None:
        if self.power.b_beta <= 0:
            raise ModelError("power.b_beta must be > 0")
        if self.aoa_left.b <= 0 or self.aoa_right.b <= 0:
            raise ModelError("aoa scale b must be > 0 on both sides")
        if self.eoa.b_phi <= 0:
            raise ModelError("eoa.b_phi must be > 0")
        if self.subpath_mean <= 0:
            raise ModelError("subpath_mean must be > 0")
        self.markov_left.validate()
        self.markov_right.validate()
        lo, hi = self.width_range_m
        if not (0 < lo < hi):
            raise ModelError("width_range_m must satisfy 0 < lo < hi")
        for d in (lo, hi):
            if self.delay.alpha_tau * d + self.delay.beta0_tau <= 0:
                raise ModelError(
                    f"delay mean alpha_tau*d + beta0_tau is non-positive at d={d} m"
                )
        for ls, tag in ((self.largescale_los, "los"), (self.largescale_nlos, "nlos")):
            if ls is None:
                continue
            if ls.d_ref_m <= 0:
                raise ModelError(f"largescale_{tag}.d_ref_m must be > 0")
            if ls.sigma_shadow_db < 0:
                raise ModelError(f"largescale_{tag}.sigma_shadow_db must be >= 0")

    def to_dict(self) -> dict:
        out = {
            "power": {
                "alpha_beta": self.power.alpha_beta,
                "beta0_beta": self.power.beta0_beta,
                "b_beta": self.power.b_beta,
            },
            "delay": {"alpha_tau": self.delay.alpha_tau, "beta0_tau": self.delay.beta0_tau},
            "aoa_left": {
                "alpha": self.aoa_left.alpha,
                "beta0": self.aoa_left.beta0,
                "b": self.aoa_left.b,
            },
            "aoa_right": {
                "alpha": self.aoa_right.alpha,
                "beta0": self.aoa_right.beta0,
                "b": self.aoa_right.b,
            },
            "eoa": {"u_phi": self.eoa.u_phi, "b_phi": self.eoa.b_phi},
            "markov": {
                "left": self.markov_left.to_dict(),
                "right": self.markov_right.to_dict(),
            },
            "subpath_mean": self.subpath_mean,
            "largescale_los": _ls_to_dict(self.largescale_los),
            "width_range_m": list(self.width_range_m),
        }
        if self.largescale_nlos is not None:
            out["largescale_nlos"] = _ls_to_dict(self.largescale_nlos)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        try:
            power = PowerParams(
                float(d["power"]["alpha_beta"]),
                float(d["power"]["beta0_beta"]),
                float(d["power"]["b_beta"]),
            )
            delay = DelayParams(float(d["delay"]["alpha_tau"]), float(d["delay"]["beta0_tau"]))
            aoa_l = AoaParams(
                float(d["aoa_left"]["alpha"]),
                float(d["aoa_left"]["beta0"]),
                float(d["aoa_left"]["b"]),
            )
            aoa_r = AoaParams(
                float(d["aoa_right"]["alpha"]),
                float(d["aoa_right"]["beta0"]),
                float(d["aoa_right"]["b"]),
            )
            eoa = EoaParams(float(d["eoa"]["u_phi"]), float(d["eoa"]["b_phi"]))
            mk_l = MarkovMatrix.from_dict(d["markov"]["left"])
            mk_r = MarkovMatrix.from_dict(d["markov"]["right"])
            subpath_mean = float(d["subpath_mean"])
            ls_los = _ls_from_dict(d["largescale_los"])
            ls_nlos = _ls_from_dict(d["largescale_nlos"]) if "largescale_nlos" in d else None
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed parameter file: {exc}") from None
        wr = d.get("width_range_m", (1.0, 80.0))
        params = cls(
            power=power,
            delay=delay,
            aoa_left=aoa_l,
            aoa_right=aoa_r,
            eoa=eoa,
            markov_left=mk_l,
            markov_right=mk_r,
            subpath_mean=subpath_mean,
            largescale_los=ls_los,
            largescale_nlos=ls_nlos,
            width_range_m=(float(wr[0]), float(wr[1])),
        )
        try:
            params.validate()
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
        return params


def _ls_to_dict(ls: LargeScaleParams) -> dict:
    return {
        "gamma": ls.gamma,
        "p_ref_db": ls.p_ref_db,
        "d_ref_m": ls.d_ref_m,
        "sigma_shadow_db": ls.sigma_shadow_db,
    }


def _ls_from_dict(d: dict) -> LargeScaleParams:
    return LargeScaleParams(
        float(d["gamma"]),
        float(d["p_ref_db"]),
        float(d["d_ref_m"]),
        float(d["sigma_shadow_db"]),
    )


def load_params(path) -> ModelParams:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parameter file {path} is not valid JSON: {exc}") from None
    return ModelParams.from_dict(data)


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ConditionedDists:
    """Distribution family with its parameters pinned to one (side, width)."""

    side: Side
    u_beta: float   # Laplace location, dB
    b_beta: float   # Laplace scale, dB
    mu_tau: float   # exponential mean, s
    u_theta: float  # single-sided Laplace mode, deg
    b_theta: float  # single-sided Laplace scale, deg
    u_phi: float    # Laplace location, deg
    b_phi: float    # Laplace scale, deg


@dataclass(frozen=True)
class MpcDraw:
    """One raw draw of the five MPC parameters, relative to the direct path."""

    beta_rel_db: float
    tau_rel_s: float
    aoa_deg: float
    eoa_deg: float
    phase_rad: float


def condition(params: ModelParams, d: float, side: Side) -> ConditionedDists:
    """Evaluate the width-to-parameter linear maps at width d.

    EoA and phase parameters are copied unconditionally; they carry no
    width dependence.
    """
    if d <= 0:
        raise ModelError(f"canyon width must be > 0, got {d}")
    mu_tau = params.delay.alpha_tau * d + params.delay.beta0_tau
    if mu_tau <= 0:
        raise ModelError(
            f"conditioned delay mean {mu_tau!r} <= 0 at d={d} m: "
            "parameter/width mismatch"
        )
    aoa = params.aoa_for(side)
    return ConditionedDists(
        side=side,
        u_beta=params.power.alpha_beta * d + params.power.beta0_beta,
        b_beta=params.power.b_beta,
        mu_tau=mu_tau,
        u_theta=aoa.alpha * d + aoa.beta0,
        b_theta=aoa.b,
        u_phi=params.eoa.u_phi,
        b_phi=params.eoa.b_phi,
    )


def _sample_sided_aoa(dists: ConditionedDists, rng: np.random.Generator) -> float:
    """Single-sided Laplace draw clipped to the side quadrant by rejection."""
    lo, hi = AOA_RANGE[dists.side]
    sign = -1.0 if dists.side is Side.LEFT else 1.0
    for _ in range(_REJECTION_CAP):
        theta = dists.u_theta + sign * rng.exponential(dists.b_theta)
        if lo <= theta <= hi:
            return theta
    raise ModelError(
        f"AoA rejection sampling failed: mode {dists.u_theta} deg incompatible "
        f"with the {dists.side.value} quadrant {AOA_RANGE[dists.side]}"
    )


def sample_mpc(dists: ConditionedDists, rng: np.random.Generator) -> MpcDraw:
    """Draw one MPC parameter tuple from the conditioned family."""
    beta = rng.laplace(dists.u_beta, dists.b_beta)
    tau = rng.exponential(dists.mu_tau)
    while tau <= 0.0:  # exponential support is strictly positive
        tau = rng.exponential(dists.mu_tau)
    theta = _sample_sided_aoa(dists, rng)
    phi = rng.laplace(dists.u_phi, dists.b_phi)
    psi = rng.uniform(-math.pi, math.pi)
    return MpcDraw(beta_rel_db=beta, tau_rel_s=tau, aoa_deg=theta, eoa_deg=phi, phase_rad=psi)


def log_pdf(dists: ConditionedDists, value: float, which: str) -> float:
    """Log density of one parameter family; -inf off support."""
    if which == "power":
        return -math.log(2.0 * dists.b_beta) - abs(value - dists.u_beta) / dists.b_beta
    if which == "delay":
        if value <= 0.0:
            return -math.inf
        return -math.log(dists.mu_tau) - value / dists.mu_tau
    if which == "aoa":
        if dists.side is Side.LEFT:
            if value > dists.u_theta:
                return -math.inf
            return -math.log(dists.b_theta) + (value - dists.u_theta) / dists.b_theta
        if value < dists.u_theta:
            return -math.inf
        return -math.log(dists.b_theta) - (value - dists.u_theta) / dists.b_theta
    if which == "eoa":
        return -math.log(2.0 * dists.b_phi) - abs(value - dists.u_phi) / dists.b_phi
    if which == "phase":
        if -math.pi <= value < math.pi:
            return -math.log(2.0 * math.pi)
        return -math.inf
    raise ValueError(f"unknown parameter family {which!r}")


def cdf(dists: ConditionedDists, value, which: str):
    """Analytic CDF of one parameter family (vectorized over value)."""
    x = np.asarray(value, dtype=float)
    if which == "power":
        return _laplace_cdf(x, dists.u_beta, dists.b_beta)
    if which == "delay":
        return np.where(x <= 0.0, 0.0, 1.0 - np.exp(-np.maximum(x, 0.0) / dists.mu_tau))
    if which == "aoa":
        if dists.side is Side.LEFT:
            return np.where(x >= dists.u_theta, 1.0,
                            np.exp(np.minimum(x - dists.u_theta, 0.0) / dists.b_theta))
        return np.where(x < dists.u_theta, 0.0,
                        1.0 - np.exp(-np.maximum(x - dists.u_theta, 0.0) / dists.b_theta))
    if which == "eoa":
        return _laplace_cdf(x, dists.u_phi, dists.b_phi)
    if which == "phase":
        return np.clip((x + math.pi) / (2.0 * math.pi), 0.0, 1.0)
    raise ValueError(f"unknown parameter family {which!r}")


def _laplace_cdf(x, u, b):
    z = (x - u) / b
    return np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))


def derive_stream(seed: int, index: int) -> np.random.Generator:
    """Independent RNG stream for a concurrent worker, keyed by stream index."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
