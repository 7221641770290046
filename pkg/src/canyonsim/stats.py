"""Second-order statistics and distribution-distance metrics for validation."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError

#: delay resolution of a 30 MHz sounder
DEFAULT_PDP_BIN_S = 1.0 / 30e6


def pdp(delays_s, powers_db, bin_width_s: float = DEFAULT_PDP_BIN_S):
    """Power-delay profile: linear power accumulated per excess-delay bin.

    Delays are referenced to the snapshot minimum. Each occupied bin keeps
    the power-weighted mean of its member delays, so two-tap identities
    hold exactly regardless of bin alignment.

    Returns (excess_delays_s, linear_powers), both 1D arrays.
    """
    if bin_width_s <= 0:
        raise ConfigError("PDP bin width must be > 0")
    delays = np.asarray(delays_s, dtype=float)
    powers = 10.0 ** (np.asarray(powers_db, dtype=float) / 10.0)
    if delays.size == 0:
        raise ConfigError("PDP needs at least one MPC")
    excess = delays - delays.min()
    bins = np.floor(excess / bin_width_s).astype(int)
    order = np.argsort(bins, kind="stable")
    bins, excess, powers = bins[order], excess[order], powers[order]
    uniq, start = np.unique(bins, return_index=True)
    p_out = np.add.reduceat(powers, start)
    d_out = np.add.reduceat(powers * excess, start) / p_out
    return d_out, p_out


def rms_delay_spread(profile) -> float:
    """Square root of the PDP's second central moment, seconds."""
    delays, powers = profile
    delays = np.asarray(delays, dtype=float)
    powers = np.asarray(powers, dtype=float)
    total = powers.sum()
    if delays.size == 0 or total <= 0:
        raise ConfigError("RMS delay spread needs positive total power")
    mean = float(np.dot(powers, delays)) / total
    second = float(np.dot(powers, delays**2)) / total
    return math.sqrt(max(second - mean * mean, 0.0))


def aoa_spread(aoa_deg, powers_db) -> float:
    """Power-weighted circular spread of arrival azimuths (dimensionless).

    sigma = sqrt( sum_k p_k |e^{j theta_k} - mu|^2 / sum_k p_k ) with mu the
    power-weighted mean phasor; zero iff all power arrives from one angle.
    """
    theta = np.radians(np.asarray(aoa_deg, dtype=float))
    powers = 10.0 ** (np.asarray(powers_db, dtype=float) / 10.0)
    total = powers.sum()
    if theta.size == 0 or total <= 0:
        raise ConfigError("AoA spread needs positive total power")
    phasors = np.exp(1j * theta)
    mu = np.dot(powers, phasors) / total
    return math.sqrt(float(np.dot(powers, np.abs(phasors - mu) ** 2)) / total)


def ks_statistic(sample_a, sample_b) -> float:
    """Sup-norm distance between the two empirical CDFs, in [0, 1]."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ConfigError("KS statistic needs two non-empty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def empirical_cdf(values):
    """Sorted values with their empirical CDF levels (i+1)/n."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ConfigError("empirical CDF needs at least one value")
    return v, (np.arange(v.size) + 1.0) / v.size


def cdf_export(values, path) -> None:
    """Write the empirical CDF as a sorted (value, cdf) CSV."""
    v, c = empirical_cdf(values)
    with open(path, "w", newline="") as f:
        f.write("value,cdf\n")
        for vi, ci in zip(v, c):
            f.write(f"{float(vi)!r},{float(ci)!r}\n")


def snapshot_stats(mpcs, bin_width_s: float = DEFAULT_PDP_BIN_S) -> tuple[float, float, int]:
    """(RMS delay spread, AoA spread, MPC count) of one snapshot's MPC list."""
    delays = [m.delay_s for m in mpcs]
    powers = [m.power_db for m in mpcs]
    aoas = [m.aoa_deg for m in mpcs]
    profile = pdp(delays, powers, bin_width_s)
    return rms_delay_spread(profile), aoa_spread(aoas, powers), len(mpcs)
