"""Per-snapshot channel assembly: absolute MPCs, array steering, CIR, spectra.

The receiver array is a planar grid facing backward along the vehicle
(boresight opposite the direction of travel). Azimuth of arrival is
measured in the array frame on [0, 180] degrees with 90 at boresight;
elevation is measured from zenith, 90 at the horizon.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .evolution import Cluster
from .geometry import Side


@dataclass(frozen=True)
class Mpc:
    """One resolvable propagation path in absolute terms."""

    power_db: float
    delay_s: float
    aoa_deg: float
    eoa_deg: float
    phase_rad: float
    cluster_id: int = -1
    is_direct: bool = False
    side: Side | None = None
    width_m: float | None = None


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar receiver array; spacing in wavelengths."""

    rows: int = 4
    cols: int = 8
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("array needs at least one row and one column")
        if self.spacing_wavelengths <= 0:
            raise ConfigError("array element spacing must be > 0")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    def element_positions(self, wavelength_m: float) -> np.ndarray:
        """(N, 3) element positions in the array frame, meters.

        The array plane is spanned by the transverse axis x (columns) and
        the vertical axis z (rows); the normal +y is the boresight.
        """
        s = self.spacing_wavelengths * wavelength_m
        cols = (np.arange(self.cols) - (self.cols - 1) / 2.0) * s
        rows = (np.arange(self.rows) - (self.rows - 1) / 2.0) * s
        xx, zz = np.meshgrid(cols, rows)
        pos = np.zeros((self.n_elements, 3))
        pos[:, 0] = xx.ravel()
        pos[:, 2] = zz.ravel()
        return pos


@dataclass
class Cir:
    """Channel impulse response: complex tap amplitudes per array element."""

    snapshot: int
    taps: list[tuple[float, np.ndarray]] = field(default_factory=list)


def arrival_unit_vector(aoa_deg: float, eoa_deg: float) -> np.ndarray:
    """Unit direction of arrival in the array frame.

    aoa 90 / eoa 90 is boresight (+y); aoa 0 is the +x end of the array;
    eoa is measured from zenith so cos(eoa) is the vertical component.
    """
    th = math.radians(aoa_deg)
    ph = math.radians(eoa_deg)
    return np.array(
        [math.sin(ph) * math.cos(th), math.sin(ph) * math.sin(th), math.cos(ph)]
    )


def steering_vector(
    array: ArrayGeometry, aoa_deg: float, eoa_deg: float, wavelength_m: float
) -> np.ndarray:
    """Complex array response for a plane wave from (aoa, eoa); unit modulus."""
    if wavelength_m <= 0:
        raise ConfigError("wavelength must be > 0")
    u = arrival_unit_vector(aoa_deg, eoa_deg)
    pos = array.element_positions(wavelength_m)
    k = 2.0 * math.pi / wavelength_m
    return np.exp(1j * k * (pos @ u))


def assemble_snapshot(
    clusters: list[Cluster],
    reference: Mpc,
    rng: np.random.Generator,
) -> list[Mpc]:
    """Absolute MPC list: the reference path plus every alive subpath.

    Subpath powers and delays are offsets from the reference (direct or
    virtual-TX) path. Phases are redrawn every snapshot; snapshot-to-
    snapshot phase coherence is not modeled.
    """
    if reference is None:
        raise ConfigError("snapshot assembly requires a link-budget reference path")
    out = [replace(reference, phase_rad=float(rng.uniform(-math.pi, math.pi)))]
    for cluster in clusters:
        for sp in cluster.subpaths:
            if sp.state.state != 1:
                continue
            d = sp.draw
            out.append(
                Mpc(
                    power_db=reference.power_db + d.beta_rel_db,
                    delay_s=reference.delay_s + d.tau_rel_s,
                    aoa_deg=d.aoa_deg,
                    eoa_deg=d.eoa_deg,
                    phase_rad=float(rng.uniform(-math.pi, math.pi)),
                    cluster_id=cluster.cluster_id,
                    side=cluster.side,
                    width_m=cluster.width_m,
                )
            )
    return out


def cir(mpcs: list[Mpc], array: ArrayGeometry, wavelength_m: float, snapshot: int = 0) -> Cir:
    """Superimpose all MPCs into per-element complex taps, one tap per MPC."""
    if not mpcs:
        raise ConfigError("cannot assemble a CIR from an empty MPC list")
    taps = []
    for m in mpcs:
        amp = 10.0 ** (m.power_db / 20.0) * np.exp(1j * m.phase_rad)
        taps.append((m.delay_s, amp * steering_vector(array, m.aoa_deg, m.eoa_deg, wavelength_m)))
    return Cir(snapshot=snapshot, taps=taps)


def frequency_response(response: Cir, n_points: int, bandwidth_hz: float) -> np.ndarray:
    """Baseband transfer function on an n_points grid over the bandwidth.

    Returns an (n_elements, n_points) matrix; the inverse FFT localizes
    each tap to the delay bin nearest its true delay (bin width 1/bw).
    """
    if n_points < 2:
        raise ConfigError("frequency grid needs at least two points")
    if bandwidth_hz <= 0:
        raise ConfigError("bandwidth must be > 0")
    freqs = np.arange(n_points) * (bandwidth_hz / n_points)
    n_elem = response.taps[0][1].shape[0]
    h = np.zeros((n_elem, n_points), dtype=complex)
    for delay, amp in response.taps:
        h += np.outer(amp, np.exp(-2j * math.pi * freqs * delay))
    return h


def polar_export(mpcs: list[Mpc], path) -> None:
    """CSV rows for the two-semicircle polar view: AoA upper, EoA lower."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["semicircle", "angle_deg", "delay_s", "power_db"])
        for m in mpcs:
            w.writerow(["upper", repr(float(m.aoa_deg)), repr(float(m.delay_s)), repr(float(m.power_db))])
            w.writerow(["lower", repr(float(m.eoa_deg)), repr(float(m.delay_s)), repr(float(m.power_db))])
