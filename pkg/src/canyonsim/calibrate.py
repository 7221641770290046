"""Parameter estimation from MPC logs: the inverse of the simulator.

Pipeline: width binning (from log provenance labels when available,
otherwise through the geometric width assignment), per-bin distribution
fits, linear regressions of bin locations against width, greedy
nearest-neighbor path tracking feeding the birth-death transition MLE,
and log-distance path-loss regression per visibility state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .distributions import (
    AoaParams,
    DelayParams,
    EoaParams,
    LargeScaleParams,
    MarkovMatrix,
    ModelParams,
    PowerParams,
)
from .errors import ConfigError, NumericalError
from .geometry import SPEED_OF_LIGHT, Side, distance
from .identify import DEFAULT_DELTA_S, SnapshotObservation, assign_clusters
from .io import LogRow, rows_by_snapshot
from .scenario import Region, ScenarioConfig, classify_visibility
from .synthesis import Mpc

#: association gates: two delay bins of a 30 MHz sounder, ten degrees
DEFAULT_GATE_DELAY_S = 2.0 / 30e6
DEFAULT_GATE_AOA_DEG = 10.0


@dataclass(frozen=True)
class Gates:
    delay_s: float = DEFAULT_GATE_DELAY_S
    aoa_deg: float = DEFAULT_GATE_AOA_DEG
    max_gap: int = 25
    #: zero-gap continuations must pass this fraction of the gates: a path
    #: that survived keeps its parameters, while a slot that died at t can
    #: rebirth (with fresh parameters) at t+1 at the earliest
    fine_fraction: float = 0.05


@dataclass(frozen=True)
class Detection:
    snapshot: int
    tau_rel_s: float
    aoa_deg: float
    beta_rel_db: float
    eoa_deg: float
    phase_rad: float


@dataclass
class PathTrack:
    """One associated path: detections per snapshot, gaps are dead snapshots."""

    cluster: tuple[Side, float]
    detections: dict[int, Detection] = field(default_factory=dict)

    @property
    def first(self) -> int:
        return min(self.detections)

    @property
    def last(self) -> int:
        return max(self.detections)

    def states(self) -> list[int]:
        return [1 if t in self.detections else 0 for t in range(self.first, self.last + 1)]


def track_paths(
    detections_by_cluster: dict[tuple[Side, float], dict[int, list[Detection]]],
    gates: Gates = Gates(),
) -> list[PathTrack]:
    """Greedy nearest-neighbor association in (relative delay, AoA).

    Surviving paths keep their draw, so they sit at constant (tau_rel,
    theta) and associate trivially; rebirths redraw and normally start new
    tracks. A track left unmatched longer than max_gap closes.
    """
    tracks: list[PathTrack] = []
    for key, per_snapshot in detections_by_cluster.items():
        open_tracks: list[PathTrack] = []
        for t in sorted(per_snapshot):
            dets = per_snapshot[t]
            open_tracks = [tr for tr in open_tracks if t - tr.last <= gates.max_gap]
            pairs = []
            for ti, tr in enumerate(open_tracks):
                ref = tr.detections[tr.last]
                limit = gates.fine_fraction if t == tr.last + 1 else 1.0
                for di, det in enumerate(dets):
                    dd = abs(det.tau_rel_s - ref.tau_rel_s) / gates.delay_s
                    da = abs(det.aoa_deg - ref.aoa_deg) / gates.aoa_deg
                    if dd <= limit and da <= limit:
                        pairs.append((max(dd, da), ti, di))
            pairs.sort()
            used_tracks: set[int] = set()
            used_dets: set[int] = set()
            for _, ti, di in pairs:
                if ti in used_tracks or di in used_dets:
                    continue
                open_tracks[ti].detections[dets[di].snapshot] = dets[di]
                used_tracks.add(ti)
                used_dets.add(di)
            for di, det in enumerate(dets):
                if di not in used_dets:
                    nt = PathTrack(cluster=key, detections={det.snapshot: det})
                    open_tracks.append(nt)
                    tracks.append(nt)
    return tracks


@dataclass(frozen=True)
class BinFit:
    location: float
    scale: float
    n: int
    degenerate: bool


def fit_bin(samples, family: str) -> BinFit:
    """Location/scale fit of one parameter family on one width bin.

    Laplace fits by median and mean absolute deviation (the MLE pair);
    the exponential by its sample mean; the single-sided Laplace takes
    the observed extreme as the mode and the mean one-sided deviation
    as the scale.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise NumericalError("insufficient samples for a bin fit")
    if family == "laplace":
        loc = float(np.median(x))
        scale = float(np.mean(np.abs(x - loc)))
    elif family == "exponential":
        loc = float(np.mean(x))
        scale = loc
    elif family == "sided_laplace_left":
        loc = float(np.max(x))
        scale = float(np.mean(loc - x))
    elif family == "sided_laplace_right":
        loc = float(np.min(x))
        scale = float(np.mean(x - loc))
    else:
        raise ValueError(f"unknown family {family!r}")
    return BinFit(location=loc, scale=scale, n=int(x.size), degenerate=scale == 0.0)


def fit_linear_map(points) -> tuple[float, float, float]:
    """Ordinary least squares of bin locations on width: (alpha, beta0, rms)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2 or np.unique(pts[:, 0]).size < 2:
        raise NumericalError("linear map fit needs at least two distinct widths")
    alpha, beta0 = np.polyfit(pts[:, 0], pts[:, 1], 1)
    resid = pts[:, 1] - (alpha * pts[:, 0] + beta0)
    return float(alpha), float(beta0), float(np.sqrt(np.mean(resid**2)))


def transition_mle(sequences) -> MarkovMatrix:
    """Eq.-style transition MLE over 0/1 state sequences: p_ab = n_ab / sum_m n_am.

    Rows with no observed transitions default to staying in place.
    """
    counts = np.zeros((2, 2), dtype=float)
    for seq in sequences:
        s = np.asarray(seq, dtype=int)
        for a, b in zip(s[:-1], s[1:]):
            counts[a, b] += 1
    if counts.sum() == 0:
        raise NumericalError("no state transitions observed")
    rows = []
    for a in (0, 1):
        total = counts[a].sum()
        if total == 0:
            rows.append((1.0, 0.0) if a == 0 else (0.0, 1.0))
        else:
            rows.append((float(counts[a, 0] / total), float(counts[a, 1] / total)))
    return MarkovMatrix(p00=rows[0][0], p01=rows[0][1], p10=rows[1][0], p11=rows[1][1])


def fit_markov(
    tracks: list[PathTrack],
) -> tuple[dict[Side, MarkovMatrix], dict[tuple[Side, float], int], list[str]]:
    """Per-side transition matrices from associated tracks.

    The alive-side counts come straight from track continuity. The dead
    population is not directly observable, so each cluster's slot count is
    taken as its maximum simultaneous alive count and the dead pool at
    time t is (slots - alive(t)); births are drawn from that pool.
    """
    warnings: list[str] = []
    by_cluster: dict[tuple[Side, float], list[PathTrack]] = {}
    for tr in tracks:
        by_cluster.setdefault(tr.cluster, []).append(tr)

    counts = {Side.LEFT: np.zeros((2, 2)), Side.RIGHT: np.zeros((2, 2))}
    slots: dict[tuple[Side, float], int] = {}
    for key, trs in by_cluster.items():
        t0 = min(tr.first for tr in trs)
        t1 = max(tr.last for tr in trs)
        span = t1 - t0 + 1
        alive = np.zeros(span, dtype=int)
        for tr in trs:
            for t in tr.detections:
                alive[t - t0] += 1
        n_slots = int(alive.max())
        slots[key] = n_slots
        if span < 2:
            continue
        c = counts[key[0]]
        for t in range(t0, t1):
            survivors = sum(1 for tr in trs if t in tr.detections and t + 1 in tr.detections)
            deaths = sum(1 for tr in trs if t in tr.detections and t + 1 not in tr.detections)
            births = sum(1 for tr in trs if t + 1 in tr.detections and t not in tr.detections)
            dead_pool = n_slots - alive[t - t0]
            c[1, 1] += survivors
            c[1, 0] += deaths
            c[0, 1] += births
            c[0, 0] += max(dead_pool - births, 0)

    if sum(c.sum() for c in counts.values()) == 0:
        raise NumericalError("no transitions in any track")
    matrices: dict[Side, MarkovMatrix] = {}
    for side, c in counts.items():
        rows = []
        for a in (0, 1):
            total = c[a].sum()
            if total == 0:
                rows.append((1.0, 0.0) if a == 0 else (0.0, 1.0))
                warnings.append(f"markov {side.value}: state-{a} row unobserved, defaulted")
            else:
                rows.append((float(c[a, 0] / total), float(c[a, 1] / total)))
        matrices[side] = MarkovMatrix(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    return matrices, slots, warnings


@dataclass(frozen=True)
class PathLossFit:
    gamma: float
    p_ref_db: float
    sigma_db: float
    flags: tuple[str, ...] = ()


def fit_path_loss(samples, d_ref_m: float) -> PathLossFit:
    """Least squares of the budget value on -10*log10(d/d_ref)."""
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or len(pts) < 2 or np.unique(pts[:, 0]).size < 2:
        raise NumericalError("path-loss fit needs at least two distinct distances")
    if np.any(pts[:, 0] <= 0):
        raise NumericalError("path-loss distances must be > 0")
    flags = []
    span = pts[:, 0].max() / pts[:, 0].min()
    if len(pts) < 3 or span < 2.0:
        flags.append("under-determined")
    x = -10.0 * np.log10(pts[:, 0] / d_ref_m)
    gamma, p_ref = np.polyfit(x, pts[:, 1], 1)
    resid = pts[:, 1] - (gamma * x + p_ref)
    sigma = float(np.sqrt(np.mean(resid**2)))
    return PathLossFit(gamma=float(gamma), p_ref_db=float(p_ref), sigma_db=sigma,
                       flags=tuple(flags))


@dataclass
class CalibrationOptions:
    binning: str = "auto"  # auto | labels | identify
    min_bin_samples: int = 50
    delta_s: float = DEFAULT_DELTA_S
    width_grid: np.ndarray | None = None
    gates: Gates = field(default_factory=Gates)
    d_ref_m: float = 1.0
    phase_bins: int = 16
    phase_p_threshold: float = 0.01


@dataclass
class CalibrationResult:
    params: ModelParams
    report_rows: list[dict]
    warnings: list[str]


def make_report_csv(report_rows: list[dict]) -> str:
    cols = [
        "side", "width_m", "n",
        "u_beta_db", "b_beta_db", "mu_tau_s", "u_theta_deg", "b_theta_deg",
        "resid_beta_db", "resid_tau_s", "resid_theta_deg",
    ]
    lines = [",".join(cols)]
    for r in report_rows:
        lines.append(
            ",".join(
                str(r[c]) if not isinstance(r[c], float) else repr(float(r[c])) for c in cols
            )
        )
    return "\n".join(lines) + "\n"


def _relative_rows(snapshots: dict[int, list[LogRow]]):
    """Yield (snapshot, direct_row, non-direct rows) triples."""
    for snap, rows in snapshots.items():
        if not rows:
            continue
        direct = min(rows, key=lambda r: r.delay_s)
        others = [r for r in rows if r is not direct]
        yield snap, direct, others


def _identify_labels(
    snapshots, scenario: ScenarioConfig, options: CalibrationOptions, regions: dict[int, str]
):
    """Width labels via the geometric assignment, with the virtual-TX shift in NLOS."""
    timeline = classify_visibility(scenario)
    bp = timeline.breakpoint
    tx_pos = scenario.tx.waypoints[0]
    l1 = distance(tx_pos, bp) if bp is not None else 0.0
    labels: dict[tuple[int, int], tuple[Side, float]] = {}
    for snap, direct, others in _relative_rows(snapshots):
        if not others:
            continue
        ref_delay = direct.delay_s
        if regions.get(snap) == Region.NLOS.value and bp is not None:
            ref_delay = max(direct.delay_s - l1 / SPEED_OF_LIGHT, 1e-12)
        ref = Mpc(
            power_db=direct.power_db,
            delay_s=ref_delay,
            aoa_deg=direct.aoa_deg,
            eoa_deg=direct.eoa_deg,
            phase_rad=direct.phase_rad,
            is_direct=True,
        )
        mpcs = [ref] + [
            Mpc(
                power_db=r.power_db,
                delay_s=max(r.delay_s - direct.delay_s, 0.0) + ref_delay,
                aoa_deg=r.aoa_deg,
                eoa_deg=r.eoa_deg,
                phase_rad=r.phase_rad,
            )
            for r in others
        ]
        obs = SnapshotObservation(mpcs=mpcs, direct=ref)
        for a in assign_clusters(obs, options.width_grid, options.delta_s):
            labels[(snap, a.mpc_index - 1)] = (a.side, a.width_m)
    return labels


def calibrate_all(
    rows: list[LogRow],
    scenario: ScenarioConfig,
    options: CalibrationOptions | None = None,
) -> CalibrationResult:
    """Estimate a complete ModelParams from an MPC log.

    Binning uses the log's provenance (side, width) labels when present:
    parameters sampled from width-conditioned distributions are not
    single-bounce consistent, so re-deriving their widths through the
    geometric constraint would bias every fit. Unlabeled logs (measured
    or geometric) go through the constraint-based assignment.
    """
    options = options or CalibrationOptions()
    if not rows:
        raise ConfigError("empty MPC log: nothing to calibrate")
    snapshots = rows_by_snapshot(rows)
    warnings: list[str] = []

    regions = {}
    for snap, rws in snapshots.items():
        reg = next((r.region for r in rws if r.region), None)
        if reg is not None:
            regions[snap] = reg
    if len(regions) < len(snapshots):
        timeline = classify_visibility(scenario)
        for snap in snapshots:
            regions.setdefault(
                snap,
                timeline.regions[min(snap, len(timeline.regions) - 1)].value,
            )

    labeled = all(
        (r.side is not None and r.width_m is not None)
        for _, direct, others in _relative_rows(snapshots)
        for r in others
    )
    use_labels = options.binning == "labels" or (options.binning == "auto" and labeled)
    if options.binning == "labels" and not labeled:
        raise ConfigError("binning='labels' requested but the log has unlabeled rows")
    ident_labels = None
    if not use_labels:
        ident_labels = _identify_labels(snapshots, scenario, options, regions)
        warnings.append("binning: geometric width assignment (log carried no labels)")
    else:
        warnings.append("binning: provenance width labels from the log")

    # ---- collect per-bin samples and per-cluster detections ----
    bins: dict[tuple[Side, float], dict[str, list]] = {}
    detections: dict[tuple[Side, float], dict[int, list[Detection]]] = {}
    n_unassigned = 0
    for snap, direct, others in _relative_rows(snapshots):
        for j, r in enumerate(others):
            if use_labels:
                key = (r.side, r.width_m)
            else:
                key = ident_labels.get((snap, j))
                if key is None:
                    n_unassigned += 1
                    continue
            b = bins.setdefault(
                key, {"beta": [], "tau": [], "theta": [], "phi": [], "psi": []}
            )
            det = Detection(
                snapshot=snap,
                tau_rel_s=r.delay_s - direct.delay_s,
                aoa_deg=r.aoa_deg,
                beta_rel_db=r.power_db - direct.power_db,
                eoa_deg=r.eoa_deg,
                phase_rad=r.phase_rad,
            )
            b["beta"].append(det.beta_rel_db)
            b["tau"].append(det.tau_rel_s)
            b["theta"].append(det.aoa_deg)
            b["phi"].append(det.eoa_deg)
            b["psi"].append(det.phase_rad)
            detections.setdefault(key, {}).setdefault(snap, []).append(det)
    if n_unassigned:
        warnings.append(f"{n_unassigned} MPCs left unassigned by the width constraint")
    if not bins:
        raise ConfigError("no assignable non-direct MPCs in the log")

    kept = {k: v for k, v in bins.items() if len(v["beta"]) >= options.min_bin_samples}
    for k in sorted(set(bins) - set(kept), key=lambda kk: (kk[0].value, kk[1])):
        warnings.append(
            f"bin ({k[0].value}, {k[1]} m) below min samples "
            f"({len(bins[k]['beta'])} < {options.min_bin_samples}), excluded"
        )
    if not kept:
        raise ConfigError("every width bin fell below the minimum sample count")

    # ---- per-bin fits ----
    bin_fits: dict[tuple[Side, float], dict[str, BinFit]] = {}
    for key, data in kept.items():
        side = key[0]
        theta_family = "sided_laplace_left" if side is Side.LEFT else "sided_laplace_right"
        bin_fits[key] = {
            "beta": fit_bin(data["beta"], "laplace"),
            "tau": fit_bin(data["tau"], "exponential"),
            "theta": fit_bin(data["theta"], theta_family),
        }

    # ---- linear maps over width ----
    def line_or_error(points, what):
        try:
            return fit_linear_map(points)
        except NumericalError as exc:
            raise NumericalError(f"{what}: {exc}") from None

    beta_pts = [(k[1], bin_fits[k]["beta"].location) for k in kept]
    tau_pts = [(k[1], bin_fits[k]["tau"].location) for k in kept]
    alpha_beta, beta0_beta, _ = line_or_error(beta_pts, "power linear map")
    alpha_tau, beta0_tau, _ = line_or_error(tau_pts, "delay linear map")

    total_n = sum(bin_fits[k]["beta"].n for k in kept)
    b_beta = (
        sum(bin_fits[k]["beta"].scale * bin_fits[k]["beta"].n for k in kept) / total_n
    )

    aoa_params: dict[Side, AoaParams] = {}
    for side in Side:
        side_keys = [k for k in kept if k[0] is side]
        if len({k[1] for k in side_keys}) >= 2:
            pts = [(k[1], bin_fits[k]["theta"].location) for k in side_keys]
            a, b0, _ = line_or_error(pts, f"aoa {side.value} linear map")
            n_side = sum(bin_fits[k]["theta"].n for k in side_keys)
            b_th = (
                sum(bin_fits[k]["theta"].scale * bin_fits[k]["theta"].n for k in side_keys)
                / n_side
            )
            aoa_params[side] = AoaParams(alpha=a, beta0=b0, b=b_th)
    if not aoa_params:
        raise NumericalError("no side has two width bins: AoA maps unrecoverable")
    for side in Side:
        if side not in aoa_params:
            other = aoa_params[Side.RIGHT if side is Side.LEFT else Side.LEFT]
            aoa_params[side] = AoaParams(alpha=-other.alpha, beta0=180.0 - other.beta0, b=other.b)
            warnings.append(f"aoa {side.value}: no bins, mirrored from the other side")

    phi_all = np.concatenate([np.asarray(kept[k]["phi"]) for k in kept])
    u_phi = float(np.median(phi_all))
    b_phi = float(np.mean(np.abs(phi_all - u_phi)))

    psi_all = np.concatenate([np.asarray(kept[k]["psi"]) for k in kept])
    counts, _ = np.histogram(psi_all, bins=options.phase_bins, range=(-math.pi, math.pi))
    chi_p = float(sstats.chisquare(counts).pvalue)
    if chi_p < options.phase_p_threshold:
        warnings.append(f"phase uniformity rejected (chi-square p={chi_p:.2e})")

    # ---- lifecycle ----
    tracks = track_paths(detections, options.gates)
    matrices, slots, mk_warn = fit_markov(tracks)
    warnings.extend(mk_warn)
    subpath_mean = float(np.mean(list(slots.values())))

    # ---- large-scale ----
    tx_pos = scenario.tx.waypoints[0]
    bp = None
    if any(reg == Region.NLOS.value for reg in regions.values()):
        bp = classify_visibility(scenario).breakpoint
    los_samples, nlos_samples = [], []
    for snap, direct, _ in _relative_rows(snapshots):
        pl_obs = direct.power_db - scenario.rf.tx_power_dbm
        if regions.get(snap) == Region.NLOS.value:
            l1 = distance(tx_pos, bp)
            l2 = SPEED_OF_LIGHT * direct.delay_s - l1
            if l2 > 0:
                nlos_samples.append((l2, pl_obs, l1))
        else:
            los_samples.append((SPEED_OF_LIGHT * direct.delay_s, pl_obs))
    if not los_samples:
        raise ConfigError("log has no LOS snapshots: LOS large-scale model unrecoverable")
    los_fit = fit_path_loss(los_samples, options.d_ref_m)
    warnings.extend(f"los path loss: {f}" for f in los_fit.flags)
    ls_los = LargeScaleParams(
        gamma=los_fit.gamma,
        p_ref_db=los_fit.p_ref_db,
        d_ref_m=options.d_ref_m,
        sigma_shadow_db=los_fit.sigma_db,
    )
    ls_nlos = None
    if nlos_samples:
        stage2 = [
            (
                l2,
                pl - (los_fit.p_ref_db - 10.0 * los_fit.gamma * math.log10(l1 / options.d_ref_m)),
            )
            for l2, pl, l1 in nlos_samples
        ]
        nlos_fit = fit_path_loss(stage2, options.d_ref_m)
        warnings.extend(f"nlos path loss: {f}" for f in nlos_fit.flags)
        ls_nlos = LargeScaleParams(
            gamma=nlos_fit.gamma,
            p_ref_db=nlos_fit.p_ref_db,
            d_ref_m=options.d_ref_m,
            sigma_shadow_db=nlos_fit.sigma_db,
        )
    else:
        warnings.append("LOS-only log: NLOS large-scale fields absent")

    widths_used = sorted({k[1] for k in kept})
    params = ModelParams(
        power=PowerParams(alpha_beta=alpha_beta, beta0_beta=beta0_beta, b_beta=b_beta),
        delay=DelayParams(alpha_tau=alpha_tau, beta0_tau=beta0_tau),
        aoa_left=aoa_params[Side.LEFT],
        aoa_right=aoa_params[Side.RIGHT],
        eoa=EoaParams(u_phi=u_phi, b_phi=b_phi),
        markov_left=matrices[Side.LEFT],
        markov_right=matrices[Side.RIGHT],
        subpath_mean=subpath_mean,
        largescale_los=ls_los,
        largescale_nlos=ls_nlos,
        width_range_m=(widths_used[0], widths_used[-1]),
    )
    params.validate()

    report_rows = []
    for key in sorted(kept, key=lambda k: (k[0].value, k[1])):
        bf = bin_fits[key]
        side, width = key
        report_rows.append(
            {
                "side": side.value,
                "width_m": width,
                "n": bf["beta"].n,
                "u_beta_db": bf["beta"].location,
                "b_beta_db": bf["beta"].scale,
                "mu_tau_s": bf["tau"].location,
                "u_theta_deg": bf["theta"].location,
                "b_theta_deg": bf["theta"].scale,
                "resid_beta_db": bf["beta"].location - (alpha_beta * width + beta0_beta),
                "resid_tau_s": bf["tau"].location - (alpha_tau * width + beta0_tau),
                "resid_theta_deg": bf["theta"].location
                - (aoa_params[side].alpha * width + aoa_params[side].beta0),
            }
        )
    return CalibrationResult(params=params, report_rows=report_rows, warnings=warnings)
