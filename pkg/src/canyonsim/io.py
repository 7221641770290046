"""File formats: MPC logs, assignment/scatterer/stats CSVs, binary CIR stream.

MPC log (CSV). Required columns:
    snapshot, power_db, delay_s, aoa_deg, eoa_deg, phase_rad
Simulator output adds provenance columns:
    cluster_id, side, width_m, is_direct, region

CIR stream (binary, little-endian). Per snapshot record:
    snapshot u32, n_taps u32, then per tap: delay f64, n_elem complex f64.

Floats are serialized with repr() so identical runs are byte-identical.
"""

from __future__ import annotations

import csv
import io as _io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import Side
from .synthesis import Cir, Mpc

MPC_LOG_REQUIRED = ["snapshot", "power_db", "delay_s", "aoa_deg", "eoa_deg", "phase_rad"]
MPC_LOG_FULL = MPC_LOG_REQUIRED + ["cluster_id", "side", "width_m", "is_direct", "region"]


def fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class LogRow:
    snapshot: int
    power_db: float
    delay_s: float
    aoa_deg: float
    eoa_deg: float
    phase_rad: float
    cluster_id: int | None = None
    side: Side | None = None
    width_m: float | None = None
    is_direct: bool | None = None
    region: str | None = None

    def to_mpc(self) -> Mpc:
        return Mpc(
            power_db=self.power_db,
            delay_s=self.delay_s,
            aoa_deg=self.aoa_deg,
            eoa_deg=self.eoa_deg,
            phase_rad=self.phase_rad,
            cluster_id=self.cluster_id if self.cluster_id is not None else -1,
            is_direct=bool(self.is_direct),
            side=self.side,
            width_m=self.width_m,
        )


def write_mpc_log(rows: list[LogRow]) -> str:
    buf = _io.StringIO()
    buf.write(",".join(MPC_LOG_FULL) + "\n")
    for r in rows:
        buf.write(
            ",".join(
                [
                    str(r.snapshot),
                    fmt(r.power_db),
                    fmt(r.delay_s),
                    fmt(r.aoa_deg),
                    fmt(r.eoa_deg),
                    fmt(r.phase_rad),
                    "" if r.cluster_id is None else str(r.cluster_id),
                    "" if r.side is None else r.side.value,
                    "" if r.width_m is None else fmt(r.width_m),
                    "" if r.is_direct is None else ("1" if r.is_direct else "0"),
                    "" if r.region is None else r.region,
                ]
            )
            + "\n"
        )
    return buf.getvalue()


def read_mpc_log(text: str, tolerant: bool = False) -> tuple[list[LogRow], int]:
    """Parse an MPC log; returns (rows, skipped-row count).

    With tolerant=True malformed rows are skipped and counted instead of
    raising.
    """
    reader = csv.DictReader(_io.StringIO(text))
    if reader.fieldnames is None:
        raise ConfigError("MPC log is empty")
    missing = [c for c in MPC_LOG_REQUIRED if c not in reader.fieldnames]
    if missing:
        raise ConfigError(f"MPC log missing required columns: {missing}")
    rows: list[LogRow] = []
    skipped = 0
    for lineno, rec in enumerate(reader, start=2):
        try:
            side = rec.get("side") or None
            width = rec.get("width_m") or None
            cid = rec.get("cluster_id") or None
            is_dir = rec.get("is_direct") or None
            rows.append(
                LogRow(
                    snapshot=int(rec["snapshot"]),
                    power_db=float(rec["power_db"]),
                    delay_s=float(rec["delay_s"]),
                    aoa_deg=float(rec["aoa_deg"]),
                    eoa_deg=float(rec["eoa_deg"]),
                    phase_rad=float(rec["phase_rad"]),
                    cluster_id=int(cid) if cid is not None else None,
                    side=Side.parse(side) if side is not None else None,
                    width_m=float(width) if width is not None else None,
                    is_direct=bool(int(is_dir)) if is_dir is not None else None,
                    region=rec.get("region") or None,
                )
            )
        except (KeyError, TypeError, ValueError):
            if not tolerant:
                raise ConfigError(f"malformed MPC log row at line {lineno}") from None
            skipped += 1
    return rows, skipped


def read_mpc_log_file(path, tolerant: bool = False) -> tuple[list[LogRow], int]:
    with open(path) as f:
        return read_mpc_log(f.read(), tolerant=tolerant)


def rows_by_snapshot(rows: list[LogRow]) -> dict[int, list[LogRow]]:
    out: dict[int, list[LogRow]] = {}
    for r in rows:
        out.setdefault(r.snapshot, []).append(r)
    return dict(sorted(out.items()))


def write_stats_csv(stats_rows: list[tuple]) -> str:
    buf = _io.StringIO()
    buf.write("snapshot,rms_ds_s,aoa_spread,n_mpcs,region\n")
    for snap, rms, spread, n, region in stats_rows:
        buf.write(f"{snap},{fmt(rms)},{fmt(spread)},{n},{region}\n")
    return buf.getvalue()


def write_lifecycle_csv(rows: list[tuple]) -> str:
    buf = _io.StringIO()
    buf.write("snapshot,cluster_id,path_id,state,side,width_m\n")
    for snap, cid, pid, state, side, width in rows:
        buf.write(f"{snap},{cid},{pid},{state},{side.value},{fmt(width)}\n")
    return buf.getvalue()


def write_assignments_csv(rows: list[dict]) -> str:
    cols = MPC_LOG_REQUIRED + ["side", "width_m", "residual_s"]
    buf = _io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(
            ",".join(
                [
                    str(r["snapshot"]),
                    fmt(r["power_db"]),
                    fmt(r["delay_s"]),
                    fmt(r["aoa_deg"]),
                    fmt(r["eoa_deg"]),
                    fmt(r["phase_rad"]),
                    r["side"].value if r.get("side") is not None else "",
                    fmt(r["width_m"]) if r.get("width_m") is not None else "",
                    fmt(r["residual_s"]) if r.get("residual_s") is not None else "",
                ]
            )
            + "\n"
        )
    return buf.getvalue()


def write_scatterers_csv(rows: list[tuple]) -> str:
    buf = _io.StringIO()
    buf.write("l_m,d_m,side\n")
    for l_m, d_m, side in rows:
        buf.write(f"{fmt(l_m)},{fmt(d_m)},{side.value}\n")
    return buf.getvalue()


def pack_cir(response: Cir) -> bytes:
    """One binary CIR record: header plus per-tap delay and complex gains."""
    parts = [struct.pack("<II", response.snapshot, len(response.taps))]
    for delay, amps in response.taps:
        parts.append(struct.pack("<d", float(delay)))
        parts.append(np.ascontiguousarray(amps, dtype="<c16").tobytes())
    return b"".join(parts)


def unpack_cir_stream(blob: bytes, n_elements: int) -> list[Cir]:
    out: list[Cir] = []
    off = 0
    tap_bytes = 8 + 16 * n_elements
    while off < len(blob):
        if off + 8 > len(blob):
            raise ConfigError("truncated CIR stream header")
        snap, n_taps = struct.unpack_from("<II", blob, off)
        off += 8
        taps = []
        for _ in range(n_taps):
            if off + tap_bytes > len(blob):
                raise ConfigError("truncated CIR stream record")
            (delay,) = struct.unpack_from("<d", blob, off)
            amps = np.frombuffer(blob, dtype="<c16", count=n_elements, offset=off + 8).copy()
            taps.append((delay, amps))
            off += tap_bytes
        out.append(Cir(snapshot=snap, taps=taps))
    return out
