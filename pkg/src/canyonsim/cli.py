"""Command-line client for the canyonsim service.

Each subcommand builds a JSON request, sends it to the service (an
in-process application by default, or a remote base URL via --server),
and writes the returned artifacts under --out.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 I/O failure.

File schemas
------------
Scenario JSON: routes[] {id, waypoints[[x,y]...], width_m}, canyons[]
{route, side, width_m, extent_m:[a,b]}, tx {position|[waypoints,
speed_mps]}, rx {waypoints, speed_mps}, snapshot_rate_hz, duration_s |
n_snapshots, seed, rf {fc_hz, bw_hz, tx_power_dbm}, array {rows, cols,
spacing_wavelengths}, margin_m.

Parameter JSON mirrors ModelParams: power {alpha_beta, beta0_beta,
b_beta}, delay {alpha_tau, beta0_tau}, aoa_left/aoa_right {alpha, beta0,
b}, eoa {u_phi, b_phi}, markov {left/right {p00,p01,p10,p11}},
subpath_mean, largescale_los/largescale_nlos {gamma, p_ref_db, d_ref_m,
sigma_shadow_db}.

MPC log CSV: snapshot, power_db, delay_s, aoa_deg, eoa_deg, phase_rad
(plus provenance columns when written by `simulate`). Assignment CSV adds
side, width_m, residual_s. Stats CSV: snapshot, rms_ds_s, aoa_spread,
n_mpcs, region. CIR stream: per snapshot `snapshot:u32, n_taps:u32`, then
per tap `delay:f64` and one little-endian complex f64 per array element.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class ServiceClient:
    """POSTs to a remote server or to the in-process application."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        if self.server:
            try:
                with httpx.Client(base_url=self.server, timeout=600.0) as client:
                    resp = client.post(path, json=payload)
            except httpx.HTTPError as exc:
                raise CliFailure(EXIT_IO, f"cannot reach service {self.server}: {exc}")
        else:
            resp = asyncio.run(self._post_local(path, payload))
        return self._unwrap(resp)

    async def _post_local(self, path: str, payload: dict):
        from .service import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://canyonsim.local", timeout=600.0
        ) as client:
            return await client.post(path, json=payload)

    @staticmethod
    def _unwrap(resp) -> dict:
        if resp.status_code == 200:
            return resp.json()
        try:
            body = resp.json()
        except ValueError:
            body = {}
        detail = body.get("detail", resp.text)
        kind = body.get("error_kind")
        if kind == "config":
            raise CliFailure(EXIT_CONFIG, f"config error: {detail}")
        if kind == "numerical":
            raise CliFailure(EXIT_NUMERICAL, f"numerical failure: {detail}")
        if resp.status_code < 500:
            raise CliFailure(EXIT_CONFIG, f"request rejected: {detail}")
        raise CliFailure(EXIT_NUMERICAL, f"service failure: {detail}")


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"cannot read {what} {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliFailure(EXIT_CONFIG, f"{what} {path} is not valid JSON: {exc}")


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"cannot read {what} {path}: {exc}")


def _write(path: Path, data) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data)
    except OSError as exc:
        raise CliFailure(EXIT_IO, f"cannot write {path}: {exc}")


def _out_dir(args) -> Path:
    return Path(args.out)


def cmd_simulate(args) -> int:
    scenario = _read_json(args.scenario, "scenario file")
    params = _read_json(args.params, "parameter file")
    payload = {
        "scenario": scenario,
        "params": params,
        "seed": args.seed,
        "no_shadow": args.no_shadow,
        "margin_m": args.margin_m,
        "include_cir": not args.no_cir,
        "include_lifecycle": args.lifecycle,
    }
    resp = ServiceClient(args.server).post("/simulate", payload)
    out = _out_dir(args)
    _write(out / "mpc_log.csv", resp["mpc_log_csv"])
    _write(out / "stats.csv", resp["stats_csv"])
    if resp.get("cir_stream_b64"):
        _write(out / "cir.bin", base64.b64decode(resp["cir_stream_b64"]))
    if resp.get("lifecycle_csv"):
        _write(out / "lifecycle.csv", resp["lifecycle_csv"])
    print(f"simulated {resp['n_snapshots']} snapshots -> {out}")
    print(f"regions: {resp['regions']}")
    if resp.get("breakpoint"):
        bx, by = resp["breakpoint"]
        print(f"breakpoint: ({bx:.2f}, {by:.2f}) m")
    return EXIT_OK


def cmd_identify(args) -> int:
    payload = {
        "mpc_log_csv": _read_text(args.log, "MPC log"),
        "scenario": _read_json(args.scenario, "scenario file"),
        "delta_s": args.delta_s,
        "width_grid": _parse_grid(args.width_grid) if args.width_grid else None,
    }
    resp = ServiceClient(args.server).post("/identify", payload)
    out = _out_dir(args)
    _write(out / "assignments.csv", resp["assignments_csv"])
    _write(out / "scatterers.csv", resp["scatterers_csv"])
    print(
        f"identified {resp['n_assigned']} / {resp['n_rows']} rows "
        f"({resp['n_skipped']} malformed rows skipped) -> {out}"
    )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    payload = {
        "mpc_log_csv": _read_text(args.log, "MPC log"),
        "scenario": _read_json(args.scenario, "scenario file"),
        "binning": args.binning,
        "min_bin_samples": args.min_bin,
        "delta_s": args.delta_s,
    }
    resp = ServiceClient(args.server).post("/calibrate", payload)
    out = _out_dir(args)
    _write(out / "params.json", json.dumps(resp["params"], indent=2) + "\n")
    _write(out / "fit_report.csv", resp["report_csv"])
    for w in resp["warnings"]:
        print(f"warning: {w}")
    print(f"calibrated parameters -> {out / 'params.json'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    payload = {
        "params": _read_json(args.params, "parameter file"),
        "scenario": _read_json(args.scenario, "scenario file"),
        "reference_log_csv": _read_text(args.reference, "reference MPC log"),
        "seed": args.seed,
    }
    resp = ServiceClient(args.server).post("/validate", payload)
    out = _out_dir(args)
    _write(
        out / "validation.json",
        json.dumps(
            {
                "dks_rms_ds": resp["dks_rms_ds"],
                "dks_aoa_spread": resp["dks_aoa_spread"],
                "n_snapshots": resp["n_snapshots"],
            },
            indent=2,
        )
        + "\n",
    )
    _write(out / "rms_ds_cdf.csv", resp["rms_ds_cdf_csv"])
    _write(out / "aoa_spread_cdf.csv", resp["aoa_spread_cdf_csv"])
    print(f"{'metric':<16}{'D_ks':>10}")
    print(f"{'rms_ds':<16}{resp['dks_rms_ds']:>10.4f}")
    print(f"{'aoa_spread':<16}{resp['dks_aoa_spread']:>10.4f}")
    return EXIT_OK


def cmd_stats(args) -> int:
    log_text = _read_text(args.log, "MPC log")
    payload = {"mpc_log_csv": log_text, "pdp_bin_s": args.bin_width_s}
    resp = ServiceClient(args.server).post("/stats", payload)
    out = _out_dir(args)
    _write(out / "stats.csv", resp["stats_csv"])
    if args.polar_snapshot is not None:
        from .io import read_mpc_log
        from .synthesis import polar_export

        rows, _ = read_mpc_log(log_text, tolerant=True)
        snap_rows = [r for r in rows if r.snapshot == args.polar_snapshot]
        if not snap_rows:
            raise CliFailure(EXIT_CONFIG, f"snapshot {args.polar_snapshot} not in the log")
        out.mkdir(parents=True, exist_ok=True)
        polar_export([r.to_mpc() for r in snap_rows], out / "polar.csv")
    print(f"stats for {resp['n_snapshots']} snapshots -> {out / 'stats.csv'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _parse_grid(spec: str) -> list[float]:
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise CliFailure(EXIT_CONFIG, f"width grid must be lo:hi:step, got {spec!r}")
    if step <= 0 or hi < lo:
        raise CliFailure(EXIT_CONFIG, f"width grid must be ascending, got {spec!r}")
    grid, v = [], lo
    while v <= hi + 1e-9:
        grid.append(round(v, 9))
        v += step
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canyonsim",
        description="Site-specific urban-canyon channel simulator and calibration toolchain.",
        epilog=__doc__.split("File schemas")[1] if __doc__ else None,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--server", default=None, help="service base URL (default: in-process)")

    p = sub.add_parser("simulate", help="generate an MPC log, CIR stream, and stats report")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("params", help="model parameter JSON file")
    common(p)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--no-shadow", action="store_true", help="disable lognormal shadowing")
    p.add_argument("--margin-m", type=float, default=None, help="persistence margin override")
    p.add_argument("--no-cir", action="store_true", help="skip the binary CIR stream")
    p.add_argument("--lifecycle", action="store_true", help="export the lifecycle trace CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="assign MPCs to widths and reconstruct scatterers")
    p.add_argument("log", help="MPC log CSV")
    p.add_argument("scenario", help="scenario JSON file (geometry)")
    common(p)
    p.add_argument("--delta-s", type=float, default=None, help="assignment threshold, seconds")
    p.add_argument("--width-grid", default=None, help="grid as lo:hi:step meters")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("calibrate", help="estimate model parameters from an MPC log")
    p.add_argument("log", help="MPC log CSV")
    p.add_argument("scenario", help="scenario JSON file (geometry)")
    common(p)
    p.add_argument(
        "--binning",
        choices=["auto", "labels", "identify"],
        default="auto",
        help="width binning source",
    )
    p.add_argument("--min-bin", type=int, default=50, help="minimum samples per width bin")
    p.add_argument("--delta-s", type=float, default=None, help="assignment threshold, seconds")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="KS distances of second-order statistics")
    p.add_argument("params", help="model parameter JSON file")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("reference", help="reference MPC log CSV")
    common(p)
    p.add_argument("--seed", type=int, default=None, help="seed of the comparison run")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="per-snapshot RMS delay spread and AoA spread")
    p.add_argument("log", help="MPC log CSV")
    common(p)
    p.add_argument("--bin-width-s", type=float, default=1.0 / 30e6, help="PDP bin width")
    p.add_argument(
        "--polar-snapshot", type=int, default=None, help="also export polar.csv of one snapshot"
    )
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
