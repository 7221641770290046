"""HTTP service wrapping the simulator and calibration toolchain.

Every pipeline stage is a POST endpoint taking and returning JSON; CSV
artifacts travel as text fields and the binary CIR stream as base64. The
CLI is a thin client of this service (in-process by default).
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .calibrate import CalibrationOptions, Gates, calibrate_all, make_report_csv
from .distributions import ModelParams
from .engine import (
    SimOptions,
    identify_log,
    run_simulation,
    validate_against,
)
from .errors import ConfigError, ModelError, NumericalError
from .io import (
    read_mpc_log,
    write_assignments_csv,
    write_scatterers_csv,
    write_stats_csv,
)
from .scenario import ScenarioConfig
from .stats import DEFAULT_PDP_BIN_S, empirical_cdf


class RouteModel(BaseModel):
    id: str | None = None
    waypoints: list[tuple[float, float]]
    width_m: float = 20.0


class CanyonModel(BaseModel):
    route: str | None = None
    side: str
    width_m: float
    extent_m: tuple[float, float]


class TxModel(BaseModel):
    position: tuple[float, float] | None = None
    waypoints: list[tuple[float, float]] | None = None
    speed_mps: float = 0.0
    heading_deg: float = 0.0


class RxModel(BaseModel):
    waypoints: list[tuple[float, float]]
    speed_mps: float


class RfModel(BaseModel):
    fc_hz: float = 5.8e9
    bw_hz: float = 30e6
    tx_power_dbm: float = 45.0


class ArrayModel(BaseModel):
    rows: int = 4
    cols: int = 8
    spacing_wavelengths: float = 0.5


class ScenarioModel(BaseModel):
    routes: list[RouteModel]
    canyons: list[CanyonModel] = Field(default_factory=list)
    tx: TxModel
    rx: RxModel
    rf: RfModel = Field(default_factory=RfModel)
    array: ArrayModel = Field(default_factory=ArrayModel)
    snapshot_rate_hz: float = 45.0
    duration_s: float | None = None
    n_snapshots: int | None = None
    seed: int = 0
    margin_m: float = 30.0
    turn_rate_threshold_deg_s: float = 5.0
    heading_blend_m: float = 12.0
    scene_margin_m: float = 500.0

    def to_config(self) -> ScenarioConfig:
        return ScenarioConfig.from_dict(self.model_dump(exclude_none=True))


class SimulateRequest(BaseModel):
    scenario: ScenarioModel
    params: dict
    seed: int | None = None
    no_shadow: bool = False
    margin_m: float | None = None
    include_cir: bool = False
    include_lifecycle: bool = False


class SimulateResponse(BaseModel):
    n_snapshots: int
    regions: dict[str, int]
    breakpoint: tuple[float, float] | None
    mpc_log_csv: str
    stats_csv: str
    cir_stream_b64: str | None = None
    lifecycle_csv: str | None = None


class IdentifyRequest(BaseModel):
    mpc_log_csv: str
    scenario: ScenarioModel
    delta_s: float | None = None
    width_grid: list[float] | None = None


class IdentifyResponse(BaseModel):
    assignments_csv: str
    scatterers_csv: str
    n_rows: int
    n_assigned: int
    n_skipped: int


class CalibrateRequest(BaseModel):
    mpc_log_csv: str
    scenario: ScenarioModel
    binning: str = "auto"
    min_bin_samples: int = 50
    delta_s: float | None = None
    gate_delay_s: float | None = None
    gate_aoa_deg: float | None = None


class CalibrateResponse(BaseModel):
    params: dict
    report_csv: str
    warnings: list[str]


class ValidateRequest(BaseModel):
    params: dict
    scenario: ScenarioModel
    reference_log_csv: str
    seed: int | None = None


class ValidateResponse(BaseModel):
    dks_rms_ds: float
    dks_aoa_spread: float
    n_snapshots: int
    rms_ds_cdf_csv: str
    aoa_spread_cdf_csv: str


class StatsRequest(BaseModel):
    mpc_log_csv: str
    pdp_bin_s: float = DEFAULT_PDP_BIN_S


class StatsResponse(BaseModel):
    stats_csv: str
    n_snapshots: int


def _cdf_csv(values) -> str:
    v, c = empirical_cdf(values)
    lines = ["value,cdf"]
    lines += [f"{float(vi)!r},{float(ci)!r}" for vi, ci in zip(v, c)]
    return "\n".join(lines) + "\n"


def create_app() -> FastAPI:
    app = FastAPI(title="canyonsim", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"error_kind": "config", "detail": str(exc)})

    @app.exception_handler(ModelError)
    async def _model_error(request: Request, exc: ModelError):
        return JSONResponse(
            status_code=422, content={"error_kind": "numerical", "detail": str(exc)}
        )

    @app.exception_handler(NumericalError)
    async def _numerical_error(request: Request, exc: NumericalError):
        return JSONResponse(
            status_code=422, content={"error_kind": "numerical", "detail": str(exc)}
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        scenario = req.scenario.to_config()
        params = ModelParams.from_dict(req.params)
        options = SimOptions(
            seed=req.seed,
            shadow=not req.no_shadow,
            margin_m=req.margin_m,
            include_cir=req.include_cir,
            include_lifecycle=req.include_lifecycle,
        )
        result = run_simulation(scenario, params, options)
        bp = result.timeline.breakpoint
        return SimulateResponse(
            n_snapshots=result.n_snapshots,
            regions=result.region_counts(),
            breakpoint=(float(bp[0]), float(bp[1])) if bp is not None else None,
            mpc_log_csv=result.mpc_log_csv(),
            stats_csv=result.stats_csv(),
            cir_stream_b64=(
                base64.b64encode(result.cir_stream).decode("ascii")
                if result.cir_stream is not None
                else None
            ),
            lifecycle_csv=result.lifecycle_csv() if req.include_lifecycle else None,
        )

    @app.post("/identify", response_model=IdentifyResponse)
    def identify(req: IdentifyRequest):
        scenario = req.scenario.to_config()
        rows, skipped = read_mpc_log(req.mpc_log_csv, tolerant=True)
        if not rows:
            raise ConfigError("MPC log contains no parseable rows")
        grid = np.asarray(req.width_grid, dtype=float) if req.width_grid else None
        assignments, scatterers, _ = identify_log(rows, scenario, req.delta_s, grid)
        n_assigned = sum(1 for a in assignments if a.get("width_m") is not None)
        return IdentifyResponse(
            assignments_csv=write_assignments_csv(assignments),
            scatterers_csv=write_scatterers_csv(scatterers),
            n_rows=len(assignments),
            n_assigned=n_assigned,
            n_skipped=skipped,
        )

    @app.post("/calibrate", response_model=CalibrateResponse)
    def calibrate(req: CalibrateRequest):
        scenario = req.scenario.to_config()
        rows, _ = read_mpc_log(req.mpc_log_csv, tolerant=True)
        gates = Gates(
            delay_s=req.gate_delay_s if req.gate_delay_s else Gates().delay_s,
            aoa_deg=req.gate_aoa_deg if req.gate_aoa_deg else Gates().aoa_deg,
        )
        options = CalibrationOptions(
            binning=req.binning,
            min_bin_samples=req.min_bin_samples,
            delta_s=req.delta_s if req.delta_s is not None else CalibrationOptions().delta_s,
            gates=gates,
        )
        result = calibrate_all(rows, scenario, options)
        return CalibrateResponse(
            params=result.params.to_dict(),
            report_csv=make_report_csv(result.report_rows),
            warnings=result.warnings,
        )

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        scenario = req.scenario.to_config()
        params = ModelParams.from_dict(req.params)
        rows, _ = read_mpc_log(req.reference_log_csv, tolerant=True)
        report = validate_against(params, scenario, rows, seed=req.seed)
        return ValidateResponse(
            dks_rms_ds=report.dks_rms_ds,
            dks_aoa_spread=report.dks_aoa_spread,
            n_snapshots=report.n_snapshots,
            rms_ds_cdf_csv=_cdf_csv(report.model_rms_ds),
            aoa_spread_cdf_csv=_cdf_csv(report.model_aoa_spread),
        )

    @app.post("/stats", response_model=StatsResponse)
    def stats_endpoint(req: StatsRequest):
        rows, _ = read_mpc_log(req.mpc_log_csv, tolerant=True)
        if not rows:
            raise ConfigError("MPC log contains no parseable rows")
        from .io import rows_by_snapshot
        from .stats import snapshot_stats

        stats_rows = []
        for snap, snap_rows in sorted(rows_by_snapshot(rows).items()):
            mpcs = [r.to_mpc() for r in snap_rows]
            rms, spread, count = snapshot_stats(mpcs, req.pdp_bin_s)
            region = next((r.region for r in snap_rows if r.region), "")
            stats_rows.append((snap, rms, spread, count, region))
        return StatsResponse(stats_csv=write_stats_csv(stats_rows), n_snapshots=len(stats_rows))

    return app


app = create_app()
