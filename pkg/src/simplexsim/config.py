"""Declarative experiment configuration.

A run is described by one strictly validated document (YAML or JSON; JSON is
a subset of YAML so a single loader covers both). Unknown keys are rejected,
the schema is versioned, and ``resolve()`` materializes the per-experiment
defaults so the manifest always stores a complete, replayable description.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .channel import FiberSpec, LinkSpec
from .dsp import RxConfig
from .errors import ConfigError
from .formats import FORMAT_NAMES, build_format
from .tx import TxConfig

SCHEMA_VERSION = 1

ExperimentName = Literal[
    "theory", "b2b", "power-sweep", "span-loss-sweep", "constellation", "metrics"
]

# default format set per experiment; transmission experiments run the two
# formats the launch-power and span-loss comparisons are about
_DEFAULT_FORMATS: dict[str, list[str]] = {
    "theory": ["DP-BPSK", "DP-DPSK", "3D-Simplex"],
    "b2b": ["3D-Simplex", "DP-DPSK"],
    "power-sweep": ["3D-Simplex", "DP-DPSK"],
    "span-loss-sweep": ["3D-Simplex", "DP-DPSK"],
    "constellation": ["3D-Simplex"],
    "metrics": list(FORMAT_NAMES),
}

_DEFAULT_SWEEPS: dict[str, tuple[float, float, float]] = {
    "theory": (0.0, 14.0, 0.5),  # Eb/N0 dB
    "b2b": (6.0, 12.0, 0.5),  # OSNR dB
    "power-sweep": (10.0, 20.0, 1.0),  # launch power dBm
    "span-loss-sweep": (0.0, 4.0, 1.0),  # VOA dB
}

# span-loss runs fix the launch power per format at its own optimum
_DEFAULT_SPAN_LAUNCH = {"DP-DPSK": 17.0, "3D-Simplex": 16.0}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TxBlock(StrictModel):
    """Transmitter parameters; mirrors the tx-side config object."""

    symbol_rate: float = Field(16e9, gt=0)
    samples_per_symbol: int = Field(4, ge=2, le=32)
    pulse: Literal["nrz", "rrc"] = "nrz"
    rrc_rolloff: float = Field(0.15, ge=0.0, le=1.0)
    dac_bandwidth: float | None = Field(None, gt=0)
    dac_precomp: bool = False
    precomp_max_db: float = Field(6.0, ge=0.0)
    laser_linewidth: float = Field(0.0, ge=0.0)
    freq_offset: float = 0.0
    launch_power_dbm: float = 0.0
    center_wavelength: float = Field(1550e-9, gt=0)

    def to_tx_config(self, launch_power_dbm: float | None = None) -> TxConfig:
        return TxConfig(
            symbol_rate=self.symbol_rate,
            samples_per_symbol=self.samples_per_symbol,
            pulse=self.pulse,
            rrc_rolloff=self.rrc_rolloff,
            dac_bandwidth=self.dac_bandwidth,
            dac_precomp=self.dac_precomp,
            precomp_max_db=self.precomp_max_db,
            laser_linewidth=self.laser_linewidth,
            freq_offset=self.freq_offset,
            launch_power_dbm=(
                self.launch_power_dbm if launch_power_dbm is None else launch_power_dbm
            ),
            center_wavelength=self.center_wavelength,
        )


class RxBlock(StrictModel):
    """Receiver DSP parameters; the fiber handed to CD compensation comes
    from the link block, not from here."""

    lo_linewidth: float = Field(0.0, ge=0.0)
    rx_bandwidth: float | None = Field(None, gt=0)
    adc_rate: float | None = Field(None, gt=0)
    eq_taps: int = Field(13, ge=1)
    eq_mode: Literal["ideal-cma", "cma"] = "ideal-cma"
    eq_step: float = Field(1e-3, gt=0)
    eq_train: int = Field(2**14, ge=256)
    vv_window: int = Field(64, ge=4)
    foe_lags: int = Field(2048, ge=2)
    dd_window: int = Field(1024, ge=1)
    probe: int = Field(512, ge=16)
    probe_limit: float = Field(0.55, gt=0)

    def to_rx_config(self, tx: TxBlock, fiber: FiberSpec | None) -> RxConfig:
        return RxConfig(
            symbol_rate=tx.symbol_rate,
            pulse=tx.pulse,
            rrc_rolloff=tx.rrc_rolloff,
            lo_linewidth=self.lo_linewidth,
            rx_bandwidth=self.rx_bandwidth,
            adc_rate=self.adc_rate,
            fiber=fiber,
            eq_taps=self.eq_taps,
            eq_mode=self.eq_mode,
            eq_step=self.eq_step,
            eq_train=self.eq_train,
            vv_window=self.vv_window,
            foe_lags=self.foe_lags,
            dd_window=self.dd_window,
            probe=self.probe,
            probe_limit=self.probe_limit,
        )


class FiberBlock(StrictModel):
    length_km: float = Field(300.0, ge=0)
    attenuation_db_km: float = Field(0.21, ge=0)
    dispersion_ps_nm_km: float = 16.5
    gamma_per_w_km: float = Field(1.3, ge=0)
    steps: int | None = Field(None, ge=1)

    def to_fiber_spec(self) -> FiberSpec:
        return FiberSpec(
            length_km=self.length_km,
            attenuation_db_km=self.attenuation_db_km,
            dispersion_ps_nm_km=self.dispersion_ps_nm_km,
            gamma_per_w_km=self.gamma_per_w_km,
            steps=self.steps,
        )


class LinkBlock(StrictModel):
    """One transmission leg; ``fiber: null`` means back-to-back."""

    fiber: FiberBlock | None = None
    voa_db: float = Field(0.0, ge=0.0)
    voa_position_km: float = Field(100.0, ge=0.0)
    filter_bandwidth: float | None = Field(None, gt=0)
    filter_order: int = Field(4, ge=1)
    nonlinear: bool = True
    span_osnr_offset_db: float = 3.1

    def to_link_spec(self, voa_db: float | None = None) -> LinkSpec:
        return LinkSpec(
            fiber=None if self.fiber is None else self.fiber.to_fiber_spec(),
            voa_db=self.voa_db if voa_db is None else voa_db,
            voa_position_km=self.voa_position_km,
            filter_bandwidth=self.filter_bandwidth,
            filter_order=self.filter_order,
            nonlinear=self.nonlinear,
            span_osnr_offset_db=self.span_osnr_offset_db,
        )


class SweepBlock(StrictModel):
    """Inclusive arithmetic axis; the running experiment names the unit."""

    start: float
    stop: float
    step: float = Field(gt=0)

    @field_validator("stop")
    @classmethod
    def _ordered(cls, v: float, info) -> float:
        if "start" in info.data and v < info.data["start"]:
            raise ValueError("stop must be >= start")
        return v

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 10) for k in range(n)]


class ExperimentConfig(StrictModel):
    schema_version: int = SCHEMA_VERSION
    experiment: ExperimentName
    formats: list[str] | None = None
    tx: TxBlock = Field(default_factory=TxBlock)
    rx: RxBlock = Field(default_factory=RxBlock)
    link: LinkBlock = Field(default_factory=LinkBlock)
    sweep: SweepBlock | None = None
    # constellation runs are a single point, not a sweep
    osnr_db: float | None = None
    # per-format launch power for span-loss runs
    format_launch_dbm: dict[str, float] | None = None
    target_ber: float = Field(1e-3, gt=0, lt=0.5)
    n_symbols: int = Field(2**17, ge=256)
    min_errors: int = Field(100, ge=1)
    max_bits: int = Field(2**23, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    jobs: int = Field(1, ge=1)
    out_dir: str | None = None

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"schema_version {v} not supported (expected {SCHEMA_VERSION})")
        return v

    @field_validator("formats")
    @classmethod
    def _canonical_formats(cls, v: list[str] | None) -> list[str] | None:
        if v is None:
            return None
        if not v:
            raise ValueError("formats must not be empty")
        names = [build_format(name).name for name in v]
        if len(set(names)) != len(names):
            raise ValueError("formats contains duplicates")
        return names

    @field_validator("format_launch_dbm")
    @classmethod
    def _canonical_launch(cls, v: dict[str, float] | None) -> dict[str, float] | None:
        if v is None:
            return None
        return {build_format(name).name: float(p) for name, p in v.items()}

    def resolve(self) -> "ExperimentConfig":
        """Fill per-experiment defaults so the result is fully explicit."""
        out = self.model_copy(deep=True)
        if out.formats is None:
            out.formats = list(_DEFAULT_FORMATS[out.experiment])
        if out.sweep is None and out.experiment in _DEFAULT_SWEEPS:
            start, stop, step = _DEFAULT_SWEEPS[out.experiment]
            out.sweep = SweepBlock(start=start, stop=stop, step=step)
        if out.experiment in ("power-sweep", "span-loss-sweep") and out.link.fiber is None:
            out.link.fiber = FiberBlock()
        if out.experiment == "constellation" and out.osnr_db is None:
            out.osnr_db = 15.9
        if out.experiment == "span-loss-sweep":
            launch = dict(out.format_launch_dbm or {})
            for name in out.formats:
                launch.setdefault(
                    name, _DEFAULT_SPAN_LAUNCH.get(name, out.tx.launch_power_dbm)
                )
            out.format_launch_dbm = launch
        return out


def config_from_dict(data: object) -> ExperimentConfig:
    """Validate a parsed document; manifests are accepted for replay."""
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    if "manifest_version" in data or ("config" in data and "experiment" not in data):
        # a run manifest: replay the resolved config it recorded
        data = data.get("config")
        if not isinstance(data, dict):
            raise ConfigError("manifest 'config' entry must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a YAML or JSON config file (or a manifest, for replay)."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)
