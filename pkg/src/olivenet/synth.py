"""Deterministic synthetic fluorescence spectra conditioned on oil labels.

Measured spectra for the bundled oils are not distributed with the package,
so this generator stands in for them: a sum of Gaussian emission peaks whose
amplitudes and centers respond to the chemical parameters, blurred by a
box-shaped instrument response and degraded with multiplicative shot noise.
It is a test harness, not a photochemical model; the default peak set and
couplings live in ``_resources/generator_default.cfg``.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .seeding import derive_seed
from .data import (
    Dataset,
    EmptyDatasetError,
    OilRecord,
    ParameterId,
    Spectrum,
    SUPPORTED_EXCITATIONS,
    WavelengthGrid,
)
from . import kvconfig


class UnsupportedExcitationError(ValueError):
    """Requested excitation wavelength has no LED in the sensor."""


@dataclass(frozen=True)
class PeakSpec:
    """One Gaussian emission peak of the base (parameter-free) spectrum."""

    center_nm: float
    width_nm: float
    base_amplitude: float
    excitation_set: frozenset[int] = frozenset(SUPPORTED_EXCITATIONS)

    def __post_init__(self):
        if self.width_nm <= 0:
            raise ValueError("peak width must be positive")
        if self.base_amplitude < 0:
            raise ValueError("peak amplitude must be nonnegative")
        object.__setattr__(self, "excitation_set", frozenset(self.excitation_set))


@dataclass(frozen=True)
class ParameterCoupling:
    """How one chemical parameter deforms one peak.

    ``amplitude_gain`` is the relative amplitude change per unit of the
    parameter; ``shift_gain`` is the center shift in nm per unit.
    """

    parameter: ParameterId
    target: int
    amplitude_gain: float = 0.0
    shift_gain: float = 0.0


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    peaks: tuple[PeakSpec, ...]
    couplings: tuple[ParameterCoupling, ...] = ()
    noise_sigma: float = 0.01
    resolution_px: int = 30

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        if not self.peaks:
            raise ValueError("config needs at least one peak")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.resolution_px < 1:
            raise ValueError("resolution_px must be at least 1")
        for c in self.couplings:
            if not (0 <= c.target < len(self.peaks)):
                raise ValueError(f"coupling target {c.target} indexes no peak")


def substream_seed(seed: int, oil_id: str, excitation_nm: int, repetition: int) -> int:
    """Stable per-spectrum RNG seed.

    Keyed by content rather than by generation order, so regenerating any
    subset of a dataset reproduces the same spectra bit for bit.
    """
    return derive_seed(seed, oil_id, excitation_nm, repetition)


def apply_instrument_response(signal: np.ndarray, resolution_px: int) -> np.ndarray:
    """Blur with a unit-sum box kernel of the given pixel width.

    The unit sum preserves total intensity (exactly, away from the array
    edges); width 1 is the identity.
    """
    signal = np.asarray(signal, dtype=float)
    if resolution_px < 1:
        raise ValueError("resolution_px must be at least 1")
    if resolution_px > signal.size:
        raise ValueError(
            f"instrument response ({resolution_px} px) wider than the "
            f"detector ({signal.size} px)")
    if resolution_px == 1:
        return signal.copy()
    kernel = np.full(resolution_px, 1.0 / resolution_px)
    return np.convolve(signal, kernel, mode="same")


def peak_profile(record: OilRecord, excitation_nm: int, config: GeneratorConfig
                 ) -> list[tuple[float, float, float]]:
    """Resolve (amplitude, center, width) of each active peak for one oil.

    Couplings add ``base_amplitude * gain * value`` to the amplitude and
    ``shift_gain * value`` nm to the center; absent parameters contribute
    nothing.  Amplitudes are floored at zero.
    """
    amp = [p.base_amplitude for p in config.peaks]
    cen = [p.center_nm for p in config.peaks]
    for c in config.couplings:
        v = record.value_of(c.parameter)
        if v is None:
            continue
        amp[c.target] += config.peaks[c.target].base_amplitude * c.amplitude_gain * v
        cen[c.target] += c.shift_gain * v
    return [
        (max(a, 0.0), ci, p.width_nm)
        for p, a, ci in zip(config.peaks, amp, cen)
        if excitation_nm in p.excitation_set
    ]


def generate_spectrum(
    record: OilRecord,
    excitation_nm: int,
    repetition: int,
    config: GeneratorConfig,
    grid: WavelengthGrid,
) -> Spectrum:
    """Synthesize one raw (un-normalized) spectrum for an oil.

    Deterministic function of (config.seed, oil_id, excitation, repetition).
    """
    if excitation_nm not in SUPPORTED_EXCITATIONS:
        raise UnsupportedExcitationError(f"no LED at {excitation_nm} nm")
    if not any(record.has(p) for p in ParameterId):
        raise ValueError(f"record {record.oil_id!r} has no parameter values")
    lam = grid.values
    signal = np.zeros(len(grid))
    for a, c, w in peak_profile(record, excitation_nm, config):
        if a > 0.0:
            signal += a * np.exp(-0.5 * ((lam - c) / w) ** 2)
    signal = apply_instrument_response(signal, config.resolution_px)
    if config.noise_sigma > 0.0:
        rng = np.random.default_rng(
            substream_seed(config.seed, record.oil_id, excitation_nm, repetition))
        signal = signal * (1.0 + config.noise_sigma * rng.standard_normal(len(grid)))
    signal = np.maximum(signal, 0.0)  # counts cannot go negative
    return Spectrum(
        grid=grid,
        intensities=signal,
        excitation_nm=excitation_nm,
        oil_id=record.oil_id,
        repetition=repetition,
        normalized=False,
    )


def generate_dataset(
    records: list[OilRecord],
    excitation_nm: int,
    repetitions: int,
    config: GeneratorConfig,
    grid: WavelengthGrid,
) -> Dataset:
    """Generate ``repetitions`` spectra for every record."""
    if not records:
        raise EmptyDatasetError("no records to generate from")
    spectra = [
        generate_spectrum(rec, excitation_nm, rep, config, grid)
        for rec in records
        for rep in range(1, repetitions + 1)
    ]
    return Dataset(
        grid=grid,
        spectra=tuple(spectra),
        records=tuple(records),
        repetitions_per_oil=repetitions,
    )


# ---------------------------------------------------------------------------
# config file binding
# ---------------------------------------------------------------------------

def config_from_entries(entries: dict[str, str], seed: int | None = None) -> GeneratorConfig:
    peaks = []
    for g in kvconfig.group_indexed(entries, "peak"):
        peaks.append(PeakSpec(
            center_nm=float(g["center_nm"]),
            width_nm=float(g["width_nm"]),
            base_amplitude=float(g["base_amplitude"]),
            excitation_set=frozenset(int(t) for t in g["excitations"].split(",")),
        ))
    couplings = []
    for g in kvconfig.group_indexed(entries, "coupling"):
        couplings.append(ParameterCoupling(
            parameter=ParameterId(g["parameter"]),
            target=int(g["target"]),
            amplitude_gain=float(g.get("amplitude_gain", "0")),
            shift_gain=float(g.get("shift_gain", "0")),
        ))
    return GeneratorConfig(
        seed=int(entries.get("seed", "0")) if seed is None else seed,
        peaks=tuple(peaks),
        couplings=tuple(couplings),
        noise_sigma=float(entries.get("noise_sigma", "0.01")),
        resolution_px=int(entries.get("resolution_px", "30")),
    )


def config_to_entries(config: GeneratorConfig) -> dict[str, str]:
    out = {
        "seed": str(config.seed),
        "noise_sigma": repr(config.noise_sigma),
        "resolution_px": str(config.resolution_px),
    }
    for i, p in enumerate(config.peaks):
        out[f"peak.{i}.center_nm"] = repr(p.center_nm)
        out[f"peak.{i}.width_nm"] = repr(p.width_nm)
        out[f"peak.{i}.base_amplitude"] = repr(p.base_amplitude)
        out[f"peak.{i}.excitations"] = ",".join(str(e) for e in sorted(p.excitation_set))
    for i, c in enumerate(config.couplings):
        out[f"coupling.{i}.parameter"] = c.parameter.value
        out[f"coupling.{i}.target"] = str(c.target)
        out[f"coupling.{i}.amplitude_gain"] = repr(c.amplitude_gain)
        out[f"coupling.{i}.shift_gain"] = repr(c.shift_gain)
    return out


def load_generator_config(path: str | Path, seed: int | None = None) -> GeneratorConfig:
    return config_from_entries(kvconfig.load_kv(path), seed=seed)


def save_generator_config(config: GeneratorConfig, path: str | Path) -> None:
    Path(path).write_text(kvconfig.dump_kv(config_to_entries(config)), encoding="utf-8")


def default_generator_config(seed: int = 0) -> GeneratorConfig:
    """The peak set and couplings shipped with the package."""
    path = Path(resources.files("olivenet") / "_resources" / "generator_default.cfg")
    return load_generator_config(path, seed=seed)
