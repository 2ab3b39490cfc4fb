"""Result emitters: unit-annotated CSV tables, JSON summaries, figures.

Every emitter writes deterministic bytes for identical inputs: floats are
rendered with ``repr`` (shortest round-trip form), JSON keys are sorted, and
row order is defined by the result structures. Figures are rendered with
the Agg backend straight to files; they decorate the delimited outputs and
carry no data of their own.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .keyrate import KeyRateReport
from .link import CoincidenceMatrix
from .qudit import Basis, mub_vector
from .spectrum import ChannelSpec, JsiRecord
from .sweep import ChannelOutcome, RangeResult, SweepResult
from .timetag import DelayHistogram, VoigtFit

__all__ = [
    "SCHEMA_VERSION",
    "emit_histogram",
    "emit_plan",
    "emit_range",
    "emit_simulate",
    "emit_sweep",
    "figure_histogram",
    "figure_plan",
    "figure_range",
    "figure_sweep",
    "mub_table_rows",
    "write_csv",
    "write_json",
]

SCHEMA_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence],
) -> Path:
    """Write one CSV table with a unit-annotated header row."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    body = dict(payload)
    body["schema_version"] = SCHEMA_VERSION
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def _report_dict(report: KeyRateReport) -> dict:
    return {
        "dimension": report.dimension,
        "qber_z_fraction": report.qber_z,
        "qber_x_fraction": report.qber_x,
        "raw_rate_hz": report.raw_rate,
        "skr_bits_per_s": report.skr,
        "secure": report.secure,
        "post_processing_f": report.post_processing_f,
    }


def _matrix_rows(matrix: CoincidenceMatrix):
    for a in range(matrix.dimension):
        yield [a] + [float(matrix.counts[a, b]) for b in range(matrix.dimension)]


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def emit_simulate(
    outcome: ChannelOutcome, outdir: Path, stem: str, fmt: str
) -> list[Path]:
    report = outcome.report
    if fmt == "json":
        return [
            write_json(
                outdir / f"{stem}.json",
                {
                    "report": _report_dict(report),
                    "heralded_g2": outcome.heralded_g2,
                    "matrix_z_counts": outcome.matrix_z.counts.tolist(),
                    "matrix_x_counts": outcome.matrix_x.counts.tolist(),
                    "integration_time_s": outcome.matrix_z.integration_time_s,
                },
            )
        ]
    paths = [
        write_csv(
            outdir / f"{stem}_report.csv",
            [
                "dimension", "qber_z_fraction", "qber_x_fraction",
                "raw_rate_hz", "skr_bits_per_s", "secure",
                "post_processing_f", "heralded_g2",
            ],
            [
                [
                    report.dimension, report.qber_z, report.qber_x,
                    report.raw_rate, report.skr, report.secure,
                    report.post_processing_f, outcome.heralded_g2,
                ]
            ],
        )
    ]
    for name, matrix in (("z", outcome.matrix_z), ("x", outcome.matrix_x)):
        header = ["alice_outcome"] + [
            f"bob_{b}_counts" for b in range(matrix.dimension)
        ]
        paths.append(
            write_csv(
                outdir / f"{stem}_matrix_{name}.csv", header, _matrix_rows(matrix)
            )
        )
    return paths


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


def emit_sweep(result: SweepResult, outdir: Path, stem: str, fmt: str) -> list[Path]:
    if fmt == "json":
        return [
            write_json(
                outdir / f"{stem}.json",
                {
                    "dimension": result.dimension,
                    "powers_mw": result.powers_mw.tolist(),
                    "windows_ps": result.windows_ps.tolist(),
                    "skr_bits_per_s": result.skr.tolist(),
                    "qber_z_fraction": result.qber_z.tolist(),
                    "qber_x_fraction": result.qber_x.tolist(),
                    "raw_rate_hz": result.raw_rate.tolist(),
                    "optimum": {
                        "power_mw": result.optimum_power_mw,
                        "window_ps": result.optimum_window_ps,
                        "skr_bits_per_s": result.optimum_skr,
                    },
                },
            )
        ]
    grid = write_csv(
        outdir / f"{stem}_grid.csv",
        [
            "power_mw", "window_ps", "skr_bits_per_s",
            "qber_z_fraction", "qber_x_fraction", "raw_rate_hz",
        ],
        result.rows(),
    )
    opt = write_csv(
        outdir / f"{stem}_optimum.csv",
        ["dimension", "power_mw", "window_ps", "skr_bits_per_s"],
        [
            [
                result.dimension, result.optimum_power_mw,
                result.optimum_window_ps, result.optimum_skr,
            ]
        ],
    )
    return [grid, opt]


def figure_sweep(result: SweepResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    mesh = ax.pcolormesh(
        result.windows_ps, result.powers_mw, result.skr,
        shading="nearest", cmap="viridis",
    )
    fig.colorbar(mesh, ax=ax, label="secure key rate [bit/s]")
    ax.plot(
        result.optimum_window_ps, result.optimum_power_mw,
        marker="x", color="red", markersize=9,
        label=f"optimum {result.optimum_skr:.0f} bit/s",
    )
    ax.set_xlabel("coincidence window half-width [ps]")
    ax.set_ylabel("pump power on chip [mW]")
    ax.set_title(f"d = {result.dimension} key-rate map")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


# --------------------------------------------------------------------------
# range
# --------------------------------------------------------------------------


def emit_range(result: RangeResult, outdir: Path, stem: str, fmt: str) -> list[Path]:
    if fmt == "json":
        payload = {
            "alphas_db": result.alphas_db.tolist(),
            "crossover_db": result.crossover_db,
            "curves": {
                str(d): {
                    "power_mw": np.asarray(c.power_mw).tolist(),
                    "window_ps": np.asarray(c.window_ps).tolist(),
                    "skr_bits_per_s": np.asarray(c.skr).tolist(),
                    "qber_z_fraction": np.asarray(c.qber_z).tolist(),
                    "qber_x_fraction": np.asarray(c.qber_x).tolist(),
                    "max_attenuation_db": float(c.max_attenuation_db),
                    "censored": bool(c.censored),
                }
                for d, c in sorted(result.curves.items())
            },
        }
        return [write_json(outdir / f"{stem}.json", payload)]

    def rows():
        for d, c in sorted(result.curves.items()):
            power = np.asarray(c.power_mw)
            window = np.asarray(c.window_ps)
            for i, alpha in enumerate(result.alphas_db):
                yield [
                    d, float(alpha), float(power[i]), float(window[i]),
                    float(c.skr[i]), float(c.qber_z[i]), float(c.qber_x[i]),
                ]

    curves = write_csv(
        outdir / f"{stem}_curves.csv",
        [
            "dimension", "attenuation_db", "power_mw", "window_ps",
            "skr_bits_per_s", "qber_z_fraction", "qber_x_fraction",
        ],
        rows(),
    )

    def landmark_rows():
        for d, c in sorted(result.curves.items()):
            yield ["extinction", d, float(c.max_attenuation_db), c.censored]
        if result.crossover_db is not None:
            yield ["crossover", "", float(result.crossover_db), False]

    landmarks = write_csv(
        outdir / f"{stem}_landmarks.csv",
        ["quantity", "dimension", "attenuation_db", "censored"],
        landmark_rows(),
    )
    return [curves, landmarks]


def figure_range(result: RangeResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.6, 4.2))
    for d, c in sorted(result.curves.items()):
        skr = np.asarray(c.skr, dtype=float)
        shown = np.where(skr > 0.0, skr, np.nan)
        ax.semilogy(result.alphas_db, shown, label=f"d = {d}")
        if not c.censored:
            ax.axvline(
                float(c.max_attenuation_db), color="gray",
                linestyle=":", linewidth=0.9,
            )
    if result.crossover_db is not None:
        ax.axvline(
            float(result.crossover_db), color="black",
            linestyle="--", linewidth=1.0, label="crossover",
        )
    ax.set_xlabel("symmetric channel attenuation [dB]")
    ax.set_ylabel("secure key rate [bit/s]")
    ax.legend()
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


# --------------------------------------------------------------------------
# channel plan
# --------------------------------------------------------------------------


def emit_plan(
    records: Sequence[JsiRecord],
    channels: Sequence[ChannelSpec],
    width: int,
    floor_hz: float,
    outdir: Path,
    stem: str,
    fmt: str,
) -> list[Path]:
    by_mode = {r.mode_index: r for r in records}

    def channel_rows():
        for i, ch in enumerate(channels):
            rates = [by_mode[m].coincidence_rate_hz for m in ch.occupied_modes]
            yield [
                i, ch.center_mode, ch.first_mode, ch.last_mode,
                ch.width_resonances, ch.max_dimension,
                float(ch.bandwidth_ghz), min(rates),
            ]

    if fmt == "json":
        payload = {
            "width_resonances": width,
            "rate_floor_hz": floor_hz,
            "channel_count": len(channels),
            "channels": [
                {
                    "index": i,
                    "center_mode": ch.center_mode,
                    "first_mode": ch.first_mode,
                    "last_mode": ch.last_mode,
                    "max_dimension": ch.max_dimension,
                    "bandwidth_ghz": ch.bandwidth_ghz,
                }
                for i, ch in enumerate(channels)
            ],
        }
        return [write_json(outdir / f"{stem}.json", payload)]
    return [
        write_csv(
            outdir / f"{stem}_channels.csv",
            [
                "channel_index", "center_mode", "first_mode", "last_mode",
                "width_resonances", "max_dimension", "bandwidth_ghz",
                "min_rate_hz",
            ],
            channel_rows(),
        )
    ]


def figure_plan(
    records: Sequence[JsiRecord],
    channels: Sequence[ChannelSpec],
    floor_hz: float,
    path: str | Path,
) -> Path:
    fig, ax = plt.subplots(figsize=(8.0, 3.8))
    modes = [r.mode_index for r in records]
    rates = [r.coincidence_rate_hz for r in records]
    ax.bar(modes, rates, width=0.85, color="#6699cc", label="mode pair rate")
    for ch in channels:
        ax.axvspan(
            ch.first_mode - 0.5, ch.last_mode + 0.5, color="green", alpha=0.16
        )
    ax.axhline(floor_hz, color="red", linestyle="--", linewidth=1.0,
               label=f"rate floor {floor_hz:g} Hz")
    ax.set_xlabel("comb mode index")
    ax.set_ylabel("coincidence rate [Hz]")
    ax.set_title(f"{len(channels)} allocated channels")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


# --------------------------------------------------------------------------
# delay histogram
# --------------------------------------------------------------------------


def emit_histogram(
    hist: DelayHistogram,
    fit: VoigtFit | None,
    outdir: Path,
    stem: str,
    fmt: str,
) -> list[Path]:
    centers = hist.centers()
    if fmt == "json":
        payload = {
            "bin_width_ps": hist.bin_width_ps,
            "span_ps": hist.span_ps,
            "counts": hist.counts.tolist(),
            "fit": None
            if fit is None
            else {
                "sigma_ps": fit.sigma_ps,
                "gamma_ps": fit.gamma_ps,
                "amplitude": fit.amplitude,
                "offset": fit.offset,
                "reduced_chisq": fit.reduced_chisq,
            },
        }
        return [write_json(outdir / f"{stem}.json", payload)]
    paths = [
        write_csv(
            outdir / f"{stem}_histogram.csv",
            ["delay_ps", "counts"],
            ([float(c), int(n)] for c, n in zip(centers, hist.counts)),
        )
    ]
    if fit is not None:
        paths.append(
            write_csv(
                outdir / f"{stem}_fit.csv",
                [
                    "sigma_ps", "gamma_ps", "amplitude", "offset",
                    "reduced_chisq",
                ],
                [[fit.sigma_ps, fit.gamma_ps, fit.amplitude, fit.offset,
                  fit.reduced_chisq]],
            )
        )
    return paths


def figure_histogram(
    hist: DelayHistogram, fit: VoigtFit | None, path: str | Path
) -> Path:
    from scipy.special import voigt_profile

    centers = hist.centers()
    fig, ax = plt.subplots(figsize=(6.6, 4.0))
    ax.step(centers, hist.counts, where="mid", color="#335577",
            label="coincidences")
    if fit is not None:
        fine = np.linspace(centers[0], centers[-1], 800)
        model = fit.amplitude * voigt_profile(
            fine, fit.sigma_ps, fit.gamma_ps
        ) + fit.offset
        ax.plot(
            fine, model, color="crimson", linewidth=1.2,
            label=(
                f"Voigt fit: sigma={fit.sigma_ps:.1f} ps, "
                f"gamma={fit.gamma_ps:.1f} ps"
            ),
        )
    ax.set_xlabel("delay (Bob - Alice) [ps]")
    ax.set_ylabel("counts per bin")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


# --------------------------------------------------------------------------
# basis tables
# --------------------------------------------------------------------------


def mub_table_rows(dimension: int) -> list[list[str]]:
    """Rows (basis, outcome, amplitude columns) for both measurement bases."""
    rows = []
    for basis in (Basis.Z, Basis.X):
        for k in range(dimension):
            vec = mub_vector(dimension, basis, k)
            rows.append(
                [basis.name, str(k)]
                + [f"{a.real:+.6f}{a.imag:+.6f}j" for a in vec]
            )
    return rows
