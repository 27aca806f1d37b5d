"""Command-line front end.

    ifgi run     --config PATH [--mode cgi|ifgi] [--seed N] [--out DIR]
    ifgi sweep   --config PATH --param r_ratio|gamma|phi --values 0.5,0.25 [--seed N] [--out DIR]
    ifgi compare REPORT_A REPORT_B [--tolerance X]
    ifgi scene   --preset NAME --out DIR [--phi X]

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 tolerance
violation (compare).  Errors are reported as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ifgi import metrics, oracle, pipeline
from ifgi.config import SWEEP_PARAMS, ConfigError, ScenarioConfig, load_config, to_text
from ifgi.pgm import PgmError, atomic_write, encode_pgm
from ifgi.scene import PRESETS, SceneError, preset

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_TOLERANCE = 0, 2, 3, 4
RATIO_FLOOR = 1e-6  # photons/pixel

# fixed column set of every metrics.csv
CSV_COLUMNS = (
    "mode", "scene", "param", "value", "r", "t", "gamma", "n_frames", "seed",
    "pairs", "interacted", "absorbed", "interacted_fraction",
    "n_out_mean", "n_in_mean", "delta_n", "delta_n_err", "visibility", "sigma_bg", "d_in_mean",
    "oracle_delta_n", "oracle_interaction", "oracle_gain", "oracle_d_in_mean", "oracle_phase_signal",
    "delta_n_ratio", "oracle_delta_n_ratio",
)


class ExportError(OSError):
    pass


def _fail(code, kind, message, path=None):
    record = {"error": kind, "message": message}
    if path is not None:
        record["path"] = str(path)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if math.isfinite(x) else ""
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


# --- running -------------------------------------------------------------------


def execute(cfg: ScenarioConfig, mode: str, workers: int = 1):
    obj, rois, _ = cfg.load()
    correct = cfg.accidental_correction == "per_channel"
    if mode == "cgi":
        report = pipeline.run_cgi(obj, cfg.source, cfg.detector, cfg.n_frames, cfg.seed,
                                  input_pol=cfg.interferometer.input_pol, accidental_correction=correct,
                                  workers=workers)
    else:
        report = pipeline.run_ifgi(obj, cfg.interferometer, cfg.source, cfg.detector, cfg.n_frames, cfg.seed,
                                   accidental_correction=correct, port_mode=cfg.port_mode, workers=workers)
    return obj, rois, report


def metrics_row(cfg, mode, obj, rois, report, param="", value=None, reference=None) -> dict:
    """One CSV row: measured metrics next to the oracle predictions."""
    spec = cfg.interferometer
    tl = report.probe_tallies
    m = metrics.measure(report.composed, rois)
    n_pairs = tl.pairs
    row = {
        "mode": mode, "scene": obj.label, "param": param, "value": value,
        "r": spec.r if mode == "ifgi" else 0.0, "t": spec.t if mode == "ifgi" else 1.0,
        "gamma": spec.gamma, "n_frames": cfg.n_frames, "seed": cfg.seed,
        "pairs": n_pairs, "interacted": tl.interacted, "absorbed": tl.absorbed,
        "interacted_fraction": tl.interacted / n_pairs if n_pairs else None,
        "n_out_mean": m.n_out_mean, "n_in_mean": m.n_in_mean, "delta_n": m.delta_n,
        "delta_n_err": m.delta_n_err, "visibility": m.visibility, "sigma_bg": m.sigma_bg,
        "oracle_delta_n": oracle.predicted_delta_n(mode, obj, spec, cfg.source, cfg.detector, n_pairs, rois),
        "oracle_interaction": spec.t if mode == "ifgi" else 1.0,
        "oracle_gain": oracle.gain(spec.r) if mode == "ifgi" else 1.0,
    }
    if mode == "ifgi":
        channels = report.raw_channels
        d = channels["d"].values - (channels["acc_d"].values if "acc_d" in report.recipe else 0)
        row["d_in_mean"] = metrics.roi_mean(d, rois.inside)
        expected_d = oracle.expected_port_image(obj, spec, cfg.source, cfg.detector, n_pairs, "D")
        row["oracle_d_in_mean"] = metrics.roi_mean(expected_d, rois.inside)
        if cfg.scene_preset == "glass_shard":
            flux = oracle.pair_flux(cfg.source, cfg.detector, obj.grid, n_pairs)
            row["oracle_phase_signal"] = oracle.phase_signal(metrics.roi_mean(flux, rois.inside),
                                                             spec.r, spec.t, cfg.phi)
    # ratios against a reference that the oracle says is blank (a lossless
    # scene under CGI) carry no information and are left empty
    if reference is not None and abs(reference[1]) > RATIO_FLOOR:
        ref_dn, ref_oracle = reference
        row["delta_n_ratio"] = m.delta_n / ref_dn if ref_dn else None
        row["oracle_delta_n_ratio"] = row["oracle_delta_n"] / ref_oracle
    return row


def encode_csv(rows) -> bytes:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue().encode("utf-8")


def export_signed(values: np.ndarray) -> tuple[bytes, int]:
    """16-bit graymap of a signed image shifted so its minimum is >= 0."""
    offset = max(0, -int(values.min())) if values.size else 0
    shifted = values.astype(np.int64) + offset
    if shifted.size and shifted.max() > 65535:
        raise ExportError(f"signed image range {int(values.min())}..{int(values.max())} exceeds 16 bits")
    return encode_pgm(shifted, maxval=65535), offset


def write_report(out: Path, cfg: ScenarioConfig, report, rows) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, img in sorted(report.raw_channels.items()):
            atomic_write(out / f"{name}.pgm", encode_pgm(img.counts, maxval=65535))
            written.append(f"{name}.pgm")
        payload, offset = export_signed(report.composed.values)
    except PgmError as exc:
        raise ExportError(str(exc)) from None
    atomic_write(out / "composed.pgm", payload)
    atomic_write(out / "composed.offset", f"offset = {offset}\nmaxval = 65535\n".encode("ascii"))
    atomic_write(out / "metrics.csv", encode_csv(rows))
    atomic_write(out / "resolved.cfg", to_text(cfg).encode("utf-8"))
    return written + ["composed.pgm", "composed.offset", "metrics.csv", "resolved.cfg"]


def cmd_run(config_path, mode=None, seed=None, out=None, workers=1) -> int:
    try:
        cfg = load_config(config_path, seed=seed)
        if mode is not None:
            cfg = replace(cfg, mode=mode)
        if out is not None:
            cfg = replace(cfg, out_dir=str(out))
        cfg = cfg.resolved()
        obj, rois, report = execute(cfg, cfg.mode, workers)
        row = metrics_row(cfg, cfg.mode, obj, rois, report)
        files = write_report(Path(cfg.out_dir), cfg, report, [row])
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.path)
    except (SceneError, metrics.MetricsError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc), getattr(exc, "filename", None))
    print(f"wrote {', '.join(files)} to {cfg.out_dir}")
    print(f"delta_n = {row['delta_n']:.3f} +/- {row['delta_n_err']:.3f}  (oracle {row['oracle_delta_n']:.3f})")
    return EXIT_OK


def parse_values(text: str) -> list[float]:
    parts = [p.strip() for p in (text or "").split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty value list")
    out = []
    for p in parts:
        try:
            out.append(float(eval_constant(p)))
        except ValueError:
            raise ConfigError(f"bad sweep value {p!r}") from None
    return out


def eval_constant(text: str) -> float:
    """Accept plain numbers and multiples of pi, e.g. ``pi/2`` or ``0.5pi``."""
    t = text.replace(" ", "").lower()
    if "pi" not in t:
        return float(t)
    head, _, tail = t.partition("pi")
    factor = 1.0 if head in ("", "+") else -1.0 if head == "-" else float(head.rstrip("*"))
    if tail:
        if not tail.startswith("/"):
            raise ValueError(text)
        factor /= float(tail[1:])
    return factor * math.pi


def cmd_sweep(config_path, param, values_text, seed=None, out=None, workers=1) -> int:
    try:
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
        values = parse_values(values_text)
        base = load_config(config_path, seed=seed)
        if out is not None:
            base = replace(base, out_dir=str(out))
        base = base.resolved()
        configs = [base.with_param(param, v).resolved() for v in values]

        ref_obj, ref_rois, ref = execute(base, "cgi", workers)
        ref_dn = metrics.delta_n(ref.composed, ref_rois)
        ref_oracle = oracle.predicted_delta_n("cgi", ref_obj, base.interferometer, base.source, base.detector,
                                              ref.probe_tallies.pairs, ref_rois)
        rows = []
        for v, cfg in zip(values, configs):
            obj, rois, report = execute(cfg, "ifgi", workers)
            rows.append(metrics_row(cfg, "ifgi", obj, rois, report, param, v, (ref_dn, ref_oracle)))
        out_dir = Path(base.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write(out_dir / "metrics.csv", encode_csv(rows))
        atomic_write(out_dir / "resolved.cfg", to_text(base).encode("utf-8"))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.path)
    except (SceneError, metrics.MetricsError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc), getattr(exc, "filename", None))
    for row in rows:
        print(f"{param} = {row['value']!r}: delta_n = {row['delta_n']:.3f}, ratio = {_fmt(row.get('delta_n_ratio'))}"
              f" (oracle {_fmt(row.get('oracle_delta_n_ratio'))})")
    return EXIT_OK


# --- comparing -----------------------------------------------------------------


def read_report(directory) -> tuple[ScenarioConfig, dict]:
    directory = Path(directory)
    cfg_path, csv_path = directory / "resolved.cfg", directory / "metrics.csv"
    for p in (cfg_path, csv_path):
        if not p.is_file():
            raise FileNotFoundError(2, "report file missing", str(p))
    cfg = load_config(cfg_path)
    with open(csv_path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ConfigError(f"{csv_path}: no metrics rows", csv_path)
    return cfg, rows[0]


def _num(row, key):
    v = row.get(key, "")
    return float(v) if v not in ("", None) else None


def _ratio(a, b):
    if a is None or b is None or a == 0:
        return None
    return b / a


def cmd_compare(report_a, report_b, tolerance=0.05) -> int:
    try:
        (cfg_a, row_a), (cfg_b, row_b) = read_report(report_a), read_report(report_b)
        obj_a, rois_a, _ = cfg_a.load()
        obj_b, rois_b, _ = cfg_b.load()
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.path)
    except (SceneError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc), getattr(exc, "filename", None))
    if obj_a.grid != obj_b.grid:
        return _fail(EXIT_CONFIG, "config", "reports were taken on different grids")
    if rois_a != rois_b:
        return _fail(EXIT_CONFIG, "config", "reports use different ROIs")

    keys = ("delta_n", "visibility", "sigma_bg", "pairs", "interacted", "interacted_fraction")
    for label, row in (("a", row_a), ("b", row_b)):
        print(f"{label}: mode = {row['mode']}, scene = {row['scene']}, r = {row['r']}, t = {row['t']}")
        for k in keys:
            print(f"{label}.{k} = {row[k]}")
    ratios = {k: _ratio(_num(row_a, k), _num(row_b, k)) for k in keys}
    predicted = {
        "delta_n": _ratio(_num(row_a, "oracle_delta_n"), _num(row_b, "oracle_delta_n")),
        "interacted_fraction": _ratio(_num(row_a, "oracle_interaction"), _num(row_b, "oracle_interaction")),
    }
    for k in keys:
        print(f"ratio.{k} = {_fmt(ratios[k])}")
    violations = []
    for k, pred in predicted.items():
        print(f"oracle_ratio.{k} = {_fmt(pred)}")
        if pred is not None and ratios[k] is not None and abs(ratios[k] - pred) > tolerance:
            violations.append(k)
    if violations:
        print(f"tolerance {tolerance!r} exceeded for: {', '.join(violations)}")
        return EXIT_TOLERANCE
    print(f"agreement within tolerance {tolerance!r}")
    return EXIT_OK


# --- scene export ----------------------------------------------------------------


def cmd_scene(name, out, phi=math.pi / 2) -> int:
    try:
        pre = preset(name, phi=phi)
    except SceneError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / f"{name}.pgm", encode_pgm(pre.bitmap.astype(np.uint16) * 65535, maxval=65535))
        lines = [f"kind = {pre.kind}", f"label = {name}", f"pitch = {pre.scene.grid.pitch!r}"]
        if pre.kind != "stencil":
            lines.append(f"max = {pre.max_param!r}")
        atomic_write(out / f"{name}.scene", ("\n".join(lines) + "\n").encode("utf-8"))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc), getattr(exc, "filename", None))
    print(f"wrote {name}.pgm and {name}.scene to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifgi", description="Interaction-free ghost imaging simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")

    p = sub.add_parser("run", help="run one CGI or IFGI acquisition")
    common(p)
    p.add_argument("--mode", choices=("cgi", "ifgi"))

    p = sub.add_parser("sweep", help="IFGI runs over a parameter, against a CGI reference")
    common(p)
    p.add_argument("--param", required=True, help="r_ratio, gamma or phi")
    p.add_argument("--values", required=True, help="comma-separated values (phi accepts pi/2 etc.)")

    p = sub.add_parser("compare", help="compare two run reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--tolerance", type=float, default=0.05)

    p = sub.add_parser("scene", help="export a preset scene as graymap + descriptor")
    p.add_argument("--preset", required=True, choices=PRESETS)
    p.add_argument("--out", required=True)
    p.add_argument("--phi", type=eval_constant, default=math.pi / 2)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.mode, args.seed, args.out, args.workers)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.param, args.values, args.seed, args.out, args.workers)
    if args.command == "compare":
        return cmd_compare(args.report_a, args.report_b, args.tolerance)
    return cmd_scene(args.preset, args.out, args.phi)


if __name__ == "__main__":
    sys.exit(main())
