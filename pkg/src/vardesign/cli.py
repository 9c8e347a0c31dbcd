"""Command-line interface.

Subcommands mirror the workflow operations:

    dataset gen | dataset split
    train arvae | train apnn
    invert
    baseline nn | baseline apnn
    evaluate analytical | evaluate fdfd
    parameterize
    compose
    report

Every command that writes a directory also drops a run.json with the
seed, a hash of the effective config, and the format versions, so any
output can be regenerated from its header alone.  Errors exit nonzero
with a single `error: ...` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import acoustics, apnn, arvae, fdfd, raster, workflows
from .acoustics import FrequencyGrid, StlCurve, VarGeometry
from .dataset import Dataset, SamplerConfig, generate, split_ids


def _load_config(path: str | None) -> dict:
    if path is None:
        ref = resources.files("vardesign") / "configs" / "desk.json"
        return json.loads(ref.read_text())
    return json.loads(Path(path).read_text())


def _write_run_header(out_dir: Path, command: str, seed: int, config: dict,
                      outputs: list[str]) -> None:
    payload = {
        "command": command,
        "header": workflows.reproducibility_header(seed, config),
        "config": config,
        "outputs": sorted(outputs),
    }
    (out_dir / "run.json").write_text(json.dumps(payload, indent=1, sort_keys=True))


def _default_run_dir(base: str, config: dict) -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%S")
    return Path(f"{base}-{stamp}-{workflows.config_hash(config)}")


def _grid(name: str) -> FrequencyGrid:
    if name == "default":
        return FrequencyGrid.default()
    if name == "fine":
        return FrequencyGrid.fine()
    raise ValueError(f"unknown grid {name!r} (use default or fine)")


def _parse_params(text: str) -> VarGeometry:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 5:
        raise ValueError("expected 5 comma-separated values: R,l_a,l_b,R_n,R_c")
    return VarGeometry(*parts)


def _emit_curve(curve: StlCurve, out: str | None) -> None:
    if out is None:
        sys.stdout.write("freq_hz,stl_db\n")
        for f, v in zip(curve.grid.freqs, curve.values):
            sys.stdout.write(f"{f:.9g},{v:.9g}\n")
    else:
        acoustics.write_stl_csv(curve, out)
        print(f"wrote {out}; peak_hz={curve.peak_frequency():.9g} "
              f"peak_stl_db={curve.peak_value():.9g}")


# -- subcommand implementations ----------------------------------------------


def _cmd_dataset(args) -> int:
    if args.dataset_cmd == "gen":
        cfg = SamplerConfig(count=args.count, seed=args.seed,
                            train_fraction=args.fraction)
        out = Path(args.out)
        generate(out, cfg)
        config = {"command": "dataset gen", "count": cfg.count, "seed": cfg.seed,
                  "fraction": cfg.train_fraction}
        _write_run_header(out, "dataset gen", cfg.seed, config,
                          ["manifest.json", "params.csv", "responses.f32", "images/"])
        print(f"wrote dataset of {cfg.count} samples to {out}")
        return 0
    data = Dataset(args.data)
    fraction = args.fraction if args.fraction is not None \
        else data.manifest["split"]["fraction"]
    seed = args.seed if args.seed is not None else data.manifest["seed"]
    train, test = split_ids(data.count, fraction, seed)
    out = Path(args.out) if args.out else Path(args.data) / "split.csv"
    with open(out, "w") as fh:
        fh.write("id,role\n")
        roles = np.empty(data.count, dtype=object)
        roles[train] = "train"
        roles[test] = "test"
        for i in range(data.count):
            fh.write(f"{i},{roles[i]}\n")
    print(f"split {data.count} ids into {train.size} train / {test.size} test; wrote {out}")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    data = Dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.model == "arvae":
        section = dict(config.get("arvae", {}))
        for key, flag in (("epochs", args.epochs), ("seed", args.seed),
                          ("learning_rate", args.lr), ("batch_size", args.batch_size),
                          ("dtype", args.dtype)):
            if flag is not None:
                section[key] = flag
        section.setdefault("seed", 0)
        cfg = arvae.TrainConfig(
            batch_size=section.get("batch_size", 32),
            learning_rate=section.get("learning_rate", 1e-5),
            epochs=section.get("epochs", 200),
            seed=section["seed"],
            loss_weights=tuple(section.get("loss_weights", (1.0, 1.0, 1.0))),
            threshold=section.get("threshold", 0.5),
            dtype=section.get("dtype", "float64"),
            channels=tuple(section.get("channels", arvae.DEFAULT_CHANNELS)),
            standardize=section.get("standardize", True))
        info = arvae.train_arvae(data, cfg, out)
        effective = {"command": "train arvae", **section}
        _write_run_header(out, "train arvae", cfg.seed, effective,
                          ["arvae.ckpt", "loss_arvae.csv"])
        print(f"trained arvae: best total loss {info['best_total']:.6g} "
              f"at epoch {info['best_epoch']}; checkpoint {info['checkpoint']}")
        return 0
    section = dict(config.get("apnn", {}))
    for key, flag in (("epochs", args.epochs), ("seed", args.seed),
                      ("learning_rate", args.lr), ("batch_size", args.batch_size),
                      ("dtype", args.dtype)):
        if flag is not None:
            section[key] = flag
    section.setdefault("seed", 0)
    cfg = apnn.ApnnConfig(
        hidden=tuple(section.get("hidden", apnn.DEFAULT_HIDDEN)),
        batch_size=section.get("batch_size", 512),
        learning_rate=section.get("learning_rate", 1e-5),
        epochs=section.get("epochs", 500),
        seed=section["seed"],
        dtype=section.get("dtype", "float64"),
        standardize=section.get("standardize", True))
    info = apnn.train_apnn(data, cfg, out)
    effective = {"command": "train apnn", **section}
    _write_run_header(out, "train apnn", cfg.seed, effective,
                      ["apnn.ckpt", "loss_apnn.csv"])
    print(f"trained apnn: best mse {info['best_mse']:.6g} "
          f"at epoch {info['best_epoch']}; checkpoint {info['checkpoint']}")
    return 0


def _cmd_invert(args) -> int:
    config = _load_config(args.config)
    n = args.n if args.n is not None else config.get("invert", {}).get("n", 100)
    data = Dataset(args.data)
    model = arvae.ArVae.load(args.checkpoint)
    target = acoustics.read_stl_csv(args.target)
    label = Path(args.target).stem
    report = workflows.invert(model, data, target, n=n, seed=args.seed,
                              target_label=label)
    apnn_model = apnn.Apnn.load(args.apnn) if args.apnn else None
    workflows.add_baselines(report, data, apnn_model)
    if args.parameterize:
        workflows.parameterized_variant(report)
    run_config = {"command": "invert", "n": n, "seed": args.seed, "target": label,
                  "parameterize": bool(args.parameterize)}
    out = Path(args.out) if args.out else _default_run_dir("invert", run_config)
    workflows.write_report(report, out)
    _write_run_header(out, "invert", args.seed, run_config,
                      ["report.json", "candidates.csv", "target.csv", "images/"])
    s = report.summary
    print(f"inverted {label}: best mse {s['best_mse']:.6g} "
          f"(candidate {report.best_index}), best peak {s['best_peak_hz']:.9g} Hz "
          f"vs target {s['target_peak_hz']:.9g} Hz; report in {out}")
    return 0


def _cmd_baseline(args) -> int:
    data = Dataset(args.data)
    target = acoustics.read_stl_csv(args.target)
    if args.baseline_cmd == "nn":
        sample_id, err = workflows.nearest_training_candidate(data, target)
        result = {"baseline": "nearest_training", "sample_id": sample_id, "mse": err}
    else:
        model = apnn.Apnn.load(args.checkpoint)
        result = {"baseline": "apnn", **workflows.apnn_baseline(model, data, target)}
    text = json.dumps(result, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_evaluate(args) -> int:
    grid = _grid(args.grid)
    if args.eval_cmd == "analytical":
        geom = _parse_params(args.params)
        curve = acoustics.unit_stl(geom, grid)
    else:
        section = raster.read_pgm(args.image)
        curve, _ = fdfd.stl_curve(section, grid, pitch_mm=args.pitch)
    _emit_curve(curve, args.out)
    return 0


def _cmd_parameterize(args) -> int:
    report = workflows.load_report(args.run)
    workflows.parameterized_variant(report)
    workflows.write_report(report, args.run)
    entry = report.baselines["parameterized"]
    print(f"parameterized {entry['n_detected']} candidates "
          f"({entry['n_failed']} detection failures); "
          f"variance hz2: non-param {report.summary.get('peak_variance_hz2')}, "
          f"param {entry['peak_variance_hz2']}")
    return 0


def _cmd_compose(args) -> int:
    grid = _grid(args.grid)
    if args.units:
        units = []
        with open(args.units) as fh:
            header = fh.readline().strip().split(",")
            if header != list(acoustics.PARAM_NAMES):
                raise ValueError(
                    f"units CSV header must be {','.join(acoustics.PARAM_NAMES)}")
            for line in fh:
                if line.strip():
                    units.append(VarGeometry(*[float(v) for v in line.split(",")]))
        result = workflows.compose_units(units, grid, strategy=args.strategy)
        config = {"command": "compose", "units": len(units), "strategy": args.strategy}
        seed = 0
    else:
        peaks = [float(p) for p in args.peaks.split(",")]
        result = workflows.broadband_design(peaks, seed=args.seed, grid=grid)
        config = {"command": "compose", "peaks": peaks, "seed": args.seed}
        seed = args.seed
    out = Path(args.out) if args.out else _default_run_dir("compose", config)
    out.mkdir(parents=True, exist_ok=True)
    acoustics.write_stl_csv(result["combined"], out / "combined.csv")
    outputs = ["combined.csv", "compose.json", "units.csv"]
    for i, solo in enumerate(result["solos"]):
        acoustics.write_stl_csv(solo, out / f"solo_{i}.csv")
        outputs.append(f"solo_{i}.csv")
    with open(out / "units.csv", "w") as fh:
        fh.write(",".join(acoustics.PARAM_NAMES) + "\n")
        for unit in result["units"]:
            fh.write(",".join(f"{v:.17g}" for v in unit.as_array()) + "\n")
    records = [{"solo_peak_hz": r["solo_peak_hz"], "solo_peak_bin": r["solo_peak_bin"],
                "preserved": r["preserved"]} for r in result["records"]]
    (out / "compose.json").write_text(json.dumps(
        {"header": workflows.reproducibility_header(seed, config),
         "records": records}, indent=1, sort_keys=True))
    _write_run_header(out, "compose", seed, config, outputs)
    preserved = sum(r["preserved"] for r in records)
    print(f"composed {len(records)} units; {preserved}/{len(records)} solo peaks "
          f"preserved within 1 bin; report in {out}")
    return 0


def _cmd_report(args) -> int:
    report = workflows.load_report(args.run)
    s = report.summary
    print(f"target: {report.target_label} (peak {s['target_peak_hz']:.9g} Hz)")
    print(f"candidates: {s['n_evaluated']} evaluated, {s['n_excluded']} excluded")
    print(f"best: candidate {report.best_index} mse {s['best_mse']:.6g} "
          f"peak {s['best_peak_hz']:.9g} Hz")
    print(f"mean mse: {s['mean_mse']:.6g}; peak variance {s['peak_variance_hz2']:.6g} Hz^2"
          f" ({s['peak_variance_bin2']:.6g} bin^2)")
    for name, row in sorted(report.baselines.items()):
        print(f"baseline {name}: " + ", ".join(
            f"{k}={v}" for k, v in sorted(row.items()) if not isinstance(v, dict)))
    if args.verify:
        best = report.best()
        curve, _ = fdfd.stl_curve(best.section, report.target.grid)
        err = workflows.mse(report.target.values, curve.values)
        drift = abs(err - best.mse) / max(best.mse, 1e-12)
        if drift > 1e-6:
            raise RuntimeError(
                f"best-candidate re-evaluation drifted: stored mse {best.mse:.9g}, "
                f"recomputed {err:.9g}")
        print(f"verified: best-candidate mse reproduces ({err:.9g})")
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vardesign",
        description="Inverse design of ventilated acoustic resonators")
    sub = parser.add_subparsers(dest="command", required=True)

    p_data = sub.add_parser("dataset", help="generate or split datasets")
    data_sub = p_data.add_subparsers(dest="dataset_cmd", required=True)
    p_gen = data_sub.add_parser("gen", help="generate a dataset directory")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--count", type=int, default=4000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--fraction", type=float, default=0.7)
    p_gen.set_defaults(func=_cmd_dataset)
    p_split = data_sub.add_parser("split", help="write the train/test id table")
    p_split.add_argument("--data", required=True)
    p_split.add_argument("--fraction", type=float, default=None)
    p_split.add_argument("--seed", type=int, default=None)
    p_split.add_argument("--out", default=None)
    p_split.set_defaults(func=_cmd_dataset)

    p_train = sub.add_parser("train", help="train a model")
    p_train.add_argument("model", choices=("arvae", "apnn"))
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config", default=None, help="JSON config (default: desk)")
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--dtype", choices=("float32", "float64"), default=None)
    p_train.set_defaults(func=_cmd_train)

    p_inv = sub.add_parser("invert", help="inverse-design candidates for a target")
    p_inv.add_argument("--target", required=True, help="target curve CSV")
    p_inv.add_argument("--checkpoint", required=True)
    p_inv.add_argument("--data", required=True)
    p_inv.add_argument("--out", default=None)
    p_inv.add_argument("--n", type=int, default=None)
    p_inv.add_argument("--seed", type=int, default=0)
    p_inv.add_argument("--apnn", default=None, help="APNN checkpoint for baseline row")
    p_inv.add_argument("--parameterize", action="store_true")
    p_inv.add_argument("--config", default=None)
    p_inv.set_defaults(func=_cmd_invert)

    p_base = sub.add_parser("baseline", help="baseline answers for a target")
    base_sub = p_base.add_subparsers(dest="baseline_cmd", required=True)
    p_nn = base_sub.add_parser("nn", help="nearest training sample")
    p_nn.add_argument("--target", required=True)
    p_nn.add_argument("--data", required=True)
    p_nn.add_argument("--out", default=None)
    p_nn.set_defaults(func=_cmd_baseline)
    p_ap = base_sub.add_parser("apnn", help="APNN parameter prediction")
    p_ap.add_argument("--target", required=True)
    p_ap.add_argument("--data", required=True)
    p_ap.add_argument("--checkpoint", required=True)
    p_ap.add_argument("--out", default=None)
    p_ap.set_defaults(func=_cmd_baseline)

    p_eval = sub.add_parser("evaluate", help="compute an STL curve")
    eval_sub = p_eval.add_subparsers(dest="eval_cmd", required=True)
    p_an = eval_sub.add_parser("analytical", help="closed-form curve for parameters")
    p_an.add_argument("--params", required=True, help="R,l_a,l_b,R_n,R_c in mm")
    p_an.add_argument("--grid", default="default")
    p_an.add_argument("--out", default=None)
    p_an.set_defaults(func=_cmd_evaluate)
    p_fd = eval_sub.add_parser("fdfd", help="field-solver curve for an image")
    p_fd.add_argument("--image", required=True, help="PGM cross-section")
    p_fd.add_argument("--grid", default="default")
    p_fd.add_argument("--pitch", type=float, default=raster.PITCH_MM)
    p_fd.add_argument("--out", default=None)
    p_fd.set_defaults(func=_cmd_evaluate)

    p_par = sub.add_parser("parameterize", help="add parameterized columns to a run")
    p_par.add_argument("--run", required=True)
    p_par.set_defaults(func=_cmd_parameterize)

    p_comp = sub.add_parser("compose", help="multi-cavity broadband design")
    p_comp.add_argument("--peaks", default=None, help="comma list of peak Hz")
    p_comp.add_argument("--units", default=None, help="CSV of unit parameters")
    p_comp.add_argument("--strategy", choices=("strict", "common"), default="strict")
    p_comp.add_argument("--seed", type=int, default=0)
    p_comp.add_argument("--grid", default="default")
    p_comp.add_argument("--out", default=None)
    p_comp.set_defaults(func=_cmd_compose)

    p_rep = sub.add_parser("report", help="summarize a run directory")
    p_rep.add_argument("--run", required=True)
    p_rep.add_argument("--verify", action="store_true")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compose" and not (args.peaks or args.units):
        parser.error("compose needs --peaks or --units")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError,
            ArithmeticError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
