"""Command-line interface.

Subcommands: synth, filter, derive-eog, ssvep, train, quantize, infer,
eval, stream-sim. Global flags --seed, --config {eeg_only,combined} and
--fs {500,1000} apply where meaningful. Exit code 0 on success; failures
print one machine-readable JSON error line to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import dsp, eog, framing, metrics, params_io, quantize, recordings, ssvep, streaming, synth
from .errors import ExgError
from .training import TrainConfig, train

__all__ = ["main", "build_parser"]


def _parse_floats(text: str) -> list:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _spec_from_args(args) -> synth.SynthSpec:
    return synth.SynthSpec(
        sample_rate=float(args.fs),
        trial_duration=args.duration,
        amplitude_uv=args.amplitude_uv,
        noise_sd_uv=args.noise_uv,
        drift_uvps=args.drift_uvps,
        mains_amp_uv=args.mains_uv,
        latency_jitter_ms=args.jitter_ms,
        walk_amp_uv=args.walk_uv,
        seed=args.seed,
    )


def _cmd_synth(args) -> int:
    spec = _spec_from_args(args)
    if args.kind == "eog-session":
        record, labels = synth.gen_eog_session(
            spec, args.trials_per_class, combined=(args.config == "combined")
        )
        recordings.write_recording(args.out, record)
        if args.labels_out:
            recordings.write_labels(args.labels_out, labels)
        print(f"wrote {record.n_channels}x{record.n_samples} recording to {args.out}")
    elif args.kind == "alpha":
        schedule = []
        for token in args.schedule.split(","):
            state, dur = token.split(":")
            state = {"open": "eyes_open", "closed": "eyes_closed"}.get(state, state)
            schedule.append((state, float(dur)))
        record = synth.gen_alpha_eeg(spec, schedule)
        recordings.write_recording(args.out, record)
        print(f"wrote {record.n_channels}x{record.n_samples} recording to {args.out}")
    elif args.kind == "ssvep":
        record = synth.gen_ssvep(spec, args.freq, n_harmonics=args.harmonics, snr=args.snr)
        recordings.write_recording(args.out, record)
        print(f"wrote {record.n_channels}x{record.n_samples} recording to {args.out}")
    else:
        raise ExgError(f"unknown synth kind {args.kind!r}")
    return 0


def _cmd_filter(args) -> int:
    record = recordings.read_recording(args.infile)
    if args.design == "butterworth":
        cutoffs = [args.cutoff] if args.cutoff2 is None else [args.cutoff, args.cutoff2]
        cascade = dsp.design_butterworth(args.order, args.kind, cutoffs, record.sample_rate)
    else:
        cascade = dsp.design_notch(args.f0, args.q, record.sample_rate)
    out = dsp.apply_filter(cascade, record, mode="batch")
    recordings.write_recording(args.out, out)
    print(f"filtered {record.n_channels} channels -> {args.out}")
    return 0


def _cmd_derive_eog(args) -> int:
    record = recordings.read_recording(args.infile)
    pair = eog.derive_eog(record)
    if args.preprocess != "none":
        pair = eog.preprocess_eog(pair, chain=args.preprocess)
    recordings.write_recording(args.out, pair.as_record())
    print(f"derived V_H/V_V ({pair.n_samples} samples) -> {args.out}")
    return 0


def _cmd_ssvep(args) -> int:
    record = recordings.read_recording(args.infile)
    freqs = _parse_floats(args.freqs)
    windows = _parse_floats(args.windows)
    rows = []
    for w in windows:
        n = int(round(w * record.sample_rate))
        if n > record.n_samples:
            raise ExgError(f"window of {w} s exceeds the record length")
        scores = {f: [] for f in freqs}
        for lo in range(0, record.n_samples - n + 1, n):
            chunk = record.data[:, lo : lo + n]
            for f in freqs:
                scores[f].append(
                    ssvep.ncca(chunk, f, record.sample_rate, n_harmonics=args.harmonics, delta=args.delta).score
                )
        for f in freqs:
            mean_score = float(np.mean(scores[f]))
            rows.append((f, w, mean_score, mean_score > args.threshold))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "window_s", "mean_score", "detected"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} (freq, window) rows to {args.out}")
    return 0


def _load_epochs(args):
    record = recordings.read_recording(args.infile)
    window = int(round(args.window_s * record.sample_rate))
    labels = recordings.read_labels(args.labels, n_samples=record.n_samples, window=window)
    if args.pipeline == "eog":
        pair = eog.preprocess_eog(eog.derive_eog(record), chain="classification")
        source = pair
    else:
        source = record
    epochs = eog.segment_trials(source, labels, args.window_s)
    x = np.stack([ep.data for ep in epochs])
    y = np.asarray([ep.label.class_id for ep in epochs])
    return x, y, record


def _cmd_train(args) -> int:
    x, y, _ = _load_epochs(args)
    config = TrainConfig(
        lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed
    )
    result = train(x, y, config, pool_height=args.pool_height)
    params_io.save_model(args.model_out, result.params)
    if args.history_out:
        with open(args.history_out, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["epoch", "train_loss", "train_accuracy", "val_accuracy"]
            )
            writer.writeheader()
            writer.writerows(result.history)
    print(
        f"trained on {x.shape[0]} epochs; best val accuracy "
        f"{result.best_val_accuracy * 100:.1f}% at epoch {result.best_epoch}; "
        f"model -> {args.model_out}"
    )
    return 0


def _cmd_quantize(args) -> int:
    model = params_io.load_model(args.model)
    x, _, _ = _load_epochs(args)
    calib = x[: args.calib_count] if args.calib_count else x
    qmodel = quantize.quantize(model, calib)
    params_io.save_model(args.out, qmodel)
    report = quantize.count_macs(qmodel)
    print(f"quantized with {calib.shape[0]} calibration epochs; {report.total} MACs; -> {args.out}")
    return 0


def _cmd_infer(args) -> int:
    model = params_io.load_model(args.model)
    record = recordings.read_recording(args.infile)
    if args.pipeline == "eog":
        pair = eog.preprocess_eog(eog.derive_eog(record), chain="classification")
        stream = pair.as_record()
    else:
        stream = record
    preds = streaming.inference_scheduler(stream, model, args.window_s, hop_ms=args.hop_ms)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "class_id", "class_name"])
        for p in preds:
            name = synth.CLASS_NAMES[p.label_id] if p.label_id < len(synth.CLASS_NAMES) else ""
            writer.writerow([f"{p.time_s:.3f}", p.label_id, name])
    print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    x, y, _ = _load_epochs(args)
    if args.fractions:
        fractions = _parse_floats(args.fractions)
        config = TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
        points = metrics.itr_curve(
            x, y, fractions, args.window_s, config=config, k=args.folds, pool_height=args.pool_height
        )
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fraction", "accuracy", "itr_bit_per_min"])
            for f, pt in zip(fractions, points):
                writer.writerow([f, f"{pt.accuracy:.4f}", f"{pt.itr_bit_per_min:.2f}"])
        print(f"wrote {len(points)} fraction rows to {args.out}")
        return 0
    model = params_io.load_model(args.model)
    from .epidenet import forward as float_forward
    from .quantize import QuantizedModel, q_forward

    predict = q_forward if isinstance(model, QuantizedModel) else float_forward
    preds = []
    for lo in range(0, x.shape[0], 256):
        preds.append(np.argmax(predict(model, x[lo : lo + 256]), axis=1))
    preds = np.concatenate(preds)
    names = synth.CLASS_NAMES if int(y.max()) + 1 == synth.NUM_CLASSES else None
    cm = metrics.confusion(preds, y, class_names=names)
    report = metrics.metrics(cm, positive_class=1 if cm.counts.shape[0] == 2 else None)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth\\pred"] + list(cm.class_names))
        for name, row in zip(cm.class_names, cm.counts):
            writer.writerow([name] + row.tolist())
        writer.writerow([])
        writer.writerow(["metric", "value_percent"])
        writer.writerow(["accuracy", f"{report.accuracy:.2f}"])
        if report.sensitivity is not None:
            writer.writerow(["sensitivity", f"{report.sensitivity:.2f}"])
            writer.writerow(["specificity", f"{report.specificity:.2f}"])
    print(f"accuracy {report.accuracy:.2f}% over {len(y)} epochs; table -> {args.out}")
    return 0


def _cmd_stream_sim(args) -> int:
    afe = framing.AfeConfig(gain=args.gain, sample_rate=float(args.fs))
    if args.mode == "encode":
        record = recordings.read_recording(args.infile)
        frames = framing.stream_sim(
            record, afe, args.frame_len,
            loss_rate=args.loss_rate, jitter_ms=args.jitter_ms, seed=args.seed,
        )
        with open(args.out, "wb") as fh:
            for frame in frames:
                fh.write(framing.encode_frame(frame))
        print(f"wrote {len(frames)} frames to {args.out}")
    else:
        with open(args.infile, "rb") as fh:
            frames = framing.decode_stream(fh.read())
        record, report = framing.reassemble(frames, afe)
        recordings.write_recording(args.out, record)
        print(json.dumps({
            "received_frames": report.received_frames,
            "lost_frames": report.lost_frames,
            "filled_samples": report.filled_samples,
        }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exgkit", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--config", choices=["eeg_only", "combined"], default="combined")
    parser.add_argument("--fs", type=int, choices=[500, 1000], default=500)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate labeled synthetic recordings")
    p.add_argument("--kind", choices=["eog-session", "alpha", "ssvep"], default="eog-session")
    p.add_argument("--trials-per-class", type=int, default=25)
    p.add_argument("--duration", type=float, default=2.0, help="trial or record duration [s]")
    p.add_argument("--amplitude-uv", type=float, default=100.0)
    p.add_argument("--noise-uv", type=float, default=5.0)
    p.add_argument("--drift-uvps", type=float, default=0.0)
    p.add_argument("--mains-uv", type=float, default=0.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--walk-uv", type=float, default=0.0)
    p.add_argument("--schedule", default="open:30,closed:30")
    p.add_argument("--freq", type=float, default=13.5)
    p.add_argument("--harmonics", type=int, default=2)
    p.add_argument("--snr", type=float, default=float("inf"))
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("filter", help="design a filter and run it over a recording")
    p.add_argument("--design", choices=["butterworth", "notch"], default="butterworth")
    p.add_argument("--kind", choices=["lowpass", "highpass", "bandpass"], default="lowpass")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--cutoff", type=float, default=40.0)
    p.add_argument("--cutoff2", type=float, default=None)
    p.add_argument("--f0", type=float, default=50.0)
    p.add_argument("--q", type=float, default=30.0)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("derive-eog", help="derive V_H/V_V from a 3-electrode recording")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preprocess", choices=["none", "validation", "classification"], default="none")
    p.set_defaults(func=_cmd_derive_eog)

    p = sub.add_parser("ssvep", help="frequency detection scores over window sweeps")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--freqs", default="7.5,11.5,13.5,15.5")
    p.add_argument("--windows", default="1,2,3")
    p.add_argument("--harmonics", type=int, default=2)
    p.add_argument("--threshold", type=float, default=ssvep.DEFAULT_THRESHOLD)
    p.add_argument("--delta", type=float, default=ssvep.DEFAULT_SIDE_DELTA_HZ)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ssvep)

    def add_epoch_args(p):
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--labels", required=True)
        p.add_argument("--window-s", type=float, default=2.0)
        p.add_argument("--pipeline", choices=["eog", "raw"], default="eog")

    p = sub.add_parser("train", help="train the CNN on a labeled recording")
    add_epoch_args(p)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--pool-height", type=int, choices=[1, 4], default=1)
    p.add_argument("--model-out", required=True)
    p.add_argument("--history-out")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("quantize", help="post-training INT8 conversion")
    add_epoch_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--calib-count", type=int, default=0, help="0 = use all epochs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("infer", help="sliding-window inference over a recording")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--window-s", type=float, default=2.0)
    p.add_argument("--hop-ms", type=float, default=200.0)
    p.add_argument("--pipeline", choices=["eog", "raw"], default="eog")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="confusion/metrics tables or a fraction sweep")
    add_epoch_args(p)
    p.add_argument("--model")
    p.add_argument("--fractions", help="comma list; triggers the retraining sweep")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--pool-height", type=int, choices=[1, 4], default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stream-sim", help="encode a recording into frames, or decode back")
    p.add_argument("--mode", choices=["encode", "decode"], default="encode")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--frame-len", type=int, default=50)
    p.add_argument("--loss-rate", type=float, default=0.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--gain", type=int, choices=[6, 12], default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stream_sim)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExgError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
