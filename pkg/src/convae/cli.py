"""Command-line interface: audit, train, eval, encode, inspect.

Exit codes: 0 success, 2 description/config/data error, 3 checkpoint
pairing error, 4 numeric abort (saturation/NaN). No environment variables
are consulted for run configuration; every input is an explicit flag.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .checkpoint import apply_checkpoint, load_checkpoint
from .data import load_idx
from .errors import ConfigError, ConvaeError, PairingError, SaturationAbort
from .inspector import LayerTrace, export_latent, render_grid, saturation_report, trace_all
from .layers import sigmoid_forward
from .netspec import count_params, data_ratio, find_latent, infer_shapes, parse_netspec
from .network import Network, init_params
from .solver import evaluate, parse_solver_config, serialize_solver_config, train
from .tensor import Tensor

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_PAIRING = 3
EXIT_NUMERIC = 4


def _load_net(path, latent_sigmoid: bool = False):
    net = parse_netspec(Path(path).read_text())
    if latent_sigmoid:
        # squash the latent code into (0,1); default keeps it linear
        find_latent(net).activation = "sigmoid"
    infer_shapes(net)
    return net


def cmd_audit(args) -> int:
    net = _load_net(args.netspec)
    report = count_params(net)
    print(f"net {report.net_name} ({len(net.layers)} layers)")
    print(f"{'layer':<14} {'kind':<8} {'output':<16} {'weights':>10} {'biases':>8}")
    for (name, w, b), lay in zip(report.per_layer, net.layers):
        shape = "x".join(str(d) for d in net.shape_of(name)[1:])
        print(f"{name:<14} {lay.kind:<8} {shape:<16} {w:>10} {b:>8}")
    print(f"encoder total  {report.encoder_total}")
    print(f"decoder total  {report.decoder_total}")
    print(f"grand total    {report.grand_total}")
    print(f"cae size       {report.cae_size}")
    print(f"latent layer   {report.latent_layer}")
    print(f"symmetric      {'yes' if report.symmetric else 'no'}")
    for note in report.symmetry_notes:
        print(f"  note: {note}")
    if args.data_elements is not None:
        print(f"data ratio     {data_ratio(args.data_elements, report)}")
    return EXIT_OK


def _write_manifest(out_dir: Path, entries: dict) -> None:
    lines = [f"{key}={value}" for key, value in entries.items()]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _guard_outputs(out_dir: Path, names, overwrite: bool) -> None:
    existing = [str(out_dir / n) for n in names if (out_dir / n).exists()]
    if existing and not overwrite:
        raise ConfigError(
            "refusing to overwrite existing outputs (pass --overwrite): " + ", ".join(existing)
        )


def cmd_train(args) -> int:
    net = _load_net(args.net, args.latent_sigmoid)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    cfg = parse_solver_config(Path(args.solver).read_text(), overrides)
    data = load_idx(args.train_images, args.train_labels, split="train")
    if args.max_samples is not None:
        data = data.subset(args.max_samples)
    test_data = None
    if args.test_images and args.test_labels:
        test_data = load_idx(args.test_images, args.test_labels, split="test")
        if args.max_test_samples is not None:
            test_data = test_data.subset(args.max_test_samples)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _guard_outputs(out_dir, ["checkpoint_final.caef", "loss_history.csv"], args.overwrite)
    manifest = {
        "command": "train",
        "net": args.net,
        "net_name": net.name,
        "train_images": args.train_images,
        "train_labels": args.train_labels,
        "test_images": args.test_images or "",
        "test_labels": args.test_labels or "",
        "max_samples": args.max_samples if args.max_samples is not None else "",
        "latent_sigmoid": args.latent_sigmoid,
        "kernel_backend": kernels.backend_name(),
    }
    for line in serialize_solver_config(cfg).strip().splitlines():
        key, _, value = line.partition("=")
        manifest[f"solver.{key}"] = value
    _write_manifest(out_dir, manifest)

    try:
        state = train(net, data, cfg, test_data=test_data, out_dir=out_dir)
    except SaturationAbort as abort:
        print(f"numeric abort: {abort}", file=sys.stderr)
        if abort.report_path is not None:
            print(f"saturation report: {abort.report_path}", file=sys.stderr)
        return EXIT_NUMERIC
    train_rows = [r for r in state.history if r[1] == "train"]
    if train_rows:
        last = train_rows[-1]
        print(f"finished iteration {state.iteration}: sce={last[2]:.6g} euclidean={last[3]:.6g}")
    else:
        print(f"finished iteration {state.iteration} (no updates)")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def _restore_network(netspec_path, checkpoint_path, latent_sigmoid: bool = False) -> Network:
    net = _load_net(netspec_path, latent_sigmoid)
    rng = np.random.default_rng(0)
    params = init_params(net, rng)
    ckpt = load_checkpoint(checkpoint_path)
    apply_checkpoint(ckpt, params, net.name)
    return Network(net, params)


def _manifest_entries(args, command) -> dict:
    entries = {
        "command": command,
        "checkpoint": args.checkpoint,
        "net": args.net,
        "images": args.images,
        "labels": args.labels,
        "split": args.split,
        "latent_sigmoid": args.latent_sigmoid,
        "kernel_backend": kernels.backend_name(),
    }
    return entries


def cmd_eval(args) -> int:
    network = _restore_network(args.net, args.checkpoint, args.latent_sigmoid)
    handle = load_idx(args.images, args.labels, split=args.split)
    if args.max_samples is not None:
        handle = handle.subset(args.max_samples)
    for key, value in _manifest_entries(args, "eval").items():
        print(f"# {key}={value}")
    sce, eu = evaluate(network, handle, args.batch_size)
    print(f"split={args.split} samples={handle.count} sce={sce:.9g} euclidean={eu:.9g}")
    return EXIT_OK


def cmd_encode(args) -> int:
    network = _restore_network(args.net, args.checkpoint, args.latent_sigmoid)
    handle = load_idx(args.images, args.labels, split=args.split)
    if args.max_samples is not None:
        handle = handle.subset(args.max_samples)
    out = Path(args.out)
    if out.exists() and not args.overwrite:
        raise ConfigError(f"refusing to overwrite {out} (pass --overwrite)")
    rows = export_latent(network, handle, out)
    manifest = Path(str(out) + ".manifest.txt")
    manifest.write_text("".join(f"{k}={v}\n" for k, v in _manifest_entries(args, "encode").items()))
    print(f"wrote {rows} latent codes to {out}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    network = _restore_network(args.net, args.checkpoint, args.latent_sigmoid)
    handle = load_idx(args.images, args.labels, split=args.split)
    sample = Tensor(handle.images.data[args.sample:args.sample + 1])
    if sample.shape[0] != 1:
        raise ConfigError(f"sample index {args.sample} outside dataset of {handle.count}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = _manifest_entries(args, "inspect")
    entries["sample"] = args.sample
    _write_manifest(out_dir, entries)
    traces = trace_all(network, sample)
    for i, trace in enumerate(traces):
        render_grid(trace, out_dir, prefix=f"{i + 1:02d}_")
    # the reconstructed image is the sigmoid of the final logits
    recon = sigmoid_forward(traces[-1].output)
    recon_trace = LayerTrace("reconstruction", recon, float(recon.data.min()),
                             float(recon.data.max()), post_activation=True)
    render_grid(recon_trace, out_dir, prefix=f"{len(traces) + 1:02d}_")
    warnings = saturation_report(traces, args.epsilon)
    report = out_dir / "saturation_report.txt"
    report.write_text("".join(w + "\n" for w in warnings) if warnings else "no warnings\n")
    print(f"wrote {len(traces) + 1} trace grids to {out_dir}")
    for w in warnings:
        print(f"warning: {w}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convae",
        description="Convolutional autoencoder training engine: audit, train, eval, encode, inspect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="parse a net description and print the parameter audit")
    p.add_argument("netspec", help="path to a .net description file")
    p.add_argument("--data-elements", type=int, default=None,
                   help="dataset element count for the data/(w+b) ratio line")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("train", help="train a model with SGD")
    p.add_argument("--net", required=True)
    p.add_argument("--solver", required=True, help="flat key=value solver config file")
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the solver seed")
    p.add_argument("--max-iter", type=int, default=None, help="override the solver max_iter")
    p.add_argument("--max-samples", type=int, default=None, help="train on the first N images only")
    p.add_argument("--max-test-samples", type=int, default=None)
    p.add_argument("--latent-sigmoid", action="store_true",
                   help="apply a sigmoid to the latent layer (default: linear codes)")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate both losses on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--max-samples", type=int, default=None)
    p.add_argument("--latent-sigmoid", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("encode", help="export latent codes to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--max-samples", type=int, default=None)
    p.add_argument("--latent-sigmoid", action="store_true")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("inspect", help="dump per-layer traces, PGM grids, and a saturation report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--sample", type=int, default=0, help="sample index to trace")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epsilon", type=float, default=1e-6, help="flatline threshold")
    p.add_argument("--latent-sigmoid", action="store_true")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PairingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PAIRING
    except SaturationAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConvaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
