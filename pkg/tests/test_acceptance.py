"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. The desk-scale
convergence criterion trains three seeds for 2000 iterations and dominates
the runtime (minutes). Criteria that require the canonical MNIST files
(7, 8, 11) run against them when available (CONVAE_MNIST_DIR or
data/mnist); otherwise 11 skips with the reason and 7 falls back to the
bundled deterministic digit corpus so the engine property is still proven.
"""

import math
import os
from contextlib import contextmanager

import numpy as np
import pytest

import convae
from convae import (
    LossSpec,
    SolverConfig,
    Tensor,
    combined_backward,
    conv_backward,
    conv_forward,
    deconv_backward,
    deconv_forward,
    dot,
    evaluate,
    fc_backward,
    fc_forward,
    load_idx,
    parse_netspec,
    sigmoid_backward,
    sigmoid_forward,
    train,
    zeros,
)
from convae.cli import main as cli_main
from convae.data import DatasetHandle
from convae.inspector import nearest_centroid_accuracy
from convae.layers import ParamBlock
from convae.nets import net_path, solver_path
from convae.network import Network, init_params
from convae.solver import parse_solver_config, smoothed_total

from corpus import find_mnist, make_digit_images
from gradcheck import finite_difference, max_rel_error

MODEL1 = str(net_path("model1"))
MODEL2 = str(net_path("model2"))


@contextmanager
def criterion(number, label):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:>2} ({label}): FAIL")
        raise
    print(f"ACCEPTANCE {number:>2} ({label}): PASS")


def _audit_output(capsys, path, *extra):
    code = cli_main(["audit", path, *extra])
    out = capsys.readouterr().out
    assert code == 0
    return out


def test_01_parameter_count_oracle(capsys):
    with criterion(1, "parameter-count oracle, exact per layer"):
        out1 = _audit_output(capsys, MODEL1)
        assert "encoder total  37355" in out1
        assert "decoder total  37538" in out1
        assert "grand total    74893" in out1
        for name, w, b in [("conv1", 324, 4), ("conv2", 648, 2), ("ip1encode", 36000, 125),
                           ("ip2encode", 250, 2), ("ip1decode", 250, 125), ("deconv2", 36000, 2),
                           ("deconv1", 1156, 2), ("deconv1neur", 2, 1)]:
            row = next(l for l in out1.splitlines() if l.startswith(name + " "))
            assert row.split()[-2:] == [str(w), str(b)], row
        out2 = _audit_output(capsys, MODEL2)
        assert "encoder total  148004" in out2
        assert "decoder total  149387" in out2
        assert "grand total    297391" in out2
        for name, w, b in [("conv1", 648, 8), ("conv2", 2592, 4), ("ip1encode", 144000, 250),
                           ("ip2encode", 500, 2), ("ip1decode", 500, 250), ("deconv2", 144000, 4),
                           ("deconv1", 4624, 4), ("deconv1neur", 4, 1)]:
            row = next(l for l in out2.splitlines() if l.startswith(name + " "))
            assert row.split()[-2:] == [str(w), str(b)], row


def test_02_cae_size_oracle(capsys):
    with criterion(2, "hidden-element size oracle 3996/7990"):
        assert "cae size       3996" in _audit_output(capsys, MODEL1)
        assert "cae size       7990" in _audit_output(capsys, MODEL2)


def test_03_shape_chain(model1_net, model2_net):
    with criterion(3, "forward shape chain on 28x28 input"):
        for net, fm1, fm2, hid in ((model1_net, 4, 2, 125), (model2_net, 8, 4, 250)):
            params = init_params(net, np.random.default_rng(0))
            network = Network(net, params)
            shapes = {node.name: out.shape for node, out in network.forward(zeros((1, 1, 28, 28)))}
            assert shapes["conv1"] == (1, fm1, 20, 20)
            assert shapes["conv2"] == (1, fm2, 12, 12)
            assert shapes["ip1encode"] == (1, hid, 1, 1)
            assert shapes["ip2encode"] == (1, 2, 1, 1)
            assert shapes["ip1decode"] == (1, hid, 1, 1)
            assert shapes["deconv2"] == (1, fm2, 12, 12)
            assert shapes["deconv1"] == (1, fm2, 28, 28)
            assert shapes["deconv1neur"] == (1, 1, 28, 28)


def _layer_case(kind, rng):
    n, c, o = (int(v) for v in rng.integers(1, 4, 3))
    k = int(rng.integers(1, 4))
    h = int(rng.integers(k, 6))
    wd = int(rng.integers(k, 6))
    x = Tensor(rng.uniform(-1, 1, (n, c, h, wd)))
    shape = {"conv": (o, c, k, k), "deconv": (c, o, k, k), "fc": (o, c * h * wd, 1, 1)}[kind]
    p = ParamBlock("g", kind, Tensor(rng.uniform(-1, 1, shape)), rng.uniform(-1, 1, o))
    return x, p


def test_04_gradient_suite():
    with criterion(4, "finite-difference gradient suite, rel err <= 1e-5"):
        rng = np.random.default_rng(44)
        worst = 0.0
        ops = {"conv": (conv_forward, conv_backward),
               "deconv": (deconv_forward, deconv_backward),
               "fc": (fc_forward, fc_backward)}
        for kind, (fwd, bwd) in ops.items():
            for _ in range(20):
                x, p = _layer_case(kind, rng)

                def probe():
                    return 0.5 * float((fwd(x, p).data ** 2).sum())

                y = fwd(x, p)
                p.clear_grads()
                dx = bwd(x, p, y)
                worst = max(worst, max_rel_error(dx.data, finite_difference(probe, x.data)))
                worst = max(worst, max_rel_error(p.weight_grad.data,
                                                 finite_difference(probe, p.weights.data)))
                worst = max(worst, max_rel_error(p.bias_grad, finite_difference(probe, p.biases)))
        for _ in range(20):  # sigmoid
            x = Tensor(rng.uniform(-3, 3, tuple(int(v) for v in rng.integers(1, 5, 4))))

            def probe():
                return 0.5 * float((sigmoid_forward(x).data ** 2).sum())

            y = sigmoid_forward(x)
            dx = sigmoid_backward(y, y)
            worst = max(worst, max_rel_error(dx.data, finite_difference(probe, x.data)))
        specs_by_name = {
            "sce": [LossSpec("l", "sigmoid_cross_entropy", "out")],
            "euclidean": [LossSpec("l", "euclidean", "out", apply_sigmoid_to_pred=True)],
            "combined": [LossSpec("a", "sigmoid_cross_entropy", "out"),
                         LossSpec("b", "euclidean", "out", apply_sigmoid_to_pred=True)],
        }
        for specs in specs_by_name.values():
            for _ in range(20):
                x = Tensor(rng.uniform(-2, 2, (1, 1, 3, 3)))
                t = Tensor(rng.uniform(0, 1, (1, 1, 3, 3)))

                def probe():
                    return combined_backward(x, t, specs)[0]

                _, _, grad = combined_backward(x, t, specs)
                worst = max(worst, max_rel_error(grad.data, finite_difference(probe, x.data)))
        print(f"  worst relative error: {worst:.3g}")
        assert worst <= 1e-5


def test_05_adjointness():
    with criterion(5, "conv/deconv inner-product identity <= 1e-12"):
        rng = np.random.default_rng(55)
        worst = 0.0
        for _ in range(50):
            n, c, o = (int(v) for v in rng.integers(1, 4, 3))
            k = int(rng.integers(1, 5))
            h = int(rng.integers(k, 7))
            wd = int(rng.integers(k, 7))
            x = Tensor(rng.uniform(-1, 1, (n, c, h, wd)))
            w = rng.uniform(-1, 1, (o, c, k, k))
            conv_p = ParamBlock("c", "conv", Tensor(w), np.zeros(o))
            deconv_p = ParamBlock("d", "deconv", Tensor(w), np.zeros(c))
            y = Tensor(rng.uniform(-1, 1, (n, o, h - k + 1, wd - k + 1)))
            worst = max(worst, abs(dot(conv_forward(x, conv_p), y)
                                   - dot(x, deconv_forward(y, deconv_p))))
        print(f"  worst identity gap: {worst:.3g}")
        assert worst <= 1e-12


def test_06_data_ratio_lines(capsys, model1_net):
    with criterion(6, "data/(w+b) ratio rendering 81/1 and 17/1"):
        report = convae.count_params(model1_net)
        report.grand_total = 584254
        assert convae.data_ratio(47_040_000, report) == "81/1"
        report.grand_total = 2_822_504
        assert convae.data_ratio(47_040_000, report) == "17/1"


# --- desk-scale training (shared by criteria 7 and the proxy metric) --------

_DESK_CACHE = {}


def _desk_data():
    """(train 10000, held-out 1000) from MNIST when available, else the
    deterministic digit corpus."""
    if "data" in _DESK_CACHE:
        return _DESK_CACHE["data"]
    found = find_mnist()
    if found is not None:
        train_handle = load_idx(found["train_images"], found["train_labels"], split="train").subset(10000)
        test_handle = load_idx(found["test_images"], found["test_labels"], split="test").subset(1000)
        source = "canonical MNIST"
    else:
        images, labels = make_digit_images(11000, seed=777)
        pixels = images.astype(np.float64) / 255.0
        train_handle = DatasetHandle(Tensor(pixels[:10000, None]), labels[:10000].astype(np.int64))
        test_handle = DatasetHandle(Tensor(pixels[10000:, None]), labels[10000:].astype(np.int64),
                                    split="test")
        source = "bundled synthetic digit corpus (canonical MNIST not present)"
    _DESK_CACHE["data"] = (train_handle, test_handle, source)
    return _DESK_CACHE["data"]


def _desk_run(seed):
    key = ("run", seed)
    if key not in _DESK_CACHE:
        train_handle, test_handle, _ = _desk_data()
        net = parse_netspec(net_path("model1").read_text())
        cfg = parse_solver_config(
            solver_path("cae_fixed").read_text(),
            {"max_iter": 2000, "seed": seed, "test_interval": 2000, "snapshot_interval": 2000},
        )
        state = train(net, train_handle, cfg, test_data=test_handle)
        network = Network(net, state.params)
        _DESK_CACHE[key] = (state, network)
    return _DESK_CACHE[key]


def _zero_baseline_sce(test_handle):
    net = parse_netspec(net_path("model1").read_text())
    params = init_params(net, np.random.default_rng(0))
    for block in params.values():
        block.weights.data[...] = 0.0
        block.biases[...] = 0.0
    sce, _ = evaluate(Network(net, params), test_handle)
    return sce


@pytest.mark.slow
def test_07_desk_scale_convergence():
    train_handle, test_handle, source = _desk_data()
    print(f"  corpus: {source}")
    with criterion(7, "desk-scale convergence and seed stability"):
        runs = []
        for seed in (1, 2, 3):
            state, network = _desk_run(seed)
            early = smoothed_total(state.history, 100)
            mid = smoothed_total(state.history, 1000)
            late = smoothed_total(state.history, 2000)
            print(f"  seed {seed}: smoothed total {early:.2f} @100 -> {mid:.2f} @1000 "
                  f"-> {late:.2f} @2000 ({late / early:.1%})")
            runs.append((seed, early, mid, late))
        for seed, early, mid, late in runs:
            assert mid < early, f"seed {seed}: no downward trend by iteration 1000"
            assert late < 0.60 * early, f"seed {seed}: {late:.2f} not below 60% of {early:.2f}"
        finals = [late for _, _, _, late in runs]
        mean = sum(finals) / len(finals)
        for seed, final in zip((1, 2, 3), finals):
            assert abs(final - mean) <= 0.15 * mean, (
                f"seed {seed} final {final:.2f} outside +-15% of mean {mean:.2f}"
            )
        baseline = _zero_baseline_sce(test_handle)
        assert abs(baseline - 784 * math.log(2.0)) < 1e-9
        state, network = _desk_run(1)
        test_sce, test_eu = evaluate(network, test_handle)
        print(f"  held-out sce {test_sce:.2f} vs zero-weight baseline {baseline:.2f}")
        assert test_sce < baseline
        # informational proxy metric (not part of the criterion)
        codes = network.latent_codes(Tensor(test_handle.images.data)).data.reshape(-1, network.latent_width)
        acc = nearest_centroid_accuracy(codes, test_handle.labels)
        print(f"  latent nearest-centroid accuracy (informational): {acc:.1%}")


@pytest.mark.slow
def test_08_full_regime_logged_not_asserted():
    if os.environ.get("CONVAE_FULL_RUN") != "1":
        pytest.skip("full 60000x20000 regime only runs with CONVAE_FULL_RUN=1 (logged, not gating)")
    found = find_mnist()
    if found is None:
        pytest.skip("canonical MNIST required for the full regime")
    with criterion(8, "full-scale run (logged only)"):
        train_handle = load_idx(found["train_images"], found["train_labels"], split="train")
        test_handle = load_idx(found["test_images"], found["test_labels"], split="test")
        net = parse_netspec(net_path("model1").read_text())
        cfg = parse_solver_config(solver_path("cae_fixed").read_text(), {"seed": 1})
        state = train(net, train_handle, cfg, test_data=test_handle)
        sce, eu = evaluate(Network(net, state.params), test_handle)
        print(f"  full-regime test losses: sce={sce:.2f} euclidean={eu:.2f} (target <= 170, logged)")


def test_09_saturation_watchdog(tmp_path, train_handle):
    with criterion(9, "x100 deconv weights trip the saturation abort"):
        from convae.errors import SaturationAbort
        from convae.solver import _check_batch_saturation, _dump_minmax, lr_at, sgd_step
        from convae.data import batches

        net = parse_netspec(net_path("model1").read_text())
        cfg = SolverConfig(base_lr=0.006, weight_decay=0.0005, max_iter=50, batch_size=100, seed=3)
        params = init_params(net, np.random.default_rng(cfg.seed))
        for name in ("deconv2", "deconv1", "deconv1neur"):
            params[name].weights.data *= 100.0
        network = Network(net, params)
        stream = batches(train_handle, cfg.batch_size, cfg.seed)
        report = tmp_path / "saturation_report.txt"
        aborted = None
        for it in range(cfg.max_iter):
            batch, target = next(stream)
            total, values, trace = network.forward_backward(batch, target)
            logits = trace[-1][1]
            try:
                if not math.isfinite(total):
                    raise SaturationAbort("loss", "non-finite loss")
                _check_batch_saturation(trace, logits)
                sgd_step(params, cfg, lr_at(cfg, it))
            except SaturationAbort as abort:
                _dump_minmax(trace, logits, report, str(abort))
                aborted = abort
                break
        assert aborted is not None, "watchdog did not trigger within 50 iterations"
        text = report.read_text()
        deconv_lines = [l for l in text.splitlines() if l.strip().startswith("deconv")]
        assert any("saturated" in l for l in deconv_lines), text
        print(f"  aborted at iteration {it}: {aborted}")


def test_10_determinism(tmp_path, corpus_paths):
    with criterion(10, "identical manifests give bitwise-identical outputs"):
        args = lambda out: [
            "train", "--net", MODEL1, "--solver", str(solver_path("cae_fixed")),
            "--train-images", str(corpus_paths["train_images"]),
            "--train-labels", str(corpus_paths["train_labels"]),
            "--max-samples", "200", "--max-iter", "30", "--seed", "9",
            "--out", str(out),
        ]
        assert cli_main(args(tmp_path / "a")) == 0
        assert cli_main(args(tmp_path / "b")) == 0
        ck_a = (tmp_path / "a" / "checkpoint_final.caef").read_bytes()
        ck_b = (tmp_path / "b" / "checkpoint_final.caef").read_bytes()
        assert ck_a == ck_b
        assert (tmp_path / "a" / "loss_history.csv").read_bytes() == \
            (tmp_path / "b" / "loss_history.csv").read_bytes()
        assert (tmp_path / "a" / "manifest.txt").read_text().replace(str(tmp_path / "a"), "") == \
            (tmp_path / "b" / "manifest.txt").read_text().replace(str(tmp_path / "b"), "")


def test_11_mnist_ingestion_round_trip(mnist_paths):
    with criterion(11, "canonical MNIST ingestion round-trip"):
        import gzip

        train_handle = load_idx(mnist_paths["train_images"], mnist_paths["train_labels"], split="train")
        test_handle = load_idx(mnist_paths["test_images"], mnist_paths["test_labels"], split="test")
        assert train_handle.count == 60000
        assert test_handle.count == 10000
        raw = mnist_paths["train_images"].read_bytes()
        if raw[:2] == b"\x1f\x8b":
            raw = gzip.decompress(raw)
        source_pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
        rebuilt = np.round(train_handle.images.data * 255.0).astype(np.uint8).ravel()
        assert np.array_equal(rebuilt, source_pixels)
