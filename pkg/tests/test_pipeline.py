import json

import numpy as np
import pytest

from conftest import TOY_DIR, random_binary
from netdisrupt import NetworkValidationError, make_network, spectrum, symmetrize_bipartite
from netdisrupt.cli import main
from netdisrupt.netmat import write_dense_csv
from netdisrupt.pipeline import (build_did_outcome, config_from_dict, load_config, run_report, silverman_kde,
                                 subset_by_group)

ATTRS = {"a": {"risk": "H"}, "b": {"risk": "H"}, "c": {"risk": "L"}, "d": {"risk": "L"}, "e": {"risk": "H"}}


def _net5(rng):
    net = random_binary(rng, 5, 0.5)
    return make_network(net.values, labels=list("abcde"))


# ---------------------------------------------------------------- DiD

def test_did_identical_is_zero(rng):
    net = _net5(rng)
    assert not build_did_outcome(net, net).values.any()


def test_did_single_new_link():
    pre = make_network(np.zeros((3, 3)), labels=["x", "y", "z"])
    post_vals = np.zeros((3, 3))
    post_vals[0, 2] = post_vals[2, 0] = 1
    post = make_network(post_vals, labels=["x", "y", "z"])
    did = build_did_outcome(post, pre)
    assert did.values[0, 2] == 1 and did.values.sum() == 2


def test_did_aligns_labels(rng):
    post = _net5(rng)
    pre = post.permuted([4, 3, 2, 1, 0])
    assert not build_did_outcome(post, pre).values.any()


def test_did_label_mismatch():
    a = make_network(np.zeros((2, 2)), labels=["p", "q"])
    b = make_network(np.zeros((2, 2)), labels=["p", "r"])
    with pytest.raises(NetworkValidationError, match="q"):
        build_did_outcome(a, b)


def test_did_binary_support(rng):
    a, b = _net5(rng), _net5(rng)
    assert set(build_did_outcome(a, b).support()) <= {-1.0, 0.0, 1.0}


# ---------------------------------------------------------------- subgroups

def test_subset_all(rng):
    net = _net5(rng)
    assert subset_by_group(net, ATTRS, "all") is net


def test_subset_induced(rng):
    net = _net5(rng)
    hh = subset_by_group(net, ATTRS, "risk=H")
    assert hh.labels == ("a", "b", "e")
    np.testing.assert_array_equal(hh.values, net.values[np.ix_([0, 1, 4], [0, 1, 4])])
    both = subset_by_group(net, ATTRS, "risk=H|L")
    np.testing.assert_array_equal(both.values, net.values)


def test_subset_cross_group_is_bipartite(rng):
    net = _net5(rng)
    hl = subset_by_group(net, ATTRS, "risk=H x risk=L")
    assert hl.n == 5 and hl.has_mask
    B = net.values[np.ix_([0, 1, 4], [2, 3])]
    ref = symmetrize_bipartite(["a", "b", "e"], ["c", "d"], B)
    np.testing.assert_allclose(spectrum(hl).eigenvalues, spectrum(ref).eigenvalues)


def test_subset_empty_and_missing(rng):
    net = _net5(rng)
    with pytest.raises(NetworkValidationError):
        subset_by_group(net, ATTRS, "risk=Z")
    with pytest.raises(NetworkValidationError):
        subset_by_group(net, ATTRS, "caste=1")


# ---------------------------------------------------------------- config and report

def test_config_validation(tmp_path):
    with pytest.raises(NetworkValidationError):
        config_from_dict({"arm1": {"path": "nope.csv"}, "arm0": {"path": "nope.csv"}}, tmp_path)
    with pytest.raises(NetworkValidationError):
        config_from_dict({"arm1": {"path": str(TOY_DIR / "line.csv")}}, tmp_path)
    with pytest.raises(NetworkValidationError, match="pre_path"):
        config_from_dict({"arm1": {"path": str(TOY_DIR / "line.csv")}, "arm0": {"path": str(TOY_DIR / "star.csv")},
                          "outcome": "did"}, tmp_path)
    with pytest.raises(NetworkValidationError, match="unknown"):
        config_from_dict({"arm1": {"path": str(TOY_DIR / "line.csv")}, "arm0": {"path": str(TOY_DIR / "star.csv")},
                          "colour": 1}, tmp_path)


def test_toy_report_contents(tmp_path):
    cfg = load_config(TOY_DIR / "toy.yaml")
    run_report(cfg, tmp_path)
    summary = json.loads((tmp_path / "summary_all.json").read_text())
    assert summary["oracle"]["destroyed"]["values"] == [3.0, 4.0]
    fh = summary["binary_disruption"]["frechet_hoeffding"]["destroyed_pairs"]
    assert fh["lower"] == 0 and fh["upper"] == pytest.approx(5)
    eig = summary["binary_disruption"]["eigenvalue"]["destroyed_pairs"]
    red = summary["binary_disruption"]["reduction"]["destroyed_pairs"]
    assert eig["lower"] <= red["lower"] <= 3 and 4 <= red["upper"] <= eig["upper"]
    assert summary["mean_difference"] == 0
    assert summary["disruption_lower_bound"] > 0
    ste = json.loads((tmp_path / "ste_all.json").read_text())
    assert len(ste["treated"]["kde"]["points"]) == 512
    assert (tmp_path / "cells_all.csv").read_text().startswith("y1,")


def test_report_determinism_and_manifest_rerun(tmp_path):
    cfg = load_config(TOY_DIR / "toy.yaml")
    run_report(cfg, tmp_path / "a")
    run_report(load_config(TOY_DIR / "toy.yaml"), tmp_path / "b")
    assert main(["report", "--manifest", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "c")]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        assert f.read_bytes() == (tmp_path / "c" / f.name).read_bytes()


def test_did_report_with_subgroups(tmp_path, rng):
    labels = list("abcdefgh")
    (tmp_path / "labels.csv").write_text("label\n" + "\n".join(labels) + "\n")
    (tmp_path / "attrs.csv").write_text("label,risk\n" + "\n".join(f"{l},{'H' if i < 4 else 'L'}"
                                                                   for i, l in enumerate(labels)) + "\n")
    for name in ("t_pre", "t_post", "c_pre", "c_post"):
        write_dense_csv(tmp_path / f"{name}.csv", random_binary(rng, 8, 0.4).values)
    cfg = {"arm1": {"path": "t_post.csv", "pre_path": "t_pre.csv", "format": "dense_csv", "labels": "labels.csv"},
           "arm0": {"path": "c_post.csv", "pre_path": "c_pre.csv", "format": "dense_csv", "labels": "labels.csv"},
           "outcome": "did", "attributes": "attrs.csv", "denoise": "auto", "adjust": "reduction",
           "subgroups": [{"name": "full", "expr": "all"}, {"name": "HH", "expr": "risk=H"},
                         {"name": "HL", "expr": "risk=H x risk=L"}]}
    manifest = run_report(config_from_dict(cfg, tmp_path), tmp_path / "out")
    assert "cells_HL.csv" in manifest["files"]
    header = (tmp_path / "out" / "cells_full.csv").read_text().splitlines()[0]
    assert header.startswith("y1,lower[y0=-1]")


def test_report_stage_tagging(tmp_path):
    (tmp_path / "bad.csv").write_text("0,1\n0,0\n")
    cfg = config_from_dict({"arm1": {"path": "bad.csv", "format": "dense_csv"},
                            "arm0": {"path": "bad.csv", "format": "dense_csv"}}, tmp_path)
    with pytest.raises(NetworkValidationError, match=r"\[ingest\]"):
        run_report(cfg, tmp_path / "out")


def test_kde():
    rng = np.random.default_rng(3)
    k = silverman_kde(rng.normal(size=2000))
    pts, dens = k["points"], k["density"]
    assert len(pts) == 512
    assert np.trapezoid(dens, pts) == pytest.approx(1.0, abs=1e-3)
    assert silverman_kde(np.zeros(10))["degenerate"]
