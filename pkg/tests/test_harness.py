from dataclasses import replace

import numpy as np
import pytest

from sbrnn_imdd.config import parse_config
from sbrnn_imdd.errors import ConfigurationError
from sbrnn_imdd.harness import checkpoint_path, emit, output_stem, run_sweep
from sbrnn_imdd.persistence import read_csv, rows_to_csv

from tiny import TINY_MLSD, TINY_SBRNN


def tiny(text, tmp_path, sub="a", **kw):
    cfg = parse_config(text)
    return replace(cfg, checkpoint_dir=str(tmp_path / sub / "ck"), output_dir=str(tmp_path / sub / "out"), **kw)


@pytest.fixture(scope="module")
def sbrnn_rows(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sweep")
    cfg = tiny(TINY_SBRNN, tmp)
    return cfg, run_sweep(cfg)


def test_empty_distance_list_gives_no_rows(tmp_path):
    assert run_sweep(tiny(TINY_SBRNN, tmp_path, distances=())) == []


def test_missing_checkpoint_without_training_is_an_error(tmp_path):
    with pytest.raises(ConfigurationError, match="--train"):
        run_sweep(tiny(TINY_SBRNN, tmp_path, train_missing=False))


def test_sbrnn_rows_cover_every_variant(sbrnn_rows):
    cfg, rows = sbrnn_rows
    assert len(rows) == 2 * 2 * 2 * 3  # distances x windows x weightings x labelings
    assert {r.eta for r in rows} == {4, 6}
    assert {(r.labeling, r.weights) for r in rows} == {(lab, w) for lab in ("tabu", "gray", "random")
                                                      for w in ("uniform", "optimized")}
    assert all(r.config_hash == cfg.hash() for r in rows)
    assert all(r.flops_tx_pdb == 2 * 4 * (2 * 8 + 1) / 2 for r in rows)


def test_sbrnn_error_rate_invariants(sbrnn_rows):
    _, rows = sbrnn_rows
    for r in rows:
        assert 0 <= r.ber <= r.bler <= 1 or (r.bler == 0 and r.ber == 0)
        assert r.ber >= r.ber_lower_bound - 1e-15
        assert r.ber_lower_bound == pytest.approx(r.bler / 2)


def test_optimized_weights_do_not_increase_representative_cross_entropy(sbrnn_rows):
    _, rows = sbrnn_rows
    for d in (10.0, 30.0):
        for eta in (4, 6):
            pick = {r.weights: r.avg_xent for r in rows if r.distance_km == d and r.eta == eta}
            assert pick["optimized"] <= pick["uniform"]
            weights = [r for r in rows if r.distance_km == d and r.eta == eta and r.weights == "optimized"]
            a = np.array(weights[0].weight_vector.split(), dtype=float)
            assert abs(a.sum() - 1) < 1e-12 and np.all(a >= 0)


def test_checkpoints_and_labelings_written(sbrnn_rows):
    cfg, _ = sbrnn_rows
    for d in cfg.distances:
        assert checkpoint_path(cfg, d).exists()
        assert checkpoint_path(cfg, d).with_suffix(".trace.csv").exists()
    assert len(list(output_stem(cfg).glob("labeling_*km_W*.txt"))) == 4


def test_sweep_is_deterministic_byte_for_byte(sbrnn_rows, tmp_path):
    cfg, rows = sbrnn_rows
    again = run_sweep(replace(cfg, checkpoint_dir=str(tmp_path / "ck2")))  # retrains from scratch
    assert rows_to_csv(again) == rows_to_csv(rows)


def test_mlsd_rows(tmp_path):
    cfg = tiny(TINY_MLSD, tmp_path)
    rows = run_sweep(cfg)
    assert [r.distance_km for r in rows] == [10.0, 30.0]
    for r in rows:
        assert r.system == "pam2_mlsd" and r.eta == 2 and r.memory == 2 and r.labeling == "gray"
        assert 0 <= r.ber <= 1 and r.flops_pdb == 9 * 2**3
    # nu tables are cached and reused
    assert len(list((tmp_path / "a" / "ck").glob("*.nut"))) == 2
    assert rows_to_csv(run_sweep(cfg)) == rows_to_csv(rows)


def test_pam4_uses_its_own_rate_and_memory(tmp_path):
    cfg = tiny(TINY_MLSD, tmp_path, system="pam4_mlsd", distances=(10.0,))
    (r,) = run_sweep(cfg)
    assert r.eta == 4 and r.memory == 2


def test_emit_paths_carry_config_hash(sbrnn_rows, tmp_path):
    cfg, rows = sbrnn_rows
    cfg = replace(cfg, output_dir=str(tmp_path / "emit"))
    paths = emit(cfg, rows, ("csv", "svg"))
    assert all(cfg.hash() in p.name for p in paths)
    assert read_csv(paths[0]) == rows
    other = emit(replace(cfg, seed=cfg.seed + 1), rows)
    assert set(other).isdisjoint(paths)
    with pytest.raises(ConfigurationError):
        emit(cfg, [], ("svg",))
