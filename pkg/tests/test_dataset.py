import json

import numpy as np
import pytest

from kktnet.dataset import (GenConfig, LabeledExample, from_record, generate, read_jsonl, split, stack,
                            to_record, write_jsonl)
from kktnet.errors import GenerationExhausted, MalformedRecord, TooFewExamples, ValidationError
from kktnet.oracle import solve_lp, verify_kkt
from kktnet.problem import ProblemInstance


@pytest.fixture(scope="module")
def small():
    return generate(GenConfig(40, 3))


def same(a, b):
    return (a.instance == b.instance and a.truth == b.truth
            and a.theta == b.theta and a.seed_tag == b.seed_tag)


def test_generation_is_deterministic():
    a, b = generate(GenConfig(5, 42)), generate(GenConfig(5, 42))
    assert all(same(x, y) for x, y in zip(a, b))
    c = generate(GenConfig(5, 43))
    assert not same(a[0], c[0])


def test_prefix_stability():
    # per-example sub-seeds: example i does not depend on count
    a, b = generate(GenConfig(5, 42)), generate(GenConfig(8, 42))
    assert all(same(x, y) for x, y in zip(a, b[:5]))


def test_parallel_matches_serial():
    a, b = generate(GenConfig(13, 1)), generate(GenConfig(13, 1), workers=3)
    assert len(b) == 13 and all(same(x, y) for x, y in zip(a, b))


def test_examples_are_normalized_and_exact(small):
    assert len(small) == 40
    for ex in small:
        blocks = np.concatenate([ex.instance.g_mat.ravel(), ex.instance.h_vec, ex.instance.q_vec])
        assert np.abs(blocks).max() == 1.0
        assert verify_kkt(ex.instance, ex.truth, 1e-8).passed
        assert ex.theta > 0
        np.testing.assert_array_equal(ex.features(), blocks)


def test_truth_matches_fresh_solve(small):
    for ex in small:
        out = solve_lp(ex.instance)
        assert out.point == ex.truth


@pytest.mark.parametrize("kw", [dict(entry_range=0.0), dict(entry_range=-1.0), dict(count=0),
                                dict(max_attempts_per_example=0)])
def test_config_invariants(kw):
    args = dict(count=5, seed=0)
    args.update(kw)
    with pytest.raises(ValidationError):
        GenConfig(**args)


def test_exhaustion_is_reported():
    # roughly a quarter of draws are accepted; one attempt per slot must fail within 40 slots
    with pytest.raises(GenerationExhausted):
        generate(GenConfig(40, 0, max_attempts_per_example=1))


def test_jsonl_round_trip(tmp_path, small):
    path = tmp_path / "d.jsonl"
    write_jsonl(small[:3], path)
    back = read_jsonl(path)
    assert len(back) == 3 and all(same(x, y) for x, y in zip(small, back))
    lines = path.read_text().splitlines()
    assert list(json.loads(lines[0])) == ["A", "b", "c", "theta", "x_star", "lambda_star", "seed_tag"]


def test_label_free_round_trip(tmp_path, small):
    path = tmp_path / "d.jsonl"
    write_jsonl([ex.without_truth() for ex in small[:3]], path)
    back = read_jsonl(path)
    assert all(ex.truth is None for ex in back)
    assert "x_star" not in path.read_text()


def test_truncated_line_reports_number(tmp_path, small):
    path = tmp_path / "d.jsonl"
    write_jsonl(small[:3], path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1][: len(lines[1]) // 2]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MalformedRecord) as err:
        read_jsonl(path)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_jsonl(path) == []


def test_corrupted_solution_is_rejected(small):
    rec = to_record(small[0])
    rec["x_star"] = [rec["x_star"][0] + 1e-3, rec["x_star"][1]]
    with pytest.raises(MalformedRecord):
        from_record(rec, 7)


@pytest.mark.parametrize("mutate", [
    lambda r: r.pop("theta"),
    lambda r: r.pop("lambda_star"),
    lambda r: r.update(extra=1),
    lambda r: r.update(seed_tag=1.5),
    lambda r: r.update(A=[[1.0, 2.0]]),
])
def test_malformed_records(small, mutate):
    rec = to_record(small[0])
    mutate(rec)
    with pytest.raises(MalformedRecord):
        from_record(rec, 1)


def test_example_rejects_unnormalized():
    inst = ProblemInstance.lp(np.eye(2) * 2, [1, 1], [-1, -1])
    with pytest.raises(ValidationError):
        LabeledExample(inst, None, 1.0, 0)


def test_split_sizes(small):
    train, test = split(small[:10], 0.2, 5)
    assert (len(train), len(test)) == (8, 2)
    ids = lambda xs: sorted(ex.seed_tag for ex in xs)
    assert not set(ids(train)) & set(ids(test))
    assert ids(train + test) == ids(small[:10])
    train2, test2 = split(small[:10], 0.2, 5)
    assert ids(test) == ids(test2)


def test_split_minimum(small):
    train, test = split(small[:2], 1e-6, 0)
    assert (len(train), len(test)) == (1, 1)
    train, test = split(small[:2], 0.999, 0)
    assert (len(train), len(test)) == (1, 1)


def test_split_errors(small):
    with pytest.raises(TooFewExamples):
        split(small[:1], 0.5, 0)
    with pytest.raises(ValidationError):
        split(small[:4], 1.0, 0)


def test_stack_shapes(small):
    feats, G, h, c, y = stack(small[:6])
    assert feats.shape == (6, 8) and G.shape == (6, 2, 2) and h.shape == (6, 2) and c.shape == (6, 2)
    assert y.shape == (6, 4)
    np.testing.assert_array_equal(y[0], np.concatenate([small[0].truth.x, small[0].truth.lam]))
    assert stack(small[:6], labels=False)[4] is None
    assert stack([small[0].without_truth()])[4] is None
