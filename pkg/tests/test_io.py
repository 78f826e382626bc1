import json
import struct
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from infoclip.bench import TrainConfig, train_distill
from infoclip.config import format_run_config, load_run_config, parse_run_config
from infoclip.errors import ConfigError, FormatError, InputError
from infoclip.metrics import COLUMNS, emit_metrics, summary_dict, write_json
from infoclip.tensorfile import decode_tensor, encode_tensor, read_tensor, write_tensor


def header(rank_dims, version=1, tag=2):
    return b"ICTF" + struct.pack("<III", version, tag, len(rank_dims)) + struct.pack(f"<{len(rank_dims)}Q", *rank_dims)


class TestTensorFile:
    def test_identity_round_trip(self, tmp_path):
        write_tensor(tmp_path / "i.ictf", np.eye(3))
        out = read_tensor(tmp_path / "i.ictf")
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out, np.eye(3))

    @settings(max_examples=40)
    @given(arrays(np.float64, array_shapes(min_dims=0, max_dims=3, max_side=5),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
    def test_round_trip_bits(self, a):
        np.testing.assert_array_equal(decode_tensor(encode_tensor(a)), a)

    def test_float32(self):
        a = np.arange(6, dtype=np.float32).reshape(2, 3) / 7
        out = decode_tensor(encode_tensor(a, "float32"))
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, a)

    def test_layout(self):
        data = encode_tensor(np.array([[1.0, 2.0]]))
        assert data == header((1, 2)) + struct.pack("<2d", 1.0, 2.0)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.ictf").write_bytes(b"XXXX" + encode_tensor(np.eye(2))[4:])
        with pytest.raises(FormatError) as exc:
            read_tensor(tmp_path / "x.ictf")
        assert exc.value.offset == 0 and "offset 0" in str(exc.value)

    def test_truncated_payload(self):
        data = header((2, 3)) + struct.pack("<5d", *range(5))
        with pytest.raises(FormatError, match="truncat") as exc:
            decode_tensor(data)
        assert exc.value.offset == len(data)

    def test_unsupported_version_and_dtype(self):
        with pytest.raises(FormatError) as exc:
            decode_tensor(header((1,), version=2) + b"\0" * 8)
        assert exc.value.offset == 4
        with pytest.raises(FormatError) as exc:
            decode_tensor(header((1,), tag=9) + b"\0" * 8)
        assert exc.value.offset == 8

    def test_truncated_header_and_trailing(self):
        with pytest.raises(FormatError):
            decode_tensor(b"ICTF\x01")
        with pytest.raises(FormatError):
            decode_tensor(encode_tensor(np.eye(2)) + b"\0")

    def test_refuses_non_finite(self, tmp_path):
        with pytest.raises(InputError):
            write_tensor(tmp_path / "n.ictf", np.array([np.nan]))
        assert not (tmp_path / "n.ictf").exists()

    def test_atomic_overwrite(self, tmp_path):
        p = tmp_path / "a.ictf"
        write_tensor(p, np.eye(2))
        write_tensor(p, np.ones(3))
        np.testing.assert_array_equal(read_tensor(p), np.ones(3))
        assert sorted(x.name for x in tmp_path.iterdir()) == ["a.ictf"]


class TestConfig:
    def test_minimal(self):
        cfg = parse_run_config("seed = 4\nsteps = 10\n")
        assert cfg == TrainConfig(seed=4, steps=10)

    def test_comments_and_types(self):
        cfg = parse_run_config("# run\nseed=1\nsteps=2  # short\nnoise_sigma = 0.25\noptimizer = sgd\n"
                               "include_teacher_entropy = true\n")
        assert cfg.noise_sigma == 0.25 and cfg.optimizer == "sgd" and cfg.include_teacher_entropy

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown") as exc:
            parse_run_config("seed = 1\nsteps = 1\nlearning_rat = 0.1\n")
        assert exc.value.offset == 3

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_run_config("seed = 1\nseed = 2\nsteps = 1\n")

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="steps"):
            parse_run_config("seed = 1\n")

    @pytest.mark.parametrize("text", ["seed = one\nsteps = 1", "seed = 1\nsteps = 1\noptimizer = lbfgs",
                                      "seed 1\nsteps = 1", "seed = 1\nsteps = -3"])
    def test_bad_values(self, text):
        with pytest.raises(ConfigError):
            parse_run_config(text)

    def test_format_round_trip(self, tmp_path):
        cfg = TrainConfig(seed=9, steps=3, unseen_fraction=0.3, include_teacher_entropy=True)
        (tmp_path / "r.cfg").write_text(format_run_config(cfg))
        assert load_run_config(tmp_path / "r.cfg") == cfg


class TestMetrics:
    CFG = TrainConfig(seed=1, steps=1, batch_pairs=16, eval_scenes=1)

    def test_empty_report(self, tmp_path):
        rep = train_distill(replace(self.CFG, steps=0))
        emit_metrics(rep, tmp_path / "m.jsonl")
        assert (tmp_path / "m.jsonl").read_bytes() == b""
        assert (tmp_path / "m.csv").read_text() == ",".join(COLUMNS) + "\n"

    def test_one_step(self, tmp_path):
        rep = train_distill(self.CFG)
        emit_metrics(rep, tmp_path / "m.jsonl")
        lines = (tmp_path / "m.jsonl").read_text().splitlines()
        assert len(lines) == 1
        row = json.loads(lines[0])
        assert list(row) == list(COLUMNS) and row["step"] == 1
        assert row["total"] == pytest.approx(rep.records[0].losses.total, rel=1e-11)
        csv = (tmp_path / "m.csv").read_text().splitlines()
        assert len(csv) == 2 and csv[0] == ",".join(COLUMNS)

    def test_summary_has_no_nan_or_clock(self, tmp_path):
        rep = train_distill(self.CFG)
        write_json(summary_dict(rep), tmp_path / "s.json")
        text = (tmp_path / "s.json").read_text()
        assert "NaN" not in text and "wall" not in text
        assert json.loads(text)["steps"] == 1
