import json
import math

import numpy as np
import pytest
import torch

from fourllie import EvalReport, EvalRow, InvalidInputError, psnr, ssim


class TestPsnr:
    def test_identical_images_give_inf(self):
        x = torch.rand(3, 8, 8)
        assert psnr(x, x) == math.inf

    def test_uniform_offset_closed_form(self):
        g = torch.Generator().manual_seed(0)
        # float64 keeps the per-pixel difference at exactly-representable 0.1
        a = torch.rand(3, 16, 16, generator=g, dtype=torch.float64) * 0.9
        b = a + 0.1
        assert abs(psnr(a, b) - 20.0) < 1e-9

    def test_black_vs_white_is_zero_db(self):
        a = torch.zeros(3, 8, 8)
        b = torch.ones(3, 8, 8)
        assert abs(psnr(a, b) - 0.0) < 1e-12

    def test_symmetry(self):
        a, b = torch.rand(3, 10, 10), torch.rand(3, 10, 10)
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            psnr(torch.rand(3, 8, 8), torch.rand(3, 8, 9))

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidInputError):
            psnr(torch.rand(3, 8, 8) + 1.0, torch.rand(3, 8, 8))

    def test_monotonically_decreasing_in_noise(self):
        rng = np.random.default_rng(4)
        base = torch.full((3, 32, 32), 0.5, dtype=torch.float64)
        values = []
        for amplitude in (0.01, 0.05, 0.1):
            trial = []
            for _ in range(20):
                noise = torch.from_numpy(rng.uniform(-amplitude, amplitude, size=(3, 32, 32)))
                trial.append(psnr(base, base + noise))
            values.append(sum(trial) / len(trial))
        assert values[0] > values[1] > values[2]


class TestSsim:
    def test_identical_images_give_one(self):
        x = torch.rand(3, 16, 16)
        assert ssim(x, x) == 1.0

    def test_inverted_checkerboard_is_negative(self):
        idx = torch.arange(16)
        board = ((idx[:, None] + idx[None, :]) % 2).to(torch.float64)
        a = board.expand(3, 16, 16)
        assert ssim(a, 1.0 - a) < 0.0

    def test_constant_images_reduce_to_luminance_term(self):
        mu_a, mu_b = 0.3, 0.7
        a = torch.full((3, 16, 16), mu_a, dtype=torch.float64)
        b = torch.full((3, 16, 16), mu_b, dtype=torch.float64)
        c1 = 0.01**2
        expected = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
        assert abs(ssim(a, b) - expected) < 1e-12

    def test_symmetry(self):
        a, b = torch.rand(3, 16, 16), torch.rand(3, 16, 16)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_images_smaller_than_window_rejected(self):
        with pytest.raises(InvalidInputError):
            ssim(torch.rand(3, 10, 16), torch.rand(3, 10, 16))

    def test_value_bounded(self):
        for seed in range(5):
            g = torch.Generator().manual_seed(seed)
            v = ssim(torch.rand(3, 16, 16, generator=g), torch.rand(3, 16, 16, generator=g))
            assert -1.0 <= v <= 1.0


class TestEvalReport:
    def _report(self):
        rows = [
            EvalRow(id="b", psnr_db=20.0, ssim=0.8),
            EvalRow(id="a", psnr_db=30.0, ssim=0.9),
        ]
        return EvalReport(rows=rows, config_fingerprint="cfg123", checkpoint_fingerprint="ck456")

    def test_aggregates_are_arithmetic_means(self):
        report = self._report()
        assert report.mean_psnr_db == 25.0
        assert report.mean_ssim == pytest.approx(0.85)

    def test_write_csv_and_json(self, tmp_path):
        report = self._report()
        csv_path = tmp_path / "report.csv"
        json_path = report.write(csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "id,psnr_db,ssim"
        assert lines[1].startswith("a,") and lines[2].startswith("b,")
        payload = json.loads(json_path.read_text())
        assert payload["mean_psnr_db"] == 25.0
        assert payload["n_images"] == 2
        assert payload["config_fingerprint"] == "cfg123"
        assert payload["checkpoint_fingerprint"] == "ck456"
        assert payload["conventions"]["window"] == 11

    def test_inf_rows_serialize(self, tmp_path):
        report = EvalReport(rows=[EvalRow(id="same", psnr_db=math.inf, ssim=1.0)])
        csv_path = tmp_path / "r.csv"
        report.write(csv_path)
        assert "same,inf,1.0" in csv_path.read_text()
        assert report.mean_psnr_db == math.inf
