import numpy as np
import pytest
import torch

from fourllie import FPBlock, InvalidInputError, SPBlock, block_param_count
from fourllie.blocks import kaiming_init_, zero_init_
from oracles import fd_gradient, group_relative_error


def _all_entries(params):
    return [(i, j) for i, p in enumerate(params) for j in range(p.numel())]


@pytest.mark.parametrize("block_cls", [FPBlock, SPBlock])
class TestCommonBlockBehavior:
    @pytest.mark.parametrize("shape", [(2, 6, 6), (3, 7, 5), (1, 1, 4), (4, 16, 16)])
    def test_shape_preserved(self, block_cls, shape):
        nc = shape[0]
        block = block_cls(nc)
        kaiming_init_(block, torch.Generator().manual_seed(1))
        x = torch.rand(*shape)
        assert block(x).shape == x.shape
        xb = torch.rand(2, *shape)
        assert block(xb).shape == xb.shape

    def test_zero_init_is_exact_identity(self, block_cls):
        block = block_cls(3)
        zero_init_(block)
        x = torch.rand(3, 9, 11)
        assert torch.equal(block(x), x)

    def test_gradients_finite_everywhere(self, block_cls):
        block = block_cls(4)
        kaiming_init_(block, torch.Generator().manual_seed(2))
        x = torch.empty(4, 8, 8).uniform_(-1, 1)
        out = block(x)
        out.square().mean().backward()
        for p in block.parameters():
            assert p.grad is not None
            assert torch.isfinite(p.grad).all()

    def test_param_gradients_match_finite_differences(self, block_cls):
        torch.manual_seed(0)
        block = block_cls(4).double()
        kaiming_init_(block, torch.Generator().manual_seed(3))
        x = torch.rand(4, 6, 6, dtype=torch.float64)
        proj = torch.randn(4, 6, 6, dtype=torch.float64)

        def loss_fn():
            return (block(x) * proj).sum()

        loss = loss_fn()
        block.zero_grad()
        loss.backward()
        params = list(block.parameters())
        worst = 0.0
        for i, p in enumerate(params):
            entries = [(i, j) for j in range(p.numel())]
            numeric = fd_gradient(loss_fn, params, entries, step=1e-3)
            err = group_relative_error(p.grad.view(-1).numpy(), numeric)
            worst = max(worst, err)
        assert worst < 1e-3


class TestParamCount:
    def test_fp_nc16_formula(self):
        assert block_param_count("fp", 16) == 3408

    def test_sp_nc16_formula(self):
        assert block_param_count("sp", 16) == 4640

    def test_nc1_hand_count(self):
        # fp: amplitude branch 2*(1*1+1)=4, phase branch 4, 3x3 conv 9+1=10
        assert block_param_count("fp", 1) == 18
        # sp: two 3x3 convs, (9+1) each
        assert block_param_count("sp", 1) == 20

    @pytest.mark.parametrize("nc", [1, 3, 16])
    def test_matches_instantiated_modules(self, nc):
        assert sum(p.numel() for p in FPBlock(nc).parameters()) == block_param_count("fp", nc)
        assert sum(p.numel() for p in SPBlock(nc).parameters()) == block_param_count("sp", nc)

    def test_unknown_type_rejected(self):
        with pytest.raises(InvalidInputError):
            block_param_count("attention", 16)
        with pytest.raises(InvalidInputError):
            block_param_count("fp", 0)


class TestReceptiveField:
    def test_fp_block_is_global(self):
        block = FPBlock(2).double()
        kaiming_init_(block, torch.Generator().manual_seed(4))
        x = torch.rand(2, 12, 12, dtype=torch.float64)
        base = block(x)
        bumped = x.clone()
        bumped[0, 3, 4] += 0.5
        delta = (block(bumped) - base).abs().sum(dim=0)
        assert (delta > 0).all(), "a single-pixel change must reach every output pixel"

    def test_sp_block_is_local_5x5(self):
        block = SPBlock(2).double()
        kaiming_init_(block, torch.Generator().manual_seed(5))
        x = torch.rand(2, 16, 16, dtype=torch.float64)
        base = block(x)
        bumped = x.clone()
        cy, cx = 8, 8
        bumped[0, cy, cx] += 0.5
        delta = (block(bumped) - base).abs().sum(dim=0)
        ys, xs = np.nonzero(delta.detach().numpy())
        assert len(ys) > 0
        assert np.abs(ys - cy).max() <= 2 and np.abs(xs - cx).max() <= 2
