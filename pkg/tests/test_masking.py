import numpy as np
import pytest
import torch

from revisegan.masking import composite, crop

from conftest import make_region


def rand_batch(b=2, c=3, h=8, w=8, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand((b, c, h, w), generator=gen) * 2 - 1


class TestComposite:
    def test_full_cover_region_returns_fake(self):
        real, fake = rand_batch(seed=1), rand_batch(seed=2)
        pair = composite(real, fake, make_region(0, 0, 8))
        assert torch.equal(pair.masked_fake, fake)

    def test_constructed_two_by_two_case(self):
        real = torch.zeros((1, 3, 4, 4))
        fake = torch.ones((1, 3, 4, 4))
        pair = composite(real, fake, make_region(0, 0, 2))
        mask = pair.masked_fake
        assert mask[0, :, :2, :2].eq(1.0).all()
        assert float(mask.sum()) == 3 * 4  # four pixels per channel
        assert mask[0, :, 2:, :].eq(0.0).all()

    def test_partition_is_pixel_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            h = int(rng.integers(6, 17))
            side = int(rng.integers(1, h))
            x0 = int(rng.integers(0, h - side + 1))
            y0 = int(rng.integers(0, h - side + 1))
            real = rand_batch(2, 3, h, h, seed=int(rng.integers(1 << 30)))
            fake = rand_batch(2, 3, h, h, seed=int(rng.integers(1 << 30)))
            region = make_region(x0, y0, side)
            mask = composite(real, fake, region).masked_fake
            for b in range(2):
                for row in range(h):
                    for col in range(h):
                        inside = y0 <= row < y0 + side and x0 <= col < x0 + side
                        source = fake if inside else real
                        assert torch.equal(mask[b, :, row, col], source[b, :, row, col])

    def test_per_sample_regions(self):
        real = torch.zeros((2, 1, 4, 4))
        fake = torch.ones((2, 1, 4, 4))
        regions = [make_region(0, 0, 2), make_region(2, 2, 2)]
        mask = composite(real, fake, regions).masked_fake
        assert mask[0, 0, :2, :2].eq(1).all() and mask[0].sum() == 4
        assert mask[1, 0, 2:, 2:].eq(1).all() and mask[1].sum() == 4

    def test_inputs_not_mutated_and_idempotent(self):
        real, fake = rand_batch(seed=4), rand_batch(seed=5)
        real_copy, fake_copy = real.clone(), fake.clone()
        region = make_region(2, 3, 4)
        once = composite(real, fake, region).masked_fake
        assert torch.equal(real, real_copy) and torch.equal(fake, fake_copy)
        twice = composite(real, once, region).masked_fake
        assert torch.equal(once, twice)

    def test_numpy_arrays_supported(self):
        rng = np.random.default_rng(0)
        real = rng.uniform(-1, 1, (1, 3, 6, 6))
        fake = rng.uniform(-1, 1, (1, 3, 6, 6))
        mask = composite(real, fake, make_region(1, 1, 3)).masked_fake
        assert mask.dtype == real.dtype
        np.testing.assert_array_equal(mask[0, :, 1:4, 1:4], fake[0, :, 1:4, 1:4])
        np.testing.assert_array_equal(mask[0, :, 0, :], real[0, :, 0, :])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            composite(rand_batch(2), rand_batch(3), make_region(0, 0, 2))

    def test_out_of_bounds_region_rejected(self):
        with pytest.raises(ValueError):
            composite(rand_batch(), rand_batch(), make_region(4, 4, 8))
        with pytest.raises(ValueError):
            composite(rand_batch(), rand_batch(), make_region(-1, 0, 4))

    def test_region_count_must_match_batch(self):
        with pytest.raises(ValueError):
            composite(rand_batch(2), rand_batch(2), [make_region(0, 0, 2)] * 3)

    def test_gradients_flow_only_inside_region(self):
        real = torch.zeros((1, 1, 6, 6))
        fake = torch.rand((1, 1, 6, 6), requires_grad=True)
        region = make_region(1, 2, 3)
        pair = composite(real, fake, region)
        pair.masked_fake.sum().backward()
        grad = fake.grad[0, 0]
        assert grad[2:5, 1:4].eq(1.0).all()
        total_inside = float(grad[2:5, 1:4].sum())
        assert float(grad.sum()) == total_inside  # zero everywhere else


class TestCrop:
    def test_identity_on_full_region(self):
        x = rand_batch(1)[0]
        assert torch.equal(crop(x, make_region(0, 0, 8)), x)

    def test_constant_crop_has_requested_side(self):
        x = torch.full((3, 8, 8), 0.25)
        out = crop(x, make_region(1, 2, 5))
        assert out.shape == (3, 5, 5)
        assert out.eq(0.25).all()

    def test_paste_then_crop_round_trip(self):
        real, fake = rand_batch(seed=8), rand_batch(seed=9)
        region = make_region(3, 1, 4)
        pair = composite(real, fake, region)
        assert torch.equal(crop(pair.masked_fake, region), crop(fake, region))
        assert torch.equal(pair.fake_crop, crop(fake, region))
        assert torch.equal(pair.real_crop, crop(real, region))

    def test_batched_crop_stacks_per_sample(self):
        x = rand_batch(2)
        regions = [make_region(0, 0, 3), make_region(5, 5, 3)]
        out = crop(x, regions)
        assert out.shape == (2, 3, 3, 3)
        assert torch.equal(out[1], x[1, :, 5:8, 5:8])

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            crop(rand_batch(), make_region(6, 6, 4))
