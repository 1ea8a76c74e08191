import math

import numpy as np
import pytest
from scipy import stats

from twotier.geometry import (Annulus, Disk, HexRegion, PointSample, SectorSpec, corner_cells,
                              effective_intensities, hex_centers, mark_femtocells,
                              ray_hex_exit, sample_ppp, sector_filter, thin, uniform_in_hex)
from twotier.params import reference_params
from twotier.rng import stream, zt_poisson


def test_hex_membership_matches_area():
    rng = np.random.default_rng(1)
    h = HexRegion((0.0, 0.0), 500.0)
    x0, x1, y0, y1 = h.bbox
    n = 200_000
    x, y = rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)
    rate = h.contains(x, y).mean()
    p = h.area / ((x1 - x0) * (y1 - y0))
    assert abs(rate - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_hex_has_vertex_on_positive_axis():
    v = HexRegion((0.0, 0.0), 1.0).vertices()
    assert np.any(np.all(np.isclose(v, [1.0, 0.0]), axis=1))


def test_empty_process():
    assert len(sample_ppp(HexRegion((0, 0), 500.0), 0.0, np.random.default_rng(0))) == 0


def test_hex_counts_poisson(params):
    lam = 24.0 / params.area_H
    h = HexRegion((0.0, 0.0), params.R_c)
    counts = np.array([len(sample_ppp(h, lam, stream(7, "ppp", i))) for i in range(4000)])
    assert abs(counts.mean() - 24.0) < 3 * math.sqrt(24.0 / counts.size)
    # chi-square goodness of fit against Poisson(24) on binned counts
    edges = np.array([0, 17, 20, 22, 24, 26, 28, 31, 200])
    obs = np.histogram(counts, bins=edges)[0]
    cdf = stats.poisson.cdf(edges[1:] - 1, 24.0) - stats.poisson.cdf(edges[:-1] - 1, 24.0)
    exp = cdf / cdf.sum() * counts.size
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_disk_dispersion():
    d = Disk((0.0, 0.0), 20.0)
    lam = 5.0 / d.area
    c = np.array([len(sample_ppp(d, lam, stream(3, "disk", i))) for i in range(5000)])
    assert c.var() / c.mean() == pytest.approx(1.0, abs=0.08)
    pts = sample_ppp(d, 1.0, np.random.default_rng(0)).positions
    assert np.all(np.hypot(pts[:, 0], pts[:, 1]) <= 20.0)


def test_annulus_support():
    a = Annulus((10.0, 0.0), 5.0, 8.0)
    pts = sample_ppp(a, 0.5, np.random.default_rng(0)).positions
    r = np.hypot(pts[:, 0] - 10.0, pts[:, 1])
    assert np.all((r >= 5.0) & (r <= 8.0))
    assert a.area == pytest.approx(math.pi * (64 - 25))


def test_thin_identity_empty_and_rate():
    rng = np.random.default_rng(2)
    s = sample_ppp(HexRegion((0, 0), 500.0), 1e-3, rng)
    assert thin(s, 1.0, rng) is s
    assert len(thin(s, 0.0, rng)) == 0
    kept = [len(thin(s, 0.25, stream(5, "thin", i))) for i in range(2000)]
    assert np.mean(kept) / len(s) == pytest.approx(0.25, abs=3 * math.sqrt(0.1875 / len(s) / 2000))


def test_superposition_of_slot_copies():
    rng = np.random.default_rng(4)
    region = HexRegion((0, 0), 500.0)
    totals, firsts = [], []
    for i in range(3000):
        s = sample_ppp(region, 20.0 / region.area, stream(9, "sup", i))
        slot = stream(9, "slot", i).integers(0, 4, len(s))
        totals.append(sum(int(np.sum(slot == k)) for k in range(4)))
        firsts.append(int(np.sum(slot == 0)))
    # each slot copy is Poisson with mean 5; the union has mean and variance 20
    assert np.mean(firsts) == pytest.approx(5.0, abs=0.15)
    assert np.var(firsts) == pytest.approx(5.0, rel=0.1)
    assert np.mean(totals) == pytest.approx(20.0, abs=0.3)
    assert rng is not None


def test_sector_filter_fraction_and_boundary():
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 2 * math.pi, 60_000)
    s = PointSample(np.column_stack([np.cos(a), np.sin(a)]))
    spec = SectorSpec.from_sectors(3, 0.3)
    frac = len(sector_filter(s, spec)) / len(s)
    assert frac == pytest.approx(1 / 3, abs=3 * math.sqrt(2 / 9 / len(s)))
    assert sector_filter(s, SectorSpec.from_sectors(1)) is s
    # a point exactly at the start angle belongs to the sector, the end does not
    th = 0.3
    assert spec.contains(np.array([math.cos(th)]), np.array([math.sin(th)]))[0]
    end = th + 2 * math.pi / 3
    assert not spec.contains(np.array([math.cos(end)]), np.array([math.sin(end)]))[0]


def test_sector_widths_cover_circle():
    for n in (1, 2, 3, 6):
        assert SectorSpec.from_sectors(n).width * n == pytest.approx(2 * math.pi)


def test_effective_intensities_examples():
    p = reference_params(N_hop=4)
    e = effective_intensities(p, 24.0, 0.0)
    assert e.eta_c * p.area_H == pytest.approx(2.0)
    e = effective_intensities(reference_params(), 0.0, 50.0)
    assert e.activity == pytest.approx(1 - math.exp(-5), rel=1e-12)
    assert e.activity == pytest.approx(0.99326, abs=1e-5)
    assert e.mean_active_users == pytest.approx(5 / (1 - math.exp(-5)))


def test_independent_mode_formula_and_light_load_limit():
    p = reference_params(N_hop=4, hopping_mode="independent")
    e = effective_intensities(p, 0.0, 50.0)
    lam = 50.0 / p.area_H
    assert e.eta_f == pytest.approx(lam / 3 * (1 - math.exp(-5 / 4)))
    assert e.mean_active_users == pytest.approx(1.25 / (1 - math.exp(-1.25)))
    light = reference_params(N_hop=4, U_f=1e-6)
    j = effective_intensities(light, 0, 50.0, hopping_mode="joint").eta_f
    i = effective_intensities(light, 0, 50.0, hopping_mode="independent").eta_f
    assert i / j == pytest.approx(1.0, rel=1e-5)


def test_mark_femtocells():
    rng = np.random.default_rng(6)
    s = PointSample(np.zeros((100_000, 2)))
    m = mark_femtocells(s, 5.0, 20.0, rng)
    U = m.marks["U"]
    assert np.mean(U >= 1) == pytest.approx(1 - math.exp(-5), abs=4e-4)
    assert U[U >= 1].mean() == pytest.approx(5 / (1 - math.exp(-5)), abs=0.03)
    assert np.all(np.hypot(m.user_xy[:, 0], m.user_xy[:, 1]) <= 20.0)
    assert np.all(mark_femtocells(s, 0.0, 20.0, rng).marks["U"] == 0)


def test_mapping_to_one_dimensional_process():
    # squared distances of a planar PPP of intensity eta form a 1-D PPP of rate pi*eta
    eta, R = 1e-3, 2000.0
    rng = np.random.default_rng(8)
    s = sample_ppp(Disk((0, 0), R), eta, rng).positions
    r2 = np.sort(np.sum(s**2, axis=1))
    gaps = np.diff(np.concatenate([[0.0], r2])) * math.pi * eta
    assert gaps.size > 10_000
    assert stats.kstest(gaps, "expon").statistic < 0.02


def test_layout():
    c = hex_centers(500.0)
    assert c.shape == (19, 2)
    assert np.allclose(c[0], 0)
    d = np.sort(np.hypot(c[:, 0], c[:, 1]))
    assert np.allclose(d[1:7], math.sqrt(3) * 500)
    cc = corner_cells(500.0)
    assert np.allclose(np.hypot(cc[:, 0] - 500, cc[:, 1]), 500.0)


def test_uniform_in_hex_and_ray_exit():
    pts = uniform_in_hex(10_000, 500.0, np.random.default_rng(0))
    assert HexRegion((0, 0), 500.0).contains(pts[:, 0], pts[:, 1]).all()
    assert ray_hex_exit(0.0, 0.0, np.array([0.0]), 1.0)[0] == pytest.approx(1.0)
    assert ray_hex_exit(0.0, 0.0, np.array([math.pi / 2]), 1.0)[0] == pytest.approx(math.sqrt(3) / 2)


def test_rng_streams_and_zero_truncated_poisson():
    a = stream(1, "x", 3).random(5)
    assert np.array_equal(a, stream(1, "x", 3).random(5))
    assert not np.array_equal(a, stream(1, "x", 4).random(5))
    for lam in (0.4, 1.7, 6.0):
        z = zt_poisson(lam, 200_000, np.random.default_rng(1))
        assert z.min() >= 1
        assert z.mean() == pytest.approx(lam / (1 - math.exp(-lam)), rel=0.01)
    assert np.all(zt_poisson(0.0, 10, np.random.default_rng(0)) == 1)


def test_point_sample_csv(tmp_path):
    s = PointSample(np.array([[1.0, 2.0], [3.0, 4.0]]), {"U": np.array([1, 0])})
    f = tmp_path / "p.csv"
    s.to_csv(f)
    lines = f.read_text().strip().splitlines()
    assert lines[0].startswith("x,y")
    assert len(lines) == 3
