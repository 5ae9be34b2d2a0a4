import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import eigh_plane, grid_plane_distance
from uavinspect.errors import DegenerateError, InputError
from uavinspect.geometry import (
    Plane, PointCloud, Pose, fit_plane_tls, load_point_cloud, point_plane_distance,
    save_point_cloud, sym3_eigenvalues,
)
from uavinspect.rng import make_rng


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# --- types -----------------------------------------------------------------


def test_plane_rejects_non_unit_normal():
    with pytest.raises(InputError):
        Plane([0.0, 0.0, 2.0], 1.0)
    Plane([0.0, 0.0, 1.0 + 5e-10], 1.0)


def test_pose_rejects_non_orthonormal_rotation():
    with pytest.raises(InputError):
        Pose(np.diag([1.0, 1.0, 1.1]), (0, 0, 0), 0.0)


def test_cloud_arrays_are_read_only():
    c = PointCloud([[0, 0, 0], [1, 2, 3]])
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


# --- I/O -------------------------------------------------------------------


PLY3 = """ply
format ascii 1.0
comment three points
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 0 0
0 1 0
"""


def test_load_ascii_ply_in_order(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text(PLY3)
    c = load_point_cloud(p)
    assert c.points.tolist() == [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    assert c.colors is None


def test_load_xyz_single_line(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("# comment\n1.5 2.5 3.5\n")
    assert load_point_cloud(p).points.tolist() == [[1.5, 2.5, 3.5]]


def test_truncated_vertex_list(tmp_path):
    p = tmp_path / "t.ply"
    body = "\n".join(f"{i} 0 0" for i in range(9))
    p.write_text(PLY3.replace("vertex 3", "vertex 10").split("end_header")[0] + "end_header\n" + body + "\n")
    with pytest.raises(InputError, match="truncated vertex list"):
        load_point_cloud(p)


@pytest.mark.parametrize("text,msg", [
    ("plx\n", "malformed header"),
    (PLY3.replace("end_header\n", ""), "malformed header"),
    (PLY3.replace("1 0 0", "1 zero 0"), "non-numeric coordinate"),
    (PLY3.replace("vertex 3", "vertex 0").split("end_header")[0] + "end_header\n", "empty vertex list"),
])
def test_ply_errors(tmp_path, text, msg):
    p = tmp_path / "bad.ply"
    p.write_text(text)
    with pytest.raises(InputError, match=msg):
        load_point_cloud(p)


def test_binary_ply_rejected(tmp_path):
    p = tmp_path / "b.ply"
    p.write_bytes(PLY3.replace("ascii", "binary_little_endian").encode())
    with pytest.raises(InputError, match="ASCII"):
        load_point_cloud(p)


def test_ply_colors_loaded(tmp_path):
    p = tmp_path / "c.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                 "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
                 "end_header\n0 0 0 255 0 10\n1 1 1 1 2 3\n")
    c = load_point_cloud(p)
    assert c.colors.tolist() == [[255, 0, 10], [1, 2, 3]]


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, width=64)))
def test_ply_round_trip_bit_identical(tmp_path_factory, pts):
    d = tmp_path_factory.mktemp("rt")
    save_point_cloud(PointCloud(pts), d / "x.ply")
    again = load_point_cloud(d / "x.ply")
    assert again.points.tobytes() == PointCloud(pts).points.tobytes()
    save_point_cloud(again, d / "y.ply")
    assert (d / "x.ply").read_bytes() == (d / "y.ply").read_bytes()


def test_xyz_round_trip(tmp_path):
    pts = make_rng(3).normal(size=(20, 3))
    save_point_cloud(PointCloud(pts), tmp_path / "p.xyz")
    assert np.array_equal(load_point_cloud(tmp_path / "p.xyz").points, pts)


# --- plane fitting ----------------------------------------------------------


def test_tls_exact_horizontal_plane():
    pl = fit_plane_tls([(0, 0, 5), (1, 0, 5), (0, 1, 5), (1, 1, 5)])
    assert np.allclose(pl.normal, [0, 0, 1], atol=1e-15)
    assert pl.offset == pytest.approx(-5.0, abs=1e-12)


def test_tls_collinear_is_degenerate():
    with pytest.raises(DegenerateError, match="degenerate: collinear"):
        fit_plane_tls([(0, 0, 0), (1, 1, 1), (2, 2, 2)])


def test_tls_too_few_points():
    with pytest.raises(DegenerateError):
        fit_plane_tls([(0, 0, 0), (1, 0, 0)])


def test_tls_noisy_vertical_plane():
    rng = make_rng(11)
    pts = np.column_stack([3.0 + rng.normal(0, 0.01, 500), rng.uniform(-5, 5, 500), rng.uniform(0, 10, 500)])
    pl = fit_plane_tls(pts)
    ang = math.degrees(math.acos(min(1.0, abs(pl.normal @ [1, 0, 0]))))
    assert ang < 0.5
    assert abs(pl.offset + 3.0) < 0.01


@given(st.integers(0, 2**32 - 1))
def test_closed_form_eigen_matches_lapack(seed):
    rng = make_rng(seed)
    pts = rng.normal(size=(50, 3)) * rng.uniform(0.01, 10, 3) @ random_rotation(rng).T
    n_ref, d_ref = eigh_plane(pts)
    pl = fit_plane_tls(pts)
    assert np.allclose(pl.normal, n_ref, atol=1e-7)
    assert pl.offset == pytest.approx(d_ref, abs=1e-7 * (1 + np.abs(pts).max()))
    cov = np.cov(pts.T)
    assert np.allclose(sym3_eigenvalues(cov), np.linalg.eigvalsh(cov), atol=1e-10 * np.abs(cov).max())


@given(st.integers(0, 2**32 - 1))
def test_tls_rigid_equivariance(seed):
    rng = make_rng(seed)
    pts = np.column_stack([rng.uniform(-5, 5, 80), rng.uniform(-5, 5, 80), rng.normal(0, 0.1, 80)])
    r, t = random_rotation(rng), rng.uniform(-100, 100, 3)
    a = fit_plane_tls(pts)
    b = fit_plane_tls(pts @ r.T + t)
    n = r @ a.normal
    d = a.offset - n @ t
    s = 1.0 if n @ b.normal > 0 else -1.0
    assert np.allclose(b.normal, s * n, atol=1e-6)
    assert b.offset == pytest.approx(s * d, abs=1e-6)


def test_tls_optimality_against_100_perturbations():
    rng = make_rng(5)
    pts = np.column_stack([rng.uniform(0, 10, 300), rng.uniform(0, 4, 300), rng.normal(2, 0.2, 300)])
    pts = pts @ random_rotation(rng).T
    pl = fit_plane_tls(pts)
    best = float(np.sum(point_plane_distance(pl, pts) ** 2))
    for _ in range(100):
        n = pl.normal + rng.normal(0, 0.05, 3)
        n /= np.linalg.norm(n)
        alt = Plane(n, pl.offset + rng.normal(0, 0.1))
        assert best <= float(np.sum(point_plane_distance(alt, pts) ** 2))


# --- distances ---------------------------------------------------------------


def test_point_plane_distance_examples():
    pl = Plane([0, 0, 1], -5)
    assert point_plane_distance(pl, (7, 9, 5)) == 0
    assert point_plane_distance(pl, (0, 0, 8)) == 3


@pytest.mark.parametrize("seed", range(5))
def test_point_plane_distance_vs_grid_oracle(seed):
    rng = make_rng(100 + seed)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    pl = Plane(n, rng.uniform(-3, 3))
    p = rng.uniform(-4, 4, 3)
    assert abs(point_plane_distance(pl, p)) == pytest.approx(grid_plane_distance(n, pl.offset, p), abs=1e-6)
