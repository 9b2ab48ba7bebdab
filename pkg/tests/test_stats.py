import numpy as np
import pytest

from lidarsynth.annotator import ObjectLabel
from lidarsynth.geometry import Camera
from lidarsynth.kitti_io import write_labels
from lidarsynth.scanner import LidarConfig
from lidarsynth.scenes import street_basic_scene
from lidarsynth.stats import (
    BevHeatmap,
    bev_heatmap,
    chamfer_distance,
    class_stats,
    compare_backends,
    comparison_report_dict,
    save_class_stats_csv,
    save_comparison_csv,
    save_comparison_figure,
    save_comparison_report,
    save_heatmap_csv,
    save_heatmap_image,
)


def _label(cls="Car", x=0.0, z=10.0):
    return ObjectLabel(cls, 0.0, 0, 0.0, (0.0, 0.0, 10.0, 10.0),
                       (1.5, 1.9, 4.4), (x, 1.7, z), 0.0)


def write_fixture(root, frames):
    """frames: list of lists of (class, x, z)."""
    (root / "label_2").mkdir(parents=True)
    for i, objs in enumerate(frames):
        write_labels(
            [_label(cls, x, z) for cls, x, z in objs],
            root / "label_2" / f"{i:06d}.txt",
        )


class TestClassStats:
    def test_counts_and_apicc(self, tmp_path):
        write_fixture(tmp_path, [
            [("Car", 0, 10)] * 3,
            [],
        ])
        stats = class_stats(tmp_path)
        assert stats.counts["Car"] == 3
        assert stats.apicc["Car"] == pytest.approx(3.0)
        assert stats.frame_count == 2

    def test_apicc_over_two_frames(self, tmp_path):
        write_fixture(tmp_path, [
            [("Car", 0, 10)] * 2,
            [("Car", 0, 10)] * 4,
        ])
        stats = class_stats(tmp_path)
        assert stats.counts["Car"] == 6
        assert stats.apicc["Car"] == pytest.approx(3.0)

    def test_absent_class_omitted(self, tmp_path):
        write_fixture(tmp_path, [[("Car", 0, 10)]])
        stats = class_stats(tmp_path)
        assert "Pedestrian" not in stats.counts
        assert "Pedestrian" not in stats.apicc

    def test_unreadable_frame_skipped_and_counted(self, tmp_path):
        write_fixture(tmp_path, [[("Car", 0, 10)], [("Car", 0, 10)] * 2])
        (tmp_path / "label_2" / "000001.txt").write_text("garbage line\n")
        stats = class_stats(tmp_path)
        assert stats.unreadable == ["000001.txt"]
        assert stats.counts["Car"] == 1
        assert stats.frame_count == 1

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            class_stats(tmp_path / "nope")

    def test_csv_output(self, tmp_path):
        write_fixture(tmp_path, [[("Car", 0, 10), ("Pedestrian", 1, 5)]])
        stats = class_stats(tmp_path)
        out = tmp_path / "stats.csv"
        save_class_stats_csv(stats, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "class,count,apicc"
        assert len(lines) == 3


class TestBevHeatmap:
    def test_single_pedestrian_one_cell(self, tmp_path):
        write_fixture(tmp_path, [[("Pedestrian", 0.0, 50.0)]])
        hm = bev_heatmap(tmp_path, "Pedestrian", cell_size=0.5)
        assert hm.mass == 1
        assert hm.grid.shape == (200, 160)
        rows, cols = np.nonzero(hm.grid)
        assert rows[0] == 100  # z = 50 m at 0.5 m cells
        assert cols[0] == 80  # x = 0 sits in the first right-of-centre cell

    def test_out_of_extent_excluded(self, tmp_path):
        write_fixture(tmp_path, [[("Pedestrian", 41.0, 50.0), ("Pedestrian", -2.0, 120.0)]])
        hm = bev_heatmap(tmp_path, "Pedestrian")
        assert hm.mass == 0

    def test_mass_equals_in_extent_count(self, tmp_path):
        rng = np.random.default_rng(17)
        objs = [("Car", float(x), float(z)) for x, z in rng.uniform((-60, 0), (60, 140), (200, 2))]
        write_fixture(tmp_path, [objs])
        hm = bev_heatmap(tmp_path, "Car")
        expect = sum(1 for _, x, z in objs if -40 <= x <= 40 and 0 <= z <= 100)
        assert hm.mass == expect

    def test_image_and_csv_written(self, tmp_path):
        write_fixture(tmp_path, [[("Car", 5.0, 30.0)]])
        hm = bev_heatmap(tmp_path, "Car")
        save_heatmap_image(hm, tmp_path / "h.png", title="Car")
        save_heatmap_csv(hm, tmp_path / "h.csv")
        assert (tmp_path / "h.png").stat().st_size > 0
        grid = np.loadtxt(tmp_path / "h.csv", delimiter=",")
        assert grid.sum() == 1


class TestChamfer:
    def test_identical_sets_zero(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-5, 5, (100, 3))
        assert chamfer_distance(pts, pts) == 0.0

    def test_known_value(self):
        a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        b = np.array([[0.0, 0.0, 0.5]])
        # a->b: mean(0.5, sqrt(1.25)); b->a: 0.5
        expect = 0.5 * ((0.5 + np.sqrt(1.25)) / 2 + 0.5)
        assert chamfer_distance(a, b) == pytest.approx(expect)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(-5, 5, (60, 3))
        b = rng.uniform(-5, 5, (80, 3))
        assert chamfer_distance(a, b) == pytest.approx(chamfer_distance(b, a))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            chamfer_distance(np.zeros((0, 3)), np.zeros((4, 3)))


@pytest.fixture(scope="module")
def comparison():
    return compare_backends(street_basic_scene(), Camera(), LidarConfig())


class TestCompareBackends:
    def test_far_cars_missed_by_raycast(self, comparison):
        assert set(comparison.missed_entity_ids) == {101, 102}
        by_id = {r.entity_id: r for r in comparison.rows}
        assert by_id[101].depth_points > 20 and by_id[101].raycast_points == 0
        assert by_id[102].depth_points > 20 and by_id[102].raycast_points == 0

    def test_pedestrian_chamfer_shows_proxy_error(self, comparison):
        by_id = {r.entity_id: r for r in comparison.rows}
        assert by_id[110].chamfer is not None and by_id[110].chamfer > 0.02
        assert by_id[111].chamfer is not None and by_id[111].chamfer > 0.02

    def test_identical_geometry_chamfer_negligible(self):
        # Car proxy equals its detailed box and sits within the range
        # limit: both backends sample the same surface.
        from lidarsynth.scene import Entity, Scene
        from lidarsynth.scenes import car_geometry, ground_plane

        car = Entity(100, "Car", "a", [0.5, 1.7, 15.0], yaw=0.4,
                     geometry=car_geometry(), proxy=car_geometry())
        scene = Scene(name="same", entities=[car], statics=[ground_plane()])
        cmp2 = compare_backends(scene, Camera(), LidarConfig(), entity_range_limit=None)
        assert cmp2.rows[0].chamfer is not None
        assert cmp2.rows[0].chamfer < 0.01

    def test_report_files(self, comparison, tmp_path):
        save_comparison_report(comparison, tmp_path / "r.json")
        save_comparison_csv(comparison, tmp_path / "r.csv")
        save_comparison_figure(comparison, tmp_path / "r.png")
        assert (tmp_path / "r.json").stat().st_size > 0
        assert (tmp_path / "r.csv").read_text().startswith("entity_id,")
        assert (tmp_path / "r.png").stat().st_size > 0
        report = comparison_report_dict(comparison)
        assert report["scene"] == "street-basic"
        assert {e["entity_id"] for e in report["entities"]} == {100, 101, 102, 110, 111}
