import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sarpatch.grid import GeoTransform, RasterGrid, SampleKind

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_transform(origin_x=5000.0, origin_y=90000.0, pixel=10.0):
    return GeoTransform(origin_x=origin_x, origin_y=origin_y,
                        pixel_width=pixel, pixel_height=pixel)


def make_dn_grid(samples, nodata=0, transform=None, crs="EPSG:32654"):
    return RasterGrid(
        samples=np.asarray(samples, dtype=np.uint16),
        kind=SampleKind.SAR_DN,
        nodata=nodata,
        transform=transform or make_transform(),
        crs_tag=crs,
    )


def make_label_grid(samples, nodata=0, transform=None, crs="EPSG:32654"):
    return RasterGrid(
        samples=np.asarray(samples, dtype=np.uint8),
        kind=SampleKind.LABEL,
        nodata=nodata,
        transform=transform or make_transform(),
        crs_tag=crs,
    )


def make_db_grid(samples, transform=None, crs="EPSG:32654"):
    return RasterGrid(
        samples=np.asarray(samples, dtype=np.float32),
        kind=SampleKind.SAR_DB,
        nodata=float("nan"),
        transform=transform or make_transform(),
        crs_tag=crs,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(20260815)
