# conftest.py (pytest configuration)
import os
import tempfile

import numpy as np
import pytest
from PIL import Image

from models.shapes import BinaryShape


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: fine-resolution acceptance checks")


@pytest.fixture
def rng():
    """Seeded generator so randomized suites are reproducible"""
    return np.random.default_rng(20240611)


@pytest.fixture
def temp_output_dir():
    """Create temporary output directory for tests"""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield temp_dir


@pytest.fixture
def write_p5():
    """Write a boolean raster (row 0 on top) as a raw P5 PGM via Pillow"""
    def _write(path, bits, foreground=255, background=0):
        pixels = np.where(np.asarray(bits, dtype=bool), foreground, background).astype(np.uint8)
        Image.fromarray(pixels, mode='L').save(path, format='PPM')
        return path
    return _write


@pytest.fixture
def square_shape():
    """8x8 foreground square centered in a 12x12 raster"""
    bits = np.zeros((12, 12), dtype=bool)
    bits[2:10, 2:10] = True
    return BinaryShape(bits)


@pytest.fixture
def square_pgm(temp_output_dir, write_p5, square_shape):
    return write_p5(os.path.join(temp_output_dir, 'square.pgm'), square_shape.bits)


@pytest.fixture
def empty_pgm(temp_output_dir, write_p5):
    return write_p5(os.path.join(temp_output_dir, 'empty.pgm'), np.zeros((6, 6), dtype=bool))
