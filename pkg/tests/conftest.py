import sys
from pathlib import Path

try:
    import losmimo  # noqa: F401
except ImportError:  # fall back to the in-tree sources
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import pytest

from losmimo.antenna import SubstrateSpec, design_patch

# Reference scenario substrate: eps_r 10.2, 2 GHz, 1.588 mm height.
TABLE1_SUBSTRATE = SubstrateSpec(eps_r=10.2, f_hz=2.0e9, h_m=1.588e-3)


@pytest.fixture(scope="session")
def table1_dims():
    return design_patch(TABLE1_SUBSTRATE)
