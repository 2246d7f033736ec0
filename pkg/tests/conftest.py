# -*- coding: utf-8 -*-
import os
import sys

import pytest

HERE_DIR = os.path.dirname(__file__)
SRC_DIR = os.path.abspath(os.path.join(HERE_DIR, os.pardir, "src"))
if SRC_DIR not in sys.path:
    sys.path.insert(0, SRC_DIR)

from oracle_zoo import lookup, make_oracle  # noqa: E402


@pytest.fixture
def oracle_for():
    def _make(name, domain=None, eps_eq=None):
        return make_oracle(lookup(name), domain, eps_eq)
    return _make


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "out")
