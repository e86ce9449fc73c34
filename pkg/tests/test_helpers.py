# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import pytest

from retas.helpers import (ConfigError, DataError, NumericalError, SupercriticalError,
                           exit_code_for, format_exception, utils)


def test_format_duration():
    assert utils.format_duration(0.456) == "0.46s"
    assert utils.format_duration(75) == "1:15 min"
    assert utils.format_duration(3725) == "1:02:05 h"


def test_progress_estimates_remaining_time():
    assert utils.progress(1, 4, 30.0) == "1/4 replicates, 0:30 min elapsed, about 1:30 min left"
    assert utils.progress(4, 4, 30.0, "smoothing fits") == "4/4 smoothing fits, 0:30 min elapsed"


def test_format_exception_lists_causes():
    try:
        try:
            raise KeyError("h11")
        except KeyError as ex:
            raise ConfigError("Invalid 'kde.h'") from ex
    except ConfigError as ex:
        text = format_exception(ex)
    assert text.startswith("Traceback (most recent call last):")
    assert "ConfigError: Invalid 'kde.h'" in text
    assert "caused by KeyError: 'h11'" in text
    assert "tests/test_helpers.py" in text


@pytest.mark.parametrize("exc,code", [
    (ConfigError("x"), 1),
    (DataError("x"), 2),
    (NumericalError("x"), 3),
    (SupercriticalError("x"), 3),
    (FloatingPointError(), 3),
    (OSError(), 2),
    (RuntimeError(), 1),
])
def test_exit_codes(exc, code):
    assert exit_code_for(exc) == code
