# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from ._dataclass import (PARAM_NAMES, BandwidthMatrix, MagnitudeParams,
                         RetasParams, SpatialWindow, WindowKind)
from ._errors import (ConfigError, DataError, DomainError, NumericalError,
                      RetasError, SupercriticalError)
from ._exec import exit_code_for, format_exception
from ._utilities import FLOAT_FORMAT, Utilities

utils = Utilities()
