# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import os
import traceback

from ._errors import RetasError


def format_exception(exc: BaseException) -> str:
    """Traceback with paths relative to the project root, followed by the chain of causes."""
    root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in tb:
        if frame.filename.startswith(root):
            frame.filename = os.path.relpath(frame.filename, root)

    text = (
        "Traceback (most recent call last):\n"
        f"{''.join(traceback.format_list(tb))}"
        f"{type(exc).__name__}{': ' + str(exc) if str(exc) else ''}"
    )
    cause = exc.__cause__
    while cause is not None:
        text += f"\n  caused by {type(cause).__name__}: {cause}"
        cause = cause.__cause__
    return text


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the documented process exit code."""
    if isinstance(exc, RetasError):
        return exc.exit_code
    if isinstance(exc, (FloatingPointError, ArithmeticError)):
        return 3
    if isinstance(exc, (OSError, ValueError)):
        return 2
    return 1
