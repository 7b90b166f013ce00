# SPDX-License-Identifier: GPL-3.0-or-later
# Copyright (C) 2026 The disagg-planner authors
#
# This file is part of disagg-planner.
#
# disagg-planner is free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#
# disagg-planner is distributed in the hope that it will be useful, but WITHOUT ANY
# WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A
# PARTICULAR PURPOSE. See the GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License along with
# disagg-planner. If not, see <https://www.gnu.org/licenses/>.

"""argparse `type=` callables."""

import argparse
import re

DOP_PATTERN = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*$")


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not an integer") from None
    if number < 1:
        raise argparse.ArgumentTypeError(f"'{value}' must be >= 1")
    return number


def non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not an integer") from None
    if number < 0:
        raise argparse.ArgumentTypeError(f"'{value}' must be >= 0")
    return number


def positive_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not a number") from None
    if not number > 0 or number == float("inf"):
        raise argparse.ArgumentTypeError(f"'{value}' must be a finite number > 0")
    return number


def fraction(value: str) -> float:
    """A number within (0, 1]."""
    number = positive_float(value)
    if number > 1:
        raise argparse.ArgumentTypeError(f"'{value}' must be within (0, 1]")
    return number


def headroom(value: str) -> float:
    """A number within [0, 1)."""
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not a number") from None
    if not 0 <= number < 1:
        raise argparse.ArgumentTypeError(f"'{value}' must be within [0, 1)")
    return number


def dop(value: str) -> tuple[int, int]:
    """'a,b' with a, b >= 1."""
    if not (match := DOP_PATTERN.match(value)):
        raise argparse.ArgumentTypeError(f"'{value}' is not of the form a,b")
    a, b = int(match[1]), int(match[2])
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError(f"'{value}': a and b must be >= 1")
    return a, b


def int_list(value: str) -> list[int]:
    """Comma separated positive integers, such as a batch sweep '1,8,64'."""
    items = [item for item in value.split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return [positive_int(item.strip()) for item in items]
