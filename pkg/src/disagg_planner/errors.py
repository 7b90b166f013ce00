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

"""Domain errors.

Library code raises these; only the command line entry point turns them into
exit codes.
"""


class PlannerError(Exception):
    """Base class for every error reported with exit status 1."""


class SchemaError(PlannerError):
    """A document is missing fields, has unknown fields or wrong types."""


class SpecValidationError(PlannerError):
    """A value breaks one of its type invariants.

    Attributes:
        field: name of the offending field.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class CatalogLookupError(PlannerError):
    pass


class PreconditionError(PlannerError):
    pass


class CapacityError(PlannerError):
    """Model weights do not fit in the memory that should hold them."""


class EmptyPartialError(PlannerError):
    pass


class HeadDivisibilityError(PlannerError):
    pass


class GraphError(PlannerError):
    pass


class CycleError(GraphError):
    pass


class UnsupportedGraphError(GraphError):
    pass


class InseparableCutError(GraphError):
    pass


class InfeasibleScheduleError(PlannerError):
    pass


class EmptyTraceError(PlannerError):
    pass


class LedgerOverflowError(PlannerError):
    pass


class NoFeasibleConfigError(PlannerError):
    pass
