"""Miscellaneous functions and classes.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers
"""
# zoomstab is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# zoomstab is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with zoomstab. If not, see <https://www.gnu.org/licenses/>.


class AccuracyWarning(Warning):
    """Class for warnings related to the accuracy of iterative solvers"""
    pass


class UndersampledWarning(Warning):
    """Class for warnings about diagnostics evaluated on too few samples"""
    pass


class ConfigError(ValueError):
    """Invalid parameters or configuration.

    Parameters
    ----------
    violations : str or list of str
        One message per violated condition.

    Examples
    --------
    >>> err = ConfigError(['K must be even', 'b must be nonzero'])
    >>> err.violations
    ['K must be even', 'b must be nonzero']
    """
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__('; '.join(self.violations))


class DomainError(ValueError):
    """A bound or computation was requested outside its domain of validity"""
    pass


class ResultsWriteError(OSError):
    """Writing results failed; `records` holds what was completed so far"""
    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = list(records or [])
