import collections
import csv
import math
from typing import NamedTuple

import numpy as np

from .constants import CsvHeaders
from .utils import RunFailure


class StatRow(NamedTuple):
    nu: float
    sigma: float
    stat: str
    value: float
    mc_stderr: float = math.nan


class StatTable(collections.UserList):
    """
    Long-format table of Monte-Carlo statistics, one row per (nu, sigma, statistic).
    """
    header = CsvHeaders.StatTable

    def __init__(self, initlist=None, csv_fn=None):
        super().__init__(initlist)
        if csv_fn:
            with open(csv_fn, 'r', newline='') as f:
                reader = csv.reader(f)
                next(reader)
                self.data = [StatRow(float(nu), float(sigma), stat, float(value), float(stderr))
                             for nu, sigma, stat, value, stderr in reader]

    def add(self, nu, sigma, stat, value, mc_stderr=math.nan):
        self.data.append(StatRow(float(nu), float(sigma), stat, float(value), float(mc_stderr)))

    def filter(self, stat, nu=None):
        return [row for row in self.data if row.stat == stat and (nu is None or math.isclose(row.nu, nu))]

    def value(self, stat, nu=None):
        rows = self.filter(stat, nu)
        if len(rows) != 1:
            raise KeyError("Expected one row for statistic %s (nu=%s), found %s." % (stat, nu, len(rows)))
        return rows[0].value

    def write_csv(self, fn):
        with open(fn, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(self.header)
            writer.writerows(self.data)


class EstimateReportList(collections.UserList):
    """
    Per-run estimates of one Monte-Carlo sweep. Failed runs are kept as RunFailure placeholders so that run indices
    stay aligned with seeds.
    """
    header = CsvHeaders.EstimateReport

    @property
    def reports(self):
        return [r for r in self.data if not isinstance(r, RunFailure)]

    @property
    def n_failed(self):
        return sum(1 for r in self.data if isinstance(r, RunFailure))

    @property
    def f_hats(self):
        return np.array([r.f_hat for r in self.reports])

    def write_csv(self, fn):
        with open(fn, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(self.header)
            writer.writerows(r.as_row() for r in self.reports)


class ResultTable(collections.UserList):
    """
    Plain table with a fixed header, used for the experiment summaries.
    """

    def __init__(self, header, initlist=None):
        super().__init__(initlist)
        self.header = list(header)

    def column(self, name):
        idx = self.header.index(name)
        return [row[idx] for row in self.data]

    def write_csv(self, fn):
        with open(fn, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(self.header)
            writer.writerows(self.data)
