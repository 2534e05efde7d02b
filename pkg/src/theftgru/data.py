"""Smart-meter consumption matrices: parsing, synthesis, validation, CSV I/O.

A consumption matrix holds one customer's honest readings, one row per day and
one column per reporting period (48 half-hours by default).
"""

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import stream

log = logging.getLogger(__name__)

PERIODS_PER_DAY = 48


class ParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ConfigError(ValueError):
    pass


@dataclass
class ConsumptionMatrix:
    customer_id: str
    values: np.ndarray
    periods_per_day: int = PERIODS_PER_DAY

    def __post_init__(self):
        try:
            self.values = np.asarray(self.values, dtype=np.float64)
        except ValueError:
            # ragged input is kept row-wise so validate_matrix can report it
            self.values = [np.asarray(r, dtype=np.float64) for r in self.values]

    @property
    def days(self):
        return len(self.values)


@dataclass
class ValidationReport:
    customer_id: str
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


@dataclass
class ParseResult:
    matrices: list
    dst_records_dropped: int = 0
    incomplete_days_dropped: int = 0
    duplicate_records: int = 0


@dataclass
class SyntheticProfileConfig:
    customer_count: int = 20
    days: int = 100
    base_load_kwh: float = 0.3
    peak_amplitude_kwh: float = 1.2
    noise_std_kwh: float = 0.05
    seed: int = 0
    periods_per_day: int = PERIODS_PER_DAY


def validate_matrix(m):
    """List every invariant violation of ``m``; an empty report means valid."""
    report = ValidationReport(m.customer_id)
    T = m.periods_per_day
    if T < 2:
        report.violations.append(f"periods_per_day={T} < 2")
    if m.days < 1:
        report.violations.append("matrix has no days")
    for d, row in enumerate(m.values):
        row = np.asarray(row)
        if row.shape != (T,):
            report.violations.append(f"day {d}: shape {row.shape}, expected ({T},)")
            continue
        bad = ~np.isfinite(row)
        for t in np.flatnonzero(bad):
            report.violations.append(f"day {d}, period {t + 1}: non-finite value")
        for t in np.flatnonzero(~bad & (row < 0)):
            report.violations.append(f"day {d}, period {t + 1}: negative value {row[t]!r}")
    return report


def _split_record(line):
    return line.replace(",", " ").split()


def parse_meter_file(fp, periods_per_day=PERIODS_PER_DAY, meter_ids=None):
    """Parse ``meter_id code kwh`` triplets into per-meter matrices.

    ``code`` is a 5-digit integer: the first three digits are the day index,
    the last two the period (01..48). Records with a period beyond
    ``periods_per_day`` (daylight-saving artifacts) are dropped, as is every
    day with at least one missing period. ``fp`` may yield bytes or str.
    Pass ``meter_ids`` to keep only those meters.
    """
    keep = None if meter_ids is None else {str(m) for m in meter_ids}
    readings = {}
    result = ParseResult(matrices=[])
    for lineno, raw in enumerate(fp, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        parts = _split_record(raw)
        if not parts:
            continue
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 fields, got {len(parts)}")
        meter, code_s, kwh_s = parts
        if not code_s.isdigit():
            raise ParseError(lineno, f"non-numeric time code {code_s!r}")
        try:
            kwh = float(kwh_s)
        except ValueError:
            raise ParseError(lineno, f"non-numeric reading {kwh_s!r}") from None
        if not math.isfinite(kwh) or kwh < 0:
            raise ParseError(lineno, f"reading must be finite and >= 0, got {kwh_s!r}")
        code = int(code_s)
        day, period = divmod(code, 100)
        if period == 0:
            raise ParseError(lineno, f"period 00 in time code {code_s!r}")
        if period > periods_per_day:
            result.dst_records_dropped += 1
            continue
        if keep is not None and meter not in keep:
            continue
        days = readings.setdefault(meter, {})
        row = days.get(day)
        if row is None:
            row = days[day] = np.full(periods_per_day, np.nan)
        if not np.isnan(row[period - 1]):
            result.duplicate_records += 1
        row[period - 1] = kwh

    for meter in sorted(readings):
        days = readings[meter]
        complete = []
        for day in sorted(days):
            row = days[day]
            if np.isnan(row).any():
                result.incomplete_days_dropped += 1
            else:
                complete.append(row)
        if complete:
            result.matrices.append(
                ConsumptionMatrix(meter, np.vstack(complete), periods_per_day))
    if result.dst_records_dropped:
        log.warning("dropped %d records with period > %d",
                    result.dst_records_dropped, periods_per_day)
    if result.incomplete_days_dropped:
        log.warning("dropped %d incomplete meter-days", result.incomplete_days_dropped)
    if result.duplicate_records:
        log.warning("%d duplicate records overwritten", result.duplicate_records)
    return result


def _bump(t, centre, width):
    return np.exp(-0.5 * ((t - centre) / width) ** 2)


def generate_synthetic_profiles(config):
    """Two-peak residential load profiles, one matrix per customer.

    Each customer gets its own morning/evening peak phases, widths and
    amplitudes; days jitter around those. Output is deterministic in
    ``config.seed`` and clamped at zero.
    """
    if config.customer_count < 1 or config.days < 1:
        raise ConfigError("customer_count and days must both be >= 1")
    if not config.base_load_kwh > 0:
        raise ConfigError("base_load_kwh must be > 0")
    if config.peak_amplitude_kwh < 0 or config.noise_std_kwh < 0:
        raise ConfigError("peak_amplitude_kwh and noise_std_kwh must be >= 0")
    T = config.periods_per_day
    t = np.arange(T, dtype=np.float64)
    scale = T / 48.0
    out = []
    for c in range(config.customer_count):
        rng = stream(config.seed, "profile", c)
        morning = rng.uniform(12, 20) * scale
        evening = rng.uniform(34, 44) * scale
        widths = rng.uniform(1.5, 4.0, size=2) * scale
        weights = rng.uniform(0.3, 1.0, size=2)

        shift = rng.normal(0.0, 1.0, size=(config.days, 2)) * scale
        day_amp = rng.uniform(0.6, 1.4, size=(config.days, 2))
        noise = rng.normal(0.0, 1.0, size=(config.days, T))

        values = np.empty((config.days, T))
        for d in range(config.days):
            shape = (weights[0] * day_amp[d, 0] * _bump(t, morning + shift[d, 0], widths[0])
                     + weights[1] * day_amp[d, 1] * _bump(t, evening + shift[d, 1], widths[1]))
            values[d] = config.base_load_kwh + config.peak_amplitude_kwh * shape
        values += config.noise_std_kwh * noise
        np.maximum(values, 0.0, out=values)
        out.append(ConsumptionMatrix(f"S{c:04d}", values, T))
    return out


def period_columns(T):
    return [f"p{t:02d}" for t in range(1, T + 1)]


def write_consumption_csv(matrices, fp):
    """Write ``customer_id,day,p01..pT``; floats use repr for exact round trips."""
    if not matrices:
        raise ValueError("nothing to write")
    T = matrices[0].periods_per_day
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["customer_id", "day"] + period_columns(T))
    for m in matrices:
        for d, row in enumerate(m.values):
            w.writerow([m.customer_id, d] + [repr(float(v)) for v in row])


def read_consumption_csv(fp):
    reader = csv.reader(fp)
    header = next(reader)
    if header[:2] != ["customer_id", "day"]:
        raise ValueError(f"unexpected header {header[:2]}")
    T = len(header) - 2
    rows = {}
    for rec in reader:
        rows.setdefault(rec[0], []).append([float(v) for v in rec[2:]])
    return [ConsumptionMatrix(cid, np.array(r), T) for cid, r in rows.items()]


def matrix_checksum(matrices):
    """Stable digest of matrix contents, for regression anchors."""
    h = hashlib.sha256()
    for m in matrices:
        h.update(m.customer_id.encode())
        h.update(np.ascontiguousarray(m.values, dtype="<f8").tobytes())
    return h.hexdigest()


def parse_meter_text(text, **kwargs):
    return parse_meter_file(io.StringIO(text), **kwargs)
