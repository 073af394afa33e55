"""Price ingestion, log returns, outlier filtering and artifact persistence.

Price files are CSV with header ``date,adjusted_close`` (ISO-8601 dates,
decimal point, no thousands separators). Every artifact written here starts
with ``#`` comment lines holding the tool version and the RunSpec JSON, and
contains no timestamps, so identical runs produce identical bytes.
"""

import json
import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from .errors import DataError, ReportError
from .models import FitSummary, IterationRow, OutlierRule, RemovedObservation, ReturnSample, RunSpec

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["date", "adjusted_close"]
RETURN_COLUMN = "return"
TRACE_COLUMNS = list(IterationRow.model_fields)
FLOAT_FORMAT = "%.17g"


class PriceSeries(NamedTuple):
    """Validated adjusted closing prices with strictly increasing dates."""

    dates: np.ndarray
    prices: np.ndarray
    source: str

    def __len__(self) -> int:
        return int(self.prices.size)


def _count_comment_lines(text: str) -> int:
    count = 0
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        count += 1
    return count


def _read_text(path: Path) -> str:
    if not path.exists():
        raise DataError("file not found", path=str(path))
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read file: {e}", path=str(path))


def _parse_floats(column: pd.Series) -> np.ndarray:
    """Parse decimal strings exactly as written (NaN where not a number)."""

    def parse(raw: str) -> float:
        try:
            return float(raw)
        except (TypeError, ValueError):
            return np.nan

    return np.array([parse(raw) for raw in column], dtype=float)


def load_prices(path: str | Path) -> PriceSeries:
    """Load and validate a price CSV.

    Raises:
        DataError: On a missing file, wrong header, malformed or non-positive
            rows (all offending line numbers are listed), or dates that are
            not strictly increasing
    """
    path = Path(path)
    text = _read_text(path)
    if not text.strip():
        raise DataError("file is empty", path=str(path))

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, skip_blank_lines=False)
    except pd.errors.ParserError as e:
        raise DataError(f"malformed CSV: {e}", path=str(path))
    if list(df.columns) != PRICE_COLUMNS:
        raise DataError(f"expected header {','.join(PRICE_COLUMNS)}, got {','.join(df.columns)}", path=str(path))
    # Header is line 1; blank lines keep their row so numbering follows the file
    lines = df.index.to_numpy() + 2
    blank = (df.fillna("") == "").all(axis=1).to_numpy()
    df, lines = df[~blank].reset_index(drop=True), lines[~blank]
    if df.empty:
        raise DataError("no price rows", path=str(path))

    dates = pd.to_datetime(df["date"], format="%Y-%m-%d", errors="coerce")
    prices = _parse_floats(df["adjusted_close"])

    problems = []
    for line, raw_date, raw_price, date, price in zip(lines, df["date"], df["adjusted_close"], dates, prices):
        if pd.isna(date):
            problems.append(f"line {line}: invalid date {raw_date!r}")
        elif pd.isna(price) or not np.isfinite(price):
            problems.append(f"line {line}: invalid price {raw_price!r}")
        elif price <= 0:
            problems.append(f"line {line}: price must be positive, got {raw_price!r}")
    if problems:
        raise DataError(
            f"{len(problems)} malformed row(s):\n" + "\n".join(f"  {p}" for p in problems), path=str(path)
        )

    steps = np.diff(dates.to_numpy())
    bad = np.flatnonzero(steps <= np.timedelta64(0, "D"))
    if bad.size:
        raise DataError("dates are not strictly increasing", path=str(path), line=int(lines[bad[0] + 1]))

    logger.info("loaded %d prices from %s", len(df), path)
    return PriceSeries(
        dates=dates.to_numpy(dtype="datetime64[D]"),
        prices=prices,
        source=str(path),
    )


def log_returns(prices: PriceSeries, scale: float = 100.0) -> ReturnSample:
    """Scaled log returns scale * log(S_j / S_{j-1}); N prices give N - 1 returns."""
    if len(prices) < 2:
        raise DataError(f"need at least 2 prices, got {len(prices)}", path=prices.source)
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    values = np.diff(np.log(prices.prices)) * scale
    return ReturnSample(values=values, source_meta=f"{prices.source} log returns x{scale:g}")


def _original_positions(sample: ReturnSample) -> np.ndarray:
    """Positions of the current values in the sample before any removal."""
    total = len(sample) + len(sample.removed)
    kept = np.ones(total, dtype=bool)
    kept[[r.index for r in sample.removed]] = False
    return np.flatnonzero(kept)


def _full_values(sample: ReturnSample) -> np.ndarray:
    """The sample with its removed observations put back."""
    positions = _original_positions(sample)
    full = np.empty(len(sample) + len(sample.removed))
    full[positions] = sample.values
    for r in sample.removed:
        full[r.index] = r.value
    return full


def _scores(sample: ReturnSample, kind: str, y: np.ndarray) -> np.ndarray:
    """Rule scores of y; z-scores use the statistics of the unfiltered sample."""
    if kind == "abs_threshold":
        return np.abs(y)
    full = _full_values(sample)
    std = float(np.std(full))
    if std == 0.0:
        raise DataError("z-score rule on a constant sample")
    return np.abs(y - float(np.mean(full))) / std


def calibrate_threshold(sample: ReturnSample, target_count: int, kind: str = "abs_threshold") -> float:
    """Threshold that flags exactly ``target_count`` observations under ``kind``.

    The sweep result is the midpoint between the target_count-th and the
    (target_count+1)-th largest score.

    Raises:
        DataError: If ties make the count unreachable or target_count >= sample size
    """
    if kind not in ("abs_threshold", "z_score"):
        raise ValueError(f"cannot calibrate rule kind {kind!r}")
    scores = np.sort(_scores(sample, kind, _full_values(sample)))[::-1]
    if target_count >= scores.size:
        raise DataError(f"target_count {target_count} is not below the sample size {scores.size}")
    upper = scores[target_count - 1] if target_count > 0 else 2 * scores[0]
    lower = scores[target_count]
    if upper == lower:
        raise DataError(f"tied scores at {lower:g}: no threshold flags exactly {target_count} observations")
    threshold = float((upper + lower) / 2)
    logger.info("%s threshold %.6g flags %d observations", kind, threshold, target_count)
    return threshold


def filter_outliers(sample: ReturnSample, rule: OutlierRule | None = None) -> ReturnSample:
    """Remove observations flagged by ``rule`` and record them for audit.

    abs_threshold flags |y| > t; z_score flags |y - mean| / std > k with mean
    and std of the unfiltered sample (previously removed observations
    included), so applying the same rule twice removes nothing more.

    Raises:
        DataError: If the rule would remove more than rule.max_fraction of
            the sample and allow_large_removal is not set
    """
    rule = rule or OutlierRule()
    if rule.kind == "none" or len(sample) == 0:
        return sample

    threshold = rule.threshold
    if threshold is None:
        threshold = calibrate_threshold(sample, rule.target_count, rule.kind)
    flagged = _scores(sample, rule.kind, sample.values) > threshold
    count = int(flagged.sum())

    total = len(sample) + len(sample.removed)
    if count > rule.max_fraction * total and not rule.allow_large_removal:
        raise DataError(
            f"rule {rule.kind} > {threshold:g} would remove {count} of {total} observations "
            f"(limit {rule.max_fraction:.0%}); set allow_large_removal to proceed"
        )
    if count == 0:
        return sample

    positions = _original_positions(sample)
    reason = f"{rule.kind} > {threshold:.6g}"
    removed = [
        RemovedObservation(index=int(positions[i]), value=float(sample.values[i]), reason=reason)
        for i in np.flatnonzero(flagged)
    ]
    for r in removed:
        logger.info("removed observation %d (%.6g): %s", r.index, r.value, reason)
    return ReturnSample(
        values=sample.values[~flagged],
        removed=sorted(sample.removed + removed, key=lambda r: r.index),
        source_meta=sample.source_meta,
    )


def artifact_header(spec: RunSpec | None) -> str:
    """Comment lines naming the tool version and the run spec."""
    from . import __version__

    lines = [f"# vgfit {__version__}"]
    if spec is not None:
        lines.append(f"# spec: {spec.model_dump_json()}")
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, frame: pd.DataFrame, spec: RunSpec | None) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(artifact_header(spec))
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ReportError(f"cannot write file: {e}", path=str(path))
    logger.info("wrote %s", path)
    return path


def save_sample(sample: ReturnSample, path: str | Path, spec: RunSpec | None = None) -> Path:
    """Write a return sample as a single ``return`` column."""
    return _write_csv(Path(path), pd.DataFrame({RETURN_COLUMN: sample.values}), spec)


def load_returns(path: str | Path) -> ReturnSample:
    """Read a return sample written by save_sample.

    Raises:
        DataError: On a missing ``return`` column or a non-finite value (line given)
    """
    path = Path(path)
    text = _read_text(path)
    skipped = _count_comment_lines(text)
    try:
        df = pd.read_csv(path, comment="#", dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataError("file has no header", path=str(path))
    if RETURN_COLUMN not in df.columns:
        raise DataError(f"missing '{RETURN_COLUMN}' column", path=str(path))
    values = _parse_floats(df[RETURN_COLUMN])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DataError(
            f"invalid return {df[RETURN_COLUMN].iloc[bad[0]]!r}", path=str(path), line=int(skipped + 2 + bad[0])
        )
    logger.info("loaded %d returns from %s", values.size, path)
    return ReturnSample(values=values, source_meta=str(path))


def save_trace(rows: list[IterationRow], path: str | Path, spec: RunSpec | None = None) -> Path:
    """Write a Newton-Raphson trace, one row per accepted iterate (header only when empty)."""
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=TRACE_COLUMNS)
    return _write_csv(Path(path), frame, spec)


def load_trace(path: str | Path) -> list[IterationRow]:
    path = Path(path)
    _read_text(path)
    df = pd.read_csv(path, comment="#", float_precision="round_trip")
    missing = [c for c in TRACE_COLUMNS if c not in df.columns]
    if missing:
        raise ReportError(f"trace is missing columns {missing}", path=str(path))
    try:
        return [IterationRow.model_validate(record) for record in df[TRACE_COLUMNS].to_dict("records")]
    except PydanticValidationError as e:
        raise ReportError(f"invalid trace row: {e.errors()[0]['msg']}", path=str(path))


def save_grid(path: str | Path, columns: dict[str, np.ndarray], spec: RunSpec | None = None) -> Path:
    """Write equal-length named columns (density grids, KS null density, histograms)."""
    return _write_csv(Path(path), pd.DataFrame(columns), spec)


def save_report(summary: FitSummary, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``<label>_trace.csv`` and ``<label>_summary.json`` into out_dir.

    Returns:
        (trace path, summary path)
    """
    out_dir = Path(out_dir)
    label = summary.report.label
    trace_path = save_trace(summary.report.iterations, out_dir / f"{label}_trace.csv", summary.spec)
    summary_path = out_dir / f"{label}_summary.json"
    try:
        summary_path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ReportError(f"cannot write file: {e}", path=str(summary_path))
    logger.info("wrote %s", summary_path)
    return trace_path, summary_path


def load_report(path: str | Path) -> FitSummary:
    """Read a summary JSON written by save_report.

    Raises:
        ReportError: If the file is missing, not JSON, or not a valid summary
    """
    path = Path(path)
    if not path.exists():
        raise ReportError("file not found", path=str(path))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ReportError(f"cannot parse summary: {e}", path=str(path))
    try:
        return FitSummary.model_validate(data)
    except PydanticValidationError as e:
        problems = "\n".join(
            f"  {'.'.join(str(x) for x in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ReportError(f"invalid summary:\n{problems}", path=str(path))
