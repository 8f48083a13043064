"""
Result emission: CSV tables, the run manifest and the resolved scenario file.

Numbers are written with 6 significant digits, undefined values as empty
fields, rows newline-terminated in a fixed column order.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from config import config, dump_config
from models.schemas import CellResult, RunManifest
from services.experiment_service import SUMMARY_METRICS

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["scenario", "variant", "interval_s", "seed", "pdr", "app_pdr", "ae2ed_s", "apc_mw"]
SUMMARY_CI_COLUMNS = ["scenario", "variant", "interval_s", "n"] + [
    f"{m}_{s}" for m in SUMMARY_METRICS for s in ("mean", "ci95")
] + ["error"]
NODE_POWER_COLUMNS = ["variant", "interval_s", "seed", "node_id", "bin_start_s", "cpu_mw", "lpm_mw", "tx_mw", "rx_mw"]
FLAG_COLUMNS = ["scenario", "variant", "interval_s", "seed", "window_start_s", "observer_id", "flagged_id", "count", "fence"]
RUN_COLUMNS = ["scenario", "variant", "interval_s", "seed", "generated", "delivered", "data_attempts",
               "out_of_range_adoptions", "replays", "dio_suppressed", "invalid_dio", "exposure", "fingerprint"]


class ReportError(OSError):
    """Output directory or file cannot be written"""


class EmptyResultsError(ValueError):
    """Nothing to emit"""


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def exposure_field(exposure) -> str:
    """attacker:neighbors pairs, e.g. "3:4;17:2"."""
    return ";".join(f"{a}:{n}" for a, n in sorted(exposure.items()))


class ReportService:
    """Writes every output file of one invocation into out_dir"""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _write_rows(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self._path(name)
        try:
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([fmt(v) for v in row])
        except OSError as e:
            raise ReportError(f"Cannot write {path}: {e.strerror or e}") from e
        logger.info(f"Wrote {path}")
        return path

    def _write_text(self, name: str, text: str) -> Path:
        path = self._path(name)
        try:
            path.write_text(text, encoding="utf-8", newline="\n")
        except OSError as e:
            raise ReportError(f"Cannot write {path}: {e.strerror or e}") from e
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def _cell_key(cell: CellResult) -> list:
        return [cell.scenario, cell.variant, cell.interval_s]

    def write_summary(self, cells: Sequence[CellResult]) -> Path:
        rows = (
            self._cell_key(c) + [o.report.seed, o.report.pdr, o.report.app_pdr, o.report.ae2ed_s, o.report.apc_mw]
            for c in cells for o in c.outcomes
        )
        return self._write_rows("summary.csv", SUMMARY_COLUMNS, rows)

    def write_summary_ci(self, cells: Sequence[CellResult]) -> Path:
        rows = []
        for c in cells:
            row = self._cell_key(c) + [len(c.outcomes)]
            for metric in SUMMARY_METRICS:
                s = c.summary.get(metric)
                row += [s.mean, s.ci95] if s else [None, None]
            rows.append(row + [c.error])
        return self._write_rows("summary_ci.csv", SUMMARY_CI_COLUMNS, rows)

    def write_node_power(self, cells: Sequence[CellResult]) -> Path:
        def rows():
            for c in cells:
                for o in c.outcomes:
                    for node_id in sorted(o.report.per_node_series):
                        for b in o.report.per_node_series[node_id]:
                            yield [c.variant, c.interval_s, o.report.seed, node_id,
                                   b.bin_start_s, b.cpu_mw, b.lpm_mw, b.tx_mw, b.rx_mw]
        return self._write_rows("node_power.csv", NODE_POWER_COLUMNS, rows())

    def write_detector_flags(self, cells: Sequence[CellResult]) -> Path:
        rows = (
            self._cell_key(c) + [o.report.seed, f.window_start_s, f.observer_id, f.flagged_id, f.count, f.fence]
            for c in cells for o in c.outcomes for f in o.flags
        )
        return self._write_rows("detector_flags.csv", FLAG_COLUMNS, rows)

    def write_runs(self, cells: Sequence[CellResult]) -> Path:
        """Raw per-run counters next to the metric summary"""
        rows = (
            self._cell_key(c) + [
                r.seed, r.generated, r.delivered, r.data_attempts, r.out_of_range_adoptions,
                r.replays, r.dio_suppressed, r.invalid_dio, exposure_field(r.exposure), r.fingerprint
            ]
            for c in cells for r in (o.report for o in c.outcomes)
        )
        return self._write_rows("runs.csv", RUN_COLUMNS, rows)

    def write_manifest(self, manifest: RunManifest) -> Path:
        text = json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
        return self._write_text("manifest.json", text)

    def emit_outputs(self, cells: Sequence[CellResult], manifest: RunManifest) -> List[Path]:
        """
        Write all result files.

        Raises:
            EmptyResultsError: no cell produced a run
            ReportError: the directory or a file cannot be written
        """
        if not cells or not any(c.outcomes for c in cells):
            logger.warning("No results to write")
            raise EmptyResultsError("No simulation results to write")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ReportError(f"Cannot create {self.out_dir}: {e.strerror or e}") from e
        return [
            self.write_summary(cells),
            self.write_summary_ci(cells),
            self.write_node_power(cells),
            self.write_detector_flags(cells),
            self.write_runs(cells),
            self.write_manifest(manifest),
            self._write_text("scenario.conf", dump_config(manifest.config)),
        ]


# Singleton instance
_report_service: Optional[ReportService] = None


def get_report_service(out_dir: Optional[str] = None) -> ReportService:
    """Get report service singleton, rebuilt when asked for another output directory"""
    global _report_service
    target = Path(out_dir or config.OUTPUT_DIR)
    if _report_service is None or _report_service.out_dir != target:
        _report_service = ReportService(target)
    return _report_service
