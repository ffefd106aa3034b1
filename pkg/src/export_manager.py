"""
Export manager for the clonal interference toolkit.
Writes trajectories, ODE solutions, phase reports, predictions and
experiment reports as CSV, JSON or text, and bundles them as ZIP files.
"""

import csv
import io
import json
import re
import zipfile
from datetime import datetime
from typing import IO, Any, Dict, List, Optional

import yaml

from .experiment import ExperimentReport, format_verdicts
from .gillespie import Trajectory
from .lotka_volterra import ODESolution
from .phase_analyzer import PhaseReport
from .scenario_predictor import Prediction, format_predictions, predictions_to_json

ODE_FIELDS = ('t', 'n0', 'n1', 'n2')


class ExportManager:
    """
    Manager class for writing results to files and archives.

    Every writer takes an open text handle so callers decide between files,
    stdout and in-memory buffers.
    """

    def write_trajectory_csv(self, traj: Trajectory, handle: IO[str]) -> None:
        """t,n0,n1,n2,event rows in recording order"""
        traj.write_csv(handle)

    def write_ode_csv(self, solution: ODESolution, handle: IO[str]) -> None:
        """
        t,n0,n1,n2 rows, one per output time.

        Types outside the integrated subsystem are written as 0.
        """
        writer = csv.writer(handle)
        writer.writerow(ODE_FIELDS)
        for t, row in zip(solution.times, solution.full_states()):
            writer.writerow([repr(float(t))] + [repr(float(x)) for x in row])

    def write_phase_rows(self, reports: List[PhaseReport], handle: IO[str]) -> None:
        """One aggregation row per replicate"""
        writer = csv.DictWriter(handle, fieldnames=('replicate',) + PhaseReport.CSV_FIELDS)
        writer.writeheader()
        for index, report in enumerate(reports):
            writer.writerow(dict(replicate=index, **report.csv_row()))

    def phase_report_json(self, report: PhaseReport, cycles: Optional[Dict[str, Any]] = None) -> str:
        payload = report.to_dict()
        if cycles is not None:
            payload['cycles'] = cycles
        return json.dumps(payload, indent=2)

    def predictions_text(self, predictions: List[Prediction], K: Optional[int] = None) -> str:
        return format_predictions(predictions, K)

    def predictions_json(self, predictions: List[Prediction]) -> str:
        return predictions_to_json(predictions)

    def report_json(self, report: ExperimentReport, include_wall_time: bool = True) -> str:
        return report.to_json(include_wall_time=include_wall_time)

    def verdict_table(self, report: ExperimentReport) -> str:
        return format_verdicts(report.verdicts)

    def export_experiment_zip(self, report: ExperimentReport, spec_data: Optional[Dict[str, Any]] = None,
                              K: Optional[int] = None) -> tuple[io.BytesIO, str]:
        """
        Bundle an experiment's outputs as a ZIP archive.

        Args:
            report: Finished experiment report
            spec_data: Spec as a plain mapping, stored as spec.yaml
            K: Carrying capacity, for absolute durations in the predictions table

        Returns:
            tuple: (memory_file, zip_filename)
        """
        files = {
            'report.json': self.report_json(report),
            'verdicts.txt': self.verdict_table(report) + '\n',
            'predictions.json': self.predictions_json(report.predictions),
            'predictions.txt': self.predictions_text(report.predictions, K) + '\n',
        }
        reports = [o.report for o in report.outcomes if o.report is not None]
        if reports:
            buffer = io.StringIO()
            self.write_phase_rows(reports, buffer)
            files['replicates.csv'] = buffer.getvalue()
        if spec_data is not None:
            files['spec.yaml'] = yaml.safe_dump(spec_data, sort_keys=False)

        memory_file = io.BytesIO()
        with zipfile.ZipFile(memory_file, 'w', zipfile.ZIP_DEFLATED) as zip_file:
            for filename, content in files.items():
                zip_file.writestr(filename, content.encode('utf-8'))
        memory_file.seek(0)

        safe_name = self._sanitize_filename(report.name)
        zip_filename = f"{safe_name}_results_{datetime.now().strftime('%Y%m%d_%H%M%S')}.zip"
        return memory_file, zip_filename

    def _sanitize_filename(self, filename: str) -> str:
        """Replace characters that are invalid in file names"""
        safe_filename = re.sub(r'[<>:"/\\|?*\s]+', '_', filename)
        return safe_filename.strip('_') or 'experiment'


# Global instance for easy importing
export_manager = ExportManager()
