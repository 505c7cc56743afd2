"""
Excel rendering of run reports
"""
import json
import logging
import os

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from utils import get_timestamp

logger = logging.getLogger(__name__)

HEADER_FONT = Font(bold=True, color="FFFFFF", size=11)
HEADER_FILL = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
STRIPE_FILL = PatternFill(start_color="E7E6E6", end_color="E7E6E6", fill_type="solid")
FAIL_FILL = PatternFill(start_color="F4CCCC", end_color="F4CCCC", fill_type="solid")
THIN = Side(style='thin')
BORDER = Border(left=THIN, right=THIN, top=THIN, bottom=THIN)

CHECK_HEADERS = ["Check", "Status", "Measured", "Tolerance", "Detail"]
CHECK_WIDTHS = [40, 10, 18, 14, 60]


def _cell_value(value):
    """Numbers and strings go in as they are, anything else as compact JSON"""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    return json.dumps(value, default=str)


class ReportWorkbook:
    """Write a RunReport dict as a workbook with a Summary and a Checks sheet"""

    def __init__(self, file_path):
        self.file_path = file_path
        self.wb = Workbook()
        self.summary = self.wb.active
        self.summary.title = "Summary"
        self.checks = self.wb.create_sheet("Checks")
        self._write_headers(self.checks, CHECK_HEADERS, CHECK_WIDTHS)

    @staticmethod
    def _write_headers(ws, headers, widths):
        for col, (header, width) in enumerate(zip(headers, widths), 1):
            ws.column_dimensions[get_column_letter(col)].width = width
            cell = ws.cell(row=1, column=col)
            cell.value = header
            cell.font = HEADER_FONT
            cell.fill = HEADER_FILL
            cell.alignment = Alignment(horizontal="center", vertical="center", wrap_text=True)

    def add_check(self, check):
        """Append one check row; failed rows are highlighted"""
        row = self.checks.max_row + 1
        data = [
            check.get('name', 'N/A'),
            check.get('status', 'N/A'),
            _cell_value(check.get('measured')),
            _cell_value(check.get('tolerance')),
            _cell_value(check.get('detail')),
        ]
        if check.get('status') != 'pass':
            fill = FAIL_FILL
        else:
            fill = STRIPE_FILL if row % 2 == 0 else None
        for col, value in enumerate(data, 1):
            cell = self.checks.cell(row=row, column=col)
            cell.value = value
            cell.border = BORDER
            if fill:
                cell.fill = fill
            if col in (2, 3, 4):
                cell.alignment = Alignment(horizontal="center", vertical="center")

    def write_summary(self, report):
        self.summary.column_dimensions['A'].width = 20
        self.summary.column_dimensions['B'].width = 80
        rows = [
            ("Command", report.get('command')),
            ("Passed", report.get('passed')),
            ("Wall time (s)", report.get('wall_time')),
            ("Seed", report.get('seed')),
            ("Generated", get_timestamp()),
        ]
        rows += [(f"config.{key}", value) for key, value in sorted(report.get('config', {}).items())]
        for r, (label, value) in enumerate(rows, 1):
            self.summary.cell(row=r, column=1, value=label).font = Font(bold=True)
            self.summary.cell(row=r, column=2, value=_cell_value(value))

    def save(self, report):
        """
        Render and save a report
        Args:
            report: RunReport as a dict
        Returns:
            bool: True when the file was written
        """
        try:
            self.write_summary(report)
            for check in report.get('checks', []):
                self.add_check(check)
            parent = os.path.dirname(self.file_path)
            if parent:
                os.makedirs(parent, exist_ok=True)
            self.wb.save(self.file_path)
            self.wb.close()
            logger.info(f"✓ Wrote workbook {self.file_path}")
            return True
        except (OSError, ValueError) as e:
            logger.error(f"Error writing workbook {self.file_path}: {e}")
            return False
