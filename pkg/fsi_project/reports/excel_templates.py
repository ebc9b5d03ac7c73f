#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Excel summary workbooks for simulation and verification runs.
Each table written as CSV also gets a styled sheet here, plus a run
summary sheet and, for time series, a line chart.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import pandas as pd
from openpyxl import Workbook
from openpyxl.chart import LineChart, Reference
from openpyxl.styles import Alignment, Border, Font, NamedStyle, PatternFill, Side
from openpyxl.utils import get_column_letter

from utils.logging_conf import log_output_event
from utils.time_utils import format_timestamp, get_utc_now

logger = logging.getLogger(__name__)

# Excel limits sheet titles to 31 characters
MAX_SHEET_TITLE = 31


class BaseReportTemplate:
    """Shared named styles and sheet helpers for the summary workbooks."""

    def __init__(self):
        self.wb = None
        self._init_styles()

    def _init_styles(self):
        thin = Side(style="thin")
        box = Border(left=thin, right=thin, top=thin, bottom=thin)
        accent = "366092"

        def style(name: str, font: Font, horizontal: str, border: Optional[Border] = None,
                  fill: Optional[PatternFill] = None, number_format: Optional[str] = None) -> NamedStyle:
            s = NamedStyle(name=name)
            s.font = font
            s.alignment = Alignment(horizontal=horizontal, vertical="center")
            if border is not None:
                s.border = border
            if fill is not None:
                s.fill = fill
            if number_format is not None:
                s.number_format = number_format
            return s

        self.header_style = style("header", Font(bold=True, size=11, color="FFFFFF"), "center", box,
                                  PatternFill(start_color=accent, end_color=accent, fill_type="solid"))
        self.title_style = style("title", Font(bold=True, size=16, color=accent), "center")
        self.subtitle_style = style("subtitle", Font(bold=True, size=11, color="666666"), "left")
        self.data_style = style("data", Font(size=10), "center", box)
        # fields span many decades; integers are step counts and sizes
        self.number_style = style("scientific", Font(size=10), "right", box, number_format="0.000E+00")
        self.integer_style = style("integer", Font(size=10), "right", box, number_format="#,##0")

        self.styles = (self.header_style, self.title_style, self.subtitle_style,
                       self.data_style, self.number_style, self.integer_style)

    def _new_workbook(self) -> None:
        self.wb = Workbook()
        active = self.wb.active
        if active is not None:
            self.wb.remove(active)
        for style in self.styles:
            if style.name not in self.wb.named_styles:
                self.wb.add_named_style(style)

    def _add_title(self, ws, title: str, row: int = 1) -> int:
        ws.cell(row=row, column=1, value=title)
        ws.cell(row=row, column=1).style = self.title_style
        ws.merge_cells(start_row=row, start_column=1, end_row=row, end_column=6)
        return row + 2

    def _add_dataframe_table(self, ws, df: pd.DataFrame, start_row: int, start_col: int = 1) -> int:
        """
        Add DataFrame as formatted table to worksheet.

        Returns:
            int: Next available row
        """
        current_row = start_row
        for col_idx, column in enumerate(df.columns):
            cell = ws.cell(row=current_row, column=start_col + col_idx, value=str(column))
            cell.style = self.header_style
        current_row += 1

        for row_data in df.itertuples(index=False):
            for col_idx, value in enumerate(row_data):
                if hasattr(value, "item"):
                    value = value.item()
                if isinstance(value, float) and not math.isfinite(value):
                    value = str(value)
                cell = ws.cell(row=current_row, column=start_col + col_idx, value=value)
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    cell.style = self.data_style
                elif isinstance(value, int):
                    cell.style = self.integer_style
                else:
                    cell.style = self.number_style
            current_row += 1
        return current_row + 1

    def _add_summary_stats(self, ws, stats: Dict[str, Any], start_row: int) -> int:
        current_row = start_row
        for label, value in stats.items():
            ws.cell(row=current_row, column=1, value=str(label)).style = self.subtitle_style
            cell = ws.cell(row=current_row, column=2, value=value if isinstance(value, (int, float, str)) else str(value))
            cell.style = self.number_style if isinstance(value, float) else self.data_style
            current_row += 1
        return current_row + 1

    def _add_line_chart(self, ws, df: pd.DataFrame, x_column: str, y_columns: Sequence[str],
                        header_row: int, title: str, position: str) -> None:
        try:
            chart = LineChart()
            chart.title = title
            chart.x_axis.title = x_column
            chart.y_axis.title = "value"
            last_row = header_row + len(df)
            x_index = list(df.columns).index(x_column) + 1
            categories = Reference(ws, min_col=x_index, min_row=header_row + 1, max_row=last_row)
            for name in y_columns:
                col = list(df.columns).index(name) + 1
                data = Reference(ws, min_col=col, min_row=header_row, max_row=last_row)
                chart.add_data(data, titles_from_data=True)
            chart.set_categories(categories)
            ws.add_chart(chart, position)
        except Exception as e:
            logger.warning(f"Failed to create line chart: {e}")

    def _auto_adjust_columns(self, ws) -> None:
        for column in ws.columns:
            max_length = 0
            column_letter = get_column_letter(column[0].column)
            for cell in column:
                if cell.value is not None:
                    max_length = max(max_length, len(str(cell.value)))
            ws.column_dimensions[column_letter].width = min(max_length + 2, 40)


class RunSummaryTemplate(BaseReportTemplate):
    """Workbook with a summary sheet and one sheet per result table."""

    def generate(self, title: str, summary: Dict[str, Any], tables: Dict[str, pd.DataFrame],
                 file_path: Path, chart: Optional[Dict[str, Any]] = None) -> Path:
        """
        Args:
            title: Workbook title (summary sheet heading)
            summary: Key/value pairs for the summary sheet
            tables: Sheet name -> DataFrame
            file_path: Output .xlsx path
            chart: Optional {"table", "x", "y": [...]} line chart
        """
        file_path = Path(file_path)
        log_output_event("workbook", str(file_path), "started")
        self._new_workbook()

        ws = self.wb.create_sheet("Summary")
        row = self._add_title(ws, title)
        stats = {"generated": format_timestamp(get_utc_now())}
        stats.update(summary)
        self._add_summary_stats(ws, stats, row)
        self._auto_adjust_columns(ws)

        for name, df in tables.items():
            sheet = self.wb.create_sheet(name[:MAX_SHEET_TITLE])
            self._add_dataframe_table(sheet, df, 1)
            if chart and chart.get("table") == name and len(df) > 1:
                self._add_line_chart(sheet, df, chart["x"], chart["y"], 1, name,
                                     f"{get_column_letter(len(df.columns) + 2)}2")
            self._auto_adjust_columns(sheet)

        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            self.wb.save(file_path)
        except OSError as e:
            log_output_event("workbook", str(file_path), "failed", error=e)
            raise
        log_output_event("workbook", str(file_path), "completed", sheets=len(tables) + 1)
        return file_path


def write_summary_workbook(path, title: str, summary: Dict[str, Any],
                           tables: Dict[str, pd.DataFrame], chart: Optional[Dict[str, Any]] = None) -> Path:
    return RunSummaryTemplate().generate(title, summary, tables, Path(path), chart)
