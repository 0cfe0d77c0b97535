"""
Verification Report PDF
Lists each check with PASS/FAIL and the profile tables of a run
"""

import io
import logging
from dataclasses import dataclass, field
from datetime import datetime
from xml.sax.saxutils import escape

import pandas as pd
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER, TA_JUSTIFY
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

logger = logging.getLogger(__name__)

HEADER_BLUE = colors.HexColor("#1f77b4")
PASS_GREEN = colors.HexColor("#2ca02c")
FAIL_RED = colors.HexColor("#d62728")


@dataclass
class Check:
    """Outcome of one verification step"""

    name: str
    passed: bool
    detail: str = ""
    data: dict = field(default_factory=dict)

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"


def render_check_lines(checks):
    """NAME: PASS|FAIL detail, one line per check"""
    lines = []
    for check in checks:
        line = f"{check.name}: {check.status}"
        if check.detail:
            line += f" {check.detail}"
        lines.append(line)
    return lines


class VerificationReportPDF:
    """Build a short PDF summarizing a verification run"""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _setup_custom_styles(self):
        self.styles.add(ParagraphStyle(
            name="ReportTitle",
            parent=self.styles["Heading1"],
            fontSize=20,
            textColor=HEADER_BLUE,
            spaceAfter=20,
            alignment=TA_CENTER,
            fontName="Helvetica-Bold",
        ))
        self.styles.add(ParagraphStyle(
            name="SectionHeader",
            parent=self.styles["Heading2"],
            fontSize=13,
            textColor=HEADER_BLUE,
            spaceAfter=8,
            spaceBefore=12,
            fontName="Helvetica-Bold",
        ))
        self.styles.add(ParagraphStyle(
            name="ReportBody",
            parent=self.styles["Normal"],
            fontSize=10,
            spaceAfter=8,
            alignment=TA_JUSTIFY,
            leading=14,
        ))

    @staticmethod
    def _table_style(rows):
        return TableStyle([
            ("BACKGROUND", (0, 0), (-1, 0), HEADER_BLUE),
            ("TEXTCOLOR", (0, 0), (-1, 0), colors.whitesmoke),
            ("ALIGN", (0, 0), (-1, -1), "LEFT"),
            ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
            ("FONTSIZE", (0, 0), (-1, -1), 9),
            ("BOTTOMPADDING", (0, 0), (-1, 0), 8),
            ("GRID", (0, 0), (-1, -1), 0.5, colors.black),
            ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.lightgrey]),
        ] + rows)

    def _create_header(self, title, settings):
        elements = [Paragraph(title, self.styles["ReportTitle"])]
        meta = " | ".join(f"<b>{key}:</b> {value}" for key, value in settings.items())
        meta += f"<br/><b>Generated:</b> {datetime.now().strftime('%Y-%m-%d %H:%M')}"
        elements.append(Paragraph(meta, self.styles["ReportBody"]))
        elements.append(Spacer(1, 0.2 * inch))
        return elements

    def _create_checks_section(self, checks):
        elements = [Paragraph("Checks", self.styles["SectionHeader"])]
        data = [["Check", "Status", "Detail"]]
        status_rows = []
        for row, check in enumerate(checks, start=1):
            data.append([check.name, check.status, Paragraph(escape(check.detail or "-"), self.styles["ReportBody"])])
            color = PASS_GREEN if check.passed else FAIL_RED
            status_rows.append(("TEXTCOLOR", (1, row), (1, row), color))
        table = Table(data, colWidths=[2 * inch, 0.8 * inch, 3.7 * inch])
        table.setStyle(self._table_style(status_rows))
        elements.append(table)
        return elements

    def _create_profile_section(self, name, df):
        elements = [Paragraph(f"Profiles: {name}", self.styles["SectionHeader"])]
        data = [list(df.columns)]
        mismatch_rows = []
        for row, record in enumerate(df.itertuples(index=False), start=1):
            data.append(["-" if value is None or value is pd.NA else str(value) for value in record])
            if not record.match:
                mismatch_rows.append(("TEXTCOLOR", (0, row), (-1, row), FAIL_RED))
        table = Table(data, colWidths=[2.8 * inch, 1.2 * inch, 1.2 * inch, 0.8 * inch])
        table.setStyle(self._table_style(mismatch_rows))
        elements.append(table)
        return elements

    def build(self, title, checks, tables=None, settings=None):
        """PDF bytes; tables maps a caption to a profile DataFrame"""
        buffer = io.BytesIO()
        doc = SimpleDocTemplate(
            buffer,
            pagesize=letter,
            rightMargin=54,
            leftMargin=54,
            topMargin=54,
            bottomMargin=50,
        )

        elements = []
        elements.extend(self._create_header(title, settings or {}))
        elements.extend(self._create_checks_section(checks))
        for name, df in (tables or {}).items():
            elements.extend(self._create_profile_section(name, df))

        doc.build(elements)
        pdf = buffer.getvalue()
        buffer.close()
        return pdf

    def write(self, path, title, checks, tables=None, settings=None):
        pdf = self.build(title, checks, tables, settings)
        with open(path, "wb") as handle:
            handle.write(pdf)
        logger.info("Wrote PDF report %s (%d bytes)", path, len(pdf))
        return path
