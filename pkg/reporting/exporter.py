# -*- coding: utf-8 -*-
"""
reporting/exporter.py
Экспорт отчёта замкнутой оценки в CSV/Markdown/PDF.
"""

import os

import pandas as pd
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer

from infra.error_handler import safe_run
from infra.logger import get_logger
from system import config


class ReportExporter:
    """
    Экспорт отчёта:
    - CSV (таблица час × ошибки)
    - Markdown
    - PDF (текст Markdown построчно)
    """

    def __init__(self, out_dir: str = config.REPORTS_DIR):
        self.logger = get_logger()
        self.out_dir = out_dir
        os.makedirs(self.out_dir, exist_ok=True)

    def _path(self, filename: str) -> str:
        return filename if os.path.isabs(filename) else os.path.join(self.out_dir, filename)

    @safe_run(stage="Экспорт CSV", retries=2)
    def export_csv(self, frame: pd.DataFrame, filename: str = "metrics.csv") -> str:
        path = self._path(filename)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.6f")
        return path

    @safe_run(stage="Экспорт PDF", retries=1)
    def export_pdf(self, md_text: str, filename: str = "report.pdf") -> str:
        path = self._path(filename)
        doc = SimpleDocTemplate(path, pagesize=A4)
        styles = getSampleStyleSheet()
        story = []

        # Текст из Markdown → в параграфы
        for line in md_text.splitlines():
            if not line.strip():
                story.append(Spacer(1, 0.2 * inch))
                continue
            if line.startswith("# "):
                story.append(Paragraph(f"<b><font size=16>{line[2:]}</font></b>", styles["Title"]))
            elif line.startswith("## "):
                story.append(Spacer(1, 0.1 * inch))
                story.append(Paragraph(f"<b><font size=14>{line[3:]}</font></b>", styles["Heading2"]))
            elif line.startswith("|---"):
                continue
            elif line.startswith("|"):
                cells = [c.strip() for c in line.strip("|").split("|")]
                story.append(Paragraph("&nbsp;&nbsp;".join(cells), styles["Code"]))
            elif line.startswith("- "):
                story.append(Paragraph(f"• {line[2:]}", styles["Normal"]))
            else:
                story.append(Paragraph(line, styles["Normal"]))
            story.append(Spacer(1, 0.05 * inch))

        doc.build(story)
        return path

    @safe_run(stage="Экспорт Markdown", retries=1)
    def export_markdown(self, md_text: str, filename: str = "report.md") -> str:
        path = self._path(filename)
        with open(path, "w", encoding="utf-8") as f:
            f.write(md_text)
        return path
