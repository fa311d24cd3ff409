"""
Charts and Report Export
ROC / sensitivity-specificity SVG plots and PDF evaluation reports
"""
import math
from pathlib import Path
from typing import Union

import matplotlib
from matplotlib.figure import Figure

from errors import ToolkitIOError
from evaluation import EvalReport, RocCurve
from logger import log

# Fixed so the same curve always gives the same SVG bytes
SVG_STYLE = {"svg.hashsalt": "dengue-toolkit", "svg.fonttype": "none"}


def emit_roc_svg(curve: RocCurve, path: Union[str, Path], title: str = "ROC"):
    """
    Standalone SVG: ROC curve (left) and sensitivity/specificity versus threshold (right)

    Args:
        curve: ROC points
        path: Output file
        title: Plot title prefix
    """
    with matplotlib.rc_context(SVG_STYLE):
        fig = Figure(figsize=(10, 4.5))
        ax_roc, ax_threshold = fig.subplots(1, 2)

        ax_roc.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1, label="chance")
        ax_roc.plot(curve.fp_rates, curve.tp_rates, marker="o", markersize=3, color="tab:blue", label="ROC")
        ax_roc.set_xlim(-0.02, 1.02)
        ax_roc.set_ylim(-0.02, 1.02)
        ax_roc.set_xlabel("1 - Specificity (FP rate)")
        ax_roc.set_ylabel("Sensitivity (TP rate)")
        ax_roc.set_title(f"{title} curve")
        ax_roc.text(0.60, 0.08, f"AUC = {curve.auc:.3f}", transform=ax_roc.transAxes)
        ax_roc.legend(loc="lower right", bbox_to_anchor=(1.0, 0.15))

        finite = [i for i, t in enumerate(curve.thresholds) if math.isfinite(t)]
        if finite:
            thresholds = [curve.thresholds[i] for i in finite]
            ax_threshold.plot(thresholds, [curve.sensitivity[i] for i in finite], marker=".", label="Sensitivity")
            ax_threshold.plot(thresholds, [curve.specificity[i] for i in finite], marker=".", label="Specificity")
            ax_threshold.legend(loc="best")
        else:
            ax_threshold.text(0.5, 0.5, "no finite threshold", ha="center", va="center", transform=ax_threshold.transAxes)
        ax_threshold.set_ylim(-0.02, 1.02)
        ax_threshold.set_xlabel("Score threshold")
        ax_threshold.set_ylabel("Rate")
        ax_threshold.set_title("Sensitivity and specificity")

        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise ToolkitIOError(f"cannot write SVG: {e}", file=str(path)) from None
    log.log_step("PLOT", "ROC curve", str(path), "COMPLETED")


def export_report_pdf(report: EvalReport, path: Union[str, Path]):
    """Export an evaluation report (summary, confusion matrix) to PDF"""
    from reportlab.lib import colors
    from reportlab.lib.pagesizes import letter
    from reportlab.lib.styles import getSampleStyleSheet
    from reportlab.lib.units import inch
    from reportlab.platypus import Paragraph, Preformatted, SimpleDocTemplate, Spacer, Table, TableStyle

    # invariant=1 drops the creation date and random document id
    doc = SimpleDocTemplate(str(path), pagesize=letter, invariant=1, title="Cross-validation report")
    styles = getSampleStyleSheet()
    story = []

    story.append(Paragraph(f"<b>Cross-validation report: {report.algorithm}</b>", styles["Title"]))
    story.append(Spacer(1, 0.2 * inch))
    story.append(
        Paragraph(
            f"{report.k} folds, seed {report.seed}, {report.n} instances. ROC scores: {report.score_source}.",
            styles["Normal"],
        )
    )
    story.append(Spacer(1, 0.2 * inch))

    cm = report.confusion
    table = Table(
        [
            ["", f"predicted {report.positive_label}", f"predicted {report.negative_label}"],
            [f"actual {report.positive_label}", cm.tp, cm.fn],
            [f"actual {report.negative_label}", cm.fp, cm.tn],
        ]
    )
    table.setStyle(
        TableStyle(
            [
                ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
                ("BACKGROUND", (0, 0), (-1, 0), colors.lightgrey),
                ("ALIGN", (1, 1), (-1, -1), "RIGHT"),
            ]
        )
    )
    story.append(table)
    story.append(Spacer(1, 0.3 * inch))
    story.append(Preformatted(report.render_text(), styles["Code"]))

    try:
        doc.build(story)
    except OSError as e:
        raise ToolkitIOError(f"cannot write PDF: {e}", file=str(path)) from None
    log.log_step("EXPORT", "evaluation report", str(path), "COMPLETED")
