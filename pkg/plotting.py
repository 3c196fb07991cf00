# plotting.py
import logging
from pathlib import Path

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from config import CHART_COLORS
from errors import DataError
from utils import format_score

logger = logging.getLogger(__name__)


# =============================================================================
# Report Charts
# =============================================================================
def create_split_chart(report):
    """Per-split metric values as grouped bars, one colour per split."""
    data = report.per_split.dropna(subset=["value"]).copy()
    if data.empty:
        logger.warning("No metric values to plot for %s", report.name)
        return go.Figure()
    data["label"] = data["task"] + "/" + data["metric"]
    data["split"] = "split " + data["split"].astype(str)
    data["score"] = data["value"].map(format_score)

    fig = px.bar(data, x="label", y="value", color="split", barmode="group",
                 color_discrete_sequence=CHART_COLORS,
                 title=f"Per-split results: {report.name}",
                 labels={"label": "Metric", "value": "Score", "split": "Split"},
                 custom_data=["score"])
    fig.update_traces(hovertemplate="<b>%{x}</b><br>Score: %{customdata[0]}%<extra></extra>")
    fig.update_yaxes(range=[0, 1.05])
    fig.update_layout(margin=dict(t=50, b=50), legend_title_text="Split")
    return fig


def create_summary_chart(reports):
    """Mean ± std of every metric, one bar group per feature."""
    frames = []
    for report in reports:
        summary = report.summary()
        summary["feature"] = report.name
        frames.append(summary)
    if not frames:
        return go.Figure()
    data = pd.concat(frames, ignore_index=True)
    data["label"] = data["task"] + "/" + data["metric"]

    fig = go.Figure()
    for i, (feature, group) in enumerate(data.groupby("feature", sort=False)):
        fig.add_trace(go.Bar(
            x=group["label"], y=group["mean"], name=feature,
            error_y=dict(type="data", array=group["std"].fillna(0.0).tolist(), visible=True),
            marker_color=CHART_COLORS[i % len(CHART_COLORS)],
            hovertemplate="<b>%{x}</b><br>Mean: %{y:.3f}<extra>" + feature + "</extra>",
        ))
    fig.update_layout(
        title="Mean over splits",
        barmode="group",
        yaxis=dict(range=[0, 1.05], title="Score", gridcolor="rgba(128,128,128,0.2)"),
        xaxis=dict(title="Metric"),
        margin=dict(t=50, b=50),
        legend_title_text="Feature",
    )
    return fig


def write_report_html(reports, path):
    """Writes the summary chart and every per-split chart into one HTML file."""
    figures = [create_summary_chart(reports)] + [create_split_chart(r) for r in reports]
    parts = [fig.to_html(full_html=False, include_plotlyjs="cdn" if i == 0 else False)
             for i, fig in enumerate(figures)]
    html = "<html><head><meta charset='utf-8'></head><body>\n" + "\n".join(parts) + "\n</body></html>\n"
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(html, encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write chart file '{path}': {e}") from e
    logger.info("Wrote report charts to %s", path)
