from __future__ import annotations
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from jinja2 import Environment, FileSystemLoader, select_autoescape

# Monte Carlo agrees with the series when |p_hat - series| <= AGREEMENT_SIGMAS * stderr + bound.
AGREEMENT_SIGMAS = 4.0


def format_probability(value: Any) -> str:
    """Table cell: probabilities in 6-digit scientific notation, everything else as-is."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6e}"
    return str(value)


def mc_agreement(row: Mapping[str, Any]) -> Optional[str]:
    """
    'agree' / 'disagree' for a row that carries both a series value (with its bound)
    and a Monte Carlo estimate; None when either side is missing.
    """
    p_hat = row.get("mc_p_hat")
    stderr = row.get("mc_stderr")
    series = row.get("outage_series")
    if p_hat is None or stderr is None or series is None:
        return None
    bound = row.get("bound") or 0.0
    # the truth lies in [series, series + bound]; measure p_hat against that interval
    gap = max(series - p_hat, p_hat - (series + bound), 0.0)
    return "agree" if gap <= AGREEMENT_SIGMAS * stderr + math.ulp(series) else "disagree"


def annotate_rows(columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> tuple[List[str], List[Dict[str, Any]]]:
    """Adds an mc_check column when at least one row can be cross-checked."""
    checks = [mc_agreement(r) for r in rows]
    if all(c is None for c in checks):
        return list(columns), [dict(r) for r in rows]
    return list(columns) + ["mc_check"], [{**r, "mc_check": c} for r, c in zip(rows, checks)]


def render_report(
    data: Dict[str, Any],
    out_html_path: str,
    get_html: bool,
    template_dir: Optional[str] = None,
    template_name: str = "report.html",
) -> Dict[str, str]:
    """
    Render the printable HTML view of a run document.
    Returns {'html': <absolute path>}, or {'html': <markup>} with get_html.
    """
    out_html = Path(out_html_path)
    env = Environment(
        loader=FileSystemLoader(str(Path(template_dir) if template_dir else out_html.parent)),
        autoescape=select_autoescape(),
    )
    env.filters["sci"] = format_probability

    columns, rows = annotate_rows(data.get("columns", []), data.get("rows", []))
    disagreements = sum(1 for r in rows if r.get("mc_check") == "disagree")
    now = datetime.now(timezone.utc)
    html = env.get_template(template_name).render(
        command=data.get("command", "run"),
        config=data.get("config", {}),
        notes=data.get("notes", []),
        columns=columns,
        rows=rows,
        summary=data.get("summary", {}),
        disagreements=disagreements,
        agreement_sigmas=AGREEMENT_SIGMAS,
        generated_at=now.strftime("%Y-%m-%d %H:%M UTC"),
        year=now.year,
    )
    if get_html:
        return {"html": html}
    out_html.write_text(html, encoding="utf-8")
    return {"html": str(out_html.resolve())}
