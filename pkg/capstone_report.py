"""PDF rendering of job reports."""

import math

from fpdf import FPDF

from capstone_defaults import DEFAULT_SOURCES

NOTE = (
    "* Numerical estimate: capacities come from discretized equilibrium problems, "
    "norms from truncated shell quadrature and Laplacian bounds from finite-difference "
    "samples. Every value is reported with its tolerance; none of it is a proof."
)


def safe_text(text):
    """Replaces symbols the core PDF fonts cannot encode."""
    if not isinstance(text, str):
        return str(text)
    replacements = {
        "∪": "u", "−": "-", "≈": "~", "≤": "<=", "≥": ">=", "∞": "inf",
        "π": "pi", "ψ": "psi", "ε": "eps", "τ": "tau", "φ": "phi", "μ": "mu",
        "ℓ": "l", "²": "^2", "√": "sqrt",
    }
    for symbol, ascii_text in replacements.items():
        text = text.replace(symbol, ascii_text)
    return text.encode("latin-1", "replace").decode("latin-1")


def _format(value) -> str:
    if isinstance(value, float):
        if math.isfinite(value):
            return f"{value:.8g}"
        return str(value)
    if isinstance(value, list):
        if len(value) > 6:
            return f"[{len(value)} values]"
        return ", ".join(_format(v) for v in value)
    return str(value)


def _flatten(data, prefix: str = "") -> dict:
    rows = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.update(_flatten(value, f"{name}."))
        else:
            rows[name] = _format(value)
    return rows


def create_pdf(report: dict) -> bytes:
    """Generates a PDF report and returns it as bytes."""
    pdf = FPDF()
    pdf.add_page()

    pdf.set_font("Helvetica", "B", 16)
    pdf.cell(0, 10, txt="CAPACITY AND BERGMAN DIMENSION REPORT", ln=True, align="C")
    pdf.set_font("Helvetica", "I", 10)
    command = report.get("config", {}).get("command", "")
    pdf.cell(0, 8, txt=safe_text(f"Numerical estimate - job '{command}', version {report.get('version', '')}"), ln=True, align="C")
    pdf.ln(5)

    def add_section(title, data_dict, limit=40):
        pdf.set_font("Helvetica", "B", 12)
        pdf.set_fill_color(200, 220, 255)
        pdf.cell(0, 8, txt=title, ln=True, fill=True)
        pdf.set_font("Helvetica", "", 9)
        items = list(data_dict.items())
        for key, val in items[:limit]:
            pdf.cell(90, 5, txt=safe_text(f"{key}:"), border=0)
            pdf.multi_cell(0, 5, txt=safe_text(str(val)))
        if len(items) > limit:
            pdf.cell(0, 5, txt=f"... {len(items) - limit} more entries in the JSON report", ln=True)
        pdf.ln(4)

    add_section("1. Job Configuration", _flatten(report.get("config", {})))
    add_section("2. Results", _flatten(report.get("results", {})))

    pdf.set_font("Helvetica", "I", 9)
    pdf.set_text_color(100, 100, 100)
    pdf.multi_cell(0, 5, txt=safe_text(NOTE))
    pdf.set_text_color(0, 0, 0)
    pdf.ln(2)
    for warning_text in report.get("warnings", []):
        pdf.set_font("Helvetica", "B", 9)
        pdf.set_text_color(200, 0, 0)
        pdf.multi_cell(0, 5, txt=safe_text(f"WARNING: {warning_text}"))
        pdf.set_text_color(0, 0, 0)
    pdf.ln(3)

    add_section("3. Diagnostics", _flatten(report.get("diagnostics", {})) or {"(none)": ""})
    add_section("4. Basis of Defaults", DEFAULT_SOURCES)

    # bytearray on fpdf2, str on the original fpdf
    output = pdf.output(dest="S")
    if isinstance(output, str):
        return output.encode("latin-1", "replace")
    return bytes(output)
